use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

impl VarId {
    pub fn name(self) -> String {
        format!("C{:07}", self.0)
    }
}

impl RowId {
    pub fn name(self) -> String {
        format!("R{:07}", self.0)
    }
}

/// Symbolic identity of a variable or constraint: the model symbol and its
/// indices, e.g. `q[p=17,g=CCGT1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key {
    pub symbol: String,
    pub indices: Vec<(String, String)>,
}

impl Key {
    pub fn new(symbol: impl Into<String>) -> Self {
        Self {
            symbol: symbol.into(),
            indices: Vec::new(),
        }
    }

    pub fn at(mut self, index: &str, value: impl fmt::Display) -> Self {
        self.indices.push((index.to_string(), value.to_string()));
        self
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol)?;
        if !self.indices.is_empty() {
            write!(f, "[")?;
            for (i, (k, v)) in self.indices.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{k}={v}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .map(|&(v, a)| a * values[v.0])
            .sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimization MILP with a symbolic registry for variables and rows.
/// Infinite bounds are stored as `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub var_keys: Vec<Key>,
    pub constraints: Vec<Constraint>,
    pub row_keys: Vec<Key>,
    /// Constant added to the objective.
    pub objective_offset: f64,
    var_lookup: HashMap<Key, VarId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables.iter().filter(|v| v.integer).count()
    }

    /// Declare a variable. Keys must be unique within the model.
    pub fn add_var(&mut self, key: Key, lower: f64, upper: f64, integer: bool, objective: f64) -> VarId {
        let id = VarId(self.variables.len());
        let previous = self.var_lookup.insert(key.clone(), id);
        assert!(previous.is_none(), "duplicate variable key {key}");
        self.variables.push(Variable {
            lower,
            upper,
            integer,
            objective,
        });
        self.var_keys.push(key);
        id
    }

    pub fn add_continuous(&mut self, key: Key, lower: f64, upper: f64, objective: f64) -> VarId {
        self.add_var(key, lower, upper, false, objective)
    }

    pub fn add_binary(&mut self, key: Key, objective: f64) -> VarId {
        self.add_var(key, 0.0, 1.0, true, objective)
    }

    /// Add a row; repeated variables in `coefficients` are merged and zero
    /// coefficients dropped.
    pub fn add_row(
        &mut self,
        key: Key,
        coefficients: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> RowId {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        let mut pos: HashMap<VarId, usize> = HashMap::new();
        for (v, a) in coefficients {
            match pos.get(&v) {
                Some(&i) => merged[i].1 += a,
                None => {
                    pos.insert(v, merged.len());
                    merged.push((v, a));
                }
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        let id = RowId(self.constraints.len());
        self.constraints.push(Constraint {
            coefficients: merged,
            sense,
            rhs,
        });
        self.row_keys.push(key);
        id
    }

    pub fn lookup(&self, key: &Key) -> Option<VarId> {
        self.var_lookup.get(key).copied()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.objective * x)
                .sum::<f64>()
    }

    /// Structural checks: rows only reference declared variables, bounds are
    /// ordered and not NaN, and the registry is a bijection onto ids.
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        if self.var_keys.len() != n || self.row_keys.len() != self.constraints.len() {
            return Err(MilpError::Invalid("registry length mismatch".into()));
        }
        if self.var_lookup.len() != n {
            return Err(MilpError::Invalid("variable keys are not unique".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::Invalid(format!(
                    "variable {} has bounds [{}, {}]",
                    self.var_keys[i], v.lower, v.upper
                )));
            }
            if !v.objective.is_finite() {
                return Err(MilpError::Invalid(format!(
                    "variable {} has objective {}",
                    self.var_keys[i], v.objective
                )));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(MilpError::Invalid(format!("row {} has rhs {}", self.row_keys[r], c.rhs)));
            }
            for &(v, a) in &c.coefficients {
                if v.0 >= n || !a.is_finite() {
                    return Err(MilpError::Invalid(format!(
                        "row {} references {:?} with coefficient {a}",
                        self.row_keys[r], v
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rebuild the key lookup after keys were replaced wholesale.
    pub fn reindex(&mut self) {
        self.var_lookup = self
            .var_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), VarId(i)))
            .collect();
    }

    /// Same structure and coefficients, ignoring names, registry and the
    /// order of terms within a row.
    pub fn same_structure(&self, other: &Self) -> bool {
        let sorted = |c: &Constraint| {
            let mut terms = c.coefficients.clone();
            terms.sort_by_key(|t| t.0);
            terms
        };
        self.variables == other.variables
            && self.objective_offset == other.objective_offset
            && self.constraints.len() == other.constraints.len()
            && self.constraints.iter().zip(&other.constraints).all(|(a, b)| {
                a.sense == b.sense && a.rhs == b.rhs && sorted(a) == sorted(b)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_repeated_variables() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous(Key::new("x"), 0.0, 1.0, 0.0);
        let y = m.add_continuous(Key::new("y"), 0.0, 1.0, 0.0);
        m.add_row(Key::new("r"), [(x, 1.0), (y, 2.0), (x, 0.5), (y, -2.0)], RowSense::Le, 3.0);
        assert_eq!(m.constraints[0].coefficients, vec![(x, 1.5)]);
    }

    #[test]
    #[should_panic(expected = "duplicate variable key")]
    fn duplicate_keys_are_rejected() {
        let mut m = MilpModel::new("t");
        m.add_binary(Key::new("u").at("p", 1), 0.0);
        m.add_binary(Key::new("u").at("p", 1), 0.0);
    }

    #[test]
    fn key_display() {
        let k = Key::new("q").at("p", 17).at("g", "CCGT1");
        assert_eq!(k.to_string(), "q[p=17,g=CCGT1]");
    }

    #[test]
    fn validate_catches_crossed_bounds() {
        let mut m = MilpModel::new("t");
        m.add_continuous(Key::new("x"), 2.0, 1.0, 0.0);
        assert!(m.validate().is_err());
    }
}
