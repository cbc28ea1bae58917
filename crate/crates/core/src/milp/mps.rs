//! Fixed-form MPS output and a tolerant MPS reader.
//!
//! Column and row names are generated (`C0000042`, `R0000007`) so they always
//! fit the 8-character name fields; the symbolic meaning of each name lives in
//! the registry sidecar. Numbers are written in shortest round-trip form, so a
//! value longer than 12 characters overflows its field; the reader splits on
//! whitespace and accepts either layout.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::model::{Constraint, Key, MilpModel, RowSense, Variable, VarId};
use super::MilpError;

const OBJ_ROW: &str = "OBJ";

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn line<W: Write>(w: &mut W, fields: [&str; 6]) -> std::io::Result<()> {
    let [f1, f2, f3, f4, f5, f6] = fields;
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if !f5.is_empty() {
        s.push_str(&format!("   {f5:<8}  {f6:>12}"));
    }
    writeln!(w, "{}", s.trim_end())
}

/// Write `model` in fixed-form MPS. Output depends only on the model, so the
/// same model always produces the same bytes.
pub fn write_mps<W: Write>(model: &MilpModel, mut w: W) -> Result<(), MilpError> {
    model.validate()?;
    let name = if model.name.is_empty() { "MODEL" } else { &model.name };
    writeln!(w, "NAME          {name}")?;
    writeln!(w, "ROWS")?;
    line(&mut w, ["N", OBJ_ROW, "", "", "", ""])?;
    for (r, c) in model.constraints.iter().enumerate() {
        let t = match c.sense {
            RowSense::Le => "L",
            RowSense::Eq => "E",
            RowSense::Ge => "G",
        };
        line(&mut w, [t, &super::model::RowId(r).name(), "", "", "", ""])?;
    }

    // column-wise view of the row coefficients
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.coefficients {
            by_col[v.0].push((r, a));
        }
    }

    writeln!(w, "COLUMNS")?;
    let mut in_int = false;
    let mut marker = 0;
    for (j, var) in model.variables.iter().enumerate() {
        if var.integer != in_int {
            let tag = if var.integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(w, "    MARKER{marker:<4}  'MARKER'                 {tag}")?;
            marker += 1;
            in_int = var.integer;
        }
        let col = VarId(j).name();
        let mut entries: Vec<(String, f64)> = Vec::with_capacity(by_col[j].len() + 1);
        if var.objective != 0.0 || by_col[j].is_empty() {
            entries.push((OBJ_ROW.to_string(), var.objective));
        }
        entries.extend(
            by_col[j]
                .iter()
                .map(|&(r, a)| (super::model::RowId(r).name(), a)),
        );
        for pair in entries.chunks(2) {
            let (r1, a1) = &pair[0];
            let a1 = format_number(*a1);
            match pair.get(1) {
                Some((r2, a2)) => {
                    line(&mut w, ["", &col, r1, &a1, r2, &format_number(*a2)])?
                }
                None => line(&mut w, ["", &col, r1, &a1, "", ""])?,
            }
        }
    }
    if in_int {
        writeln!(w, "    MARKER{marker:<4}  'MARKER'                 'INTEND'")?;
    }

    writeln!(w, "RHS")?;
    if model.objective_offset != 0.0 {
        line(&mut w, ["", "RHS", OBJ_ROW, &format_number(-model.objective_offset), "", ""])?;
    }
    for (r, c) in model.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            line(
                &mut w,
                ["", "RHS", &super::model::RowId(r).name(), &format_number(c.rhs), "", ""],
            )?;
        }
    }

    writeln!(w, "BOUNDS")?;
    for (j, v) in model.variables.iter().enumerate() {
        let col = VarId(j).name();
        let bnd = |w: &mut W, t: &str, val: Option<f64>| {
            let num = val.map(format_number).unwrap_or_default();
            line(w, [t, "BND", &col, &num, "", ""])
        };
        let (lo, up) = (v.lower, v.upper);
        if v.integer && lo == 0.0 && up == 1.0 {
            bnd(&mut w, "BV", Some(1.0))?;
        } else if lo == up {
            bnd(&mut w, "FX", Some(lo))?;
        } else if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            bnd(&mut w, "FR", None)?;
        } else {
            if lo == f64::NEG_INFINITY {
                bnd(&mut w, "MI", None)?;
            } else if lo != 0.0 {
                bnd(&mut w, "LO", Some(lo))?;
            }
            if up == f64::INFINITY {
                if v.integer {
                    bnd(&mut w, "PL", None)?;
                }
            } else {
                bnd(&mut w, "UP", Some(up))?;
            }
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn parse_number(tok: &str, line_no: usize) -> Result<f64, MilpError> {
    tok.parse()
        .map_err(|_| MilpError::Parse(line_no, format!("`{tok}` is not a number")))
}

/// Read an MPS file (fixed or free layout, names without spaces). Variable
/// and row keys are the MPS names; attach a registry to restore symbols.
pub fn parse_mps<R: BufRead>(reader: R) -> Result<MilpModel, MilpError> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: std::collections::HashMap<String, usize> = Default::default();
    let mut col_index: std::collections::HashMap<String, usize> = Default::default();
    let mut in_int = false;
    let mut has_upper = Vec::<bool>::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') && !line.starts_with('\t') {
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap_or_default();
            section = match head {
                "NAME" => {
                    model.name = toks.next().unwrap_or_default().to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    return Err(MilpError::Parse(line_no, format!("unsupported section `{other}`")))
                }
            };
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Rows => {
                let [t, name] = toks[..] else {
                    return Err(MilpError::Parse(line_no, "expected `<type> <name>`".into()));
                };
                let sense = match t {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "E" => RowSense::Eq,
                    "G" => RowSense::Ge,
                    _ => return Err(MilpError::Parse(line_no, format!("row type `{t}`"))),
                };
                row_index.insert(name.to_string(), model.constraints.len());
                model.constraints.push(Constraint {
                    coefficients: Vec::new(),
                    sense,
                    rhs: 0.0,
                });
                model.row_keys.push(Key::new(name));
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    in_int = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        m => return Err(MilpError::Parse(line_no, format!("marker {m}"))),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(MilpError::Parse(line_no, "expected 3 or 5 fields".into()));
                }
                let col = toks[0];
                let j = match col_index.get(col) {
                    Some(&j) => j,
                    None => {
                        let j = model.variables.len();
                        col_index.insert(col.to_string(), j);
                        model.variables.push(Variable {
                            lower: 0.0,
                            upper: f64::INFINITY,
                            integer: in_int,
                            objective: 0.0,
                        });
                        model.var_keys.push(Key::new(col));
                        has_upper.push(false);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let a = parse_number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.variables[j].objective = a;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| {
                            MilpError::Parse(line_no, format!("unknown row `{}`", pair[0]))
                        })?;
                        model.constraints[r].coefficients.push((VarId(j), a));
                    }
                }
            }
            Section::Rhs => {
                let fields = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in fields.chunks(2) {
                    if pair.len() != 2 {
                        return Err(MilpError::Parse(line_no, "dangling RHS field".into()));
                    }
                    let v = parse_number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.objective_offset = -v;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| {
                            MilpError::Parse(line_no, format!("unknown row `{}`", pair[0]))
                        })?;
                        model.constraints[r].rhs = v;
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(MilpError::Parse(line_no, "short BOUNDS line".into()));
                }
                let t = toks[0];
                let j = *col_index
                    .get(toks[2])
                    .ok_or_else(|| MilpError::Parse(line_no, format!("unknown column `{}`", toks[2])))?;
                let val = || -> Result<f64, MilpError> {
                    toks.get(3)
                        .ok_or_else(|| MilpError::Parse(line_no, "missing bound value".into()))
                        .and_then(|s| parse_number(s, line_no))
                };
                let v = &mut model.variables[j];
                match t {
                    "UP" => {
                        v.upper = val()?;
                        has_upper[j] = true;
                    }
                    "LO" => v.lower = val()?,
                    "FX" => {
                        let x = val()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                        v.integer = true;
                    }
                    "LI" => {
                        v.lower = val()?;
                        v.integer = true;
                    }
                    "UI" => {
                        v.upper = val()?;
                        v.integer = true;
                    }
                    _ => return Err(MilpError::Parse(line_no, format!("bound type `{t}`"))),
                }
            }
            Section::None | Section::End => {
                return Err(MilpError::Parse(line_no, "data outside a section".into()))
            }
        }
    }
    model.reindex();
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    #[serde(flatten)]
    pub key: Key,
}

/// Sidecar mapping generated MPS names back to model symbols and indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub variables: Vec<RegistryEntry>,
    pub rows: Vec<RegistryEntry>,
}

impl Registry {
    pub fn of(model: &MilpModel) -> Self {
        Self {
            variables: model
                .var_keys
                .iter()
                .enumerate()
                .map(|(i, k)| RegistryEntry {
                    name: VarId(i).name(),
                    key: k.clone(),
                })
                .collect(),
            rows: model
                .row_keys
                .iter()
                .enumerate()
                .map(|(i, k)| RegistryEntry {
                    name: super::model::RowId(i).name(),
                    key: k.clone(),
                })
                .collect(),
        }
    }

    /// Replace the MPS-name keys of a parsed model with the symbolic keys.
    pub fn attach(&self, model: &mut MilpModel) -> Result<(), MilpError> {
        if self.variables.len() != model.num_vars() || self.rows.len() != model.num_rows() {
            return Err(MilpError::Invalid("registry does not match model size".into()));
        }
        for (i, e) in self.variables.iter().enumerate() {
            if model.var_keys[i].symbol != e.name {
                return Err(MilpError::Invalid(format!("registry entry {} out of order", e.name)));
            }
            model.var_keys[i] = e.key.clone();
        }
        for (i, e) in self.rows.iter().enumerate() {
            model.row_keys[i] = e.key.clone();
        }
        model.reindex();
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}
