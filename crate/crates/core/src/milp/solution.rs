use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::model::{MilpModel, RowId, VarId};
use super::mps::format_number;
use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the gap or time limit with an incumbent.
    GapLimit,
    Infeasible,
    Unbounded,
    /// Stopped by a limit without any incumbent.
    NoSolution,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }

    fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NoSolution => "no_solution",
            SolveStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "optimal" => SolveStatus::Optimal,
            "gap_limit" => SolveStatus::GapLimit,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "no_solution" => SolveStatus::NoSolution,
            "error" => SolveStatus::Error,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Includes the model's objective offset.
    pub objective: f64,
    /// Column values indexed by `VarId`; empty without a solution.
    pub values: Vec<f64>,
    /// Relative MIP gap reported by the solver (0 for LPs).
    pub gap: f64,
    pub seconds: f64,
    /// Row duals indexed by `RowId`, when available.
    pub duals: Option<Vec<f64>>,
}

impl Solution {
    pub fn failed(status: SolveStatus, seconds: f64) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            gap: f64::NAN,
            seconds,
            duals: None,
        }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn dual(&self, r: RowId) -> Option<f64> {
        self.duals.as_ref().map(|d| d[r.0])
    }

    /// Plain-text solution file:
    ///
    /// ```text
    /// status optimal
    /// objective 12.5
    /// gap 0
    /// seconds 0.01
    /// columns
    /// C0000000 1
    /// duals
    /// R0000000 -3
    /// ```
    ///
    /// The `duals` block is optional.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), MilpError> {
        writeln!(w, "status {}", self.status.as_str())?;
        writeln!(w, "objective {}", format_number(self.objective))?;
        writeln!(w, "gap {}", format_number(self.gap))?;
        writeln!(w, "seconds {}", format_number(self.seconds))?;
        writeln!(w, "columns")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{} {}", VarId(j).name(), format_number(*v))?;
        }
        if let Some(d) = &self.duals {
            writeln!(w, "duals")?;
            for (r, v) in d.iter().enumerate() {
                writeln!(w, "{} {}", RowId(r).name(), format_number(*v))?;
            }
        }
        Ok(())
    }

    /// Read a solution file written by [`Solution::write`] or an external
    /// adapter. Column and row names are matched against `model`'s generated
    /// names; missing columns are an error, missing duals drop the block.
    pub fn read<R: BufRead>(model: &MilpModel, reader: R) -> Result<Self, MilpError> {
        let bad = |m: String| MilpError::SolutionFormat(m);
        let mut status = None;
        let (mut objective, mut gap, mut seconds) = (f64::NAN, 0.0, 0.0);
        let mut values: Vec<Option<f64>> = vec![None; model.num_vars()];
        let mut duals: Vec<Option<f64>> = vec![None; model.num_rows()];
        let mut any_dual = false;
        enum Block {
            Header,
            Columns,
            Duals,
        }
        let mut block = Block::Header;
        for line in reader.lines() {
            let line = line?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[..] {
                [] => continue,
                ["columns"] => block = Block::Columns,
                ["duals"] => block = Block::Duals,
                [k, v] => {
                    let num = || -> Result<f64, MilpError> {
                        v.parse().map_err(|_| bad(format!("`{v}` is not a number")))
                    };
                    match block {
                        Block::Header => match k {
                            "status" => {
                                status = Some(
                                    SolveStatus::parse(v)
                                        .ok_or_else(|| bad(format!("unknown status `{v}`")))?,
                                )
                            }
                            "objective" => objective = num()?,
                            "gap" => gap = num()?,
                            "seconds" => seconds = num()?,
                            _ => return Err(bad(format!("unknown header `{k}`"))),
                        },
                        Block::Columns => {
                            let j = parse_index(k, 'C', values.len())
                                .ok_or_else(|| bad(format!("unknown column `{k}`")))?;
                            values[j] = Some(num()?);
                        }
                        Block::Duals => {
                            let r = parse_index(k, 'R', duals.len())
                                .ok_or_else(|| bad(format!("unknown row `{k}`")))?;
                            duals[r] = Some(num()?);
                            any_dual = true;
                        }
                    }
                }
                _ => return Err(bad(format!("malformed line `{line}`"))),
            }
        }
        let status = status.ok_or_else(|| bad("missing status".into()))?;
        let values = if status.has_solution() {
            values
                .into_iter()
                .enumerate()
                .map(|(j, v)| v.ok_or_else(|| bad(format!("missing value for {}", VarId(j).name()))))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let duals = if any_dual {
            Some(
                duals
                    .into_iter()
                    .enumerate()
                    .map(|(r, v)| v.ok_or_else(|| bad(format!("missing dual for {}", RowId(r).name()))))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            status,
            objective,
            values,
            gap,
            seconds,
            duals,
        })
    }
}

fn parse_index(name: &str, prefix: char, len: usize) -> Option<usize> {
    let i: usize = name.strip_prefix(prefix)?.parse().ok()?;
    (i < len).then_some(i)
}
