//! Linear programs: data model, solver contract and the built-in simplex.

mod lu;
mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{SimplexOptions, SimplexSolver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} references column {col} but the program has {n_cols} columns")]
    Dimension { row: usize, col: usize, n_cols: usize },
    #[error("NaN coefficient in {0}")]
    NotANumber(String),
    #[error("column {name}: lower bound {lower} exceeds upper bound {upper}")]
    InconsistentBounds { name: String, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min cᵀx` subject to sparse rows and column bounds (infinite bounds allowed).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_col(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_cols();
        for j in 0..n {
            if self.objective[j].is_nan() || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::NotANumber(self.names[j].clone()));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::InconsistentBounds {
                    name: self.names[j].clone(),
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.rhs.is_nan() || row.coeffs.iter().any(|(_, v)| v.is_nan()) {
                return Err(LpError::NotANumber(row.name.clone()));
            }
            if let Some(&(col, _)) = row.coeffs.iter().find(|(c, _)| *c >= n) {
                return Err(LpError::Dimension { row: i, col, n_cols: n });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation, each divided by `1 + |rhs|` (or `1 + |bound|`).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_cols() {
            worst = worst.max((self.lower[j] - x[j]) / (1.0 + self.lower[j].abs()));
            worst = worst.max((x[j] - self.upper[j]) / (1.0 + self.upper[j].abs()));
        }
        for row in &self.rows {
            let ax: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let scale = 1.0 + row.rhs.abs();
            let v = match row.sense {
                Sense::Le => ax - row.rhs,
                Sense::Ge => row.rhs - ax,
                Sense::Eq => (ax - row.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    /// Write the program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let name = |j: usize| lp_name(&self.names[j], 'x', j);
        let mut out = String::from("Minimize\n obj:");
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write_term(&mut out, c, &name(j));
                any = true;
            }
        }
        if !any && self.n_cols() > 0 {
            write_term(&mut out, 0.0, &name(0));
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " {}:", lp_name(&row.name, 'r', i));
            if row.coeffs.is_empty() && self.n_cols() > 0 {
                write_term(&mut out, 0.0, &name(0));
            }
            for &(j, v) in &row.coeffs {
                write_term(&mut out, v, &name(j));
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for j in 0..self.n_cols() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let n = name(j);
            let _ = if lo == hi {
                writeln!(out, " {n} = {}", fmt_num(lo))
            } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                writeln!(out, " {n} free")
            } else {
                writeln!(out, " {} <= {n} <= {}", fmt_num(lo), fmt_num(hi))
            };
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

fn write_term(out: &mut String, c: f64, name: &str) {
    let sign = if c < 0.0 { '-' } else { '+' };
    let _ = write!(out, " {sign} {:e} {name}", c.abs());
}

/// Replace characters the LP format does not accept.
fn lp_name(raw: &str, prefix: char, index: usize) -> String {
    let ok = |c: char| c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c);
    let mut s: String = raw.chars().map(|c| if ok(c) { c } else { '_' }).collect();
    let first = s.chars().next();
    if first.is_none_or(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E') {
        s = format!("{prefix}{index}_{s}");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column held at zero.
    Zero,
}

/// Basis over structural columns followed by one slack per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with `c - Aᵀy` the reduced costs.
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// `bᵀy + Σ d_j x_j` over columns, with `d = c - Aᵀy`.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut d = lp.objective.clone();
        let mut value = 0.0;
        for (row, &y) in lp.rows.iter().zip(&self.duals) {
            value += row.rhs * y;
            for &(j, a) in &row.coeffs {
                d[j] -= a * y;
            }
        }
        value + d.iter().zip(&self.x).map(|(d, x)| d * x).sum::<f64>()
    }
}

/// Anything that can solve a [`LinearProgram`], optionally from a starting basis.
pub trait LpSolver: Sync {
    fn solve(&self, lp: &LinearProgram, warm: Option<&Basis>) -> LpSolution;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_format_dump() {
        let mut lp = LinearProgram::new();
        let x = lp.add_col("x", 0.0, 10.0, -1.0);
        let y = lp.add_col("q[3]", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row("cap", vec![(x, 1.0), (y, -2.5)], Sense::Le, 1.0);
        let text = lp.to_lp_format();
        assert!(text.starts_with("Minimize\n obj: - 1e0 x\n"));
        assert!(text.contains(" cap: + 1e0 x - 2.5e0 q_3_ <= 1e0\n"));
        assert!(text.contains(" q_3_ free\n"));
        assert!(text.contains(" 0e0 <= x <= 1e1\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn validation_catches_bad_programs() {
        let mut lp = LinearProgram::new();
        lp.add_col("x", 1.0, 0.0, 0.0);
        assert!(matches!(lp.validate(), Err(LpError::InconsistentBounds { .. })));
        let mut lp = LinearProgram::new();
        lp.add_col("x", 0.0, 1.0, 0.0);
        lp.add_row("r", vec![(3, 1.0)], Sense::Le, 0.0);
        assert!(matches!(lp.validate(), Err(LpError::Dimension { col: 3, .. })));
        let mut lp = LinearProgram::new();
        lp.add_col("x", 0.0, 1.0, f64::NAN);
        assert!(matches!(lp.validate(), Err(LpError::NotANumber(_))));
    }
}
