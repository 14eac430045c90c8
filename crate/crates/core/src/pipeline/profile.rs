//! Performance profiles for comparing solvers over a set of experiments.
//!
//! With `f[x][s]` the result of solver `s` on experiment `x` (lower is
//! better, failures `+∞`), the ratio is `r[x][s] = f[x][s] / min_s f[x][s]`
//! and `ρ_s(τ)` is the fraction of experiments with `r[x][s] ≤ τ`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("at least one experiment and one solver are required")]
    Empty,
    #[error("experiment {row} has {found} results, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("experiment {row}, solver {solver}: result {value} must be positive")]
    NonPositive { row: usize, solver: usize, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    pub solvers: Vec<String>,
    /// `ratios[x][s]`; `+∞` where the solver failed.
    pub ratios: Vec<Vec<f64>>,
}

/// Ratios of every result to the best result of its experiment. NaN counts
/// as a failure. An experiment where every solver failed gives `+∞` throughout.
pub fn performance_profile(solvers: Vec<String>, results: &[Vec<f64>]) -> Result<PerformanceProfile, ProfileError> {
    if results.is_empty() || solvers.is_empty() {
        return Err(ProfileError::Empty);
    }
    let mut ratios = Vec::with_capacity(results.len());
    for (row, r) in results.iter().enumerate() {
        if r.len() != solvers.len() {
            return Err(ProfileError::Ragged {
                row,
                found: r.len(),
                expected: solvers.len(),
            });
        }
        let f: Vec<f64> = r.iter().map(|&v| if v.is_nan() { f64::INFINITY } else { v }).collect();
        if let Some((solver, &value)) = f.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(ProfileError::NonPositive { row, solver, value });
        }
        let best = f.iter().copied().fold(f64::INFINITY, f64::min);
        ratios.push(
            f.iter()
                .map(|&v| if best.is_finite() { v / best } else { f64::INFINITY })
                .collect(),
        );
    }
    Ok(PerformanceProfile { solvers, ratios })
}

impl PerformanceProfile {
    /// Fraction of experiments where solver `s` is within a factor `tau` of the best.
    pub fn rho(&self, s: usize, tau: f64) -> f64 {
        let hits = self.ratios.iter().filter(|r| r[s] <= tau).count();
        hits as f64 / self.ratios.len() as f64
    }

    /// Distinct finite ratios, ascending: the points where some curve steps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut taus: Vec<f64> = self
            .ratios
            .iter()
            .flatten()
            .copied()
            .filter(|r| r.is_finite())
            .collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        taus
    }

    /// `tau,<solver>...` with one row per breakpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau");
        for s in &self.solvers {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for tau in self.breakpoints() {
            let _ = write!(out, "{tau}");
            for s in 0..self.solvers.len() {
                let _ = write!(out, ",{}", self.rho(s, tau));
            }
            out.push('\n');
        }
        out
    }
}

/// Parse `experiment,<solver>...` rows. Empty cells, `inf` and `fail` mark failures.
pub fn parse_results_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), ProfileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ProfileError::Empty)?;
    let solvers: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').skip(1).map(str::trim).collect();
        let row = cells
            .iter()
            .map(|c| match c.to_ascii_lowercase().as_str() {
                "" | "inf" | "+inf" | "fail" => Ok(f64::INFINITY),
                _ => c.parse::<f64>().map_err(|e| ProfileError::Parse {
                    line: i + 1,
                    message: format!("{c:?}: {e}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((solvers, rows))
}
