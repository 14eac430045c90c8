//! Result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CmsSolution, ControlReport, PipelineError};
use crate::network::NetworkModel;
use crate::objective::{velocity_cdf, velocity_cdf_csv};

pub const SOLUTION_JSON: &str = "solution.json";
pub const VELOCITY_CDF_CSV: &str = "velocity_cdf.csv";
pub const CANDIDATES_CSV: &str = "candidates.csv";
pub const OBBT_REPORT_JSON: &str = "obbt_report.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const TRACE_CSV: &str = "trace.csv";

/// Write `contents` to `dir/name`, creating `dir` when needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, PipelineError> {
    let path = dir.join(name);
    let wrap = |source| PipelineError::Write {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(wrap)?;
    std::fs::write(&path, contents).map_err(wrap)?;
    Ok(path)
}

/// `index,dbv_links,afv_nodes,status,scc_smooth,iterations`; ids within a
/// cell are separated by `;`.
pub fn candidates_csv(sol: &CmsSolution) -> String {
    let mut out = String::from("index,dbv_links,afv_nodes,status,scc_smooth,iterations\n");
    for c in &sol.candidates {
        let status = match c.status {
            super::CandidateStatus::Feasible => "feasible",
            super::CandidateStatus::Infeasible => "infeasible",
        };
        let f = c.scc_smooth.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{status},{f},{}",
            c.index,
            c.dbv_links.join(";"),
            c.afv_nodes.join(";"),
            c.iterations
        );
    }
    out
}

/// Write the design run's files into `dir`. Returns the paths written.
pub fn write_cms(
    dir: &Path,
    net: &NetworkModel,
    sol: &CmsSolution,
    trace: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut paths = vec![
        write_file(dir, SOLUTION_JSON, &sol.to_json())?,
        write_file(
            dir,
            VELOCITY_CDF_CSV,
            &velocity_cdf_csv(&velocity_cdf(&sol.control.q, net)),
        )?,
        write_file(dir, CANDIDATES_CSV, &candidates_csv(sol))?,
    ];
    if let Some(r) = &sol.obbt_report {
        paths.push(write_file(dir, OBBT_REPORT_JSON, &r.to_json())?);
    }
    if trace {
        paths.push(write_file(dir, TRACE_CSV, &sol.control.trace_csv())?);
    }
    Ok(paths)
}

/// Write the control run's files into `dir`. Returns the paths written.
pub fn write_control(
    dir: &Path,
    net: &NetworkModel,
    report: &ControlReport,
    trace: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut paths = vec![
        write_file(dir, SOLUTION_JSON, &report.to_json())?,
        write_file(
            dir,
            VELOCITY_CDF_CSV,
            &velocity_cdf_csv(&velocity_cdf(&report.control.q, net)),
        )?,
    ];
    if trace {
        paths.push(write_file(dir, TRACE_CSV, &report.control.trace_csv())?);
    }
    Ok(paths)
}
