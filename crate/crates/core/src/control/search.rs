//! Multi-start over control seeds and enumeration of valve directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::restore::{restore_feasibility, RestoreOptions};
use super::sfscp::{sfscp_solve, SfscpOptions, SfscpResult};
use super::{ControlDesign, ControlError, ControlSolution, TimestepControl, TimestepProblem};
use crate::hydraulics::HydraulicSolver;
use crate::network::NetworkModel;
use crate::objective::SccParams;
use crate::relaxation::BoundSet;

/// Objective values closer than this count as ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiStartConfig {
    /// Number of starts per direction pattern.
    pub m: usize,
    pub seed: u64,
    pub sfscp: SfscpOptions,
    pub restore: RestoreOptions,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        MultiStartConfig {
            m: 5,
            seed: 0,
            sfscp: SfscpOptions::default(),
            restore: RestoreOptions::default(),
        }
    }
}

/// Index of the best value, preferring the earliest among ties.
fn best_index<T>(items: &[T], value: impl Fn(&T) -> f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, item) in items.iter().enumerate() {
        if best.is_none_or(|b| value(item) > value(&items[b]) + TIE_TOL) {
            best = Some(i);
        }
    }
    best
}

/// Start points: the seeds in order, then zero valve losses, then uniform
/// draws inside the control box, `max(m, seeds)` in all. Flushing always
/// starts at zero.
fn starts(p: &TimestepProblem, seeds: &[&[f64]], cfg: &MultiStartConfig, stream: u64) -> Vec<Vec<f64>> {
    let n = p.n_controls();
    let nv = p.valves.len();
    let neutral = {
        let mut x = vec![0.0; n];
        p.project(&mut x);
        x
    };
    let mut out = Vec::with_capacity(cfg.m.max(seeds.len()));
    for s in seeds {
        let mut x = s.to_vec();
        x[nv..].iter_mut().for_each(|a| *a = 0.0);
        p.project(&mut x);
        out.push(x);
    }
    if out.len() < cfg.m {
        out.push(neutral.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    while out.len() < cfg.m {
        let mut x = neutral.clone();
        for k in 0..nv {
            if p.upper[k] > p.lower[k] {
                x[k] = rng.gen_range(p.lower[k]..=p.upper[k]);
            }
        }
        out.push(x);
    }
    out
}

/// Run restoration and SFSCP from `m` starts and keep the best local optimum.
/// Returns the winning run and its start index.
pub fn multi_start(
    p: &TimestepProblem,
    seed_x: Option<&[f64]>,
    cfg: &MultiStartConfig,
    stream: u64,
) -> Result<(SfscpResult, usize), ControlError> {
    multi_start_seeded(p, seed_x.as_slice(), cfg, stream)
}

/// [`multi_start`] with any number of seed points tried first.
pub fn multi_start_seeded(
    p: &TimestepProblem,
    seeds: &[&[f64]],
    cfg: &MultiStartConfig,
    stream: u64,
) -> Result<(SfscpResult, usize), ControlError> {
    let points = starts(p, seeds, cfg, stream);
    let runs: Vec<Option<SfscpResult>> = points
        .par_iter()
        .map(|x0| {
            let restored = restore_feasibility(p, x0, &cfg.restore).ok()?;
            sfscp_solve(p, &restored.x, &cfg.sfscp).ok()
        })
        .collect();
    let indexed: Vec<(usize, SfscpResult)> = runs
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| Some((i, r?)))
        .collect();
    let b = best_index(&indexed, |(_, r)| r.best.f).ok_or(ControlError::AllStartsInfeasible { t: p.t })?;
    let (i, r) = indexed.into_iter().nth(b).expect("index from the same list");
    Ok((r, i))
}

/// Best controls of timestep `t` over every direction pattern of the
/// bidirectional valves. `eta_seed` is a full-length valve loss vector.
pub fn enumerate_dbv_directions(
    solver: &HydraulicSolver,
    scc: &SccParams,
    bounds: &BoundSet,
    t: usize,
    design: &ControlDesign,
    eta_seed: Option<&[f64]>,
    cfg: &MultiStartConfig,
) -> Result<TimestepControl, ControlError> {
    enumerate_seeded(solver, scc, bounds, t, design, eta_seed.as_slice(), cfg)
}

/// [`enumerate_dbv_directions`] with several full-length valve loss seeds.
pub fn enumerate_seeded(
    solver: &HydraulicSolver,
    scc: &SccParams,
    bounds: &BoundSet,
    t: usize,
    design: &ControlDesign,
    eta_seeds: &[&[f64]],
    cfg: &MultiStartConfig,
) -> Result<TimestepControl, ControlError> {
    let zero_alpha = vec![0.0; solver.net.n_nodes()];
    let results: Vec<Option<TimestepControl>> = (0..design.n_patterns())
        .into_par_iter()
        .map(|pattern| {
            let dirs = design.pattern(pattern);
            let p = TimestepProblem::new(solver, scc, bounds, t, design, &dirs);
            let seed_x: Vec<Vec<f64>> = eta_seeds.iter().map(|eta| p.compress(eta, &zero_alpha)).collect();
            let seed_refs: Vec<&[f64]> = seed_x.iter().map(Vec::as_slice).collect();
            let stream = ((t as u64) << 32) | ((pattern as u64) << 8);
            let (run, start) = multi_start_seeded(&p, &seed_refs, cfg, stream).ok()?;
            let (eta, alpha) = p.expand(&run.best.x);
            Some(TimestepControl {
                eta,
                alpha,
                q: run.best.q.clone(),
                h: run.best.h.clone(),
                f: run.best.f,
                iterations: run.iterations,
                backtracks: run.backtracks,
                start,
                pattern,
                directions: dirs,
                trace: run.trace,
            })
        })
        .collect();
    let found: Vec<TimestepControl> = results.into_iter().flatten().collect();
    let b = best_index(&found, |c| c.f).ok_or(ControlError::AllStartsInfeasible { t })?;
    Ok(found.into_iter().nth(b).expect("index from the same list"))
}

/// Optimise every timestep for a fixed design.
pub fn solve_controls(
    net: &NetworkModel,
    scc: &SccParams,
    bounds: &BoundSet,
    design: &ControlDesign,
    eta_seed: Option<&[Vec<f64>]>,
    cfg: &MultiStartConfig,
) -> Result<ControlSolution, ControlError> {
    solve_controls_seeded(net, scc, bounds, design, eta_seed.as_slice(), cfg)
}

/// [`solve_controls`] with several seeds, each a valve loss vector per timestep.
pub fn solve_controls_seeded(
    net: &NetworkModel,
    scc: &SccParams,
    bounds: &BoundSet,
    design: &ControlDesign,
    eta_seeds: &[&[Vec<f64>]],
    cfg: &MultiStartConfig,
) -> Result<ControlSolution, ControlError> {
    let solver = HydraulicSolver::new(net);
    let steps = (0..net.n_timesteps())
        .into_par_iter()
        .map(|t| {
            let seeds: Vec<&[f64]> = eta_seeds.iter().map(|e| e[t].as_slice()).collect();
            enumerate_seeded(&solver, scc, bounds, t, design, &seeds, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ControlSolution::from_timesteps(design.clone(), steps))
}
