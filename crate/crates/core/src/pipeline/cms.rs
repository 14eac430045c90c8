//! Design-for-control pipeline: relaxation, sampling, control optimisation.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig};
use crate::control::{
    solve_controls, solve_controls_seeded, ControlDesign, ControlError, ControlSolution, Direction, TimestepProblem,
    TIE_TOL,
};
use crate::hydraulics::HydraulicSolver;
use crate::lp::{LpSolver, SimplexSolver};
use crate::network::{forest_core, NetworkModel};
use crate::obbt::{tighten, ObbtReport};
use crate::objective::{azp, scc_indicator, SccParams};
use crate::relaxation::{build_lp, extract_fractional, initial_bounds, lp_bound, BoundSet, DesignConfig};
use crate::sampler::sample_designs;

/// Objective values of the network with every valve open and no flushing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Whether the state satisfies every flow and pressure bound.
    pub feasible: bool,
    pub scc_smooth: f64,
    pub scc_indicator: f64,
    pub azp: f64,
}

/// Evaluate the uncontrolled network. `None` when the simulation fails.
pub fn baseline(net: &NetworkModel, scc: &SccParams, bounds: &BoundSet) -> Option<Baseline> {
    let solver = HydraulicSolver::new(net);
    let none = ControlDesign::default();
    let mut q = Vec::new();
    let mut h = Vec::new();
    let mut f = 0.0;
    let mut feasible = true;
    for t in 0..net.n_timesteps() {
        let p = TimestepProblem::new(&solver, scc, bounds, t, &none, &[]);
        let e = p.evaluate(&[]).ok()?;
        feasible &= e.is_feasible();
        f += e.f;
        q.push(e.q);
        h.push(e.h);
    }
    Some(Baseline {
        feasible,
        scc_smooth: f / net.n_timesteps() as f64,
        scc_indicator: scc_indicator(&q, net, scc),
        azp: azp(&h, net),
    })
}

/// Valves of a design, by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub prv_links: Vec<String>,
    pub dbv_links: Vec<String>,
    pub afv_nodes: Vec<String>,
}

impl DesignReport {
    pub fn new(net: &NetworkModel, d: &ControlDesign) -> Self {
        DesignReport {
            prv_links: d.prv_links.iter().map(|&j| net.links[j].id.clone()).collect(),
            dbv_links: d.dbv_links.iter().map(|&j| net.links[j].id.clone()).collect(),
            afv_nodes: d.afv_nodes.iter().map(|&i| net.nodes[i].id.clone()).collect(),
        }
    }
}

/// Settings chosen for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepReport {
    pub scc_smooth: f64,
    /// Valve head loss (m) per valve link.
    pub eta: BTreeMap<String, f64>,
    /// Flushing rate (m³/s) per flushing node.
    pub alpha: BTreeMap<String, f64>,
    /// Acting direction of every bidirectional valve.
    pub directions: BTreeMap<String, Direction>,
    pub pattern: usize,
    pub start: usize,
    pub iterations: usize,
}

fn timestep_reports(net: &NetworkModel, sol: &ControlSolution) -> Vec<TimestepReport> {
    let d = &sol.design;
    sol.timesteps
        .iter()
        .map(|s| TimestepReport {
            scc_smooth: s.f,
            eta: d
                .prv_links
                .iter()
                .chain(&d.dbv_links)
                .map(|&j| (net.links[j].id.clone(), s.eta[j]))
                .collect(),
            alpha: d
                .afv_nodes
                .iter()
                .map(|&i| (net.nodes[i].id.clone(), s.alpha[i]))
                .collect(),
            directions: d
                .dbv_links
                .iter()
                .zip(&s.directions)
                .map(|(&j, &dir)| (net.links[j].id.clone(), dir))
                .collect(),
            pattern: s.pattern,
            start: s.start,
            iterations: s.iterations,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Feasible,
    Infeasible,
}

/// One sampled design and how its control optimisation went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    /// Newly placed control valves.
    pub dbv_links: Vec<String>,
    pub afv_nodes: Vec<String>,
    pub status: CandidateStatus,
    /// Smoothed SCC of the best controls; absent when infeasible.
    pub scc_smooth: Option<f64>,
    pub iterations: usize,
}

/// Size of the relaxation and its optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub rows: usize,
    pub columns: usize,
    pub nonzeros: usize,
    pub hw_cuts: usize,
    pub sigmoid_cuts: usize,
    pub simplex_iterations: usize,
    pub lp_bound: f64,
}

/// Outcome of the design-for-control pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmsSolution {
    pub n_v: usize,
    pub n_f: usize,
    pub seed: u64,
    pub obbt: bool,
    pub best_candidate: usize,
    pub design: DesignReport,
    pub timesteps: Vec<TimestepReport>,
    pub scc_smooth: f64,
    pub scc_indicator: f64,
    pub azp: f64,
    pub lp_bound: f64,
    pub uncontrolled: Option<Baseline>,
    /// Smoothed SCC with only the existing valves optimised.
    pub control_only: Option<f64>,
    pub relaxation: RelaxationReport,
    pub candidates: Vec<CandidateRecord>,
    /// Wall time per stage (s).
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    pub obbt_report: Option<ObbtReport>,
    #[serde(skip)]
    pub control: ControlSolution,
}

impl CmsSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialises")
    }
}

/// Outcome of optimising the existing valves only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub seed: u64,
    pub design: DesignReport,
    pub timesteps: Vec<TimestepReport>,
    pub scc_smooth: f64,
    pub scc_indicator: f64,
    pub azp: f64,
    pub uncontrolled: Option<Baseline>,
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    pub control: ControlSolution,
}

impl ControlReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

struct Stopwatch {
    last: Instant,
    start: Instant,
    times: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Stopwatch {
            last: now,
            start: now,
            times: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.times.insert(stage.to_string(), (now - self.last).as_secs_f64());
        self.last = now;
    }

    fn finish(mut self) -> BTreeMap<String, f64> {
        self.times.insert("total".into(), self.start.elapsed().as_secs_f64());
        self.times
    }
}

fn masked(values: &[f64], allowed: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    allowed.iter().for_each(|&k| out[k] = values[k]);
    out
}

/// Optimise the valves already in the network.
pub fn run_control_only(net: &NetworkModel, cfg: &RunConfig) -> Result<ControlReport, PipelineError> {
    cfg.validate()?;
    let mut clock = Stopwatch::new();
    let scc = cfg.scc_params(net)?;
    let bounds = initial_bounds(net, &cfg.bound_options(), None, 0);
    bounds.check()?;
    let uncontrolled = baseline(net, &scc, &bounds);
    clock.lap("bounds");
    let design = ControlDesign::existing(net);
    let control = solve_controls(net, &scc, &bounds, &design, None, &cfg.multi_start()).map_err(|e| match e {
        ControlError::AllStartsInfeasible { .. } => PipelineError::AllInfeasible { candidates: 1 },
        e => e.into(),
    })?;
    clock.lap("control");
    Ok(ControlReport {
        seed: cfg.seed,
        design: DesignReport::new(net, &design),
        timesteps: timestep_reports(net, &control),
        scc_smooth: control.f,
        scc_indicator: scc_indicator(&control.q, net, &scc),
        azp: azp(&control.h, net),
        uncontrolled,
        timings: clock.finish(),
        control,
    })
}

/// Tighten the flow bounds of core links for the configured valve counts.
pub fn run_obbt(net: &NetworkModel, cfg: &RunConfig) -> Result<(BoundSet, ObbtReport), PipelineError> {
    cfg.validate()?;
    let scc = cfg.scc_params(net)?;
    let decomposition = forest_core(net);
    let design_cfg = DesignConfig::from_network(net, cfg.n_v, cfg.n_f);
    design_cfg.check()?;
    let base = initial_bounds(net, &cfg.bound_options(), Some(&decomposition), cfg.n_f);
    base.check()?;
    let out = tighten(
        net,
        &scc,
        &base,
        &design_cfg,
        &decomposition,
        &cfg.obbt_options(),
        &SimplexSolver::default(),
    )?;
    Ok(out)
}

/// Place `n_v` control valves and `n_f` flushing valves and optimise their settings.
pub fn run_cms(net: &NetworkModel, cfg: &RunConfig) -> Result<CmsSolution, PipelineError> {
    cfg.validate()?;
    let mut clock = Stopwatch::new();
    let scc = cfg.scc_params(net)?;
    let decomposition = forest_core(net);
    let design_cfg = DesignConfig::from_network(net, cfg.n_v, cfg.n_f);
    design_cfg.check()?;
    let base = initial_bounds(net, &cfg.bound_options(), Some(&decomposition), cfg.n_f);
    base.check()?;
    let uncontrolled = baseline(net, &scc, &base);
    clock.lap("bounds");

    let lp_solver = SimplexSolver::default();
    let (bounds, obbt_report) = if cfg.obbt.enabled {
        let (b, r) = tighten(
            net,
            &scc,
            &base,
            &design_cfg,
            &decomposition,
            &cfg.obbt_options(),
            &lp_solver,
        )?;
        (b, Some(r))
    } else {
        (base.clone(), None)
    };
    clock.lap("obbt");

    let relax = build_lp(net, &scc, &bounds, &design_cfg)?;
    let sol = lp_solver.solve(&relax.lp, None);
    let frac = extract_fractional(&sol, &relax.map)?;
    let relaxation = RelaxationReport {
        rows: relax.lp.n_rows(),
        columns: relax.lp.n_cols(),
        nonzeros: relax.lp.nnz(),
        hw_cuts: relax.n_hw_cuts,
        sigmoid_cuts: relax.n_sigmoid_cuts,
        simplex_iterations: sol.iterations,
        lp_bound: lp_bound(&sol),
    };
    clock.lap("relaxation");

    let y = masked(&frac.y, &design_cfg.afv_candidates);
    let z = masked(&frac.z, &design_cfg.dbv_candidates);
    let designs = sample_designs(&y, &z, cfg.n_v, cfg.n_f, cfg.n_samples(net.n_links()), cfg.seed)?;
    clock.lap("sampling");

    let ms = cfg.multi_start();
    let control_only = solve_controls(net, &scc, &base, &ControlDesign::existing(net), None, &ms).ok();
    clock.lap("control_only");
    let results: Vec<(ControlDesign, Result<ControlSolution, ControlError>)> = designs
        .par_iter()
        .map(|d| {
            let design = ControlDesign::with_additions(net, &d.dbv_links, &d.afv_nodes);
            let mut seeds = vec![frac.eta.as_slice()];
            if let Some(c) = &control_only {
                seeds.push(c.eta.as_slice());
            }
            let r = solve_controls_seeded(net, &scc, &base, &design, &seeds, &ms);
            (design, r)
        })
        .collect();
    clock.lap("control");

    let mut candidates = Vec::with_capacity(designs.len());
    let mut best: Option<usize> = None;
    for (k, (d, (_, r))) in designs.iter().zip(&results).enumerate() {
        let ok = r.as_ref().ok();
        if let Some(s) = ok {
            let better = best.is_none_or(|b| {
                let fb = results[b].1.as_ref().map_or(f64::NEG_INFINITY, |c| c.f);
                s.f > fb + TIE_TOL
            });
            if better {
                best = Some(k);
            }
        }
        candidates.push(CandidateRecord {
            index: d.index,
            dbv_links: d.dbv_links.iter().map(|&j| net.links[j].id.clone()).collect(),
            afv_nodes: d.afv_nodes.iter().map(|&i| net.nodes[i].id.clone()).collect(),
            status: if ok.is_some() {
                CandidateStatus::Feasible
            } else {
                CandidateStatus::Infeasible
            },
            scc_smooth: ok.map(|s| s.f),
            iterations: ok.map_or(0, |s| s.iterations()),
        });
    }
    let Some(b) = best else {
        return Err(PipelineError::AllInfeasible {
            candidates: candidates.len(),
        });
    };
    let (design, result) = results.into_iter().nth(b).expect("index from the same list");
    let control = result.expect("best candidate is feasible");
    Ok(CmsSolution {
        n_v: cfg.n_v,
        n_f: cfg.n_f,
        seed: cfg.seed,
        obbt: cfg.obbt.enabled,
        best_candidate: b,
        design: DesignReport::new(net, &design),
        timesteps: timestep_reports(net, &control),
        scc_smooth: control.f,
        scc_indicator: scc_indicator(&control.q, net, &scc),
        azp: azp(&control.h, net),
        lp_bound: relaxation.lp_bound,
        uncontrolled,
        control_only: control_only.map(|c| c.f),
        relaxation,
        candidates,
        timings: clock.finish(),
        obbt_report,
        control,
    })
}
