//! Control solver: hand-derived cases, restoration oracles and run invariants.

use std::time::Instant;

use sccopt_core::control::{
    multi_start, restore_feasibility, sfscp_solve, solve_controls, ControlDesign, ControlError, Direction,
    MultiStartConfig, RestoreOptions, SfscpOptions, TimestepProblem,
};
use sccopt_core::fixtures;
use sccopt_core::forest_core;
use sccopt_core::hydraulics::{phi, HydraulicSolver};
use sccopt_core::objective::{scc_smooth_timestep, SccParams};
use sccopt_core::relaxation::{initial_bounds, BoundOptions, BoundSet};
use sccopt_core::{NetworkBuilder, NetworkModel};

fn bounds(net: &NetworkModel, n_f: usize) -> BoundSet {
    initial_bounds(net, &BoundOptions::default(), Some(&forest_core(net)), n_f)
}

/// Reservoir at 50 m, an empty junction, then a junction drawing 5 L/s.
fn two_pipe_line() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 50.0)
        .junction("J1", 0.0, 0.0)
        .junction("J2", 0.0, 0.005)
        .pipe("P1", "R1", "J1", 500.0, 0.2, 120.0)
        .pipe("P2", "J1", "J2", 500.0, 0.2, 120.0);
    b.build().unwrap()
}

#[test]
fn single_pipe_flushing_reaches_full_self_cleaning() {
    let net = fixtures::single_pipe();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 1);
    let design = ControlDesign::with_additions(&net, &[], &[0]);
    let cfg = MultiStartConfig {
        m: 1,
        ..Default::default()
    };
    let clock = Instant::now();
    let sol = solve_controls(&net, &scc, &b, &design, None, &cfg).unwrap();
    assert!(clock.elapsed().as_secs_f64() < 1.0);
    // Mass balance: q = 0.005 + 0.025; u = q / (π 0.15²).
    let area = std::f64::consts::PI * 0.15 * 0.15;
    let u = (0.005 + 0.025) / area;
    assert!((u - 0.424).abs() < 1e-3);
    assert!((sol.alpha[0][0] - 0.025).abs() < 1e-9, "{}", sol.alpha[0][0]);
    assert!((sol.q[0][0] / area - u).abs() < 1e-6);
    assert!(sol.f >= 0.99);
}

#[test]
fn stationary_start_is_returned_after_one_iteration() {
    let net = fixtures::single_pipe();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 1);
    let solver = HydraulicSolver::new(&net);
    let design = ControlDesign::with_additions(&net, &[], &[0]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[]);
    let res = sfscp_solve(&p, &[0.025], &SfscpOptions::default()).unwrap();
    assert_eq!(res.iterations, 1);
    assert_eq!(res.best.x, vec![0.025]);
    assert_eq!(res.history.len(), 1);
}

#[test]
fn feasible_seed_is_not_moved() {
    let net = two_pipe_line();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 0);
    let solver = HydraulicSolver::new(&net);
    let design = ControlDesign::with_additions(&net, &[1], &[]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);
    let e = restore_feasibility(&p, &[3.0], &RestoreOptions::default()).unwrap();
    assert_eq!(e.x, vec![3.0]);
}

#[test]
fn restoration_matches_bisection_on_the_valve_loss() {
    let net = two_pipe_line();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 0);
    let solver = HydraulicSolver::new(&net);
    let design = ControlDesign::with_additions(&net, &[1], &[]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);
    // Oracle: largest η with pressure 15 m at J2, by bisection on the simulated head.
    let head = |eta: f64| p.evaluate(&[eta]).unwrap().h[1];
    let (mut lo, mut hi) = (0.0, 35.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if head(mid) >= 15.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 10.67 * 500.0 / (120f64.powf(1.852) * 0.2f64.powf(4.871));
    let closed_form = 35.0 - 2.0 * phi(r, 1.852, 0.005);
    assert!((lo - closed_form).abs() < 1e-6, "{lo} vs {closed_form}");
    assert!(head(35.0) < 15.0);
    let e = restore_feasibility(&p, &[35.0], &RestoreOptions::default()).unwrap();
    assert!(e.is_feasible());
    assert!(e.x[0] <= lo + 1e-9 && e.x[0] >= lo - 1e-2, "{} vs {lo}", e.x[0]);
}

#[test]
fn cut_off_demand_is_infeasible() {
    let net = two_pipe_line();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 0);
    let solver = HydraulicSolver::new(&net);
    let mut design = ControlDesign::with_additions(&net, &[1], &[]);
    design.closed_links = vec![0];
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);
    let err = restore_feasibility(&p, &[0.0], &RestoreOptions::default()).unwrap_err();
    assert!(matches!(err, ControlError::Infeasible { .. }));
}

#[test]
fn pattern_counts_follow_valve_count() {
    let net = fixtures::grid(3, 3);
    assert_eq!(ControlDesign::with_additions(&net, &[], &[]).n_patterns(), 1);
    let d = ControlDesign::with_additions(&net, &[2, 5], &[]);
    assert_eq!(d.n_patterns(), 4);
    let all: std::collections::HashSet<_> = (0..4).map(|p| d.pattern(p)).collect();
    assert_eq!(all.len(), 4);
}

/// Two equal demands fed symmetrically; the link between them carries no flow.
fn symmetric_pair() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 40.0)
        .junction("A", 0.0, 0.004)
        .junction("B", 0.0, 0.004)
        .pipe("PA", "R1", "A", 300.0, 0.15, 120.0)
        .pipe("PB", "R1", "B", 300.0, 0.15, 120.0)
        .pipe("AB", "A", "B", 200.0, 0.1, 120.0);
    b.build().unwrap()
}

#[test]
fn symmetric_directions_tie_to_the_first_pattern() {
    let net = symmetric_pair();
    let scc = SccParams::with_subset(&net, 50.0, 0.2, &[0, 1]);
    let b = bounds(&net, 0);
    let design = ControlDesign::with_additions(&net, &[2], &[]);
    let sol = solve_controls(
        &net,
        &scc,
        &b,
        &design,
        None,
        &MultiStartConfig {
            m: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(sol.timesteps[0].pattern, 0);
    assert_eq!(sol.timesteps[0].directions, vec![Direction::Forward]);
}

#[test]
fn single_start_is_a_plain_restored_sfscp_run() {
    let net = fixtures::prv_loop();
    let scc = SccParams::new(&net, 50.0, 0.2);
    let b = bounds(&net, 1);
    let solver = HydraulicSolver::new(&net);
    let j2 = net.node_index()["J2"].demand().unwrap();
    let design = ControlDesign::with_additions(&net, &[], &[j2]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[]);
    let cfg = MultiStartConfig {
        m: 1,
        ..Default::default()
    };
    let seed = [4.0, 0.0];
    let (run, start) = multi_start(&p, Some(&seed), &cfg, 0).unwrap();
    assert_eq!(start, 0);
    let restored = restore_feasibility(&p, &seed, &cfg.restore).unwrap();
    let plain = sfscp_solve(&p, &restored.x, &cfg.sfscp).unwrap();
    assert_eq!(run.best.x, plain.best.x);
    assert_eq!(run.best.f.to_bits(), plain.best.f.to_bits());
}

#[test]
fn runs_are_monotone_and_every_iterate_is_feasible() {
    let mut runs = 0;
    for seed in 0..12u64 {
        let net = fixtures::random_network(seed, 12, 1);
        let scc = SccParams::new(&net, 50.0, 0.2);
        let b = bounds(&net, 1);
        let solver = HydraulicSolver::new(&net);
        let nodes: Vec<usize> = (0..net.n_nodes()).filter(|&i| net.has_demand(i)).collect();
        let pipes: Vec<usize> = (0..net.n_links())
            .filter(|&j| !net.links[j].is_existing_control())
            .collect();
        let design = ControlDesign::with_additions(&net, &pipes[..1], &nodes[nodes.len() - 1..]);
        for pattern in 0..design.n_patterns() {
            let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &design.pattern(pattern));
            let Ok(start) = restore_feasibility(&p, &vec![0.0; p.n_controls()], &RestoreOptions::default()) else {
                continue;
            };
            let res = sfscp_solve(&p, &start.x, &SfscpOptions::default()).unwrap();
            runs += 1;
            assert!(
                res.history.windows(2).all(|w| w[1] >= w[0]),
                "seed {seed}: {:?}",
                res.history
            );
            for e in &res.iterates {
                assert!(e.is_feasible());
                let again = p.evaluate(&e.x).unwrap();
                assert!(again.is_feasible());
                assert!(again.mass_residual <= 1e-8 && again.energy_residual <= 1e-6);
                assert!((scc_smooth_timestep(&again.q, &net, &scc) - e.f).abs() <= 1e-10);
            }
        }
    }
    assert!(runs >= 8, "only {runs} feasible runs");
}

#[test]
fn control_gradient_matches_finite_differences() {
    let net = fixtures::prv_loop();
    let scc = SccParams::new(&net, 10.0, 0.2);
    let b = bounds(&net, 1);
    let solver = HydraulicSolver::new(&net);
    let j2 = net.node_index()["J2"].demand().unwrap();
    let design = ControlDesign::with_additions(&net, &[1], &[j2]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);
    let x = [2.0, 1.0, 0.004];
    let e = p.evaluate(&x).unwrap();
    let g = p.gradient(&e).unwrap();
    for k in 0..x.len() {
        let h = if k == 2 { 1e-6 } else { 1e-4 };
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let fd = (p.evaluate(&xp).unwrap().f - p.evaluate(&xm).unwrap().f) / (2.0 * h);
        assert!(
            (fd - g[k]).abs() <= 1e-3 * fd.abs().max(1e-8),
            "control {k}: {fd} vs {}",
            g[k]
        );
    }
}

/// A demand fed through a short valve pipe `V` and a long bypass `C`.
/// Throttling `V` moves the flow onto `C`: either pipe can be made
/// self-cleaning, not both, so the objective peaks at both ends of the
/// valve range.
fn bypass_loop() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 50.0)
        .junction("J1", 0.0, 0.0)
        .junction("J2", 0.0, 0.00275)
        .pipe("A", "R1", "J1", 100.0, 0.3, 120.0)
        .pipe("V", "J1", "J2", 100.0, 0.1, 120.0)
        .pipe("C", "J1", "J2", 1000.0, 0.1, 120.0);
    b.build().unwrap()
}

#[test]
fn more_starts_escape_the_worse_local_optimum() {
    let net = bypass_loop();
    let scc = SccParams::with_subset(&net, 50.0, 0.2, &[1, 2]);
    let b = bounds(&net, 0);
    let solver = HydraulicSolver::new(&net);
    let design = ControlDesign::with_additions(&net, &[1], &[]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);

    // Grid scan over the feasible valve range establishes the two optima.
    let n = 4000;
    let scan: Vec<(f64, f64)> = (0..=n)
        .filter_map(|k| {
            let eta = p.upper[0] * k as f64 / n as f64;
            let e = p.evaluate(&[eta]).ok()?;
            e.is_feasible().then_some((eta, e.f))
        })
        .collect();
    let peaks: Vec<(f64, f64)> = (0..scan.len())
        .filter(|&k| {
            let left = if k == 0 { f64::NEG_INFINITY } else { scan[k - 1].1 };
            let right = scan.get(k + 1).map_or(f64::NEG_INFINITY, |s| s.1);
            scan[k].1 >= left && scan[k].1 >= right
        })
        .map(|k| scan[k])
        .collect();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    let (worse, better) = (peaks[0].1, peaks[1].1);
    assert!(peaks[0].0 == 0.0 && better > worse + 0.5);

    let adversarial = [0.0];
    let single = MultiStartConfig {
        m: 1,
        ..Default::default()
    };
    let (run, _) = multi_start(&p, Some(&adversarial), &single, 0).unwrap();
    assert!((run.best.f - worse).abs() < 1e-6);

    let mut hits = 0;
    for seed in 0..100 {
        let cfg = MultiStartConfig {
            m: 5,
            seed,
            ..Default::default()
        };
        let (run, _) = multi_start(&p, Some(&adversarial), &cfg, 0).unwrap();
        if run.best.f >= better - 1e-3 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn best_of_m_never_gets_worse_with_more_starts() {
    let net = bypass_loop();
    let scc = SccParams::with_subset(&net, 50.0, 0.2, &[1, 2]);
    let b = bounds(&net, 0);
    let solver = HydraulicSolver::new(&net);
    let design = ControlDesign::with_additions(&net, &[1], &[]);
    let p = TimestepProblem::new(&solver, &scc, &b, 0, &design, &[Direction::Forward]);
    for seed in 0..10 {
        let mut last = f64::NEG_INFINITY;
        for m in 1..=6 {
            let cfg = MultiStartConfig {
                m,
                seed,
                ..Default::default()
            };
            let (run, _) = multi_start(&p, Some(&[0.0]), &cfg, 0).unwrap();
            assert!(run.best.f >= last - 1e-12);
            last = run.best.f;
        }
    }
}
