//! Small synthetic networks used by tests, benchmarks and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{NetworkBuilder, NetworkModel};

/// Reservoir at 50 m feeding one junction through a 1 km, 300 mm pipe.
/// The junction draws 5 L/s at elevation 0.
pub fn single_pipe() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 50.0)
        .junction("J1", 0.0, 0.005)
        .pipe("P1", "R1", "J1", 1000.0, 0.3, 130.0);
    b.build().expect("valid fixture")
}

/// Two identical parallel pipes feeding one junction.
pub fn parallel_pipes(demand: f64) -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 50.0)
        .junction("J1", 0.0, demand)
        .pipe("P1", "R1", "J1", 500.0, 0.2, 120.0)
        .pipe("P2", "R1", "J1", 500.0, 0.2, 120.0);
    b.build().expect("valid fixture")
}

/// A three-pipe loop through the reservoir with a pendant branch link `P4`.
pub fn triangle_with_pendant() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 45.0)
        .junction("A", 2.0, 0.002)
        .junction("B", 1.0, 0.004)
        .junction("C", 0.0, 0.001)
        .pipe("P1", "R1", "A", 200.0, 0.2, 120.0)
        .pipe("P2", "A", "B", 300.0, 0.15, 120.0)
        .pipe("P3", "R1", "B", 400.0, 0.15, 120.0)
        .pipe("P4", "B", "C", 150.0, 0.08, 100.0);
    b.build().expect("valid fixture")
}

/// A single loop of three pipes around one demand node pair, with no branch.
pub fn single_loop() -> NetworkModel {
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 40.0)
        .junction("A", 0.0, 0.0)
        .junction("B", 0.0, 0.006)
        .pipe("P1", "R1", "A", 300.0, 0.15, 120.0)
        .pipe("P2", "A", "B", 300.0, 0.1, 120.0)
        .pipe("P3", "R1", "B", 600.0, 0.1, 120.0);
    b.build().expect("valid fixture")
}

/// Loop in which an existing PRV throttles one of two paths to a demand node.
pub fn prv_loop() -> NetworkModel {
    let mut b = NetworkBuilder::new(2);
    b.source("R1", 55.0)
        .junction("J1", 5.0, 0.0)
        .junction_with_demands("J2", 0.0, vec![0.008, 0.004])
        .junction("J3", 2.0, 0.0)
        .junction("J4", 2.0, 0.0)
        .pipe("P1", "R1", "J1", 200.0, 0.2, 120.0)
        .pipe("PA", "J1", "J2", 800.0, 0.15, 120.0)
        .pipe("PB", "J1", "J3", 200.0, 0.15, 120.0)
        .valve("V1", "J3", "J4", 0.15, 0.5)
        .pipe("PC", "J4", "J2", 200.0, 0.15, 120.0)
        .prv("V1");
    b.build().expect("valid fixture")
}

/// A `rows × cols` grid of junctions fed at one corner from a reservoir.
///
/// Grid pipes are 100 mm with lengths between 80 and 120 m; every junction
/// draws 0.15 L/s. The reservoir head is 40 m above the flat grid.
pub fn grid(rows: usize, cols: usize) -> NetworkModel {
    let name = |r: usize, c: usize| format!("N{r}_{c}");
    let mut b = NetworkBuilder::new(1);
    b.source("R1", 40.0);
    for r in 0..rows {
        for c in 0..cols {
            b.junction(&name(r, c), 0.0, 0.000_15);
            b.coordinates(&name(r, c), c as f64 * 100.0, r as f64 * 100.0);
        }
    }
    b.pipe("S1", "R1", &name(0, 0), 50.0, 0.2, 130.0);
    let length = |r: usize, c: usize, k: usize| 80.0 + 10.0 * ((7 * r + 3 * c + k) % 5) as f64;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                b.pipe(
                    &format!("H{r}_{c}"),
                    &name(r, c),
                    &name(r, c + 1),
                    length(r, c, 0),
                    0.1,
                    120.0,
                );
            }
            if r + 1 < rows {
                b.pipe(
                    &format!("V{r}_{c}"),
                    &name(r, c),
                    &name(r + 1, c),
                    length(r, c, 1),
                    0.1,
                    120.0,
                );
            }
        }
    }
    b.build().expect("valid fixture")
}

/// Random connected network with `n_nodes` junctions.
///
/// A random spanning tree is completed with roughly `n_nodes / 4` extra
/// links, some of which are valves. One or two reservoirs are attached.
pub fn random_network(seed: u64, n_nodes: usize, n_timesteps: usize) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sources = if n_nodes > 8 && rng.gen_bool(0.5) { 2 } else { 1 };
    let mut b = NetworkBuilder::new(n_timesteps);
    let base_head: f64 = rng.gen_range(50.0..80.0);
    for s in 0..n_sources {
        let heads = (0..n_timesteps).map(|_| base_head + rng.gen_range(-2.0..2.0)).collect();
        b.source_with_heads(&format!("R{s}"), heads);
    }
    for i in 0..n_nodes {
        let base = if rng.gen_bool(0.8) {
            rng.gen_range(0.0..0.002)
        } else {
            0.0
        };
        let d = (0..n_timesteps).map(|_| base * rng.gen_range(0.5..1.5)).collect();
        b.junction_with_demands(&format!("J{i}"), rng.gen_range(0.0..20.0), d);
    }
    let diameters = [0.08, 0.1, 0.15, 0.2, 0.3];
    let mut n_links = 0;
    let mut add_link = |b: &mut NetworkBuilder, rng: &mut ChaCha8Rng, from: String, to: String| {
        let id = format!("L{n_links}");
        n_links += 1;
        let d = diameters[rng.gen_range(0..diameters.len())];
        if rng.gen_bool(0.1) {
            b.valve(&id, &from, &to, d, rng.gen_range(0.0..10.0));
        } else {
            b.pipe(
                &id,
                &from,
                &to,
                rng.gen_range(50.0..500.0),
                d,
                rng.gen_range(90.0..140.0),
            );
        }
    };
    // Node i attaches to a random earlier node, or to a source.
    let mut edges = std::collections::HashSet::new();
    for i in 0..n_nodes {
        let parent = if i == 0 || (i < n_sources * 3 && rng.gen_bool(0.3)) {
            format!("R{}", rng.gen_range(0..n_sources))
        } else {
            let p = rng.gen_range(0..i);
            edges.insert((p, i));
            format!("J{p}")
        };
        let (from, to) = if rng.gen_bool(0.5) {
            (parent, format!("J{i}"))
        } else {
            (format!("J{i}"), parent)
        };
        add_link(&mut b, &mut rng, from, to);
    }
    if n_sources == 2 {
        let j = rng.gen_range(0..n_nodes);
        add_link(&mut b, &mut rng, "R1".into(), format!("J{j}"));
    }
    let extra = n_nodes / 4;
    let mut tries = 0;
    let mut added = 0;
    while added < extra && tries < 20 * extra + 20 && n_nodes > 2 {
        tries += 1;
        let a = rng.gen_range(0..n_nodes);
        let c = rng.gen_range(0..n_nodes);
        if a == c || edges.contains(&(a.min(c), a.max(c))) {
            continue;
        }
        edges.insert((a.min(c), a.max(c)));
        add_link(&mut b, &mut rng, format!("J{a}"), format!("J{c}"));
        added += 1;
    }
    b.build().expect("random fixture is connected")
}
