//! Random valve placements drawn from the fractional solution of the relaxation.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Draw attempts allowed per requested design before giving up on new ones.
pub const REDRAW_FACTOR: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("only {support} {what} carry positive weight but {requested} are required")]
    ZeroSupport {
        what: &'static str,
        support: usize,
        requested: usize,
    },
    #[error("at least one design must be requested")]
    NoDesigns,
}

/// One binary placement: chosen flushing nodes and control-valve links,
/// each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateDesign {
    pub index: usize,
    pub afv_nodes: Vec<usize>,
    pub dbv_links: Vec<usize>,
}

impl CandidateDesign {
    pub fn y(&self, n_nodes: usize) -> Vec<bool> {
        let mut y = vec![false; n_nodes];
        self.afv_nodes.iter().for_each(|&i| y[i] = true);
        y
    }

    pub fn z(&self, n_links: usize) -> Vec<bool> {
        let mut z = vec![false; n_links];
        self.dbv_links.iter().for_each(|&j| z[j] = true);
        z
    }
}

/// Draw `k` distinct indices, each pick proportional to the weights of
/// those not yet chosen.
fn draw_without_replacement(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut w: Vec<f64> = weights.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut choice = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            choice = Some(i);
            if target < wi {
                break;
            }
            target -= wi;
        }
        let i = choice.expect("support checked by the caller");
        picked.push(i);
        w[i] = 0.0;
    }
    picked.sort_unstable();
    picked
}

fn check_support(weights: &[f64], k: usize, what: &'static str) -> Result<(), SampleError> {
    let support = weights.iter().filter(|&&w| w > 0.0).count();
    if support < k {
        return Err(SampleError::ZeroSupport {
            what,
            support,
            requested: k,
        });
    }
    Ok(())
}

/// Up to `n` distinct designs with exactly `n_f` flushing nodes and `n_v`
/// control-valve links, sampled with probabilities given by `y` and `z`.
pub fn sample_designs(
    y: &[f64],
    z: &[f64],
    n_v: usize,
    n_f: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<CandidateDesign>, SampleError> {
    if n == 0 {
        return Err(SampleError::NoDesigns);
    }
    check_support(y, n_f, "nodes")?;
    check_support(z, n_v, "links")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n && attempts < REDRAW_FACTOR * n {
        attempts += 1;
        let afv = draw_without_replacement(&mut rng, y, n_f);
        let dbv = draw_without_replacement(&mut rng, z, n_v);
        if seen.insert((afv.clone(), dbv.clone())) {
            out.push(CandidateDesign {
                index: out.len(),
                afv_nodes: afv,
                dbv_links: dbv,
            });
        }
    }
    if out.len() < n {
        log::info!(
            "sampler stopped at {} distinct designs after {attempts} draws",
            out.len()
        );
    }
    Ok(out)
}
