//! Run configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::control::{MultiStartConfig, RestoreOptions, SfscpOptions};
use crate::network::inp::{parse_inp, InpOptions};
use crate::network::NetworkModel;
use crate::obbt::ObbtOptions;
use crate::objective::SccParams;
use crate::relaxation::BoundOptions;

/// Networks with more links than this get the larger default sample count.
pub const LARGE_NETWORK_LINKS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// Sigmoid steepness (s/m).
    pub rho: f64,
    /// Self-cleaning velocity threshold (m/s).
    pub u_min: f64,
    /// Link ids counted in the objective; every link when absent.
    pub links: Option<Vec<String>>,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            rho: 50.0,
            u_min: 0.2,
            links: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub u_max: f64,
    pub u_max_links: BTreeMap<String, f64>,
    pub p_min: f64,
    pub alpha_upper: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let b = BoundOptions::default();
        BoundsConfig {
            u_max: b.u_max,
            u_max_links: b.u_max_links,
            p_min: b.p_min,
            alpha_upper: b.alpha_upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Candidate designs; 50, or 100 above [`LARGE_NETWORK_LINKS`] links, when absent.
    pub n: Option<usize>,
    /// Starts per direction pattern.
    pub m: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { n: None, m: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObbtConfig {
    pub enabled: bool,
    pub k_max: usize,
    pub eps_tol: f64,
}

impl Default for ObbtConfig {
    fn default() -> Self {
        let o = ObbtOptions::default();
        ObbtConfig {
            enabled: true,
            k_max: o.k_max,
            eps_tol: o.eps_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Network file (`.inp` or `.json`), relative to the config file.
    pub network: Option<PathBuf>,
    /// Pattern steps to optimise; the busiest `peak_steps` when absent.
    pub timesteps: Option<Vec<usize>>,
    pub peak_steps: usize,
    pub n_v: usize,
    pub n_f: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub objective: ObjectiveConfig,
    pub bounds: BoundsConfig,
    pub sampling: SamplingConfig,
    pub obbt: ObbtConfig,
    pub sfscp: SfscpOptions,
    pub restore: RestoreOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: None,
            timesteps: None,
            peak_steps: InpOptions::default().peak_steps,
            n_v: 0,
            n_f: 0,
            seed: 0,
            out: None,
            objective: ObjectiveConfig::default(),
            bounds: BoundsConfig::default(),
            sampling: SamplingConfig::default(),
            obbt: ObbtConfig::default(),
            sfscp: SfscpOptions::default(),
            restore: RestoreOptions::default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file. Relative network and output paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        cfg.network = cfg.network.map(|p| dir.join(p));
        cfg.out = cfg.out.map(|p| dir.join(p));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let positive = [
            ("objective.rho", self.objective.rho),
            ("objective.u_min", self.objective.u_min),
            ("bounds.u_max", self.bounds.u_max),
            ("bounds.p_min", self.bounds.p_min),
            ("bounds.alpha_upper", self.bounds.alpha_upper),
            ("sfscp.eps_tol", self.sfscp.eps_tol),
            ("sfscp.trust", self.sfscp.trust),
            ("sfscp.min_beta", self.sfscp.min_beta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_error(format!("{name} must be positive, got {v}")));
            }
        }
        for (id, v) in &self.bounds.u_max_links {
            if !(v.is_finite() && *v > 0.0) {
                return Err(config_error(format!(
                    "bounds.u_max_links.{id} must be positive, got {v}"
                )));
            }
        }
        if self.sampling.m == 0 {
            return Err(config_error("sampling.m must be at least 1"));
        }
        if self.sampling.n == Some(0) {
            return Err(config_error("sampling.n must be at least 1"));
        }
        if self.peak_steps == 0 {
            return Err(config_error("peak_steps must be at least 1"));
        }
        if !(self.obbt.eps_tol > 0.0 && self.obbt.eps_tol <= 1.0) {
            return Err(config_error(format!(
                "obbt.eps_tol must lie in (0, 1], got {}",
                self.obbt.eps_tol
            )));
        }
        if matches!(&self.timesteps, Some(t) if t.is_empty()) {
            return Err(config_error("timesteps must not be empty"));
        }
        Ok(())
    }

    /// Candidate count for a network of `n_links` links.
    pub fn n_samples(&self, n_links: usize) -> usize {
        self.sampling
            .n
            .unwrap_or(if n_links > LARGE_NETWORK_LINKS { 100 } else { 50 })
    }

    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions {
            u_max: self.bounds.u_max,
            u_max_links: self.bounds.u_max_links.clone(),
            p_min: self.bounds.p_min,
            alpha_upper: self.bounds.alpha_upper,
        }
    }

    pub fn obbt_options(&self) -> ObbtOptions {
        ObbtOptions {
            k_max: self.obbt.k_max,
            eps_tol: self.obbt.eps_tol,
        }
    }

    pub fn multi_start(&self) -> MultiStartConfig {
        MultiStartConfig {
            m: self.sampling.m,
            seed: self.seed,
            sfscp: self.sfscp,
            restore: self.restore,
        }
    }

    /// Objective weights, restricted to the configured links when given.
    pub fn scc_params(&self, net: &NetworkModel) -> Result<SccParams, PipelineError> {
        let (rho, u_min) = (self.objective.rho, self.objective.u_min);
        let Some(ids) = &self.objective.links else {
            return Ok(SccParams::new(net, rho, u_min));
        };
        let index = net.link_index();
        let links = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| config_error(format!("unknown objective link {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SccParams::with_subset(net, rho, u_min, &links))
    }

    /// Check that link ids named in the config exist in `net`.
    pub fn check_network(&self, net: &NetworkModel) -> Result<(), PipelineError> {
        let index = net.link_index();
        if let Some(id) = self
            .bounds
            .u_max_links
            .keys()
            .find(|id| !index.contains_key(id.as_str()))
        {
            return Err(config_error(format!("unknown link {id} in bounds.u_max_links")));
        }
        self.scc_params(net).map(|_| ())
    }

    /// Load the configured network file.
    pub fn load_network(&self) -> Result<NetworkModel, PipelineError> {
        let path = self
            .network
            .as_deref()
            .ok_or_else(|| config_error("no network file given"))?;
        load_network(path, self)
    }
}

/// Read an `.inp` or `.json` network, keeping the configured timesteps.
pub fn load_network(path: &Path, cfg: &RunConfig) -> Result<NetworkModel, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let net = if is_json {
        let net = NetworkModel::from_json(&text)?;
        match &cfg.timesteps {
            Some(steps) => select_timesteps(&net, steps)?,
            None => net,
        }
    } else {
        let opts = InpOptions {
            timesteps: cfg.timesteps.clone(),
            peak_steps: cfg.peak_steps,
        };
        let parsed = parse_inp(&text, &opts).map_err(crate::Error::from)?;
        for w in &parsed.warnings {
            log::warn!("{}: {w}", path.display());
        }
        parsed.network
    };
    cfg.check_network(&net)?;
    Ok(net)
}

/// Copy of `net` keeping only the listed timesteps, in the given order.
pub fn select_timesteps(net: &NetworkModel, steps: &[usize]) -> Result<NetworkModel, PipelineError> {
    if let Some(&bad) = steps.iter().find(|&&t| t >= net.n_timesteps()) {
        return Err(config_error(format!(
            "timestep {bad} is outside the network's {} timesteps",
            net.n_timesteps()
        )));
    }
    let mut out = net.clone();
    out.demands = steps.iter().map(|&t| net.demands[t].clone()).collect();
    out.source_heads = steps.iter().map(|&t| net.source_heads[t].clone()).collect();
    Ok(out)
}
