//! Command-line front end for valve placement and control.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sccopt_core::hydraulics::HydraulicSolver;
use sccopt_core::objective::{velocity_cdf, velocity_cdf_csv};
use sccopt_core::pipeline::report::{self, OBBT_REPORT_JSON, PROFILE_CSV, SOLUTION_JSON, VELOCITY_CDF_CSV};
use sccopt_core::pipeline::{
    baseline, parse_results_csv, performance_profile, run_cms, run_control_only, run_obbt, PipelineError, RunConfig,
};
use sccopt_core::relaxation::initial_bounds;
use sccopt_core::{forest_core, problem_stats, NetworkModel};

#[derive(Parser)]
#[command(
    name = "sccopt",
    version,
    about = "Valve placement and control for self-cleaning water networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print network size and problem dimensions.
    Stats(RunArgs),
    /// Simulate the network with every valve open and no flushing.
    Simulate(RunArgs),
    /// Optimise the settings of the valves already in the network.
    Control(RunArgs),
    /// Place new valves and optimise all settings.
    Design(RunArgs),
    /// Tighten flow bounds and report the progress.
    Obbt(RunArgs),
    /// Performance profile of a results table (`experiment,<solver>...`).
    Profile {
        results: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// A `.toml` run config, or a network file (`.inp` or `.json`).
    path: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip bound tightening.
    #[arg(long)]
    no_obbt: bool,
    /// Number of new control valves.
    #[arg(long)]
    nv: Option<usize>,
    /// Number of flushing valves.
    #[arg(long)]
    nf: Option<usize>,
    /// Output directory; the config's `out`, else the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-iteration trace.
    #[arg(long)]
    trace: bool,
}

impl RunArgs {
    fn load(&self) -> Result<(RunConfig, NetworkModel), PipelineError> {
        let is_toml = self.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg = if is_toml {
            RunConfig::load(&self.path)?
        } else {
            RunConfig {
                network: Some(self.path.clone()),
                ..RunConfig::default()
            }
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.nv {
            cfg.n_v = n;
        }
        if let Some(n) = self.nf {
            cfg.n_f = n;
        }
        if self.no_obbt {
            cfg.obbt.enabled = false;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        let net = cfg.load_network()?;
        Ok((cfg, net))
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        log::info!("wrote {}", p.display());
    }
}

fn stats(args: &RunArgs) -> Result<(), PipelineError> {
    let (_, net) = args.load()?;
    let d = forest_core(&net);
    let out = json!({
        "stats": problem_stats(&net, net.n_timesteps()),
        "forest_links": d.forest.len(),
        "core_links": d.core_links.len(),
        "total_length_m": net.total_length(),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<(), PipelineError> {
    let (cfg, net) = args.load()?;
    let scc = cfg.scc_params(&net)?;
    let state = HydraulicSolver::new(&net)
        .simulate_uncontrolled()
        .map_err(sccopt_core::Error::from)?;
    let bounds = initial_bounds(&net, &cfg.bound_options(), None, 0);
    let base = baseline(&net, &scc, &bounds);
    let dir = out_dir(&cfg);
    let text = serde_json::to_string_pretty(&base).expect("baseline serialises");
    let paths = vec![
        report::write_file(&dir, SOLUTION_JSON, &text)?,
        report::write_file(&dir, VELOCITY_CDF_CSV, &velocity_cdf_csv(&velocity_cdf(&state.q, &net)))?,
    ];
    print_written(&paths);
    println!("{text}");
    Ok(())
}

fn control(args: &RunArgs) -> Result<(), PipelineError> {
    let (cfg, net) = args.load()?;
    let r = run_control_only(&net, &cfg)?;
    print_written(&report::write_control(&out_dir(&cfg), &net, &r, args.trace)?);
    let unc = r.uncontrolled.as_ref().map(|b| b.scc_smooth);
    println!(
        "{}",
        json!({"scc_smooth": r.scc_smooth, "scc_indicator": r.scc_indicator, "azp": r.azp, "uncontrolled": unc})
    );
    Ok(())
}

fn design(args: &RunArgs) -> Result<(), PipelineError> {
    let (cfg, net) = args.load()?;
    let sol = run_cms(&net, &cfg)?;
    print_written(&report::write_cms(&out_dir(&cfg), &net, &sol, args.trace)?);
    println!(
        "{}",
        json!({
            "scc_smooth": sol.scc_smooth,
            "scc_indicator": sol.scc_indicator,
            "lp_bound": sol.lp_bound,
            "dbv_links": sol.design.dbv_links,
            "afv_nodes": sol.design.afv_nodes,
        })
    );
    Ok(())
}

fn obbt(args: &RunArgs) -> Result<(), PipelineError> {
    let (cfg, net) = args.load()?;
    let (_, r) = run_obbt(&net, &cfg)?;
    let path = report::write_file(&out_dir(&cfg), OBBT_REPORT_JSON, &r.to_json())?;
    print_written(&[path]);
    println!("{}", r.to_json());
    Ok(())
}

fn profile(results: &Path, out: Option<&Path>) -> Result<(), PipelineError> {
    let text = std::fs::read_to_string(results).map_err(|source| PipelineError::Read {
        path: results.to_path_buf(),
        source,
    })?;
    let (solvers, rows) = parse_results_csv(&text)?;
    let p = performance_profile(solvers, &rows)?;
    let csv = p.to_csv();
    let path = report::write_file(out.unwrap_or(Path::new(".")), PROFILE_CSV, &csv)?;
    print_written(&[path]);
    print!("{csv}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Stats(a) => stats(a),
        Command::Simulate(a) => simulate(a),
        Command::Control(a) => control(a),
        Command::Design(a) => design(a),
        Command::Obbt(a) => obbt(a),
        Command::Profile { results, out } => profile(results, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
