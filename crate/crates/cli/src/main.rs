use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use p2l_core::harness::{
    render_summary, run_experiment, summarize, write_outputs, BoundTableConfig, Experiment, ExperimentConfig,
    OcCdfConfig, OcConfig, ReachConfig,
};
use p2l_core::{eps_bar, eps_bar_oracle, BoundQuery};

#[derive(Parser)]
#[command(name = "p2l", version, about = "Pick-to-Learn risk certificates and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate eps_bar(k, delta, N), or write a table of values
    Bound(BoundArgs),
    /// Reachable sets for the Duffing oscillator: P2L against split baselines
    Reach(ReachArgs),
    /// Certified cost threshold for the scalar linear benchmark
    Oc(OcArgs),
    /// Run any experiment described by a config file
    Run(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Incomplete-beta bisection
    Beta,
    /// Log-domain bisection on the defining sum
    Psi,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, required_unless_present = "table")]
    k: Option<usize>,
    #[arg(long, required_unless_present = "table")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "table")]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value = "beta")]
    method: Method,
    /// Write the bound table (default: N = 500, delta in {1e-2, 1e-4, 1e-6})
    #[arg(long, conflicts_with_all = ["k", "n"])]
    table: bool,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output root; each run writes a new timestamped directory inside it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to P2L_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
struct OcArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Certify the ten cost levels 0.4, 0.8, ..., 4.0 jointly
    #[arg(long)]
    cdf: bool,
    #[command(flatten)]
    sweep: SweepArgs,
}

/// `x` with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let decimals = (11 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn load(sweep: &SweepArgs, default: Experiment) -> Result<ExperimentConfig> {
    let mut cfg = match &sweep.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::new(default),
    };
    if let Some(s) = sweep.seed {
        cfg.seed = s;
    }
    if let Some(r) = sweep.reps {
        cfg.reps = r;
    }
    if let Some(o) = &sweep.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn sweep(cfg: ExperimentConfig, threads: Option<usize>) -> Result<()> {
    cfg.validate()?;
    let out = run_experiment(&cfg, threads)?;
    let dir = write_outputs(&cfg, &out)?;
    eprint!("{}", render_summary(&summarize(&out.records)));
    eprintln!(
        "{} reps on {} threads in {:.1}s",
        cfg.reps, out.threads, out.wall_clock_s
    );
    println!("{}", dir.display());
    Ok(())
}

fn bound(args: BoundArgs) -> Result<()> {
    if args.table {
        let cfg = load(&args.sweep, Experiment::BoundTable(BoundTableConfig::default()))?;
        if !matches!(cfg.experiment, Experiment::BoundTable(_)) {
            bail!("--table needs a bound-table config");
        }
        return sweep(cfg, args.sweep.threads);
    }
    let (Some(k), Some(n), Some(delta)) = (args.k, args.n, args.delta) else {
        bail!("--k, --n and --delta are required");
    };
    let q = BoundQuery::new(k, n, delta)?;
    let eps = match args.method {
        Method::Beta => eps_bar(&q).eps,
        Method::Psi => eps_bar_oracle(&q)?.eps,
    };
    println!("{}", sig12(eps));
    Ok(())
}

fn reach(args: ReachArgs) -> Result<()> {
    let cfg = load(&args.sweep, Experiment::Reach(ReachConfig::default()))?;
    if !matches!(cfg.experiment, Experiment::Reach(_)) {
        bail!("reach needs a reach config");
    }
    sweep(cfg, args.sweep.threads)
}

fn oc(args: OcArgs) -> Result<()> {
    let mut cfg = load(&args.sweep, Experiment::Oc(OcConfig::default()))?;
    if args.cdf {
        if let Experiment::Oc(o) = &cfg.experiment {
            cfg.experiment = Experiment::OcCdf(OcCdfConfig {
                n: o.n,
                n_init: o.n_init,
                delta_per_level: o.delta,
                bench: o.bench.clone(),
                grid: o.grid.clone(),
                mc_samples: o.mc_samples,
                ..OcCdfConfig::default()
            });
        }
    }
    match &mut cfg.experiment {
        Experiment::Oc(o) => {
            o.n = args.n.unwrap_or(o.n);
            o.delta = args.delta.unwrap_or(o.delta);
        }
        Experiment::OcCdf(o) => {
            o.n = args.n.unwrap_or(o.n);
            o.delta_per_level = args.delta.unwrap_or(o.delta_per_level);
        }
        _ => bail!("oc needs an oc or oc-cdf config"),
    }
    sweep(cfg, args.sweep.threads)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bound(a) => bound(a),
        Command::Reach(a) => reach(a),
        Command::Oc(a) => oc(a),
        Command::Run(s) => {
            let Some(_) = &s.config else {
                bail!("run needs --config");
            };
            let threads = s.threads;
            sweep(load(&s, Experiment::Oc(OcConfig::default()))?, threads)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.9), "0.900000000000");
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.0123), "0.0123000000000");
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
