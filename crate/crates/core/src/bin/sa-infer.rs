use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sa_inference::critical_values::{
    empirical_density, simulate_functionals, CriticalValueTable, DensityRange, DEFAULT_REPS, DEFAULT_STEPS,
    TABLE_FUNCTIONALS, TABLE_LEVELS,
};
use sa_inference::harness::report::{format_significant, write_report};
use sa_inference::harness::trace::write_trace;
use sa_inference::harness::{optimal_alpha, run_coverage, single_run, ExperimentConfig, Regime};
use sa_inference::Functional;

/// Random-scaling inference for stochastic approximation.
#[derive(Parser)]
#[command(name = "sa-infer", version)]
struct Cli {
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "SA_INFER_THREADS")]
    threads: Option<usize>,

    /// Master seed; overrides `run.seed` in a config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Experiment config (key-value or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate critical values of the pivot and write `m,level,q,provenance`.
    Critvals(Simulation),
    /// Run a coverage study from `--config`.
    Coverage,
    /// Histograms of the pivot f_m(W) and its denominator h_m(W).
    Density {
        #[command(flatten)]
        sim: Simulation,
        #[arg(long, default_value_t = 200)]
        bins: usize,
    },
    /// Optimal step-size exponent for a noise moment order.
    AlphaStar {
        /// Moment order p > 2.
        #[arg(long)]
        p: f64,
        /// I.i.d. data with a linear update.
        #[arg(long)]
        iid: bool,
        /// Offset above 0.5 in the i.i.d. case.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// One trajectory of `--config` with the interval recorded along the way.
    SingleRun {
        /// Repetition index whose seed to use.
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Record every this many post-warm-up steps.
        #[arg(long, default_value_t = 100)]
        every: usize,
    },
}

#[derive(Args)]
struct Simulation {
    /// Brownian path discretization.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    /// Simulated paths.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Functionals, e.g. `2,inf`; all tabulated ones if absent.
    #[arg(long, value_delimiter = ',')]
    m: Vec<Functional>,
}

impl Simulation {
    fn functionals(&self) -> Vec<Functional> {
        if self.m.is_empty() {
            TABLE_FUNCTIONALS.to_vec()
        } else {
            self.m.clone()
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("this subcommand needs --config");
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Critvals(sim) => {
            let fs = sim.functionals();
            let table = CriticalValueTable::simulate(&fs, &TABLE_LEVELS, sim.steps, sim.reps, seed)?;
            table.write_csv(output(cli.out.as_deref())?)?;
            let reference = CriticalValueTable::embedded();
            eprintln!("m\tq(5%)\ttable\trel.dev");
            for f in fs {
                let q = table.two_sided(f, 0.05)?;
                match reference.two_sided(f, 0.05) {
                    Ok(r) => eprintln!("{f}\t{q:.3}\t{r:.3}\t{:+.4}", q / r - 1.0),
                    Err(_) => eprintln!("{f}\t{q:.3}\t-\t-"),
                }
            }
        }
        Command::Coverage => {
            let cfg = load_config(&cli)?;
            let report = run_coverage(&cfg)?;
            let out = cli.out.as_deref().or(cfg.output.path.as_deref());
            write_report(&report, output(out)?)?;
        }
        Command::Density { sim, bins } => {
            let samples = simulate_functionals(&sim.functionals(), sim.steps, sim.reps, seed)?;
            let mut w = csv::Writer::from_writer(output(cli.out.as_deref())?);
            w.write_record(["quantity", "m", "bin_center", "density", "count"])?;
            for s in &samples {
                for (name, values, range) in [
                    ("f", &s.statistic, DensityRange::Symmetric),
                    ("h", &s.denominator, DensityRange::Positive),
                ] {
                    let h = empirical_density(values, *bins, range)?;
                    for i in 0..h.counts.len() {
                        w.write_record([
                            name.to_string(),
                            s.functional.to_string(),
                            format!("{:.6}", h.bin_center(i)),
                            format!("{:.6}", h.density[i]),
                            h.counts[i].to_string(),
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
        Command::AlphaStar { p, iid, eps } => {
            let regime = if *iid {
                Regime::IidLinear
            } else {
                Regime::MarkovianOrNonlinear
            };
            let a = optimal_alpha(*p, regime, *eps)?;
            let mut out = output(cli.out.as_deref())?;
            writeln!(out, "p,regime,alpha_star,rate")?;
            writeln!(
                out,
                "{},{},{},{}",
                p,
                if *iid { "iid_linear" } else { "markovian_or_nonlinear" },
                format_significant(a.alpha, 12),
                format_significant(a.rate, 12)
            )?;
        }
        Command::SingleRun { rep, every } => {
            let cfg = load_config(&cli)?;
            let trace = single_run(&cfg, *rep, *every)?;
            if trace.points.is_none() {
                bail!("the iterate diverged");
            }
            write_trace(&trace, output(cli.out.as_deref())?)?;
        }
    }
    Ok(())
}
