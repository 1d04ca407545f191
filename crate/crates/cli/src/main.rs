//! Command-line front end: single trials, sweeps, the property suite and
//! bound tables.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pamac::channel::write_trace;
use pamac::experiment::{
    analytic_error_envelope, hoeffding_bound, run_sweep, verify, ExperimentConfig, Scheme, TrialSetup,
};
use pamac::model::sum_capacity;

#[derive(Parser)]
#[command(name = "pamac", version, about = "Permutation adder MAC codes: simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print what was sent and decoded.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Blocklength; defaults to the first one in the config.
        #[arg(long)]
        n: Option<usize>,
        /// Trial index within the seed's stream family.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Write the full transmission record (x, w, z, y, σ) as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every blocklength of the config and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the property and oracle suite.
    Verify,
    /// Print region status, layout parameters and analytic envelopes.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Deliver outputs in transmission order.
    #[arg(long)]
    skip_permutation: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.skip_permutation |= self.skip_permutation;
        Ok(cfg)
    }
}

fn simulate(cfg: &ExperimentConfig, n: Option<usize>, trial: u64, trace: Option<PathBuf>) -> Result<()> {
    let v = cfg.validate()?;
    let n = match n.or_else(|| cfg.blocklengths.first().copied()) {
        Some(n) => n,
        None => bail!("no blocklength given"),
    };
    let setup = TrialSetup::new(cfg, &v.spec, n)?;
    let rep = setup.run_recorded(cfg.seed, trial)?;
    if let Some(path) = trace {
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_trace(&mut w, std::slice::from_ref(&rep.record))?;
    }
    let out = json!({
        "scheme": cfg.scheme,
        "n": n,
        "seed": cfg.seed,
        "trial": trial,
        "region": v.region,
        "effective_rates": setup.effective_rates(),
        "correct": rep.outcome.correct,
        "sender_correct": rep.outcome.sender_correct,
        "erasure": rep.outcome.erasure,
        "sent": rep.sent,
        "decoded": rep.decoded,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<()> {
    let result = run_sweep(cfg, workers)?;
    if cfg.output.is_none() {
        print!("{}", result.to_csv());
    }
    for row in &result.rows {
        eprintln!(
            "n={} errors={}/{} erasures={} per-sender={:?} wilson=[{:.4}, {:.4}] {:.2}s",
            row.n,
            row.errors,
            row.trials,
            row.erasures,
            row.sender_errors,
            row.wilson_lo,
            row.wilson_hi,
            row.wall_clock
        );
    }
    eprintln!(
        "region: {}; error rate strictly decreasing in n: {}",
        result.region, result.monotone_decreasing
    );
    Ok(())
}

fn bounds(cfg: &ExperimentConfig) -> Result<()> {
    let v = cfg.validate()?;
    println!("scheme: {}", cfg.scheme);
    println!("rates: {:?} (sum {:.6})", cfg.rates, v.rates.sum());
    println!("sum capacity: {}", sum_capacity(cfg.d, cfg.p));
    println!("region: {}", v.region);
    for &n in &cfg.blocklengths {
        let setup = TrialSetup::new(cfg, &v.spec, n)?;
        let tau = ((n as f64).ln() / n as f64).sqrt();
        println!("n = {n}");
        match cfg.scheme {
            Scheme::Root => {
                println!("  codebook sizes: {:?}", setup.root_sizes().unwrap_or_default());
            }
            Scheme::Timeshare | Scheme::TimeshareBinary => {
                let lay = setup.layout().expect("time-sharing layout");
                println!("  m: {:?}", lay.m());
                let rho: Vec<String> = lay.rho().iter().map(|r| r.to_string()).collect();
                println!("  rho: [{}]", rho.join(", "));
                println!("  subsegment lengths: {:?}", lay.subsegment_lens());
            }
        }
        println!("  effective rates: {:?}", setup.effective_rates());
        println!("  hoeffding bound at tau = sqrt(ln n / n): {:.6e}", hoeffding_bound(n, tau));
        println!(
            "  union envelope 2q/n^2: {:.6e}",
            analytic_error_envelope(cfg.scheme, &v.spec, n)
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            common,
            n,
            trial,
            trace,
        } => simulate(&common.load()?, n, trial, trace),
        Command::Sweep { common, workers } => sweep(&common.load()?, workers),
        Command::Verify => {
            let reports = verify::run_all();
            for r in &reports {
                println!("{}", r.line());
            }
            if reports.iter().any(|r| !r.correct) {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Bounds { common } => bounds(&common.load()?),
    }
}
