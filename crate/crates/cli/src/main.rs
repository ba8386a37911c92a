//! `dunkl`: run Dunkl-process experiments and write CSV/JSON artifacts.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use dunkl_core::{Family, Multiplicities, Orbit};

use crate::config::SimConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "dunkl",
    version,
    about = "Dunkl jump processes on Weyl groups of type A and B"
)]
struct Cli {
    /// Worker threads for replica-parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Rate-table cache directory ($DUNKL_CACHE_DIR takes precedence).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Never read or write the rate cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// Root system family, A or B.
    #[arg(long)]
    system: Option<Family>,
    /// Rank parameter N (particles).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Multiplicity of the single type-A orbit.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    k_short: Option<f64>,
    #[arg(long)]
    k_long: Option<f64>,
    /// Static samples for rate estimation.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    /// Final time T.
    #[arg(long = "t-end", visible_alias = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (or directory for `simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn apply(&self, c: &mut SimConfig) {
        let s = &mut c.system;
        s.family = self.system.or(s.family);
        s.n = self.n.or(s.n);
        s.beta = self.beta.or(s.beta);
        let overrides = [
            (Orbit::A, self.k),
            (Orbit::Short, self.k_short),
            (Orbit::Long, self.k_long),
        ];
        for (orbit, v) in overrides {
            if let Some(v) = v {
                let k = s.k.take().unwrap_or_else(Multiplicities::unit);
                s.k = Some(k.with(orbit, v));
            }
        }
        let m = &mut c.sampling;
        m.nsamples = self.samples.or(m.nsamples);
        m.replicas = self.replicas.or(m.replicas);
        m.dt = self.dt.or(m.dt);
        m.t0 = self.t0.or(m.t0);
        m.t_end = self.t_end.or(m.t_end);
        c.seed = self.seed.or(c.seed);
        if self.out.is_some() {
            c.output = self.out.clone();
        }
    }
}

/// Where `spectrum` and `relax` take their rates from.
#[derive(Debug, Clone, Default, Args)]
struct RateSource {
    /// Read rates from a rates.json file instead of estimating them.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Use the frozen (β → ∞) rates at the peak vector.
    #[arg(long)]
    frozen: bool,
}

impl RateSource {
    fn apply(&self, c: &mut SimConfig) {
        c.set_param("rates", self.rates.clone());
        if self.frozen {
            c.set_param("frozen", Some(true));
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample path of the full process: paths.csv and trajectory.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Start point, comma separated (default: unit-spaced grid).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Rescale the default start to this norm.
        #[arg(long)]
        radius: Option<f64>,
        /// Save every stride-th step.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Estimate per-root jump rates: rates.json.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Radial start y, comma separated (default: the origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        origin: Option<Vec<f64>>,
        /// Reference time for a nonzero start.
        #[arg(long)]
        t_ref: Option<f64>,
    },
    /// Master operator spectrum: spectrum.csv, optionally a relaxation series.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: RateSource,
        /// Also write the exact relaxation series from the identity here.
        #[arg(long)]
        relax_out: Option<PathBuf>,
        #[arg(long)]
        points: Option<usize>,
        /// Series runs over [t0, t0 * t_max_ratio].
        #[arg(long)]
        t_max_ratio: Option<f64>,
    },
    /// Freezing limit: peak vector, frozen spectrum, spin-chain checks.
    Freeze {
        #[command(flatten)]
        common: Common,
    },
    /// First-order large-β theory: perturb.json.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// β values for the measured comparison, comma separated.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        /// Antithetic pairs for Monte Carlo Gaussian integrals (rank > 3).
        #[arg(long)]
        pairs: Option<usize>,
        /// Skip the Monte Carlo comparison.
        #[arg(long)]
        no_measure: bool,
    },
    /// Per-particle total rate against N: phase.csv.
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        /// closed_form or simulate.
        #[arg(long)]
        mode: Option<String>,
        /// Norm of the start in simulate mode.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Simulated jump chain against the exact power-law solution: relax.csv.
    Relax {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: RateSource,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        t_max_ratio: Option<f64>,
        /// Fraction of the series used by the exponent fit.
        #[arg(long)]
        tail: Option<f64>,
        /// Group index the chain starts from.
        #[arg(long)]
        start: Option<usize>,
    },
    /// Run the invariant suite and report PASS/FAIL per check.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Rates { .. } => "rates",
            Command::Spectrum { .. } => "spectrum",
            Command::Freeze { .. } => "freeze",
            Command::Perturb { .. } => "perturb",
            Command::Phase { .. } => "phase",
            Command::Relax { .. } => "relax",
            Command::Verify { .. } => "verify",
        }
    }

    /// Folds the flags into the config.
    fn apply(&self, c: &mut SimConfig) {
        match self {
            Command::Simulate {
                common,
                x0,
                radius,
                stride,
            } => {
                common.apply(c);
                c.set_param("x0", x0.clone());
                c.set_param("radius", *radius);
                c.set_param("stride", *stride);
            }
            Command::Rates {
                common,
                origin,
                t_ref,
            } => {
                common.apply(c);
                c.set_param("origin", origin.clone());
                c.set_param("t_ref", *t_ref);
            }
            Command::Spectrum {
                common,
                source,
                relax_out,
                points,
                t_max_ratio,
            } => {
                common.apply(c);
                source.apply(c);
                c.set_param("relax_out", relax_out.clone());
                c.set_param("points", *points);
                c.set_param("t_max_ratio", *t_max_ratio);
            }
            Command::Freeze { common } | Command::Verify { common } => common.apply(c),
            Command::Perturb {
                common,
                betas,
                pairs,
                no_measure,
            } => {
                common.apply(c);
                c.set_param("betas", betas.clone());
                c.set_param("pairs", *pairs);
                if *no_measure {
                    c.set_param("measure", Some(false));
                }
            }
            Command::Phase {
                common,
                n_min,
                n_max,
                mode,
                radius,
            } => {
                common.apply(c);
                c.set_param("n_min", *n_min);
                c.set_param("n_max", *n_max);
                c.set_param("mode", mode.clone());
                c.set_param("radius", *radius);
            }
            Command::Relax {
                common,
                source,
                points,
                t_max_ratio,
                tail,
                start,
            } => {
                common.apply(c);
                source.apply(c);
                c.set_param("points", *points);
                c.set_param("t_max_ratio", *t_max_ratio);
                c.set_param("tail", *tail);
                c.set_param("start", *start);
            }
        }
    }
}

fn effective_config(cli: &Cli) -> Result<SimConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let kind = cli.command.name();
    match c.experiment.kind.as_deref() {
        Some(k) if k != kind => {
            return Err(CliError::Config(format!(
                "config is for `{k}`, but the subcommand is `{kind}`"
            )));
        }
        _ => c.experiment.kind = Some(kind.to_string()),
    }
    cli.command.apply(&mut c);
    if cli.cache_dir.is_some() {
        c.cache_dir = cli.cache_dir.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let config = effective_config(cli)?;
    let ctx = commands::Context::new(config, cli.no_cache);
    match cli.command.name() {
        "simulate" => commands::simulate(&ctx),
        "rates" => commands::rates(&ctx),
        "spectrum" => commands::spectrum(&ctx),
        "freeze" => commands::freeze(&ctx),
        "perturb" => commands::perturb(&ctx),
        "phase" => commands::phase(&ctx),
        "relax" => commands::relax(&ctx),
        "verify" => commands::verify(&ctx),
        other => unreachable!("unknown command {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dunkl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
