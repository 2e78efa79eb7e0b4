use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgm_core::harness::{
    preset, run_ensemble, run_eof, run_experiment, run_suite, with_workers, workers_from_env,
    ExperimentConfig, HarnessError, Schedule, Suite, SuiteOptions, EXIT_NUMERICAL, EXIT_OK, PRESETS,
};

const DEFAULT_OUT: &str = "sgm_out";

#[derive(Parser)]
#[command(name = "sgm", version, about = "Stochastic geometric mechanics experiments and checks")]
struct Cli {
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment.
    Run(ExperimentArgs),
    /// Run `ensemble` members with seeds base, base+1, ...
    Ensemble {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Run members one after another instead of concurrently.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a verification suite: chainrule, kiw, variation, duality, casimir.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coarsest step of the dyadic sweep (kiw, variation, casimir).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical orthogonal functions of a directory of SGMF snapshots.
    Eof {
        #[arg(long)]
        input: PathBuf,
        /// Number of modes to keep.
        #[arg(long, short = 'k')]
        modes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Embedded configuration: rigid_body, heavy_top, euler2d_kelvin, boussinesq_budget.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<(ExperimentConfig, u64, PathBuf), HarnessError> {
        let cfg = match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(HarnessError::Usage(format!(
                    "pass --config or --preset ({})",
                    PRESETS.join(", ")
                )))
            }
        };
        let seed = self.seed.unwrap_or(cfg.seed);
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((cfg, seed, out))
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3e}"))
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Run(args) => {
            let (cfg, seed, out) = args.resolve()?;
            let s = run_experiment(&cfg, seed, &out)?;
            say(
                quiet,
                format!(
                    "{} seed {} steps {}: casimir drift {:?}, energy excursion {:.3e}, circulation drift {}, budget residual {}",
                    s.model,
                    s.seed,
                    s.steps,
                    s.casimir_drift,
                    s.energy_excursion,
                    opt_num(s.circulation_drift),
                    opt_num(s.budget_residual)
                ),
            );
            say(quiet, format!("artifacts in {}", out.display()));
            Ok(EXIT_OK)
        }
        Command::Ensemble { args, sequential } => {
            let (cfg, seed, out) = args.resolve()?;
            let schedule = if *sequential { Schedule::Sequential } else { Schedule::Parallel };
            let outcome = run_ensemble(&cfg, seed, &out, schedule)?;
            let failures = outcome.failures();
            for m in &failures {
                eprintln!("member {} (seed {}) failed: {}", m.member, m.seed, m.error.as_deref().unwrap_or(""));
            }
            say(
                quiet,
                format!(
                    "{} members, {} failed; aggregate in {}",
                    outcome.members.len(),
                    failures.len(),
                    out.join("aggregate.csv").display()
                ),
            );
            Ok(if failures.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Verify { suite, seed, dt, out } => {
            let suite = Suite::parse(suite)?;
            let report = run_suite(suite, &SuiteOptions { seed: *seed, dt: *dt })?;
            let out = out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            write_report(&out, suite, &report.to_json())?;
            for r in &report.reports {
                say(
                    quiet,
                    format!(
                        "{:?} {}: max residual {:.3e}, order {}, notes {:?}",
                        r.overall(),
                        r.check,
                        r.max_residual(),
                        opt_num(r.order),
                        r.notes
                    ),
                );
            }
            say(quiet, format!("suite {}: {:?}", suite.name(), report.status));
            Ok(report.exit_code())
        }
        Command::Eof { input, modes, out } => {
            let out = out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let eof = run_eof(input, *modes, &out)?;
            say(quiet, format!("singular values {:?}", eof.singular_values));
            say(quiet, format!("modes in {}", out.display()));
            Ok(EXIT_OK)
        }
    }
}

fn write_report(out: &Path, suite: Suite, json: &serde_json::Value) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(out).map_err(io)?;
    let path = out.join(format!("verify_{}.json", suite.name()));
    let text = serde_json::to_string_pretty(json).expect("report serializes") + "\n";
    std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = workers_from_env()
        .and_then(|w| with_workers(w, || execute(&cli)))
        .and_then(|r| r)
        .unwrap_or_else(|e| {
            eprintln!("error: {e}");
            e.exit_code()
        });
    ExitCode::from(code as u8)
}
