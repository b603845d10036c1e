use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use faidet::config::{self, Experiment, Overrides};
use faidet::experiments::{run_sweep, write_csv, SweepResult};
use faidet::{inspect, selftest};

/// Fluid-antenna integrated data and energy transfer: sweeps, inspection
/// and self-test.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV per series.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: results/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed; fully determines the output.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also run the MIMO benchmark.
        #[arg(long)]
        baseline: bool,
        /// Fill the wall_ms column (makes runs differ byte-wise).
        #[arg(long)]
        timing: bool,
    },
    /// Print one trial end to end.
    Inspect {
        #[command(flatten)]
        source: Source,
        /// Series to use (default: the first).
        #[arg(long)]
        series: Option<String>,
        /// Value of the swept parameter (default: the series as written).
        #[arg(long)]
        value: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        baseline: bool,
    },
    /// Check the implementation against its oracles.
    Selftest,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// fig2, fig3 or fig4.
    #[arg(long)]
    preset: Option<String>,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self, overrides: &Overrides) -> Result<Experiment, config::ConfigError> {
        match (&self.preset, &self.config) {
            (Some(p), _) => config::load_preset(p, overrides),
            (None, Some(path)) => config::load_file(path, overrides),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn print_summary(result: &SweepResult) {
    println!("series {} ({} sweep)", result.name, result.param.name());
    println!("{:>10} {:>9} {:>14} {:>12} {:>14} {:>14}", "value", "feasible", "mean E_H (W)", "std err", "realized (W)", "MIMO (W)");
    for s in &result.summaries {
        println!(
            "{:>10} {:>4}/{:<4} {:>14.6} {:>12.2e} {:>14.6} {:>14.6}",
            s.param_value, s.estimated.count, s.trials, s.estimated.mean, s.estimated.std_err, s.realized.mean, s.baseline.mean
        );
        if s.infeasible_rate > 0.5 {
            eprintln!("warning: {} = {}: {:.0}% of trials infeasible", result.param.name(), s.param_value, 100.0 * s.infeasible_rate);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { source, out, trials, seed, workers, baseline, timing } => {
            let overrides = Overrides { trials, seed, baseline, timing };
            let exp = match source.load(&overrides) {
                Ok(e) => e,
                Err(e) => return config_error(e),
            };
            let dir = out.unwrap_or_else(|| PathBuf::from("results").join(&exp.name));
            if let Err(e) = std::fs::create_dir_all(&dir) {
                eprintln!("error: cannot create {}: {e}", dir.display());
                return ExitCode::FAILURE;
            }
            for spec in &exp.series {
                let result = match run_sweep(spec, workers) {
                    Ok(r) => r,
                    Err(e) => return config_error(e),
                };
                let path = dir.join(format!("{}.csv", spec.name));
                if let Err(e) = write_csv(&result, &path) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
                print_summary(&result);
                println!("wrote {}\n", path.display());
            }
            ExitCode::SUCCESS
        }
        Command::Inspect { source, series, value, seed, trial, baseline } => {
            let exp = match source.load(&Overrides::default()) {
                Ok(e) => e,
                Err(e) => return config_error(e),
            };
            let spec = match &series {
                Some(name) => match exp.series.iter().find(|s| &s.name == name) {
                    Some(s) => s,
                    None => return config_error(format!("no series named `{name}`")),
                },
                None => &exp.series[0],
            };
            let cfg = match value.map(|v| spec.param.apply(&spec.base, v)).transpose() {
                Ok(c) => c.unwrap_or_else(|| spec.base.clone()),
                Err(e) => return config_error(e),
            };
            let trial_seed = faidet_core::trial_seed(seed.unwrap_or(spec.master_seed), trial);
            match inspect::report(&cfg, trial_seed, baseline) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
