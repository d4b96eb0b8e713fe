//! Command-line front end for the AirComp weighted-averaging experiments.
//!
//! Subcommands:
//!
//! * `run`      — execute a sweep experiment and emit `trials.csv` plus
//!   `summary.csv` into the output directory
//! * `bo-trace` — dump the per-step truncation-optimizer diagnostics as CSV
//! * `fl`       — run the federated-averaging case study and emit a
//!   `round,seed,policy,accuracy` CSV
//!
//! All randomness derives from the config seed, so a fixed seed yields
//! byte-identical CSV output across runs and thread counts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aircomp_core::error::{Error, Result};
use aircomp_core::fedavg::{run_fl, FlSpec};
use aircomp_core::harness::{
    digital_transmission_slots, emit_csv, format_csv_float, optimize_theta_for_point,
    required_time_slots, run_experiment, ExperimentSpec,
};

#[derive(Parser)]
#[command(
    name = "aircomp-lab",
    version,
    about = "Over-the-air weighted averaging: sweeps, truncation tuning, federated learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write trials.csv / summary.csv.
    Run {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Dump per-step truncation-optimizer diagnostics as CSV.
    BoTrace {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the federated-averaging case study.
    Fl {
        /// FL TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => with_threads(threads, || cmd_run(&config, &out, seed)),
        Command::BoTrace { config, out, seed } => cmd_bo_trace(&config, out.as_deref(), seed),
        Command::Fl {
            config,
            out,
            threads,
        } => with_threads(threads, || cmd_fl(&config, out.as_deref())),
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = ExperimentSpec::load(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let records = run_experiment(&spec)?;
    let (trials, summary) = emit_csv(&records, out)?;

    println!("wrote {} and {}", trials.display(), summary.display());
    println!("sweep_axis,sweep_value,method,median_rmse_db,diverged,slots,wall_s");
    for r in &records {
        println!(
            "{},{},{},{:.4},{}/{},{},{:.2}",
            r.sweep_axis.as_str(),
            r.sweep_value,
            r.method,
            r.median_rmse_db,
            r.diverged_count,
            r.trial_rmse_db.len(),
            required_time_slots(r.method),
            r.wall_time_s,
        );
    }
    println!(
        "digital weighted-averaging baseline would need {} slots per round",
        digital_transmission_slots(spec.system.num_nodes)
    );
    Ok(())
}

fn cmd_bo_trace(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut spec = ExperimentSpec::load(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let mut csv = String::from(
        "sweep_axis,sweep_value,eval,phase,delta_min,delta_max,mse,best_mse,surrogate_fallback\n",
    );
    for (axis_index, &value) in spec.sweep.values.iter().enumerate() {
        let (scenario, system, mismatch) = spec.resolve(value)?;
        let outcome = optimize_theta_for_point(&spec, axis_index, &scenario, &system, &mismatch)?;
        for rec in &outcome.history {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                spec.sweep.axis.as_str(),
                format_csv_float(value),
                rec.eval_index,
                match rec.phase {
                    aircomp_core::bayesopt::BoPhase::Init => "init",
                    aircomp_core::bayesopt::BoPhase::Search => "search",
                },
                format_csv_float(rec.delta_min),
                format_csv_float(rec.delta_max),
                format_csv_float(rec.mse),
                format_csv_float(rec.best_mse),
                rec.surrogate_fallback,
            ));
        }
        eprintln!(
            "{}={}: theta_opt = ({:.6e}, {:.6e}), best mse {:.6e}",
            spec.sweep.axis.as_str(),
            value,
            outcome.theta_opt.delta_min,
            outcome.theta_opt.delta_max,
            outcome.best_mse,
        );
    }
    write_or_print(out, &csv)
}

fn cmd_fl(config: &Path, out: Option<&Path>) -> Result<()> {
    let spec = FlSpec::load(config)?;
    let data = spec.dataset.load(spec.data_seed)?;
    let fl_config = spec.to_config()?;

    let mut csv = String::from("round,seed,policy,accuracy\n");
    for &seed in &spec.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let accuracy = run_fl(&fl_config, &data, &mut rng)?;
        for (round, acc) in accuracy.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                round,
                seed,
                spec.policy.as_str(),
                format_csv_float(*acc),
            ));
        }
        eprintln!(
            "seed {seed}: final accuracy {:.4} after {} rounds",
            accuracy.last().unwrap(),
            spec.rounds
        );
    }
    write_or_print(out, &csv)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                        path: parent.display().to_string(),
                        source: e,
                    })?;
                }
            }
            std::fs::write(path, text).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
