//! Command-line front end: single/multi-seed experiment batches, the
//! model-aware oracle benchmark, and paired subject comparisons.

use clap::{Parser, Subcommand};
use csdlma::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "csdlma",
    about = "Slot-level simulator for heterogeneous medium access with a carrier-sensing DQN agent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment over one or more seeds.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Number of seeded runs (master_seed, master_seed + 1, ...).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Output directory for seed_<k>.csv, mean.csv, summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the model-aware benchmark for the config's legacy mix.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run two configs on the same seeds and emit a paired summary.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { config, seeds, out } => {
            let config = runner::parse_config(&config).map_err(|e| e.to_string())?;
            let summary =
                runner::run_experiment(&config, seeds, &out).map_err(|e| e.to_string())?;
            println!(
                "{} seeds x {} slots -> {}",
                summary.seeds,
                summary.duration_slots,
                out.display()
            );
            match summary.oracle_gain {
                Some(g) => println!("oracle gain: {g:.6}"),
                None => println!(
                    "oracle gain: unavailable ({})",
                    summary.oracle_note.as_deref().unwrap_or("unknown")
                ),
            }
            println!(
                "mean final cumulative sum throughput: {:.6}",
                summary.mean_final_cumulative_sum
            );
            for (label, value) in summary.labels.iter().zip(&summary.mean_final_cumulative) {
                println!("  {label}: {value:.6}");
            }
            if let Some(slots) = summary.mean_slots_to_90pct_of_gain {
                println!("mean short-term sum reaches 90% of gain at slot {slots}");
            }
            Ok(())
        }
        Command::Oracle { config } => {
            let config = runner::parse_config(&config).map_err(|e| e.to_string())?;
            let bench = runner::bench_oracle(&config).map_err(|e| e.to_string())?;
            println!("gain: {:.6}", bench.gain);
            println!("states: {}", bench.states);
            println!(
                "wait-always baseline throughput: {:.6}",
                bench.wait_always_throughput
            );
            print!("{}", bench.policy_csv);
            Ok(())
        }
        Command::Compare {
            config_a,
            config_b,
            seeds,
            out,
        } => {
            let a = runner::parse_config(&config_a).map_err(|e| e.to_string())?;
            let b = runner::parse_config(&config_b).map_err(|e| e.to_string())?;
            let cmp = runner::run_comparison(&a, &b, seeds, &out).map_err(|e| e.to_string())?;
            println!(
                "sum throughput: a = {:.6}, b = {:.6}, difference = {:+.6}",
                cmp.sum_a, cmp.sum_b, cmp.sum_difference
            );
            for row in &cmp.per_stream {
                println!(
                    "  {} vs {}: {:.6} vs {:.6} ({:+.6})",
                    row.label_a,
                    row.label_b,
                    row.mean_cumulative_a,
                    row.mean_cumulative_b,
                    row.difference
                );
            }
            Ok(())
        }
    }
}
