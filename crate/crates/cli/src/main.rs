use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dqpope_cli::config::{ExperimentConfig, ExperimentKind};
use dqpope_cli::csvout::{Cell, CsvWriter};
use dqpope_cli::runners;

#[derive(Parser)]
#[command(
    name = "dqpope",
    about = "Distributional off-policy evaluation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Compute only the Monte-Carlo ground-truth return distribution.
    Oracle { config: PathBuf },
    /// Run the built-in property suites.
    Check,
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            match cfg.kind {
                ExperimentKind::ToyMseTable => {
                    let (table, path) = runners::run_toy_mse_table(&cfg)?;
                    println!("wrote {}", path.display());
                    for (i, noise) in table.noises.iter().enumerate() {
                        let cells: Vec<String> = table
                            .columns
                            .iter()
                            .enumerate()
                            .map(|(j, c)| format!("{c} {:.2}", table.mse_x1000[i][j]))
                            .collect();
                        println!("{noise}: {}", cells.join("  "));
                    }
                    Ok(true)
                }
                ExperimentKind::ComplexitySweep => {
                    let (rows, path) = runners::run_complexity_sweep(&cfg)?;
                    println!("wrote {} ({} rows)", path.display(), rows.len());
                    for rate in &cfg.mixture_rates {
                        for size in &cfg.sample_sizes {
                            if let Some(mean) = runners::sweep::mean_w1(&rows, *rate, *size) {
                                println!("mixture {rate} N {size}: mean W1 {mean:.3}");
                            }
                        }
                    }
                    Ok(true)
                }
                ExperimentKind::TabularContraction => {
                    let (report, path) = runners::run_contraction_suite(&cfg)?;
                    println!("wrote {}", path.display());
                    for (gamma, p, trials, skipped, ratio, bound) in &report.rows {
                        let verdict = if ratio <= &(bound + 1e-9) { "PASS" } else { "FAIL" };
                        println!(
                            "{verdict} gamma {gamma} p {p}: max ratio {ratio:.6} vs bound {bound:.6} ({trials} trials, {skipped} degenerate skipped)"
                        );
                    }
                    Ok(report.all_pass())
                }
                ExperimentKind::QuantileFitSanity => {
                    let (report, path) = runners::run_quantile_fit_sanity(&cfg)?;
                    println!("wrote {}", path.display());
                    println!(
                        "ks {:.4} (<0.08), |f(0.5)| {:.4} (<0.1), gap {:.4} ([0.8,1.2])",
                        report.ks, report.median_abs, report.upper_gap
                    );
                    println!("{}", if report.pass() { "PASS" } else { "FAIL" });
                    Ok(report.pass())
                }
            }
        }
        Command::Oracle { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let env = cfg.build_env()?;
            let target = cfg.build_target_policy()?;
            let mut rng = runners::oracle_rng(cfg.base_seed);
            let dist = dqpope_core::env::mc_return_distribution(
                &env,
                &target,
                cfg.mc_rollouts,
                &mut rng,
            )?;
            let path = cfg.resolved_output_dir().join("oracle.csv");
            let mut out = CsvWriter::create(&path, &["return"])?;
            for sample in dist.samples() {
                out.row(&[Cell::Float(*sample)])?;
            }
            out.finish()?;
            println!(
                "wrote {} ({} rollouts, mean {:.4})",
                path.display(),
                dist.len(),
                dist.mean()
            );
            Ok(true)
        }
        Command::Check => {
            let outcomes = dqpope_cli::checks::run_all_checks().context("running checks")?;
            let mut all = true;
            for outcome in outcomes {
                all &= outcome.pass;
                println!(
                    "{} {}: {}",
                    if outcome.pass { "PASS" } else { "FAIL" },
                    outcome.name,
                    outcome.detail
                );
            }
            Ok(all)
        }
    }
}
