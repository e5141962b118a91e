use std::path::PathBuf;
use std::process::ExitCode;

use adeflow::pipeline::{self, RunConfig, RunOverrides};
use adeflow::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adeflow", version, about = "Adverse drug event detection from EHR event logs")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = pipeline::THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event file and its ground-truth manifest.
    Synth {
        config: PathBuf,
        /// Event CSV to write.
        #[arg(short, long)]
        out: PathBuf,
        /// Manifest path; defaults to `<out>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ingest, aggregate, eliminate and evaluate as configured.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_folds: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Friedman and Nemenyi tests on a score table CSV.
    Compare {
        table: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Directory for friedman.csv, nemenyi.csv and cd_diagram.csv.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match pipeline::with_threads(cli.threads, || execute(cli.command)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adeflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> adeflow::Result<()> {
    match command {
        Command::Synth {
            config,
            out,
            manifest,
            seed,
        } => {
            let mut cfg = pipeline::load_synth_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = manifest.unwrap_or_else(|| pipeline::manifest_path(&out));
            let m = pipeline::synth_to_files(&cfg, &out, &manifest)?;
            println!(
                "wrote {} ({} patients, {} positive) and {}",
                out.display(),
                m.n_patients,
                m.n_positive,
                manifest.display()
            );
        }
        Command::Run {
            config,
            seed,
            n_folds,
            output_dir,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&RunOverrides {
                seed,
                n_folds,
                output_dir,
            })?;
            let report = pipeline::run(&cfg)?;
            if report.n_rows_skipped > 0 {
                eprintln!("adeflow: skipped {} malformed rows", report.n_rows_skipped);
            }
            println!(
                "{}: {} positives, {} controls, {} features",
                report.ade, report.n_positive, report.n_negative, report.n_features
            );
            for c in &report.evaluation.cells {
                println!(
                    "  {:<10} {:<12} AUC {:.4} ± {:.4}",
                    c.approach.to_string(),
                    c.classifier,
                    c.mean_auc,
                    c.std_auc
                );
            }
            println!("reports in {}", cfg.output_dir.display());
        }
        Command::Compare {
            table,
            alpha,
            output_dir,
        } => {
            let report = pipeline::compare_file(&table, alpha)?;
            print!("{}", report.render());
            if let Some(dir) = output_dir {
                report.write_files(&dir)?;
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn _assert_error_is_send(e: Error) -> impl Send {
    e
}
