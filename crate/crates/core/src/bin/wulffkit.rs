use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wulffkit::body::BodyJson;
use wulffkit::cli::{read_json_arg, run_config, CliError, Defaults, Overrides, RunConfig, TaskSpec};
use wulffkit::norm::NormSpecJson;

#[derive(Parser)]
#[command(name = "wulffkit", version, about = "Anisotropic curvature measures and integral identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Executes every task of a JSON run configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Ellipticity and derivative consistency of a norm.
    NormCheck {
        /// Norm JSON, inline or `@file`.
        #[arg(long)]
        norm: String,
        #[arg(long)]
        dimension: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Decides whether a body is a translated, scaled Wulff shape of the norm.
    DetectWulff {
        /// Body JSON, inline or `@file`.
        #[arg(long)]
        body: String,
        /// Norm JSON, inline or `@file`.
        #[arg(long)]
        norm: String,
        #[arg(long)]
        dimension: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol_ratio: Option<f64>,
        #[arg(long)]
        tol_fit: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn single_task(norm: NormSpecJson, bodies: Vec<BodyJson>, dimension: Option<usize>, task: TaskSpec) -> RunConfig {
    RunConfig {
        dimension,
        norm,
        bodies,
        tasks: vec![task],
        seed: None,
        output_dir: None,
        workers: None,
        defaults: Defaults::default(),
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (mut config, overrides) = match cli.command {
        Command::Run {
            config,
            seed,
            output_dir,
            workers,
        } => (
            RunConfig::from_path(&config)?,
            Overrides {
                seed,
                output_dir,
                workers,
            },
        ),
        Command::NormCheck {
            norm,
            dimension,
            samples,
            output_dir,
        } => (
            single_task(read_json_arg(&norm)?, Vec::new(), dimension, TaskSpec::NormCheck { samples }),
            Overrides {
                output_dir,
                ..Overrides::default()
            },
        ),
        Command::DetectWulff {
            body,
            norm,
            dimension,
            r,
            samples,
            tol_ratio,
            tol_fit,
            seed,
            workers,
            output_dir,
        } => (
            single_task(
                read_json_arg(&norm)?,
                vec![read_json_arg(&body)?],
                dimension,
                TaskSpec::DetectWulff {
                    bodies: None,
                    r,
                    partition: None,
                    samples,
                    tol_ratio,
                    tol_fit,
                },
            ),
            Overrides {
                seed,
                output_dir,
                workers,
            },
        ),
    };
    overrides.apply(&mut config)?;
    let summary = run_config(&config)?;
    for out in &summary.outputs {
        for row in &out.rows {
            println!(
                "{},{},{},{},{}",
                row.task,
                row.body,
                row.key,
                wulffkit::cli::format_number(row.value),
                row.verdict
            );
        }
    }
    for e in &summary.errors {
        eprintln!("error: {e}");
    }
    eprintln!("reports written to {}", summary.output_dir.display());
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
