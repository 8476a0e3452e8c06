//! `coocnet` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coocnet::ErrorClass;

use crate::config::CommonArgs;

#[derive(Debug, Parser)]
#[command(
    name = "coocnet",
    version,
    about = "Detect GAN-generated images from pixel co-occurrence matrices"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Walk `<root>/<label>/<category>/*` into a JSON Lines manifest
    Manifest {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also assign train/val/test splits (50/25/25, seeded)
        #[arg(long)]
        split: bool,
    },
    /// Precompute co-occurrence tensors into a cache directory
    Extract {
        manifest: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Split (if needed), train and save the best-validation checkpoint
    Train {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on one split of a manifest
    Eval {
        checkpoint: PathBuf,
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print `<path>\t<probability>\t<real|gan>` for each image
    Predict {
        checkpoint: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Write a labeled synthetic dataset (smooth = gan, noisy = real)
    Synth {
        out_dir: PathBuf,
        /// Images per class
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Train on every record of one manifest, test on every record of another
    Xdataset {
        train_manifest: PathBuf,
        test_manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-category-out over the GAN categories
    Loco {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// JPEG robustness sweep, both training scenarios
    Jpeg {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Manifest { .. } => "manifest",
            Command::Extract { .. } => "extract",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Predict { .. } => "predict",
            Command::Synth { .. } => "synth",
            Command::Xdataset { .. } => "xdataset",
            Command::Loco { .. } => "loco",
            Command::Jpeg { .. } => "jpeg",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(coocnet::Error),
}

impl From<coocnet::Error> for CliError {
    fn from(e: coocnet::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands::*;
    let cfg = cli.common.resolve(cli.command.name())?;
    match cli.command {
        Command::Manifest { root, out, split } => cmd_manifest(&cfg, &root, &out, split),
        Command::Extract { manifest, out_dir } => cmd_extract(&cfg, &manifest, &out_dir),
        Command::Train { manifest, out } => cmd_train(&cfg, &manifest, &out),
        Command::Eval {
            checkpoint,
            manifest,
            split,
            out,
        } => cmd_eval(&cfg, &cli.common, &checkpoint, &manifest, &split, out.as_deref()),
        Command::Predict { checkpoint, images } => cmd_predict(&cfg, &cli.common, &checkpoint, &images),
        Command::Synth { out_dir, count, size } => cmd_synth(&cfg, &out_dir, count, size),
        Command::Xdataset {
            train_manifest,
            test_manifest,
            out,
        } => cmd_xdataset(&cfg, &train_manifest, &test_manifest, &out),
        Command::Loco { manifest, out } => cmd_loco(&cfg, &manifest, &out),
        Command::Jpeg { manifest, out } => cmd_jpeg(&cfg, &manifest, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
