//! Flat `key = value` config files merged with command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Args;
use coocnet::cooc::{CoOccConfig, Offset};
use coocnet::harness::TrainConfig;
use coocnet::net::AdamConfig;
use serde::Serialize;

use crate::CliError;

/// Knobs shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for extraction, evaluation and per-batch gradients
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Co-occurrence bins per axis (divides 256)
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Pixel offset as `dy,dx`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub offset: Option<String>,
    #[arg(long, global = true)]
    pub symmetric: bool,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size", global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Comma-separated JPEG quality factors
    #[arg(long, global = true)]
    pub qualities: Option<String>,
}

/// Fully resolved configuration, serialized into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub train: TrainConfig,
    pub qualities: Vec<u8>,
    pub paths: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn cooc(&self) -> &CoOccConfig {
        &self.train.cooc
    }

    pub fn path(mut self, key: &str, value: &Path) -> Self {
        self.paths.insert(key.into(), value.display().to_string());
        self
    }
}

const KEYS: &[&str] = &[
    "seed",
    "workers",
    "bins",
    "offset",
    "symmetric",
    "epochs",
    "batch_size",
    "lr",
    "qualities",
];

pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key `{}`",
                n + 1,
                k.trim()
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{v}` for {key}")))
}

fn parse_offset(v: &str) -> Result<Offset, CliError> {
    let (dy, dx) = v
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("offset must be `dy,dx`, got `{v}`")))?;
    Ok(Offset {
        dy: parse("offset", dy.trim())?,
        dx: parse("offset", dx.trim())?,
    })
}

fn parse_qualities(v: &str) -> Result<Vec<u8>, CliError> {
    let qs = v
        .split(',')
        .map(|q| parse::<u8>("qualities", q.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if qs.is_empty() || qs.iter().any(|q| !(1..=100).contains(q)) {
        return Err(CliError::Usage(format!("qualities must be in 1..=100, got `{v}`")));
    }
    Ok(qs)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value `{v}` for {key}"))),
    }
}

impl CommonArgs {
    pub fn resolve(&self, command: &str) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => {
                parse_flat(&std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)?
            }
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).map(String::as_str);

        let seed = match (self.seed, get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse("seed", v)?,
            (None, None) => 0,
        };
        let workers = match (self.workers, get("workers")) {
            (Some(w), _) => w,
            (None, Some(v)) => parse("workers", v)?,
            (None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        if workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        let mut cooc = CoOccConfig::default();
        if let Some(b) = self.bins {
            cooc.bins = b;
        } else if let Some(v) = get("bins") {
            cooc.bins = parse("bins", v)?;
        }
        if let Some(o) = self.offset.as_deref().or(get("offset")) {
            cooc.offset = parse_offset(o)?;
        }
        cooc.symmetric = self.symmetric
            || get("symmetric")
                .map(|v| parse_bool("symmetric", v))
                .transpose()?
                .unwrap_or(false);

        let defaults = TrainConfig::default();
        let epochs = match (self.epochs, get("epochs")) {
            (Some(e), _) => e,
            (None, Some(v)) => parse("epochs", v)?,
            (None, None) => defaults.epochs,
        };
        let batch_size = match (self.batch_size, get("batch_size")) {
            (Some(b), _) => b,
            (None, Some(v)) => parse("batch_size", v)?,
            (None, None) => defaults.batch_size,
        };
        let mut optimizer = AdamConfig::default();
        if let Some(lr) = self.lr {
            optimizer.learning_rate = lr;
        } else if let Some(v) = get("lr") {
            optimizer.learning_rate = parse("lr", v)?;
        }
        let qualities = match self.qualities.as_deref().or(get("qualities")) {
            Some(v) => parse_qualities(v)?,
            None => vec![95, 85, 75],
        };
        let train = TrainConfig {
            epochs,
            batch_size,
            seed,
            optimizer,
            cooc,
        };
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(RunConfig {
            command: command.into(),
            seed,
            workers,
            train,
            qualities,
            paths: BTreeMap::new(),
        })
    }
}
