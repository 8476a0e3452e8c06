use std::path::{Path, PathBuf};

use coocnet::cooc::{batch_extract, cooccur_tensor, write_tensor_cache};
use coocnet::harness::{
    build_manifest, cross_dataset, derive_seed, evaluate, jpeg_robustness, leave_one_category_out, split_dataset,
    train, write_report, DatasetManifest, Label, LabelingRule, RunMetadata, Split, SplitRatios,
};
use coocnet::imaging::{load_image, save_png, synth_sample, SynthClass};
use coocnet::net::{load_checkpoint, predict_many, save_checkpoint, ModelParams, NetworkSpec};
use coocnet::parallel::WorkerPool;
use serde::Serialize;

use crate::config::{CommonArgs, RunConfig};
use crate::CliError;

type CmdResult = Result<(), CliError>;

fn metadata(cfg: &RunConfig) -> Result<RunMetadata, CliError> {
    Ok(RunMetadata::new(cfg.seed, cfg)?)
}

fn pool(cfg: &RunConfig) -> WorkerPool {
    WorkerPool::new(cfg.workers)
}

/// Appends `suffix` to the full file name (`model.bin` -> `model.bin.report.json`).
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Splits the manifest with the run seed unless every record already has a split.
fn ensure_split(manifest: DatasetManifest, seed: u64) -> Result<DatasetManifest, CliError> {
    if manifest.records.iter().any(|r| r.split == Split::Unassigned) {
        log::info!("assigning 50/25/25 splits with seed {seed}");
        return Ok(split_dataset(&manifest, SplitRatios::default(), seed)?);
    }
    Ok(manifest)
}

pub fn cmd_manifest(cfg: &RunConfig, root: &Path, out: &Path, split: bool) -> CmdResult {
    let mut m = build_manifest(root, &LabelingRule::default())?;
    if split {
        m = split_dataset(&m, SplitRatios::default(), cfg.seed)?;
    }
    m.write(out)?;
    let cfg = cfg.clone().path("root", root).path("out", out);
    #[derive(Serialize)]
    struct Summary {
        records: usize,
        real: usize,
        gan: usize,
    }
    let summary = Summary {
        records: m.len(),
        real: m.count(Label::Real),
        gan: m.count(Label::Gan),
    };
    write_report(sidecar(out, ".meta.json"), &metadata(&cfg)?, &summary)?;
    println!(
        "{} records ({} real, {} gan) -> {}",
        summary.records,
        summary.real,
        summary.gan,
        out.display()
    );
    Ok(())
}

pub fn cmd_extract(cfg: &RunConfig, manifest_path: &Path, out_dir: &Path) -> CmdResult {
    let m = DatasetManifest::read(manifest_path)?;
    std::fs::create_dir_all(out_dir)?;
    let (extracted, report) = batch_extract(&m.records, cfg.cooc(), &pool(cfg))?;
    #[derive(Serialize)]
    struct Entry<'a> {
        path: &'a Path,
        label: Label,
        category: &'a str,
        split: Split,
        tensor: String,
    }
    let mut index = String::new();
    for e in &extracted {
        let name = format!("{:06}.cooc", e.index);
        write_tensor_cache(out_dir.join(&name), &e.tensor, cfg.cooc())?;
        let r = &m.records[e.index];
        index.push_str(&serde_json::to_string(&Entry {
            path: &r.path,
            label: r.label,
            category: &r.category,
            split: r.split,
            tensor: name,
        })?);
        index.push('\n');
    }
    std::fs::write(out_dir.join("index.jsonl"), index)?;
    for f in &report.failures {
        log::warn!("skipped {}: {}", f.path.display(), f.error);
    }
    let failures: Vec<_> = report
        .failures
        .iter()
        .map(|f| serde_json::json!({"path": f.path, "error": f.error}))
        .collect();
    let cfg = cfg.clone().path("manifest", manifest_path).path("out_dir", out_dir);
    write_report(
        out_dir.join("metadata.json"),
        &metadata(&cfg)?,
        &serde_json::json!({"extracted": extracted.len(), "failures": failures}),
    )?;
    println!(
        "{} tensors written to {} ({} failures)",
        extracted.len(),
        out_dir.display(),
        failures.len()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> CmdResult {
    let m = ensure_split(DatasetManifest::read(manifest_path)?, cfg.seed)?;
    m.write(sidecar(out, ".manifest.jsonl"))?;
    let spec = NetworkSpec::standard(cfg.cooc().bins);
    let outcome = train(&m, &spec, &cfg.train, &pool(cfg))?;
    save_checkpoint(&outcome.params, &spec, out)?;
    std::fs::write(sidecar(out, ".history.csv"), outcome.metrics.history_csv())?;
    let cfg = cfg.clone().path("manifest", manifest_path).path("checkpoint", out);
    let failures: Vec<_> = outcome
        .extract_report
        .failures
        .iter()
        .map(|f| serde_json::json!({"path": f.path, "error": f.error}))
        .collect();
    write_report(
        sidecar(out, ".report.json"),
        &metadata(&cfg)?,
        &serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "validation": outcome.metrics,
            "extraction_failures": failures,
        }),
    )?;
    println!(
        "best epoch {} with validation accuracy {:.4}; checkpoint -> {}",
        outcome.best_epoch + 1,
        outcome.metrics.accuracy,
        out.display()
    );
    Ok(())
}

/// Loads a checkpoint and aligns the co-occurrence bins with it. An explicit
/// `--bins` that disagrees with the checkpoint is a data error.
fn load_model(
    cfg: &RunConfig,
    common: &CommonArgs,
    checkpoint: &Path,
) -> Result<(ModelParams<f32>, NetworkSpec, RunConfig), CliError> {
    let (params, spec) = load_checkpoint(checkpoint)?;
    let mut cfg = cfg.clone();
    if common.bins.is_some() {
        spec.ensure_bins(cfg.cooc().bins)?;
    }
    cfg.train.cooc.bins = spec.bins;
    Ok((params, spec, cfg))
}

pub fn cmd_eval(
    cfg: &RunConfig,
    common: &CommonArgs,
    checkpoint: &Path,
    manifest_path: &Path,
    split: &str,
    out: Option<&Path>,
) -> CmdResult {
    let split: Split = split
        .parse()
        .map_err(|e: coocnet::Error| CliError::Usage(e.to_string()))?;
    let (params, spec, cfg) = load_model(cfg, common, checkpoint)?;
    let m = ensure_split(DatasetManifest::read(manifest_path)?, cfg.seed)?;
    let metrics = evaluate(&params, &spec, &m, split, cfg.cooc(), &pool(&cfg))?;
    let cfg = cfg.path("checkpoint", checkpoint).path("manifest", manifest_path);
    let meta = metadata(&cfg)?;
    if let Some(out) = out {
        write_report(out, &meta, &metrics)?;
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({"metadata": meta, "result": metrics}))?;
    println!("{text}");
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, common: &CommonArgs, checkpoint: &Path, images: &[PathBuf]) -> CmdResult {
    let (params, spec, cfg) = load_model(cfg, common, checkpoint)?;
    let pool = pool(&cfg);
    let inputs = pool
        .map_ordered(images, |p| {
            load_image(p).and_then(|img| cooccur_tensor(&img, cfg.cooc()))
        })
        .into_iter()
        .map(|r| r.map(|t| t.to_input()))
        .collect::<coocnet::Result<Vec<_>>>()?;
    let refs: Vec<_> = inputs.iter().collect();
    let probs = predict_many(&params, &spec, &refs, &pool)?;
    let meta = metadata(&cfg.path("checkpoint", checkpoint))?;
    eprintln!("# metadata {}", serde_json::to_string(&meta)?);
    for (path, p) in images.iter().zip(probs) {
        let p = p as f64;
        println!("{}\t{:.6}\t{}", path.display(), p, Label::from_probability(p));
    }
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path, count: usize, size: usize) -> CmdResult {
    if count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    for (class, dir) in [(SynthClass::Smooth, "gan/smooth"), (SynthClass::Noisy, "real/noisy")] {
        let dir = out_dir.join(dir);
        std::fs::create_dir_all(&dir)?;
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        for i in 0..count {
            let img = synth_sample(class, derive_seed(cfg.seed, i as u64), size, size)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            save_png(&img, dir.join(format!("{name}_{i:05}.png")))?;
        }
    }
    let cfg = cfg.clone().path("out_dir", out_dir);
    write_report(
        out_dir.join("metadata.json"),
        &metadata(&cfg)?,
        &serde_json::json!({"count_per_class": count, "size": size}),
    )?;
    println!("{} images written to {}", 2 * count, out_dir.display());
    Ok(())
}

pub fn cmd_xdataset(cfg: &RunConfig, train_path: &Path, test_path: &Path, out: &Path) -> CmdResult {
    let train_m = DatasetManifest::read(train_path)?;
    let test_m = DatasetManifest::read(test_path)?;
    let spec = NetworkSpec::standard(cfg.cooc().bins);
    let res = cross_dataset(&train_m, &test_m, &spec, &cfg.train, &pool(cfg))?;
    let cfg = cfg
        .clone()
        .path("train_manifest", train_path)
        .path("test_manifest", test_path);
    write_report(
        out,
        &metadata(&cfg)?,
        &serde_json::json!({"best_epoch": res.training.best_epoch, "selection": res.training.metrics, "test": res.metrics}),
    )?;
    println!(
        "cross-dataset accuracy {:.4} ({} images)",
        res.metrics.accuracy, res.metrics.total
    );
    Ok(())
}

pub fn cmd_loco(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> CmdResult {
    let m = DatasetManifest::read(manifest_path)?;
    let spec = NetworkSpec::standard(cfg.cooc().bins);
    let table = leave_one_category_out(&m, &spec, &cfg.train, &pool(cfg))?;
    let cfg = cfg.clone().path("manifest", manifest_path);
    write_report(out, &metadata(&cfg)?, &table)?;
    print!("{}", table.to_tsv());
    Ok(())
}

pub fn cmd_jpeg(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> CmdResult {
    let m = ensure_split(DatasetManifest::read(manifest_path)?, cfg.seed)?;
    let spec = NetworkSpec::standard(cfg.cooc().bins);
    let res = jpeg_robustness(&m, &spec, &cfg.train, &cfg.qualities, &pool(cfg))?;
    let cfg = cfg.clone().path("manifest", manifest_path);
    write_report(out, &metadata(&cfg)?, &res)?;
    let qs: Vec<String> = cfg.qualities.iter().map(|q| format!("QF{q}")).collect();
    println!("Scenario\t{}", qs.join("\t"));
    for (name, row) in [("A", &res.scenario_a), ("B", &res.scenario_b)] {
        let vals: Vec<String> = cfg.qualities.iter().map(|q| format!("{:.2}", row[q] * 100.0)).collect();
        println!("{name}\t{}", vals.join("\t"));
    }
    Ok(())
}
