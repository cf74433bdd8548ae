use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use adda_core::data::{load_domain, synth_domain, synth_recordings, DomainDataset, SynthConfig};
use adda_core::eval::{
    dataset_features, evaluate_classifier, export_features, features_csv, proxy_a_distance,
    sweep_csv, sweep_untie_depth,
};
use adda_core::model::{FeatureExtractor, ModelFile, Phase, Provenance};
use adda_core::signal::DomainLabel;
use adda_core::train::{adversarial_finetune_with, pretrain, FinetuneConfig, PretrainConfig};

use crate::{
    AdaptArgs, Cli, Command, Domain, EvalArgs, FinetuneArgs, PairArgs, PretrainArgs, SweepArgs,
    SynthArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Pretrain(a) => pretrain_cmd(cli, a),
        Command::Adapt(a) => adapt(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Divergence(a) => divergence(cli, a),
        Command::ExportFeatures(a) => export(cli, a),
        Command::SweepL(a) => sweep(cli, a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes `run.json` into `dir`.
fn write_run(dir: &Path, command: &str, cli: &Cli, resolved: Value) -> Result<()> {
    let run = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.seed,
        "threads": cli.threads,
        "resolved": resolved,
    });
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&run)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// A dataset file is either a manifest of recordings or a SynthConfig.
/// `role` relabels the samples when the caller knows which side they are.
fn load_data(path: &Path, role: Option<DomainLabel>) -> Result<DomainDataset> {
    let value: Value = read_json(path)?;
    let data = if value.get("entries").is_some() {
        let d = load_domain(path)?;
        match role {
            Some(r) => d.relabeled(r),
            None => d,
        }
    } else if value.get("classes").is_some() {
        let cfg: SynthConfig = serde_json::from_value(value)
            .with_context(|| format!("parsing synth config {}", path.display()))?;
        synth_domain(&cfg, role.unwrap_or(DomainLabel::Source))?
    } else {
        bail!(
            "{} is neither a manifest (no \"entries\") nor a synth config (no \"classes\")",
            path.display()
        );
    };
    Ok(data)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<SynthConfig>(p)?,
        None => SynthConfig::fixture(a.shift, a.scale, a.noise, 0),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let label = match a.domain {
        Domain::Source => DomainLabel::Source,
        Domain::Target => DomainLabel::Target,
    };
    let manifest = synth_recordings(&cfg, label, a.recording_len, &a.out)?;
    let cfg_path = a.out.join("config.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(&cfg)? + "\n")
        .with_context(|| format!("writing {}", cfg_path.display()))?;
    write_run(
        &a.out,
        "synth",
        cli,
        json!({
            "config": cfg,
            "domain": a.domain,
            "recording_len": a.recording_len,
            "manifest": manifest,
        }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn pretrain_cmd(cli: &Cli, a: &PretrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<PretrainConfig>(p)?,
        None => PretrainConfig::default(),
    };
    if let Some(v) = a.iters {
        cfg.iterations = v;
    }
    if let Some(v) = a.batch {
        cfg.batch = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    let data = load_data(&a.data, Some(DomainLabel::Source))?;
    let (extractor, log) = pretrain(&data, &cfg)?;
    let acc = evaluate_classifier(&extractor, &data)?.accuracy;

    create_parent(&a.out_model)?;
    create_parent(&a.out_log)?;
    let phase = if cfg.iterations == 0 {
        Phase::Init
    } else {
        Phase::Pretrain
    };
    ModelFile::new(
        extractor,
        Provenance {
            phase,
            seed: cfg.seed,
            iterations: cfg.iterations as u64,
        },
    )
    .save(&a.out_model)?;
    log.write_csv(&a.out_log)?;
    write_run(
        &parent_dir(&a.out_model),
        "pretrain",
        cli,
        json!({
            "data": a.data,
            "config": cfg,
            "out_model": a.out_model,
            "out_log": a.out_log,
        }),
    )?;
    println!("source accuracy {acc:.4}");
    Ok(())
}

fn finetune_config(cli: &Cli, a: &FinetuneArgs) -> Result<FinetuneConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<FinetuneConfig>(p)?,
        None => FinetuneConfig::default(),
    };
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.iters {
        cfg.iterations = v;
    }
    if let Some(v) = a.batch {
        cfg.batch = v;
    }
    if let Some(v) = a.lr_d {
        cfg.lr_d = v;
    }
    if let Some(v) = a.lr_mt {
        cfg.lr_mt = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

struct AdaptInputs {
    source_model: FeatureExtractor,
    source: DomainDataset,
    target: DomainDataset,
}

fn adapt_inputs(a: &FinetuneArgs) -> Result<AdaptInputs> {
    Ok(AdaptInputs {
        source_model: load_model(&a.model)?.extractor,
        source: load_data(&a.source, Some(DomainLabel::Source))?,
        target: load_data(&a.target, Some(DomainLabel::Target))?,
    })
}

fn adapt(cli: &Cli, a: &AdaptArgs) -> Result<()> {
    let mut cfg = finetune_config(cli, &a.common)?;
    if let Some(v) = a.untie {
        cfg.untie = v;
    }
    if let Some(v) = a.snapshot_every {
        cfg.snapshot_every = v;
    }
    cfg.validate()?;
    let inputs = adapt_inputs(&a.common)?;
    if let Some(dir) = &a.snapshot_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let (source, target) = (&inputs.source, &inputs.target);
    let snapshot_dir = a.snapshot_dir.clone();
    let (pair, disc, log) = adversarial_finetune_with(
        &inputs.source_model,
        source,
        target,
        &cfg,
        &mut |iter, pair, _| {
            if let Some(dir) = &snapshot_dir {
                let csv = features_csv(pair.source(), pair.target(), source, target)?;
                fs::write(dir.join(format!("features_{iter:06}.csv")), csv)?;
            }
            Ok(())
        },
    )?;
    let before = evaluate_classifier(pair.source(), target)?.accuracy;
    let after = evaluate_classifier(pair.target(), target)?.accuracy;

    create_parent(&a.out_model)?;
    create_parent(&a.out_log)?;
    let mut file = ModelFile::new(
        pair.target().clone(),
        Provenance {
            phase: Phase::Finetune,
            seed: cfg.seed,
            iterations: cfg.iterations as u64,
        },
    );
    file.discriminator = Some(disc);
    file.untie_count = Some(cfg.untie);
    file.save(&a.out_model)?;
    log.write_csv(&a.out_log)?;
    write_run(
        &parent_dir(&a.out_model),
        "adapt",
        cli,
        json!({
            "source": a.common.source,
            "target": a.common.target,
            "model": a.common.model,
            "config": cfg,
            "out_model": a.out_model,
            "out_log": a.out_log,
            "snapshot_dir": a.snapshot_dir,
        }),
    )?;
    println!("target accuracy {before:.4} -> {after:.4}");
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load_data(&a.data, None)?;
    let report = evaluate_classifier(&model.extractor, &data)?;
    create_parent(&a.out)?;
    fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", a.out.display()))?;
    write_run(
        &parent_dir(&a.out),
        "eval",
        cli,
        json!({ "model": a.model, "data": a.data, "out": a.out }),
    )?;
    println!("accuracy {:.4} on {} samples", report.accuracy, report.n);
    Ok(())
}

fn pair_inputs(a: &PairArgs) -> Result<(ModelFile, ModelFile, DomainDataset, DomainDataset)> {
    Ok((
        load_model(&a.source_model)?,
        load_model(&a.target_model)?,
        load_data(&a.source, Some(DomainLabel::Source))?,
        load_data(&a.target, Some(DomainLabel::Target))?,
    ))
}

fn pair_run(a: &PairArgs, seed: Option<u64>) -> Value {
    json!({
        "source_model": a.source_model,
        "target_model": a.target_model,
        "source": a.source,
        "target": a.target,
        "out": a.out,
        "split": a.split,
        "split_seed": seed.unwrap_or(0),
    })
}

fn divergence(cli: &Cli, a: &PairArgs) -> Result<()> {
    let (ms, mt, source, target) = pair_inputs(a)?;
    let fs_ = dataset_features(&ms.extractor, &source)?;
    let ft = dataset_features(&mt.extractor, &target)?;
    let report = proxy_a_distance(&fs_, &ft, a.split, cli.seed.unwrap_or(0))?;
    create_parent(&a.out)?;
    fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", a.out.display()))?;
    write_run(
        &parent_dir(&a.out),
        "divergence",
        cli,
        pair_run(a, cli.seed),
    )?;
    println!("d_hat {:.4} (epsilon {:.4})", report.d_hat, report.epsilon);
    Ok(())
}

fn export(cli: &Cli, a: &PairArgs) -> Result<()> {
    let (ms, mt, source, target) = pair_inputs(a)?;
    create_parent(&a.out)?;
    export_features(&ms.extractor, &mt.extractor, &source, &target, &a.out)?;
    write_run(
        &parent_dir(&a.out),
        "export-features",
        cli,
        pair_run(a, cli.seed),
    )?;
    println!("wrote {} rows", source.len() + target.len());
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let cfg = finetune_config(cli, &a.common)?;
    cfg.validate()?;
    let inputs = adapt_inputs(&a.common)?;
    let rows = sweep_untie_depth(&inputs.source_model, &inputs.source, &inputs.target, &cfg)?;
    create_parent(&a.out_csv)?;
    fs::write(&a.out_csv, sweep_csv(&rows))
        .with_context(|| format!("writing {}", a.out_csv.display()))?;
    write_run(
        &parent_dir(&a.out_csv),
        "sweep-l",
        cli,
        json!({
            "source": a.common.source,
            "target": a.common.target,
            "model": a.common.model,
            "config": cfg,
            "out_csv": a.out_csv,
        }),
    )?;
    for r in &rows {
        println!(
            "l={} target {:.4} source {:.4}",
            r.untie, r.target_acc, r.source_acc
        );
    }
    Ok(())
}
