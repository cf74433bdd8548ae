//! Supervised pretraining of the source extractor and adversarial
//! finetuning of the target extractor against a domain discriminator.
//!
//! All losses are the negatives of the maximized objectives and are
//! minimized with Adam. Per-sample passes within a batch run in parallel;
//! gradients are reduced in fixed chunk order so results do not depend on
//! the thread count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DomainDataset, MinibatchSampler};
use crate::error::{Error, Result};
use crate::model::{
    check_untie_count, init_target_from_source, Discriminator, ExtractorTrace, FeatureExtractor,
    TiedPair, NUM_GROUPS,
};
use crate::nn::{
    adam_step, argmax, logistic_loss, softmax_xent_loss, AdamConfig, AdamState, Direction,
    FeatureMap, LayerParams,
};
use crate::rng;

/// Samples per reduction chunk. Fixed so the summation tree never changes.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_pretrain_iters")]
    pub iterations: usize,
    #[serde(default = "default_pretrain_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch() -> usize {
    64
}
fn default_pretrain_iters() -> usize {
    2000
}
fn default_pretrain_lr() -> f64 {
    1e-3
}
fn default_finetune_iters() -> usize {
    3000
}
fn default_k() -> usize {
    1
}
fn default_untie() -> usize {
    NUM_GROUPS
}
fn default_adv_lr() -> f64 {
    1e-4
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            batch: default_batch(),
            iterations: default_pretrain_iters(),
            lr: default_pretrain_lr(),
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad pretrain config {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_finetune_iters")]
    pub iterations: usize,
    /// Discriminator steps per target-extractor step.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Number of trailing extractor groups that adapt (l).
    #[serde(default = "default_untie")]
    pub untie: usize,
    #[serde(default = "default_adv_lr")]
    pub lr_d: f64,
    #[serde(default = "default_adv_lr")]
    pub lr_mt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshot_every: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            batch: default_batch(),
            iterations: default_finetune_iters(),
            k: default_k(),
            untie: default_untie(),
            lr_d: default_adv_lr(),
            lr_mt: default_adv_lr(),
            seed: 0,
            snapshot_every: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        check_untie_count(self.untie)?;
        if self.batch == 0 || self.k == 0 || !(self.lr_d > 0.0) || !(self.lr_mt > 0.0) {
            return Err(Error::InvalidInput(format!("bad finetune config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iter: usize,
    pub loss_cls: Option<f64>,
    pub loss_d: Option<f64>,
    pub loss_mt: Option<f64>,
    pub src_batch_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

pub const LOG_HEADER: &str = "iter,loss_cls,loss_d,loss_mt,src_batch_acc";

impl TrainLog {
    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                opt(r.loss_cls),
                opt(r.loss_d),
                opt(r.loss_mt),
                r.src_batch_acc
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Mean of `f` over the last `window` records that define it.
    pub fn tail_mean(&self, window: usize, f: impl Fn(&TrainRecord) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .rev()
            .filter_map(&f)
            .take(window)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn head_mean(&self, window: usize, f: impl Fn(&TrainRecord) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.records.iter().filter_map(&f).take(window).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Per-chunk partial sums: parameter gradients, loss, correct predictions.
struct Partial {
    grads: Vec<LayerParams>,
    loss: f64,
    correct: usize,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        if self.grads.is_empty() {
            self.grads = other.grads;
        } else {
            for (a, b) in self.grads.iter_mut().zip(&other.grads) {
                a.add_assign(b);
            }
        }
        self.loss += other.loss;
        self.correct += other.correct;
        self
    }

    fn empty() -> Partial {
        Partial {
            grads: Vec::new(),
            loss: 0.0,
            correct: 0,
        }
    }
}

/// Sums per-sample contributions in a thread-count independent order.
fn reduce_batch<T: Sync>(
    items: &[T],
    per_item: impl Fn(&T) -> Result<Partial> + Sync,
) -> Result<Partial> {
    let chunks: Vec<Result<Partial>> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Partial::empty();
            for item in chunk {
                acc = acc.merge(per_item(item)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Partial::empty();
    for c in chunks {
        total = total.merge(c?);
    }
    Ok(total)
}

fn adam_states(params: &[LayerParams], lr: f64) -> Vec<AdamState> {
    params
        .iter()
        .map(|p| AdamState::new(p, AdamConfig::with_lr(lr)))
        .collect()
}

/// Supervised training of a fresh extractor on labeled source spectra.
pub fn pretrain(
    source: &DomainDataset,
    cfg: &PretrainConfig,
) -> Result<(FeatureExtractor, TrainLog)> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cannot pretrain on empty dataset {}",
            source.name()
        )));
    }
    let extractor = FeatureExtractor::build(cfg.seed);
    let mut adam = adam_states(&extractor.snapshot(), cfg.lr);
    let mut sampler = MinibatchSampler::from_rng(rng::stream(cfg.seed, rng::SAMPLING));
    let mut log = TrainLog::default();
    let m = cfg.batch as f64;

    for iter in 0..cfg.iterations {
        let idx = sampler.indices(source.len(), cfg.batch)?;
        let total = reduce_batch(&idx, |&i| {
            let s = &source.samples()[i];
            let trace = extractor.trace(&FeatureExtractor::input_map(s)?)?;
            let (loss, dlogits) = softmax_xent_loss(trace.output(), s.class_label())?;
            let correct = usize::from(argmax(trace.output()) + 1 == s.class_label());
            let grads = extractor.backward(&trace, &dlogits, false)?;
            Ok(Partial {
                grads: grads.groups,
                loss,
                correct,
            })
        })?;
        for (g, (mut grad, state)) in total.grads.into_iter().zip(adam.iter_mut()).enumerate() {
            grad.scale(1.0 / m);
            adam_step(
                &mut extractor.params_mut(g),
                &grad,
                state,
                Direction::Minimize,
            )?;
        }
        log.records.push(TrainRecord {
            iter,
            loss_cls: Some(total.loss / m),
            loss_d: None,
            loss_mt: None,
            src_batch_acc: total.correct as f64 / m,
        });
    }
    Ok((extractor, log))
}

/// Called every `snapshot_every` iterations (and never when it is 0) with
/// the completed iteration count and the current pair.
pub type SnapshotHook<'a> = dyn FnMut(usize, &TiedPair, &Discriminator) -> Result<()> + 'a;

pub fn adversarial_finetune(
    source_model: &FeatureExtractor,
    source: &DomainDataset,
    target: &DomainDataset,
    cfg: &FinetuneConfig,
) -> Result<(TiedPair, Discriminator, TrainLog)> {
    adversarial_finetune_with(source_model, source, target, cfg, &mut |_, _, _| Ok(()))
}

/// Alternates `k` discriminator steps with one step on the untied suffix of
/// the target extractor. The source extractor and the tied prefix never
/// change, so source features and the target's prefix activations are
/// computed once up front.
pub fn adversarial_finetune_with(
    source_model: &FeatureExtractor,
    source: &DomainDataset,
    target: &DomainDataset,
    cfg: &FinetuneConfig,
    on_snapshot: &mut SnapshotHook<'_>,
) -> Result<(TiedPair, Discriminator, TrainLog)> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(
            "adversarial finetuning needs non-empty source and target datasets".into(),
        ));
    }
    let pair = init_target_from_source(source_model, cfg.untie)?;
    let mut disc = Discriminator::build(rng::child_seed(cfg.seed, "discriminator", 0));
    let first = pair.first_untied();
    let mt = pair.target();

    let src_feats: Vec<Vec<f64>> = source
        .samples()
        .par_iter()
        .map(|s| source_model.extract_features(s))
        .collect::<Result<_>>()?;
    let src_correct: Vec<bool> = src_feats
        .iter()
        .zip(source.samples())
        .map(|(f, s)| argmax(f) + 1 == s.class_label())
        .collect();
    let tgt_prefix: Vec<FeatureMap> = target
        .samples()
        .par_iter()
        .map(|s| mt.forward_prefix(&FeatureExtractor::input_map(s)?, first))
        .collect::<Result<_>>()?;

    let mut adam_d = adam_states(disc.params(), cfg.lr_d);
    let mut adam_t = adam_states(&mt.snapshot()[first..], cfg.lr_mt);
    let mut src_sampler = MinibatchSampler::from_rng(rng::stream(cfg.seed, "finetune-source"));
    let mut tgt_sampler = MinibatchSampler::from_rng(rng::stream(cfg.seed, "finetune-target"));
    let m = cfg.batch as f64;
    let mut log = TrainLog::default();

    for iter in 0..cfg.iterations {
        // (a) discriminator: source features -> 1, target features -> 0.
        let mut loss_d = 0.0;
        let mut src_acc = 0.0;
        for _ in 0..cfg.k {
            let si = src_sampler.indices(source.len(), cfg.batch)?;
            let ti = tgt_sampler.indices(target.len(), cfg.batch)?;
            let tgt_feats: Vec<Vec<f64>> = ti
                .par_iter()
                .map(|&i| mt.forward_from(&tgt_prefix[i], first))
                .collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(2 * cfg.batch * disc.input_dim());
            for &i in &si {
                rows.extend_from_slice(&src_feats[i]);
            }
            for f in &tgt_feats {
                rows.extend_from_slice(f);
            }
            let (logits, cache) = disc.forward_batch(&rows, 2 * cfg.batch)?;
            let mut dlogits = Vec::with_capacity(logits.len());
            let mut loss = 0.0;
            for (b, &z) in logits.iter().enumerate() {
                let (l, dl) = logistic_loss(z, b < cfg.batch);
                loss += l;
                dlogits.push(dl / m);
            }
            let (_, grads) = disc.backward_batch(&cache, &dlogits, true)?;
            src_acc = si.iter().filter(|&&i| src_correct[i]).count() as f64 / m;
            loss_d += loss / m;
            for ((p, grad), state) in disc
                .params_mut()
                .iter_mut()
                .zip(grads.expect("requested"))
                .zip(&mut adam_d)
            {
                adam_step(p, &grad, state, Direction::Minimize)?;
            }
        }

        // (b) target extractor suffix: target features -> 1 (inverted label).
        let ti = tgt_sampler.indices(target.len(), cfg.batch)?;
        let traces: Vec<ExtractorTrace> = ti
            .par_iter()
            .map(|&i| mt.trace_from(&tgt_prefix[i], first))
            .collect::<Result<_>>()?;
        let rows: Vec<f64> = traces
            .iter()
            .flat_map(|t| t.output().iter().copied())
            .collect();
        let (logits, cache) = disc.forward_batch(&rows, cfg.batch)?;
        let mut loss_mt = 0.0;
        let dlogits: Vec<f64> = logits
            .iter()
            .map(|&z| {
                let (l, dl) = logistic_loss(z, true);
                loss_mt += l;
                dl
            })
            .collect();
        let (dfeat, _) = disc.backward_batch(&cache, &dlogits, false)?;
        let width = disc.input_dim();
        let jobs: Vec<(&ExtractorTrace, &[f64])> =
            traces.iter().zip(dfeat.chunks_exact(width)).collect();
        let total = reduce_batch(&jobs, |&(trace, df)| {
            let grads = mt.backward(trace, df, false)?;
            Ok(Partial {
                grads: grads.groups,
                loss: 0.0,
                correct: 0,
            })
        })?;
        for (offset, (mut grad, state)) in
            total.grads.into_iter().zip(adam_t.iter_mut()).enumerate()
        {
            grad.scale(1.0 / m);
            adam_step(
                &mut mt.params_mut(first + offset),
                &grad,
                state,
                Direction::Minimize,
            )?;
        }

        log.records.push(TrainRecord {
            iter,
            loss_cls: None,
            loss_d: Some(loss_d / cfg.k as f64),
            loss_mt: Some(loss_mt / m),
            src_batch_acc: src_acc,
        });
        if cfg.snapshot_every > 0 && (iter + 1) % cfg.snapshot_every == 0 {
            on_snapshot(iter + 1, &pair, &disc)?;
        }
    }
    Ok((pair, disc, log))
}
