//! Classification metrics, the proxy domain-divergence estimate and
//! feature export.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::model::{FeatureExtractor, NUM_GROUPS};
use crate::nn::{
    adam_step, dense_backward_rows, dense_forward_rows, logistic_loss, AdamConfig, AdamState,
    Direction, LayerParams, LayerSpec,
};
use crate::rng;
use crate::train::{adversarial_finetune, FinetuneConfig};

/// Accuracy, confusion matrix (rows true class, columns predicted) and
/// per-class precision/recall. A class never predicted has precision 0; a
/// class with no instances has recall 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub n: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidInput(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        let n: u64 = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::InvalidInput(
                "confusion matrix holds no samples".into(),
            ));
        }
        let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
        let precision = (0..k)
            .map(|c| ratio(confusion[c][c], (0..k).map(|r| confusion[r][c]).sum()))
            .collect();
        let recall = (0..k)
            .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
            .collect();
        Ok(Self {
            accuracy: trace as f64 / n as f64,
            confusion,
            precision,
            recall,
            n,
        })
    }

    /// Builds the report from 1-based `(true, predicted)` label pairs.
    pub fn from_pairs(
        num_classes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut confusion = vec![vec![0u64; num_classes]; num_classes];
        for (t, p) in pairs {
            if t == 0 || p == 0 || t > num_classes || p > num_classes {
                return Err(Error::InvalidInput(format!(
                    "label pair ({t}, {p}) outside 1..={num_classes}"
                )));
            }
            confusion[t - 1][p - 1] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.confusion[c][c]).sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.confusion[class].iter().sum()
    }
}

/// Fraction as a percentage rounded half away from zero to two decimals.
pub fn percent_2dp(fraction: f64) -> f64 {
    (fraction * 1e4).round() / 100.0
}

/// Predicts every sample with `extractor` and tallies the results.
pub fn evaluate_classifier(
    extractor: &FeatureExtractor,
    dataset: &DomainDataset,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cannot evaluate on empty dataset {}",
            dataset.name()
        )));
    }
    let pairs: Vec<(usize, usize)> = dataset
        .samples()
        .par_iter()
        .map(|s| Ok((s.class_label(), extractor.predict_label(s)?.0)))
        .collect::<Result<_>>()?;
    // The model emits 10 logits; a smaller label set still needs room for
    // every predicted class.
    let k = dataset
        .num_classes()
        .max(pairs.iter().map(|p| p.1).max().unwrap_or(1));
    MetricsReport::from_pairs(k, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceReport {
    pub epsilon: f64,
    pub d_hat: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Domain classifier settings for [`proxy_a_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainClassifierConfig {
    pub hidden: usize,
    pub iterations: usize,
    pub lr: f64,
}

impl Default for DomainClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            iterations: 500,
            lr: 1e-2,
        }
    }
}

/// Estimates how separable two feature sets are: `1 - 2 * test error` of a
/// small domain classifier, clamped to [0, 1].
pub fn proxy_a_distance(
    features_source: &[Vec<f64>],
    features_target: &[Vec<f64>],
    split_fraction: f64,
    seed: u64,
) -> Result<DivergenceReport> {
    proxy_a_distance_with(
        features_source,
        features_target,
        split_fraction,
        seed,
        &DomainClassifierConfig::default(),
    )
}

pub fn proxy_a_distance_with(
    features_source: &[Vec<f64>],
    features_target: &[Vec<f64>],
    split_fraction: f64,
    seed: u64,
    cfg: &DomainClassifierConfig,
) -> Result<DivergenceReport> {
    if features_source.is_empty() || features_target.is_empty() {
        return Err(Error::InvalidInput(
            "both feature sets must be non-empty".into(),
        ));
    }
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction must be in (0, 1), got {split_fraction}"
        )));
    }
    let dim = features_source[0].len();
    if dim == 0
        || features_source
            .iter()
            .chain(features_target)
            .any(|f| f.len() != dim)
    {
        return Err(Error::InvalidInput(
            "feature vectors must share one positive length".into(),
        ));
    }
    if cfg.hidden == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bad domain classifier config {cfg:?}"
        )));
    }

    let mut labeled: Vec<(&[f64], bool)> = features_source
        .iter()
        .map(|f| (f.as_slice(), false))
        .chain(features_target.iter().map(|f| (f.as_slice(), true)))
        .collect();
    // Canonical order first, so the split ignores how the lists were ordered.
    labeled.sort_by(|a, b| {
        a.1.cmp(&b.1).then_with(|| {
            a.0.iter()
                .zip(b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut split_rng = rng::stream(seed, rng::SPLITS);
    labeled.shuffle(&mut split_rng);
    let total = labeled.len();
    let n_train =
        ((total as f64 * split_fraction).round() as usize).clamp(1, total.saturating_sub(1).max(1));
    let (train, test) = labeled.split_at(n_train);
    let test = if test.is_empty() { train } else { test };

    // Standardize with training statistics so the fixed learning rate suits
    // any feature scale.
    let mut mean = vec![0.0; dim];
    for (f, _) in train {
        for (m, v) in mean.iter_mut().zip(f.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    let mut sd = vec![0.0; dim];
    for (f, _) in train {
        for ((s, v), m) in sd.iter_mut().zip(f.iter()).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    sd.iter_mut()
        .for_each(|s| *s = (*s / train.len() as f64).sqrt().max(1e-12));
    let standardize = |rows: &[(&[f64], bool)]| -> (Vec<f64>, Vec<bool>) {
        let mut x = Vec::with_capacity(rows.len() * dim);
        for (f, _) in rows {
            x.extend(f.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s));
        }
        (x, rows.iter().map(|r| r.1).collect())
    };
    let (train_x, train_y) = standardize(train);
    let (test_x, test_y) = standardize(test);

    let specs = [
        LayerSpec::Dense {
            in_dim: dim,
            out_dim: cfg.hidden,
        },
        LayerSpec::Dense {
            in_dim: cfg.hidden,
            out_dim: 1,
        },
    ];
    let mut init = rng::stream(seed, "domain-classifier-init");
    let mut params: Vec<LayerParams> = specs
        .iter()
        .map(|s| LayerParams::he_init(s, &mut init))
        .collect();
    let mut adam: Vec<AdamState> = params
        .iter()
        .map(|p| AdamState::new(p, AdamConfig::with_lr(cfg.lr)))
        .collect();
    let hidden = |params: &[LayerParams], x: &[f64], n: usize| -> Vec<f64> {
        let mut h = dense_forward_rows(x, n, dim, cfg.hidden, &params[0]);
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        h
    };

    // Full-batch training.
    let n = train_y.len();
    for _ in 0..cfg.iterations {
        let h = hidden(&params, &train_x, n);
        let logits = dense_forward_rows(&h, n, cfg.hidden, 1, &params[1]);
        let dl: Vec<f64> = logits
            .iter()
            .zip(&train_y)
            .map(|(&z, &y)| logistic_loss(z, y).1 / n as f64)
            .collect();
        let (dh, g1) = dense_backward_rows(&h, &dl, n, cfg.hidden, 1, &params[1], true, true);
        let mut dh = dh.expect("input gradient requested");
        for (g, &a) in dh.iter_mut().zip(&h) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        let (_, g0) =
            dense_backward_rows(&train_x, &dh, n, dim, cfg.hidden, &params[0], false, true);
        for ((p, g), st) in params.iter_mut().zip([g0, g1]).zip(&mut adam) {
            adam_step(p, &g, st, Direction::Minimize)?;
        }
    }

    let h = hidden(&params, &test_x, test_y.len());
    let logits = dense_forward_rows(&h, test_y.len(), cfg.hidden, 1, &params[1]);
    let errors = logits
        .iter()
        .zip(&test_y)
        .filter(|(&z, &y)| (z > 0.0) != y)
        .count();
    let epsilon = errors as f64 / test_y.len() as f64;
    Ok(DivergenceReport {
        epsilon,
        d_hat: (1.0 - 2.0 * epsilon).clamp(0.0, 1.0),
        n_train: train_y.len(),
        n_test: test_y.len(),
    })
}

/// Features of every sample of `dataset` under `extractor`, in dataset order.
pub fn dataset_features(
    extractor: &FeatureExtractor,
    dataset: &DomainDataset,
) -> Result<Vec<Vec<f64>>> {
    dataset
        .samples()
        .par_iter()
        .map(|s| extractor.extract_features(s))
        .collect()
}

pub const FEATURE_HEADER_PREFIX: &str = "domain,label";

/// CSV with one row per sample: domain label, class label, then the
/// feature values. Source rows (through `extractor_source`) precede target
/// rows (through `extractor_target`).
pub fn features_csv(
    extractor_source: &FeatureExtractor,
    extractor_target: &FeatureExtractor,
    source: &DomainDataset,
    target: &DomainDataset,
) -> Result<String> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(
            "feature export needs non-empty source and target".into(),
        ));
    }
    let fs = dataset_features(extractor_source, source)?;
    let ft = dataset_features(extractor_target, target)?;
    let dim = fs[0].len();
    let mut out = String::from(FEATURE_HEADER_PREFIX);
    for i in 1..=dim {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    for (dataset, feats) in [(source, &fs), (target, &ft)] {
        for (s, f) in dataset.samples().iter().zip(feats) {
            let _ = write!(out, "{},{}", s.domain_label().as_u8(), s.class_label());
            for v in f {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn export_features(
    extractor_source: &FeatureExtractor,
    extractor_target: &FeatureExtractor,
    source: &DomainDataset,
    target: &DomainDataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let csv = features_csv(extractor_source, extractor_target, source, target)?;
    std::fs::write(path, csv)?;
    Ok(())
}

/// One row of an untie-depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub untie: usize,
    pub target_acc: f64,
    pub source_acc: f64,
}

/// Adapts once per untie count l = 1..=7 from the same pretrained model and
/// seed, scoring the target extractor on `target` and the (frozen) source
/// extractor on `source`.
pub fn sweep_untie_depth(
    source_model: &FeatureExtractor,
    source: &DomainDataset,
    target: &DomainDataset,
    cfg: &FinetuneConfig,
) -> Result<Vec<SweepRow>> {
    (1..=NUM_GROUPS)
        .map(|l| {
            let cfg = FinetuneConfig {
                untie: l,
                ..cfg.clone()
            };
            let (pair, _, _) = adversarial_finetune(source_model, source, target, &cfg)?;
            Ok(SweepRow {
                untie: l,
                target_acc: evaluate_classifier(pair.target(), target)?.accuracy,
                source_acc: evaluate_classifier(pair.source(), source)?.accuracy,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("l,target_acc,source_acc\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.untie, r.target_acc, r.source_acc);
    }
    out
}
