use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{write_signal_file, Manifest, ManifestEntry, MANIFEST_VERSION};
use super::DomainDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{make_spectrum_with, DomainLabel, Normalization, SPECTRUM_LEN, WINDOW_LEN};

/// Characteristic spectral lines of one fault class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClass {
    pub bins: Vec<usize>,
    pub amplitudes: Vec<f64>,
}

/// Generator for a synthetic working condition. A change of working
/// condition moves every class line by `domain_shift` bins and scales the
/// signal by `amplitude_scale`; noise level stays fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub classes: Vec<SynthClass>,
    #[serde(default)]
    pub domain_shift: i64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub samples_per_class: usize,
    pub seed: u64,
    /// Relative per-sample amplitude spread of each line, uniform in ±jitter.
    #[serde(default)]
    pub amplitude_jitter: f64,
    /// Per-sample offset in bins, uniform in ±jitter, shared by all lines of
    /// a sample (speed fluctuation within one working condition).
    #[serde(default)]
    pub frequency_jitter: f64,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
}

fn one() -> f64 {
    1.0
}
fn default_name() -> String {
    "synthetic".into()
}
fn default_rate() -> f64 {
    12_000.0
}

impl SynthConfig {
    /// Lines actually synthesized for class index `c` (0-based) after the shift.
    pub fn shifted_bins(&self, c: usize) -> Result<Vec<usize>> {
        self.classes[c]
            .bins
            .iter()
            .map(|&b| {
                let s = b as i64 + self.domain_shift;
                if (1..SPECTRUM_LEN as i64).contains(&s) {
                    Ok(s as usize)
                } else {
                    Err(Error::InvalidConfig(format!(
                        "class {} line at bin {b} shifted by {} leaves 1..{SPECTRUM_LEN}",
                        c + 1,
                        self.domain_shift
                    )))
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_classes == 0 || self.classes.len() != self.num_classes {
            return bad(format!(
                "num_classes {} but {} class descriptions",
                self.num_classes,
                self.classes.len()
            ));
        }
        if !(self.amplitude_scale > 0.0 && self.amplitude_scale.is_finite()) {
            return bad(format!(
                "amplitude_scale must be positive, got {}",
                self.amplitude_scale
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return bad(format!(
                "amplitude_jitter must be in [0,1), got {}",
                self.amplitude_jitter
            ));
        }
        if !(self.frequency_jitter >= 0.0 && self.frequency_jitter.is_finite()) {
            return bad(format!(
                "frequency_jitter must be non-negative, got {}",
                self.frequency_jitter
            ));
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.bins.is_empty() || class.bins.len() != class.amplitudes.len() {
                return bad(format!(
                    "class {} needs matching, non-empty bins and amplitudes",
                    c + 1
                ));
            }
            if class.amplitudes.iter().any(|a| !(*a > 0.0)) {
                return bad(format!("class {} amplitudes must be positive", c + 1));
            }
            for b in self.shifted_bins(c)? {
                let (lo, hi) = (
                    b as f64 - self.frequency_jitter,
                    b as f64 + self.frequency_jitter,
                );
                if lo <= 0.0 || hi >= SPECTRUM_LEN as f64 {
                    return bad(format!(
                        "class {} line at bin {b} jittered by {} leaves (0, {SPECTRUM_LEN})",
                        c + 1,
                        self.frequency_jitter
                    ));
                }
            }
        }
        Ok(())
    }

    /// The frozen ten-class fixture used by the end-to-end checks. Class `c`
    /// is one fault line near bin `100 + 30 (c - 1)` whose position wanders
    /// by up to 10 bins from sample to sample, so a 12-bin shift pushes part
    /// of every class across the boundary to its neighbour.
    pub fn fixture(domain_shift: i64, amplitude_scale: f64, noise_sigma: f64, seed: u64) -> Self {
        let classes = (0..10)
            .map(|c| SynthClass {
                bins: vec![100 + 30 * c],
                amplitudes: vec![1.0],
            })
            .collect();
        Self {
            num_classes: 10,
            classes,
            domain_shift,
            amplitude_scale,
            noise_sigma,
            samples_per_class: 200,
            seed,
            amplitude_jitter: 0.1,
            frequency_jitter: 10.0,
            normalization: Normalization::Max,
            name: format!("fixture-shift{domain_shift}"),
            sample_rate: default_rate(),
        }
    }

    fn line_gains<R: rand::Rng>(&self, c: usize, r: &mut R) -> Vec<(f64, f64, f64)> {
        let bins = self.shifted_bins(c).expect("validated");
        let offset = if self.frequency_jitter > 0.0 {
            r.random_range(-self.frequency_jitter..self.frequency_jitter)
        } else {
            0.0
        };
        bins.iter()
            .zip(&self.classes[c].amplitudes)
            .map(|(&b, &a)| {
                let jitter = if self.amplitude_jitter > 0.0 {
                    1.0 + r.random_range(-self.amplitude_jitter..self.amplitude_jitter)
                } else {
                    1.0
                };
                let phase = r.random_range(0.0..2.0 * PI);
                (b as f64 + offset, self.amplitude_scale * a * jitter, phase)
            })
            .collect()
    }

    fn render<R: rand::Rng>(&self, lines: &[(f64, f64, f64)], len: usize, r: &mut R) -> Vec<f64> {
        let n = WINDOW_LEN as f64;
        (0..len)
            .map(|t| {
                let tone: f64 = lines
                    .iter()
                    .map(|&(bin, amp, phase)| amp * (2.0 * PI * bin * t as f64 / n + phase).cos())
                    .sum();
                let noise: f64 = if self.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(r);
                    self.noise_sigma * z
                } else {
                    0.0
                };
                tone + noise
            })
            .collect()
    }
}

/// Synthesizes `samples_per_class` spectra per class. Class `c` draws from
/// its own sub-stream of `seed`, so the shift, scale and domain label never
/// change which random numbers a sample receives.
pub fn synth_domain(config: &SynthConfig, domain_label: DomainLabel) -> Result<DomainDataset> {
    config.validate()?;
    let mut samples = Vec::with_capacity(config.num_classes * config.samples_per_class);
    for c in 0..config.num_classes {
        let mut r = rng::indexed(config.seed, rng::SYNTH, c as u64);
        for _ in 0..config.samples_per_class {
            let lines = config.line_gains(c, &mut r);
            let window = config.render(&lines, WINDOW_LEN, &mut r);
            samples.push(make_spectrum_with(
                &window,
                c + 1,
                domain_label,
                config.normalization,
            )?);
        }
    }
    DomainDataset::new(config.name.clone(), config.num_classes, samples)
}

/// Writes one continuous recording of `recording_len` samples per class
/// (raw f32) plus a manifest that windows `samples_per_class` spectra from
/// each. Returns the manifest path.
pub fn synth_recordings(
    config: &SynthConfig,
    domain_label: DomainLabel,
    recording_len: usize,
    out_dir: &Path,
) -> Result<PathBuf> {
    config.validate()?;
    if recording_len < WINDOW_LEN {
        return Err(Error::InvalidConfig(format!(
            "recordings need at least {WINDOW_LEN} samples"
        )));
    }
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(config.num_classes);
    for c in 0..config.num_classes {
        let mut r = rng::indexed(config.seed, rng::SYNTH, c as u64);
        let lines = config.line_gains(c, &mut r);
        let signal = config.render(&lines, recording_len, &mut r);
        let name = format!("class{:02}.f32", c + 1);
        write_signal_file(&out_dir.join(&name), &signal)?;
        entries.push(ManifestEntry {
            class_label: c + 1,
            path: name.into(),
            windows: config.samples_per_class,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        domain: config.name.clone(),
        domain_label,
        sample_rate: config.sample_rate,
        seed: rng::child_seed(config.seed, rng::WINDOWING, 0),
        normalization: config.normalization,
        entries,
    };
    let path = out_dir.join("manifest.json");
    fs::write(&path, manifest.to_json_pretty()?)?;
    Ok(path)
}
