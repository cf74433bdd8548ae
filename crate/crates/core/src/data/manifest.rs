use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DomainDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{
    make_spectrum_with, window_signal_with, DomainLabel, Normalization, WINDOW_LEN,
};

pub const MANIFEST_VERSION: u32 = 1;

/// One recording of one class; `windows` spectra are drawn from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub class_label: usize,
    /// Raw little-endian f32 samples; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub domain: String,
    #[serde(default = "source_label")]
    pub domain_label: DomainLabel,
    pub sample_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub normalization: Normalization,
    pub entries: Vec<ManifestEntry>,
}

fn source_label() -> DomainLabel {
    DomainLabel::Source
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::MalformedManifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        manifest.validate(path)?;
        Ok(manifest)
    }

    /// Number of classes, K: labels must cover exactly 1..=K.
    pub fn num_classes(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.class_label)
            .max()
            .unwrap_or(0)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let malformed = |reason: String| Error::MalformedManifest {
            path: path.to_path_buf(),
            reason,
        };
        if self.version != MANIFEST_VERSION {
            return Err(malformed(format!("unsupported version {}", self.version)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(malformed(format!("bad sample_rate {}", self.sample_rate)));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "manifest {} has no entries",
                path.display()
            )));
        }
        let labels: BTreeSet<usize> = self.entries.iter().map(|e| e.class_label).collect();
        let k = self.num_classes();
        if labels.contains(&0) || labels.len() != k {
            return Err(malformed(format!(
                "class labels must be contiguous from 1, got {labels:?}"
            )));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_signal_file(path: &Path, samples: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 4);
    for &s in samples {
        bytes.extend_from_slice(&(s as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_signal_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::InvalidInput(format!(
            "{}: {} bytes is not a whole number of f32 samples",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect())
}

fn load_entry_signal(entry: &ManifestEntry, resolved: &Path) -> Result<Vec<f64>> {
    if !resolved.is_file() {
        return Err(Error::MissingSignalFile {
            class_label: entry.class_label,
            path: resolved.to_path_buf(),
        });
    }
    let samples = read_signal_file(resolved).map_err(|e| Error::BadSignalFile {
        class_label: entry.class_label,
        path: resolved.to_path_buf(),
        reason: e.to_string(),
    })?;
    if samples.len() < WINDOW_LEN {
        return Err(Error::SignalTooShort {
            class_label: entry.class_label,
            path: resolved.to_path_buf(),
            len: samples.len(),
            min: WINDOW_LEN,
        });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::BadSignalFile {
            class_label: entry.class_label,
            path: resolved.to_path_buf(),
            reason: format!("non-finite sample at index {i}"),
        });
    }
    Ok(samples)
}

/// Windows every recording named by the manifest and converts each window
/// to a spectrum. Entry `i` draws its offsets from sub-stream `i` of the
/// manifest seed, so the result depends only on the manifest and file bytes.
pub fn load_domain(manifest_path: impl AsRef<Path>) -> Result<DomainDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::from_path(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut samples = Vec::with_capacity(manifest.entries.iter().map(|e| e.windows).sum());
    for (i, entry) in manifest.entries.iter().enumerate() {
        let resolved = base.join(&entry.path);
        let signal = load_entry_signal(entry, &resolved)?;
        let mut r = rng::indexed(manifest.seed, rng::WINDOWING, i as u64);
        for window in window_signal_with(&signal, entry.windows, &mut r)? {
            samples.push(make_spectrum_with(
                &window,
                entry.class_label,
                manifest.domain_label,
                manifest.normalization,
            )?);
        }
    }
    DomainDataset::new(manifest.domain.clone(), manifest.num_classes(), samples)
}
