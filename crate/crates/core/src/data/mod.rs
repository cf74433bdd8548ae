//! Datasets: disk ingestion, a synthetic two-domain generator and seeded
//! minibatch sampling.

mod manifest;
mod sampler;
mod synth;

pub use manifest::{
    load_domain, read_signal_file, write_signal_file, Manifest, ManifestEntry, MANIFEST_VERSION,
};
pub use sampler::{sample_minibatch, MinibatchSampler};
pub use synth::{synth_domain, synth_recordings, SynthClass, SynthConfig};

use crate::error::{Error, Result};
use crate::signal::{DomainLabel, SpectrumSample, SPECTRUM_LEN};

/// Spectrum samples of one working condition. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    samples: Vec<SpectrumSample>,
    num_classes: usize,
    name: String,
}

impl DomainDataset {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        samples: Vec<SpectrumSample>,
    ) -> Result<Self> {
        let name = name.into();
        if num_classes == 0 {
            return Err(Error::InvalidInput(
                "dataset needs at least one class".into(),
            ));
        }
        if let Some(first) = samples.first() {
            let domain = first.domain_label();
            for (i, s) in samples.iter().enumerate() {
                if s.class_label() > num_classes {
                    return Err(Error::InvalidInput(format!(
                        "sample {i} of {name} has class {} > {num_classes}",
                        s.class_label()
                    )));
                }
                if s.domain_label() != domain {
                    return Err(Error::InvalidInput(format!(
                        "sample {i} of {name} has a different domain label"
                    )));
                }
                debug_assert_eq!(s.amplitudes().len(), SPECTRUM_LEN);
            }
        }
        Ok(Self {
            samples,
            num_classes,
            name,
        })
    }

    pub fn samples(&self) -> &[SpectrumSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_label(&self) -> Option<DomainLabel> {
        self.samples.first().map(|s| s.domain_label())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.class_label() - 1] += 1;
        }
        counts
    }

    /// Same samples tagged with another domain label.
    pub fn relabeled(&self, domain: DomainLabel) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .cloned()
                .map(|s| s.with_domain(domain))
                .collect(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    /// Subset by index, in the given order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_classes: self.num_classes,
            name: name.into(),
        }
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptyDataset(self.name.clone()))
        } else {
            Ok(())
        }
    }
}
