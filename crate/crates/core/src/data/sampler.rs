use rand::Rng as _;

use super::DomainDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::signal::SpectrumSample;

/// Uniform with-replacement index stream. Not shareable: each consumer owns
/// its own sampler.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    rng: Rng,
}

impl MinibatchSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, rng::SAMPLING),
        }
    }

    pub fn from_rng(rng: Rng) -> Self {
        Self { rng }
    }

    pub fn indices(&mut self, population: usize, m: usize) -> Result<Vec<usize>> {
        if m == 0 {
            return Err(Error::InvalidInput("batch size must be positive".into()));
        }
        if population == 0 {
            return Err(Error::EmptyDataset("cannot sample from nothing".into()));
        }
        Ok((0..m)
            .map(|_| self.rng.random_range(0..population))
            .collect())
    }
}

pub fn sample_minibatch<'a>(
    dataset: &'a DomainDataset,
    m: usize,
    sampler: &mut MinibatchSampler,
) -> Result<Vec<&'a SpectrumSample>> {
    dataset.require_non_empty()?;
    Ok(sampler
        .indices(dataset.len(), m)?
        .into_iter()
        .map(|i| &dataset.samples()[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{DomainLabel, SPECTRUM_LEN};

    fn dataset(per_class: usize, classes: usize) -> DomainDataset {
        let samples = (0..classes * per_class)
            .map(|i| {
                let mut a = vec![0.0; SPECTRUM_LEN];
                a[i] = 1.0;
                SpectrumSample::new(a, i / per_class + 1, DomainLabel::Source).unwrap()
            })
            .collect();
        DomainDataset::new("t", classes, samples).unwrap()
    }

    #[test]
    fn singleton_repeats() {
        let d = dataset(1, 1);
        let batch = sample_minibatch(&d, 5, &mut MinibatchSampler::new(1)).unwrap();
        assert_eq!(batch.len(), 5);
        assert!(batch.iter().all(|s| *s == &d.samples()[0]));
    }

    #[test]
    fn same_state_same_batch_and_stream_advances() {
        let d = dataset(10, 3);
        let mut a = MinibatchSampler::new(4);
        let mut b = MinibatchSampler::new(4);
        let first = a.indices(d.len(), 16).unwrap();
        assert_eq!(first, b.indices(d.len(), 16).unwrap());
        assert_ne!(first, a.indices(d.len(), 16).unwrap());
    }

    #[test]
    fn zero_batch_and_empty_dataset_are_rejected() {
        let d = dataset(2, 2);
        assert!(sample_minibatch(&d, 0, &mut MinibatchSampler::new(1)).is_err());
        let empty = DomainDataset::new("e", 2, vec![]).unwrap();
        assert!(matches!(
            sample_minibatch(&empty, 3, &mut MinibatchSampler::new(1)),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn class_frequencies_are_uniform() {
        let d = dataset(20, 10);
        let mut s = MinibatchSampler::new(2024);
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for chunk in 0..draws / 1000 {
            let _ = chunk;
            for x in sample_minibatch(&d, 1000, &mut s).unwrap() {
                counts[x.class_label() - 1] += 1;
            }
        }
        // Binomial(n, 1/10): sigma = sqrt(n p (1-p)).
        let expect = draws as f64 / 10.0;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }
}
