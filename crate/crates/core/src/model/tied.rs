use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

use super::extractor::{FeatureExtractor, NUM_GROUPS};

/// Source and target extractors whose first `7 - l` parameter groups are the
/// same storage; the last `l` groups of the target are its own.
#[derive(Debug)]
pub struct TiedPair {
    source: FeatureExtractor,
    target: FeatureExtractor,
    untie_count: usize,
}

impl TiedPair {
    pub fn source(&self) -> &FeatureExtractor {
        &self.source
    }

    pub fn target(&self) -> &FeatureExtractor {
        &self.target
    }

    pub fn untie_count(&self) -> usize {
        self.untie_count
    }

    /// Index of the first untied group.
    pub fn first_untied(&self) -> usize {
        NUM_GROUPS - self.untie_count
    }

    pub fn into_parts(self) -> (FeatureExtractor, FeatureExtractor, usize) {
        (self.source, self.target, self.untie_count)
    }
}

pub fn check_untie_count(l: usize) -> Result<()> {
    if (1..=NUM_GROUPS).contains(&l) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "untie count must be in 1..={NUM_GROUPS}, got {l}"
        )))
    }
}

/// Builds the target extractor from `source`: the leading `7 - l` groups are
/// aliased, the trailing `l` are deep copies.
pub fn init_target_from_source(source: &FeatureExtractor, l: usize) -> Result<TiedPair> {
    check_untie_count(l)?;
    let first_untied = NUM_GROUPS - l;
    let groups = (0..NUM_GROUPS)
        .map(|g| {
            if g < first_untied {
                Arc::clone(source.shared(g))
            } else {
                Arc::new(RwLock::new(source.params(g).clone()))
            }
        })
        .collect();
    Ok(TiedPair {
        source: source.share(),
        target: FeatureExtractor::from_shared(groups),
        untie_count: l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::INPUT_LEN;
    use crate::nn::FeatureMap;

    fn input(seed: u64) -> FeatureMap {
        FeatureMap::signal(
            (0..INPUT_LEN)
                .map(|i| (((i as u64 * 2654435761 + seed) % 1000) as f64) / 1000.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fresh_pair_agrees() {
        let s = FeatureExtractor::build(1);
        for l in 1..=NUM_GROUPS {
            let pair = init_target_from_source(&s, l).unwrap();
            for k in 0..3 {
                let x = input(k);
                assert_eq!(
                    pair.source().forward(&x).unwrap(),
                    pair.target().forward(&x).unwrap()
                );
            }
        }
    }

    #[test]
    fn out_of_range_untie_count() {
        let s = FeatureExtractor::build(1);
        assert!(init_target_from_source(&s, 0).is_err());
        assert!(init_target_from_source(&s, 8).is_err());
    }

    #[test]
    fn fully_untied_target_is_independent() {
        let s = FeatureExtractor::build(1);
        let before = s.snapshot();
        let pair = init_target_from_source(&s, 7).unwrap();
        for g in 0..NUM_GROUPS {
            assert!(!pair.target().shares_group(pair.source(), g));
            pair.target().params_mut(g).weights[0] += 1.0;
        }
        assert_eq!(s.snapshot(), before);
    }

    #[test]
    fn tied_groups_observe_each_other() {
        let s = FeatureExtractor::build(1);
        let pair = init_target_from_source(&s, 3).unwrap();
        for g in 0..4 {
            assert!(pair.target().shares_group(pair.source(), g));
        }
        pair.target().params_mut(0).biases[0] = 0.25;
        assert_eq!(s.params(0).biases[0], 0.25);
    }

    #[test]
    fn perturbing_label_layer_only_moves_logits() {
        let s = FeatureExtractor::build(2);
        let pair = init_target_from_source(&s, 1).unwrap();
        pair.target()
            .params_mut(6)
            .weights
            .iter_mut()
            .for_each(|w| *w += 0.01);
        let x = input(7);
        let a = pair.source().activations(&x).unwrap();
        let b = pair.target().activations(&x).unwrap();
        for g in 0..6 {
            assert_eq!(a[g], b[g], "group {g}");
        }
        assert_ne!(a[6], b[6]);
    }
}
