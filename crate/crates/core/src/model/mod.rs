//! The four components: source extractor, target extractor (partially tied
//! to the source), softmax label classifier and domain discriminator.

mod discriminator;
mod extractor;
mod io;
mod tied;

pub use discriminator::{
    discriminator_groups, Discriminator, DiscriminatorBatchCache, DiscriminatorCache, HIDDEN,
};
pub use extractor::{
    extractor_param_count, group_layers, group_param_spec, ExtractorGrads, ExtractorTrace,
    FeatureExtractor, INPUT_LEN, NUM_CLASSES, NUM_GROUPS,
};
pub use io::{ModelFile, Phase, Provenance, FORMAT_VERSION, MAGIC};
pub use tied::{check_untie_count, init_target_from_source, TiedPair};

use crate::error::Result;
use crate::signal::SpectrumSample;

pub fn build_extractor(seed: u64) -> FeatureExtractor {
    FeatureExtractor::build(seed)
}

pub fn extract_features(extractor: &FeatureExtractor, sample: &SpectrumSample) -> Result<Vec<f64>> {
    extractor.extract_features(sample)
}

pub fn predict_label(
    extractor: &FeatureExtractor,
    sample: &SpectrumSample,
) -> Result<(usize, Vec<f64>)> {
    extractor.predict_label(sample)
}

pub fn discriminator_forward(
    disc: &Discriminator,
    feature: &[f64],
) -> Result<(f64, DiscriminatorCache)> {
    disc.forward(feature)
}
