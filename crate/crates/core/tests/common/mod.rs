#![allow(dead_code)]

use adda_core::data::{synth_domain, DomainDataset, SynthConfig};
use adda_core::model::{
    discriminator_groups, group_layers, Discriminator, FeatureExtractor, NUM_GROUPS,
};
use adda_core::nn::{layer_forward, FeatureMap, LayerParams, LayerSpec};
use adda_core::signal::DomainLabel;

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOL: f64 = 1e-4;
/// Below this both derivatives are indistinguishable from round-off in
/// the difference quotient.
pub const FD_FLOOR: f64 = 1e-9;

/// Central difference of `f` in coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + FD_STEP;
    let up = f(x);
    x[i] = orig - FD_STEP;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * FD_STEP)
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= FD_FLOOR {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

pub fn assert_grad(what: &str, analytic: f64, numeric: f64) {
    let e = rel_err(analytic, numeric);
    assert!(
        e <= FD_TOL,
        "{what}: analytic {analytic:e} numeric {numeric:e} rel err {e:e}"
    );
}

/// Identifies the linear piece of a ReLU/max-pool stack: every ReLU mask
/// bit and every pooling argmax. Finite differences are only meaningful
/// while this stays constant.
pub fn region(layers: &[&[LayerSpec]], params: &[LayerParams], input: &FeatureMap) -> Vec<usize> {
    let empty = LayerParams::default();
    let mut sig = Vec::new();
    let mut x = input.clone();
    for (group, p) in layers.iter().zip(params) {
        for spec in group.iter() {
            if matches!(spec, LayerSpec::ReLU) {
                sig.extend(x.data().iter().map(|&v| usize::from(v > 0.0)));
            }
            let pp = if spec.has_params() { p } else { &empty };
            let (y, cache) = layer_forward(spec, pp, &x).unwrap();
            if let Some(a) = cache.argmax() {
                sig.extend_from_slice(a);
            }
            x = y;
        }
    }
    sig
}

pub fn extractor_layers() -> Vec<&'static [LayerSpec]> {
    (0..NUM_GROUPS).map(group_layers).collect()
}

/// Region signature of the composed extractor and discriminator.
pub fn composed_region(
    ext: &[LayerParams],
    disc: &[LayerParams],
    input: &FeatureMap,
) -> Vec<usize> {
    let mut sig = region(&extractor_layers(), ext, input);
    let e = FeatureExtractor::from_params(ext.to_vec()).unwrap();
    let feat = e.forward(input).unwrap();
    let dg = discriminator_groups(feat.len());
    let dl: Vec<&[LayerSpec]> = dg.iter().map(|g| g.as_slice()).collect();
    sig.extend(region(&dl, disc, &FeatureMap::vector(feat).unwrap()));
    sig
}

pub fn disc_from(params: &[LayerParams]) -> Discriminator {
    Discriminator::from_params(
        params[0].weights.len() / params[0].biases.len(),
        params.to_vec(),
    )
    .unwrap()
}

/// Source and target domains of the end-to-end fixture.
pub fn fixture_domains() -> (DomainDataset, DomainDataset) {
    let source = synth_domain(&SynthConfig::fixture(0, 1.0, 0.05, 1), DomainLabel::Source).unwrap();
    let target =
        synth_domain(&SynthConfig::fixture(12, 1.5, 0.05, 2), DomainLabel::Target).unwrap();
    (source, target)
}
