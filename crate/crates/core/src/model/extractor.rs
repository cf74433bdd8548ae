use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{shape_err, Error, Result};
use crate::nn::{
    argmax, backward_impl, layer_forward, softmax, FeatureMap, LayerCache, LayerParams, LayerSpec,
};
use crate::rng;
use crate::signal::{SpectrumSample, SPECTRUM_LEN};

/// Parameter groups in an extractor: five conv blocks and two dense layers.
pub const NUM_GROUPS: usize = 7;
/// Width of the label layer (number of fault classes).
pub const NUM_CLASSES: usize = 10;
pub const INPUT_LEN: usize = SPECTRUM_LEN;

const fn conv(kernel: usize, in_channels: usize, out_channels: usize) -> LayerSpec {
    LayerSpec::Conv1D {
        kernel,
        stride: 2,
        in_channels,
        out_channels,
    }
}

const fn pool(channels: usize) -> LayerSpec {
    LayerSpec::MaxPool1D {
        kernel: 2,
        stride: 2,
        channels,
    }
}

/// Layer list of each parameter group. The parameterized layer comes first;
/// ReLU and pooling ride along with it.
pub fn group_layers(group: usize) -> &'static [LayerSpec] {
    const GROUPS: [&[LayerSpec]; NUM_GROUPS] = [
        &[conv(32, 1, 8), LayerSpec::ReLU, pool(8)],
        &[conv(16, 8, 16), LayerSpec::ReLU, pool(16)],
        &[conv(8, 16, 32), LayerSpec::ReLU, pool(32)],
        &[conv(8, 32, 32), LayerSpec::ReLU, pool(32)],
        &[conv(3, 32, 64), LayerSpec::ReLU, pool(64)],
        &[
            LayerSpec::Dense {
                in_dim: 64,
                out_dim: 500,
            },
            LayerSpec::ReLU,
        ],
        &[LayerSpec::Dense {
            in_dim: 500,
            out_dim: NUM_CLASSES,
        }],
    ];
    GROUPS[group]
}

pub fn group_param_spec(group: usize) -> &'static LayerSpec {
    &group_layers(group)[0]
}

pub(crate) type SharedParams = Arc<RwLock<LayerParams>>;

/// Forward record of one group: caches for each of its layers.
#[derive(Debug, Clone)]
pub struct GroupTrace {
    caches: Vec<LayerCache>,
}

/// Runs the layers of one group, returning the caches when `record` is set.
pub(crate) fn run_group(
    layers: &[LayerSpec],
    params: &LayerParams,
    input: FeatureMap,
    record: bool,
) -> Result<(FeatureMap, Option<GroupTrace>)> {
    let empty = LayerParams::default();
    let mut x = input;
    let mut caches = Vec::with_capacity(if record { layers.len() } else { 0 });
    for spec in layers {
        let p = if spec.has_params() { params } else { &empty };
        let (y, cache) = layer_forward(spec, p, &x)?;
        if record {
            caches.push(cache);
        }
        x = y;
    }
    Ok((x, record.then_some(GroupTrace { caches })))
}

pub(crate) fn backprop_group(
    layers: &[LayerSpec],
    params: &LayerParams,
    trace: &GroupTrace,
    upstream: FeatureMap,
    need_input_grad: bool,
) -> Result<(Option<FeatureMap>, LayerParams)> {
    if trace.caches.len() != layers.len() {
        return Err(Error::InvalidInput(
            "group trace does not match layers".into(),
        ));
    }
    let empty = LayerParams::default();
    let mut g = upstream;
    let mut grads = LayerParams::default();
    for (i, (spec, cache)) in layers.iter().zip(&trace.caches).enumerate().rev() {
        let is_param = spec.has_params();
        let p = if is_param { params } else { &empty };
        let want_dx = i > 0 || need_input_grad;
        let (dx, dp) = backward_impl(spec, p, cache, &g, want_dx)?;
        if is_param {
            grads = dp;
        }
        match dx {
            Some(dx) => g = dx,
            None => return Ok((None, grads)),
        }
    }
    Ok((Some(g), grads))
}

/// Record of a forward pass through groups `first_group..7`.
#[derive(Debug, Clone)]
pub struct ExtractorTrace {
    first_group: usize,
    groups: Vec<GroupTrace>,
    output: Vec<f64>,
}

impl ExtractorTrace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn first_group(&self) -> usize {
        self.first_group
    }
}

/// Gradients for groups `first_group..7` of an extractor.
#[derive(Debug, Clone)]
pub struct ExtractorGrads {
    pub first_group: usize,
    pub groups: Vec<LayerParams>,
    pub input: Option<FeatureMap>,
}

/// The seven-group 1-D CNN mapping a 2048-point spectrum to 10 logits.
///
/// Each group's parameters sit behind their own shared handle so that two
/// extractors can hold the very same storage for a tied group. `Clone`
/// makes an independent deep copy; use [`FeatureExtractor::share`] to alias.
#[derive(Debug)]
pub struct FeatureExtractor {
    groups: Vec<SharedParams>,
}

impl Clone for FeatureExtractor {
    fn clone(&self) -> Self {
        Self {
            groups: (0..NUM_GROUPS)
                .map(|g| Arc::new(RwLock::new(self.params(g).clone())))
                .collect(),
        }
    }
}

impl FeatureExtractor {
    /// Fresh extractor with He-initialized weights from the `init` stream of `seed`.
    pub fn build(seed: u64) -> Self {
        let mut r = rng::stream(seed, rng::INIT);
        let groups = (0..NUM_GROUPS)
            .map(|g| {
                Arc::new(RwLock::new(LayerParams::he_init(
                    group_param_spec(g),
                    &mut r,
                )))
            })
            .collect();
        Self { groups }
    }

    pub fn from_params(params: Vec<LayerParams>) -> Result<Self> {
        if params.len() != NUM_GROUPS {
            return Err(shape_err("extractor groups", NUM_GROUPS, params.len()));
        }
        for (g, p) in params.iter().enumerate() {
            p.check_for(group_param_spec(g))?;
        }
        Ok(Self {
            groups: params
                .into_iter()
                .map(|p| Arc::new(RwLock::new(p)))
                .collect(),
        })
    }

    /// A second handle onto the same parameter storage.
    pub fn share(&self) -> Self {
        Self {
            groups: self.groups.clone(),
        }
    }

    pub(crate) fn from_shared(groups: Vec<SharedParams>) -> Self {
        debug_assert_eq!(groups.len(), NUM_GROUPS);
        Self { groups }
    }

    pub(crate) fn shared(&self, group: usize) -> &SharedParams {
        &self.groups[group]
    }

    /// Whether `group` is backed by the same storage in both extractors.
    pub fn shares_group(&self, other: &FeatureExtractor, group: usize) -> bool {
        Arc::ptr_eq(&self.groups[group], &other.groups[group])
    }

    pub fn params(&self, group: usize) -> RwLockReadGuard<'_, LayerParams> {
        self.groups[group].read().expect("parameter lock poisoned")
    }

    pub fn params_mut(&self, group: usize) -> RwLockWriteGuard<'_, LayerParams> {
        self.groups[group].write().expect("parameter lock poisoned")
    }

    pub fn snapshot(&self) -> Vec<LayerParams> {
        (0..NUM_GROUPS).map(|g| self.params(g).clone()).collect()
    }

    pub fn param_count(&self) -> usize {
        (0..NUM_GROUPS).map(|g| self.params(g).len()).sum()
    }

    pub fn input_map(sample: &SpectrumSample) -> Result<FeatureMap> {
        Self::input_from_slice(sample.amplitudes())
    }

    pub fn input_from_slice(amplitudes: &[f64]) -> Result<FeatureMap> {
        if amplitudes.len() != INPUT_LEN {
            return Err(shape_err("extractor input", INPUT_LEN, amplitudes.len()));
        }
        FeatureMap::signal(amplitudes.to_vec())
    }

    /// Activations after each group, for inspection and tests.
    pub fn activations(&self, input: &FeatureMap) -> Result<Vec<FeatureMap>> {
        let mut x = input.clone();
        let mut out = Vec::with_capacity(NUM_GROUPS);
        for g in 0..NUM_GROUPS {
            x = run_group(group_layers(g), &self.params(g), x, false)?.0;
            out.push(x.clone());
        }
        Ok(out)
    }

    /// Output of groups `0..end` (the tied prefix when `end = 7 - l`).
    pub fn forward_prefix(&self, input: &FeatureMap, end: usize) -> Result<FeatureMap> {
        let mut x = input.clone();
        for g in 0..end {
            x = run_group(group_layers(g), &self.params(g), x, false)?.0;
        }
        Ok(x)
    }

    /// Runs groups `first_group..7` on the activation entering `first_group`.
    pub fn forward_from(&self, activation: &FeatureMap, first_group: usize) -> Result<Vec<f64>> {
        let mut x = activation.clone();
        for g in first_group..NUM_GROUPS {
            x = run_group(group_layers(g), &self.params(g), x, false)?.0;
        }
        Ok(x.into_data())
    }

    pub fn trace_from(
        &self,
        activation: &FeatureMap,
        first_group: usize,
    ) -> Result<ExtractorTrace> {
        let mut x = activation.clone();
        let mut groups = Vec::with_capacity(NUM_GROUPS - first_group);
        for g in first_group..NUM_GROUPS {
            let (y, t) = run_group(group_layers(g), &self.params(g), x, true)?;
            groups.push(t.expect("recorded"));
            x = y;
        }
        Ok(ExtractorTrace {
            first_group,
            groups,
            output: x.into_data(),
        })
    }

    pub fn trace(&self, input: &FeatureMap) -> Result<ExtractorTrace> {
        self.trace_from(input, 0)
    }

    /// Backpropagates `upstream` (d loss / d logits) through the traced groups.
    pub fn backward(
        &self,
        trace: &ExtractorTrace,
        upstream: &[f64],
        want_input_grad: bool,
    ) -> Result<ExtractorGrads> {
        if upstream.len() != trace.output.len() {
            return Err(shape_err(
                "logit gradient",
                trace.output.len(),
                upstream.len(),
            ));
        }
        let first = trace.first_group;
        let mut g = Some(FeatureMap::vector(upstream.to_vec())?);
        let mut grads = vec![LayerParams::default(); NUM_GROUPS - first];
        for group in (first..NUM_GROUPS).rev() {
            let need_dx = group > first || want_input_grad;
            let (dx, dp) = backprop_group(
                group_layers(group),
                &self.params(group),
                &trace.groups[group - first],
                g.take().expect("gradient present"),
                need_dx,
            )?;
            grads[group - first] = dp;
            g = dx;
        }
        Ok(ExtractorGrads {
            first_group: first,
            groups: grads,
            input: g,
        })
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<Vec<f64>> {
        self.forward_from(input, 0)
    }

    pub fn extract_features(&self, sample: &SpectrumSample) -> Result<Vec<f64>> {
        self.forward(&Self::input_map(sample)?)
    }

    /// 1-based class with the highest posterior, and the posterior itself.
    pub fn predict_label(&self, sample: &SpectrumSample) -> Result<(usize, Vec<f64>)> {
        let posterior = softmax(&self.extract_features(sample)?);
        Ok((argmax(&posterior) + 1, posterior))
    }
}

/// Closed-form parameter count of the extractor from its layer specs.
pub fn extractor_param_count() -> usize {
    (0..NUM_GROUPS)
        .map(|g| {
            let (w, b) = group_param_spec(g).param_lens();
            w + b
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::DomainLabel;

    fn ramp_sample() -> SpectrumSample {
        let a = (0..INPUT_LEN)
            .map(|i| ((i * 37) % 101) as f64 / 100.0)
            .collect();
        SpectrumSample::new(a, 1, DomainLabel::Source).unwrap()
    }

    #[test]
    fn shape_chain_matches_table() {
        let mut shape = (INPUT_LEN, 1);
        let mut seen = Vec::new();
        for g in 0..NUM_GROUPS {
            for spec in group_layers(g) {
                shape = spec.output_shape(shape).unwrap();
                if spec.kind() != crate::nn::LayerKind::ReLU {
                    seen.push(shape);
                }
            }
        }
        let want = [
            (1009, 8),
            (504, 8),
            (245, 16),
            (122, 16),
            (58, 32),
            (29, 32),
            (11, 32),
            (5, 32),
            (2, 64),
            (1, 64),
            (1, 500),
            (1, 10),
        ];
        assert_eq!(seen, want);
    }

    #[test]
    fn outputs_ten_logits() {
        let e = FeatureExtractor::build(1);
        assert_eq!(
            e.extract_features(&ramp_sample()).unwrap().len(),
            NUM_CLASSES
        );
    }

    #[test]
    fn param_count_is_closed_form() {
        // conv: k*cin*cout + cout; dense: in*out + out
        let want = (32 * 8 + 8)
            + (16 * 8 * 16 + 16)
            + (8 * 16 * 32 + 32)
            + (8 * 32 * 32 + 32)
            + (3 * 32 * 64 + 64)
            + (64 * 500 + 500)
            + (500 * 10 + 10);
        assert_eq!(extractor_param_count(), want);
        assert_eq!(FeatureExtractor::build(4).param_count(), want);
    }

    #[test]
    fn equal_seeds_equal_params() {
        assert_eq!(
            FeatureExtractor::build(9).snapshot(),
            FeatureExtractor::build(9).snapshot()
        );
        assert_ne!(
            FeatureExtractor::build(9).snapshot(),
            FeatureExtractor::build(10).snapshot()
        );
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_logits() {
        let e = FeatureExtractor::build(2);
        let s = SpectrumSample::new(vec![0.0; INPUT_LEN], 1, DomainLabel::Source).unwrap();
        assert!(e.extract_features(&s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_logits_predict_first_class() {
        let e = FeatureExtractor::build(2);
        let s = SpectrumSample::new(vec![0.0; INPUT_LEN], 1, DomainLabel::Source).unwrap();
        let (class, posterior) = e.predict_label(&s).unwrap();
        assert_eq!(class, 1);
        assert!((posterior.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clone_is_deep_and_share_aliases() {
        let e = FeatureExtractor::build(3);
        let copy = e.clone();
        let alias = e.share();
        e.params_mut(6).biases[0] = 5.0;
        assert_eq!(alias.params(6).biases[0], 5.0);
        assert_eq!(copy.params(6).biases[0], 0.0);
        assert!(e.shares_group(&alias, 0));
        assert!(!e.shares_group(&copy, 0));
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        assert!(FeatureExtractor::input_from_slice(&[0.0; 100]).is_err());
    }

    #[test]
    fn suffix_trace_matches_full_forward() {
        let e = FeatureExtractor::build(5);
        let x = FeatureExtractor::input_map(&ramp_sample()).unwrap();
        let full = e.forward(&x).unwrap();
        for split in 0..NUM_GROUPS {
            let mid = e.forward_prefix(&x, split).unwrap();
            assert_eq!(e.trace_from(&mid, split).unwrap().output(), &full[..]);
        }
    }
}
