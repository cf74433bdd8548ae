use crate::error::{shape_err, Result};
use crate::nn::{
    dense_backward_rows, dense_forward_rows, sigmoid, FeatureMap, LayerParams, LayerSpec,
};
use crate::rng;

use super::extractor::{backprop_group, run_group, GroupTrace, NUM_CLASSES};

pub const HIDDEN: usize = 500;

/// Layer groups of the domain discriminator: 10 -> 500 -> 500 -> 1.
pub fn discriminator_groups(input_dim: usize) -> [Vec<LayerSpec>; 3] {
    [
        vec![
            LayerSpec::Dense {
                in_dim: input_dim,
                out_dim: HIDDEN,
            },
            LayerSpec::ReLU,
        ],
        vec![
            LayerSpec::Dense {
                in_dim: HIDDEN,
                out_dim: HIDDEN,
            },
            LayerSpec::ReLU,
        ],
        vec![LayerSpec::Dense {
            in_dim: HIDDEN,
            out_dim: 1,
        }],
    ]
}

/// MLP emitting one raw logit; `sigmoid(logit)` is the probability that a
/// feature vector came from the source domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    input_dim: usize,
    params: Vec<LayerParams>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    groups: Vec<GroupTrace>,
}

/// Activations of a batched forward pass: the input rows of each dense
/// layer (post-ReLU for the hidden ones).
#[derive(Debug, Clone)]
pub struct DiscriminatorBatchCache {
    batch: usize,
    inputs: [Vec<f64>; 3],
}

impl Discriminator {
    pub fn build(seed: u64) -> Self {
        Self::with_input_dim(NUM_CLASSES, seed)
    }

    pub fn with_input_dim(input_dim: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "discriminator-init");
        let params = discriminator_groups(input_dim)
            .iter()
            .map(|g| LayerParams::he_init(&g[0], &mut r))
            .collect();
        Self { input_dim, params }
    }

    pub fn from_params(input_dim: usize, params: Vec<LayerParams>) -> Result<Self> {
        let groups = discriminator_groups(input_dim);
        if params.len() != groups.len() {
            return Err(shape_err(
                "discriminator layers",
                groups.len(),
                params.len(),
            ));
        }
        for (g, p) in groups.iter().zip(&params) {
            p.check_for(&g[0])?;
        }
        Ok(Self { input_dim, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn forward(&self, feature: &[f64]) -> Result<(f64, DiscriminatorCache)> {
        if feature.len() != self.input_dim {
            return Err(shape_err(
                "discriminator input",
                self.input_dim,
                feature.len(),
            ));
        }
        let mut x = FeatureMap::vector(feature.to_vec())?;
        let mut groups = Vec::with_capacity(3);
        for (layers, p) in discriminator_groups(self.input_dim)
            .iter()
            .zip(&self.params)
        {
            let (y, t) = run_group(layers, p, x, true)?;
            groups.push(t.expect("recorded"));
            x = y;
        }
        Ok((x.data()[0], DiscriminatorCache { groups }))
    }

    pub fn logit(&self, feature: &[f64]) -> Result<f64> {
        Ok(self.forward(feature)?.0)
    }

    pub fn probability(&self, feature: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(feature)?))
    }

    /// Logits for `batch` feature vectors stored row-major in `rows`.
    pub fn forward_batch(
        &self,
        rows: &[f64],
        batch: usize,
    ) -> Result<(Vec<f64>, DiscriminatorBatchCache)> {
        if rows.len() != batch * self.input_dim {
            return Err(shape_err(
                "discriminator batch",
                batch * self.input_dim,
                rows.len(),
            ));
        }
        let x0 = rows.to_vec();
        let mut h1 = dense_forward_rows(&x0, batch, self.input_dim, HIDDEN, &self.params[0]);
        h1.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut h2 = dense_forward_rows(&h1, batch, HIDDEN, HIDDEN, &self.params[1]);
        h2.iter_mut().for_each(|v| *v = v.max(0.0));
        let logits = dense_forward_rows(&h2, batch, HIDDEN, 1, &self.params[2]);
        Ok((
            logits,
            DiscriminatorBatchCache {
                batch,
                inputs: [x0, h1, h2],
            },
        ))
    }

    /// Batched counterpart of [`Discriminator::backward`]; parameter
    /// gradients are summed over the batch.
    pub fn backward_batch(
        &self,
        cache: &DiscriminatorBatchCache,
        dlogits: &[f64],
        want_param_grads: bool,
    ) -> Result<(Vec<f64>, Option<Vec<LayerParams>>)> {
        let b = cache.batch;
        if dlogits.len() != b {
            return Err(shape_err("discriminator batch gradient", b, dlogits.len()));
        }
        let [x0, h1, h2] = &cache.inputs;
        let (g2, p2) = dense_backward_rows(
            h2,
            dlogits,
            b,
            HIDDEN,
            1,
            &self.params[2],
            true,
            want_param_grads,
        );
        let mut g2 = g2.expect("input gradient requested");
        relu_mask(&mut g2, h2);
        let (g1, p1) = dense_backward_rows(
            h1,
            &g2,
            b,
            HIDDEN,
            HIDDEN,
            &self.params[1],
            true,
            want_param_grads,
        );
        let mut g1 = g1.expect("input gradient requested");
        relu_mask(&mut g1, h1);
        let (g0, p0) = dense_backward_rows(
            x0,
            &g1,
            b,
            self.input_dim,
            HIDDEN,
            &self.params[0],
            true,
            want_param_grads,
        );
        Ok((
            g0.expect("input gradient requested"),
            want_param_grads.then(|| vec![p0, p1, p2]),
        ))
    }

    /// Returns (d loss / d feature, per-layer parameter gradients) for a
    /// given d loss / d logit.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache,
        dlogit: f64,
        want_param_grads: bool,
    ) -> Result<(Vec<f64>, Option<Vec<LayerParams>>)> {
        let groups = discriminator_groups(self.input_dim);
        let mut g = FeatureMap::vector(vec![dlogit])?;
        let mut grads = vec![LayerParams::default(); 3];
        for i in (0..3).rev() {
            let (dx, dp) = backprop_group(&groups[i], &self.params[i], &cache.groups[i], g, true)?;
            grads[i] = dp;
            g = dx.expect("input gradient requested");
        }
        Ok((g.into_data(), want_param_grads.then_some(grads)))
    }
}

fn relu_mask(g: &mut [f64], activated: &[f64]) {
    for (g, &a) in g.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}
