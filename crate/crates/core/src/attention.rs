//! The trainable part: an MLP from similarity features to per-channel
//! attention, fused predictions, the loss, hand-written gradients and Adam.
//!
//! Nothing here depends on the feature dimension or the number of classes of
//! the graph: the MLP maps `t(t-1)` inputs to `t` logits, and fusion is a
//! convex combination of whatever class rows it is handed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::solver::{softmax_in_place, ChannelPrediction};

/// Probabilities below this are clamped before taking the log.
pub const LOSS_CLAMP: f64 = 1e-12;

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Dense layers with ReLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            s.push(first.weights.rows());
        }
        s.extend(self.layers.iter().map(|l| l.weights.cols()));
        s
    }

    pub fn zeros_like(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    weights: Matrix::zeros(w[0], w[1]),
                    bias: vec![0.0; w[1]],
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) before bias.
    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for s in self.layer_sizes() {
            h.update((s as u64).to_le_bytes());
        }
        for v in self.values() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidSpec("an MLP needs at least input and output sizes".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidSpec(format!("zero-width layer in {layer_sizes:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::zeros_like(layer_sizes);
    for layer in &mut params.layers {
        let (fan_in, fan_out) = layer.weights.shape();
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        for w in layer.weights.as_mut_slice() {
            *w = rng.gen_range(-limit..=limit);
        }
    }
    Ok(params)
}

/// Everything that transfers between graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionModel {
    pub params: MlpParams,
    pub channel_names: Vec<String>,
    /// `true` disables the channel: its attention is always exactly zero.
    pub masked: Vec<bool>,
    pub entropy_target: f64,
    pub version: u32,
}

impl AttentionModel {
    pub fn new(params: MlpParams, channel_names: Vec<String>, masked: Vec<bool>, entropy_target: f64) -> Result<Self> {
        let model = Self {
            params,
            channel_names,
            masked,
            entropy_target,
            version: MODEL_VERSION,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.channel_names.len();
        if t < 2 {
            return Err(Error::InvalidSpec("need at least 2 channels".into()));
        }
        if self.masked.len() != t {
            return Err(Error::ShapeMismatch(format!("{} mask bits for {t} channels", self.masked.len())));
        }
        if self.masked.iter().all(|&m| m) {
            return Err(Error::InvalidSpec("every channel is masked".into()));
        }
        let sizes = self.params.layer_sizes();
        if sizes.first() != Some(&(t * (t - 1))) || sizes.last() != Some(&t) {
            return Err(Error::ShapeMismatch(format!(
                "layer sizes {sizes:?} do not map {} features to {t} channels",
                t * (t - 1)
            )));
        }
        for w in self.params.layers.windows(2) {
            if w[0].weights.cols() != w[1].weights.rows() {
                return Err(Error::ShapeMismatch("layer shapes do not chain".into()));
            }
        }
        if self.params.layers.iter().any(|l| l.bias.len() != l.weights.cols()) {
            return Err(Error::ShapeMismatch("bias length differs from layer width".into()));
        }
        if !self.params.is_finite() {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        if !(self.entropy_target > 0.0) {
            return Err(Error::InvalidSpec("entropy target must be positive".into()));
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn feature_len(&self) -> usize {
        let t = self.num_channels();
        t * (t - 1)
    }

    /// Fails with `ChannelMismatch` unless `names` is this model's channel list.
    pub fn check_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        let same = names.len() == self.channel_names.len()
            && names.iter().zip(&self.channel_names).all(|(a, b)| a.as_ref() == b);
        if same {
            Ok(())
        } else {
            Err(Error::ChannelMismatch {
                model: self.channel_names.clone(),
                config: names.iter().map(|s| String::from(s.as_ref())).collect(),
            })
        }
    }
}

struct Trace {
    /// Input followed by every hidden activation (post-ReLU).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer; the last entry are the logits.
    pre: Vec<Vec<f64>>,
}

fn forward_trace(params: &MlpParams, x: &[f64]) -> Trace {
    let mut inputs = vec![x.to_vec()];
    let mut pre = Vec::with_capacity(params.layers.len());
    for (li, layer) in params.layers.iter().enumerate() {
        let h = inputs.last().expect("input");
        let mut z = layer.bias.clone();
        for (k, &hk) in h.iter().enumerate() {
            if hk == 0.0 {
                continue;
            }
            for (zj, &w) in z.iter_mut().zip(layer.weights.row(k)) {
                *zj += hk * w;
            }
        }
        if li + 1 < params.layers.len() {
            inputs.push(z.iter().map(|&v| v.max(0.0)).collect());
        }
        pre.push(z);
    }
    Trace { inputs, pre }
}

fn masked_softmax(logits: &[f64], masked: &[bool]) -> Vec<f64> {
    let mut z: Vec<f64> = logits
        .iter()
        .zip(masked)
        .map(|(&l, &m)| if m { f64::NEG_INFINITY } else { l })
        .collect();
    softmax_in_place(&mut z);
    z
}

/// Attention over the `t` channels for one feature row.
pub fn attention_forward(model: &AttentionModel, feats: &[f64]) -> Result<Vec<f64>> {
    if feats.len() != model.feature_len() {
        return Err(Error::ShapeMismatch(format!(
            "{} features, model expects {}",
            feats.len(),
            model.feature_len()
        )));
    }
    let trace = forward_trace(&model.params, feats);
    Ok(masked_softmax(trace.pre.last().expect("at least one layer"), &model.masked))
}

/// `Σ_i alpha_i rows_i`.
pub fn fuse(alpha: &[f64], rows: &[&[f64]]) -> Result<Vec<f64>> {
    if alpha.len() != rows.len() || rows.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} rows", alpha.len(), rows.len())));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::ShapeMismatch("prediction rows differ in length".into()));
    }
    let mut out = vec![0.0; c];
    for (&a, row) in alpha.iter().zip(rows) {
        if a == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row.iter()) {
            *o += a * p;
        }
    }
    Ok(out)
}

/// `-ln(max(y_bar[label], 1e-12))`
pub fn nll_loss(y_bar: &[f64], label: usize) -> Result<f64> {
    let p = *y_bar.get(label).ok_or(Error::InvalidLabel {
        label,
        classes: y_bar.len(),
    })?;
    Ok(-math::ln(p.max(LOSS_CLAMP)))
}

/// Mean loss and its exact gradient over a batch.
///
/// `feats` is `b x t(t-1)`; `preds` holds the `t` channel predictions, each
/// `b x c`, row-aligned with `feats` and `labels`.
pub fn backward(
    model: &AttentionModel,
    feats: &Matrix,
    preds: &[ChannelPrediction],
    labels: &[usize],
) -> Result<(f64, MlpParams)> {
    let b = feats.rows();
    let t = model.num_channels();
    if b == 0 {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    if feats.cols() != model.feature_len() || preds.len() != t || labels.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "batch of {b}: {} feature columns, {} channels, {} labels",
            feats.cols(),
            preds.len(),
            labels.len()
        )));
    }
    let c = preds[0].probs.cols();
    if preds.iter().any(|p| p.probs.shape() != (b, c)) {
        return Err(Error::ShapeMismatch("channel predictions disagree in shape".into()));
    }
    let sizes = model.params.layer_sizes();
    let mut grads = MlpParams::zeros_like(&sizes);
    let mut total = 0.0;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(t);
    for e in 0..b {
        let label = labels[e];
        if label >= c {
            return Err(Error::InvalidLabel { label, classes: c });
        }
        let trace = forward_trace(&model.params, feats.row(e));
        let alpha = masked_softmax(trace.pre.last().expect("logits"), &model.masked);
        rows.clear();
        rows.extend(preds.iter().map(|p| p.probs.row(e)));
        let y_bar = fuse(&alpha, &rows)?;
        total += nll_loss(&y_bar, label)?;

        let p_label = y_bar[label];
        if p_label < LOSS_CLAMP {
            continue;
        }
        // dL/dalpha_i = -p_i[label] / y_bar[label]; then through the softmax.
        let g: Vec<f64> = rows.iter().map(|r| -r[label] / p_label).collect();
        let mean_g: f64 = alpha.iter().zip(&g).map(|(a, gi)| a * gi).sum();
        let mut delta: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a * (gi - mean_g)).collect();

        for l in (0..model.params.layers.len()).rev() {
            let input = &trace.inputs[l];
            let layer = &model.params.layers[l];
            let gl = &mut grads.layers[l];
            for (k, &hk) in input.iter().enumerate() {
                if hk == 0.0 {
                    continue;
                }
                for (gw, &dj) in gl.weights.row_mut(k).iter_mut().zip(&delta) {
                    *gw += hk * dj;
                }
            }
            for (gb, &dj) in gl.bias.iter_mut().zip(&delta) {
                *gb += dj;
            }
            if l > 0 {
                let z_prev = &trace.pre[l - 1];
                delta = (0..layer.weights.rows())
                    .map(|k| {
                        if z_prev[k] > 0.0 {
                            layer.weights.row(k).iter().zip(&delta).map(|(w, d)| w * d).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    let inv = 1.0 / b as f64;
    grads.values_mut().for_each(|g| *g *= inv);
    Ok((total * inv, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64) -> Self {
        let n = params.num_params();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) -> Result<()> {
    let n = params.num_params();
    if grads.layer_sizes() != params.layer_sizes() || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(Error::ShapeMismatch("gradient or optimizer state shaped unlike params".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - math::pow(state.beta1, t);
    let c2 = 1.0 - math::pow(state.beta2, t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, &g), m), v) in params
        .values_mut()
        .zip(grads.values())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.lr * m_hat / (math::sqrt(v_hat) + state.eps);
    }
    Ok(())
}
