//! Training on one graph and frozen inference on any other.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{adam_step, attention_forward, backward, fuse, init_params, AdamState, AttentionModel};
use crate::conv::{ChannelSpec, FeatureCache};
use crate::error::{Error, Result};
use crate::features::assemble_features;
use crate::graph::{GraphDataset, Split};
use crate::matrix::Matrix;
use crate::solver::{argmax, label_propagation, solve_channel, solve_channel_rows, ChannelPrediction, SolveConfig};

/// Ref sets larger than this multiple of the batch size are subsampled.
pub const REF_CAP_FACTOR: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub channels: Vec<ChannelSpec>,
    pub n_batches: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    /// Number of dense layers; `1` is a single linear map.
    pub n_layers: usize,
    /// Target entropy of each similarity row, in bits.
    pub entropy: f64,
    pub seed: u64,
    /// Give the high-pass channels zero attention.
    pub mask_hgc: bool,
    pub rcond: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            channels: ChannelSpec::default_set(),
            n_batches: 500,
            batch_size: 128,
            lr: 2e-4,
            hidden_dim: 64,
            n_layers: 1,
            entropy: 2.0,
            seed: 0,
            mask_hgc: true,
            rcond: 1e-10,
        }
    }
}

impl TrainConfig {
    /// Settings used when training on the citation graph.
    pub fn cora() -> Self {
        Self::default()
    }

    /// Settings used when training on the small web-page graph.
    pub fn wisconsin() -> Self {
        Self {
            n_batches: 1000,
            hidden_dim: 32,
            n_layers: 2,
            entropy: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_batches < 1 {
            return Err(Error::InvalidSpec("n_batches must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidSpec("batch_size must be at least 2".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidSpec(format!("learning rate {}", self.lr)));
        }
        if self.n_layers < 1 || (self.n_layers > 1 && self.hidden_dim == 0) {
            return Err(Error::InvalidSpec("need at least one layer and non-zero hidden width".into()));
        }
        if !(self.entropy > 0.0) {
            return Err(Error::InvalidSpec("entropy target must be positive".into()));
        }
        if self.channels.len() < 2 {
            return Err(Error::InvalidSpec("need at least 2 channels".into()));
        }
        crate::conv::ensure_unique(&self.channels)?;
        if self.masked().iter().all(|&m| m) {
            return Err(Error::InvalidSpec("every channel is masked".into()));
        }
        self.solve_config().validate()
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            rcond: self.rcond,
            softmax_output: true,
        }
    }

    pub fn masked(&self) -> Vec<bool> {
        self.channels.iter().map(|s| self.mask_hgc && s.kind.is_high_pass()).collect()
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|s| s.name.clone()).collect()
    }

    /// `[t(t-1), hidden, ..., hidden, t]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let t = self.channels.len();
        let mut sizes = vec![t * (t - 1)];
        sizes.extend(core::iter::repeat(self.hidden_dim).take(self.n_layers - 1));
        sizes.push(t);
        sizes
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplitAccuracy {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

/// Sizes of one training batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchRecord {
    pub ref_size: usize,
    pub target_size: usize,
    pub disjoint: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub dataset: String,
    pub seed: u64,
    pub channels: Vec<String>,
    pub accuracy: SplitAccuracy,
    pub loss_trace: Vec<f64>,
    /// Attention averaged over the evaluated (or last trained) nodes.
    pub mean_attention: Vec<f64>,
    /// Filled by callers that have a clock.
    pub timings_ms: Vec<(String, f64)>,
    pub batches: Vec<BatchRecord>,
    /// Sparse products run on the graph while this phase executed.
    pub sparse_products: u64,
}

/// Target: `min(batch_size, |labeled|/2)` nodes without replacement; ref: the
/// rest, subsampled to `REF_CAP_FACTOR * batch_size`.
pub fn sample_ref_target(labeled: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if labeled.len() < 2 {
        return Err(Error::TooFewLabels(labeled.len()));
    }
    let n_target = batch_size.min(labeled.len() / 2);
    let mut pool = labeled.to_vec();
    pool.shuffle(rng);
    let mut reference = pool.split_off(n_target);
    reference.truncate(REF_CAP_FACTOR * batch_size);
    reference.sort_unstable();
    Ok((reference, pool))
}

fn check_channels(channels: &[FeatureCache], names: &[String], n: usize) -> Result<()> {
    let found: Vec<String> = channels.iter().map(|c| c.name.clone()).collect();
    if found != names {
        return Err(Error::ChannelMismatch {
            model: names.to_vec(),
            config: found,
        });
    }
    if let Some(c) = channels.iter().find(|c| c.features.rows() != n) {
        return Err(Error::ShapeMismatch(format!("channel {} has {} rows for {n} nodes", c.name, c.features.rows())));
    }
    Ok(())
}

/// Fits the attention MLP on `graph`'s train split.
///
/// `channels` must be the propagated features for `cfg.channels`, in order.
/// Nothing inside the batch loop touches the adjacency.
pub fn train(graph: &GraphDataset, channels: &[FeatureCache], cfg: &TrainConfig) -> Result<(AttentionModel, Metrics)> {
    cfg.validate()?;
    let names = cfg.channel_names();
    check_channels(channels, &names, graph.num_nodes())?;
    let labeled = graph.split(Split::Train);
    if labeled.len() < 2 {
        return Err(Error::TooFewLabels(labeled.len()));
    }
    let solve_cfg = cfg.solve_config();
    let t = names.len();

    let params = init_params(&cfg.layer_sizes(), cfg.seed)?;
    let mut model = AttentionModel::new(params, names.clone(), cfg.masked(), cfg.entropy)?;
    let mut adam = AdamState::new(&model.params, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let products_before = graph.sparse_product_count();
    let mut metrics = Metrics {
        dataset: graph.name().into(),
        seed: cfg.seed,
        channels: names,
        ..Metrics::default()
    };
    let mut last_alpha = vec![0.0; t];
    for b in 0..cfg.n_batches {
        let (reference, target) = sample_ref_target(labeled, cfg.batch_size, &mut rng)?;
        metrics.batches.push(BatchRecord {
            ref_size: reference.len(),
            target_size: target.len(),
            disjoint: target.iter().all(|u| reference.binary_search(u).is_err()),
        });
        let y_ref = graph.one_hot(&reference)?;
        let preds = channels
            .iter()
            .map(|ch| solve_channel_rows(ch, &reference, &y_ref, &target, &solve_cfg))
            .collect::<Result<Vec<_>>>()?;
        let feats = assemble_features(&preds, cfg.entropy)?.values;
        let labels = graph.labels_of(&target)?;
        let (loss, grads) = backward(&model, &feats, &preds, &labels)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss(b));
        }
        adam_step(&mut model.params, &grads, &mut adam)?;
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss(b));
        }
        metrics.loss_trace.push(loss);
        if b + 1 == cfg.n_batches {
            last_alpha = mean_rows(&attention_rows(&model, &feats)?);
        }
    }
    metrics.mean_attention = last_alpha;
    metrics.sparse_products = graph.sparse_product_count() - products_before;
    Ok((model, metrics))
}

fn attention_rows(model: &AttentionModel, feats: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(feats.rows(), model.num_channels());
    for u in 0..feats.rows() {
        let a = attention_forward(model, feats.row(u))?;
        out.row_mut(u).copy_from_slice(&a);
    }
    Ok(out)
}

fn mean_rows(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    if m.rows() > 0 {
        out.iter_mut().for_each(|o| *o /= m.rows() as f64);
    }
    out
}

/// Output of frozen inference on one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    /// Fused class probabilities, `n x c`.
    pub probs: Matrix,
    /// Per-node attention, `n x t`.
    pub attention: Matrix,
    pub channel_predictions: Vec<ChannelPrediction>,
}

impl Inference {
    pub fn mean_attention(&self) -> Vec<f64> {
        mean_rows(&self.attention)
    }
}

/// Every channel solved on the train split of `graph`, predicting all nodes.
pub fn channel_predictions(graph: &GraphDataset, channels: &[FeatureCache], cfg: &SolveConfig) -> Result<Vec<ChannelPrediction>> {
    let labeled = graph.split(Split::Train);
    let y = graph.one_hot(labeled)?;
    channels.iter().map(|ch| solve_channel(ch, labeled, &y, cfg)).collect()
}

/// Applies a trained model to `graph` with its whole train split as ref.
pub fn inductive_infer(
    model: &AttentionModel,
    graph: &GraphDataset,
    channels: &[FeatureCache],
    cfg: &SolveConfig,
) -> Result<Inference> {
    check_channels(channels, &model.channel_names, graph.num_nodes())?;
    let before = model.params.digest();
    let preds = channel_predictions(graph, channels, cfg)?;
    let feats = assemble_features(&preds, model.entropy_target)?.values;
    let attention = attention_rows(model, &feats)?;
    let n = graph.num_nodes();
    let mut probs = Matrix::zeros(n, graph.num_classes());
    let mut rows: Vec<&[f64]> = Vec::with_capacity(preds.len());
    for u in 0..n {
        rows.clear();
        rows.extend(preds.iter().map(|p| p.probs.row(u)));
        let y = fuse(attention.row(u), &rows)?;
        probs.row_mut(u).copy_from_slice(&y);
    }
    assert_eq!(before, model.params.digest(), "inference changed the model");
    Ok(Inference {
        probs,
        attention,
        channel_predictions: preds,
    })
}

/// Fraction of `split` nodes whose argmax matches the label.
pub fn evaluate(predictions: &Matrix, graph: &GraphDataset, split: Split) -> Result<f64> {
    let nodes = graph.split(split);
    if nodes.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    if predictions.rows() != graph.num_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} prediction rows for {} nodes",
            predictions.rows(),
            graph.num_nodes()
        )));
    }
    let labels = graph.labels_of(nodes)?;
    let hits = nodes
        .iter()
        .zip(&labels)
        .filter(|(&u, &l)| argmax(predictions.row(u)) == l)
        .count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Accuracy on every split; `None` where a split is empty.
pub fn split_accuracies(predictions: &Matrix, graph: &GraphDataset) -> Result<SplitAccuracy> {
    let acc = |s: Split| match evaluate(predictions, graph, s) {
        Ok(a) => Ok(Some(a)),
        Err(Error::EmptySplit(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(SplitAccuracy {
        train: acc(Split::Train)?,
        val: acc(Split::Val)?,
        test: acc(Split::Test)?,
    })
}

/// Uniform-attention fusion of all channels.
pub fn mean_agg(preds: &[ChannelPrediction]) -> Result<Matrix> {
    let first = preds.first().ok_or(Error::InvalidSpec("no channels to average".into()))?;
    let mut out = Matrix::zeros(first.probs.rows(), first.probs.cols());
    for p in preds {
        if p.probs.shape() != out.shape() {
            return Err(Error::ShapeMismatch("channel predictions disagree in shape".into()));
        }
        for (o, v) in out.as_mut_slice().iter_mut().zip(p.probs.as_slice()) {
            *o += v;
        }
    }
    out.scale(1.0 / preds.len() as f64);
    Ok(out)
}

pub const LP_ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const LP_HOPS: [usize; 3] = [1, 2, 3];

#[derive(Clone, Debug, PartialEq)]
pub struct LabelPropSelection {
    pub alpha: f64,
    pub hops: usize,
    pub val_accuracy: f64,
    pub prediction: ChannelPrediction,
}

/// Grid search over `LP_HOPS x LP_ALPHAS` on the validation split; the first
/// best cell in that order wins.
pub fn label_propagation_search(graph: &GraphDataset) -> Result<LabelPropSelection> {
    let mut best: Option<LabelPropSelection> = None;
    for &hops in &LP_HOPS {
        for &alpha in &LP_ALPHAS {
            let prediction = label_propagation(graph, alpha, hops)?;
            let val_accuracy = evaluate(&prediction.probs, graph, Split::Val)?;
            if best.as_ref().map_or(true, |b| val_accuracy > b.val_accuracy) {
                best = Some(LabelPropSelection {
                    alpha,
                    hops,
                    val_accuracy,
                    prediction,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
