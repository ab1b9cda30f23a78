//! Closed-form channel solves and the label-propagation baseline.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conv::FeatureCache;
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::linalg;
use crate::math;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveConfig {
    /// Singular values below `rcond * sigma_max` are treated as zero.
    pub rcond: f64,
    pub softmax_output: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rcond: 1e-10,
            softmax_output: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return Err(Error::InvalidSpec(format!("rcond {} outside (0, 1)", self.rcond)));
        }
        Ok(())
    }
}

/// One channel's per-node class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelPrediction {
    pub name: String,
    /// Row-stochastic when produced with `softmax_output`.
    pub probs: Matrix,
    pub logits: Option<Matrix>,
}

/// Minimum-norm least-squares weights `F_L⁺ Y_L` (`d x c`).
pub fn pinv_lstsq(f_l: &Matrix, y_l: &Matrix, rcond: f64) -> Result<Matrix> {
    if f_l.rows() == 0 {
        return Err(Error::EmptyLabelSet);
    }
    if f_l.rows() != y_l.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} label rows",
            f_l.rows(),
            y_l.rows()
        )));
    }
    SolveConfig {
        rcond,
        softmax_output: false,
    }
    .validate()?;
    Ok(linalg::pinv_solve(f_l, y_l, rcond))
}

/// Softmax in place, shifted by the row max.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `F W`, optionally passed through a row softmax.
pub fn channel_predict(name: &str, f: &Matrix, w: &Matrix, cfg: &SolveConfig) -> Result<ChannelPrediction> {
    let logits = f.matmul(w)?;
    if !cfg.softmax_output {
        return Ok(ChannelPrediction {
            name: name.into(),
            probs: logits,
            logits: None,
        });
    }
    let mut probs = logits.clone();
    for r in 0..probs.rows() {
        softmax_in_place(probs.row_mut(r));
    }
    Ok(ChannelPrediction {
        name: name.into(),
        probs,
        logits: Some(logits),
    })
}

/// Solves on `labeled` rows and predicts every node.
pub fn solve_channel(cache: &FeatureCache, labeled: &[usize], y_l: &Matrix, cfg: &SolveConfig) -> Result<ChannelPrediction> {
    let all: Vec<usize> = (0..cache.features.rows()).collect();
    solve_channel_rows(cache, labeled, y_l, &all, cfg)
}

/// Solves on `labeled` rows and predicts only `rows`, in that order.
pub fn solve_channel_rows(
    cache: &FeatureCache,
    labeled: &[usize],
    y_l: &Matrix,
    rows: &[usize],
    cfg: &SolveConfig,
) -> Result<ChannelPrediction> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let n = cache.features.rows();
    if let Some(&bad) = labeled.iter().chain(rows).find(|&&u| u >= n) {
        return Err(Error::ShapeMismatch(format!("node {bad} out of range for {n} rows")));
    }
    cfg.validate()?;
    let f_l = cache.features.select_rows(labeled);
    let w = pinv_lstsq(&f_l, y_l, cfg.rcond)?;
    let f = if rows.len() == n && rows.iter().enumerate().all(|(i, &r)| i == r) {
        channel_predict(&cache.name, &cache.features, &w, cfg)
    } else {
        channel_predict(&cache.name, &cache.features.select_rows(rows), &w, cfg)
    }?;
    Ok(f)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `Y(k+1) = alpha Ā Y(k) + (1 - alpha) Y(0)` for `hops` steps, seeded with
/// one-hot rows on the train split.
///
/// `probs` holds rows renormalized to the simplex (uniform where a row has no
/// mass); `logits` keeps the raw scores.
pub fn label_propagation(graph: &GraphDataset, alpha: f64, hops: usize) -> Result<ChannelPrediction> {
    label_propagation_from(graph, graph.splits().train.as_slice(), alpha, hops)
}

pub fn label_propagation_from(graph: &GraphDataset, labeled: &[usize], alpha: f64, hops: usize) -> Result<ChannelPrediction> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidSpec(format!("alpha {alpha} outside [0, 1]")));
    }
    let n = graph.num_nodes();
    let c = graph.num_classes();
    let mut y0 = Matrix::zeros(n, c);
    for (&u, &l) in labeled.iter().zip(graph.labels_of(labeled)?.iter()) {
        y0.set(u, l, 1.0);
    }
    let mut y = y0.clone();
    if hops > 0 {
        let a = graph.normalized_adjacency(false)?;
        for _ in 0..hops {
            let mut next = graph.counted_spmm(&a, &y)?;
            for (v, &s) in next.as_mut_slice().iter_mut().zip(y0.as_slice()) {
                *v = alpha * *v + (1.0 - alpha) * s;
            }
            y = next;
        }
    }
    let mut probs = y.clone();
    for r in 0..n {
        let row = probs.row_mut(r);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / c as f64);
        }
    }
    Ok(ChannelPrediction {
        name: "labelprop".into(),
        probs,
        logits: Some(y),
    })
}
