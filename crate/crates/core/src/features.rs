//! Entropy-normalized distance features between channel predictions.
//!
//! For node `u` and anchor channel `i`, the squared distances to the other
//! `t-1` channel predictions become a distribution
//! `p(j|i) ∝ exp(-d_ij / (2 σ²))` whose bandwidth is chosen so the
//! distribution has a fixed Shannon entropy (in bits). The resulting
//! `t(t-1)` numbers depend only on distances, so they are unchanged by
//! permuting feature or label dimensions, and they do not depend on the
//! overall distance scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::solver::ChannelPrediction;

const BETA_LO: f64 = 1e-10;
const BETA_HI: f64 = 1e10;
const MAX_BISECTIONS: usize = 64;
/// Largest entropy error accepted; also the slack for declaring a target unreachable.
const ENTROPY_TOL: f64 = 1e-5;
/// The search keeps going past `ENTROPY_TOL` down to this, bounded by `MAX_BISECTIONS`.
const STOP_TOL: f64 = 1e-10;
/// Relative spread below which a distance row counts as all-equal.
const DEGENERATE_SPREAD: f64 = 1e-12;
/// Prediction differences below this are treated as rounding noise. A
/// perturbation `r` of the rows moves a squared distance `D` by at most
/// `r (2 sqrt(D) + r)`, so rows whose spread is inside that band carry no
/// signal; they arise whenever channels agree exactly, e.g. when every
/// channel interpolates the same training labels.
const PREDICTION_RESOLUTION: f64 = 1e-10;

/// Outcome of the bandwidth search for one (node, anchor) row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// σ matching the target entropy.
    Solved(f64),
    /// Target not reachable inside the search bracket; σ at the bracket edge.
    Clamped(f64),
    /// Target equals the maximum entropy; σ → ∞ and the row is uniform.
    Unbounded,
    /// All distances equal; every σ gives the uniform row.
    Indeterminate,
}

impl Bandwidth {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Bandwidth::Indeterminate)
    }
}

/// Squared Euclidean distances between the `t` channel rows of node `u`.
pub fn pairwise_sq_dist(preds: &[ChannelPrediction], u: usize) -> Result<Matrix> {
    check_preds(preds)?;
    if u >= preds[0].probs.rows() {
        return Err(Error::ShapeMismatch(format!("node {u} out of range")));
    }
    let rows: Vec<&[f64]> = preds.iter().map(|p| p.probs.row(u)).collect();
    Ok(sq_dist_rows(&rows))
}

fn sq_dist_rows(rows: &[&[f64]]) -> Matrix {
    let t = rows.len();
    let mut d = Matrix::zeros(t, t);
    for i in 0..t {
        for j in i + 1..t {
            let v: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

fn check_preds(preds: &[ChannelPrediction]) -> Result<()> {
    if preds.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 channels, got {}", preds.len())));
    }
    let shape = preds[0].probs.shape();
    if let Some(p) = preds.iter().find(|p| p.probs.shape() != shape) {
        return Err(Error::ShapeMismatch(format!(
            "channel `{}` is {:?}, expected {:?}",
            p.name,
            p.probs.shape(),
            shape
        )));
    }
    Ok(())
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * math::log2(x)).sum::<f64>()
}

/// `p_j ∝ exp(-beta d_j)`, computed after shifting by the smallest distance.
pub fn similarity_distribution(dists: &[f64], beta: f64) -> Vec<f64> {
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = dists.iter().map(|&d| math::exp(-beta * (d - min))).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Finds the bandwidth whose similarity distribution has `target_bits` entropy.
///
/// Distances are first mapped to `[0, 1]` by their range, so the search is
/// independent of the distance scale; the reported σ is in original units.
pub fn entropy_normalize(dists: &[f64], target_bits: f64) -> Result<(Vec<f64>, Bandwidth)> {
    let k = dists.len();
    if k == 0 {
        return Err(Error::ShapeMismatch("empty distance row".into()));
    }
    if let Some(&d) = dists.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::InvalidSpec(format!("distance {d} is not finite and non-negative")));
    }
    let h_max = math::log2(k as f64);
    // A single neighbour always gets probability 1, whatever the target.
    if !(target_bits > 0.0) || (k > 1 && target_bits > h_max + 1e-12) {
        return Err(Error::InvalidTarget {
            target: target_bits,
            max: h_max,
        });
    }
    let uniform = vec![1.0 / k as f64; k];
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let max = dists.iter().copied().fold(0.0, f64::max);
    let spread = max - min;
    let noise = PREDICTION_RESOLUTION * (2.0 * math::sqrt(max) + PREDICTION_RESOLUTION);
    if k == 1 || spread <= noise || spread <= DEGENERATE_SPREAD * max {
        return Ok((uniform, Bandwidth::Indeterminate));
    }
    if target_bits >= h_max - 1e-12 {
        return Ok((uniform, Bandwidth::Unbounded));
    }
    let scaled: Vec<f64> = dists.iter().map(|&d| (d - min) / spread).collect();
    let sigma_of = |beta: f64| math::sqrt(spread / (2.0 * beta));

    let at_hi = similarity_distribution(&scaled, BETA_HI);
    if entropy_bits(&at_hi) > target_bits + ENTROPY_TOL {
        return Ok((at_hi, Bandwidth::Clamped(sigma_of(BETA_HI))));
    }
    let at_lo = similarity_distribution(&scaled, BETA_LO);
    if entropy_bits(&at_lo) < target_bits - ENTROPY_TOL {
        return Ok((at_lo, Bandwidth::Clamped(sigma_of(BETA_LO))));
    }
    let (mut lo, mut hi) = (BETA_LO, BETA_HI);
    let mut beta = math::sqrt(lo * hi);
    let mut p = similarity_distribution(&scaled, beta);
    for _ in 0..MAX_BISECTIONS {
        let h = entropy_bits(&p);
        if (h - target_bits).abs() <= STOP_TOL {
            break;
        }
        // Entropy falls as beta grows.
        if h > target_bits {
            lo = beta;
        } else {
            hi = beta;
        }
        beta = math::sqrt(lo * hi);
        p = similarity_distribution(&scaled, beta);
    }
    Ok((p, Bandwidth::Solved(sigma_of(beta))))
}

/// Per-node similarity features, row `u` laid out as `(i, j)` pairs with `i`
/// ascending, then `j` ascending, skipping `j == i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityFeatures {
    pub num_channels: usize,
    pub values: Matrix,
    /// Row-major `n x t`.
    pub bandwidths: Vec<Bandwidth>,
}

impl SimilarityFeatures {
    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn bandwidth(&self, u: usize, anchor: usize) -> Bandwidth {
        self.bandwidths[u * self.num_channels + anchor]
    }
}

/// Position of `p(j|i)` inside a feature row.
#[inline]
pub fn feature_index(t: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < t && j < t);
    i * (t - 1) + if j < i { j } else { j - 1 }
}

/// Features of one node from its `t` channel rows, written to `out` (`t(t-1)`).
pub fn node_features(rows: &[&[f64]], target_bits: f64, out: &mut [f64], bandwidths: &mut [Bandwidth]) -> Result<()> {
    let t = rows.len();
    let d = sq_dist_rows(rows);
    let mut row = Vec::with_capacity(t - 1);
    for i in 0..t {
        row.clear();
        row.extend((0..t).filter(|&j| j != i).map(|j| d.get(i, j)));
        let (p, bw) = entropy_normalize(&row, target_bits)?;
        out[i * (t - 1)..(i + 1) * (t - 1)].copy_from_slice(&p);
        bandwidths[i] = bw;
    }
    Ok(())
}

pub fn assemble_features(preds: &[ChannelPrediction], target_bits: f64) -> Result<SimilarityFeatures> {
    check_preds(preds)?;
    let t = preds.len();
    let n = preds[0].probs.rows();
    let mut values = Matrix::zeros(n, t * (t - 1));
    let mut bandwidths = vec![Bandwidth::Indeterminate; n * t];
    let mut rows: Vec<&[f64]> = Vec::with_capacity(t);
    for u in 0..n {
        rows.clear();
        rows.extend(preds.iter().map(|p| p.probs.row(u)));
        node_features(&rows, target_bits, values.row_mut(u), &mut bandwidths[u * t..(u + 1) * t])?;
    }
    Ok(SimilarityFeatures {
        num_channels: t,
        values,
        bandwidths,
    })
}

/// Counts for one feature dimension over `bins` equal-width bins.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub dim: usize,
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// One histogram per column of `values`, spanning that column's range.
/// A constant column gets a unit-wide range centred on its value.
pub fn histograms(values: &Matrix, bins: usize) -> Result<Vec<Histogram>> {
    if bins < 2 {
        return Err(Error::InvalidSpec(format!("need at least 2 bins, got {bins}")));
    }
    let mut out = Vec::with_capacity(values.cols());
    for dim in 0..values.cols() {
        let col = (0..values.rows()).map(|r| values.get(r, dim));
        let (mut lo, mut hi) = col.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(lo < hi) {
            let c = if lo.is_finite() { lo } else { 0.0 };
            lo = c - 0.5;
            hi = c + 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| if b == bins { hi } else { lo + width * b as f64 }).collect();
        let mut counts = vec![0u64; bins];
        for v in col {
            let b = ((v - lo) / width) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        out.push(Histogram { dim, edges, counts });
    }
    Ok(out)
}
