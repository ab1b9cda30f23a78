//! Seeded contextual stochastic block graphs.
//!
//! Class-conditional Gaussian features on a graph whose edges stay inside a
//! class with probability `homophily`. Low homophily gives graphs where
//! high-pass channels carry the signal.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{DatasetMeta, GraphDataset, SparseAdjacency, Splits};
use crate::math;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SbmConfig {
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feat_dim: usize,
    pub avg_degree: f64,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Distance scale of the class means relative to unit noise.
    pub signal: f64,
    pub train_per_class: usize,
    /// Fraction of the non-train nodes sent to validation; the rest is test.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            name: "sbm".into(),
            num_nodes: 300,
            num_classes: 3,
            feat_dim: 16,
            avg_degree: 6.0,
            homophily: 0.8,
            signal: 1.0,
            train_per_class: 20,
            val_fraction: 0.3,
            seed: 0,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

pub fn contextual_sbm(cfg: &SbmConfig) -> Result<GraphDataset> {
    let (n, c, d) = (cfg.num_nodes, cfg.num_classes, cfg.feat_dim);
    if c < 2 || n < 2 * c || d == 0 {
        return Err(Error::InvalidSpec(format!("sbm with n={n}, c={c}, d={d}")));
    }
    if !(0.0..=1.0).contains(&cfg.homophily) || !(0.0..1.0).contains(&cfg.val_fraction) || !(cfg.avg_degree >= 0.0) {
        return Err(Error::InvalidSpec("sbm probability out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut labels: Vec<usize> = (0..n).map(|u| u % c).collect();
    labels.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (u, &l) in labels.iter().enumerate() {
        members[l].push(u);
    }

    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..d).map(|_| cfg.signal * gaussian(&mut rng)).collect())
        .collect();
    let mut features = Matrix::zeros(n, d);
    for u in 0..n {
        for (x, m) in features.row_mut(u).iter_mut().zip(&means[labels[u]]) {
            *x = m + gaussian(&mut rng);
        }
    }

    let n_edges = (cfg.avg_degree * n as f64 / 2.0) as usize;
    let mut edges = Vec::with_capacity(n_edges);
    while edges.len() < n_edges {
        let u = rng.gen_range(0..n);
        let lu = labels[u];
        let v = if rng.gen_bool(cfg.homophily) {
            *members[lu].choose(&mut rng).expect("non-empty class")
        } else {
            let mut other = rng.gen_range(0..c - 1);
            if other >= lu {
                other += 1;
            }
            *members[other].choose(&mut rng).expect("non-empty class")
        };
        if u != v {
            edges.push((u, v));
        }
    }
    let adjacency = SparseAdjacency::from_edges(n, &edges, true)?;

    let mut splits = Splits::default();
    let mut rest = Vec::new();
    for class in &members {
        let k = cfg.train_per_class.min(class.len() / 2);
        splits.train.extend_from_slice(&class[..k]);
        rest.extend_from_slice(&class[k..]);
    }
    rest.shuffle(&mut rng);
    let n_val = (cfg.val_fraction * rest.len() as f64) as usize;
    splits.val = rest[..n_val].to_vec();
    splits.test = rest[n_val..].to_vec();
    for s in [&mut splits.train, &mut splits.val, &mut splits.test] {
        s.sort_unstable();
    }

    GraphDataset::new(
        &cfg.name,
        DatasetMeta {
            num_nodes: n,
            feat_dim: d,
            num_classes: c,
            directed: false,
        },
        adjacency,
        features,
        labels.into_iter().map(Some).collect(),
        splits,
    )
}
