#![allow(dead_code)]

use gfuse_core::graph::{DatasetMeta, GraphDataset, SparseAdjacency, Splits};
use gfuse_core::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Random undirected graph; every class has at least one train node.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize, c: usize) -> GraphDataset {
    let m = rng.gen_range(0..=2 * n);
    let edges: Vec<(usize, usize)> = (0..m)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .filter(|(u, v)| u != v)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    for (class, &u) in order.iter().take(c).enumerate() {
        labels[u] = class;
    }
    let n_train = rng.gen_range(c.max(2)..=n);
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        ..Default::default()
    };
    splits.test = order[n_train..].to_vec();
    GraphDataset::new(
        "random",
        DatasetMeta {
            num_nodes: n,
            feat_dim: d,
            num_classes: c,
            directed: false,
        },
        SparseAdjacency::from_edges(n, &edges, true).unwrap(),
        uniform_matrix(rng, n, d),
        labels.into_iter().map(Some).collect(),
        splits,
    )
    .unwrap()
}

pub fn dense_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}
