//! In-memory graph datasets: CSR adjacency, dense features, labels and splits.
//!
//! Everything here is immutable once constructed. The only interior state is a
//! counter of sparse products run against a dataset, used to check that
//! training never re-propagates features.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::digest;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub num_nodes: usize,
    pub feat_dim: usize,
    pub num_classes: usize,
    pub directed: bool,
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 1 {
            return Err(Error::InvalidDataset("num_nodes must be >= 1".into()));
        }
        if self.feat_dim < 1 {
            return Err(Error::InvalidDataset("feat_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidDataset("num_classes must be >= 2".into()));
        }
        Ok(())
    }
}

/// Square sparse matrix in compressed sparse row form.
///
/// Column indices are strictly increasing inside each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    /// Binary adjacency from an edge list. Duplicates collapse to one entry;
    /// with `symmetrize` every edge is also stored reversed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], symmetrize: bool) -> Result<Self> {
        let mut pairs = Vec::with_capacity(if symmetrize { 2 } else { 1 } * edges.len());
        for &(s, d) in edges {
            if s >= n || d >= n {
                return Err(Error::InvalidDataset(format!(
                    "edge ({s}, {d}) out of range for {n} nodes"
                )));
            }
            pairs.push((s, d));
            if symmetrize && s != d {
                pairs.push((d, s));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_offsets = vec![0usize; n + 1];
        for &(s, _) in &pairs {
            row_offsets[s + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = pairs.iter().map(|&(_, d)| d).collect::<Vec<_>>();
        let values = vec![1.0; col_indices.len()];
        Ok(Self {
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Wraps raw CSR arrays after checking the structural invariants.
    pub fn from_csr(row_offsets: Vec<usize>, col_indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidDataset(format!("csr: {m}")));
        if row_offsets.is_empty() || row_offsets[0] != 0 {
            return bad("row_offsets must start at 0");
        }
        if col_indices.len() != values.len() {
            return bad("col_indices and values differ in length");
        }
        if *row_offsets.last().unwrap() != col_indices.len() {
            return bad("final offset must equal nnz");
        }
        let n = row_offsets.len() - 1;
        for w in row_offsets.windows(2) {
            if w[1] < w[0] {
                return bad("row_offsets must be non-decreasing");
            }
            let cols = &col_indices[w[0]..w[1]];
            if cols.windows(2).any(|c| c[1] <= c[0]) {
                return bad("columns must be strictly increasing within a row");
            }
            if cols.iter().any(|&c| c >= n) {
                return bad("column index out of range");
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        Ok(Self {
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn from_dense(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::ShapeMismatch("adjacency must be square".into()));
        }
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self::from_csr(offsets, cols, vals)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |r| self.row(r).0.iter().map(move |&c| (r, c)))
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.num_nodes();
        let mut m = Matrix::zeros(n, n);
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Sparse times dense. Each output row is accumulated in column order of
    /// the sparse row, so the result does not depend on any scheduling.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "adjacency on {} nodes times {} rows",
                self.num_nodes(),
                x.rows()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..self.num_nodes() {
            let (cols, vals) = self.row(r);
            let dst = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &s) in dst.iter_mut().zip(x.row(c)) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    /// Adds a unit diagonal entry to every row that lacks one.
    pub fn with_self_loops(&self) -> Self {
        let n = self.num_nodes();
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.nnz() + n);
        let mut vals = Vec::with_capacity(self.nnz() + n);
        for r in 0..n {
            let (rc, rv) = self.row(r);
            let mut placed = false;
            for (&c, &v) in rc.iter().zip(rv) {
                if !placed && c >= r {
                    if c != r {
                        cols.push(r);
                        vals.push(1.0);
                    }
                    placed = true;
                }
                cols.push(c);
                vals.push(v);
            }
            if !placed {
                cols.push(r);
                vals.push(1.0);
            }
            offsets.push(cols.len());
        }
        Self {
            row_offsets: offsets,
            col_indices: cols,
            values: vals,
        }
    }

    /// Scales every row to sum to one. Rows without positive mass become a
    /// unit self-loop, so propagation never zeroes a node out.
    pub fn row_normalize(&self) -> Result<Self> {
        let n = self.num_nodes();
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for r in 0..n {
            let (rc, rv) = self.row(r);
            if let Some(&value) = rv.iter().find(|&&v| v < 0.0) {
                return Err(Error::NegativeWeight { row: r, value });
            }
            let sum: f64 = rv.iter().sum();
            if sum > 0.0 {
                for (&c, &v) in rc.iter().zip(rv) {
                    if v > 0.0 {
                        cols.push(c);
                        vals.push(v / sum);
                    }
                }
            } else {
                cols.push(r);
                vals.push(1.0);
            }
            offsets.push(cols.len());
        }
        Ok(Self {
            row_offsets: offsets,
            col_indices: cols,
            values: vals,
        })
    }

    /// `2L/λ_max - I` with `L = I - D^-1/2 A D^-1/2` and `λ_max = 2`, which
    /// reduces to `-D^-1/2 A D^-1/2`. Zero-degree nodes use `d^-1/2 = 0`.
    pub fn scaled_laplacian(&self) -> Self {
        let n = self.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| {
                let d = self.row_sum(i);
                if d > 0.0 {
                    1.0 / math::sqrt(d)
                } else {
                    0.0
                }
            })
            .collect();
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for r in 0..n {
            let (rc, rv) = self.row(r);
            for (&c, &v) in rc.iter().zip(rv) {
                let w = -v * inv_sqrt[r] * inv_sqrt[c];
                if w != 0.0 {
                    cols.push(c);
                    vals.push(w);
                }
            }
            offsets.push(cols.len());
        }
        Self {
            row_offsets: offsets,
            col_indices: cols,
            values: vals,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// A validated node-classification dataset.
#[derive(Debug)]
pub struct GraphDataset {
    name: String,
    meta: DatasetMeta,
    adjacency: SparseAdjacency,
    features: Matrix,
    labels: Vec<Option<usize>>,
    splits: Splits,
    digest: [u8; 32],
    sparse_products: AtomicU64,
}

impl Clone for GraphDataset {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            meta: self.meta,
            adjacency: self.adjacency.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
            digest: self.digest,
            sparse_products: AtomicU64::new(0),
        }
    }
}

impl PartialEq for GraphDataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.meta == other.meta
            && self.adjacency == other.adjacency
            && self.features == other.features
            && self.labels == other.labels
            && self.splits == other.splits
    }
}

impl GraphDataset {
    pub fn new(
        name: impl Into<String>,
        meta: DatasetMeta,
        adjacency: SparseAdjacency,
        features: Matrix,
        labels: Vec<Option<usize>>,
        splits: Splits,
    ) -> Result<Self> {
        meta.validate()?;
        let n = meta.num_nodes;
        let bad = |m: String| Err(Error::InvalidDataset(m));
        if adjacency.num_nodes() != n {
            return bad(format!("adjacency has {} nodes, meta says {n}", adjacency.num_nodes()));
        }
        if features.shape() != (n, meta.feat_dim) {
            return bad(format!(
                "features are {}x{}, meta says {n}x{}",
                features.rows(),
                features.cols(),
                meta.feat_dim
            ));
        }
        if !features.is_finite() {
            return bad("non-finite feature value".into());
        }
        if labels.len() != n {
            return bad(format!("{} labels for {n} nodes", labels.len()));
        }
        if let Some((node, c)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= meta.num_classes).map(|c| (i, c)))
        {
            return bad(format!("node {node} has label {c} >= num_classes"));
        }
        let mut owner = vec![None::<Split>; n];
        for split in Split::ALL {
            for &id in splits.get(split) {
                if id >= n {
                    return bad(format!("{} split node {id} out of range", split.name()));
                }
                if let Some(prev) = owner[id] {
                    return bad(format!(
                        "node {id} appears in both {} and {} splits",
                        prev.name(),
                        split.name()
                    ));
                }
                owner[id] = Some(split);
                if labels[id].is_none() {
                    return bad(format!("{} split node {id} has no label", split.name()));
                }
            }
        }
        let digest = digest::dataset_digest(&meta, &adjacency, &features);
        Ok(Self {
            name: name.into(),
            meta,
            adjacency,
            features,
            labels,
            splits,
            digest,
            sparse_products: AtomicU64::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn num_nodes(&self) -> usize {
        self.meta.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.meta.num_classes
    }

    pub fn adjacency(&self) -> &SparseAdjacency {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn split(&self, split: Split) -> &[usize] {
        self.splits.get(split)
    }

    /// SHA-256 over meta, adjacency and features (not labels or splits).
    pub fn content_digest(&self) -> &[u8; 32] {
        &self.digest
    }

    /// Labels of `nodes`, which must all be labeled.
    pub fn labels_of(&self, nodes: &[usize]) -> Result<Vec<usize>> {
        nodes
            .iter()
            .map(|&u| {
                self.labels
                    .get(u)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::InvalidDataset(format!("node {u} is unlabeled")))
            })
            .collect()
    }

    /// One-hot rows (`|nodes| x c`) for labeled nodes.
    pub fn one_hot(&self, nodes: &[usize]) -> Result<Matrix> {
        let labels = self.labels_of(nodes)?;
        Ok(one_hot(&labels, self.meta.num_classes))
    }

    /// `Ā`: the row-normalized adjacency, optionally over `A + I`.
    pub fn normalized_adjacency(&self, self_loops: bool) -> Result<SparseAdjacency> {
        if self_loops {
            self.adjacency.with_self_loops().row_normalize()
        } else {
            self.adjacency.row_normalize()
        }
    }

    /// Sparse product against this graph's structure, counted.
    pub(crate) fn counted_spmm(&self, op: &SparseAdjacency, x: &Matrix) -> Result<Matrix> {
        self.sparse_products.fetch_add(1, Ordering::Relaxed);
        op.spmm(x)
    }

    /// Number of sparse propagations executed against this dataset so far.
    pub fn sparse_product_count(&self) -> u64 {
        self.sparse_products.load(Ordering::Relaxed)
    }
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), num_classes);
    for (r, &l) in labels.iter().enumerate() {
        m.set(r, l, 1.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &SparseAdjacency) -> Matrix {
        a.to_dense()
    }

    #[test]
    fn from_edges_dedups_and_symmetrizes() {
        let a = SparseAdjacency::from_edges(3, &[(0, 1), (0, 1), (1, 2)], true).unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.row(1).0, &[0, 2]);
        assert!(SparseAdjacency::from_edges(2, &[(0, 2)], false).is_err());
    }

    #[test]
    fn row_normalize_swap_is_unchanged() {
        let a = SparseAdjacency::from_edges(2, &[(0, 1)], true).unwrap();
        assert_eq!(dense(&a.row_normalize().unwrap()), Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn row_normalize_dag_with_isolated_row() {
        let a = SparseAdjacency::from_edges(3, &[(0, 1), (0, 2), (1, 2)], false).unwrap();
        let n = dense(&a.row_normalize().unwrap());
        assert_eq!(
            n,
            Matrix::from_rows(&[[0.0, 0.5, 0.5], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
        );
    }

    #[test]
    fn row_normalize_rejects_negative() {
        let a = SparseAdjacency::from_dense(&Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]])).unwrap();
        assert_eq!(
            a.row_normalize(),
            Err(Error::NegativeWeight { row: 0, value: -1.0 })
        );
    }

    #[test]
    fn scaled_laplacian_examples() {
        let edge = SparseAdjacency::from_edges(2, &[(0, 1)], true).unwrap();
        assert_eq!(dense(&edge.scaled_laplacian()), Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]));

        let empty = SparseAdjacency::from_edges(3, &[], false).unwrap();
        assert_eq!(dense(&empty.scaled_laplacian()), Matrix::zeros(3, 3));

        let tri = SparseAdjacency::from_edges(3, &[(0, 1), (1, 2), (0, 2)], true).unwrap();
        let l = dense(&tri.scaled_laplacian());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { -0.5 };
                assert!((l.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn self_loops_inserted_in_order() {
        let a = SparseAdjacency::from_edges(3, &[(0, 2), (1, 0), (1, 1)], false).unwrap();
        let s = a.with_self_loops();
        assert_eq!(s.row(0).0, &[0, 2]);
        assert_eq!(s.row(1).0, &[0, 1]);
        assert_eq!(s.row(2).0, &[2]);
    }

    #[test]
    fn dataset_validation() {
        let meta = DatasetMeta {
            num_nodes: 3,
            feat_dim: 2,
            num_classes: 2,
            directed: false,
        };
        let adj = SparseAdjacency::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let x = Matrix::zeros(3, 2);
        let ok = GraphDataset::new(
            "toy",
            meta,
            adj.clone(),
            x.clone(),
            vec![Some(0), Some(1), None],
            Splits {
                train: vec![0, 1],
                ..Default::default()
            },
        );
        assert!(ok.is_ok());
        let overlap = GraphDataset::new(
            "toy",
            meta,
            adj.clone(),
            x.clone(),
            vec![Some(0), Some(1), None],
            Splits {
                train: vec![0],
                test: vec![0],
                ..Default::default()
            },
        );
        assert!(overlap.is_err());
        let unlabeled = GraphDataset::new(
            "toy",
            meta,
            adj,
            x,
            vec![Some(0), Some(1), None],
            Splits {
                test: vec![2],
                ..Default::default()
            },
        );
        assert!(unlabeled.is_err());
    }
}
