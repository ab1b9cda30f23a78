//! Fixed propagation operators that turn node features into channel features.
//!
//! Every operator is applied right-to-left as repeated sparse-dense products,
//! so `Ā^k X` costs `O(k |E| d)` and no power of `Ā` is ever formed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, SparseAdjacency};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelKind {
    /// `F = X`
    Linear,
    /// `F = Ā^k X`
    Sgc(u32),
    /// `F = (I - Ā)^k X`
    Hgc(u32),
    /// `order`-th term of the Chebyshev recursion on the scaled Laplacian.
    Chebyshev(u32),
    /// Fixed point of `F = (1 - r) Ā F + r X`.
    Ppr(f64),
}

impl ChannelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelKind::Linear => Ok(()),
            ChannelKind::Sgc(0) | ChannelKind::Hgc(0) => {
                Err(Error::InvalidSpec("hop count must be >= 1".into()))
            }
            ChannelKind::Chebyshev(0) => Err(Error::InvalidSpec("chebyshev order must be >= 1".into())),
            ChannelKind::Ppr(r) if !(r > 0.0 && r <= 1.0) => Err(Error::InvalidSpec(format!(
                "ppr restart {r} outside (0, 1]"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_high_pass(&self) -> bool {
        matches!(self, ChannelKind::Hgc(_))
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Linear => f.write_str("linear"),
            ChannelKind::Sgc(k) => write!(f, "sgc{k}"),
            ChannelKind::Hgc(k) => write!(f, "hgc{k}"),
            ChannelKind::Chebyshev(k) => write!(f, "cheb{k}"),
            ChannelKind::Ppr(r) => write!(f, "ppr{r}"),
        }
    }
}

/// A named channel. The name doubles as the CLI token and the cache file stem.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub name: String,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            name: kind.to_string(),
            kind,
        })
    }

    /// Parses tokens like `linear`, `sgc2`, `hgc1`, `cheb3`, `ppr0.25`.
    pub fn parse(token: &str) -> Result<Self> {
        let t = token.trim().to_ascii_lowercase();
        let bad = || Error::InvalidSpec(format!("unknown channel `{token}`"));
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad());
        let kind = if t == "linear" {
            ChannelKind::Linear
        } else if let Some(k) = t.strip_prefix("sgc") {
            ChannelKind::Sgc(num(k)?)
        } else if let Some(k) = t.strip_prefix("hgc") {
            ChannelKind::Hgc(num(k)?)
        } else if let Some(k) = t.strip_prefix("cheb") {
            ChannelKind::Chebyshev(num(k)?)
        } else if let Some(r) = t.strip_prefix("ppr") {
            ChannelKind::Ppr(r.parse::<f64>().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        Self::new(kind)
    }

    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        let specs = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Self::parse)
            .collect::<Result<Vec<_>>>()?;
        check_unique(&specs)?;
        Ok(specs)
    }

    /// Linear, SGC1, SGC2, HGC1, HGC2.
    pub fn default_set() -> Vec<Self> {
        [
            ChannelKind::Linear,
            ChannelKind::Sgc(1),
            ChannelKind::Sgc(2),
            ChannelKind::Hgc(1),
            ChannelKind::Hgc(2),
        ]
        .into_iter()
        .map(|k| Self::new(k).expect("valid default channel"))
        .collect()
    }
}

fn check_unique(specs: &[ChannelSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidSpec("no channels given".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|p| p.name == s.name) {
            return Err(Error::InvalidSpec(format!("duplicate channel name `{}`", s.name)));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig {
    /// Build `Ā` from `A + I` instead of `A`.
    pub self_loops: bool,
    pub ppr_max_iters: usize,
    pub ppr_tol: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            self_loops: false,
            ppr_max_iters: 100,
            ppr_tol: 1e-6,
        }
    }
}

/// Propagated features of one channel on one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCache {
    pub name: String,
    pub features: Matrix,
    /// Identifies the (dataset, channel, propagation config) triple.
    pub key: [u8; 16],
}

impl FeatureCache {
    pub fn shape(&self) -> (usize, usize) {
        self.features.shape()
    }
}

/// Cache key of `spec` on `graph`; depends on structure and features only.
pub fn channel_key(spec: &ChannelSpec, graph: &GraphDataset, cfg: &PropagationConfig) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(b"gfuse-channel-v1");
    h.update(graph.content_digest());
    h.update(spec.name.as_bytes());
    h.update([0u8]);
    match spec.kind {
        ChannelKind::Linear => h.update([0u8]),
        ChannelKind::Sgc(k) => h.update([&[1u8][..], &k.to_le_bytes()].concat()),
        ChannelKind::Hgc(k) => h.update([&[2u8][..], &k.to_le_bytes()].concat()),
        ChannelKind::Chebyshev(k) => h.update([&[3u8][..], &k.to_le_bytes()].concat()),
        ChannelKind::Ppr(r) => {
            h.update([4u8]);
            h.update(r.to_bits().to_le_bytes());
            h.update((cfg.ppr_max_iters as u64).to_le_bytes());
            h.update(cfg.ppr_tol.to_bits().to_le_bytes());
        }
    }
    h.update([cfg.self_loops as u8]);
    let full: [u8; 32] = h.finalize().into();
    let mut key = [0u8; 16];
    key.copy_from_slice(&full[..16]);
    key
}

fn adjacency_for(graph: &GraphDataset, cfg: &PropagationConfig) -> SparseAdjacency {
    if cfg.self_loops {
        graph.adjacency().with_self_loops()
    } else {
        graph.adjacency().clone()
    }
}

/// Computes the feature matrix of one channel.
pub fn propagate(spec: &ChannelSpec, graph: &GraphDataset, cfg: &PropagationConfig) -> Result<FeatureCache> {
    spec.kind.validate()?;
    let x = graph.features();
    let features = match spec.kind {
        ChannelKind::Linear => x.clone(),
        ChannelKind::Sgc(k) => {
            let a = graph.normalized_adjacency(cfg.self_loops)?;
            let mut f = x.clone();
            for _ in 0..k {
                f = graph.counted_spmm(&a, &f)?;
            }
            f
        }
        ChannelKind::Hgc(k) => {
            let a = graph.normalized_adjacency(cfg.self_loops)?;
            let mut f = x.clone();
            for _ in 0..k {
                let af = graph.counted_spmm(&a, &f)?;
                for (v, s) in f.as_mut_slice().iter_mut().zip(af.as_slice()) {
                    *v -= s;
                }
            }
            f
        }
        ChannelKind::Chebyshev(order) => chebyshev_terms(order, graph, cfg)?.pop().expect("order >= 1"),
        ChannelKind::Ppr(r) => ppr_iterate(r, graph, cfg)?.features,
    };
    Ok(FeatureCache {
        name: spec.name.clone(),
        features,
        key: channel_key(spec, graph, cfg),
    })
}

fn chebyshev_terms(order: u32, graph: &GraphDataset, cfg: &PropagationConfig) -> Result<Vec<Matrix>> {
    if order < 1 {
        return Err(Error::InvalidSpec("chebyshev order must be >= 1".into()));
    }
    let x = graph.features();
    let mut terms = Vec::with_capacity(order as usize);
    terms.push(x.clone());
    if order == 1 {
        return Ok(terms);
    }
    let l = adjacency_for(graph, cfg).scaled_laplacian();
    terms.push(graph.counted_spmm(&l, x)?);
    for t in 2..order as usize {
        let mut next = graph.counted_spmm(&l, &terms[t - 1])?;
        for (v, prev) in next.as_mut_slice().iter_mut().zip(terms[t - 2].as_slice()) {
            *v = 2.0 * *v - prev;
        }
        terms.push(next);
    }
    Ok(terms)
}

/// All Chebyshev terms `F(1) = X, F(2) = L̂X, F(t) = 2 L̂ F(t-1) - F(t-2)` up to `order`.
pub fn chebyshev_features(order: u32, graph: &GraphDataset, cfg: &PropagationConfig) -> Result<Vec<FeatureCache>> {
    let terms = chebyshev_terms(order, graph, cfg)?;
    terms
        .into_iter()
        .enumerate()
        .map(|(i, features)| {
            let spec = ChannelSpec::new(ChannelKind::Chebyshev(i as u32 + 1))?;
            Ok(FeatureCache {
                key: channel_key(&spec, graph, cfg),
                name: spec.name,
                features,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PprRun {
    pub features: Matrix,
    pub iterations: usize,
    /// False when `ppr_max_iters` ran out before the change dropped below tol.
    pub converged: bool,
}

/// Power iteration `F <- (1 - r) Ā F + r X` from `F = X`.
pub fn ppr_iterate(restart: f64, graph: &GraphDataset, cfg: &PropagationConfig) -> Result<PprRun> {
    ChannelKind::Ppr(restart).validate()?;
    if !(cfg.ppr_tol > 0.0) {
        return Err(Error::InvalidSpec("ppr tolerance must be positive".into()));
    }
    let a = graph.normalized_adjacency(cfg.self_loops)?;
    let x = graph.features();
    let mut f = x.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.ppr_max_iters {
        iterations += 1;
        let mut next = graph.counted_spmm(&a, &f)?;
        let mut change = 0.0f64;
        for ((v, &xv), &old) in next.as_mut_slice().iter_mut().zip(x.as_slice()).zip(f.as_slice()) {
            *v = (1.0 - restart) * *v + restart * xv;
            change = change.max((*v - old).abs());
        }
        f = next;
        if change <= cfg.ppr_tol {
            converged = true;
            break;
        }
    }
    Ok(PprRun {
        features: f,
        iterations,
        converged,
    })
}

/// Computes every channel in order. Names must be unique; the order fixes the
/// channel index used everywhere downstream.
pub fn build_channels(specs: &[ChannelSpec], graph: &GraphDataset, cfg: &PropagationConfig) -> Result<Vec<FeatureCache>> {
    check_unique(specs)?;
    specs.iter().map(|s| propagate(s, graph, cfg)).collect()
}

pub fn ensure_unique(specs: &[ChannelSpec]) -> Result<()> {
    check_unique(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DatasetMeta, Splits};
    use alloc::vec;

    fn two_node() -> GraphDataset {
        GraphDataset::new(
            "edge",
            DatasetMeta {
                num_nodes: 2,
                feat_dim: 2,
                num_classes: 2,
                directed: false,
            },
            SparseAdjacency::from_edges(2, &[(0, 1)], true).unwrap(),
            Matrix::identity(2),
            vec![Some(0), Some(1)],
            Splits::default(),
        )
        .unwrap()
    }

    fn run(token: &str, g: &GraphDataset) -> Matrix {
        propagate(&ChannelSpec::parse(token).unwrap(), g, &PropagationConfig::default())
            .unwrap()
            .features
    }

    #[test]
    fn parse_tokens() {
        assert_eq!(ChannelSpec::parse("SGC2").unwrap().kind, ChannelKind::Sgc(2));
        assert_eq!(ChannelSpec::parse("ppr0.25").unwrap().name, "ppr0.25");
        assert!(ChannelSpec::parse("gcn").is_err());
        assert!(ChannelSpec::parse("sgc0").is_err());
        assert!(ChannelSpec::parse("ppr0").is_err());
        assert!(ChannelSpec::parse_list("linear,sgc1,linear").is_err());
        let names: Vec<_> = ChannelSpec::default_set().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["linear", "sgc1", "sgc2", "hgc1", "hgc2"]);
    }

    #[test]
    fn two_node_operators() {
        let g = two_node();
        assert_eq!(run("linear", &g), Matrix::identity(2));
        assert_eq!(run("sgc1", &g), Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        assert_eq!(run("hgc1", &g), Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]));
        assert_eq!(run("cheb2", &g), Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]));
    }

    #[test]
    fn ppr_fixed_point() {
        let g = two_node();
        let cfg = PropagationConfig {
            ppr_tol: 1e-12,
            ppr_max_iters: 1000,
            ..Default::default()
        };
        let run = ppr_iterate(0.5, &g, &cfg).unwrap();
        assert!(run.converged);
        let want = Matrix::from_rows(&[[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]]);
        assert!(run.features.max_abs_diff(&want) < 1e-10);

        let one = ppr_iterate(1.0, &g, &PropagationConfig::default()).unwrap();
        assert_eq!(one.iterations, 1);
        assert_eq!(one.features, Matrix::identity(2));

        assert!(matches!(
            ppr_iterate(0.0, &g, &PropagationConfig::default()),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn ppr_reports_non_convergence() {
        let g = two_node();
        let cfg = PropagationConfig {
            ppr_max_iters: 2,
            ppr_tol: 1e-15,
            ..Default::default()
        };
        let run = ppr_iterate(0.01, &g, &cfg).unwrap();
        assert!(!run.converged);
        assert_eq!(run.iterations, 2);
    }

    #[test]
    fn chebyshev_list() {
        let g = two_node();
        let cfg = PropagationConfig::default();
        let one = chebyshev_features(1, &g, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].features, Matrix::identity(2));
        assert!(chebyshev_features(0, &g, &cfg).is_err());
        let three = chebyshev_features(3, &g, &cfg).unwrap();
        // L̂² = I here, so 2·L̂·L̂X − X = X.
        assert_eq!(three[2].features, Matrix::identity(2));
    }

    #[test]
    fn counts_sparse_products() {
        let g = two_node();
        let before = g.sparse_product_count();
        run("sgc2", &g);
        run("linear", &g);
        assert_eq!(g.sparse_product_count() - before, 2);
    }
}
