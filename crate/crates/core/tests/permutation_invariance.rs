mod common;

use common::random_graph;
use gfuse_core::conv::build_channels;
use gfuse_core::features::assemble_features;
use gfuse_core::trainer::channel_predictions;
use gfuse_core::{ChannelSpec, GraphDataset, PropagationConfig, SolveConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Same graph with feature columns reordered by `p` and class `l` renamed `q[l]`.
fn permuted(g: &GraphDataset, p: &[usize], q: &[usize]) -> GraphDataset {
    GraphDataset::new(
        "permuted",
        *g.meta(),
        g.adjacency().clone(),
        g.features().select_cols(p),
        g.labels().iter().map(|l| l.map(|l| q[l])).collect(),
        g.splits().clone(),
    )
    .unwrap()
}

#[test]
fn features_invariant_predictions_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let specs = ChannelSpec::default_set();
    let prop = PropagationConfig::default();
    let solve = SolveConfig::default();
    let (mut worst_f, mut worst_p) = (0.0f64, 0.0f64);
    for _ in 0..300 {
        let n = rng.gen_range(6..=30);
        let d = rng.gen_range(1..=8);
        let c = rng.gen_range(2..=5.min(n / 2));
        let g = random_graph(&mut rng, n, d, c);
        let mut p: Vec<usize> = (0..d).collect();
        p.shuffle(&mut rng);
        let mut q: Vec<usize> = (0..c).collect();
        q.shuffle(&mut rng);
        let h = permuted(&g, &p, &q);

        let a = channel_predictions(&g, &build_channels(&specs, &g, &prop).unwrap(), &solve).unwrap();
        let b = channel_predictions(&h, &build_channels(&specs, &h, &prop).unwrap(), &solve).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            for u in 0..n {
                for l in 0..c {
                    worst_p = worst_p.max((pa.probs.get(u, l) - pb.probs.get(u, q[l])).abs());
                }
            }
        }
        let fa = assemble_features(&a, 1.5).unwrap();
        let fb = assemble_features(&b, 1.5).unwrap();
        worst_f = worst_f.max(fa.values.max_abs_diff(&fb.values));
    }
    println!("worst prediction gap {worst_p:.2e}, worst feature gap {worst_f:.2e}");
    assert!(worst_p <= 1e-9, "{worst_p}");
    assert!(worst_f <= 1e-8, "{worst_f}");
}
