use gfuse_core::conv::build_channels;
use gfuse_core::model_codec::encode;
use gfuse_core::synth::{contextual_sbm, SbmConfig};
use gfuse_core::trainer::{channel_predictions, evaluate, inductive_infer, mean_agg, train};
use gfuse_core::{GraphDataset, PropagationConfig, Split, TrainConfig};

fn graph(homophily: f64, seed: u64) -> GraphDataset {
    contextual_sbm(&SbmConfig {
        num_nodes: 400,
        homophily,
        seed,
        ..SbmConfig::default()
    })
    .unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        n_batches: 400,
        batch_size: 32,
        ..TrainConfig::wisconsin()
    }
}

#[test]
fn same_seed_same_model() {
    let g = graph(0.3, 1);
    let cfg = TrainConfig { n_batches: 50, ..quick() };
    let ch = build_channels(&cfg.channels, &g, &PropagationConfig::default()).unwrap();
    let (m1, t1) = train(&g, &ch, &cfg).unwrap();
    let (m2, t2) = train(&g, &ch, &cfg).unwrap();
    assert_eq!(t1.loss_trace, t2.loss_trace);
    assert_eq!(encode(&m1), encode(&m2));
    let (m3, _) = train(&g, &ch, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(encode(&m1), encode(&m3));
}

#[test]
fn loss_goes_down_and_batches_stay_disjoint() {
    let g = graph(0.9, 2);
    let cfg = TrainConfig { lr: 5e-3, ..quick() };
    let ch = build_channels(&cfg.channels, &g, &PropagationConfig::default()).unwrap();
    let (_, m) = train(&g, &ch, &cfg).unwrap();
    assert!(m.loss_trace.iter().all(|l| l.is_finite()));
    assert!(m.batches.iter().all(|b| b.disjoint));
    let tail = &m.loss_trace[m.loss_trace.len() - 100..];
    let avg = tail.iter().sum::<f64>() / 100.0;
    assert!(avg < m.loss_trace[0], "{avg} vs {}", m.loss_trace[0]);
}

#[test]
fn training_never_propagates() {
    // Same labels and features, very different edge counts: identical solve sizes.
    let sparse = contextual_sbm(&SbmConfig { avg_degree: 2.0, ..SbmConfig::default() }).unwrap();
    let dense = contextual_sbm(&SbmConfig { avg_degree: 40.0, ..SbmConfig::default() }).unwrap();
    assert!(dense.adjacency().nnz() > 10 * sparse.adjacency().nnz());
    let cfg = TrainConfig { n_batches: 30, ..quick() };
    let mut sizes = Vec::new();
    for g in [&sparse, &dense] {
        let ch = build_channels(&cfg.channels, g, &PropagationConfig::default()).unwrap();
        let before = g.sparse_product_count();
        let (_, m) = train(g, &ch, &cfg).unwrap();
        assert_eq!(m.sparse_products, 0);
        assert_eq!(g.sparse_product_count(), before);
        sizes.push(m.batches.iter().map(|b| (b.ref_size, b.target_size)).collect::<Vec<_>>());
    }
    assert_eq!(sizes[0], sizes[1]);
}

#[test]
fn transfer_across_shapes() {
    let src = graph(0.2, 3);
    let dst = contextual_sbm(&SbmConfig {
        num_nodes: 250,
        num_classes: 5,
        feat_dim: 9,
        homophily: 0.85,
        seed: 4,
        ..SbmConfig::default()
    })
    .unwrap();
    let cfg = quick();
    let prop = PropagationConfig::default();
    let (model, _) = train(&src, &build_channels(&cfg.channels, &src, &prop).unwrap(), &cfg).unwrap();
    let ch = build_channels(&cfg.channels, &dst, &prop).unwrap();
    let before = encode(&model);
    let inf = inductive_infer(&model, &dst, &ch, &cfg.solve_config()).unwrap();
    assert_eq!(encode(&model), before);
    assert_eq!(inf.probs.shape(), (250, 5));
    let acc = evaluate(&inf.probs, &dst, Split::Test).unwrap();
    let preds = channel_predictions(&dst, &ch, &cfg.solve_config()).unwrap();
    let worst = preds
        .iter()
        .map(|p| evaluate(&p.probs, &dst, Split::Test).unwrap())
        .fold(1.0, f64::min);
    assert!(acc > worst);
    let mean = evaluate(&mean_agg(&preds).unwrap(), &dst, Split::Test).unwrap();
    assert!(mean > worst);
}
