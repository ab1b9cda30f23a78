use gfuse_core::features::{entropy_bits, entropy_normalize, similarity_distribution, Bandwidth};
use gfuse_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain bisection on `beta` in original units, to 1e-12 bits.
fn oracle(dists: &[f64], target: f64) -> Vec<f64> {
    let h = |beta: f64| {
        let w: Vec<f64> = dists.iter().map(|d| (-beta * d).exp()).collect();
        let s: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        let e = -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>();
        (p, e)
    };
    let (mut lo, mut hi) = (0.0, 1e3);
    loop {
        let mid = 0.5 * (lo + hi);
        let (p, e) = h(mid);
        if (e - target).abs() <= 1e-12 || hi - lo < 1e-15 {
            return p;
        }
        if e > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[test]
fn two_point_example_matches_oracle() {
    let (p, bw) = entropy_normalize(&[1.0, 4.0], 0.9).unwrap();
    let q = oracle(&[1.0, 4.0], 0.9);
    // Frozen from a 40-digit bisection of the binary entropy equation.
    let frozen = [0.6839806536763923, 0.3160193463236077];
    for k in 0..2 {
        assert!((p[k] - q[k]).abs() <= 1e-6);
        assert!((p[k] - frozen[k]).abs() <= 1e-6);
        assert!((q[k] - frozen[k]).abs() <= 1e-10);
    }
    match bw {
        Bandwidth::Solved(sigma) => assert!((sigma - 1.393803289612159).abs() <= 1e-5, "{sigma}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn boundary_and_degenerate_rows() {
    let (p, bw) = entropy_normalize(&[0.3, 0.3, 0.3, 0.3], 1.0).unwrap();
    assert_eq!(p, vec![0.25; 4]);
    assert_eq!(bw, Bandwidth::Indeterminate);
    let (p, bw) = entropy_normalize(&[0.0; 4], 2.0).unwrap();
    assert_eq!((p, bw), (vec![0.25; 4], Bandwidth::Indeterminate));
    let (p, bw) = entropy_normalize(&[0.1, 0.5, 0.9, 2.0], 2.0).unwrap();
    assert_eq!((p, bw), (vec![0.25; 4], Bandwidth::Unbounded));
    assert!(matches!(entropy_normalize(&[0.1, 0.5], 1.5), Err(Error::InvalidTarget { .. })));
    assert!(matches!(entropy_normalize(&[0.1, 0.5], 0.0), Err(Error::InvalidTarget { .. })));
}

#[test]
fn thousand_random_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut solved = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=8);
        let scale = 10f64.powi(rng.gen_range(-6..=6));
        let dists: Vec<f64> = if rng.gen_bool(0.1) {
            vec![scale; k]
        } else {
            (0..k).map(|_| scale * rng.gen_range(0.0..1.0)).collect()
        };
        let target = rng.gen_range(0.05..(k as f64).log2());
        let (p, bw) = entropy_normalize(&dists, target).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(p.iter().all(|&x| x >= 0.0));
        match bw {
            Bandwidth::Indeterminate => assert!(p.iter().all(|&x| x == 1.0 / k as f64)),
            Bandwidth::Solved(_) => {
                solved += 1;
                assert!((entropy_bits(&p) - target).abs() <= 1e-4);
            }
            // Ties at the minimum distance floor the reachable entropy.
            Bandwidth::Clamped(_) => assert!(entropy_bits(&p) > target),
            Bandwidth::Unbounded => unreachable!(),
        }
    }
    assert!(solved > 800);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn entropy_falls_with_beta(dists in prop::collection::vec(0.0f64..10.0, 2..8), b1 in 0.0f64..50.0, db in 0.0f64..50.0) {
        let h1 = entropy_bits(&similarity_distribution(&dists, b1));
        let h2 = entropy_bits(&similarity_distribution(&dists, b1 + db));
        prop_assert!(h2 <= h1 + 1e-12);
    }

    #[test]
    fn scale_free(dists in prop::collection::vec(0.0f64..1.0, 3..8), exp in -8i32..8, frac in 0.1f64..0.9) {
        let target = frac * (dists.len() as f64).log2();
        let a = entropy_normalize(&dists, target).unwrap().0;
        let scaled: Vec<f64> = dists.iter().map(|d| d * 10f64.powi(exp)).collect();
        let b = entropy_normalize(&scaled, target).unwrap().0;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
    }
}
