use bico::kg::kg_discrete;
use bico::optim::{lhs_sample, nelder_mead_max, BoxBounds};
use bico::posterior::{update_posterior, SourceDataset, SourceSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lines() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
    })
}

proptest! {
    #[test]
    fn kg_is_nonnegative((a, b) in lines()) {
        prop_assert!(kg_discrete(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn kg_ignores_common_shifts((a, b) in lines(), c in -50.0f64..50.0) {
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        let (k0, k1) = (kg_discrete(&a, &b).unwrap(), kg_discrete(&shifted, &b).unwrap());
        prop_assert!((k0 - k1).abs() <= 1e-9 * (1.0 + k0), "{} vs {}", k0, k1);
    }

    #[test]
    fn kg_scales_with_the_lines((a, b) in lines(), s in 0.01f64..100.0) {
        let sa: Vec<f64> = a.iter().map(|v| v * s).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * s).collect();
        let (k0, k1) = (kg_discrete(&a, &b).unwrap(), kg_discrete(&sa, &sb).unwrap());
        prop_assert!((k1 - s * k0).abs() <= 1e-9 * (1.0 + s * k0));
    }

    #[test]
    fn kg_ignores_line_order((a, b) in lines(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..a.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let (k0, k1) = (kg_discrete(&a, &b).unwrap(), kg_discrete(&pa, &pb).unwrap());
        prop_assert!((k0 - k1).abs() <= 1e-12 * (1.0 + k0));
    }

    #[test]
    fn lhs_stratifies_every_axis(n in 0usize..40, dim in 1usize..4, seed in any::<u64>()) {
        let b = BoxBounds::cube(dim, -5.0, 15.0).unwrap();
        let pts = lhs_sample(n, &b, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(pts.len(), n);
        for d in 0..dim {
            let mut bins: Vec<usize> = pts.iter().map(|p| (((p[d] + 5.0) / 20.0 * n as f64) as usize).min(n - 1)).collect();
            bins.sort();
            prop_assert_eq!(bins, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn simplex_stays_in_the_box(cx in -20.0f64..20.0, cy in -20.0f64..20.0, sx in 0.0f64..1.0, sy in 0.0f64..1.0) {
        let b = BoxBounds::new(vec![(-3.0, 4.0), (0.0, 10.0)]).unwrap();
        let start = [-3.0 + 7.0 * sx, 10.0 * sy];
        let mut f = |p: &[f64]| -((p[0] - cx).powi(2) + (p[1] - cy).powi(2));
        let f0 = f(&start);
        let (x, v) = nelder_mead_max(&mut f, &b, &start, 200);
        prop_assert!(b.contains(&x));
        prop_assert!(v >= f0);
    }

    #[test]
    fn posterior_ignores_observation_order(rs in prop::collection::vec((0usize..2, 0.0f64..100.0), 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let b = BoxBounds::cube(2, 0.0, 100.0).unwrap();
        let specs = [
            SourceSpec { id: 0, target_dim: 0, obs_noise_sq: 4.0, cost: 1.0 },
            SourceSpec { id: 1, target_dim: 1, obs_noise_sq: 9.0, cost: 1.0 },
        ];
        let mut d1 = SourceDataset::new();
        for &(s, r) in &rs {
            d1.push(s, r);
        }
        let mut shuffled = rs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut d2 = SourceDataset::new();
        for &(s, r) in &shuffled {
            d2.push(s, r);
        }
        let (p1, p2) = (update_posterior(&specs, &d1, &b).unwrap(), update_posterior(&specs, &d2, &b).unwrap());
        for a in [[10.0, 20.0], [55.0, 45.0], [99.0, 1.0]] {
            prop_assert!((p1.log_pdf(&a) - p2.log_pdf(&a)).abs() <= 1e-9 * (1.0 + p1.log_pdf(&a).abs()));
        }
    }
}
