use num_complex::Complex64;
use proptest::prelude::*;

use adda_core::eval::{proxy_a_distance, MetricsReport};
use adda_core::nn::{layer_backward, layer_forward, softmax, FeatureMap, LayerParams, LayerSpec};
use adda_core::signal::{fft_radix2, make_spectrum, DomainLabel};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(u in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
        let p = softmax(&u);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn max_pool_routes_gradient_to_the_maximum(
        x in prop::collection::vec(-5.0f64..5.0, 24),
        g in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        // 12 positions, 2 channels
        let spec = LayerSpec::MaxPool1D { kernel: 2, stride: 2, channels: 2 };
        let input = FeatureMap::new(x.clone(), 12, 2).unwrap();
        let (y, cache) = layer_forward(&spec, &LayerParams::default(), &input).unwrap();
        for t in 0..6 {
            for c in 0..2 {
                prop_assert_eq!(y.data()[t * 2 + c], x[2 * t * 2 + c].max(x[(2 * t + 1) * 2 + c]));
            }
        }
        let (dx, _) = layer_backward(&spec, &LayerParams::default(), &cache, &FeatureMap::new(g.clone(), 6, 2).unwrap()).unwrap();
        prop_assert!(close(dx.data().iter().sum::<f64>(), g.iter().sum::<f64>(), 1e-12));
        prop_assert_eq!(dx.data().iter().filter(|v| **v != 0.0).count(), g.iter().filter(|v| **v != 0.0).count());
    }

    #[test]
    fn parseval(x in prop::collection::vec(-10.0f64..10.0, 256)) {
        let input: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let spec = fft_radix2(&input).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 256.0;
        prop_assert!(close(time, freq, 1e-6));
    }

    #[test]
    fn spectrum_ignores_signal_scale(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut s = seed | 1;
        let window: Vec<f64> = (0..4096)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let scaled: Vec<f64> = window.iter().map(|v| v * scale).collect();
        let a = make_spectrum(&window, 1, DomainLabel::Source).unwrap();
        let b = make_spectrum(&scaled, 1, DomainLabel::Source).unwrap();
        for (p, q) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn precision_and_recall_are_fractions(pairs in prop::collection::vec((1usize..=5, 1usize..=5), 1..200)) {
        let r = MetricsReport::from_pairs(5, pairs.iter().copied()).unwrap();
        prop_assert!(r.precision.iter().chain(&r.recall).all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(r.confusion.iter().flatten().sum::<u64>(), pairs.len() as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn divergence_ignores_sample_order(
        a in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 30),
        b in prop::collection::vec(prop::collection::vec(-2.0f64..4.0, 4), 30),
        perm in Just((0..30).collect::<Vec<usize>>()).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        let pa: Vec<Vec<f64>> = perm.iter().map(|&i| a[i].clone()).collect();
        let pb: Vec<Vec<f64>> = perm.iter().map(|&i| b[i].clone()).collect();
        let d1 = proxy_a_distance(&a, &b, 0.5, seed).unwrap();
        let d2 = proxy_a_distance(&pa, &pb, 0.5, seed).unwrap();
        prop_assert_eq!(d1, d2);
    }
}
