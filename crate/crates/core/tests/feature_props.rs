use mgnet::features::{
    asym_features, differential_entropy, double_fold, equal_bands, standard_scale, FeatureConfig, FeatureExtractor,
    FeatureKind, FeatureTensor, MontagePairs,
};
use mgnet::graph::Montage2D;
use mgnet::ingest::Trial;
use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sample_variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[test]
fn unit_gaussian_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
    let de = differential_entropy(&x);
    let closed = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sample_variance(&x)).ln();
    assert!((de - closed).abs() < 1e-9);
    assert!((de - 1.4189).abs() < 0.02, "{de}");
}

#[test]
fn white_noise_bands_are_flat() {
    let extractor = FeatureExtractor::new(250.0, &FeatureConfig::default(), FeatureKind::De, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut mean = [0.0f64; 11];
    for _ in 0..100 {
        let trial = Trial {
            samples: Array2::from_shape_simple_fn((1, 1125), || normal.sample(&mut rng)),
            label: 0,
            subject_id: 1,
        };
        let f = extractor.extract(&trial).unwrap();
        for (b, m) in mean.iter_mut().enumerate() {
            *m += f.values.slice(ndarray::s![0, b, ..]).mean().unwrap() / 100.0;
        }
    }
    let lo = mean.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= 0.3, "band DE spread {} over {mean:?}", hi - lo);
}

#[test]
fn asm_width_is_dasm_plus_rasm() {
    let names: Vec<String> = Montage2D::IV2A_CHANNELS.iter().map(|s| s.to_string()).collect();
    let pairs = MontagePairs::from_channel_names(&names).unwrap();
    let de = Array3::from_shape_fn((22, 11, 9), |(n, b, t)| 1.0 + ((n * 13 + b * 5 + t) as f64 * 0.1).sin());
    let width = |k| asym_features(de.view(), &pairs, k).unwrap().dim().1;
    assert_eq!(width(FeatureKind::Asm), width(FeatureKind::Dasm) + width(FeatureKind::Rasm));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn de_ignores_shifts(x in proptest::collection::vec(-100.0f64..100.0, 8..200), c in -1e3f64..1e3) {
        prop_assume!(sample_variance(&x) > 1e-3);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!((differential_entropy(&x) - differential_entropy(&shifted)).abs() < 1e-9);
    }

    #[test]
    fn de_scale_law(x in proptest::collection::vec(-100.0f64..100.0, 8..200), a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        prop_assume!(sample_variance(&x) > 1e-3);
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let d = differential_entropy(&scaled) - differential_entropy(&x);
        prop_assert!((d - a.abs().ln()).abs() < 1e-9);
    }

    #[test]
    fn fold_keeps_every_value(n in 1usize..5, f in 1usize..6, t in 1usize..4, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = Array3::from_shape_simple_fn((n, f, t), || normal.sample(&mut rng));
        let y = double_fold(x.view(), f).unwrap();
        prop_assert_eq!(y.dim(), (n, 2 * f, t));
        prop_assert_eq!(y.slice(ndarray::s![.., ..f, ..]), x.view());
        prop_assert_eq!(y.slice(ndarray::s![.., f.., ..]), x.view());
    }

    #[test]
    fn scaler_standardizes_training_cells(n_trials in 2usize..8, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(3.0, 2.5).unwrap();
        let tensors: Vec<FeatureTensor> = (0..n_trials)
            .map(|_| FeatureTensor {
                values: Array3::from_shape_simple_fn((3, 4, 2), || normal.sample(&mut rng)),
                kind: FeatureKind::De,
            })
            .collect();
        let (scaled, _) = standard_scale(&tensors).unwrap();
        for node in 0..3 {
            for feat in 0..4 {
                let cell: Vec<f64> = scaled
                    .iter()
                    .flat_map(|s| s.values.slice(ndarray::s![node, feat, ..]).to_vec())
                    .collect();
                let m = cell.iter().sum::<f64>() / cell.len() as f64;
                let var = cell.iter().map(|v| (v - m).powi(2)).sum::<f64>() / cell.len() as f64;
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((var - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn band_partition_covers_range() {
    let b = equal_bands(4.0, 40.0, 11);
    assert_eq!(b.len(), 11);
    assert_eq!(b[0].0, 4.0);
    assert!((b[10].1 - 40.0).abs() < 1e-12);
}
