use mgnet::ingest::{
    bandpass_filter, load_dataset, save_dataset, window_len, window_trial, Trial, TrialSet,
};
use ndarray::Array2;
use proptest::prelude::*;

fn set_from(values: Vec<f32>, n_trials: usize, n_ch: usize, n_samp: usize, labels: Vec<usize>) -> TrialSet {
    let per = n_ch * n_samp;
    TrialSet {
        trials: (0..n_trials)
            .map(|i| Trial {
                samples: Array2::from_shape_fn((n_ch, n_samp), |(c, t)| {
                    values[i * per + c * n_samp + t] as f64
                }),
                label: labels[i] % 3,
                subject_id: (i % 9) as u32 + 1,
            })
            .collect(),
        fs: 128.0,
        channel_names: (0..n_ch).map(|c| format!("ch{c}")).collect(),
        class_names: vec!["a".into(), "b".into(), "c".into()],
    }
}

fn arb_set() -> impl Strategy<Value = TrialSet> {
    (1usize..5, 2usize..5, 1usize..40).prop_flat_map(|(n_trials, n_ch, n_samp)| {
        (
            proptest::collection::vec(-1e4f32..1e4, n_trials * n_ch * n_samp),
            proptest::collection::vec(0usize..3, n_trials),
        )
            .prop_map(move |(values, labels)| set_from(values, n_trials, n_ch, n_samp, labels))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn load_after_save_is_identity(set in arb_set()) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&set, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn filter_is_linear(
        x in proptest::collection::vec(-50.0f64..50.0, 300),
        y in proptest::collection::vec(-50.0f64..50.0, 300),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let trial = |v: Vec<f64>| Trial { samples: Array2::from_shape_vec((1, 300), v).unwrap(), label: 0, subject_id: 1 };
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fx = bandpass_filter(&trial(x), 4.0, 40.0, 250.0).unwrap().samples;
        let fy = bandpass_filter(&trial(y), 4.0, 40.0, 250.0).unwrap().samples;
        let fm = bandpass_filter(&trial(mix), 4.0, 40.0, 250.0).unwrap().samples;
        let scale = fm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..300 {
            let want = a * fx[[0, i]] + b * fy[[0, i]];
            prop_assert!((fm[[0, i]] - want).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn window_length_is_fixed(fs in prop::sample::select(vec![100.0, 128.0, 160.0, 250.0, 512.0]), extra in 0usize..300) {
        let pre = (0.5f64 * fs).round() as usize;
        let total = pre + window_len(fs) + extra;
        let data = Array2::from_shape_fn((2, total), |(c, t)| (c * total + t) as f64);
        let cue = pre + extra / 2;
        let w = window_trial(&data, cue, fs).unwrap();
        prop_assert_eq!(w.ncols(), (4.5 * fs).round() as usize);
        prop_assert_eq!(w[[0, 0]], (cue - pre) as f64);
    }
}

#[test]
fn ramp_window_starts_before_cue() {
    let ramp = Array2::from_shape_fn((1, 2000), |(_, t)| t as f64);
    let w = window_trial(&ramp, 700, 250.0).unwrap();
    assert_eq!(w[[0, 0]], 575.0);
    assert_eq!(w.ncols(), 1125);
}
