use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hpnn_core::classical::build_classical_twin;
use hpnn_core::cvqnn::NetworkShape;
use hpnn_core::datagen::{generate, Dataset, GenSpec};
use hpnn_core::fock::{
    beamsplitter_matrix, displacement_matrix, kerr_matrix, rotation_matrix, squeezing_matrix,
    FockState,
};
use hpnn_core::hybrid::HybridNetwork;
use hpnn_core::model::{Model, NetworkKind, ParamKind};
use hpnn_core::noise::{enob, perturb, sigma_for_enob, NoiseGroup, NoiseLevel, NoiseSpec};
use hpnn_core::report::{run_checksum, summarize, RunRecord, RunStatus};
use hpnn_core::training::{adam_step, AdamState};

fn small_spec(seed: u64, samples: usize) -> GenSpec {
    GenSpec {
        samples,
        train_size: samples * 7 / 10,
        seed,
        ..GenSpec::default()
    }
}

fn hybrid(seed: u64, cutoff: usize) -> HybridNetwork {
    let shape = NetworkShape::new(8, 2, 1, 4, cutoff).unwrap();
    HybridNetwork::new(shape, 0.55, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn in_domain(kind: ParamKind, v: f64) -> bool {
    let (lo, hi) = kind.bounds();
    v.is_finite() && v >= lo && v <= hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enob_round_trip(range in 0.01f64..100.0, bits in 0.1f64..20.0) {
        let sigma = sigma_for_enob(range, bits);
        prop_assert!((enob(range, sigma).unwrap() - bits).abs() <= 1e-12);
    }

    #[test]
    fn gates_unitary_or_contractive(
        a in 0.0f64..1.5,
        phase in 0.0f64..TAU,
        theta in 0.0f64..TAU,
        cutoff in 2usize..9,
    ) {
        prop_assert!(rotation_matrix(phase, cutoff).unwrap().unitarity_defect() < 1e-12);
        prop_assert!(kerr_matrix(a, cutoff).unwrap().unitarity_defect() < 1e-12);
        // Photon number is conserved, so columns with fewer than `cutoff`
        // photons in total keep unit norm; the rest are cut by truncation.
        let bs = beamsplitter_matrix(theta, phase, cutoff).unwrap();
        for col in 0..cutoff * cutoff {
            if col / cutoff + col % cutoff < cutoff {
                prop_assert!((bs.matrix().column(col).norm_squared() - 1.0).abs() < 1e-10);
            }
        }
        for gate in [bs, displacement_matrix(a, phase, cutoff).unwrap(), squeezing_matrix(a, phase, cutoff).unwrap()] {
            let top = gate.matrix().singular_values().max();
            prop_assert!(top <= 1.0 + 1e-10, "singular value {top}");
        }
    }

    #[test]
    fn norm_never_grows(seed in any::<u64>(), x in prop::collection::vec(0.0f64..1.0, 8)) {
        let net = hybrid(seed, 5);
        let state = net.state(&x).unwrap();
        prop_assert!(state.norm_sq() <= 1.0 + 1e-10);
        let vac = FockState::vacuum(1, 6).unwrap();
        let d = vac.apply_one_mode(&displacement_matrix(1.0, 0.3, 6).unwrap(), 0).unwrap();
        prop_assert!(d.norm_sq() <= 1.0 + 1e-12);
    }

    #[test]
    fn predictions_on_simplex(seed in any::<u64>(), x in prop::collection::vec(-1.0f64..2.0, 8)) {
        let h = hybrid(seed, 4);
        let c = build_classical_twin(&h.shape, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for p in [h.predict(&x).unwrap(), c.predict(&x).unwrap()] {
            prop_assert_eq!(p.len(), 4);
            prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimizer_keeps_parameters_in_domain(
        seed in any::<u64>(),
        scale in 0.1f64..1e3,
        lr in 1e-4f64..5.0,
    ) {
        let mut net = hybrid(seed, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut state = AdamState::new(net.num_params());
        for _ in 0..3 {
            let grad: Vec<f64> = (0..net.num_params()).map(|_| scale * (rand::Rng::random::<f64>(&mut rng) - 0.5)).collect();
            adam_step(&mut net, &grad, &mut state, lr).unwrap();
        }
        for (v, s) in net.params().iter().zip(net.param_specs()) {
            prop_assert!(in_domain(s.kind, *v), "{v} outside {:?}", s.kind);
        }
    }

    #[test]
    fn perturb_is_pure_and_in_domain(seed in any::<u64>(), bits in 0.5f64..12.0, realization in 0u64..50) {
        let net = hybrid(seed, 4);
        let before = net.clone();
        let spec = NoiseSpec::uniform(&NoiseGroup::covering(&net), NoiseLevel::Enob(bits));
        let a = perturb(&net, &spec, seed, realization).unwrap();
        let b = perturb(&net, &spec, seed, realization).unwrap();
        prop_assert_eq!(&net, &before);
        prop_assert_eq!(a.params(), b.params());
        for (v, s) in a.params().iter().zip(a.param_specs()) {
            prop_assert!(in_domain(s.kind, *v));
        }
        let zero = NoiseSpec::uniform(&NoiseGroup::covering(&net), NoiseLevel::Sigma(0.0));
        let same = perturb(&net, &zero, seed, realization).unwrap();
        prop_assert_eq!(same.params(), net.params());
    }

    #[test]
    fn checksum_and_fractions_account_for_every_run(
        accs in prop::collection::vec((0.0f64..1.0, any::<bool>(), 0usize..3), 0..40),
        threshold in 0.3f64..0.9,
    ) {
        let shape = NetworkShape::new(8, 2, 1, 4, 5).unwrap();
        let records: Vec<RunRecord> = accs
            .iter()
            .enumerate()
            .map(|(i, (acc, hybrid, size))| RunRecord {
                run_id: format!("run-{i}"),
                kind: if *hybrid { NetworkKind::Hybrid } else { NetworkKind::Classical },
                shape,
                widths: vec![],
                param_count: 100 + size,
                seed: i as u64,
                a_max: None,
                status: RunStatus::Completed,
                best_val_accuracy: *acc,
                best_epoch: 1,
                final_val_accuracy: *acc,
                history: String::new(),
                wall_time_s: 0.0,
                config_hash: String::new(),
            })
            .collect();
        let summary = summarize(&records, threshold);
        prop_assert_eq!(summary.total_runs, records.len());
        prop_assert_eq!(summary.sizes.iter().map(|s| s.runs).sum::<usize>(), records.len());
        for s in &summary.sizes {
            prop_assert!((0.0..=1.0).contains(&s.poorly_trained_fraction));
            prop_assert!(s.failed_fraction <= s.poorly_trained_fraction);
            let poor = (s.poorly_trained_fraction * s.runs as f64).round() as usize;
            prop_assert_eq!(poor + s.well_trained, s.runs);
        }
        let mut reversed = records.clone();
        reversed.reverse();
        prop_assert_eq!(&summary.checksum, &summarize(&reversed, threshold).checksum);
        prop_assert_eq!(&summary.checksum, &run_checksum(records.iter().map(|r| r.run_id.as_str())));
        if let Some(dropped) = records.split_last().map(|(_, rest)| rest) {
            prop_assert_ne!(&summary.checksum, &summarize(dropped, threshold).checksum);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dataset_deterministic_and_normalized(seed in any::<u64>(), per_class in 10usize..75) {
        let spec = small_spec(seed, 4 * per_class);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        prop_assert_eq!(&ca, &cb);
        for j in 0..a.num_features() {
            let col: Vec<f64> = a.features.iter().map(|r| r[j]).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!((lo, hi), (0.0, 1.0));
        }
        prop_assert!(a.labels.iter().all(|l| *l < spec.classes));
        let back = Dataset::read_csv(ca.as_slice(), spec.classes, spec.train_size).unwrap();
        prop_assert_eq!(back, a);
    }
}
