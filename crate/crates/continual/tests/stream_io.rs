//! Generator and file-format properties checked over randomized
//! configurations: exact round trips, determinism, step bounds, and the
//! shared-session-offset structure.

use std::collections::BTreeSet;

use continual::stream::{
    generate_synthetic_stream, load_feature_file, split_train_test, write_feature_file,
    SyntheticStreamConfig,
};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = SyntheticStreamConfig> {
    (1usize..=12).prop_flat_map(|num_classes| {
        (
            Just(num_classes),
            1usize..=num_classes,
            1usize..=4,
            1usize..=5,
            1usize..=8,
            0.05f64..2.0,
            0.0f64..2.0,
            0.0f64..0.5,
            0.0f64..2.0,
            any::<u64>(),
        )
            .prop_map(
                |(c, k, sessions, frames, dim, center, offset, walk, noise, seed)| {
                    SyntheticStreamConfig {
                        num_classes: c,
                        num_categories: k,
                        num_sessions: sessions,
                        frames_per_sequence: frames,
                        feature_dim: dim,
                        class_center_scale: center,
                        session_offset_scale: offset,
                        walk_step_scale: walk,
                        noise_scale: noise,
                        seed,
                    }
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_preserves_every_bit(config in arb_config()) {
        let dataset = generate_synthetic_stream(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.txt");
        write_feature_file(&dataset, &path).unwrap();
        let loaded = load_feature_file(&path).unwrap();
        prop_assert_eq!(&loaded, &dataset);
        for (a, b) in loaded.samples.iter().zip(dataset.samples.iter()) {
            for (x, y) in a.features.iter().zip(b.features.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn generation_depends_only_on_the_config(config in arb_config()) {
        let a = generate_synthetic_stream(&config).unwrap();
        let b = generate_synthetic_stream(&config).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn consecutive_frames_stay_within_the_step_bound(config in arb_config()) {
        let config = SyntheticStreamConfig { noise_scale: 0.0, ..config };
        let dataset = generate_synthetic_stream(&config).unwrap();
        for indices in dataset.sequence_map().values() {
            for pair in indices.windows(2) {
                let prev = &dataset.samples[pair[0]].features;
                let next = &dataset.samples[pair[1]].features;
                for (a, b) in prev.iter().zip(next.iter()) {
                    prop_assert!((a - b).abs() <= config.walk_step_scale + 1e-12);
                }
            }
        }
    }

    #[test]
    fn session_offsets_are_shared_across_classes(config in arb_config()) {
        let config = SyntheticStreamConfig {
            num_sessions: 3,
            frames_per_sequence: 1,
            walk_step_scale: 0.0,
            noise_scale: 0.0,
            ..config
        };
        let dataset = generate_synthetic_stream(&config).unwrap();
        let map = dataset.sequence_map();
        let frame = |class: usize, session: usize| -> &[f64] {
            let indices = &map[&(class, session)];
            &dataset.samples[indices[0]].features
        };
        // With the walk and noise off, the session-2 minus session-1
        // difference is the same offset vector no matter the class.
        let reference: Vec<f64> = frame(0, 2)
            .iter()
            .zip(frame(0, 1))
            .map(|(a, b)| a - b)
            .collect();
        for class in 1..config.num_classes {
            for ((a, b), want) in frame(class, 2).iter().zip(frame(class, 1)).zip(&reference) {
                prop_assert!((a - b - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn split_partitions_by_session(config in arb_config(), held_out in 1usize..=4) {
        let config = SyntheticStreamConfig { num_sessions: 4, ..config };
        let dataset = generate_synthetic_stream(&config).unwrap();
        let test_sessions: BTreeSet<usize> = [held_out].into_iter().collect();
        let (train, test) = split_train_test(&dataset, &test_sessions).unwrap();
        prop_assert_eq!(train.len() + test.len(), dataset.len());
        prop_assert!(train.samples.iter().all(|s| s.session != held_out));
        prop_assert!(test.samples.iter().all(|s| s.session == held_out));
        prop_assert_eq!(train.num_classes, dataset.num_classes);
        prop_assert_eq!(test.feature_dim, dataset.feature_dim);
        prop_assert_eq!(&train.class_to_category, &dataset.class_to_category);
    }
}
