//! Release gate for the benchmark engine.
//!
//! Each test checks one numbered criterion and prints a single
//! `criterion N PASS/FAIL: ...` line with the measured values (visible with
//! `cargo test --test acceptance -- --nocapture`). The experiment criteria
//! run the full default stream shape and take a few minutes on one core.

use std::collections::BTreeSet;
use std::fs;
use std::process::Command;

use continual::eval::{
    roc_sweep, temporal_fuse, temporal_fuse_predictions, EvalProtocol, FusionConfig, Level,
    ProtocolKind,
};
use continual::head::{forward, init_head, loss_and_gradient, predict, sgd_train, TrainConfig};
use continual::scenarios::{
    make_nc_schedule, make_ni_schedule, make_nic_schedule, run_experiment, RunConfig, Scenario,
};
use continual::strategies::{cwr_consolidate, new_store, StrategyKind};
use continual::stream::{
    generate_synthetic_stream, load_feature_file, split_train_test, write_feature_file,
    FeatureDataset, FrameSample, SyntheticStreamConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(criterion: usize, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} {verdict}: {detail}");
    assert!(pass, "criterion {criterion} {verdict}: {detail}");
}

/// Default stream shape split on the default test sessions {3, 7, 10}.
fn default_split(config: &SyntheticStreamConfig) -> (FeatureDataset, FeatureDataset) {
    let data = generate_synthetic_stream(config).expect("default shape generates");
    let sessions: BTreeSet<usize> = [3, 7, 10].into_iter().collect();
    split_train_test(&data, &sessions).expect("default split")
}

/// Mean final-batch accuracy over 10 runs on the full test set.
fn final_mean(
    train: &FeatureDataset,
    test: &FeatureDataset,
    scenario: Scenario,
    strategy: StrategyKind,
    cumulative_runs_override: Option<usize>,
) -> f64 {
    let result = run_experiment(
        train,
        test,
        scenario,
        strategy,
        &TrainConfig::default(),
        &RunConfig {
            num_runs: 10,
            base_seed: 0,
            cumulative_runs_override,
        },
        &EvalProtocol {
            kind: ProtocolKind::FullTestSet,
            level: Level::Object,
        },
    )
    .expect("experiment runs");
    *result.mean.last().expect("non-empty curve")
}

#[test]
fn criterion_1_schedule_cardinalities_on_the_default_shape() {
    let config = SyntheticStreamConfig {
        frames_per_sequence: 1,
        feature_dim: 1,
        ..SyntheticStreamConfig::default()
    };
    let (train, _) = default_split(&config);

    let ni = make_ni_schedule(&train, 7).expect("ni schedule");
    let nc = make_nc_schedule(&train, 7).expect("nc schedule");
    let nic = make_nic_schedule(&train, 7).expect("nic schedule");

    let nc_sizes: Vec<usize> = nc.batches.iter().map(|b| b.classes.len()).collect();
    let nic_pairs: BTreeSet<(usize, usize)> = nic
        .batches
        .iter()
        .flat_map(|b| b.sequences.iter().map(|s| (s.object_class, s.session)))
        .collect();
    let nic_sequences: usize = nic.batches.iter().map(|b| b.sequences.len()).sum();

    let pass = ni.batches.len() == 8
        && nc.batches.len() == 9
        && nc_sizes == vec![10, 5, 5, 5, 5, 5, 5, 5, 5]
        && nic.batches.len() == 79
        && nic_sequences == 400
        && nic_pairs.len() == 400;
    report(
        1,
        pass,
        &format!(
            "ni {} batches, nc {} batches with class counts {:?}, nic {} batches \
             holding {} sequences over {} distinct (class, session) pairs",
            ni.batches.len(),
            nc.batches.len(),
            nc_sizes,
            nic.batches.len(),
            nic_sequences,
            nic_pairs.len(),
        ),
    );
}

#[test]
fn criterion_2_analytic_gradient_matches_finite_differences() {
    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    for instance in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
        let classes = rng.random_range(2..=6);
        let dim = rng.random_range(1..=8);
        let count = rng.random_range(3..=20);
        let config = TrainConfig {
            init_std: 0.5,
            seed: instance,
            ..TrainConfig::default()
        };
        let head = init_head(classes, dim, &config).expect("head init");
        let samples: Vec<FrameSample> = (0..count)
            .map(|i| FrameSample {
                features: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                object_class: rng.random_range(0..classes),
                category: 0,
                session: 1,
                frame_index: i,
            })
            .collect();
        let (_, grad) = loss_and_gradient(&head, &samples).expect("gradient");

        for class in 0..classes {
            for j in 0..=dim {
                let analytic = if j < dim {
                    grad.weights[[class, j]]
                } else {
                    grad.biases[class]
                };
                let mut plus = head.clone();
                let mut minus = head.clone();
                if j < dim {
                    plus.weights[[class, j]] += h;
                    minus.weights[[class, j]] -= h;
                } else {
                    plus.biases[class] += h;
                    minus.biases[class] -= h;
                }
                let (loss_plus, _) = loss_and_gradient(&plus, &samples).expect("loss at +h");
                let (loss_minus, _) = loss_and_gradient(&minus, &samples).expect("loss at -h");
                let central = (loss_plus - loss_minus) / (2.0 * h);
                let rel = (central - analytic).abs() / analytic.abs().max(central.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
        }
    }
    report(
        2,
        max_rel < 1e-4,
        &format!("max relative gradient error {max_rel:.3e} over 100 random heads (bound 1e-4)"),
    );
}

#[test]
fn criterion_3_consolidation_is_a_running_mean() {
    // First consolidation of a class copies the trained row bit for bit.
    let mut fresh = new_store(3, 2).expect("store");
    fresh.tw.weights[[0, 0]] = 0.25;
    fresh.tw.weights[[0, 1]] = -1.5;
    fresh.tw.biases[0] = 3.0;
    let first: BTreeSet<usize> = [0].into_iter().collect();
    let once = cwr_consolidate(&fresh, &first).expect("first consolidation");
    let copy_exact = once.cw.weights[[0, 0]].to_bits() == fresh.tw.weights[[0, 0]].to_bits()
        && once.cw.weights[[0, 1]].to_bits() == fresh.tw.weights[[0, 1]].to_bits()
        && once.cw.biases[0].to_bits() == fresh.tw.biases[0].to_bits()
        && once.updates == vec![1, 0, 0];

    // (0.4 * 1 + 0.8) / 2 is 0.6 up to one IEEE rounding step: the sum
    // 0.4 + 0.8 is an exact halfway case and rounds to 1.2000000000000002,
    // so the quotient lands one ulp above the closest double to 0.6.
    let mut seen = new_store(1, 1).expect("store");
    seen.cw.weights[[0, 0]] = 0.4;
    seen.tw.weights[[0, 0]] = 0.8;
    seen.updates[0] = 1;
    let all: BTreeSet<usize> = [0].into_iter().collect();
    let merged = cwr_consolidate(&seen, &all).expect("second consolidation");
    let worked_error = (merged.cw.weights[[0, 0]] - 0.6).abs();
    let worked_exact = worked_error <= 1e-15 && merged.updates[0] == 2;

    // Repeated consolidation tracks the arithmetic mean of the snapshots.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.random_range(1..=20);
        let mut store = new_store(2, 3).expect("store");
        let both: BTreeSet<usize> = [0, 1].into_iter().collect();
        let mut sums = [[0.0f64; 4]; 2];
        for _ in 0..k {
            for class in 0..2 {
                for j in 0..3 {
                    let v = rng.random_range(-1.0..1.0);
                    store.tw.weights[[class, j]] = v;
                    sums[class][j] += v;
                }
                let b = rng.random_range(-1.0..1.0);
                store.tw.biases[class] = b;
                sums[class][3] += b;
            }
            store = cwr_consolidate(&store, &both).expect("consolidation");
        }
        for class in 0..2 {
            for j in 0..3 {
                worst = worst.max((store.cw.weights[[class, j]] - sums[class][j] / k as f64).abs());
            }
            worst = worst.max((store.cw.biases[class] - sums[class][3] / k as f64).abs());
        }
    }

    // Classes outside the batch keep their rows and counts untouched.
    let mut partial = new_store(4, 2).expect("store");
    let mut filler = ChaCha8Rng::seed_from_u64(4);
    for class in 0..4 {
        for j in 0..2 {
            partial.cw.weights[[class, j]] = filler.random_range(-1.0..1.0);
            partial.tw.weights[[class, j]] = filler.random_range(-1.0..1.0);
        }
        partial.cw.biases[class] = filler.random_range(-1.0..1.0);
        partial.tw.biases[class] = filler.random_range(-1.0..1.0);
        partial.updates[class] = (class as u64) % 2;
    }
    let subset: BTreeSet<usize> = [1, 3].into_iter().collect();
    let after = cwr_consolidate(&partial, &subset).expect("partial consolidation");
    let untouched = [0usize, 2].iter().all(|&class| {
        (0..2).all(|j| {
            after.cw.weights[[class, j]].to_bits() == partial.cw.weights[[class, j]].to_bits()
        }) && after.cw.biases[class].to_bits() == partial.cw.biases[class].to_bits()
            && after.updates[class] == partial.updates[class]
    });

    let pass = copy_exact && worked_exact && worst <= 1e-9 && untouched;
    report(
        3,
        pass,
        &format!(
            "first consolidation copies bitwise ({copy_exact}), (0.4*1 + 0.8)/2 within \
             {worked_error:.1e} of 0.6 (bound 1e-15, one rounding step), 20 repeated-mean \
             trials within {worst:.2e} of the snapshot mean (bound 1e-9), out-of-batch rows \
             bitwise stable ({untouched})"
        ),
    );
}

#[test]
fn criterion_4_nc_forgetting_and_recovery() {
    let (train, test) = default_split(&SyntheticStreamConfig::default());
    let naive = final_mean(&train, &test, Scenario::Nc, StrategyKind::Naive, None);
    let cwr = final_mean(&train, &test, Scenario::Nc, StrategyKind::Cwr, None);
    let cumulative = final_mean(&train, &test, Scenario::Nc, StrategyKind::Cumulative, None);

    let pass = naive <= 0.25 && cwr >= naive + 0.20 && cumulative >= cwr;
    report(
        4,
        pass,
        &format!(
            "nc final accuracy over 10 runs: naive {naive:.4} (bound <= 0.25), \
             cwr {cwr:.4} (bound >= naive + 0.20), cumulative {cumulative:.4} (bound >= cwr)"
        ),
    );
}

#[test]
fn criterion_5_ni_stays_close_to_cumulative() {
    let config = SyntheticStreamConfig {
        // Session shift at a quarter of the class separation: new sequences
        // of known classes carry little novelty.
        session_offset_scale: 0.15,
        ..SyntheticStreamConfig::default()
    };
    let (train, test) = default_split(&config);
    let naive = final_mean(&train, &test, Scenario::Ni, StrategyKind::Naive, None);
    let cumulative = final_mean(&train, &test, Scenario::Ni, StrategyKind::Cumulative, None);

    let gap = (cumulative - naive).abs();
    report(
        5,
        gap <= 0.10,
        &format!(
            "ni final accuracy over 10 runs: naive {naive:.4}, cumulative {cumulative:.4}, \
             gap {gap:.4} (bound <= 0.10)"
        ),
    );
}

#[test]
fn criterion_6_nic_orders_the_strategies() {
    let (train, test) = default_split(&SyntheticStreamConfig::default());
    let naive = final_mean(&train, &test, Scenario::Nic, StrategyKind::Naive, None);
    let cwr = final_mean(&train, &test, Scenario::Nic, StrategyKind::Cwr, None);
    let cumulative = final_mean(&train, &test, Scenario::Nic, StrategyKind::Cumulative, Some(3));

    let pass = naive < cwr && cwr < cumulative;
    report(
        6,
        pass,
        &format!(
            "nic final accuracy: naive {naive:.4} (10 runs) < cwr {cwr:.4} (10 runs) \
             < cumulative {cumulative:.4} (3 runs)"
        ),
    );
}

#[test]
fn criterion_7_fusion_and_rejection_behavior() {
    let config = SyntheticStreamConfig {
        num_classes: 10,
        num_categories: 5,
        num_sessions: 4,
        frames_per_sequence: 30,
        feature_dim: 16,
        seed: 21,
        ..SyntheticStreamConfig::default()
    };
    let data = generate_synthetic_stream(&config).expect("stream generates");
    let sessions: BTreeSet<usize> = [4].into_iter().collect();
    let (train, test) = split_train_test(&data, &sessions).expect("split");

    let train_config = TrainConfig::default();
    let init = init_head(10, 16, &train_config).expect("head init");
    let (head, _) = sgd_train(&init, &train.samples, &train_config, None).expect("training");

    let mut confidences = Vec::new();
    let mut labels = Vec::new();
    let mut starts = Vec::new();
    let mut frame_predictions = Vec::new();
    for indices in test.sequence_map().values() {
        starts.push(confidences.len());
        for &i in indices {
            let sample = &test.samples[i];
            confidences.push(forward(&head, &sample.features).expect("forward"));
            frame_predictions.push(predict(&head, &sample.features).expect("predict"));
            labels.push(sample.object_class);
        }
    }

    let window_one = temporal_fuse_predictions(
        &confidences,
        &starts,
        &FusionConfig {
            window: 1,
            reset_at_sequence_start: true,
        },
    )
    .expect("window-1 fusion");
    let window_one_exact = window_one == frame_predictions;

    let frame_accuracy = temporal_fuse(
        &confidences,
        &labels,
        &starts,
        &FusionConfig {
            window: 1,
            reset_at_sequence_start: true,
        },
    )
    .expect("frame accuracy");
    let fused_accuracy = temporal_fuse(
        &confidences,
        &labels,
        &starts,
        &FusionConfig {
            window: config.frames_per_sequence,
            reset_at_sequence_start: true,
        },
    )
    .expect("fused accuracy");
    let fusion_helps = fused_accuracy >= frame_accuracy;

    let thresholds: Vec<f64> = (0..=10).map(|t| t as f64 / 10.0).collect();
    let seen: BTreeSet<usize> = (0..10).collect();
    let sweep = roc_sweep(&head, &test, &seen, &thresholds).expect("rejection sweep");
    let monotone = sweep
        .windows(2)
        .all(|w| w[0].rejection_rate <= w[1].rejection_rate);

    let pass = window_one_exact && fusion_helps && monotone;
    report(
        7,
        pass,
        &format!(
            "window-1 fusion equals frame predictions exactly ({window_one_exact}), \
             full-window accuracy {fused_accuracy:.4} >= frame accuracy {frame_accuracy:.4} \
             ({fusion_helps}), rejection rate non-decreasing over {} thresholds ({monotone})",
            sweep.len()
        ),
    );
}

#[test]
fn criterion_8_identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    let mut launched_ok = true;
    for out in [&out_a, &out_b] {
        let status = Command::new(env!("CARGO_BIN_EXE_continual"))
            .args([
                "run",
                "--scenario",
                "nc",
                "--strategy",
                "naive",
                "--runs",
                "2",
                "--synthetic",
                "--out",
            ])
            .arg(out)
            .status()
            .expect("binary launches");
        launched_ok &= status.success();
    }

    let files = ["runs.csv", "aggregate.csv", "head.txt"];
    let identical = launched_ok
        && files.iter().all(|name| {
            matches!(
                (fs::read(out_a.join(name)), fs::read(out_b.join(name))),
                (Ok(a), Ok(b)) if a == b
            )
        });
    report(
        8,
        identical,
        &format!(
            "two runs with identical flags exited cleanly ({launched_ok}) and produced \
             byte-identical {} ({identical})",
            files.join(", ")
        ),
    );
}

#[test]
fn criterion_9_feature_files_round_trip_exactly() {
    let config = SyntheticStreamConfig {
        num_classes: 20,
        num_categories: 10,
        num_sessions: 5,
        frames_per_sequence: 40,
        feature_dim: 32,
        seed: 99,
        ..SyntheticStreamConfig::default()
    };
    let data = generate_synthetic_stream(&config).expect("stream generates");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("features.txt");
    write_feature_file(&data, &path).expect("write");
    let loaded = load_feature_file(&path).expect("load");

    let equal = loaded == data;
    let bits_equal = loaded
        .samples
        .iter()
        .zip(&data.samples)
        .all(|(a, b)| {
            a.features.len() == b.features.len()
                && a.features
                    .iter()
                    .zip(&b.features)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        });
    report(
        9,
        equal && bits_equal,
        &format!(
            "{} samples with {}-dim features round-tripped (struct equality {equal}, \
             feature bits identical {bits_equal})",
            data.samples.len(),
            config.feature_dim
        ),
    );
}
