//! Benchmark engine for continual object recognition on temporally coherent
//! feature streams.
//!
//! The crate models the setting where a recognition system receives its
//! training data as an ordered sequence of batches instead of one monolithic
//! set: new video-like sequences of known objects ([`scenarios::Scenario::Ni`]),
//! whole new objects ([`scenarios::Scenario::Nc`]), or both at once
//! ([`scenarios::Scenario::Nic`]). A linear softmax head over precomputed,
//! frozen feature vectors is trained under one of five strategies, from
//! naive continued training to a two-memory consolidation scheme, and
//! evaluated on a fixed test set after every batch.
//!
//! Modules, bottom up:
//!
//! - [`stream`]: the labeled feature-stream data model, a synthetic
//!   generator and a plain-text ingestion format;
//! - [`head`]: the linear softmax classifier and its SGD trainer;
//! - [`strategies`]: naive, cumulative, cwr, cw and fw batch strategies;
//! - [`scenarios`]: batch schedules and multi-run experiment orchestration;
//! - [`eval`]: accuracy protocols, the rejection option and temporal fusion.
//!
//! Everything is deterministic: results are a pure function of the seeds in
//! the configuration structs, independent of thread count.
//!
//! ```
//! use std::collections::BTreeSet;
//! use continual::eval::{EvalProtocol, Level, ProtocolKind};
//! use continual::head::TrainConfig;
//! use continual::scenarios::{run_experiment, RunConfig, Scenario};
//! use continual::strategies::StrategyKind;
//! use continual::stream::{generate_synthetic_stream, split_train_test, SyntheticStreamConfig};
//!
//! let data = generate_synthetic_stream(&SyntheticStreamConfig {
//!     num_classes: 10,
//!     num_categories: 5,
//!     num_sessions: 3,
//!     frames_per_sequence: 10,
//!     feature_dim: 8,
//!     ..SyntheticStreamConfig::default()
//! })?;
//! let test_sessions: BTreeSet<usize> = [3].into_iter().collect();
//! let (train, test) = split_train_test(&data, &test_sessions)?;
//!
//! let result = run_experiment(
//!     &train,
//!     &test,
//!     Scenario::Nc,
//!     StrategyKind::Cwr,
//!     &TrainConfig { epochs: 3, ..TrainConfig::default() },
//!     &RunConfig { num_runs: 2, ..RunConfig::default() },
//!     &EvalProtocol { kind: ProtocolKind::FullTestSet, level: Level::Object },
//! )?;
//! assert_eq!(result.mean.len(), 9);
//! # Ok::<(), continual::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod head;
pub mod scenarios;
pub mod strategies;
pub mod stream;
mod util;

pub use error::{Error, Result};
