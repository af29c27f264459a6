//! Personalized rehabilitation-exercise assessment.
//!
//! The pipeline turns skeleton recordings into kinematic features, learns a
//! per-instance feature-acquisition policy with Double Q-learning, predicts the
//! quality of each repetition and explains deviations against the subject's own
//! normal motion.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod feedback;
pub mod geometry;
pub mod kinematics;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod seeding;
pub mod selector;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use kinematics::{extract_features, FeatureConfig, FeatureTable, FeatureVector, NormParams};
pub use metrics::f1_score;
pub use motion::{parse_dataset, split_by_subject, validate_repetition, Dataset, Exercise, JointName, MotionRepetition, Side};
pub use nn::{Checkpoint, MlpModel, TrainConfig};
pub use synth::{synth_dataset, synth_repetition, CorpusSpec, ImpairmentSpec};
