//! Decision-level multimodal intention fusion.
//!
//! Base classifiers report categorical distributions over a finite intention
//! set; a weighted Opinion Pool raises each to a per-modality confidence
//! exponent, multiplies and renormalizes. The confidence exponents are
//! learned from batches of recorded interactions (base distributions plus
//! ground-truth advice) by a constrained primal-dual solver: projected
//! gradient descent for the confidence player against an Exponentiated
//! Gradient dual player enforcing per-modality lower bounds, stopping on the
//! estimated primal-dual gap.
//!
//! The crate also ships a deterministic tabletop interaction simulator
//! (speech-, gesture- and gaze-analog modalities over object scenes), an
//! evaluation/ablation harness, and the file formats used by the `bmclop`
//! command-line tool.

pub mod distributions;
pub mod error;
pub mod io;
pub mod learner;
pub mod loss;
pub mod metrics;
pub mod opinion_pool;
pub mod simulation;

pub use distributions::Categorical;
pub use error::{Error, Result};
pub use learner::{learn, DualVector, GapPoint, LearnConfig, LearnResult};
pub use loss::{Batch, Experience, Meta};
pub use metrics::{MetricsReport, MetricsRow};
pub use opinion_pool::{fuse, ConfidenceVector, ConstraintSpec, PoolKind};
pub use simulation::{ModalityNoise, Object, Scenario};
