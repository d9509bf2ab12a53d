//! Quantitative-MRI stratification toolkit: volume I/O, regional feature
//! extraction, classical learners, cross-validated model selection, feature
//! subset search, and a synthetic cohort generator.

pub mod error;
pub mod features;
pub mod learners;
pub mod metrics;
pub mod modelsel;
pub mod rng;
pub mod subset;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use modelsel::{CvOptions, Grid, ModelReport, Task};
pub use subset::{FeaturePool, SubsetOptions, SubsetSearchReport};
pub use synth::{Cohort, CohortConfig, CohortMode};
pub use features::{ClassLabel, FeatureMatrix, Normalization, RoiStats, SubjectVector};
pub use learners::{DataView, HyperMap, HyperValue, LearnerKind, LearnerSpec, TrainedModel};
pub use metrics::{RocCurve, ScoreSet};
pub use volume::{LabelMap, MapIntent, Volume};
