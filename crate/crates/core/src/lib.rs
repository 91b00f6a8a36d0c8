//! Online continual learning under synthetic-data contamination.
//!
//! The crate bundles:
//!
//! * [`data`]: class-directory datasets, contamination with synthetic twins,
//!   class- and domain-incremental task splits, one-pass streams and the
//!   partial / full augmentation policies;
//! * [`model`]: the learner (feature extractor, 128-d projection head,
//!   classifier) and the prediction-entropy criterion;
//! * [`buffer`]: the entropy-selection replay buffer together with reservoir
//!   and provenance-oracle baselines;
//! * [`objectives`]: the entropy split, the group matching loss, its
//!   four-term real-synthetic similarity sum, self-distillation and the
//!   combined objective;
//! * [`trainer`]: the online loop;
//! * [`metrics`]: final/learning accuracy, relative forgetting, entropy
//!   histograms, ROC-AUC of entropy as a real-vs-synthetic score and
//!   embedding export;
//! * [`experiment`]: configuration, seeded batteries, result records and
//!   plot artifacts.
//!
//! The `book/` directory at the repository root walks through each piece
//! with runnable snippets; they are compiled as doc-tests of this crate.

pub mod buffer;
pub mod data;
mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/contamination.md")]
    mod contamination {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
