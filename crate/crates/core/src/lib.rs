//! Multi-code EMG biometric authentication.
//!
//! Reads WFDB-style recordings, extracts frequency-band log features from
//! sliding windows, enrolls per-(user, gesture) Mahalanobis templates, fuses
//! per-code decisions by weighted majority vote and evaluates verification
//! error rates under within-day and cross-day protocols. A seeded synthetic
//! generator produces datasets in the same on-disk format.

pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod matcher;
pub mod seed;
pub mod synth;

pub use config::RunConfig;
pub use dataset::{DatasetManifest, GridSpec, RecordKey, SignalRecord};
pub use dsp::{ChannelSelection, FdtConfig, FeatureSeries, FeatureVector, WindowSpec};
pub use error::{Error, Result};
pub use eval::{EvalReport, EvalSettings, FeatureBank, ProtocolKind, Scenario};
pub use fusion::{CodeSequence, CodeWeights, FusionDecision};
pub use matcher::{MatchScore, Template, TemplateStore};
pub use synth::{SynthConfig, Synthesizer};
