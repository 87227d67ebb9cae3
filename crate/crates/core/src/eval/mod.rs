//! Evaluation protocols, score pools and DET/EER reduction.

mod det;
mod protocol;
mod report;
mod runner;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, RecordKey, SignalRecord};
use crate::dsp::{extract_series, ChannelSelection, FdtConfig, FeatureSeries, WindowSpec};
use crate::error::{Error, Result};
use crate::matcher::AttemptAggregate;

pub use det::{
    acceptance_index, crossing_index, curve_from_acceptance, det_from_pools, equal_error_rate,
    fused_det, fused_det_calibrated, quantile_sorted, DetCurve, DetPoint, ScorePool, SweepGrid,
};
pub use protocol::{
    code_gestures, fold_plan, Fold, FoldPlan, ProtocolKind, ProtocolSpec, Scenario, SkipNote,
    TrialRef,
};
pub use report::{
    evaluate, quartiles, summarize, ConfigResult, EvalReport, GestureAccuracy, MeanCurve,
    Quartiles, SkippedSubject, SubjectEer, REPORT_VERSION,
};
pub use runner::{
    collect_scores, evaluate_selection, evaluation_sequences, gesture_accuracy, CodeScorePools,
    FoldScores, SelectionOutcome,
};

/// How fusion weights are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `1 - EER` of each gesture on enrollment data, averaged over days.
    #[default]
    Accuracy,
    Uniform,
}

/// Knobs shared by every protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub protocols: Vec<ProtocolKind>,
    pub scenarios: Vec<Scenario>,
    pub codelengths: Vec<usize>,
    pub sequence_count: usize,
    pub seed: u64,
    pub shrinkage: f64,
    pub aggregate: AttemptAggregate,
    /// Interior levels of the fused sweep grid.
    pub sweep_levels: usize,
    pub weighting: Weighting,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            protocols: ProtocolKind::ALL.to_vec(),
            scenarios: Scenario::ALL.to_vec(),
            codelengths: (1..=6).collect(),
            sequence_count: 50,
            seed: 0,
            shrinkage: 0.01,
            aggregate: AttemptAggregate::Mean,
            sweep_levels: 512,
            weighting: Weighting::Accuracy,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        for &kind in &self.protocols {
            for &scenario in &self.scenarios {
                ProtocolSpec {
                    kind,
                    selection: String::new(),
                    codelengths: self.codelengths.clone(),
                    scenario,
                    rng_seed: self.seed,
                    sequence_count: self.sequence_count,
                }
                .validate()?;
            }
        }
        if self.protocols.is_empty() || self.scenarios.is_empty() {
            return Err(Error::Config("no protocol or scenario selected".into()));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::Config(format!("shrinkage {} outside [0, 1]", self.shrinkage)));
        }
        if self.sweep_levels == 0 || self.sweep_levels > 8192 {
            return Err(Error::Config("sweep_levels must be in 1..=8192".into()));
        }
        Ok(())
    }
}

/// Feature series of every record for one channel selection.
#[derive(Debug, Clone, Default)]
pub struct FeatureBank {
    pub selection: String,
    series: BTreeMap<RecordKey, FeatureSeries>,
}

impl FeatureBank {
    pub fn new(selection: impl Into<String>) -> Self {
        Self {
            selection: selection.into(),
            series: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, series: FeatureSeries) {
        self.series.insert(series.key, series);
    }

    pub fn get(&self, key: &RecordKey) -> Result<&FeatureSeries> {
        self.series
            .get(key)
            .ok_or_else(|| Error::Missing(format!("features for {key}")))
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Extract features for the given keys in parallel, loading each record
    /// through `load`.
    pub fn extract<F>(
        keys: &[RecordKey],
        selection: &ChannelSelection,
        window: &WindowSpec,
        fdt: &FdtConfig,
        load: F,
    ) -> Result<Self>
    where
        F: Fn(&RecordKey) -> Result<SignalRecord> + Sync,
    {
        let series: Vec<FeatureSeries> = keys
            .par_iter()
            .map(|k| {
                let rec = load(k)?;
                extract_series(&rec, selection, window, fdt)
            })
            .collect::<Result<_>>()?;
        let mut bank = Self::new(selection.name.clone());
        series.into_iter().for_each(|s| bank.insert(s));
        Ok(bank)
    }

    /// Keys of the manifest that evaluation needs: every code gesture.
    pub fn needed_keys(manifest: &DatasetManifest) -> Vec<RecordKey> {
        let gestures = code_gestures(manifest);
        manifest
            .keys()
            .filter(|k| gestures.contains(&k.gesture))
            .collect()
    }
}
