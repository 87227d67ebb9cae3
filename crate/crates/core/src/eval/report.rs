use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::det::{quantile_sorted, DetPoint};
use super::protocol::{ProtocolKind, Scenario, SkipNote};
use super::runner::{evaluate_selection, evaluation_sequences, SelectionOutcome};
use super::{EvalSettings, FeatureBank, Weighting};
use crate::dataset::DatasetManifest;
use crate::error::{io_err, Error, Result};
use crate::fusion::CodeSequence;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quartiles with linear interpolation between order statistics
/// (`h = (n - 1) p`). `None` for an empty slice.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEer {
    pub subject: u16,
    /// Mean of the subject's fold EERs.
    pub eer: f64,
    pub folds: usize,
}

/// Cohort result of one (protocol, scenario, selection, codelength).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub protocol: ProtocolKind,
    pub scenario: Scenario,
    pub selection: String,
    pub codelength: usize,
    pub subjects: Vec<SubjectEer>,
    pub quartiles: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureAccuracy {
    pub protocol: ProtocolKind,
    pub selection: String,
    pub accuracy: BTreeMap<u16, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubject {
    pub selection: String,
    #[serde(flatten)]
    pub note: SkipNote,
}

/// Mean fused DET curve of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub protocol: ProtocolKind,
    pub scenario: Scenario,
    pub selection: String,
    pub codelength: usize,
    pub points: Vec<DetPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub settings: EvalSettings,
    pub assumptions: Vec<String>,
    pub sequences: Vec<CodeSequence>,
    pub gesture_accuracy: Vec<GestureAccuracy>,
    pub results: Vec<ConfigResult>,
    pub skipped: Vec<SkippedSubject>,
    pub warnings: Vec<String>,
    /// Written to `det_curves.csv` only.
    #[serde(skip)]
    pub curves: Vec<MeanCurve>,
}

fn assumptions(settings: &EvalSettings) -> Vec<String> {
    let mut a = vec![
        "each subject's EER uses every other subject of the fold cohort as impostors".to_string(),
        "a subject's EER is the mean of its fold EERs; cohort quartiles interpolate linearly between order statistics".into(),
        "cumulative cross-day enrollment takes half of the remaining trial indices from each enrollment day, rotating with the held-out trial".into(),
        "one sweep level maps to per-template thresholds through quantiles of every fold score against that template".into(),
        "codelength M uses the first M codes of each sequence".into(),
        "normal-scenario impostor sequences differ from the genuine prefix as a whole; single positions may coincide".into(),
    ];
    a.push(match settings.weighting {
        Weighting::Accuracy => {
            "fusion weights are 1 - single-code EER of each gesture on the enrollment trials, averaged over days".into()
        }
        Weighting::Uniform => "fusion weights are uniform".into(),
    });
    a
}

/// Reduce per-fold outcomes to the per-subject table and cohort quartiles.
pub fn summarize(
    config_hash: &str,
    settings: &EvalSettings,
    sequences: &[CodeSequence],
    outcomes: &[SelectionOutcome],
    warnings: Vec<String>,
) -> EvalReport {
    let mut results = Vec::new();
    let mut curves = Vec::new();
    let mut gesture_accuracy = Vec::new();
    let mut skipped = Vec::new();
    let mut all_warnings = warnings;
    for o in outcomes {
        gesture_accuracy.push(GestureAccuracy {
            protocol: o.protocol,
            selection: o.selection.clone(),
            accuracy: o.gesture_accuracy.clone(),
        });
        for note in &o.skipped {
            skipped.push(SkippedSubject {
                selection: o.selection.clone(),
                note: note.clone(),
            });
        }
        all_warnings.extend(o.warnings.iter().cloned());
        for (&(scenario, m), per_subject) in &o.fold_eers {
            let subjects: Vec<SubjectEer> = per_subject
                .iter()
                .map(|(&subject, eers)| SubjectEer {
                    subject,
                    eer: eers.iter().sum::<f64>() / eers.len() as f64,
                    folds: eers.len(),
                })
                .collect();
            let values: Vec<f64> = subjects.iter().map(|s| s.eer).collect();
            let Some(q) = quartiles(&values) else { continue };
            results.push(ConfigResult {
                protocol: o.protocol,
                scenario,
                selection: o.selection.clone(),
                codelength: m,
                subjects,
                quartiles: q,
            });
        }
        for (&(scenario, m), pts) in &o.mean_curves {
            curves.push(MeanCurve {
                protocol: o.protocol,
                scenario,
                selection: o.selection.clone(),
                codelength: m,
                points: pts
                    .iter()
                    .map(|&(threshold, far, frr)| DetPoint { threshold, far, frr })
                    .collect(),
            });
        }
    }
    EvalReport {
        format_version: REPORT_VERSION,
        config_hash: config_hash.to_string(),
        seed: settings.seed,
        settings: settings.clone(),
        assumptions: assumptions(settings),
        sequences: sequences.to_vec(),
        gesture_accuracy,
        results,
        skipped,
        warnings: all_warnings,
        curves,
    }
}

/// Run every requested protocol on every feature bank and summarize.
pub fn evaluate(
    manifest: &DatasetManifest,
    banks: &[FeatureBank],
    settings: &EvalSettings,
    config_hash: &str,
) -> Result<EvalReport> {
    settings.validate()?;
    let sequences = evaluation_sequences(manifest, settings)?;
    let mut outcomes = Vec::new();
    for &kind in &settings.protocols {
        for bank in banks {
            log::info!("evaluating {kind} on {}", bank.selection);
            outcomes.push(evaluate_selection(kind, manifest, bank, settings, &sequences)?);
        }
    }
    Ok(summarize(
        config_hash,
        settings,
        &sequences,
        &outcomes,
        manifest.warnings.clone(),
    ))
}

impl EvalReport {
    pub fn result(
        &self,
        protocol: ProtocolKind,
        scenario: Scenario,
        selection: &str,
        codelength: usize,
    ) -> Option<&ConfigResult> {
        self.results.iter().find(|r| {
            r.protocol == protocol
                && r.scenario == scenario
                && r.selection == selection
                && r.codelength == codelength
        })
    }

    pub fn median(&self, protocol: ProtocolKind, scenario: Scenario, selection: &str, codelength: usize) -> Option<f64> {
        self.result(protocol, scenario, selection, codelength)
            .map(|r| r.quartiles.median)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    fn stamp(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    /// Per-subject EER table: one row per subject and scenario, one column per
    /// protocol, uni/multi code and channel selection, followed by the
    /// cohort Q1, median and Q3 rows.
    pub fn eer_table_csv(&self) -> String {
        let mut selections: Vec<&str> = Vec::new();
        for r in &self.results {
            if !selections.contains(&r.selection.as_str()) {
                selections.push(&r.selection);
            }
        }
        let lengths = &self.settings.codelengths;
        let max_m = lengths.iter().copied().max().unwrap_or(1);
        let mut modes: Vec<(&str, usize)> = Vec::new();
        if lengths.contains(&1) {
            modes.push(("Uni", 1));
        }
        if max_m > 1 {
            modes.push(("Multi", max_m));
        }
        let mut columns = Vec::new();
        for &p in &self.settings.protocols {
            for &(label, m) in &modes {
                for &sel in &selections {
                    columns.push((format!("{}-{label}-{sel}", p.short()), p, m, sel));
                }
            }
        }

        let mut out = self.stamp();
        out.push_str("scenario,subject");
        for c in &columns {
            let _ = write!(out, ",{}", c.0);
        }
        out.push('\n');
        for &scenario in &self.settings.scenarios {
            let cells: Vec<Option<&ConfigResult>> = columns
                .iter()
                .map(|&(_, p, m, sel)| self.result(p, scenario, sel, m))
                .collect();
            let subjects: BTreeSet<u16> = cells
                .iter()
                .flatten()
                .flat_map(|r| r.subjects.iter().map(|s| s.subject))
                .collect();
            for j in subjects {
                let _ = write!(out, "{scenario},{j}");
                for cell in &cells {
                    match cell.and_then(|r| r.subjects.iter().find(|s| s.subject == j)) {
                        Some(s) => {
                            let _ = write!(out, ",{:.6}", s.eer);
                        }
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
            for (label, pick) in [
                ("Q1", (|q: &Quartiles| q.q1) as fn(&Quartiles) -> f64),
                ("M", |q| q.median),
                ("Q3", |q| q.q3),
            ] {
                let _ = write!(out, "{scenario},{label}");
                for cell in &cells {
                    match cell {
                        Some(r) => {
                            let _ = write!(out, ",{:.6}", pick(&r.quartiles));
                        }
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Mean fused DET curves, one row per (configuration, sweep level).
    pub fn det_curves_csv(&self) -> String {
        let mut out = self.stamp();
        out.push_str("protocol,scenario,selection,codelength,level,far,frr\n");
        for c in &self.curves {
            for p in &c.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{:.6},{:.6}",
                    c.protocol, c.scenario, c.selection, c.codelength, p.threshold, p.far, p.frr
                );
            }
        }
        out
    }

    /// Write `report.json`, `eer_table.csv` and `det_curves.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, body) in [
            ("report.json", self.to_json()?),
            ("eer_table.csv", self.eer_table_csv()),
            ("det_curves.csv", self.det_curves_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Load a `report.json`. Curves are not part of the JSON and come back empty.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let report: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        if report.format_version != REPORT_VERSION {
            return Err(Error::Format {
                path: path.into(),
                message: format!("unsupported report version {}", report.format_version),
            });
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_of_small_sets() {
        let q = quartiles(&[0.3, 0.1, 0.2]).unwrap();
        assert_eq!(q.median, 0.2);
        let q = quartiles(&[0.4]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (0.4, 0.4, 0.4));
        assert!(quartiles(&[]).is_none());
    }

    #[test]
    fn quartiles_match_sort_based_oracle() {
        // 43 values in scrambled order
        let v: Vec<f64> = (0..43).map(|i| ((i * 17) % 43) as f64 / 100.0).collect();
        let q = quartiles(&v).unwrap();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        // h = 42 p lands on integers for p = 0.25, 0.5, 0.75 only when 42p is whole
        let oracle = |p: f64| {
            let h = 42.0 * p;
            let lo = h.floor() as usize;
            s[lo] + (h - lo as f64) * (s[(lo + 1).min(42)] - s[lo])
        };
        assert!((q.q1 - oracle(0.25)).abs() < 1e-12);
        assert!((q.median - s[21]).abs() < 1e-12);
        assert!((q.q3 - oracle(0.75)).abs() < 1e-12);
    }

    fn outcome() -> SelectionOutcome {
        let mut fold_eers = BTreeMap::new();
        let mut per = BTreeMap::new();
        per.insert(1u16, vec![0.1, 0.3]);
        per.insert(2u16, vec![0.0]);
        fold_eers.insert((Scenario::Normal, 1), per.clone());
        fold_eers.insert((Scenario::Normal, 6), per);
        SelectionOutcome {
            protocol: ProtocolKind::WithinDay,
            selection: "forearm".into(),
            gesture_accuracy: [(1u16, 0.9)].into_iter().collect(),
            fold_eers,
            mean_curves: BTreeMap::from([(
                (Scenario::Normal, 1),
                vec![(0.0, 0.0, 1.0), (1.0, 1.0, 0.0)],
            )]),
            skipped: vec![SkipNote {
                subject: 5,
                protocol: ProtocolKind::WithinDay,
                day: 2,
                reason: "missing x".into(),
            }],
            warnings: vec![],
        }
    }

    #[test]
    fn summary_tables() {
        let settings = EvalSettings {
            protocols: vec![ProtocolKind::WithinDay],
            scenarios: vec![Scenario::Normal],
            codelengths: vec![1, 6],
            ..EvalSettings::default()
        };
        let r = summarize("h", &settings, &[], &[outcome()], vec!["w".into()]);
        let c = r.result(ProtocolKind::WithinDay, Scenario::Normal, "forearm", 1).unwrap();
        assert_eq!(c.subjects[0].eer, 0.2);
        assert_eq!(c.subjects[0].folds, 2);
        assert!((c.quartiles.median - 0.1).abs() < 1e-15);
        assert_eq!(r.skipped[0].note.subject, 5);

        let table = r.eer_table_csv();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "# config_hash=h seed=0");
        assert_eq!(lines[1], "scenario,subject,WD-Uni-forearm,WD-Multi-forearm");
        assert_eq!(lines[2], "normal,1,0.200000,0.200000");
        assert_eq!(lines[4], "normal,Q1,0.050000,0.050000");
        assert_eq!(lines.len(), 7);

        let curves = r.det_curves_csv();
        assert!(curves.contains("within_day,normal,forearm,1,1.000000,1.000000,0.000000"));

        let json = r.to_json().unwrap();
        assert!(json.contains("\"skipped\""));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.results, r.results);
    }
}
