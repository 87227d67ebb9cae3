use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, RecordKey, REST_GESTURE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    WithinDay,
    SingleCrossDay,
    CumulativeCrossDay,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [
        ProtocolKind::WithinDay,
        ProtocolKind::SingleCrossDay,
        ProtocolKind::CumulativeCrossDay,
    ];

    /// Column prefix used in result tables.
    pub fn short(self) -> &'static str {
        match self {
            ProtocolKind::WithinDay => "WD",
            ProtocolKind::SingleCrossDay => "SCD",
            ProtocolKind::CumulativeCrossDay => "CCD",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::WithinDay => "within_day",
            ProtocolKind::SingleCrossDay => "single_cross_day",
            ProtocolKind::CumulativeCrossDay => "cumulative_cross_day",
        })
    }
}

/// Whether the impostor knows the genuine code sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Impostor presents a different random sequence.
    Normal,
    /// Impostor performs the genuine sequence.
    Leaked,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Normal, Scenario::Leaked];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Normal => "normal",
            Scenario::Leaked => "leaked",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub selection: String,
    pub codelengths: Vec<usize>,
    pub scenario: Scenario,
    pub rng_seed: u64,
    pub sequence_count: usize,
}

impl ProtocolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.codelengths.is_empty()
            || self
                .codelengths
                .iter()
                .any(|&m| !(1..=crate::fusion::MAX_CODELENGTH).contains(&m))
        {
            return Err(Error::Config(format!(
                "codelengths {:?} must be a non-empty subset of 1..=6",
                self.codelengths
            )));
        }
        if self.sequence_count == 0 {
            return Err(Error::Config("sequence_count must be positive".into()));
        }
        Ok(())
    }
}

/// `(session, trial)`.
pub type TrialRef = (u16, u16);

/// One cross-validation fold shared by every eligible subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub protocol: ProtocolKind,
    /// Enrollment day for within-day and single cross-day, held-out day for
    /// cumulative cross-day.
    pub day: u16,
    /// Held-out trial index.
    pub trial: u16,
    pub enrollment: Vec<TrialRef>,
    pub claimant: Vec<TrialRef>,
    /// Subjects with every required record present, ascending.
    pub subjects: Vec<u16>,
}

impl Fold {
    /// Every claimant trial must be absent from the enrollment set.
    pub fn check_hygiene(&self) -> Result<()> {
        for c in &self.claimant {
            if self.enrollment.contains(c) {
                return Err(Error::Invariant(format!(
                    "{} fold day {} trial {}: claimant session {} trial {} is also enrolled",
                    self.protocol, self.day, self.trial, c.0, c.1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipNote {
    pub subject: u16,
    pub protocol: ProtocolKind,
    pub day: u16,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub skipped: Vec<SkipNote>,
}

/// Non-rest gestures of the manifest grid.
pub fn code_gestures(manifest: &DatasetManifest) -> Vec<u16> {
    (1..=manifest.grid.gestures)
        .filter(|&g| g != REST_GESTURE)
        .collect()
}

/// Enumerate the folds of `kind` over the manifest grid.
///
/// * within-day: per day, leave one trial out as claimant, enroll the rest;
/// * single cross-day: enroll all but one trial of one day, claim with that
///   trial index on each other day;
/// * cumulative cross-day: hold out one day and claim with one of its trials;
///   enroll the other two days, half of the remaining trial indices from
///   each, rotating with the held-out trial.
///
/// A subject takes part in a fold only when every enrollment and claimant
/// record of every code gesture exists; otherwise a skip note is recorded.
pub fn fold_plan(kind: ProtocolKind, manifest: &DatasetManifest) -> Result<FoldPlan> {
    let grid = manifest.grid;
    let days: Vec<u16> = (1..=grid.sessions).collect();
    let trials = grid.trials;
    if trials < 2 {
        return Err(Error::Config("at least two trials per day are required".into()));
    }
    let others = |t: u16| (1..=trials).filter(move |&x| x != t);

    let mut templates = Vec::new();
    match kind {
        ProtocolKind::WithinDay => {
            for &d in &days {
                for t in 1..=trials {
                    templates.push((d, t, others(t).map(|x| (d, x)).collect(), vec![(d, t)]));
                }
            }
        }
        ProtocolKind::SingleCrossDay => {
            if days.len() < 2 {
                return Err(Error::Config("cross-day analysis needs two or more days".into()));
            }
            for &d in &days {
                for t in 1..=trials {
                    let claim = days.iter().filter(|&&o| o != d).map(|&o| (o, t)).collect();
                    templates.push((d, t, others(t).map(|x| (d, x)).collect(), claim));
                }
            }
        }
        ProtocolKind::CumulativeCrossDay => {
            if days.len() != 3 {
                return Err(Error::Config(
                    "cumulative cross-day analysis needs exactly three days".into(),
                ));
            }
            let first_half = (trials - 1).div_ceil(2);
            for &d in &days {
                let enroll_days: Vec<u16> = days.iter().copied().filter(|&o| o != d).collect();
                for t in 1..=trials {
                    // trial indices after t, wrapping, split across the two days
                    let rotation: Vec<u16> = (1..trials).map(|k| (t - 1 + k) % trials + 1).collect();
                    let mut enrollment: Vec<TrialRef> = rotation[..usize::from(first_half)]
                        .iter()
                        .map(|&x| (enroll_days[0], x))
                        .collect();
                    enrollment.extend(
                        rotation[usize::from(first_half)..]
                            .iter()
                            .map(|&x| (enroll_days[1], x)),
                    );
                    enrollment.sort_unstable();
                    templates.push((d, t, enrollment, vec![(d, t)]));
                }
            }
        }
    }

    let gestures = code_gestures(manifest);
    let subjects: Vec<u16> = (1..=grid.subjects).collect();
    let mut folds = Vec::with_capacity(templates.len());
    let mut skipped = BTreeSet::new();
    for (day, trial, enrollment, claimant) in templates {
        let mut eligible = Vec::new();
        for &j in &subjects {
            let missing = enrollment.iter().chain(&claimant).find_map(|&(s, t)| {
                gestures
                    .iter()
                    .map(|&g| RecordKey::new(s, j, g, t))
                    .find(|k| !manifest.contains(k))
            });
            match missing {
                None => eligible.push(j),
                Some(k) => {
                    skipped.insert((j, day, format!("missing {k}")));
                }
            }
        }
        let fold = Fold {
            protocol: kind,
            day,
            trial,
            enrollment,
            claimant,
            subjects: eligible,
        };
        fold.check_hygiene()?;
        folds.push(fold);
    }

    // one note per (subject, day group), keeping the first missing record
    let mut notes: Vec<SkipNote> = Vec::new();
    for (subject, day, reason) in skipped {
        if notes
            .last()
            .is_some_and(|n| n.subject == subject && n.day == day)
        {
            continue;
        }
        notes.push(SkipNote {
            subject,
            protocol: kind,
            day,
            reason,
        });
    }
    Ok(FoldPlan {
        folds,
        skipped: notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GridSpec;

    fn manifest(grid: GridSpec, drop: impl Fn(&RecordKey) -> bool) -> DatasetManifest {
        DatasetManifest::from_keys("mem", grid, grid.keys().filter(|k| !drop(k))).unwrap()
    }

    const ONE: GridSpec = GridSpec {
        sessions: 3,
        subjects: 1,
        gestures: 17,
        trials: 7,
    };

    #[test]
    fn within_day_has_21_folds() {
        let plan = fold_plan(ProtocolKind::WithinDay, &manifest(ONE, |_| false)).unwrap();
        assert_eq!(plan.folds.len(), 21);
        for f in &plan.folds {
            assert_eq!(f.enrollment.len(), 6);
            assert_eq!(f.claimant, vec![(f.day, f.trial)]);
            assert!(f.enrollment.iter().all(|&(s, _)| s == f.day));
            assert_eq!(f.subjects, vec![1]);
        }
    }

    #[test]
    fn single_cross_day_claims_from_other_days() {
        let plan = fold_plan(ProtocolKind::SingleCrossDay, &manifest(ONE, |_| false)).unwrap();
        assert_eq!(plan.folds.len(), 21);
        for f in &plan.folds {
            assert_eq!(f.enrollment.len(), 6);
            assert_eq!(f.claimant.len(), 2);
            assert!(f.claimant.iter().all(|&(s, t)| s != f.day && t == f.trial));
        }
    }

    #[test]
    fn cumulative_cross_day_splits_three_and_three() {
        let plan = fold_plan(ProtocolKind::CumulativeCrossDay, &manifest(ONE, |_| false)).unwrap();
        assert_eq!(plan.folds.len(), 21);
        for f in &plan.folds {
            let days: BTreeSet<u16> = f.enrollment.iter().map(|e| e.0).collect();
            assert_eq!(days.len(), 2);
            assert!(!days.contains(&f.day));
            for d in days {
                assert_eq!(f.enrollment.iter().filter(|e| e.0 == d).count(), 3);
            }
            assert!(f.enrollment.iter().all(|&(_, t)| t != f.trial));
            assert_eq!(f.claimant, vec![(f.day, f.trial)]);
        }
        // the triples rotate with the held-out trial
        assert_ne!(plan.folds[0].enrollment, plan.folds[1].enrollment);
    }

    #[test]
    fn missing_day_excludes_subject_from_cross_day_only() {
        let grid = GridSpec {
            subjects: 6,
            ..ONE
        };
        let m = manifest(grid, |k| k.subject == 5 && k.session == 2);
        let wd = fold_plan(ProtocolKind::WithinDay, &m).unwrap();
        for f in &wd.folds {
            assert_eq!(f.subjects.contains(&5), f.day != 2, "day {}", f.day);
        }
        assert_eq!(wd.skipped.len(), 1);
        assert_eq!((wd.skipped[0].subject, wd.skipped[0].day), (5, 2));
        for kind in [ProtocolKind::SingleCrossDay, ProtocolKind::CumulativeCrossDay] {
            let plan = fold_plan(kind, &m).unwrap();
            assert!(plan.folds.iter().all(|f| !f.subjects.contains(&5)));
            assert!(plan.folds.iter().all(|f| f.subjects.len() == 5));
            assert!(plan.skipped.iter().all(|s| s.subject == 5));
        }
    }

    #[test]
    fn rest_gesture_is_not_required() {
        let m = manifest(ONE, |k| k.gesture == REST_GESTURE);
        let plan = fold_plan(ProtocolKind::WithinDay, &m).unwrap();
        assert!(plan.skipped.is_empty());
        assert_eq!(code_gestures(&m).len(), 16);
    }

    #[test]
    fn hygiene_check_catches_overlap() {
        let f = Fold {
            protocol: ProtocolKind::WithinDay,
            day: 1,
            trial: 1,
            enrollment: vec![(1, 1), (1, 2)],
            claimant: vec![(1, 1)],
            subjects: vec![1],
        };
        assert!(matches!(f.check_hygiene(), Err(Error::Invariant(_))));
    }

    #[test]
    fn spec_validation() {
        let mut spec = ProtocolSpec {
            kind: ProtocolKind::WithinDay,
            selection: "forearm".into(),
            codelengths: vec![1, 6],
            scenario: Scenario::Normal,
            rng_seed: 1,
            sequence_count: 50,
        };
        spec.validate().unwrap();
        spec.codelengths = vec![7];
        assert!(spec.validate().is_err());
    }
}
