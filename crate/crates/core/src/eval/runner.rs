use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::det::{
    acceptance_index, crossing_index, curve_from_acceptance, det_from_pools, ScorePool, SweepGrid,
};
use super::protocol::{code_gestures, fold_plan, Fold, ProtocolKind, Scenario, SkipNote};
use super::{EvalSettings, FeatureBank, Weighting};
use crate::dataset::{DatasetManifest, RecordKey};
use crate::dsp::FeatureSeries;
use crate::error::{Error, Result};
use crate::fusion::{draw_different_prefix, draw_sequence, normalize_weights, CodeSequence, CodeWeights};
use crate::matcher::{enroll_series, AttemptAggregate, Template};
use crate::seed;

/// Attempt scores of every claimant series against every template.
/// Row-major: `out[t * series.len() + a]`.
fn score_matrix(
    templates: &[Template],
    series: &[&FeatureSeries],
    aggregate: AttemptAggregate,
) -> Result<Vec<f64>> {
    let Some(first) = templates.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim();
    let mut offsets = Vec::with_capacity(series.len() + 1);
    offsets.push(0);
    for s in series {
        if s.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: s.dim(),
            });
        }
        if s.is_empty() {
            return Err(Error::TooFew {
                what: "windows in claimant trial",
                needed: 1,
                got: 0,
            });
        }
        offsets.push(offsets.last().unwrap() + s.len());
    }
    let total = *offsets.last().unwrap();
    let mut x = DMatrix::zeros(dim, total);
    for (s, &o) in series.iter().zip(&offsets) {
        x.columns_mut(o, s.len()).copy_from(&s.features);
    }

    let rows: Vec<Vec<f64>> = templates
        .par_iter()
        .map_init(
            || (DMatrix::<f64>::zeros(dim, total), Vec::new()),
            |(y, dists), t| {
                if t.dim() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        actual: t.dim(),
                    });
                }
                y.gemm(1.0, t.whitening(), &x, 0.0);
                let shift = t.whitening() * &t.centroid;
                let mut row = Vec::with_capacity(series.len());
                for a in 0..series.len() {
                    dists.clear();
                    for c in offsets[a]..offsets[a + 1] {
                        let col = y.column(c);
                        let sq: f64 = col.iter().zip(shift.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
                        dists.push(sq.sqrt());
                    }
                    row.push(aggregate.reduce(dists));
                }
                Ok(row)
            },
        )
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

fn enroll_fold(
    fold: &Fold,
    bank: &FeatureBank,
    gestures: &[u16],
    shrinkage: f64,
) -> Result<Vec<Template>> {
    let pairs: Vec<(u16, u16)> = fold
        .subjects
        .iter()
        .flat_map(|&j| gestures.iter().map(move |&g| (j, g)))
        .collect();
    pairs
        .par_iter()
        .map(|&(j, g)| {
            let series = fold
                .enrollment
                .iter()
                .map(|&(s, t)| bank.get(&RecordKey::new(s, j, g, t)))
                .collect::<Result<Vec<_>>>()?;
            enroll_series(&series, j, g, shrinkage)
        })
        .collect()
}

/// Scores of one fold: every (subject, gesture) template against every
/// (subject, gesture, claimant trial) attempt of the fold cohort.
#[derive(Debug, Clone)]
pub struct FoldScores {
    pub fold: Fold,
    pub gestures: Vec<u16>,
    attempts: usize,
    scores: Vec<f64>,
}

impl FoldScores {
    pub fn compute(fold: &Fold, bank: &FeatureBank, gestures: &[u16], settings: &EvalSettings) -> Result<Self> {
        fold.check_hygiene()?;
        let templates = enroll_fold(fold, bank, gestures, settings.shrinkage)?;
        let mut series = Vec::new();
        for &k in &fold.subjects {
            for &g in gestures {
                for &(s, t) in &fold.claimant {
                    series.push(bank.get(&RecordKey::new(s, k, g, t))?);
                }
            }
        }
        let scores = score_matrix(&templates, &series, settings.aggregate)?;
        Ok(Self {
            fold: fold.clone(),
            gestures: gestures.to_vec(),
            attempts: series.len(),
            scores,
        })
    }

    pub fn claimant_count(&self) -> usize {
        self.fold.claimant.len()
    }

    fn subject_index(&self, subject: u16) -> Result<usize> {
        self.fold
            .subjects
            .binary_search(&subject)
            .map_err(|_| Error::Missing(format!("subject {subject} not in fold cohort")))
    }

    fn gesture_index(&self, gesture: u16) -> Result<usize> {
        self.gestures
            .binary_search(&gesture)
            .map_err(|_| Error::Missing(format!("gesture {gesture} not scored")))
    }

    fn template_index(&self, user: u16, gesture: u16) -> Result<usize> {
        Ok(self.subject_index(user)? * self.gestures.len() + self.gesture_index(gesture)?)
    }

    fn attempt_index(&self, claimant: u16, gesture: u16, trial: usize) -> Result<usize> {
        let c = self.claimant_count();
        Ok((self.subject_index(claimant)? * self.gestures.len() + self.gesture_index(gesture)?) * c + trial)
    }

    /// Scores of every attempt against the template of (user, gesture).
    pub fn template_row(&self, user: u16, gesture: u16) -> Result<&[f64]> {
        let t = self.template_index(user, gesture)?;
        Ok(&self.scores[t * self.attempts..(t + 1) * self.attempts])
    }

    /// Score of `claimant` performing `gesture` in claimant trial `trial`
    /// against the template of (user, template_gesture).
    pub fn score(&self, user: u16, template_gesture: u16, claimant: u16, gesture: u16, trial: usize) -> Result<f64> {
        let row = self.template_row(user, template_gesture)?;
        Ok(row[self.attempt_index(claimant, gesture, trial)?])
    }
}

/// Per-code genuine and impostor pools of one subject and sequence, plus the
/// calibration scores of each code's template.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeScorePools {
    pub codes: Vec<u16>,
    pub pools: Vec<ScorePool>,
    pub calibration: Vec<Vec<f64>>,
}

/// Gather the score pools for `subject` claiming with `sequence`.
///
/// Genuine attempts are the subject's own claimant trials. Impostors are every
/// other subject of the fold; under [`Scenario::Leaked`] they perform the
/// genuine codes, under [`Scenario::Normal`] the codes returned by
/// `impostor_codes(k)`. Attempt `i` is aligned across codes.
pub fn collect_scores(
    scores: &FoldScores,
    subject: u16,
    scenario: Scenario,
    sequence: &CodeSequence,
    impostor_codes: impl Fn(u16) -> Result<Vec<u16>>,
) -> Result<CodeScorePools> {
    if scores.fold.subjects.len() < 2 {
        return Err(Error::TooFew {
            what: "subjects in cohort (impostor pool is empty)",
            needed: 2,
            got: scores.fold.subjects.len(),
        });
    }
    let codes = sequence.codes().to_vec();
    let m = codes.len();
    let mut pools = vec![ScorePool::default(); m];
    let c = scores.claimant_count();
    for trial in 0..c {
        for (pos, &g) in codes.iter().enumerate() {
            pools[pos].genuine.push(scores.score(subject, g, subject, g, trial)?);
        }
    }
    for &k in scores.fold.subjects.iter().filter(|&&k| k != subject) {
        let performed = match scenario {
            Scenario::Leaked => codes.clone(),
            Scenario::Normal => impostor_codes(k)?,
        };
        if performed.len() < m {
            return Err(Error::Dimension {
                expected: m,
                actual: performed.len(),
            });
        }
        for trial in 0..c {
            for (pos, &g) in codes.iter().enumerate() {
                pools[pos]
                    .impostor
                    .push(scores.score(subject, g, k, performed[pos], trial)?);
            }
        }
    }
    let calibration = codes
        .iter()
        .map(|&g| scores.template_row(subject, g).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    Ok(CodeScorePools {
        codes,
        pools,
        calibration,
    })
}

/// Single-code accuracy `1 - EER` per gesture, from resubstitution scores of
/// the enrollment trials of the first fold of each day group, averaged over
/// day groups.
pub fn gesture_accuracy(
    folds: &[Fold],
    bank: &FeatureBank,
    gestures: &[u16],
    settings: &EvalSettings,
) -> Result<BTreeMap<u16, f64>> {
    let mut days: Vec<&Fold> = Vec::new();
    for f in folds {
        if f.subjects.len() >= 2 && !days.iter().any(|d| d.day == f.day) {
            days.push(f);
        }
    }
    if days.is_empty() {
        return Err(Error::TooFew {
            what: "subjects in any fold cohort",
            needed: 2,
            got: 0,
        });
    }
    let per_day: Vec<Vec<f64>> = days
        .iter()
        .map(|fold| {
            let templates = enroll_fold(fold, bank, gestures, settings.shrinkage)?;
            let n_sub = fold.subjects.len();
            let n_enr = fold.enrollment.len();
            gestures
                .iter()
                .enumerate()
                .map(|(gi, &g)| {
                    let tpl: Vec<Template> =
                        (0..n_sub).map(|ji| templates[ji * gestures.len() + gi].clone()).collect();
                    let series = fold
                        .subjects
                        .iter()
                        .flat_map(|&k| fold.enrollment.iter().map(move |&(s, t)| RecordKey::new(s, k, g, t)))
                        .map(|key| bank.get(&key))
                        .collect::<Result<Vec<_>>>()?;
                    let scores = score_matrix(&tpl, &series, settings.aggregate)?;
                    let mut pool = ScorePool::default();
                    for ji in 0..n_sub {
                        for ki in 0..n_sub {
                            let cells = &scores[ji * series.len() + ki * n_enr..][..n_enr];
                            if ji == ki {
                                pool.genuine.extend_from_slice(cells);
                            } else {
                                pool.impostor.extend_from_slice(cells);
                            }
                        }
                    }
                    Ok(1.0 - det_from_pools(&pool)?.eer)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(gestures
        .iter()
        .enumerate()
        .map(|(gi, &g)| {
            let mean = per_day.iter().map(|d| d[gi]).sum::<f64>() / per_day.len() as f64;
            (g, mean)
        })
        .collect())
}

/// Normal-scenario impostor codes for every (genuine subject, sequence,
/// impostor subject, codelength), fixed by the seed alone.
struct ImpostorTable {
    subjects: usize,
    sequences: usize,
    max_m: usize,
    codes: Vec<u16>,
}

impl ImpostorTable {
    fn build(seed: u64, subjects: u16, sequences: &[CodeSequence], pool: &[u16], lengths: &[usize]) -> Result<Self> {
        let max_m = sequences.first().map_or(0, |s| s.len());
        let n = usize::from(subjects);
        let mut codes = vec![0u16; n * sequences.len() * n * max_m * max_m];
        let mut table = Self {
            subjects: n,
            sequences: sequences.len(),
            max_m,
            codes: Vec::new(),
        };
        for j in 1..=subjects {
            for (s, genuine) in sequences.iter().enumerate() {
                for k in (1..=subjects).filter(|&k| k != j) {
                    let ids = [u64::from(j), s as u64, u64::from(k)];
                    let base = draw_sequence(&mut seed::stream(seed, "impostor", &ids), pool, max_m)?;
                    for &m in lengths {
                        let seq = if base.codes()[..m] == genuine.codes()[..m] {
                            let mut rng = seed::stream(seed, "impostor-redraw", &[ids[0], ids[1], ids[2], m as u64]);
                            draw_different_prefix(&mut rng, pool, genuine, m)?
                        } else {
                            base.clone()
                        };
                        let at = table.offset(j, s, k, m);
                        codes[at..at + max_m].copy_from_slice(seq.codes());
                    }
                }
            }
        }
        table.codes = codes;
        Ok(table)
    }

    fn offset(&self, j: u16, s: usize, k: u16, m: usize) -> usize {
        let (j, k) = (usize::from(j) - 1, usize::from(k) - 1);
        (((j * self.sequences + s) * self.subjects + k) * self.max_m + (m - 1)) * self.max_m
    }

    fn get(&self, j: u16, s: usize, k: u16, m: usize) -> &[u16] {
        let at = self.offset(j, s, k, m);
        &self.codes[at..at + self.max_m]
    }
}

/// Mean DET curve accumulator.
#[derive(Debug, Clone, Default)]
struct CurveSum {
    far: Vec<f64>,
    frr: Vec<f64>,
    count: usize,
}

impl CurveSum {
    fn add(&mut self, far: impl Iterator<Item = f64>, frr: impl Iterator<Item = f64>) {
        if self.count == 0 {
            self.far = far.collect();
            self.frr = frr.collect();
        } else {
            self.far.iter_mut().zip(far).for_each(|(a, b)| *a += b);
            self.frr.iter_mut().zip(frr).for_each(|(a, b)| *a += b);
        }
        self.count += 1;
    }

    fn merge(&mut self, other: &CurveSum) {
        if other.count == 0 {
            return;
        }
        self.add(other.far.iter().copied(), other.frr.iter().copied());
        self.count += other.count - 1;
    }
}

/// Sweep level, FAR and FRR.
pub type CurvePoint = (f64, f64, f64);

/// Everything one protocol run produces for one channel selection.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub protocol: ProtocolKind,
    pub selection: String,
    pub gesture_accuracy: BTreeMap<u16, f64>,
    /// Fold EERs per subject, keyed by (scenario, codelength), in fold order.
    pub fold_eers: BTreeMap<(Scenario, usize), BTreeMap<u16, Vec<f64>>>,
    /// Mean fused DET curve over every (subject, fold), as (level, FAR, FRR).
    pub mean_curves: BTreeMap<(Scenario, usize), Vec<CurvePoint>>,
    pub skipped: Vec<SkipNote>,
    pub warnings: Vec<String>,
}

struct FoldOutcome {
    eers: Vec<(Scenario, usize, u16, f64)>,
    curves: BTreeMap<(Scenario, usize), CurveSum>,
}

struct RunContext<'a> {
    settings: &'a EvalSettings,
    gestures: Vec<u16>,
    sequences: &'a [CodeSequence],
    /// `weights[s][m - 1]`
    weights: Vec<Vec<Vec<f64>>>,
    impostors: ImpostorTable,
    grid: SweepGrid,
}

fn check_curve(levels: &[f64], far: &[f64], frr: &[f64], eer: f64, what: &str) -> Result<()> {
    let monotone = far.windows(2).all(|w| w[1] >= w[0]) && frr.windows(2).all(|w| w[1] <= w[0]);
    if !monotone || far.len() != levels.len() {
        return Err(Error::Invariant(format!("{what}: DET curve is not monotone")));
    }
    if !(0.0..=1.0).contains(&eer) {
        return Err(Error::Invariant(format!("{what}: EER {eer} outside [0, 1]")));
    }
    Ok(())
}

fn process_fold(fold: &Fold, bank: &FeatureBank, ctx: &RunContext<'_>) -> Result<FoldOutcome> {
    let scores = FoldScores::compute(fold, bank, &ctx.gestures, ctx.settings)?;
    let n_gest = ctx.gestures.len();
    let c = scores.claimant_count();
    let attempts = scores.attempts;
    let levels = ctx.grid.len();

    // crossing index of every attempt against every template's thresholds
    let crossings: Vec<u16> = scores
        .scores
        .par_chunks(attempts)
        .map(|row| {
            let thr = ctx.grid.thresholds(row)?;
            Ok(row.iter().map(|&v| crossing_index(v, &thr)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let gi = |g: u16| ctx.gestures.binary_search(&g).expect("code gesture");
    let subjects = &fold.subjects;
    let mut out = FoldOutcome {
        eers: Vec::new(),
        curves: BTreeMap::new(),
    };
    let mut cross = [0u16; 16];
    for (ji, &j) in subjects.iter().enumerate() {
        for &scenario in &ctx.settings.scenarios {
            for &m in &ctx.settings.codelengths {
                let mut genuine = Vec::with_capacity(ctx.sequences.len() * c);
                let mut impostor = Vec::with_capacity(ctx.sequences.len() * c * subjects.len());
                for (s, seq) in ctx.sequences.iter().enumerate() {
                    let codes = &seq.codes()[..m];
                    let w = &ctx.weights[s][m - 1];
                    let rows: Vec<usize> = codes.iter().map(|&g| (ji * n_gest + gi(g)) * attempts).collect();
                    for t in 0..c {
                        for (pos, &g) in codes.iter().enumerate() {
                            cross[pos] = crossings[rows[pos] + (ji * n_gest + gi(g)) * c + t];
                        }
                        genuine.push(acceptance_index(&cross[..m], w, levels));
                    }
                    for (ki, &k) in subjects.iter().enumerate() {
                        if k == j {
                            continue;
                        }
                        let performed = match scenario {
                            Scenario::Leaked => codes,
                            Scenario::Normal => &ctx.impostors.get(j, s, k, m)[..m],
                        };
                        for t in 0..c {
                            for pos in 0..m {
                                cross[pos] = crossings[rows[pos] + (ki * n_gest + gi(performed[pos])) * c + t];
                            }
                            impostor.push(acceptance_index(&cross[..m], w, levels));
                        }
                    }
                }
                let curve = curve_from_acceptance(&genuine, &impostor, &ctx.grid)?;
                let far: Vec<f64> = curve.points.iter().map(|p| p.far).collect();
                let frr: Vec<f64> = curve.points.iter().map(|p| p.frr).collect();
                let what = format!(
                    "{} {scenario} M={m} subject {j} day {} trial {}",
                    fold.protocol, fold.day, fold.trial
                );
                check_curve(ctx.grid.levels(), &far, &frr, curve.eer, &what)?;
                out.eers.push((scenario, m, j, curve.eer));
                out.curves
                    .entry((scenario, m))
                    .or_default()
                    .add(far.into_iter(), frr.into_iter());
            }
        }
    }
    Ok(out)
}

/// Draw the evaluation sequences: `count` sequences as long as the largest
/// requested codelength; shorter codelengths use their prefixes.
pub fn evaluation_sequences(manifest: &DatasetManifest, settings: &EvalSettings) -> Result<Vec<CodeSequence>> {
    let max_m = settings.codelengths.iter().copied().max().unwrap_or(1);
    crate::fusion::sample_sequences(settings.seed, settings.sequence_count, max_m, &code_gestures(manifest))
}

/// Run one protocol on one channel selection.
pub fn evaluate_selection(
    kind: ProtocolKind,
    manifest: &DatasetManifest,
    bank: &FeatureBank,
    settings: &EvalSettings,
    sequences: &[CodeSequence],
) -> Result<SelectionOutcome> {
    settings.validate()?;
    let gestures = code_gestures(manifest);
    let plan = fold_plan(kind, manifest)?;
    let mut warnings = Vec::new();
    let mut folds = Vec::new();
    for f in &plan.folds {
        match f.subjects.len() {
            0 => warnings.push(format!(
                "{kind} fold day {} trial {}: no eligible subject, fold skipped",
                f.day, f.trial
            )),
            1 => {
                return Err(Error::TooFew {
                    what: "subjects in fold cohort (impostor pool is empty)",
                    needed: 2,
                    got: 1,
                })
            }
            _ => folds.push(f.clone()),
        }
    }

    let gesture_accuracy = match settings.weighting {
        Weighting::Accuracy => gesture_accuracy(&folds, bank, &gestures, settings)?,
        Weighting::Uniform => gestures.iter().map(|&g| (g, 1.0)).collect(),
    };
    let weights = sequences
        .iter()
        .map(|seq| {
            (1..=seq.len())
                .map(|m| {
                    let prefix = seq.prefix(m)?;
                    Ok(match settings.weighting {
                        Weighting::Accuracy => normalize_weights(&gesture_accuracy, &prefix)?,
                        Weighting::Uniform => CodeWeights::uniform(m),
                    }
                    .normalized)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(&m) = settings.codelengths.iter().find(|&&m| sequences.iter().any(|s| s.len() < m)) {
        return Err(Error::Config(format!("sequences are shorter than codelength {m}")));
    }

    let ctx = RunContext {
        settings,
        impostors: ImpostorTable::build(
            settings.seed,
            manifest.grid.subjects,
            sequences,
            &gestures,
            &settings.codelengths,
        )?,
        gestures,
        sequences,
        weights,
        grid: SweepGrid::new(settings.sweep_levels),
    };

    let outcomes: Vec<FoldOutcome> = folds
        .par_iter()
        .map(|f| process_fold(f, bank, &ctx))
        .collect::<Result<_>>()?;

    let mut fold_eers: BTreeMap<(Scenario, usize), BTreeMap<u16, Vec<f64>>> = BTreeMap::new();
    let mut sums: BTreeMap<(Scenario, usize), CurveSum> = BTreeMap::new();
    for o in &outcomes {
        for &(scenario, m, j, eer) in &o.eers {
            fold_eers
                .entry((scenario, m))
                .or_default()
                .entry(j)
                .or_default()
                .push(eer);
        }
        for (key, sum) in &o.curves {
            sums.entry(*key).or_default().merge(sum);
        }
    }
    let mean_curves = sums
        .into_iter()
        .map(|(key, sum)| {
            let n = sum.count as f64;
            let pts = ctx
                .grid
                .levels()
                .iter()
                .zip(sum.far.iter().zip(&sum.frr))
                .map(|(&tau, (&far, &frr))| (tau, far / n, frr / n))
                .collect();
            (key, pts)
        })
        .collect();

    Ok(SelectionOutcome {
        protocol: kind,
        selection: bank.selection.clone(),
        gesture_accuracy,
        fold_eers,
        mean_curves,
        skipped: plan.skipped,
        warnings,
    })
}
