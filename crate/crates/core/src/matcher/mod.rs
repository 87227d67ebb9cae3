//! Per-(user, gesture) templates and Mahalanobis matching scores.

mod store;

use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::RecordKey;
use crate::dsp::{FeatureSeries, FeatureVector};
use crate::error::{Error, Result};

pub use store::{StoreEntry, TemplateStore, STORE_VERSION};

/// Relative pivot below which a Cholesky factor is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// `(session, trial)` pairs the template was estimated from.
    pub enrollment: Vec<(u16, u16)>,
    pub shrinkage: f64,
    pub window_count: usize,
}

/// Enrolled model of one user performing one gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateData", into = "TemplateData")]
pub struct Template {
    pub user: u16,
    pub gesture: u16,
    pub selection: String,
    pub centroid: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub inverse_covariance: DMatrix<f64>,
    /// Inverse Cholesky factor `L^-1` with `covariance = L L^T`, so the
    /// distance is `|L^-1 (p - mu)|`.
    whitening: DMatrix<f64>,
    pub training: TrainingMeta,
}

impl Template {
    /// Build a template from a centroid and an already regularized covariance.
    pub fn from_parts(
        user: u16,
        gesture: u16,
        selection: impl Into<String>,
        centroid: DVector<f64>,
        covariance: DMatrix<f64>,
        training: TrainingMeta,
    ) -> Result<Self> {
        let dim = centroid.len();
        if covariance.shape() != (dim, dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: covariance.nrows(),
            });
        }
        let singular = || Error::SingularCovariance {
            shrinkage: training.shrinkage,
        };
        let scale = covariance.diagonal().amax();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(singular());
        }
        let chol = Cholesky::new(covariance.clone()).ok_or_else(singular)?;
        let l = chol.l();
        if l.diagonal().iter().any(|&d| d * d < PIVOT_TOLERANCE * scale) {
            return Err(singular());
        }
        let whitening = l
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or_else(singular)?;
        let inv = whitening.tr_mul(&whitening);
        let inverse_covariance = (&inv + inv.transpose()) * 0.5;
        Ok(Self {
            user,
            gesture,
            selection: selection.into(),
            centroid,
            covariance,
            inverse_covariance,
            whitening,
            training,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    /// Distances of every column of `features` (`dim x n`) to the centroid,
    /// computed through the whitening factor.
    pub fn distances(&self, features: DMatrixView<'_, f64>) -> Result<Vec<f64>> {
        if features.nrows() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: features.nrows(),
            });
        }
        let shift = &self.whitening * &self.centroid;
        let mut y = &self.whitening * features;
        Ok(y.column_iter_mut()
            .map(|mut col| {
                col -= &shift;
                col.norm()
            })
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateData {
    user: u16,
    gesture: u16,
    selection: String,
    centroid: Vec<f64>,
    /// Row-major.
    covariance: Vec<f64>,
    training: TrainingMeta,
}

impl TryFrom<TemplateData> for Template {
    type Error = Error;

    fn try_from(d: TemplateData) -> Result<Self> {
        let dim = d.centroid.len();
        if d.covariance.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                actual: d.covariance.len(),
            });
        }
        Template::from_parts(
            d.user,
            d.gesture,
            d.selection,
            DVector::from_vec(d.centroid),
            DMatrix::from_row_slice(dim, dim, &d.covariance),
            d.training,
        )
    }
}

impl From<Template> for TemplateData {
    fn from(t: Template) -> Self {
        let dim = t.dim();
        Self {
            user: t.user,
            gesture: t.gesture,
            selection: t.selection,
            centroid: t.centroid.iter().copied().collect(),
            covariance: (0..dim)
                .flat_map(|r| (0..dim).map(move |c| (r, c)))
                .map(|(r, c)| t.covariance[(r, c)])
                .collect(),
            training: t.training,
        }
    }
}

/// Sample mean and `n - 1` sample covariance of the columns of `samples`.
pub fn sample_moments(samples: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = samples.ncols();
    if n < 2 {
        return Err(Error::TooFew {
            what: "enrollment vectors",
            needed: 2,
            got: n,
        });
    }
    let mean = samples.column_mean();
    let mut centered = samples.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&centered * centered.transpose()) / (n as f64 - 1.0);
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Shrink a covariance toward a scaled identity:
/// `(1 - lambda) S + lambda (tr(S) / d) I`.
pub fn shrink_covariance(cov: &DMatrix<f64>, shrinkage: f64) -> DMatrix<f64> {
    let d = cov.nrows();
    let target = cov.trace() / d as f64;
    let mut out = cov * (1.0 - shrinkage);
    for i in 0..d {
        out[(i, i)] += shrinkage * target;
    }
    out
}

/// Estimate a template from enrollment windows stored as the columns of
/// `samples`.
pub fn enroll_matrix(
    samples: &DMatrix<f64>,
    user: u16,
    gesture: u16,
    selection: &str,
    shrinkage: f64,
    enrollment: Vec<(u16, u16)>,
) -> Result<Template> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::Config(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let (centroid, cov) = sample_moments(samples)?;
    let covariance = shrink_covariance(&cov, shrinkage);
    Template::from_parts(
        user,
        gesture,
        selection,
        centroid,
        covariance,
        TrainingMeta {
            enrollment,
            shrinkage,
            window_count: samples.ncols(),
        },
    )
}

/// Estimate a template from individual feature vectors.
pub fn enroll(vectors: &[FeatureVector], user: u16, gesture: u16, shrinkage: f64) -> Result<Template> {
    if vectors.len() < 2 {
        return Err(Error::TooFew {
            what: "enrollment vectors",
            needed: 2,
            got: vectors.len(),
        });
    }
    let dim = vectors[0].values.len();
    if let Some(v) = vectors.iter().find(|v| v.values.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: v.values.len(),
        });
    }
    let samples = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c].values[r]);
    enroll_matrix(&samples, user, gesture, &vectors[0].selection, shrinkage, Vec::new())
}

/// Pool all windows of the given series and enroll.
pub fn enroll_series(
    series: &[&FeatureSeries],
    user: u16,
    gesture: u16,
    shrinkage: f64,
) -> Result<Template> {
    let first = series.first().ok_or(Error::TooFew {
        what: "enrollment trials",
        needed: 1,
        got: 0,
    })?;
    let dim = first.dim();
    let total: usize = series.iter().map(|s| s.len()).sum();
    let mut samples = DMatrix::zeros(dim, total);
    let mut col = 0;
    for s in series {
        if s.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: s.dim(),
            });
        }
        samples.columns_mut(col, s.len()).copy_from(&s.features);
        col += s.len();
    }
    let enrollment = series.iter().map(|s| (s.key.session, s.key.trial)).collect();
    enroll_matrix(&samples, user, gesture, &first.selection, shrinkage, enrollment)
}

/// Mahalanobis distance of `p` to the template centroid, using the cached
/// inverse covariance.
pub fn score_vector(p: &[f64], t: &Template) -> Result<f64> {
    if p.len() != t.dim() {
        return Err(Error::Dimension {
            expected: t.dim(),
            actual: p.len(),
        });
    }
    let d = DVector::from_column_slice(p) - &t.centroid;
    if d.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let q = d.dot(&(&t.inverse_covariance * &d));
    Ok(q.max(0.0).sqrt())
}

/// How per-window distances of one trial are reduced to an attempt score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptAggregate {
    #[default]
    Mean,
    Median,
    Min,
}

impl AttemptAggregate {
    pub fn reduce(self, values: &mut [f64]) -> f64 {
        match self {
            AttemptAggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            AttemptAggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            AttemptAggregate::Median => {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

/// Score of one claimant trial against one template; lower is a better match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub value: f64,
    pub claimant: RecordKey,
    pub template_user: u16,
    pub template_gesture: u16,
    pub window_count: usize,
}

pub fn score_attempt(series: &FeatureSeries, t: &Template) -> Result<MatchScore> {
    score_attempt_with(series, t, AttemptAggregate::Mean)
}

pub fn score_attempt_with(
    series: &FeatureSeries,
    t: &Template,
    aggregate: AttemptAggregate,
) -> Result<MatchScore> {
    if series.is_empty() {
        return Err(Error::TooFew {
            what: "windows in claimant trial",
            needed: 1,
            got: 0,
        });
    }
    let mut d = t.distances(series.features.as_view())?;
    Ok(MatchScore {
        value: aggregate.reduce(&mut d),
        claimant: series.key,
        template_user: t.user,
        template_gesture: t.gesture,
        window_count: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector {
            values: values.to_vec(),
            selection: "t".into(),
            window_index: 0,
        }
    }

    fn square() -> Vec<FeatureVector> {
        [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]
            .iter()
            .map(|v| fv(v))
            .collect()
    }

    #[test]
    fn square_corners_give_hand_computed_moments() {
        let t = enroll(&square(), 1, 2, 0.0).unwrap();
        assert_eq!(t.centroid.as_slice(), &[1.0, 1.0]);
        let expected = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, 0.0, 0.0, 4.0 / 3.0]);
        assert!((&t.covariance - expected).amax() < 1e-15);
        let ident = &t.inverse_covariance * &t.covariance;
        assert!((ident - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn identical_vectors_are_singular_even_with_shrinkage() {
        let same = vec![fv(&[1.0, 2.0]); 5];
        for lambda in [0.0, 0.1] {
            assert!(matches!(
                enroll(&same, 1, 1, lambda),
                Err(Error::SingularCovariance { .. })
            ));
        }
    }

    #[test]
    fn rank_deficient_needs_shrinkage() {
        // three points on a line in 2-D
        let line: Vec<_> = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]].iter().map(|v| fv(v)).collect();
        assert!(matches!(
            enroll(&line, 1, 1, 0.0),
            Err(Error::SingularCovariance { .. })
        ));
        enroll(&line, 1, 1, 0.01).unwrap();
    }

    #[test]
    fn too_few_vectors() {
        assert!(matches!(
            enroll(&[fv(&[1.0])], 1, 1, 0.0),
            Err(Error::TooFew { .. })
        ));
        assert!(enroll(&[fv(&[1.0]), fv(&[1.0, 2.0])], 1, 1, 0.0).is_err());
        assert!(enroll(&square(), 1, 1, 1.5).is_err());
    }

    #[test]
    fn identity_covariance_reduces_to_euclidean() {
        let t = Template::from_parts(
            1,
            1,
            "t",
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::identity(2, 2),
            TrainingMeta::default(),
        )
        .unwrap();
        assert_eq!(score_vector(&[4.0, 5.0], &t).unwrap(), 5.0);
        assert_eq!(score_vector(&[1.0, 1.0], &t).unwrap(), 0.0);
        assert!(matches!(
            score_vector(&[1.0], &t),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn attempt_score_is_mean_of_window_distances() {
        let t = Template::from_parts(
            1,
            1,
            "t",
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::identity(2, 2),
            TrainingMeta::default(),
        )
        .unwrap();
        let key = RecordKey::new(1, 1, 1, 1);
        let s = FeatureSeries::new(key, "t", DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]));
        let score = score_attempt(&s, &t).unwrap();
        assert!((score.value - 2.0).abs() < 1e-15);
        assert_eq!(score.window_count, 2);
        let med = score_attempt_with(&s, &t, AttemptAggregate::Min).unwrap();
        assert_eq!(med.value, 1.0);
        let at_centroid = FeatureSeries::new(key, "t", DMatrix::zeros(2, 1));
        assert_eq!(score_attempt(&at_centroid, &t).unwrap().value, 0.0);
        let empty = FeatureSeries::new(key, "t", DMatrix::zeros(2, 0));
        assert!(score_attempt(&empty, &t).is_err());
    }

    #[test]
    fn full_shrinkage_is_scaled_euclidean() {
        let t = enroll(&square(), 1, 1, 1.0).unwrap();
        // tr(S)/d = 4/3, so distance = |p - mu| / sqrt(4/3)
        let got = score_vector(&[4.0, 5.0], &t).unwrap();
        let want = 5.0 / (4.0f64 / 3.0).sqrt();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn template_json_round_trip_rebuilds_caches() {
        let t = enroll(&square(), 3, 4, 0.05).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Template = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
