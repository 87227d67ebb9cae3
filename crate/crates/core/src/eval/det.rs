use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{weighted_vote, CodeWeights};

/// Genuine and impostor attempt scores (distances; lower means a better match).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScorePool {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScorePool {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        Self { genuine, impostor }
    }

    fn check(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::TooFew {
                what: "genuine and impostor scores",
                needed: 1,
                got: 0,
            });
        }
        if self.genuine.iter().chain(&self.impostor).any(|v| v.is_nan()) {
            return Err(Error::InvalidRecord("NaN score in pool".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    /// Acceptance threshold (score pools) or sweep level (fused curves).
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// FAR/FRR trade-off ordered by loosening acceptance: FAR non-decreasing,
/// FRR non-increasing along `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub eer: f64,
}

/// Equal error rate of a curve ordered by loosening acceptance.
///
/// Takes the first point where FRR no longer exceeds FAR; when the two are not
/// equal there, both curves are interpolated linearly from the previous point
/// and the rate at their crossing is returned.
pub fn equal_error_rate(points: &[DetPoint]) -> f64 {
    let Some(first) = points.first() else {
        return f64::NAN;
    };
    let mut prev = first;
    if first.frr <= first.far {
        return if first.frr == first.far {
            first.far
        } else {
            0.5 * (first.far + first.frr)
        };
    }
    for p in &points[1..] {
        let d = p.frr - p.far;
        if d == 0.0 {
            return p.far;
        }
        if d < 0.0 {
            let d_prev = prev.frr - prev.far;
            let alpha = d_prev / (d_prev - d);
            return prev.far + alpha * (p.far - prev.far);
        }
        prev = p;
    }
    let last = points.last().expect("non-empty");
    0.5 * (last.far + last.frr)
}

/// Sweep the acceptance threshold over every distinct pooled score plus
/// `-inf` and `+inf`. An attempt is accepted when its score is at most the
/// threshold.
pub fn det_from_pools(pool: &ScorePool) -> Result<DetCurve> {
    pool.check()?;
    let mut gen = pool.genuine.clone();
    let mut imp = pool.impostor.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (n_gen, n_imp) = (gen.len(), imp.len());
    let mut points = Vec::with_capacity(thresholds.len() + 2);
    points.push(DetPoint {
        threshold: f64::NEG_INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    let (mut gi, mut ii) = (0, 0);
    for t in thresholds {
        while gi < n_gen && gen[gi] <= t {
            gi += 1;
        }
        while ii < n_imp && imp[ii] <= t {
            ii += 1;
        }
        points.push(DetPoint {
            threshold: t,
            far: ii as f64 / n_imp as f64,
            frr: (n_gen - gi) as f64 / n_gen as f64,
        });
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        far: 1.0,
        frr: 0.0,
    });
    let eer = equal_error_rate(&points);
    Ok(DetCurve { points, eer })
}

/// Operating levels in `[0, 1]` that map onto per-template thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    levels: Vec<f64>,
}

impl SweepGrid {
    /// `interior` evenly spaced quantile levels strictly inside (0, 1) plus
    /// the endpoints 0 (reject everything) and 1 (accept everything).
    pub fn new(interior: usize) -> Self {
        let n = interior + 1;
        Self {
            levels: (0..=n).map(|k| k as f64 / n as f64).collect(),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Nondecreasing thresholds, one per level, derived from the quantiles
    /// of `calibration`. Level 0 maps to `-inf` and level 1 to `+inf`.
    pub fn thresholds(&self, calibration: &[f64]) -> Result<Vec<f64>> {
        if calibration.is_empty() {
            return Err(Error::TooFew {
                what: "calibration scores",
                needed: 1,
                got: 0,
            });
        }
        let mut sorted = calibration.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(self
            .levels
            .iter()
            .map(|&tau| {
                if tau <= 0.0 {
                    f64::NEG_INFINITY
                } else if tau >= 1.0 {
                    f64::INFINITY
                } else {
                    quantile_sorted(&sorted, tau)
                }
            })
            .collect())
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self::new(512)
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// First sweep index whose threshold admits `score`; `thresholds.len()` when
/// none does.
pub fn crossing_index(score: f64, thresholds: &[f64]) -> u16 {
    thresholds.partition_point(|&t| t < score) as u16
}

/// First sweep index at which the weighted majority of an attempt accepts,
/// given the crossing index of each code. `levels` when it never does.
pub fn acceptance_index(crossings: &[u16], weights: &[f64], levels: usize) -> usize {
    let mut order: [u16; 16] = [0; 16];
    let m = crossings.len();
    debug_assert!(m <= order.len());
    order[..m].copy_from_slice(crossings);
    order[..m].sort_unstable();
    for &k in &order[..m] {
        let g = weighted_vote(crossings.iter().map(|&c| c <= k), weights);
        if g > 0.5 {
            return usize::from(k).min(levels);
        }
    }
    levels
}

/// Fused FAR/FRR over the sweep from per-attempt acceptance indices.
pub fn curve_from_acceptance(
    genuine: &[usize],
    impostor: &[usize],
    grid: &SweepGrid,
) -> Result<DetCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::TooFew {
            what: "genuine and impostor attempts",
            needed: 1,
            got: 0,
        });
    }
    let k = grid.len();
    let hist = |idx: &[usize]| {
        let mut h = vec![0usize; k + 1];
        idx.iter().for_each(|&a| h[a.min(k)] += 1);
        h
    };
    let (hg, hi) = (hist(genuine), hist(impostor));
    let (n_gen, n_imp) = (genuine.len(), impostor.len());
    let (mut acc_g, mut acc_i) = (0usize, 0usize);
    let points = grid
        .levels()
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            acc_g += hg[i];
            acc_i += hi[i];
            DetPoint {
                threshold: tau,
                far: acc_i as f64 / n_imp as f64,
                frr: (n_gen - acc_g) as f64 / n_gen as f64,
            }
        })
        .collect::<Vec<_>>();
    let eer = equal_error_rate(&points);
    Ok(DetCurve { points, eer })
}

/// Fused DET curve for one code sequence.
///
/// `pools[m]` holds the scores of code `m`; attempt `i` of the fused decision
/// is made of `pools[m].genuine[i]` (or `.impostor[i]`) across all codes.
/// Each code's thresholds come from the quantiles of its pooled genuine and
/// impostor scores at every sweep level.
pub fn fused_det(pools: &[ScorePool], weights: &CodeWeights, grid: &SweepGrid) -> Result<DetCurve> {
    let calibration: Vec<Vec<f64>> = pools
        .iter()
        .map(|p| p.genuine.iter().chain(&p.impostor).copied().collect())
        .collect();
    fused_det_calibrated(pools, &calibration, weights, grid)
}

/// [`fused_det`] with explicit per-code calibration scores.
pub fn fused_det_calibrated(
    pools: &[ScorePool],
    calibration: &[Vec<f64>],
    weights: &CodeWeights,
    grid: &SweepGrid,
) -> Result<DetCurve> {
    let m = pools.len();
    if m == 0 || m > 16 || weights.len() != m || calibration.len() != m {
        return Err(Error::Dimension {
            expected: weights.len(),
            actual: m,
        });
    }
    for p in pools {
        p.check()?;
    }
    let (n_gen, n_imp) = (pools[0].genuine.len(), pools[0].impostor.len());
    if pools
        .iter()
        .any(|p| p.genuine.len() != n_gen || p.impostor.len() != n_imp)
    {
        return Err(Error::InvalidRecord(
            "code pools must hold the same attempts".into(),
        ));
    }
    let thresholds: Vec<Vec<f64>> = calibration
        .iter()
        .map(|c| grid.thresholds(c))
        .collect::<Result<_>>()?;
    let accept = |scores: &dyn Fn(usize) -> f64| -> usize {
        let mut crossings = [0u16; 16];
        for (code, thr) in thresholds.iter().enumerate() {
            crossings[code] = crossing_index(scores(code), thr);
        }
        acceptance_index(&crossings[..m], &weights.normalized, grid.len())
    };
    let genuine: Vec<usize> = (0..n_gen)
        .map(|i| accept(&|code| pools[code].genuine[i]))
        .collect();
    let impostor: Vec<usize> = (0..n_imp)
        .map(|i| accept(&|code| pools[code].impostor[i]))
        .collect();
    curve_from_acceptance(&genuine, &impostor, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(g: &[f64], i: &[f64]) -> ScorePool {
        ScorePool::new(g.to_vec(), i.to_vec())
    }

    #[test]
    fn separable_pools() {
        assert_eq!(det_from_pools(&pool(&[1.0, 2.0], &[3.0, 4.0])).unwrap().eer, 0.0);
        assert_eq!(det_from_pools(&pool(&[3.0, 4.0], &[1.0, 2.0])).unwrap().eer, 1.0);
    }

    #[test]
    fn interleaved_pools_give_half() {
        assert_eq!(det_from_pools(&pool(&[1.0, 3.0], &[2.0, 4.0])).unwrap().eer, 0.5);
    }

    #[test]
    fn crossing_is_interpolated() {
        // t=-inf (0,1) t=1 (0,2/3) t=2 (1/2,2/3) t=3 (1/2,1/3) t=4 (1/2,0) ...
        // first FRR<=FAR at t=3: interpolate between (1/2,2/3) and (1/2,1/3)
        let c = det_from_pools(&pool(&[1.0, 3.0, 4.0], &[2.0, 5.0])).unwrap();
        assert!((c.eer - 0.5).abs() < 1e-15);
        let c = det_from_pools(&pool(&[1.0, 2.0, 5.0], &[1.5, 6.0, 7.0, 8.0])).unwrap();
        // (0,1) (0,2/3) (1/4,2/3) (1/4,1/3) (1/4,0): crossing between FRR 1/3 and 0
        assert!((c.eer - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ties_between_pools_are_not_separable() {
        let c = det_from_pools(&pool(&[1.0, 2.0], &[2.0, 3.0])).unwrap();
        assert!(c.eer > 0.0);
    }

    #[test]
    fn empty_pool_is_rejected() {
        assert!(det_from_pools(&pool(&[], &[1.0])).is_err());
        assert!(det_from_pools(&pool(&[1.0], &[])).is_err());
    }

    #[test]
    fn grid_has_endpoints() {
        let g = SweepGrid::new(3);
        assert_eq!(g.levels(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = g.thresholds(&[4.0, 1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(t, vec![f64::NEG_INFINITY, 2.0, 3.0, 4.0, f64::INFINITY]);
        assert_eq!(SweepGrid::default().len(), 514);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn acceptance_uses_strict_majority() {
        let w = [0.5, 0.5];
        assert_eq!(acceptance_index(&[3, 7], &w, 10), 7);
        let w = [0.6, 0.4];
        assert_eq!(acceptance_index(&[3, 7], &w, 10), 3);
        assert_eq!(acceptance_index(&[10, 10], &w, 10), 10);
    }

    #[test]
    fn single_code_fusion_tracks_plain_det() {
        let p = pool(&[1.0, 2.5, 3.0, 4.2], &[2.0, 3.5, 5.0, 6.0, 7.0]);
        let plain = det_from_pools(&p).unwrap();
        let fused = fused_det(&[p], &CodeWeights::uniform(1), &SweepGrid::default()).unwrap();
        assert!((plain.eer - fused.eer).abs() < 1e-12, "{} {}", plain.eer, fused.eer);
    }

    #[test]
    fn separable_codes_fuse_to_zero() {
        let pools = vec![pool(&[1.0, 2.0], &[5.0, 6.0]); 3];
        let c = fused_det(&pools, &CodeWeights::uniform(3), &SweepGrid::default()).unwrap();
        assert_eq!(c.eer, 0.0);
    }

    #[test]
    fn fused_curve_is_monotone() {
        let pools = vec![
            pool(&[1.0, 4.0, 2.0], &[3.0, 2.5, 6.0, 1.5]),
            pool(&[2.0, 1.0, 5.0], &[4.0, 0.5, 3.0, 7.0]),
        ];
        let c = fused_det(&pools, &CodeWeights::uniform(2), &SweepGrid::new(20)).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].far >= w[0].far && w[1].frr <= w[0].frr);
        }
        assert_eq!((c.points[0].far, c.points[0].frr), (0.0, 1.0));
        let last = c.points.last().unwrap();
        assert_eq!((last.far, last.frr), (1.0, 0.0));
    }
}
