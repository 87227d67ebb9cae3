use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use emgcode::dataset::{decode_signal, encode_record, parse_header, quantize};
use emgcode::dsp::{common_average_reference, extract_series};
use emgcode::eval::{det_from_pools, fused_det, quartiles, ScorePool, SweepGrid};
use emgcode::fusion::{normalize_weights, sample_sequences};
use emgcode::matcher::{enroll, score_vector};
use emgcode::{
    ChannelSelection, CodeSequence, CodeWeights, FdtConfig, FeatureVector, RecordKey,
    SignalRecord, WindowSpec,
};

fn key() -> RecordKey {
    RecordKey::new(2, 7, 11, 5)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn features(rows: &[Vec<f64>]) -> Vec<FeatureVector> {
    rows.iter()
        .enumerate()
        .map(|(i, v)| FeatureVector {
            values: v.clone(),
            selection: "p".into(),
            window_index: i,
        })
        .collect()
}

fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(0u8..6).prop_map(f64::from), -3.0f64..9.0], 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_equals_quantization(
        m in (1usize..40, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)),
        gain in 10.0f64..20000.0,
    ) {
        let rec = SignalRecord::new(key(), m, 2048.0).unwrap();
        let (hea, dat) = encode_record(&rec, gain).unwrap();
        let back = decode_signal(&dat, &parse_header(&hea).unwrap()).unwrap();
        prop_assert_eq!(&back, &quantize(&rec, gain).unwrap());
        let step = 0.5 / gain + 1e-12;
        prop_assert!(back.samples.iter().zip(rec.samples.iter()).all(|(a, b)| (a - b).abs() <= step));
    }

    #[test]
    fn car_rows_sum_to_zero_and_ignore_common_signal(
        m in matrix(30, 8),
        common in prop::collection::vec(-5.0f64..5.0, 30),
    ) {
        let sel = ChannelSelection::new("s", vec![0, 2, 3, 7]);
        let a = common_average_reference(&m, &sel).unwrap();
        for r in 0..a.nrows() {
            prop_assert!(a.row(r).sum().abs() < 1e-12);
        }
        let shifted = DMatrix::from_fn(30, 8, |r, c| m[(r, c)] + common[r]);
        let b = common_average_reference(&shifted, &sel).unwrap();
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn feature_shift_under_scaling(m in matrix(820, 4), c in 1e-3f64..1e3) {
        let sel = ChannelSelection::new("s", vec![0, 1, 2, 3]);
        let spec = WindowSpec::default();
        let cfg = FdtConfig::default();
        let a = extract_series(&SignalRecord::new(key(), m.clone(), 2048.0).unwrap(), &sel, &spec, &cfg).unwrap();
        let b = extract_series(&SignalRecord::new(key(), m * c, 2048.0).unwrap(), &sel, &spec, &cfg).unwrap();
        prop_assert!(a.features.iter().zip(b.features.iter()).all(|(x, y)| (y - x - c.ln()).abs() < 1e-9));
    }

    #[test]
    fn distance_is_invariant_to_translation_and_scale(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 12..30),
        p in prop::collection::vec(-3.0f64..3.0, 3),
        shift in prop::collection::vec(-50.0f64..50.0, 3),
        scale in 0.01f64..100.0,
    ) {
        let t = enroll(&features(&rows), 1, 1, 0.0).unwrap();
        let map = |v: &[f64]| -> Vec<f64> { v.iter().zip(&shift).map(|(x, s)| scale * x + s).collect() };
        let mapped: Vec<Vec<f64>> = rows.iter().map(|v| map(v)).collect();
        let u = enroll(&features(&mapped), 1, 1, 0.0).unwrap();
        let (d0, d1) = (score_vector(&p, &t).unwrap(), score_vector(&map(&p), &u).unwrap());
        prop_assert!((d0 - d1).abs() <= 1e-8 * d0.max(1.0));
    }

    #[test]
    fn full_shrinkage_is_scaled_euclidean(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 3..20),
        p in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..4).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let trace: f64 = rows
            .iter()
            .map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (n - 1.0);
        prop_assume!(trace > 1e-6);
        let t = enroll(&features(&rows), 1, 1, 1.0).unwrap();
        let euclid = p.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>().sqrt();
        let want = euclid / (trace / 4.0).sqrt();
        prop_assert!((score_vector(&p, &t).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn weights_sum_to_one(acc in prop::collection::vec(0.01f64..1.0, 1..17), m in 1usize..7) {
        let accuracies: BTreeMap<u16, f64> = (1u16..).zip(acc.iter().copied()).collect();
        let pool: Vec<u16> = accuracies.keys().copied().collect();
        prop_assume!(m <= pool.len());
        for seq in sample_sequences(9, 5, m, &pool).unwrap() {
            let mut codes = seq.codes().to_vec();
            codes.sort_unstable();
            codes.dedup();
            prop_assert_eq!(codes.len(), m);
            let w = normalize_weights(&accuracies, &seq).unwrap();
            prop_assert!((w.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.normalized.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn det_is_monotone_and_eer_is_bracketed(gen in scores(30), imp in scores(30)) {
        let c = det_from_pools(&ScorePool::new(gen.clone(), imp.clone())).unwrap();
        for w in c.points.windows(2) {
            prop_assert!(w[1].far >= w[0].far && w[1].frr <= w[0].frr);
        }
        let first = c.points.first().unwrap();
        let last = c.points.last().unwrap();
        prop_assert_eq!((first.far, first.frr, last.far, last.frr), (0.0, 1.0, 1.0, 0.0));
        prop_assert!((0.0..=1.0).contains(&c.eer));
        // the crossing lies below the worse of the two rates at every threshold
        let bound = c.points.iter().map(|p| p.far.max(p.frr)).fold(1.0, f64::min);
        prop_assert!(c.eer <= bound + 1e-12);
        let max_gen = gen.iter().copied().fold(f64::MIN, f64::max);
        let min_imp = imp.iter().copied().fold(f64::MAX, f64::min);
        prop_assert_eq!(c.eer == 0.0, max_gen < min_imp);
    }

    #[test]
    fn fused_curves_are_monotone(
        pools in (1usize..12, 1usize..20, 1usize..4).prop_flat_map(|(g, i, m)| {
            prop::collection::vec(
                (prop::collection::vec(-3.0f64..3.0, g), prop::collection::vec(-1.0f64..5.0, i)),
                m,
            )
        }),
    ) {
        let pools: Vec<ScorePool> = pools.into_iter().map(|(g, i)| ScorePool::new(g, i)).collect();
        let c = fused_det(&pools, &CodeWeights::uniform(pools.len()), &SweepGrid::new(64)).unwrap();
        for w in c.points.windows(2) {
            prop_assert!(w[1].far >= w[0].far && w[1].frr <= w[0].frr);
        }
        prop_assert!((0.0..=1.0).contains(&c.eer));
    }

    #[test]
    fn quartiles_match_order_statistics(v in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        let q = quartiles(&v).unwrap();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        prop_assert!(s[0] <= q.q1 && q.q1 <= q.median && q.median <= q.q3 && q.q3 <= s[s.len() - 1]);
        let n = s.len();
        let mid = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        prop_assert!((q.median - mid).abs() < 1e-12);
    }
}

#[test]
fn sequences_reject_oversized_codes() {
    assert!(sample_sequences(0, 1, 4, &[1, 2, 3]).is_err());
    assert!(CodeSequence::new(vec![3, 3]).is_err());
}
