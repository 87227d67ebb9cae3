use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::ChannelSelection;
use crate::error::{Error, Result};

/// Restrict `samples` to the selected columns and subtract, at every time
/// sample, the mean across those columns.
pub fn common_average_reference(
    samples: &DMatrix<f64>,
    selection: &ChannelSelection,
) -> Result<DMatrix<f64>> {
    selection.validate(samples.ncols())?;
    if selection.len() < 2 {
        return Err(Error::TooFew {
            what: "channels for common-average referencing",
            needed: 2,
            got: selection.len(),
        });
    }
    let rows = samples.nrows();
    let mut out = samples.select_columns(&selection.channel_indices);
    let n = selection.len() as f64;
    for r in 0..rows {
        let mean = out.row(r).sum() / n;
        for v in out.row_mut(r).iter_mut() {
            *v -= mean;
        }
    }
    Ok(out)
}

/// Second-order IIR notch (RBJ biquad, Q = 30) applied forward along every
/// column.
pub fn notch_filter(samples: &mut DMatrix<f64>, notch_hz: f64, sampling_rate_hz: f64) {
    let q = 30.0;
    let w0 = 2.0 * PI * notch_hz / sampling_rate_hz;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let b = [1.0 / a0, -2.0 * w0.cos() / a0, 1.0 / a0];
    let a = [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0];
    for mut col in samples.column_iter_mut() {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in col.iter_mut() {
            let x0 = *v;
            let y0 = b[0] * x0 + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all(n: usize) -> ChannelSelection {
        ChannelSelection::new("all", (0..n).collect())
    }

    #[test]
    fn two_channel_mean_subtraction() {
        let m = DMatrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let out = common_average_reference(&m, &all(2)).unwrap();
        assert_eq!(out.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn identical_channels_cancel() {
        let m = DMatrix::from_fn(5, 3, |r, _| r as f64 * 1.5 - 2.0);
        let out = common_average_reference(&m, &all(3)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rows_sum_to_zero_and_reapplying_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(200, 3, |_, _| rng.random_range(-5.0..5.0));
        let once = common_average_reference(&m, &all(3)).unwrap();
        for row in once.row_iter() {
            // direct re-computation of the row sum
            let s: f64 = row.iter().sum();
            assert!(s.abs() <= 1e-12, "row sum {s}");
        }
        let twice = common_average_reference(&once, &all(3)).unwrap();
        assert!((twice - &once).amax() <= 1e-12);
    }

    #[test]
    fn selection_order_is_kept() {
        let m = DMatrix::from_row_slice(1, 4, &[10.0, 0.0, 4.0, 99.0]);
        let sel = ChannelSelection::new("x", vec![2, 0]);
        let out = common_average_reference(&m, &sel).unwrap();
        assert_eq!(out.as_slice(), &[-3.0, 3.0]);
    }

    #[test]
    fn single_channel_is_undefined() {
        let m = DMatrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let sel = ChannelSelection::new("one", vec![0]);
        assert!(matches!(
            common_average_reference(&m, &sel),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn notch_suppresses_mains_tone() {
        let fs = 2048.0;
        let n = 8192;
        let mut m = DMatrix::from_fn(n, 1, |r, _| (2.0 * PI * 50.0 * r as f64 / fs).sin());
        notch_filter(&mut m, 50.0, fs);
        let tail_rms = (m.rows(n / 2, n / 2).norm_squared() / (n / 2) as f64).sqrt();
        assert!(tail_rms < 0.01, "{tail_rms}");
    }
}
