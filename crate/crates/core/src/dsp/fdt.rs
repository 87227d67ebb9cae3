use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FdtConfig, FeatureVector, Spectrum, Taper, Transform};
use crate::error::{Error, Result};

/// Precomputed FFT plan and bin-to-band map for one window length.
pub struct FdtExtractor {
    config: FdtConfig,
    window_len: usize,
    fft: Arc<dyn Fft<f64>>,
    /// Band index for bins `1..=window_len / 2` (index 0 is bin 1).
    band_of_bin: Vec<Option<usize>>,
    taper: Option<Vec<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    sums: Vec<f64>,
}

impl FdtExtractor {
    pub fn new(config: &FdtConfig, window_len: usize, sampling_rate_hz: f64) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::TooFew {
                what: "samples per window",
                needed: 2,
                got: window_len,
            });
        }
        config.validate(sampling_rate_hz)?;
        let fft = FftPlanner::new().plan_fft_forward(window_len);
        let last = config.bands.len() - 1;
        let band_of_bin = (1..=window_len / 2)
            .map(|k| {
                let f = k as f64 * sampling_rate_hz / window_len as f64;
                config.bands.iter().enumerate().position(|(i, &(lo, hi))| {
                    f >= lo && (f < hi || (i == last && f == hi))
                })
            })
            .collect();
        let taper = match config.taper {
            Taper::None => None,
            Taper::Hann => Some(
                (0..window_len)
                    .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / window_len as f64).cos())
                    .collect(),
            ),
        };
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            config: config.clone(),
            window_len,
            fft,
            band_of_bin,
            taper,
            buffer: vec![Complex::default(); window_len],
            scratch,
            sums: vec![0.0; config.bands.len()],
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Feature length for `channels` channels.
    pub fn feature_len(&self, channels: usize) -> usize {
        channels * self.config.bands.len()
    }

    /// Sum of spectrum values per band for one channel, before the transform.
    pub fn band_sums(&mut self, channel: &[f64]) -> Result<&[f64]> {
        if channel.len() != self.window_len {
            return Err(Error::Dimension {
                expected: self.window_len,
                actual: channel.len(),
            });
        }
        for (n, (dst, &x)) in self.buffer.iter_mut().zip(channel).enumerate() {
            let w = self.taper.as_ref().map_or(1.0, |t| t[n]);
            *dst = Complex::new(x * w, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for (k, band) in self.band_of_bin.iter().enumerate() {
            if let Some(b) = band {
                let bin = self.buffer[k + 1];
                self.sums[*b] += match self.config.spectrum {
                    Spectrum::Amplitude => bin.norm(),
                    Spectrum::Power => bin.norm_sqr(),
                };
            }
        }
        Ok(&self.sums)
    }

    /// Features of one `window_len x channels` window, written channel-major
    /// (all bands of the first channel, then the next channel) into `out`.
    pub fn features_into(&mut self, window: DMatrixView<'_, f64>, out: &mut [f64]) -> Result<()> {
        if window.nrows() != self.window_len {
            return Err(Error::Dimension {
                expected: self.window_len,
                actual: window.nrows(),
            });
        }
        let bands = self.config.bands.len();
        if out.len() != window.ncols() * bands {
            return Err(Error::Dimension {
                expected: window.ncols() * bands,
                actual: out.len(),
            });
        }
        let floor = self.config.epsilon_floor;
        let transform = self.config.transform;
        let mut column = vec![0.0; self.window_len];
        for (c, block) in out.chunks_exact_mut(bands).enumerate() {
            column
                .iter_mut()
                .zip(window.column(c).iter())
                .for_each(|(d, &s)| *d = s);
            let sums = self.band_sums(&column)?;
            for (dst, &s) in block.iter_mut().zip(sums) {
                *dst = match transform {
                    Transform::Log => s.max(floor).ln(),
                };
            }
        }
        Ok(())
    }
}

/// FDT features of a single window (`samples x channels`).
pub fn fdt_features(
    window: &DMatrix<f64>,
    config: &FdtConfig,
    sampling_rate_hz: f64,
) -> Result<FeatureVector> {
    let mut extractor = FdtExtractor::new(config, window.nrows(), sampling_rate_hz)?;
    let mut values = vec![0.0; extractor.feature_len(window.ncols())];
    extractor.features_into(window.as_view(), &mut values)?;
    Ok(FeatureVector {
        values,
        selection: String::new(),
        window_index: 0,
    })
}
