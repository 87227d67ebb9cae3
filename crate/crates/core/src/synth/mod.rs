//! Deterministic synthetic EMG-like recordings with per-subject band
//! signatures, session drift and trial noise.
//!
//! Each channel is Gaussian noise shaped in the frequency domain: every FFT
//! coefficient of the full record that falls in a feature band gets a
//! circular complex Gaussian value with standard deviation
//! `amplitude * exp(L)`, where `L` is the log-amplitude of that
//! (channel, band) for the record. Coefficients outside the bands are zero.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::{quantize, write_record, DatasetManifest, GridSpec, RecordKey, SignalRecord};
use crate::dsp::{ChannelSelection, FdtConfig};
use crate::error::{io_err, Error, Result};
use crate::seed;

/// Largest raw magnitude a generated sample may reach after scaling.
const RAW_LIMIT: f64 = 32000.0;

/// Gaussian draws used to integrate the expected log band sum.
const ORACLE_DRAWS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subject_count: u16,
    pub session_count: u16,
    pub gesture_count: u16,
    pub trial_count: u16,
    pub sample_count: usize,
    pub channel_count: usize,
    pub sampling_rate_hz: f64,
    /// Spread of the per-subject deviation from the gesture signature.
    pub separation: f64,
    /// Spread of the per-(subject, session) offset.
    pub session_drift: f64,
    /// Spread of the per-trial offset.
    pub noise_level: f64,
    /// Spread of the gesture signature shared by all subjects.
    pub gesture_contrast: f64,
    pub rng_seed: u64,
    pub bands: Vec<(f64, f64)>,
    /// RMS of a channel whose log-amplitudes are all zero, in mV.
    pub rms_mv: f64,
    /// Preferred ADC gain; lowered per record when samples would overflow.
    pub gain: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subject_count: 43,
            session_count: 3,
            gesture_count: 17,
            trial_count: 7,
            sample_count: 10240,
            channel_count: 32,
            sampling_rate_hz: 2048.0,
            separation: 0.1,
            session_drift: 0.15,
            noise_level: 0.2,
            gesture_contrast: 0.15,
            rng_seed: 0,
            bands: FdtConfig::default().bands,
            rms_mv: 0.25,
            gain: 1000.0,
        }
    }
}

impl SynthConfig {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            sessions: self.session_count,
            subjects: self.subject_count,
            gestures: self.gesture_count,
            trials: self.trial_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subject_count == 0
            || self.session_count == 0
            || self.gesture_count == 0
            || self.trial_count == 0
            || self.sample_count < 4
            || self.channel_count == 0
        {
            return Err(Error::Config("synthetic dataset counts must be positive".into()));
        }
        if !(self.sampling_rate_hz > 0.0 && self.sampling_rate_hz.is_finite()) {
            return Err(Error::Config("sampling rate must be positive".into()));
        }
        for (name, v) in [
            ("separation", self.separation),
            ("session_drift", self.session_drift),
            ("noise_level", self.noise_level),
            ("gesture_contrast", self.gesture_contrast),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.rms_mv > 0.0 && self.gain > 0.0) {
            return Err(Error::Config("rms_mv and gain must be positive".into()));
        }
        let fdt = FdtConfig {
            bands: self.bands.clone(),
            ..FdtConfig::default()
        };
        fdt.validate(self.sampling_rate_hz)?;
        if band_bins(&self.bands, self.sample_count, self.sampling_rate_hz)
            .iter()
            .all(Option::is_none)
        {
            return Err(Error::Config("no FFT bin of the record falls in a band".into()));
        }
        Ok(())
    }

    fn band_count(&self) -> usize {
        self.bands.len()
    }
}

/// Band of each bin `0..n/2` of an `n`-point transform; `None` outside the
/// bands and at DC.
fn band_bins(bands: &[(f64, f64)], n: usize, fs: f64) -> Vec<Option<usize>> {
    let last = bands.len().saturating_sub(1);
    (0..n / 2)
        .map(|k| {
            if k == 0 {
                return None;
            }
            let f = k as f64 * fs / n as f64;
            bands
                .iter()
                .enumerate()
                .position(|(i, &(lo, hi))| f >= lo && (f < hi || (i == last && f == hi)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject: u16,
    /// Log-amplitude per `[gesture][channel][band]`, flattened.
    pub signature: Vec<f64>,
    /// Additive log-amplitude per `[session][channel][band]`, flattened.
    pub session_offsets: Vec<f64>,
}

/// Everything the generator used, for oracle checks in tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Per-coefficient standard deviation at zero log-amplitude.
    pub amplitude: f64,
    pub profiles: Vec<SubjectProfile>,
}

impl GroundTruth {
    pub fn build(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let (g_n, c_n, b_n) = (
            usize::from(config.gesture_count),
            config.channel_count,
            config.band_count(),
        );
        let gesture_base: Vec<Vec<f64>> = (1..=config.gesture_count)
            .map(|g| {
                let mut rng = seed::stream(config.rng_seed, "synth-gesture", &[u64::from(g)]);
                (0..c_n * b_n).map(|_| rng.sample(StandardNormal)).collect()
            })
            .collect();
        let profiles = (1..=config.subject_count)
            .map(|j| {
                let mut rng = seed::stream(config.rng_seed, "synth-subject", &[u64::from(j)]);
                let mut signature = Vec::with_capacity(g_n * c_n * b_n);
                for base in &gesture_base {
                    for &b in base {
                        let dev: f64 = rng.sample(StandardNormal);
                        signature.push(config.gesture_contrast * b + config.separation * dev);
                    }
                }
                let session_offsets = (0..usize::from(config.session_count) * c_n * b_n)
                    .map(|_| config.session_drift * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                SubjectProfile {
                    subject: j,
                    signature,
                    session_offsets,
                }
            })
            .collect();
        let bins = band_bins(&config.bands, config.sample_count, config.sampling_rate_hz);
        let in_band = bins.iter().flatten().count() as f64;
        let n = config.sample_count as f64;
        // variance of a sample is 2 * sum(sigma_f^2) / n^2 over positive bins
        let amplitude = config.rms_mv * n / (2.0 * in_band).sqrt();
        Ok(Self {
            config: config.clone(),
            amplitude,
            profiles,
        })
    }

    fn profile(&self, subject: u16) -> Result<&SubjectProfile> {
        subject
            .checked_sub(1)
            .and_then(|i| self.profiles.get(usize::from(i)))
            .ok_or_else(|| Error::Missing(format!("no synthetic subject {subject}")))
    }

    /// Log-amplitude per `[channel][band]` of a (subject, gesture, session),
    /// before trial noise.
    pub fn log_amplitudes(&self, subject: u16, gesture: u16, session: u16) -> Result<Vec<f64>> {
        let cfg = &self.config;
        let p = self.profile(subject)?;
        if !(1..=cfg.gesture_count).contains(&gesture) || !(1..=cfg.session_count).contains(&session) {
            return Err(Error::Missing(format!(
                "no synthetic gesture {gesture} or session {session}"
            )));
        }
        let cb = cfg.channel_count * cfg.band_count();
        let sig = &p.signature[usize::from(gesture - 1) * cb..][..cb];
        let off = &p.session_offsets[usize::from(session - 1) * cb..][..cb];
        Ok(sig.iter().zip(off).map(|(a, b)| a + b).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Record generator with a cached inverse FFT plan.
pub struct Synthesizer {
    truth: GroundTruth,
    ifft: Arc<dyn Fft<f64>>,
    bins: Vec<Option<usize>>,
}

impl Synthesizer {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        let truth = GroundTruth::build(config)?;
        let ifft = FftPlanner::new().plan_fft_inverse(config.sample_count);
        let bins = band_bins(&config.bands, config.sample_count, config.sampling_rate_hz);
        Ok(Self { truth, ifft, bins })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.truth.config
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Manifest of the complete in-memory dataset.
    pub fn manifest(&self) -> DatasetManifest {
        let grid = self.config().grid();
        DatasetManifest::from_keys("synthetic", grid, grid.keys()).expect("grid keys are unique")
    }

    /// Unquantized record and the gain it should be stored with.
    pub fn raw_record(&self, key: &RecordKey) -> Result<(SignalRecord, f64)> {
        let cfg = self.config();
        if !cfg.grid().contains(key) {
            return Err(Error::Missing(format!("{key} lies outside the synthetic grid")));
        }
        let base = self.truth.log_amplitudes(key.subject, key.gesture, key.session)?;
        let ids = [key.session, key.subject, key.gesture, key.trial].map(u64::from);
        let mut rng = seed::stream(cfg.rng_seed, "synth-record", &ids);
        let levels: Vec<f64> = base
            .iter()
            .map(|&l| l + cfg.noise_level * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let n = cfg.sample_count;
        let b_n = cfg.band_count();
        let mut samples = DMatrix::zeros(n, cfg.channel_count);
        let mut buf = vec![Complex::default(); n];
        let mut scratch = vec![Complex::default(); self.ifft.get_inplace_scratch_len()];
        for c in 0..cfg.channel_count {
            buf.fill(Complex::default());
            for (f, band) in self.bins.iter().enumerate() {
                let Some(b) = band else { continue };
                let sigma = self.truth.amplitude * levels[c * b_n + b].exp() * std::f64::consts::FRAC_1_SQRT_2;
                let z = Complex::new(
                    sigma * rng.sample::<f64, _>(StandardNormal),
                    sigma * rng.sample::<f64, _>(StandardNormal),
                );
                buf[f] = z;
                buf[n - f] = z.conj();
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for (row, z) in buf.iter().enumerate() {
                samples[(row, c)] = z.re / n as f64;
            }
        }
        let peak = samples.amax();
        let gain = if peak * cfg.gain <= RAW_LIMIT {
            cfg.gain
        } else {
            (RAW_LIMIT / peak).floor().max(1.0)
        };
        Ok((SignalRecord::new(*key, samples, cfg.sampling_rate_hz)?, gain))
    }

    /// The record exactly as it reads back from disk.
    pub fn record(&self, key: &RecordKey) -> Result<SignalRecord> {
        let (rec, gain) = self.raw_record(key)?;
        quantize(&rec, gain)
    }

    /// Expected FDT features of a (subject, gesture, session) with no trial
    /// noise, for a window of `window_len` samples after common-average
    /// re-referencing over `selection`. Assumes amplitude spectra, no taper
    /// and no notch, with the generator's bands.
    pub fn expected_features(
        &self,
        subject: u16,
        gesture: u16,
        session: u16,
        selection: &ChannelSelection,
        window_len: usize,
    ) -> Result<Vec<f64>> {
        expected_features(&self.truth, subject, gesture, session, selection, window_len)
    }
}

/// See [`Synthesizer::expected_features`].
///
/// The window DFT bins of a band are jointly Gaussian, but not circular:
/// leakage of strong bands through the rectangular window couples each bin
/// with its mirror image. Their covariance and pseudo-covariance are computed
/// exactly from the Dirichlet kernel of the window and the re-referencing
/// weights; the mean log band sum is then integrated numerically over that
/// Gaussian law with a fixed-seed sample.
pub fn expected_features(
    truth: &GroundTruth,
    subject: u16,
    gesture: u16,
    session: u16,
    selection: &ChannelSelection,
    window_len: usize,
) -> Result<Vec<f64>> {
    let cfg = &truth.config;
    selection.validate(cfg.channel_count)?;
    if selection.len() < 2 {
        return Err(Error::TooFew {
            what: "channels for common-average reference",
            needed: 2,
            got: selection.len(),
        });
    }
    if window_len < 2 || window_len > cfg.sample_count {
        return Err(Error::SignalTooShort {
            samples: cfg.sample_count,
            window: window_len,
        });
    }
    let levels = truth.log_amplitudes(subject, gesture, session)?;
    let b_n = cfg.band_count();
    let n = cfg.sample_count;
    let w = window_len as f64;
    let synth_bins = band_bins(&cfg.bands, n, cfg.sampling_rate_hz);
    let mut feature_bins = band_bins(&cfg.bands, window_len, cfg.sampling_rate_hz);
    if window_len.is_multiple_of(2) {
        // the extractor also uses the Nyquist bin of even windows
        let last = b_n - 1;
        let f = cfg.sampling_rate_hz / 2.0;
        feature_bins.push(cfg.bands.iter().enumerate().position(|(i, &(lo, hi))| {
            f >= lo && (f < hi || (i == last && f == hi))
        }));
    }
    let members: Vec<Vec<usize>> = (0..b_n)
        .map(|b| (0..feature_bins.len()).filter(|&k| feature_bins[k] == Some(b)).collect())
        .collect();

    // window transform of a unit complex exponential at normalized frequency delta
    let dirichlet = |delta: f64| -> Complex<f64> {
        let s = (PI * delta).sin();
        let mag = if s.abs() < 1e-12 {
            w * (PI * (w - 1.0) * delta).cos().signum()
        } else {
            (PI * w * delta).sin() / s
        };
        Complex::from_polar(1.0, PI * (w - 1.0) * delta) * mag
    };
    let n2 = (n as f64) * (n as f64);

    // kernel[fb][sb]: (covariance, pseudo-covariance) of the bins of feature
    // band fb per unit coefficient variance in synthesis band sb, row-major
    type Moments = (Complex<f64>, Complex<f64>);
    let kernel: Vec<Vec<Vec<Moments>>> = members
        .iter()
        .map(|ks| {
            let mut per_band = vec![vec![(Complex::default(), Complex::default()); ks.len() * ks.len()]; b_n];
            for (f, band) in synth_bins.iter().enumerate() {
                let Some(sb) = band else { continue };
                let fr = f as f64 / n as f64;
                let pos: Vec<Complex<f64>> = ks.iter().map(|&k| dirichlet(fr - k as f64 / w)).collect();
                let neg: Vec<Complex<f64>> = ks.iter().map(|&k| dirichlet(-fr - k as f64 / w)).collect();
                let m = &mut per_band[*sb];
                for a in 0..ks.len() {
                    for b in 0..ks.len() {
                        let cell = &mut m[a * ks.len() + b];
                        cell.0 += (pos[a] * pos[b].conj() + neg[a] * neg[b].conj()) / n2;
                        cell.1 += (pos[a] * neg[b] + neg[a] * pos[b]) / n2;
                    }
                }
            }
            per_band
        })
        .collect();

    let channel_moments = |c: usize, fb: usize| -> Vec<Moments> {
        let len = members[fb].len();
        let mut m = vec![(Complex::default(), Complex::default()); len * len];
        for sb in 0..b_n {
            let s = truth.amplitude * levels[c * b_n + sb].exp();
            for (dst, &(kc, kp)) in m.iter_mut().zip(&kernel[fb][sb]) {
                dst.0 += kc * (s * s);
                dst.1 += kp * (s * s);
            }
        }
        m
    };

    let cn = selection.len() as f64;
    let floor = FdtConfig::default().epsilon_floor;
    let mut rng = seed::stream(cfg.rng_seed, "synth-oracle", &[]);
    let draws: DMatrix<f64> = DMatrix::from_fn(2 * members.iter().map(Vec::len).max().unwrap_or(0), ORACLE_DRAWS, |_, _| {
        rng.sample(StandardNormal)
    });
    let mut out = vec![0.0; selection.len() * b_n];
    for fb in 0..b_n {
        let len = members[fb].len();
        if len == 0 {
            for ci in 0..selection.len() {
                out[ci * b_n + fb] = floor.ln();
            }
            continue;
        }
        let own: Vec<Vec<Moments>> =
            selection.channel_indices.iter().map(|&c| channel_moments(c, fb)).collect();
        let mut total = vec![(Complex::default(), Complex::default()); len * len];
        for m in &own {
            for (t, v) in total.iter_mut().zip(m) {
                t.0 += v.0;
                t.1 += v.1;
            }
        }
        for (ci, m) in own.iter().enumerate() {
            // real covariance of (Re X, Im X)
            let mut r = DMatrix::zeros(2 * len, 2 * len);
            for a in 0..len {
                for b in 0..len {
                    let (oc, op) = m[a * len + b];
                    let (tc, tp) = total[a * len + b];
                    let c = oc * (1.0 - 2.0 / cn) + tc / (cn * cn);
                    let p = op * (1.0 - 2.0 / cn) + tp / (cn * cn);
                    r[(a, b)] = 0.5 * (c + p).re;
                    r[(len + a, len + b)] = 0.5 * (c - p).re;
                    r[(len + a, b)] = 0.5 * (c + p).im;
                    r[(a, len + b)] = 0.5 * (p - c).im;
                }
            }
            let r = (&r + r.transpose()) * 0.5;
            let jitter = 1e-12 * r.trace() / (2 * len) as f64;
            let l = (0..8)
                .find_map(|i| {
                    let mut j = r.clone();
                    for d in 0..2 * len {
                        j[(d, d)] += jitter * 10f64.powi(i);
                    }
                    j.cholesky()
                })
                .ok_or(Error::SingularCovariance { shrinkage: 0.0 })?
                .l();
            let y = &l * draws.rows(0, 2 * len);
            let mean_log = y
                .column_iter()
                .map(|col| {
                    let s: f64 = (0..len).map(|a| col[a].hypot(col[len + a])).sum();
                    s.max(floor).ln()
                })
                .sum::<f64>()
                / ORACLE_DRAWS as f64;
            out[ci * b_n + fb] = mean_log;
        }
    }
    Ok(out)
}

/// Write the complete synthetic tree to `out_dir/data` and the ground truth
/// to `out_dir/ground_truth.json`. Returns the tree root.
pub fn generate(config: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    let synth = Synthesizer::new(config)?;
    let root = out_dir.join("data");
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let keys: Vec<RecordKey> = config.grid().keys().collect();
    keys.par_iter().try_for_each(|key| {
        let (rec, gain) = synth.raw_record(key)?;
        write_record(&root, &rec, gain).map(|_| ())
    })?;
    synth.truth().save(&out_dir.join("ground_truth.json"))?;
    Ok(root)
}
