//! Feature extraction: channel selection, common-average re-referencing,
//! sliding windows and frequency-band (FDT) log-magnitude features.

mod car;
mod fdt;
mod series;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use car::{common_average_reference, notch_filter};
pub use fdt::{fdt_features, FdtExtractor};
pub use series::{extract_series, segment, window_ranges, FeatureSeries, FeatureVector};

/// Named, ordered set of columns taken from a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSelection {
    pub name: String,
    pub channel_indices: Vec<usize>,
}

impl ChannelSelection {
    pub fn new(name: impl Into<String>, channel_indices: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            channel_indices,
        }
    }

    /// Proximal forearm ring: the first eight columns of a 32-column file.
    pub fn forearm() -> Self {
        Self::new("forearm", (0..8).collect())
    }

    /// One six-electrode wrist ring: columns 19-24 (1-based) of a 32-column
    /// file, after the forearm block and two unused columns.
    pub fn wrist() -> Self {
        Self::new("wrist", (18..24).collect())
    }

    pub fn len(&self) -> usize {
        self.channel_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_indices.is_empty()
    }

    pub fn validate(&self, channel_count: usize) -> Result<()> {
        let mut seen = vec![false; channel_count];
        for &idx in &self.channel_indices {
            if idx >= channel_count {
                return Err(Error::Config(format!(
                    "selection {:?}: channel {idx} out of range for {channel_count} channels",
                    self.name
                )));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Config(format!(
                    "selection {:?}: channel {idx} listed twice",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Sliding window geometry in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub window_len: usize,
    pub step: usize,
}

impl Default for WindowSpec {
    /// 200 ms windows every 50 ms at 2048 Hz, rounded to whole samples.
    fn default() -> Self {
        Self {
            window_len: 410,
            step: 102,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::Config("window must span at least 2 samples".into()));
        }
        if self.step == 0 || self.step > self.window_len {
            return Err(Error::Config(format!(
                "window step {} must be in 1..={}",
                self.step, self.window_len
            )));
        }
        Ok(())
    }

    pub fn window_count(&self, sample_count: usize) -> usize {
        if sample_count < self.window_len {
            0
        } else {
            (sample_count - self.window_len) / self.step + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    None,
    Hann,
}

/// Which spectrum values are summed inside a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectrum {
    #[default]
    Amplitude,
    Power,
}

/// Smoothing applied to each band sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdtConfig {
    /// Contiguous `(low, high)` band edges in Hz. A bin at frequency `f`
    /// belongs to a band when `low <= f < high`; the last band also takes
    /// `f == high`.
    pub bands: Vec<(f64, f64)>,
    #[serde(default)]
    pub transform: Transform,
    pub epsilon_floor: f64,
    #[serde(default)]
    pub taper: Taper,
    #[serde(default)]
    pub spectrum: Spectrum,
    /// Optional mains notch frequency applied before windowing.
    #[serde(default)]
    pub notch_hz: Option<f64>,
}

impl Default for FdtConfig {
    /// Six equal-width bands tiling 20-450 Hz.
    fn default() -> Self {
        Self {
            bands: vec![
                (20.0, 92.0),
                (92.0, 163.0),
                (163.0, 235.0),
                (235.0, 307.0),
                (307.0, 378.0),
                (378.0, 450.0),
            ],
            transform: Transform::Log,
            epsilon_floor: 1e-12,
            taper: Taper::None,
            spectrum: Spectrum::Amplitude,
            notch_hz: None,
        }
    }
}

impl FdtConfig {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn validate(&self, sampling_rate_hz: f64) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("at least one band is required".into()));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor.is_finite()) {
            return Err(Error::Config("epsilon_floor must be positive".into()));
        }
        let nyquist = sampling_rate_hz / 2.0;
        for (i, &(lo, hi)) in self.bands.iter().enumerate() {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::Config(format!("band {i} ({lo}, {hi}) is empty or negative")));
            }
            if hi >= nyquist {
                return Err(Error::Config(format!(
                    "band {i} edge {hi} Hz is not below Nyquist {nyquist} Hz"
                )));
            }
            if i > 0 && self.bands[i - 1].1 != lo {
                return Err(Error::Config(format!(
                    "band {i} starts at {lo} Hz but previous band ends at {} Hz",
                    self.bands[i - 1].1
                )));
            }
        }
        if let Some(f0) = self.notch_hz {
            if !(f0 > 0.0 && f0 < nyquist) {
                return Err(Error::Config(format!("notch frequency {f0} Hz out of range")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_selections_have_ring_sizes() {
        assert_eq!(ChannelSelection::forearm().len(), 8);
        assert_eq!(ChannelSelection::wrist().len(), 6);
        ChannelSelection::forearm().validate(32).unwrap();
        ChannelSelection::wrist().validate(32).unwrap();
    }

    #[test]
    fn selection_validation() {
        assert!(ChannelSelection::new("x", vec![0, 0]).validate(4).is_err());
        assert!(ChannelSelection::new("x", vec![0, 4]).validate(4).is_err());
        assert!(ChannelSelection::wrist().validate(16).is_err());
    }

    #[test]
    fn window_spec_rules() {
        WindowSpec::default().validate().unwrap();
        assert!(WindowSpec { window_len: 10, step: 11 }.validate().is_err());
        assert!(WindowSpec { window_len: 10, step: 0 }.validate().is_err());
        assert_eq!(WindowSpec::default().window_count(10240), 97);
        assert_eq!(WindowSpec::default().window_count(410), 1);
        assert_eq!(WindowSpec::default().window_count(409), 0);
    }

    #[test]
    fn band_validation() {
        FdtConfig::default().validate(2048.0).unwrap();
        assert!(FdtConfig::default().validate(800.0).is_err());
        let mut gap = FdtConfig::default();
        gap.bands[2].0 = 170.0;
        assert!(gap.validate(2048.0).is_err());
        let inverted = FdtConfig {
            bands: vec![(50.0, 40.0)],
            ..FdtConfig::default()
        };
        assert!(inverted.validate(2048.0).is_err());
    }
}
