use std::io::{BufRead, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{common_average_reference, notch_filter, ChannelSelection, FdtConfig, FdtExtractor, WindowSpec};
use crate::dataset::{RecordKey, SignalRecord};
use crate::error::{Error, Result};

const SERIES_MAGIC: &str = "# emgcode-features v1";

/// Features of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub selection: String,
    pub window_index: usize,
}

/// Per-window features of one trial, stored one window per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub key: RecordKey,
    pub selection: String,
    pub features: DMatrix<f64>,
}

impl FeatureSeries {
    pub fn new(key: RecordKey, selection: impl Into<String>, features: DMatrix<f64>) -> Self {
        Self {
            key,
            selection: selection.into(),
            features,
        }
    }

    /// Assemble a series from individual vectors (which must share a length).
    pub fn from_vectors(key: RecordKey, vectors: &[FeatureVector]) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.values.len());
        if let Some(bad) = vectors.iter().find(|v| v.values.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: bad.values.len(),
            });
        }
        let selection = vectors.first().map(|v| v.selection.clone()).unwrap_or_default();
        let features = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c].values[r]);
        Ok(Self::new(key, selection, features))
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.ncols() == 0
    }

    pub fn vector(&self, window: usize) -> FeatureVector {
        FeatureVector {
            values: self.features.column(window).iter().copied().collect(),
            selection: self.selection.clone(),
            window_index: window,
        }
    }

    pub fn vectors(&self) -> impl Iterator<Item = FeatureVector> + '_ {
        (0..self.len()).map(|w| self.vector(w))
    }

    pub fn column(&self, window: usize) -> DVector<f64> {
        self.features.column(window).into_owned()
    }

    /// Write the series in the versioned text format: a magic line, identity
    /// comment lines, a column header, then one CSV row per window.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{SERIES_MAGIC}")?;
        writeln!(w, "# record {}", self.key)?;
        writeln!(w, "# selection {}", self.selection)?;
        writeln!(w, "# dims {} windows {}", self.dim(), self.len())?;
        let header: Vec<String> = std::iter::once("window".to_string())
            .chain((0..self.dim()).map(|i| format!("f{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for c in 0..self.len() {
            write!(w, "{c}")?;
            for v in self.features.column(c).iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |msg: String| Error::InvalidRecord(format!("feature file: {msg}"));
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file".into()))?
                .map_err(|e| bad(e.to_string()))
        };
        if next()?.trim() != SERIES_MAGIC {
            return Err(bad("missing or unknown version line".into()));
        }
        let key_line = next()?;
        let key = RecordKey::from_record_name(
            key_line
                .strip_prefix("# record ")
                .ok_or_else(|| bad("missing record line".into()))?,
        )?;
        let sel_line = next()?;
        let selection = sel_line
            .strip_prefix("# selection ")
            .ok_or_else(|| bad("missing selection line".into()))?
            .to_string();
        let dims_line = next()?;
        let nums: Vec<usize> = dims_line
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect();
        let [dim, windows] = nums[..] else {
            return Err(bad(format!("bad dims line {dims_line:?}")));
        };
        next()?;
        let mut features = DMatrix::zeros(dim, windows);
        for c in 0..windows {
            let row = next()?;
            let mut cells = row.split(',');
            let idx: usize = cells
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("bad row {c}")))?;
            if idx != c {
                return Err(bad(format!("window {idx} out of order, expected {c}")));
            }
            let vals: Vec<f64> = cells
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row {c}: {e}")))?;
            if vals.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: vals.len(),
                });
            }
            features.column_mut(c).copy_from_slice(&vals);
        }
        Ok(Self::new(key, selection, features))
    }
}

/// Row ranges of every full window; a trailing partial window is dropped.
pub fn window_ranges(sample_count: usize, spec: &WindowSpec) -> Result<Vec<Range<usize>>> {
    spec.validate()?;
    if sample_count < spec.window_len {
        return Err(Error::SignalTooShort {
            samples: sample_count,
            window: spec.window_len,
        });
    }
    Ok((0..spec.window_count(sample_count))
        .map(|k| k * spec.step..k * spec.step + spec.window_len)
        .collect())
}

/// Split `samples` into overlapping row windows.
pub fn segment(samples: &DMatrix<f64>, spec: &WindowSpec) -> Result<Vec<DMatrix<f64>>> {
    Ok(window_ranges(samples.nrows(), spec)?
        .into_iter()
        .map(|r| samples.rows(r.start, r.len()).into_owned())
        .collect())
}

/// Common-average reference, optional notch, windowing and FDT features.
pub fn extract_series(
    record: &SignalRecord,
    selection: &ChannelSelection,
    wspec: &WindowSpec,
    fconfig: &FdtConfig,
) -> Result<FeatureSeries> {
    let mut car = common_average_reference(&record.samples, selection)?;
    if let Some(f0) = fconfig.notch_hz {
        notch_filter(&mut car, f0, record.sampling_rate_hz);
    }
    let ranges = window_ranges(car.nrows(), wspec)?;
    let mut extractor = FdtExtractor::new(fconfig, wspec.window_len, record.sampling_rate_hz)?;
    let dim = extractor.feature_len(selection.len());
    let mut features = DMatrix::zeros(dim, ranges.len());
    for (c, r) in ranges.into_iter().enumerate() {
        let window = car.rows(r.start, r.len());
        extractor.features_into(window, features.column_mut(c).as_mut_slice())?;
    }
    Ok(FeatureSeries::new(record.key, selection.name.clone(), features))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(samples: usize, channels: usize) -> SignalRecord {
        let m = DMatrix::from_fn(samples, channels, |r, c| {
            ((r * (c + 3) * 7919) % 101) as f64 / 50.0 - 1.0
        });
        SignalRecord::new(RecordKey::new(1, 2, 3, 4), m, 2048.0).unwrap()
    }

    #[test]
    fn window_count_matches_arithmetic() {
        let spec = WindowSpec::default();
        assert_eq!(window_ranges(10240, &spec).unwrap().len(), (10240 - 410) / 102 + 1);
        assert_eq!(window_ranges(410, &spec).unwrap(), vec![0..410]);
        assert!(matches!(
            window_ranges(409, &spec),
            Err(Error::SignalTooShort { .. })
        ));
        let r = window_ranges(1000, &spec).unwrap();
        assert_eq!(r[2], 204..614);
    }

    #[test]
    fn segment_copies_rows() {
        let m = DMatrix::from_fn(7, 2, |r, c| (r * 10 + c) as f64);
        let w = segment(&m, &WindowSpec { window_len: 3, step: 2 }).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[1][(0, 1)], 21.0);
        assert_eq!(w[2][(2, 0)], 60.0);
    }

    #[test]
    fn full_record_series_shapes() {
        let rec = record(10240, 32);
        let cfg = FdtConfig::default();
        let wspec = WindowSpec::default();
        let fa = extract_series(&rec, &ChannelSelection::forearm(), &wspec, &cfg).unwrap();
        assert_eq!((fa.dim(), fa.len()), (48, 97));
        let wr = extract_series(&rec, &ChannelSelection::wrist(), &wspec, &cfg).unwrap();
        assert_eq!((wr.dim(), wr.len()), (36, 97));
        assert_eq!(fa.selection, "forearm");
        assert_eq!(fa.vector(96).window_index, 96);
    }

    #[test]
    fn one_window_record_gives_one_vector() {
        let rec = record(410, 8);
        let sel = ChannelSelection::new("all", (0..8).collect());
        let s = extract_series(&rec, &sel, &WindowSpec::default(), &FdtConfig::default()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn series_file_round_trip() {
        let rec = record(1000, 4);
        let sel = ChannelSelection::new("pair", vec![1, 3]);
        let s = extract_series(&rec, &sel, &WindowSpec::default(), &FdtConfig::default()).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = FeatureSeries::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn from_vectors_checks_lengths() {
        let key = RecordKey::new(1, 1, 1, 1);
        let v = |n: usize| FeatureVector {
            values: vec![0.0; n],
            selection: "x".into(),
            window_index: 0,
        };
        assert!(FeatureSeries::from_vectors(key, &[v(3), v(4)]).is_err());
        assert_eq!(FeatureSeries::from_vectors(key, &[v(3), v(3)]).unwrap().len(), 2);
    }
}
