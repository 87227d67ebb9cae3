use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;

use super::header::{parse_header, ChannelSpec, RecordHeader};
use super::RecordKey;
use crate::error::{io_err, Error, Result};

/// One trial: `sample_count x channel_count` samples in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub key: RecordKey,
    pub samples: DMatrix<f64>,
    pub sampling_rate_hz: f64,
}

impl SignalRecord {
    pub fn new(key: RecordKey, samples: DMatrix<f64>, sampling_rate_hz: f64) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidRecord(format!(
                "{key}: empty {}x{} sample matrix",
                samples.nrows(),
                samples.ncols()
            )));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "{key}: sampling rate must be positive"
            )));
        }
        if let Some(idx) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!(
                "{key}: non-finite sample at flat index {idx}"
            )));
        }
        Ok(Self {
            key,
            samples,
            sampling_rate_hz,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.samples.ncols()
    }
}

/// Decode a format-16 signal file: little-endian `i16`, interleaved
/// sample-major. Physical value is `(raw - baseline) / gain`.
pub fn decode_signal(bytes: &[u8], header: &RecordHeader) -> Result<SignalRecord> {
    let key = RecordKey::from_record_name(&header.record_name)?;
    let rows = header.sample_count;
    let cols = header.channel_count;
    let expected = rows * cols * 2;
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bytes.len(),
        });
    }

    let mut samples = DMatrix::<f64>::zeros(rows, cols);
    let mut checksums = vec![0i16; cols];
    for (idx, pair) in bytes.chunks_exact(2).enumerate() {
        let raw = i16::from_le_bytes([pair[0], pair[1]]);
        let (row, col) = (idx / cols, idx % cols);
        let ch = &header.channels[col];
        checksums[col] = checksums[col].wrapping_add(raw);
        samples[(row, col)] = (f64::from(raw) - f64::from(ch.baseline)) / ch.gain;
    }
    for (col, ch) in header.channels.iter().enumerate() {
        if let Some(expected) = ch.checksum {
            if expected as i16 != checksums[col] && expected != 0 {
                warn!(
                    "{}: checksum mismatch on signal {} (header {}, computed {})",
                    header.record_name, col, expected, checksums[col]
                );
            }
        }
    }

    SignalRecord::new(key, samples, header.sampling_rate_hz)
}

fn quantize_value(value: f64, gain: f64) -> Option<i16> {
    let q = (value * gain).round();
    // -32768 is the WFDB invalid-sample marker for format 16.
    (q.is_finite() && (-32767.0..=32767.0).contains(&q)).then_some(q as i16)
}

/// The record as it will read back after encoding at `gain`.
pub fn quantize(record: &SignalRecord, gain: f64) -> Result<SignalRecord> {
    let mut out = record.clone();
    for col in 0..record.channel_count() {
        for row in 0..record.sample_count() {
            let v = record.samples[(row, col)];
            let q = quantize_value(v, gain).ok_or(Error::Overflow {
                channel: col,
                sample: row,
                value: v,
                gain,
            })?;
            out.samples[(row, col)] = f64::from(q) / gain;
        }
    }
    Ok(out)
}

/// Encode a record into a (`.hea`, `.dat`) byte pair with a uniform gain.
pub fn encode_record(record: &SignalRecord, gain: f64) -> Result<(Vec<u8>, Vec<u8>)> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Config(format!("gain must be positive, got {gain}")));
    }
    let (rows, cols) = record.samples.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidRecord(
            "sample count and channel count must be positive".into(),
        ));
    }

    let mut data = Vec::with_capacity(rows * cols * 2);
    let mut checksums = vec![0i16; cols];
    let mut initial = vec![0i16; cols];
    for row in 0..rows {
        for col in 0..cols {
            let v = record.samples[(row, col)];
            let q = quantize_value(v, gain).ok_or(Error::Overflow {
                channel: col,
                sample: row,
                value: v,
                gain,
            })?;
            if row == 0 {
                initial[col] = q;
            }
            checksums[col] = checksums[col].wrapping_add(q);
            data.extend_from_slice(&q.to_le_bytes());
        }
    }

    let name = record.key.record_name();
    let header = RecordHeader {
        record_name: name.clone(),
        channel_count: cols,
        sample_count: rows,
        sampling_rate_hz: record.sampling_rate_hz,
        channels: (0..cols)
            .map(|col| ChannelSpec {
                file_name: format!("{name}.dat"),
                format: 16,
                gain,
                baseline: 0,
                units: "mV".into(),
                adc_resolution: Some(16),
                adc_zero: 0,
                initial_value: Some(i32::from(initial[col])),
                checksum: Some(i32::from(checksums[col])),
                label: format!("ch{}", col + 1),
            })
            .collect(),
    };
    Ok((header.to_text().into_bytes(), data))
}

/// Read a record given the path of its `.hea` file (or the extensionless stem).
pub fn read_record(path: &Path) -> Result<SignalRecord> {
    let hea = path.with_extension("hea");
    let header_bytes = fs::read(&hea).map_err(io_err(&hea))?;
    let header = parse_header(&header_bytes).map_err(|e| Error::Format {
        path: hea.clone(),
        message: e.to_string(),
    })?;
    let dat = hea.with_file_name(&header.channels[0].file_name);
    let data = fs::read(&dat).map_err(io_err(&dat))?;
    decode_signal(&data, &header).map_err(|e| Error::Format {
        path: dat,
        message: e.to_string(),
    })
}

/// Write a record below `root` using the dataset directory layout. Returns
/// the path of the written `.hea` file.
pub fn write_record(root: &Path, record: &SignalRecord, gain: f64) -> Result<PathBuf> {
    let (header, data) = encode_record(record, gain)?;
    let stem = root.join(record.key.relative_stem());
    let dir = stem.parent().expect("stem has a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let hea = stem.with_extension("hea");
    let dat = stem.with_extension("dat");
    fs::write(&hea, header).map_err(io_err(&hea))?;
    fs::write(&dat, data).map_err(io_err(&dat))?;
    Ok(hea)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_2x2(gain: f64) -> RecordHeader {
        let text = format!(
            "session1_subject1_gesture1_trial1 2 2048 2\n\
             s.dat 16 {gain}/mV\ns.dat 16 {gain}/mV\n"
        );
        parse_header(text.as_bytes()).unwrap()
    }

    fn raw_bytes(values: &[i16]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn decodes_hand_computed_samples() {
        let rec = decode_signal(&raw_bytes(&[100, -100, 0, 32767]), &header_2x2(500.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.2, -0.2, 0.0, 65.534]);
        assert_eq!(rec.samples, expected);
        assert_eq!(rec.key, RecordKey::new(1, 1, 1, 1));
    }

    #[test]
    fn all_zero_bytes_decode_to_zero() {
        let rec = decode_signal(&[0u8; 8], &header_2x2(500.0)).unwrap();
        assert!(rec.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_stream_is_a_length_error() {
        let err = decode_signal(&raw_bytes(&[1, 2, 3]), &header_2x2(1.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 8,
                actual: 6
            }
        ));
    }

    #[test]
    fn unparseable_name_is_an_identity_error() {
        let h = parse_header(b"x 1 10 1\nx.dat 16 1\n").unwrap();
        assert!(matches!(decode_signal(&[0, 0], &h), Err(Error::Identity(_))));
    }

    #[test]
    fn baseline_is_removed_before_gain() {
        let h = parse_header(b"session1_subject1_gesture1_trial1 1 10 1\nx.dat 16 10(20)\n").unwrap();
        let rec = decode_signal(&raw_bytes(&[30]), &h).unwrap();
        assert_eq!(rec.samples[(0, 0)], 1.0);
    }

    #[test]
    fn overflow_names_channel_and_sample() {
        let key = RecordKey::new(1, 1, 1, 1);
        let samples = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 70.0]);
        let rec = SignalRecord::new(key, samples, 2048.0).unwrap();
        match encode_record(&rec, 500.0).unwrap_err() {
            Error::Overflow {
                channel, sample, ..
            } => assert_eq!((channel, sample), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_record_is_rejected() {
        let key = RecordKey::new(1, 1, 1, 1);
        assert!(SignalRecord::new(key, DMatrix::zeros(0, 4), 2048.0).is_err());
    }

    #[test]
    fn encode_then_decode_matches_quantized() {
        let key = RecordKey::new(3, 43, 17, 7);
        let samples = DMatrix::from_fn(5, 3, |r, c| (r as f64 - 2.0) * 0.37 + c as f64 * 0.011);
        let rec = SignalRecord::new(key, samples, 2048.0).unwrap();
        let (hea, dat) = encode_record(&rec, 1234.5).unwrap();
        let header = parse_header(&hea).unwrap();
        let back = decode_signal(&dat, &header).unwrap();
        assert_eq!(back, quantize(&rec, 1234.5).unwrap());
    }
}
