use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One signal specification line of a WFDB header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub file_name: String,
    pub format: u16,
    /// ADC units per physical unit.
    pub gain: f64,
    /// Raw value corresponding to zero physical units.
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: Option<u32>,
    pub adc_zero: i32,
    pub initial_value: Option<i32>,
    pub checksum: Option<i32>,
    pub label: String,
}

/// Parsed single-segment WFDB header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_name: String,
    pub channel_count: usize,
    pub sample_count: usize,
    pub sampling_rate_hz: f64,
    pub channels: Vec<ChannelSpec>,
}

impl RecordHeader {
    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.channels.iter().map(|c| c.gain)
    }

    /// Render the header in WFDB text form.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {}\n",
            self.record_name, self.channel_count, self.sampling_rate_hz, self.sample_count
        );
        for ch in &self.channels {
            out.push_str(&format!(
                "{} {} {}({})/{} {} {} {} {} 0 {}\n",
                ch.file_name,
                ch.format,
                ch.gain,
                ch.baseline,
                ch.units,
                ch.adc_resolution.unwrap_or(16),
                ch.adc_zero,
                ch.initial_value.unwrap_or(0),
                ch.checksum.unwrap_or(0),
                ch.label
            ));
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::HeaderParse {
        line,
        message: message.into(),
    }
}

/// Parse a textual WFDB header.
///
/// Only the subset the dataset uses is accepted: one segment, every signal
/// stored as format 16 in one shared signal file. Line numbers in errors are
/// 1-based and count comment lines.
pub fn parse_header(bytes: &[u8]) -> Result<RecordHeader> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (rec_line, rec) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty header"))?;
    let fields: Vec<&str> = rec.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(parse_err(
            rec_line,
            "record line needs name, signal count, sampling frequency and sample count",
        ));
    }
    let record_name = fields[0];
    if record_name.contains('/') {
        return Err(parse_err(rec_line, "multi-segment records are not supported"));
    }
    let channel_count: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(rec_line, format!("bad signal count {:?}", fields[1])))?;
    // fs may carry "/counter_freq" and "(base_counter)" suffixes.
    let fs_text = fields[2].split(['/', '(']).next().unwrap_or_default();
    let sampling_rate_hz: f64 = fs_text
        .parse()
        .map_err(|_| parse_err(rec_line, format!("bad sampling frequency {:?}", fields[2])))?;
    let sample_count: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(rec_line, format!("bad sample count {:?}", fields[3])))?;
    if channel_count == 0 {
        return Err(parse_err(rec_line, "signal count must be positive"));
    }
    if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
        return Err(parse_err(rec_line, "sampling frequency must be positive"));
    }
    if sample_count == 0 {
        return Err(parse_err(rec_line, "sample count must be positive"));
    }

    let mut channels = Vec::with_capacity(channel_count);
    for (line_no, line) in lines.by_ref().take(channel_count) {
        channels.push(parse_signal_line(line_no, line)?);
    }
    if channels.len() != channel_count {
        return Err(parse_err(
            text.lines().count(),
            format!(
                "header declares {channel_count} signals but has {} signal lines",
                channels.len()
            ),
        ));
    }
    let first_file = &channels[0].file_name;
    if channels.iter().any(|c| &c.file_name != first_file) {
        return Err(parse_err(
            rec_line,
            "signals spread over several files are not supported",
        ));
    }

    Ok(RecordHeader {
        record_name: record_name.to_string(),
        channel_count,
        sample_count,
        sampling_rate_hz,
        channels,
    })
}

fn parse_signal_line(line_no: usize, line: &str) -> Result<ChannelSpec> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 3 {
        return Err(parse_err(
            line_no,
            "signal line needs file name, format and gain fields",
        ));
    }
    let format = parse_format(line_no, fields[1])?;
    let (gain, baseline, units) = parse_gain(line_no, fields[2])?;

    let int_field = |idx: usize, what: &str| -> Result<Option<i64>> {
        fields
            .get(idx)
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|_| parse_err(line_no, format!("bad {what} {s:?}")))
            })
            .transpose()
    };
    let adc_resolution = int_field(3, "ADC resolution")?.map(|v| v as u32);
    let adc_zero = int_field(4, "ADC zero")?.unwrap_or(0) as i32;
    let initial_value = int_field(5, "initial value")?.map(|v| v as i32);
    let checksum = int_field(6, "checksum")?.map(|v| v as i32);
    let _block_size = int_field(7, "block size")?;
    let label = if fields.len() > 8 {
        fields[8..].join(" ")
    } else {
        String::new()
    };

    Ok(ChannelSpec {
        file_name: fields[0].to_string(),
        format,
        gain,
        // WFDB: an absent baseline defaults to the ADC zero.
        baseline: baseline.unwrap_or(adc_zero),
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        label,
    })
}

fn parse_format(line_no: usize, field: &str) -> Result<u16> {
    let unsupported = || Error::UnsupportedFormat {
        line: line_no,
        format: field.to_string(),
    };
    // Suffixes: "xN" samples per frame, ":N" skew, "+N" byte offset.
    let (code, rest) = field.split_at(field.find(['x', ':', '+']).unwrap_or(field.len()));
    let code: u16 = code
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad storage format {field:?}")))?;
    if code != 16 {
        return Err(unsupported());
    }
    if !matches!(rest, "" | "x1" | ":0" | "+0") {
        return Err(unsupported());
    }
    Ok(code)
}

/// `gain[(baseline)][/units]`
fn parse_gain(line_no: usize, field: &str) -> Result<(f64, Option<i32>, String)> {
    let (head, units) = match field.split_once('/') {
        Some((h, u)) => (h, u.to_string()),
        None => (field, String::new()),
    };
    let (gain_text, baseline) = match head.split_once('(') {
        Some((g, b)) => {
            let b = b
                .strip_suffix(')')
                .ok_or_else(|| parse_err(line_no, format!("unterminated baseline in {field:?}")))?;
            let b: i32 = b
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad baseline in {field:?}")))?;
            (g, Some(b))
        }
        None => (head, None),
    };
    let gain: f64 = gain_text
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad gain {field:?}")))?;
    if !(gain.is_finite() && gain > 0.0) {
        return Err(parse_err(line_no, format!("gain must be positive, got {field:?}")));
    }
    Ok((gain, baseline, units))
}
