//! On-disk GrabMyo-style dataset: WFDB-subset headers and format-16 signal
//! files, record identities, and the dataset manifest.

mod header;
mod manifest;
mod signal;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use header::{parse_header, ChannelSpec, RecordHeader};
pub use manifest::{
    load_overrides, scan_dataset, scan_dataset_with, Completeness, DatasetManifest, GridSpec,
    ManifestEntry, ScanOptions,
};
pub use signal::{decode_signal, encode_record, quantize, read_record, write_record, SignalRecord};

/// Label of the gesture used as the resting baseline; never used as a code.
pub const REST_GESTURE: u16 = 17;

/// Identity of one trial: `session{i}_subject{j}_gesture{k}_trial{l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub session: u16,
    pub subject: u16,
    pub gesture: u16,
    pub trial: u16,
}

impl RecordKey {
    pub fn new(session: u16, subject: u16, gesture: u16, trial: u16) -> Self {
        Self {
            session,
            subject,
            gesture,
            trial,
        }
    }

    /// Parse the identity encoded in a record name. Both `subject` and
    /// `participant` spellings are accepted since published copies of the
    /// dataset use either.
    pub fn from_record_name(name: &str) -> Result<Self> {
        static PATTERN: OnceLock<Regex> = OnceLock::new();
        let re = PATTERN.get_or_init(|| {
            Regex::new(
                r"(?i)^session(\d+)_(?:subject|participant)(\d+)_gesture(\d+)_trial(\d+)$",
            )
            .expect("static regex")
        });
        let caps = re
            .captures(name.trim())
            .ok_or_else(|| Error::Identity(name.to_string()))?;
        let field = |i: usize| -> Result<u16> {
            let v: u16 = caps[i]
                .parse()
                .map_err(|_| Error::Identity(name.to_string()))?;
            if v == 0 {
                return Err(Error::Identity(name.to_string()));
            }
            Ok(v)
        };
        Ok(Self::new(field(1)?, field(2)?, field(3)?, field(4)?))
    }

    pub fn record_name(&self) -> String {
        self.to_string()
    }

    /// Path of the record (without extension) relative to the dataset root.
    pub fn relative_stem(&self) -> String {
        format!(
            "Session{}/session{}_subject{}/{}",
            self.session,
            self.session,
            self.subject,
            self.record_name()
        )
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "session{}_subject{}_gesture{}_trial{}",
            self.session, self.subject, self.gesture, self.trial
        )
    }
}
