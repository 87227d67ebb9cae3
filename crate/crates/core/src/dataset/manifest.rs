use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::RecordKey;
use crate::error::{io_err, Error, Result};

/// Expected extent of the dataset grid; every index runs `1..=count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub sessions: u16,
    pub subjects: u16,
    pub gestures: u16,
    pub trials: u16,
}

impl Default for GridSpec {
    /// 3 days, 43 participants, 16 gestures plus rest, 7 trials.
    fn default() -> Self {
        Self {
            sessions: 3,
            subjects: 43,
            gestures: 17,
            trials: 7,
        }
    }
}

impl GridSpec {
    pub fn keys(&self) -> impl Iterator<Item = RecordKey> + '_ {
        (1..=self.sessions).flat_map(move |s| {
            (1..=self.subjects).flat_map(move |j| {
                (1..=self.gestures)
                    .flat_map(move |g| (1..=self.trials).map(move |t| RecordKey::new(s, j, g, t)))
            })
        })
    }

    pub fn len(&self) -> usize {
        usize::from(self.sessions)
            * usize::from(self.subjects)
            * usize::from(self.gestures)
            * usize::from(self.trials)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        (1..=self.sessions).contains(&key.session)
            && (1..=self.subjects).contains(&key.subject)
            && (1..=self.gestures).contains(&key.gesture)
            && (1..=self.trials).contains(&key.trial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub session: u16,
    pub subject: u16,
    pub gesture: u16,
    pub trial: u16,
    /// Path of the `.hea` file relative to the manifest root, `/`-separated.
    pub path: String,
}

impl ManifestEntry {
    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.session, self.subject, self.gesture, self.trial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completeness {
    pub subject: u16,
    pub session: u16,
    pub complete: bool,
}

/// Index of every record pair found under a dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: String,
    pub grid: GridSpec,
    /// Sorted by key.
    pub entries: Vec<ManifestEntry>,
    pub missing: Vec<RecordKey>,
    pub completeness: Vec<Completeness>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// Build a manifest from a set of keys that are known to exist, e.g. an
    /// in-memory dataset. Paths follow the on-disk layout.
    pub fn from_keys(
        root: impl Into<String>,
        grid: GridSpec,
        keys: impl IntoIterator<Item = RecordKey>,
    ) -> Result<Self> {
        let mut found = BTreeMap::new();
        for key in keys {
            let path = format!("{}.hea", key.relative_stem());
            if found.insert(key, path).is_some() {
                return Err(Error::DuplicateRecord(key.to_string()));
            }
        }
        Ok(Self::assemble(root.into(), grid, found, Vec::new()))
    }

    fn assemble(
        root: String,
        grid: GridSpec,
        found: BTreeMap<RecordKey, String>,
        mut warnings: Vec<String>,
    ) -> Self {
        for key in found.keys().filter(|k| !grid.contains(k)) {
            warnings.push(format!("record {key} lies outside the expected grid"));
        }
        let missing: Vec<RecordKey> = grid.keys().filter(|k| !found.contains_key(k)).collect();
        let incomplete: BTreeSet<(u16, u16)> =
            missing.iter().map(|k| (k.subject, k.session)).collect();
        let completeness = (1..=grid.subjects)
            .flat_map(|subject| {
                (1..=grid.sessions).map(move |session| (subject, session))
            })
            .map(|(subject, session)| Completeness {
                subject,
                session,
                complete: !incomplete.contains(&(subject, session)),
            })
            .collect();
        warnings.sort();
        let entries = found
            .into_iter()
            .map(|(k, path)| ManifestEntry {
                session: k.session,
                subject: k.subject,
                gesture: k.gesture,
                trial: k.trial,
                path,
            })
            .collect();
        Self {
            root,
            grid,
            entries,
            missing,
            completeness,
            warnings,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.entries
            .binary_search_by(|e| e.key().cmp(key))
            .is_ok()
    }

    pub fn entry(&self, key: &RecordKey) -> Option<&ManifestEntry> {
        self.entries
            .binary_search_by(|e| e.key().cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn keys(&self) -> impl Iterator<Item = RecordKey> + '_ {
        self.entries.iter().map(ManifestEntry::key)
    }

    pub fn subjects(&self) -> BTreeSet<u16> {
        self.entries.iter().map(|e| e.subject).collect()
    }

    /// Absolute path of a record's `.hea` file.
    pub fn path_of(&self, key: &RecordKey) -> Option<PathBuf> {
        self.entry(key).map(|e| Path::new(&self.root).join(&e.path))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Options for [`scan_dataset_with`].
#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub grid: GridSpec,
    /// Record-name (file stem) to identity remapping, applied before the
    /// name pattern.
    pub name_overrides: BTreeMap<String, RecordKey>,
}

/// Load a JSON object mapping record names to `{session, subject, gesture, trial}`.
pub fn load_overrides(path: &Path) -> Result<BTreeMap<String, RecordKey>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    scan_dataset_with(root, &ScanOptions::default())
}

/// Walk `root`, pair up `.hea`/`.dat` files and index them by identity.
pub fn scan_dataset_with(root: &Path, options: &ScanOptions) -> Result<DatasetManifest> {
    fs::read_dir(root).map_err(io_err(root))?;

    let mut headers: BTreeSet<PathBuf> = BTreeSet::new();
    let mut signals: BTreeSet<PathBuf> = BTreeSet::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.into());
            Error::Io {
                path,
                source: e.into(),
            }
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walk stays below root")
            .to_path_buf();
        match rel.extension().and_then(|e| e.to_str()) {
            Some("hea") => {
                headers.insert(rel);
            }
            Some("dat") => {
                signals.insert(rel);
            }
            _ => warnings.push(format!("stray file {}", display_rel(&rel))),
        }
    }

    let mut found: BTreeMap<RecordKey, String> = BTreeMap::new();
    for rel in &headers {
        let dat = rel.with_extension("dat");
        if !signals.remove(&dat) {
            warnings.push(format!("header without signal file: {}", display_rel(rel)));
            continue;
        }
        let stem = rel
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let key = match options.name_overrides.get(&stem) {
            Some(k) => *k,
            None => match RecordKey::from_record_name(&stem) {
                Ok(k) => k,
                Err(_) => {
                    warnings.push(format!("unrecognised record name {}", display_rel(rel)));
                    continue;
                }
            },
        };
        if let Some(prev) = found.insert(key, display_rel(rel)) {
            return Err(Error::DuplicateRecord(format!(
                "{key} ({prev} and {})",
                display_rel(rel)
            )));
        }
    }
    for dat in signals {
        warnings.push(format!("signal file without header: {}", display_rel(&dat)));
    }

    Ok(DatasetManifest::assemble(
        root.to_string_lossy().into_owned(),
        options.grid,
        found,
        warnings,
    ))
}

fn display_rel(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
