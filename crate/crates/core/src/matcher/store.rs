use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Template;
use crate::error::{io_err, Error, Result};

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub template: Template,
    /// Accept a code when its attempt score is at most this value.
    pub threshold: f64,
}

/// Persisted templates for one channel selection and feature configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateStore {
    pub version: u32,
    /// Hash of the feature configuration the templates were built with.
    pub config_hash: String,
    pub selection: String,
    /// Per-gesture single-code accuracy used for fusion weights.
    pub gesture_accuracy: BTreeMap<u16, f64>,
    entries: Vec<StoreEntry>,
}

impl TemplateStore {
    pub fn new(config_hash: impl Into<String>, selection: impl Into<String>) -> Self {
        Self {
            version: STORE_VERSION,
            config_hash: config_hash.into(),
            selection: selection.into(),
            gesture_accuracy: BTreeMap::new(),
            entries: Vec::new(),
        }
    }

    /// Insert or replace the template for its (user, gesture).
    pub fn insert(&mut self, template: Template, threshold: f64) -> Result<()> {
        if template.selection != self.selection {
            return Err(Error::Config(format!(
                "template selection {:?} does not match store selection {:?}",
                template.selection, self.selection
            )));
        }
        let key = (template.user, template.gesture);
        let entry = StoreEntry {
            template,
            threshold,
        };
        match self
            .entries
            .binary_search_by_key(&key, |e| (e.template.user, e.template.gesture))
        {
            Ok(i) => self.entries[i] = entry,
            Err(i) => self.entries.insert(i, entry),
        }
        Ok(())
    }

    pub fn get(&self, user: u16, gesture: u16) -> Option<&StoreEntry> {
        self.entries
            .binary_search_by_key(&(user, gesture), |e| (e.template.user, e.template.gesture))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(io_err(path))
    }

    /// Load a store, refusing it when it was built with a different
    /// feature configuration than `expected_hash`.
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let store: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        if store.version != STORE_VERSION {
            return Err(Error::Format {
                path: path.into(),
                message: format!("unsupported store version {}", store.version),
            });
        }
        if let Some(expected) = expected_hash {
            if expected != store.config_hash {
                return Err(Error::ConfigHashMismatch {
                    expected: expected.into(),
                    found: store.config_hash,
                });
            }
        }
        Ok(store)
    }
}
