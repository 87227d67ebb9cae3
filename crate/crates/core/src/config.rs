//! Run configuration shared by the command-line tools, loaded from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::GridSpec;
use crate::dsp::{ChannelSelection, FdtConfig, WindowSpec};
use crate::error::{io_err, Error, Result};
use crate::eval::EvalSettings;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub store: Option<PathBuf>,
    /// JSON map from record name to identity for trees with unusual names.
    pub name_overrides: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// Expected dataset extent.
    pub grid: GridSpec,
    /// Channel selections evaluated, in report column order.
    pub selections: Vec<ChannelSelection>,
    pub window: WindowSpec,
    pub fdt: FdtConfig,
    pub eval: EvalSettings,
    /// Enrollment sets each template's threshold to the largest
    /// leave-one-trial-out genuine score times `1 + threshold_margin`.
    pub threshold_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            grid: GridSpec::default(),
            selections: vec![ChannelSelection::forearm(), ChannelSelection::wrist()],
            window: WindowSpec::default(),
            fdt: FdtConfig::default(),
            eval: EvalSettings::default(),
            threshold_margin: 0.25,
        }
    }
}

/// Fields that change features and templates, hashed for store checks.
#[derive(Serialize)]
struct FeatureIdentity<'a> {
    selection: &'a ChannelSelection,
    window: &'a WindowSpec,
    fdt: &'a FdtConfig,
    shrinkage: f64,
    aggregate: crate::matcher::AttemptAggregate,
}

fn digest(value: &impl Serialize) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let hash = Sha256::digest(&json);
    hex::encode(&hash[..8])
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.selections.is_empty() {
            return Err(Error::Config("at least one channel selection is required".into()));
        }
        for (i, s) in self.selections.iter().enumerate() {
            if self.selections[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("selection {:?} defined twice", s.name)));
            }
            if s.len() < 2 {
                return Err(Error::Config(format!(
                    "selection {:?} needs at least two channels",
                    s.name
                )));
            }
        }
        let g = self.grid;
        if g.sessions == 0 || g.subjects == 0 || g.gestures == 0 || g.trials == 0 {
            return Err(Error::Config("grid counts must be positive".into()));
        }
        self.window.validate()?;
        self.eval.validate()?;
        if !(self.threshold_margin >= 0.0 && self.threshold_margin.is_finite()) {
            return Err(Error::Config("threshold_margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn selection(&self, name: &str) -> Result<&ChannelSelection> {
        self.selections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("unknown channel selection {name:?}")))
    }

    /// Hash of everything except paths; embedded in every output.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        digest(&c)
    }

    /// Hash of the settings a template store depends on.
    pub fn feature_hash(&self, selection: &ChannelSelection) -> String {
        digest(&FeatureIdentity {
            selection,
            window: &self.window,
            fdt: &self.fdt,
            shrinkage: self.eval.shrinkage,
            aggregate: self.eval.aggregate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        let partial = RunConfig::from_toml("threshold_margin = 0.5\n[eval]\nseed = 7\n").unwrap();
        assert_eq!(partial.eval.seed, 7);
        assert_eq!(partial.eval.sequence_count, 50);
        assert_eq!(partial.window, WindowSpec::default());
    }

    #[test]
    fn hash_ignores_paths_but_not_settings() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.dataset = Some("/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.eval.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.feature_hash(&a.selections[0]), b.feature_hash(&b.selections[0]));
        assert_ne!(a.feature_hash(&a.selections[0]), a.feature_hash(&a.selections[1]));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("threshold_margin = -1.0").is_err());
        assert!(RunConfig::from_toml("[eval]\ncodelengths = [7]").is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }
}
