use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetSchema;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::synthetic::{PatternTerm, SyntheticPattern};
use crate::train::TrainConfig;

fn default_label() -> String {
    "label".into()
}
fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}
fn default_min_frequency() -> usize {
    1
}
fn default_n_records() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file; when absent the `synthetic` section is generated in memory.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Sidecar of a generated CSV, enabling Bayes and deviation reporting.
    #[serde(default)]
    pub sidecar: Option<PathBuf>,
    /// Feature columns; defaults to `f1..fm` for synthetic data.
    #[serde(default)]
    pub fields: Option<Vec<String>>,
    #[serde(default = "default_label")]
    pub label: String,
    /// Train, validation and test fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_min_frequency")]
    pub min_frequency: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            sidecar: None,
            fields: None,
            label: default_label(),
            split: default_split(),
            split_seed: 0,
            min_frequency: default_min_frequency(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Built-in pattern name (`R1`, `R2`, `R3`), or a label for `terms`.
    #[serde(default)]
    pub pattern: Option<String>,
    /// Custom pattern terms; takes precedence over a built-in name.
    #[serde(default)]
    pub terms: Option<Vec<PatternTerm>>,
    #[serde(default = "default_n_records")]
    pub n_records: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn resolve_pattern(&self) -> Result<SyntheticPattern> {
        let to_config = |e: Error| Error::Config(format!("synthetic: {e}"));
        match (&self.terms, &self.pattern) {
            (Some(terms), name) => {
                SyntheticPattern::new(name.clone().unwrap_or_else(|| "custom".into()), terms.clone()).map_err(to_config)
            }
            (None, Some(name)) => SyntheticPattern::builtin(name).map_err(to_config),
            (None, None) => Err(Error::Config("synthetic: set `pattern` or `terms`".into())),
        }
    }
}

/// The whole run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        self.train.validate()?;
        let d = &self.data;
        if d.split.iter().any(|&r| !(r > 0.0)) || (d.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "data.split must be three positive fractions summing to 1, got {:?}",
                d.split
            )));
        }
        if d.min_frequency == 0 {
            return Err(Error::Config("data.min_frequency must be at least 1".into()));
        }
        if let Some(s) = &self.synthetic {
            let pattern = s.resolve_pattern()?;
            if s.n_records == 0 {
                return Err(Error::Config("synthetic.n_records must be at least 1".into()));
            }
            if pattern.num_fields() != self.model.num_fields {
                return Err(Error::Config(format!(
                    "synthetic pattern has {} fields but model.num_fields is {}",
                    pattern.num_fields(),
                    self.model.num_fields
                )));
            }
        } else if d.path.is_none() {
            return Err(Error::Config(
                "data.path is required without a [synthetic] section".into(),
            ));
        }
        self.schema()?;
        Ok(())
    }

    pub fn synthetic(&self) -> Result<&SyntheticConfig> {
        self.synthetic
            .as_ref()
            .ok_or_else(|| Error::Config("missing [synthetic] section".into()))
    }

    /// Column layout of the data: explicit `data.fields`, or `f1..fm` when the
    /// data is synthetic.
    pub fn schema(&self) -> Result<DatasetSchema> {
        let synthetic_like = self.synthetic.is_some() || self.data.sidecar.is_some();
        let fields = match &self.data.fields {
            Some(f) => f.clone(),
            None if synthetic_like => (1..=self.model.num_fields).map(|f| format!("f{f}")).collect(),
            None => return Err(Error::Config("data.fields is required for non-synthetic data".into())),
        };
        if fields.len() != self.model.num_fields {
            return Err(Error::Config(format!(
                "data.fields lists {} columns but model.num_fields is {}",
                fields.len(),
                self.model.num_fields
            )));
        }
        DatasetSchema::new(fields, self.data.label.clone()).map_err(|e| Error::Config(format!("data: {e}")))
    }
}
