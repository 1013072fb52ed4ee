use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::FeatureProbTable;
use super::pattern::{ground_truth_prob, SyntheticPattern};
use crate::data::RawTable;
use crate::error::{Error, Result};

/// What a generated dataset needs for later Bayes and deviation evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub pattern: SyntheticPattern,
    pub feature_probs: FeatureProbTable,
}

impl Sidecar {
    pub fn validate(&self) -> Result<()> {
        self.feature_probs.validate()?;
        if self.feature_probs.num_fields() != self.pattern.num_fields() {
            return Err(Error::shape(
                "sidecar probability table fields",
                self.pattern.num_fields(),
                self.feature_probs.num_fields(),
            ));
        }
        Ok(())
    }

    /// Planted click probability of each row of a table whose tokens are
    /// feature ids.
    pub fn true_probs(&self, table: &RawTable) -> Result<Vec<f64>> {
        table
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let ids = row
                    .iter()
                    .map(|tok| {
                        tok.parse::<u32>()
                            .map_err(|_| Error::InvalidArgument(format!("row {r}: token `{tok}` is not a feature id")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                ground_truth_prob(&self.pattern, &self.feature_probs.lookup(&ids)?)
            })
            .collect()
    }
}

pub fn write_sidecar(sidecar: &Sidecar, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(sidecar).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    sidecar.validate()?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::generate;

    #[test]
    fn round_trip_and_true_probs() {
        let d = generate(&SyntheticPattern::builtin("R2").unwrap(), 50, 3).unwrap();
        let sc = Sidecar {
            pattern: d.pattern.clone(),
            feature_probs: d.table.clone(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("side.json");
        write_sidecar(&sc, &path).unwrap();
        let back = read_sidecar(&path).unwrap();
        assert_eq!(back, sc);
        assert_eq!(back.true_probs(&d.to_table()).unwrap(), d.true_probs);
    }

    #[test]
    fn bad_tokens() {
        let d = generate(&SyntheticPattern::builtin("R1").unwrap(), 2, 3).unwrap();
        let sc = Sidecar {
            pattern: d.pattern.clone(),
            feature_probs: d.table.clone(),
        };
        let mut t = d.to_table();
        t.rows[1][0] = "x".into();
        assert!(sc.true_probs(&t).is_err());
        t.rows[1][0] = "1000".into();
        assert!(matches!(sc.true_probs(&t), Err(Error::OutOfVocabulary { .. })));
    }
}
