use std::path::{Path, PathBuf};

use kforms::data::{FeatureOptions, PathDatasetSpec, SurfaceDatasetSpec};
use kforms::{Error, ReadoutKind, Result, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything a run needs. Built from a command preset, then the JSON
/// config file, then command-line flags, each overriding the previous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub paths: PathDatasetSpec,
    pub surfaces: SurfaceDatasetSpec,
    pub features: FeatureOptions,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub folds: usize,
    pub threads: Option<usize>,
    pub dataset_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Paths,
    Surfaces,
    Graphs,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let train = match preset {
            Preset::Paths => TrainConfig::for_paths(),
            Preset::Surfaces => TrainConfig::for_surfaces(),
            Preset::Graphs => TrainConfig::default(),
        };
        RunConfig {
            train,
            paths: PathDatasetSpec::default(),
            surfaces: SurfaceDatasetSpec::default(),
            features: FeatureOptions::default(),
            val_fraction: 0.2,
            test_fraction: 0.2,
            folds: 5,
            threads: None,
            dataset_dir: None,
        }
    }

    /// The preset with the keys of `file` merged over it.
    pub fn load(preset: Preset, file: Option<&Path>) -> Result<Self> {
        let base = serde_json::to_value(RunConfig::preset(preset))?;
        let Some(path) = file else {
            return Ok(serde_json::from_value(base)?);
        };
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.into()),
            _ => Error::InvalidArgument(format!("cannot read {}: {e}", path.display())),
        })?;
        let overlay: Value =
            serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        serde_json::from_value(merge(base, overlay))
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.paths.seed = seed;
        self.surfaces.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.paths.validate()?;
        self.surfaces.validate()?;
        let fractions = [self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..1.0).contains(f)) || self.val_fraction + self.test_fraction >= 1.0 {
            return Err(Error::InvalidArgument(
                "val_fraction and test_fraction must be in [0, 1) and sum below 1".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("folds must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be positive".into()));
        }
        Ok(())
    }
}

/// Recursive object merge; non-object values in `overlay` replace `base`.
fn merge(base: Value, overlay: Value) -> Value {
    match (base, overlay) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, o) => o,
    }
}

pub fn parse_readout(name: &str) -> Option<ReadoutKind> {
    match name {
        "sum" => Some(ReadoutKind::ColumnSum),
        "l1" => Some(ReadoutKind::ColumnL1),
        "l2" => Some(ReadoutKind::ColumnL2),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_preset_partially() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"train": {"lr": 0.5}, "folds": 3}"#).unwrap();
        let cfg = RunConfig::load(Preset::Paths, Some(&path)).unwrap();
        assert_eq!(cfg.train.lr, 0.5);
        assert_eq!(cfg.train.num_forms, 3);
        assert_eq!(cfg.folds, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"train": {"learning_rate": 0.5}}"#).unwrap();
        assert!(RunConfig::load(Preset::Paths, Some(&path)).unwrap_err().is_input_error());
        std::fs::write(&path, r#"{"colour": 1}"#).unwrap();
        assert!(RunConfig::load(Preset::Paths, Some(&path)).is_err());
    }

    #[test]
    fn preset_roundtrips() {
        for p in [Preset::Paths, Preset::Surfaces, Preset::Graphs] {
            assert_eq!(RunConfig::load(p, None).unwrap(), RunConfig::preset(p));
        }
    }
}
