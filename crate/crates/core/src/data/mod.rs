//! Synthetic path and surface generators, the TU graph format, and a
//! self-describing JSON bundle for storing any generated dataset.

mod synthetic;
mod tu;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

pub use synthetic::{gen_paths, gen_surfaces, grid_triangulation, path_template, PathDatasetSpec, SurfaceDatasetSpec};
pub use tu::{FeatureOptions, TuDataset};

pub const BUNDLE_FORMAT: &str = "kforms-dataset";
pub const BUNDLE_VERSION: u32 = 1;

/// Where the items of a bundle came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Paths(PathDatasetSpec),
    Surfaces(SurfaceDatasetSpec),
    Tu { name: String, features: FeatureOptions },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetBundle {
    pub format: String,
    pub version: u32,
    pub source: DataSource,
    pub dataset: Dataset,
}

impl DatasetBundle {
    pub fn new(source: DataSource, dataset: Dataset) -> Self {
        DatasetBundle { format: BUNDLE_FORMAT.into(), version: BUNDLE_VERSION, source, dataset }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetBundle> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.into()),
            _ => Error::io(path, e),
        })?;
        let bundle: DatasetBundle = serde_json::from_str(&text)?;
        if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{} is a {} v{} file, expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}",
                path.display(),
                bundle.format,
                bundle.version
            )));
        }
        bundle.dataset.validate()?;
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_roundtrip() {
        let spec = PathDatasetSpec { samples_per_class: 2, points: 5, ..Default::default() };
        let bundle = DatasetBundle::new(DataSource::Paths(spec.clone()), gen_paths(&spec).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("paths.json");
        bundle.save(&path).unwrap();
        assert_eq!(DatasetBundle::load(&path).unwrap(), bundle);

        let text = std::fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(DatasetBundle::load(&path).is_err());
        assert!(matches!(DatasetBundle::load(&dir.path().join("none.json")), Err(Error::MissingFile(_))));
    }
}
