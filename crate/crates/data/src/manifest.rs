//! Dataset manifest: a TOML file listing one record per sample with paths
//! relative to the manifest location and a split tag.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::sample::{load_pair, SamplePair};
use lltext_core::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub short: PathBuf,
    pub long: PathBuf,
    #[serde(default)]
    pub annotation: Option<PathBuf>,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "train".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "sample")]
    pub samples: Vec<ManifestEntry>,
    /// Directory the relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut manifest: Manifest = toml::from_str(&text)
            .map_err(|e| DataError::parse(path.display().to_string(), e.to_string()))?;
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| DataError::Data(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| DataError::io(path, e))
    }

    pub fn entries(&self, split: Option<&str>) -> impl Iterator<Item = &ManifestEntry> {
        let want = split.map(str::to_string);
        self.samples
            .iter()
            .filter(move |e| want.as_deref().is_none_or(|s| e.split == s))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads one entry's images and annotations.
    pub fn load_entry<T: Scalar>(&self, entry: &ManifestEntry, allow_unlabeled: bool) -> Result<SamplePair<T>> {
        load_pair(
            &self.resolve(&entry.short),
            &self.resolve(&entry.long),
            entry.annotation.as_ref().map(|p| self.resolve(p)).as_deref(),
            allow_unlabeled,
            entry.id.clone(),
        )
    }

    /// Loads every entry of a split, surfacing the failing sample id.
    pub fn load_split<T: Scalar>(&self, split: Option<&str>, allow_unlabeled: bool) -> Result<Vec<SamplePair<T>>> {
        let mut out = Vec::new();
        for e in self.entries(split) {
            let pair = self
                .load_entry(e, allow_unlabeled)
                .map_err(|err| DataError::Data(format!("sample {}: {err}", e.id)))?;
            out.push(pair);
        }
        if out.is_empty() {
            return Err(DataError::EmptyCorpus(format!(
                "manifest has no samples for split {split:?}"
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lltext_core::io::save_image;
    use lltext_core::ImageTensor;

    #[test]
    fn manifest_round_trip_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::<f64>::filled(8, 8, 3, 0.4);
        save_image(&img, &dir.path().join("s.png")).unwrap();
        save_image(&img, &dir.path().join("l.png")).unwrap();
        std::fs::write(dir.path().join("a.txt"), "1,1,4,1,4,3,1,3,hi\n").unwrap();
        let manifest = Manifest {
            samples: vec![ManifestEntry {
                id: "x1".into(),
                short: "s.png".into(),
                long: "l.png".into(),
                annotation: Some("a.txt".into()),
                split: "train".into(),
            }],
            base_dir: PathBuf::new(),
        };
        let mpath = dir.path().join("manifest.toml");
        manifest.save(&mpath).unwrap();
        let loaded = Manifest::load(&mpath).unwrap();
        let pairs = loaded.load_split::<f64>(Some("train"), false).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].boxes.len(), 1);
        assert!(loaded.load_split::<f64>(Some("test"), false).is_err());
    }
}
