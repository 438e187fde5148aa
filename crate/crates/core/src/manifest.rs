//! Dataset manifest CSV: `id,path,label,fold,anchor,neighbor,lambda`.
//!
//! Paths are resolved relative to the manifest's directory. The last four
//! columns may be empty; `anchor`, `neighbor` and `lambda` describe a
//! synthetic image's parents.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbt;
use crate::pipeline::LabeledImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub path: String,
    pub label: u8,
    pub fold: Option<usize>,
    pub anchor: Option<String>,
    pub neighbor: Option<String>,
    pub lambda: Option<f64>,
}

impl ManifestRow {
    pub fn new(id: impl Into<String>, path: impl Into<String>, label: u8) -> Self {
        Self { id: id.into(), path: path.into(), label, fold: None, anchor: None, neighbor: None, lambda: None }
    }

    pub fn is_synthetic(&self) -> bool {
        self.anchor.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self { rows: Vec::new(), base_dir: base_dir.into() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks id uniqueness and labels; with `check_files`, that every path exists.
    pub fn validate(&self, check_files: bool) -> Result<()> {
        let mut seen = HashSet::new();
        for (line, r) in self.rows.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::format("manifest", format!("row {}: duplicate id {:?}", line + 1, r.id)));
            }
            if r.label > 1 {
                return Err(Error::format("manifest", format!("row {}: label {} not in {{0,1}}", line + 1, r.label)));
            }
            if check_files && !self.resolve(r).is_file() {
                let path = self.resolve(r);
                return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "image file missing")));
            }
        }
        Ok(())
    }

    pub fn from_csv(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
            rows.push(rec.map_err(|e| Error::format("manifest", format!("row {}: {e}", i + 1)))?);
        }
        let m = Self { rows, base_dir: base_dir.into() };
        m.validate(false)?;
        Ok(m)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["id", "path", "label", "fold", "anchor", "neighbor", "lambda"])
            .and_then(|_| self.rows.iter().try_for_each(|r| w.serialize(r)))
            .map_err(|e| Error::format("manifest", e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| Error::format("manifest", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Reads and validates a manifest, including that the image files exist.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::from_csv(&text, base)?;
        m.validate(true)?;
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_images(&self) -> Result<Vec<LabeledImage>> {
        self.rows
            .iter()
            .map(|r| {
                Ok(LabeledImage { id: r.id.clone(), image: mbt::read(self.resolve(r))?, label: r.label })
            })
            .collect()
    }
}
