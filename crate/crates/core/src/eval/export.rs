use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::{LabeledImage, TrainedModel};

/// `id,label,e_0..e_{D-1}` with one row per sample.
pub fn embeddings_csv(model: &TrainedModel, samples: &[LabeledImage]) -> Result<String> {
    let raw: Vec<_> = samples.iter().map(|s| s.image.clone()).collect();
    let emb = model.embeddings(&raw)?;
    let mut out = String::from("id,label");
    for d in 0..model.net.embed_dim() {
        write!(out, ",e_{d}").unwrap();
    }
    out.push('\n');
    for (s, e) in samples.iter().zip(&emb) {
        out.push_str(&csv_field(&s.id));
        write!(out, ",{}", s.label).unwrap();
        for v in e {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_embeddings(model: &TrainedModel, samples: &[LabeledImage], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, embeddings_csv(model, samples)?).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
