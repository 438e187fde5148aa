//! `.cnn` checkpoint container.
//!
//! Layout: ASCII `CNN1`, a `u32` little-endian header length, that many bytes
//! of UTF-8 JSON (`config`, `tensors` as `[{name, shape}]`, free-form `meta`),
//! then each tensor's values as little-endian `f32` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cnn::{CnnConfig, CompactCnn, Param};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CNN1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: CnnConfig,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn encode(net: &CompactCnn, meta: &serde_json::Value) -> Result<Vec<u8>> {
    let header = Header {
        config: net.config().clone(),
        tensors: net
            .params()
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), shape: p.shape.clone() })
            .collect(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format("cnn header", e.to_string()))?;
    let mut out = Vec::with_capacity(8 + json.len() + net.num_parameters() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        for &v in &p.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CompactCnn, serde_json::Value)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format("cnn", "missing CNN1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(Error::format("cnn", "truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&body[..hlen]).map_err(|e| Error::format("cnn header", e.to_string()))?;
    let mut payload = &body[hlen..];
    let mut params = Vec::with_capacity(header.tensors.len());
    for t in header.tensors {
        let n: usize = t.shape.iter().product();
        if payload.len() < n * 4 {
            return Err(Error::format("cnn", format!("truncated tensor {}", t.name)));
        }
        let data = payload[..n * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        payload = &payload[n * 4..];
        params.push(Param { name: t.name, shape: t.shape, data });
    }
    if !payload.is_empty() {
        return Err(Error::format("cnn", format!("{} trailing bytes", payload.len())));
    }
    Ok((CompactCnn::from_params(header.config, params)?, header.meta))
}

pub fn save(path: impl AsRef<Path>, net: &CompactCnn, meta: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(net, meta)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(CompactCnn, serde_json::Value)> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    #[test]
    fn round_trip_after_f32_rounding() {
        let mut net = CompactCnn::new(CnnConfig::compact(3, 8), &mut RngState::new(2)).unwrap();
        net.round_to_f32();
        let meta = serde_json::json!({"epoch": 4});
        let bytes = encode(&net, &meta).unwrap();
        assert_eq!(&bytes[..4], b"CNN1");
        let (back, m) = decode(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(m, meta);
        assert_eq!(encode(&back, &m).unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let net = CompactCnn::zeros(CnnConfig::compact(1, 4)).unwrap();
        let bytes = encode(&net, &serde_json::Value::Null).unwrap();
        assert!(decode(&bytes[..bytes.len() - 2]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
