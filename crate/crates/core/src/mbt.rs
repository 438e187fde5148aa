//! `.mbt` raster container.
//!
//! Layout (little-endian): ASCII `MBT1`, then `u32` height, width, channels,
//! then `height * width * channels` `f32` values in channel-last row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::MultiBandImage;

pub const MAGIC: &[u8; 4] = b"MBT1";
const HEADER_LEN: usize = 16;

pub fn encode(img: &MultiBandImage) -> Vec<u8> {
    let (h, w, c) = img.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + img.data().len() * 4);
    out.extend_from_slice(MAGIC);
    for dim in [h, w, c] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in img.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<MultiBandImage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("mbt", format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("mbt", "bad magic"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| Error::format("mbt", "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < count * 4 {
        return Err(Error::format(
            "mbt",
            format!("truncated payload: expected {} bytes, found {}", count * 4, payload.len()),
        ));
    }
    let data = payload[..count * 4]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    MultiBandImage::new(h, w, c, data)
}

pub fn read(path: impl AsRef<Path>) -> Result<MultiBandImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { kind, msg } => Error::format(kind, format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write(path: impl AsRef<Path>, img: &MultiBandImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let img = MultiBandImage::new(1, 2, 1, vec![1.0, -2.5]).unwrap();
        let bytes = encode(&img);
        assert_eq!(
            bytes,
            [
                b'M', b'B', b'T', b'1', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, // header
                0x00, 0x00, 0x80, 0x3f, // 1.0f32
                0x00, 0x00, 0x20, 0xc0, // -2.5f32
            ]
        );
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let img = MultiBandImage::zeros(2, 2, 3);
        let mut bytes = encode(&img);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format { .. })));
        let bytes = encode(&img);
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Format { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.mbt");
        let img = MultiBandImage::from_fn(3, 4, 2, |r, c, b| (r + c) as f64 * 0.25 - b as f64).unwrap();
        write(&path, &img).unwrap();
        assert_eq!(read(&path).unwrap(), img);
        assert!(matches!(read(dir.path().join("missing.mbt")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_losslessly(vals in proptest::collection::vec(-1e6f32..1e6, 6)) {
            let img = MultiBandImage::new(1, 3, 2, vals.iter().map(|&v| v as f64).collect()).unwrap();
            prop_assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }
}
