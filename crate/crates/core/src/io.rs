//! Reading and writing JSON documents (dumps, weight files, profiles).
//!
//! Input may be plain or gzip-compressed JSON; compression is detected from
//! the content. Output is gzip-compressed when the path ends in `.gz`, and is
//! always written to a sibling temporary file first, then renamed into place.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::Result;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Decodes a document from raw bytes, inflating gzip input first.
pub fn parse_document<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut text = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut text)?;
        Ok(serde_json::from_slice(&text)?)
    } else {
        Ok(serde_json::from_slice(bytes)?)
    }
}

pub fn read_document<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    parse_document(&fs::read(path)?)
}

/// Compact JSON encoding of `value`.
pub fn encode_document<T: Serialize>(value: &T, gzip: bool) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(value)?;
    if !gzip {
        return Ok(json);
    }
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&json)?;
    Ok(enc.finish()?)
}

pub fn write_document<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let gzip = path.extension().is_some_and(|e| e == "gz");
    write_atomic(path, &encode_document(value, gzip)?)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gzip_detected_on_read() {
        let v = vec![1.5f64, -0.25, 1e-300];
        let plain = encode_document(&v, false).unwrap();
        let packed = encode_document(&v, true).unwrap();
        assert_ne!(plain, packed);
        assert_eq!(parse_document::<Vec<f64>>(&plain).unwrap(), v);
        assert_eq!(parse_document::<Vec<f64>>(&packed).unwrap(), v);
    }

    #[test]
    fn atomic_write_and_read_back() {
        let dir = std::env::temp_dir().join(format!("atlas-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("doc.json.gz");
        write_document(&path, &vec!["a", "b"]).unwrap();
        let back: Vec<String> = read_document(&path).unwrap();
        assert_eq!(back, ["a", "b"]);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
