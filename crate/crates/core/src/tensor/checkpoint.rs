//! Binary tensor container.
//!
//! Layout: the 8 magic bytes `VMCKPT\0\0`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then every tensor's data as little-endian
//! `f64` values concatenated in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Tensor;

pub const MAGIC: &[u8; 8] = b"VMCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("missing tensor {0}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    /// Optimizer steps taken when the file was written.
    pub step: u64,
    pub tensors: Vec<TensorEntry>,
    /// Free-form metadata (model configuration, for instance).
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn write_tensors<W: Write>(
    mut w: W,
    step: u64,
    meta: serde_json::Value,
    tensors: &[(String, &Tensor)],
) -> Result<(), CheckpointError> {
    let header = Header {
        version: FORMAT_VERSION,
        step,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape(),
            })
            .collect(),
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::new();
    for (_, t) in tensors {
        buf.clear();
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<(Header, Vec<Tensor>), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let [rows, cols] = entry.shape;
        let mut bytes = vec![0u8; rows * cols * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push(Tensor::new(rows, cols, data).expect("shape from header"));
    }
    Ok((header, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<(String, Tensor)> {
        vec![
            ("a".into(), Tensor::from_rows(&[vec![1.5, -0.0], vec![f64::MIN_POSITIVE, 3.0]]).unwrap()),
            ("b".into(), Tensor::row_vector(vec![std::f64::consts::PI; 3])),
        ]
    }

    #[test]
    fn round_trip_bitwise() {
        let ts = sample();
        let refs: Vec<(String, &Tensor)> = ts.iter().map(|(n, t)| (n.clone(), t)).collect();
        let mut buf = Vec::new();
        write_tensors(&mut buf, 7, serde_json::json!({"k": 1}), &refs).unwrap();
        let (header, back) = read_tensors(buf.as_slice()).unwrap();
        assert_eq!(header.step, 7);
        assert_eq!(header.meta["k"], 1);
        for ((_, a), b) in ts.iter().zip(&back) {
            let bits_a: Vec<u64> = a.data().iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn truncated_is_io_error() {
        let ts = sample();
        let refs: Vec<(String, &Tensor)> = ts.iter().map(|(n, t)| (n.clone(), t)).collect();
        let mut buf = Vec::new();
        write_tensors(&mut buf, 0, serde_json::Value::Null, &refs).unwrap();
        buf.truncate(buf.len() - 5);
        assert!(matches!(
            read_tensors(buf.as_slice()),
            Err(CheckpointError::Io(_))
        ));
    }

    #[test]
    fn version_guard() {
        let header = Header {
            version: 99,
            step: 0,
            tensors: vec![],
            meta: serde_json::Value::Null,
        };
        let json = serde_json::to_vec(&header).unwrap();
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        assert!(matches!(
            read_tensors(buf.as_slice()),
            Err(CheckpointError::VersionMismatch { found: 99, .. })
        ));
    }
}
