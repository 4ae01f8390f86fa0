//! Parameter checkpoint file: a one-line JSON header followed by named
//! tensors as raw little-endian f64, bit-exact on round-trip.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::Params;
use super::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("checkpoint is for model {found:?}, expected {expected:?}")]
    ModelKind { expected: String, found: String },
}

/// Describes what the stored parameters belong to, so a mismatched load
/// fails with the offending dimensions named.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: String,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
}

pub fn save_checkpoint(
    path: &Path,
    header: &CheckpointHeader,
    params: &Params,
) -> Result<(), CheckpointError> {
    let io_err = |e: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut buf: Vec<u8> = Vec::new();
    let header_json = serde_json::to_string(header).expect("header json");
    buf.extend_from_slice(header_json.as_bytes());
    buf.push(b'\n');
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for i in 0..params.len() {
        let name = params.name(i).as_bytes();
        let t = params.value(i);
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&buf).map_err(io_err)?;
    Ok(())
}

/// Loads header and parameters. The caller checks `layer_sizes` against
/// its model configuration.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Params), CheckpointError> {
    let io_err = |e: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::Format("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| CheckpointError::Format(format!("bad header: {e}")))?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported format_version {}", header.format_version
        )));
    }
    let mut cur = Cursor {
        bytes: &bytes[nl + 1..],
        at: 0,
    };
    let count = cur.u32()? as usize;
    let mut params = Params::new();
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| CheckpointError::Format("non-utf8 tensor name".into()))?;
        let ndim = cur.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
        }
        params
            .register(&name, Tensor::new(shape, data))
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
    }
    if cur.at != cur.bytes.len() {
        return Err(CheckpointError::Format(format!(
            "{} trailing bytes",
            cur.bytes.len() - cur.at
        )));
    }
    Ok((header, params))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.bytes.len() {
            return Err(CheckpointError::Format("truncated file".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = Params::new();
        super::super::params::init_linear(&mut params, &mut rng, "layer0", 7, 3).unwrap();
        super::super::params::init_linear(&mut params, &mut rng, "layer1", 3, 2).unwrap();
        // make sure awkward values survive
        params
            .set("layer1.b", Tensor::new(vec![2], vec![f64::MIN_POSITIVE, -0.0]))
            .unwrap();

        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model: "test".into(),
            layer_sizes: vec![7, 3, 2],
            seed: 42,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&path, &header, &params).unwrap();
        let (h2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(p2.len(), params.len());
        for i in 0..params.len() {
            assert_eq!(p2.name(i), params.name(i));
            assert_eq!(p2.value(i).shape(), params.value(i).shape());
            for (a, b) in p2.value(i).data().iter().zip(params.value(i).data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut params = Params::new();
        params.register("w", Tensor::zeros(vec![4])).unwrap();
        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model: "test".into(),
            layer_sizes: vec![],
            seed: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&path, &header, &params).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Format(_))
        ));
    }
}
