//! Checkpoint directories.
//!
//! A checkpoint is a directory holding `manifest.json` and `params.bin`.
//! `params.bin` is little-endian throughout:
//!
//! ```text
//! magic   b"SFCK"
//! u32     format version (1)
//! u32     tensor count
//! per tensor:
//!   u32        name length, then the UTF-8 name
//!   u32        rank, then one u32 per dimension
//!   f32 × n    values in row-major order
//! ```
//!
//! Training runs in f64; values are rounded to f32 on save.

use std::fs;
use std::io::{self, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::encoder::ImageEncoderFamily;
use super::{FusionConfig, ModelError, StanceModel};
use crate::fsutil::write_dir_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SFCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const PARAMS: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub fusion: FusionConfig,
    pub text_dim: usize,
    pub image_dim: usize,
    pub text_encoder: String,
    pub image_encoder: String,
    pub image_family: ImageEncoderFamily,
    pub seed: u64,
    pub tensors: Vec<TensorInfo>,
}

impl CheckpointManifest {
    pub fn describe(
        model: &StanceModel,
        text_encoder: &str,
        image_encoder: &str,
        image_family: ImageEncoderFamily,
        seed: u64,
    ) -> CheckpointManifest {
        CheckpointManifest {
            format_version: CHECKPOINT_VERSION,
            fusion: model.config.clone(),
            text_dim: model.text_dim,
            image_dim: model.image_dim,
            text_encoder: text_encoder.to_string(),
            image_encoder: image_encoder.to_string(),
            image_family,
            seed,
            tensors: model
                .params
                .named_tensors()
                .into_iter()
                .map(|(name, t)| TensorInfo {
                    name,
                    shape: t.shape().to_vec(),
                })
                .collect(),
        }
    }
}

fn encode_params(model: &StanceModel) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.write_all(CHECKPOINT_MAGIC)?;
    buf.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    let tensors = model.params.named_tensors();
    buf.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (name, t) in tensors {
        buf.write_u32::<LittleEndian>(name.len() as u32)?;
        buf.write_all(name.as_bytes())?;
        buf.write_u32::<LittleEndian>(t.ndim() as u32)?;
        for &d in t.shape() {
            buf.write_u32::<LittleEndian>(d as u32)?;
        }
        for &x in t.iter() {
            buf.write_f32::<LittleEndian>(x as f32)?;
        }
    }
    Ok(buf)
}

/// Writes `model` under `dir` atomically, replacing any previous checkpoint.
pub fn save_checkpoint(dir: &Path, model: &StanceModel, manifest: &CheckpointManifest) -> Result<(), ModelError> {
    let fail = |e: io::Error| ModelError::Checkpoint {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    if manifest.tensors != CheckpointManifest::describe(model, "", "", manifest.image_family, 0).tensors {
        return Err(ModelError::Checkpoint {
            path: dir.to_path_buf(),
            message: "manifest tensor list does not describe the model".into(),
        });
    }
    let params = encode_params(model).map_err(fail)?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_dir_atomic(dir, |tmp| {
        fs::write(tmp.join(MANIFEST), json.as_bytes())?;
        fs::write(tmp.join(PARAMS), &params)
    })
    .map_err(fail)
}

fn decode_params(bytes: &[u8]) -> Result<Vec<(String, Array2<f64>)>, String> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| "truncated header")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let io = |e: io::Error| format!("truncated parameter file: {e}");
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let count = r.read_u32::<LittleEndian>().map_err(io)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name).map_err(|_| "tensor name is not UTF-8")?;
        let rank = r.read_u32::<LittleEndian>().map_err(io)?;
        if rank != 2 {
            return Err(format!("tensor {name} has rank {rank}, expected 2"));
        }
        let rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let cols = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(r.read_f32::<LittleEndian>().map_err(io)? as f64);
        }
        let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| e.to_string())?;
        out.push((name, t));
    }
    if (r.position() as usize) != bytes.len() {
        return Err("trailing bytes after last tensor".into());
    }
    Ok(out)
}

pub fn load_checkpoint(dir: &Path) -> Result<(StanceModel, CheckpointManifest), ModelError> {
    let fail = |message: String| ModelError::Checkpoint {
        path: dir.to_path_buf(),
        message,
    };
    let manifest_text = fs::read_to_string(dir.join(MANIFEST)).map_err(|e| fail(format!("{MANIFEST}: {e}")))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&manifest_text).map_err(|e| fail(format!("{MANIFEST}: {e}")))?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(fail(format!("unsupported format version {}", manifest.format_version)));
    }
    let bytes = fs::read(dir.join(PARAMS)).map_err(|e| fail(format!("{PARAMS}: {e}")))?;
    let tensors = decode_params(&bytes).map_err(fail)?;

    let mut model = StanceModel::new(manifest.fusion.clone(), manifest.text_dim, manifest.image_dim, 0)?;
    let names: Vec<String> = model.params.named_tensors().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(fail(format!("expected {} tensors, found {}", names.len(), tensors.len())));
    }
    for ((slot, expected), (name, value)) in model.params.tensors_mut().into_iter().zip(&names).zip(tensors) {
        if *expected != name || slot.shape() != value.shape() {
            return Err(fail(format!(
                "tensor {name} {:?} does not match expected {expected} {:?}",
                value.shape(),
                slot.shape()
            )));
        }
        *slot = value;
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FusionKind, HeadParams};

    #[test]
    fn round_trip_rounds_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let model = StanceModel::new(FusionConfig::new(FusionKind::CrossAttention, 4).with_heads(2), 3, 5, 9).unwrap();
        let manifest = CheckpointManifest::describe(&model, "toy", "toy", ImageEncoderFamily::Toy, 9);
        let path = dir.path().join("ckpt");
        save_checkpoint(&path, &model, &manifest).unwrap();
        let (loaded, m) = load_checkpoint(&path).unwrap();
        assert_eq!(m, manifest);
        for ((_, a), (_, b)) in model.params.named_tensors().iter().zip(loaded.params.named_tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*y, *x as f32 as f64);
            }
        }
        assert!(matches!(loaded.params.head, HeadParams::CrossAttention(_)));
    }

    #[test]
    fn layout_is_as_documented() {
        let model = StanceModel::new(FusionConfig::new(FusionKind::Concat, 2).with_heads(1), 1, 1, 0).unwrap();
        let bytes = encode_params(&model).unwrap();
        assert_eq!(&bytes[..4], b"SFCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        // first tensor: "classifier.w1", rank 2, shape (2, 2)
        let name_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        assert_eq!(&bytes[16..16 + name_len], b"classifier.w1");
        let p = 16 + name_len;
        let dims: Vec<u32> = (0..3).map(|i| u32::from_le_bytes(bytes[p + 4 * i..p + 4 * i + 4].try_into().unwrap())).collect();
        assert_eq!(dims, [2, 2, 2]);
        let first = f32::from_le_bytes(bytes[p + 12..p + 16].try_into().unwrap());
        assert_eq!(first, model.params.classifier.w1[[0, 0]] as f32);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = StanceModel::new(FusionConfig::new(FusionKind::Concat, 2), 2, 2, 0).unwrap();
        let manifest = CheckpointManifest::describe(&model, "toy", "toy", ImageEncoderFamily::Toy, 0);
        save_checkpoint(dir.path(), &model, &manifest).unwrap();
        let params = dir.path().join(PARAMS);
        let mut bytes = fs::read(&params).unwrap();
        bytes.pop();
        fs::write(&params, &bytes).unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
        fs::write(&params, b"XXXX").unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }
}
