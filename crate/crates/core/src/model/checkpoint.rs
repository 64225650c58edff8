//! Binary checkpoint archive.
//!
//! Layout: `RCKP` magic, format version (u32 LE), header length (u64 LE),
//! JSON header, little-endian f64 tensor payload, SHA-256 of everything
//! before it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encoder::EncoderConfig;
use super::layers::{Module, Slot, SlotMut};
use super::state::{HeadSpec, ModelState, TrainingMeta};
use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    head: HeadSpec,
    graph: SkeletonGraph,
    meta: TrainingMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_checkpoint(state: &ModelState) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    state.visit("", &mut |name, slot| {
        let t = match slot {
            Slot::Param(p) => &p.value,
            Slot::Buffer(b) => b,
        };
        tensors.push(TensorEntry {
            name: name.to_owned(),
            shape: t.shape().to_vec(),
        });
        for v in t.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    });
    let header = Header {
        encoder: state.encoder_config().clone(),
        head: state.head_spec(),
        graph: state.graph.clone(),
        meta: state.meta.clone(),
        tensors,
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header.len() + payload.len() + DIGEST_LEN);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelState> {
    if bytes.len() < 16 + DIGEST_LEN {
        return Err(Error::Corrupt(format!("file is only {} bytes", bytes.len())));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Corrupt("missing checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("checksum mismatch (truncated or modified file)".into()));
    }
    let header_len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| Error::Corrupt("header length exceeds file".into()))?;
    let header: Header =
        serde_json::from_slice(&body[16..header_end]).map_err(|e| Error::Corrupt(format!("bad header: {e}")))?;
    let payload = &body[header_end..];

    let mut tensors: BTreeMap<String, ArrayD<f64>> = BTreeMap::new();
    let mut offset = 0;
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let end = offset + n * 8;
        if end > payload.len() {
            return Err(Error::Corrupt(format!("payload too short for tensor {}", entry.name)));
        }
        let values = payload[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let array = ArrayD::from_shape_vec(IxDyn(&entry.shape), values).expect("length matches shape");
        tensors.insert(entry.name.clone(), array);
        offset = end;
    }
    if offset != payload.len() {
        return Err(Error::Corrupt("trailing payload bytes".into()));
    }

    let mut state = ModelState::from_spec(header.encoder, &header.head, header.graph, 0)
        .map_err(|e| Error::Corrupt(format!("header describes an invalid model: {e}")))?;
    state.meta = header.meta;
    let mut problem: Option<String> = None;
    let mut used = 0;
    state.visit_mut("", &mut |name, slot| {
        let target = match slot {
            SlotMut::Param(p) => &mut p.value,
            SlotMut::Buffer(b) => b,
        };
        match tensors.get(name) {
            Some(t) if t.shape() == target.shape() => {
                target.assign(t);
                used += 1;
            }
            Some(t) => {
                problem.get_or_insert(format!("tensor {name} has shape {:?}, expected {:?}", t.shape(), target.shape()));
            }
            None => {
                problem.get_or_insert(format!("tensor {name} missing"));
            }
        }
    });
    if let Some(p) = problem {
        return Err(Error::Corrupt(p));
    }
    if used != tensors.len() {
        return Err(Error::Corrupt("checkpoint holds tensors the model does not use".into()));
    }
    if !state.is_finite() {
        return Err(Error::Corrupt("non-finite parameter values".into()));
    }
    Ok(state)
}

/// Writes atomically and returns the checkpoint identifier (payload digest).
pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<String> {
    let bytes = encode_checkpoint(state)?;
    let id = hex(&bytes[bytes.len() - DIGEST_LEN..]);
    write_atomic(path, &bytes)?;
    Ok(id)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Hex digest stored in a checkpoint's trailer.
pub fn checkpoint_id(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < DIGEST_LEN {
        return Err(Error::Corrupt("file too short".into()));
    }
    Ok(hex(&bytes[bytes.len() - DIGEST_LEN..]))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
