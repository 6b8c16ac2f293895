//! Checkpoint file: magic `DSAKT1\n`, a little-endian u32 length prefix, a
//! UTF-8 JSON header (config, vocabulary, ordered tensor directory with
//! name/shape/offset), then the raw little-endian f32 payload in directory
//! order. Offsets count f32 elements from the start of the payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::kernel::ParamTensors;

use super::config::ModelConfig;
use super::params::ParamSet;

pub const MAGIC: &[u8; 7] = b"DSAKT1\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    vocabulary: Vec<String>,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    config: &ModelConfig,
    params: &ParamSet<f32>,
    vocabulary: &Vocabulary,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;

    let tensors = params.named_tensors();
    let mut directory = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, shape, data) in &tensors {
        directory.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            offset,
        });
        offset += data.len() as u64;
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        vocabulary: vocabulary.ids().to_vec(),
        tensors: directory,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, _, data) in &tensors {
        for &v in data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(ModelConfig, ParamSet<f32>, Vocabulary)> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 7];
    read_exact(&mut r, &mut magic, "magic bytes")?;
    if &magic != MAGIC {
        return Err(Error::CheckpointMagic(format!(
            "expected {:?}, found {:?}",
            String::from_utf8_lossy(MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }

    let mut len_bytes = [0u8; 4];
    read_exact(&mut r, &mut len_bytes, "header length")?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::CheckpointMagic(format!("unreadable header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::CheckpointMagic(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    header.config.validate()?;

    let mut params: ParamSet<f32> = ParamSet::zeros(&header.config);
    {
        let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
        for (name, shape, _) in params.named_tensors() {
            expected.push((name, shape));
        }
        if expected.len() != header.tensors.len() {
            return Err(Error::CheckpointMagic(format!(
                "directory lists {} tensors, config implies {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        let mut offset = 0u64;
        for ((name, shape), entry) in expected.iter().zip(header.tensors.iter()) {
            if *name != entry.name || *shape != entry.shape {
                return Err(Error::CheckpointShape {
                    name: entry.name.clone(),
                    header: entry.shape.clone(),
                    expected: shape.clone(),
                });
            }
            if entry.offset != offset {
                return Err(Error::CheckpointShape {
                    name: entry.name.clone(),
                    header: vec![entry.offset as usize],
                    expected: vec![offset as usize],
                });
            }
            offset += shape.iter().product::<usize>() as u64;
        }
    }

    for (name, data) in params.named_tensors_mut() {
        let mut buf = vec![0u8; data.len() * 4];
        read_exact(&mut r, &mut buf, &format!("tensor `{name}`"))?;
        for (v, chunk) in data.iter_mut().zip(buf.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CheckpointMagic(
            "trailing bytes after tensor payload".into(),
        ));
    }

    let vocabulary = Vocabulary::from_ids(header.vocabulary);
    Ok((header.config, params, vocabulary))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::CheckpointTruncated(format!("while reading {what}")))
}
