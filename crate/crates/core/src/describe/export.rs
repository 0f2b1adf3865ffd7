use std::path::{Path, PathBuf};

use super::{BinaryDescriptor, Descriptor, DescriptorKind, FloatDescriptor, BINARY_BITS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FDSC";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 4 + 2;

/// Descriptors of one kind, as stored in an `FDSC` file.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet {
    pub kind: DescriptorKind,
    pub descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn new(kind: DescriptorKind, descriptors: Vec<Descriptor>) -> Result<Self> {
        if let Some(d) = descriptors.iter().find(|d| d.kind() != kind) {
            return Err(Error::IncompatibleDescriptor(format!(
                "{} descriptor in a {kind} set",
                d.kind()
            )));
        }
        Ok(Self { kind, descriptors })
    }

    /// Header then row-major payload: little-endian f32 values for float
    /// kinds, LSB-first packed bits for binary kinds.
    pub fn to_bytes(&self) -> Vec<u8> {
        let row = row_bytes(self.kind);
        let mut out = Vec::with_capacity(HEADER_LEN + row * self.descriptors.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind.code());
        out.extend_from_slice(&(self.descriptors.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.kind.dim() as u16).to_le_bytes());
        for d in &self.descriptors {
            match d {
                Descriptor::Float(f) => {
                    for v in f.values() {
                        out.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
                Descriptor::Binary(b) => out.extend_from_slice(&b.to_bytes()),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |offset: usize, reason: String| Error::Decode {
            path: PathBuf::from(path),
            offset: offset as u64,
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail(
                bytes.len(),
                format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
            ));
        }
        if &bytes[..4] != MAGIC {
            return Err(fail(0, "missing FDSC magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(fail(4, format!("unsupported version {}", bytes[4])));
        }
        let kind =
            DescriptorKind::from_code(bytes[5]).ok_or_else(|| fail(5, format!("unknown kind code {}", bytes[5])))?;
        let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let dim = u16::from_le_bytes(bytes[10..12].try_into().expect("2 bytes")) as usize;
        if dim != kind.dim() {
            return Err(fail(10, format!("{kind} needs dim {}, header says {dim}", kind.dim())));
        }
        let row = row_bytes(kind);
        let need = HEADER_LEN + row * count;
        if bytes.len() != need {
            return Err(fail(
                bytes.len().min(need),
                format!(
                    "payload holds {} bytes, expected {}",
                    bytes.len() - HEADER_LEN,
                    row * count
                ),
            ));
        }
        let mut descriptors = Vec::with_capacity(count);
        for chunk in bytes[HEADER_LEN..].chunks_exact(row) {
            let d = if kind.is_binary() {
                let mut words = [0u64; BINARY_BITS / 64];
                for (w, b) in words.iter_mut().zip(chunk.chunks_exact(8)) {
                    *w = u64::from_le_bytes(b.try_into().expect("8 bytes"));
                }
                BinaryDescriptor::from_words(kind, words)?.into()
            } else {
                let values = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                    .collect();
                FloatDescriptor::from_values(kind, values)?.into()
            };
            descriptors.push(d);
        }
        Ok(Self { kind, descriptors })
    }
}

fn row_bytes(kind: DescriptorKind) -> usize {
    if kind.is_binary() {
        kind.dim() / 8
    } else {
        kind.dim() * 4
    }
}

pub fn write_descriptors(path: &Path, set: &DescriptorSet) -> Result<()> {
    std::fs::write(path, set.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_descriptors(path: &Path) -> Result<DescriptorSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DescriptorSet::from_bytes(&bytes, path)
}
