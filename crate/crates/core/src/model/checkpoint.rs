//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "ECGCKPT\0"
//! version    u32
//! dtype      u8       1 = f32, 2 = f64 (see DType::code)
//! header_len u64
//! header     JSON     {"seed": u64, "spec": ArchitectureSpec}
//! blocks     u32
//! per block:
//!   name_len u16, name (UTF-8)
//!   role     u8       0 = trainable parameter, 1 = buffer
//!   rank     u8, dims u64 × rank
//!   values   dtype × prod(dims)
//! ```
//!
//! Blocks appear in model order: all parameters, then all buffers. Nothing may
//! follow the last block.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build, ArchitectureSpec, Model, ModelState};
use crate::error::{Error, Result};
use crate::real::{DType, Real};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECGCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    spec: ArchitectureSpec,
}

fn put_block<R: Real>(out: &mut Vec<u8>, name: &str, role: u8, t: &Tensor<R>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(role);
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(out);
    }
}

pub fn encode_checkpoint<R: Real>(model: &Model<R>) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        seed: model.seed(),
        spec: model.spec().clone(),
    })?;
    let params = model.named_params();
    let buffers = model.named_buffers();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(R::DTYPE.code());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&((params.len() + buffers.len()) as u32).to_le_bytes());
    for (name, t) in &params {
        put_block(&mut out, name, 0, t);
    }
    for (name, t) in &buffers {
        put_block(&mut out, name, 1, t);
    }
    Ok(out)
}

pub fn save_checkpoint<R: Real>(model: &Model<R>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!(
                "unexpected end of file reading {what} ({n} bytes needed, {} left)",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

struct Block<R> {
    name: String,
    role: u8,
    shape: Vec<usize>,
    data: Vec<R>,
}

fn decode<R: Real>(bytes: &[u8]) -> Result<(Header, Vec<Block<R>>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format { offset: 0, message: "bad magic; not a checkpoint file".into() });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let code = r.u8("dtype")?;
    let dtype = DType::from_code(code).ok_or_else(|| r.err(format!("unknown dtype code {code}")))?;
    if dtype != R::DTYPE {
        return Err(Error::Validation(format!(
            "checkpoint stores {dtype:?} values but {:?} was requested",
            R::DTYPE
        )));
    }
    let header_len = r.u64("header length")? as usize;
    let header_start = r.pos;
    let header_bytes = r.take(header_len, "header")?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| Error::Format {
        offset: header_start as u64,
        message: format!("header JSON: {e}"),
    })?;
    let count = r.u32("block count")?;
    let mut blocks = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let name_len = r.u16("block name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "block name")?)
            .map_err(|_| r.err("block name is not UTF-8"))?
            .to_string();
        let role = r.u8("block role")?;
        if role > 1 {
            return Err(r.err(format!("block {name}: unknown role {role}")));
        }
        let rank = r.u8("block rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("block dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or_else(|| r.err(format!("block {name}: shape {shape:?} overflows")))?;
        let raw = r.take(n, &format!("values of block {name}"))?;
        let data = raw.chunks_exact(dtype.size()).map(R::read_le).collect();
        blocks.push(Block { name, role, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes after the last block", bytes.len() - r.pos)));
    }
    Ok((header, blocks))
}

fn restore<R: Real>(model: &mut Model<R>, blocks: Vec<Block<R>>) -> Result<()> {
    let expected: Vec<(String, u8, Vec<usize>)> = model
        .named_params()
        .into_iter()
        .map(|(n, t)| (n, 0u8, t.shape().to_vec()))
        .chain(model.named_buffers().into_iter().map(|(n, t)| (n, 1u8, t.shape().to_vec())))
        .collect();
    if expected.len() != blocks.len() {
        return Err(Error::Validation(format!(
            "checkpoint holds {} tensors but the architecture defines {}",
            blocks.len(),
            expected.len()
        )));
    }
    for ((name, role, shape), b) in expected.iter().zip(&blocks) {
        if *name != b.name || *role != b.role || *shape != b.shape {
            return Err(Error::Validation(format!(
                "checkpoint tensor {} {:?} does not match architecture tensor {} {:?}",
                b.name, b.shape, name, shape
            )));
        }
    }
    let state = ModelState {
        tensors: blocks.into_iter().map(|b| (b.name, b.data)).collect(),
    };
    model.load_state(&state)
}

pub fn decode_checkpoint<R: Real>(bytes: &[u8]) -> Result<Model<R>> {
    let (header, blocks) = decode::<R>(bytes)?;
    let mut model = build(&header.spec, header.seed)?;
    restore(&mut model, blocks)?;
    Ok(model)
}

pub fn load_checkpoint<R: Real>(path: &Path) -> Result<Model<R>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads weights into an existing model; the stored spec must equal the model's.
pub fn load_checkpoint_into<R: Real>(model: &mut Model<R>, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, blocks) = decode::<R>(&bytes)?;
    if &header.spec != model.spec() {
        return Err(Error::Validation(format!(
            "checkpoint architecture {:?} differs from model architecture {:?}",
            header.spec.name,
            model.spec().name
        )));
    }
    restore(model, blocks)
}
