//! Model files: one line of JSON header, then the parameters as
//! little-endian `f64`s in buffer order.

use super::{ToyConfig, ToyTransformer};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

const FORMAT: &str = "accessbound-toy";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ToyConfig,
    param_count: usize,
    seed: Option<u64>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    offset: usize,
    len: usize,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Inconsistent(format!("model file: {e}"))
}

pub fn write_to<W: Write>(model: &ToyTransformer, seed: Option<u64>, mut w: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config().clone(),
        param_count: model.params().len(),
        seed,
        tensors: model.tensors().into_iter().map(|(name, r)| TensorEntry { name, offset: r.start, len: r.len() }).collect(),
    };
    let line = serde_json::to_string(&header).map_err(io_err)?;
    w.write_all(line.as_bytes()).map_err(io_err)?;
    w.write_all(b"\n").map_err(io_err)?;
    let mut bytes = Vec::with_capacity(8 * model.params().len());
    for p in model.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&bytes).map_err(io_err)
}

/// Returns the model and the seed recorded in its header.
pub fn read_from<R: Read>(r: R) -> Result<(ToyTransformer, Option<u64>)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err)?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(io_err)?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(io_err(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() != 8 * header.param_count {
        return Err(io_err(format!("expected {} parameter bytes, found {}", 8 * header.param_count, bytes.len())));
    }
    let params = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((ToyTransformer::from_params(header.config, params)?, header.seed))
}

pub fn save(model: &ToyTransformer, seed: Option<u64>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(f);
    write_to(model, seed, &mut w)?;
    w.flush().map_err(io_err)
}

pub fn load(path: &Path) -> Result<(ToyTransformer, Option<u64>)> {
    read_from(std::fs::File::open(path).map_err(io_err)?)
}
