//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MAGECKPT" | version: u32 | count: u64
//! count × { name_len: u32 | name: UTF-8 | dtype: u8 | rank: u32 | dims: rank × u64 | values }
//! ```
//!
//! `dtype` 1 stores `f64` values, 2 stores `f32` values. Writers always emit
//! `f64`; readers accept both.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MAGECKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const DTYPE_F64: u8 = 1;
const DTYPE_F32: u8 = 2;

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(mut w: W, store: &ParamStore) -> Result<(), TensorError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for p in store.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[DTYPE_F64])?;
        w.write_all(&(p.value.rank() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], TensorError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads every record of a checkpoint in file order.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, TensorError> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic string"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(read_array(&mut r)?);
    let mut out = Vec::new();
    for _ in 0..count {
        let name_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("parameter name is not UTF-8"))?;
        let [dtype] = read_array::<1, _>(&mut r)?;
        let rank = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_array(&mut r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        match dtype {
            DTYPE_F64 => {
                for _ in 0..n {
                    values.push(f64::from_le_bytes(read_array(&mut r)?));
                }
            }
            DTYPE_F32 => {
                for _ in 0..n {
                    values.push(f32::from_le_bytes(read_array(&mut r)?) as f64);
                }
            }
            other => return Err(bad(format!("unknown dtype tag {other} for `{name}`"))),
        }
        let tensor = Tensor::new(shape, values).map_err(|e| bad(format!("`{name}`: {e}")))?;
        out.push((name, tensor));
    }
    Ok(out)
}

/// Loads a checkpoint into an existing store. Every stored record must name
/// a parameter of the store with the same shape, and every parameter of the
/// store must be present.
pub fn load_checkpoint<R: Read>(r: R, store: &mut ParamStore) -> Result<(), TensorError> {
    let records = read_checkpoint(r)?;
    if records.len() != store.len() {
        return Err(bad(format!(
            "checkpoint has {} parameters, model has {}",
            records.len(),
            store.len()
        )));
    }
    for (name, tensor) in records {
        let id = store
            .id(&name)
            .ok_or_else(|| bad(format!("unknown parameter `{name}`")))?;
        let p = store.get_mut(id);
        if p.value.shape() != tensor.shape() {
            return Err(bad(format!(
                "shape mismatch for `{name}`: model {:?}, checkpoint {:?}",
                p.value.shape(),
                tensor.shape()
            )));
        }
        p.value = tensor;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, store: &ParamStore) -> Result<(), TensorError> {
    write_checkpoint(BufWriter::new(File::create(path)?), store)
}

pub fn load_checkpoint_file(path: &Path, store: &mut ParamStore) -> Result<(), TensorError> {
    load_checkpoint(BufReader::new(File::open(path)?), store)
}
