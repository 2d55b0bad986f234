//! Binary parameter files.
//!
//! Layout (little-endian): magic `LBLRLCKP`, u32 version, 32-byte
//! architecture fingerprint, u32 tensor count, then per tensor: u32 name
//! length, UTF-8 name, u32 rank, u32 dims, f32 data.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::param::ParamStore;

pub const MAGIC: &[u8; 8] = b"LBLRLCKP";
pub const VERSION: u32 = 1;

pub type Fingerprint = [u8; 32];

pub fn fingerprint(description: &str) -> Fingerprint {
    Sha256::digest(description.as_bytes()).into()
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::CheckpointFormat("truncated file".into())
    } else {
        Error::Io(e)
    }
}

/// Writes every parameter of `stores`, in order.
pub fn write<T: Real, W: Write>(mut w: W, fp: &Fingerprint, stores: &[&ParamStore<T>]) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    w.write_all(fp)?;
    let count: usize = stores.iter().map(|s| s.params.len()).sum();
    put_u32(&mut w, count as u32)?;
    for p in stores.iter().flat_map(|s| s.params.iter()) {
        put_u32(&mut w, p.name.len() as u32)?;
        w.write_all(p.name.as_bytes())?;
        put_u32(&mut w, p.value.shape.len() as u32)?;
        for d in &p.value.shape {
            put_u32(&mut w, *d as u32)?;
        }
        let mut buf = Vec::with_capacity(p.value.len() * 4);
        for v in &p.value.data {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads parameter values into `stores`, which must already have the
/// matching layout (names and shapes). Optimizer state is reset.
pub fn read_into<T: Real, R: Read>(mut r: R, fp: &Fingerprint, stores: &mut [&mut ParamStore<T>]) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::CheckpointMagic)?;
    if &magic != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let mut found = [0u8; 32];
    r.read_exact(&mut found).map_err(truncated)?;
    if &found != fp {
        return Err(Error::CheckpointFingerprint);
    }
    let count = get_u32(&mut r)? as usize;
    let expected: usize = stores.iter().map(|s| s.params.len()).sum();
    if count != expected {
        return Err(Error::CheckpointFormat(format!("{count} tensors, expected {expected}")));
    }
    for p in stores.iter_mut().flat_map(|s| s.params.iter_mut()) {
        let n = get_u32(&mut r)? as usize;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::CheckpointFormat("name is not UTF-8".into()))?;
        if name != p.name {
            return Err(Error::CheckpointFormat(format!("tensor {name:?} where {:?} was expected", p.name)));
        }
        let rank = get_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(get_u32(&mut r)? as usize);
        }
        if shape != p.value.shape {
            return Err(Error::CheckpointFormat(format!("tensor {name:?} has shape {shape:?}")));
        }
        let mut buf = vec![0u8; p.value.len() * 4];
        r.read_exact(&mut buf).map_err(truncated)?;
        for (v, c) in p.value.data.iter_mut().zip(buf.chunks_exact(4)) {
            let x = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !x.is_finite() {
                return Err(Error::CheckpointFormat(format!("non-finite value in {name:?}")));
            }
            *v = T::lit(x as f64);
        }
        p.m.iter_mut().chain(p.v.iter_mut()).for_each(|x| *x = T::zero());
        p.grad.iter_mut().for_each(|x| *x = T::zero());
    }
    for s in stores.iter_mut() {
        s.t = 0;
    }
    Ok(())
}
