//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `VOICKPT\0`, `u32` version, `u32` length
//! plus UTF-8 JSON of the [`ModelConfig`], `u32` array count, then per
//! array: `u16` name length, name, `u8` dtype (1 = f32, 2 = f64), `u8`
//! trainable flag, `u8` rank, `u64` dims, raw values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::config::ModelConfig;
use super::net::DcCrn;
use super::params::ParamStore;

const MAGIC: &[u8; 8] = b"VOICKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }
}

pub fn write_checkpoint(model: &DcCrn, dtype: DType, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(model.config())?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    let params = model.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params.iter() {
        w.write_all(&(p.name.len() as u16).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&[dtype.code(), p.trainable as u8, p.shape.len() as u8])?;
        for d in &p.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(p.data.len() * 8);
        for v in &p.data {
            match dtype {
                DType::F32 => buf.extend_from_slice(&(*v as f32).to_le_bytes()),
                DType::F64 => buf.extend_from_slice(&v.to_le_bytes()),
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Config(format!("checkpoint: {}", msg.into()))
}

pub fn read_checkpoint(mut r: impl Read) -> Result<DcCrn> {
    if &read_exact::<8>(&mut r)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut cfg = vec![0u8; len];
    r.read_exact(&mut cfg)?;
    let cfg: ModelConfig = serde_json::from_slice(&cfg)?;
    let count = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut store = ParamStore::default();
    for _ in 0..count {
        let nlen = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut name = vec![0u8; nlen];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| corrupt("array name is not UTF-8"))?;
        let [dtype, trainable, rank] = read_exact::<3>(&mut r)?;
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_exact(&mut r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let width = match dtype {
            1 => 4,
            2 => 8,
            other => return Err(corrupt(format!("unknown dtype {other} for `{name}`"))),
        };
        let mut raw = vec![0u8; n * width];
        r.read_exact(&mut raw)?;
        let data: Vec<f64> = if width == 4 {
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
        } else {
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        };
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("checkpoint array `{name}`")));
        }
        store.push(name, shape, data, trainable != 0);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    DcCrn::from_params(cfg, &store)
}

pub fn save_checkpoint(model: &DcCrn, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(model, DType::F64, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DcCrn> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = DcCrn::new(ModelConfig::tiny(), 9).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, DType::F64, &mut a).unwrap();
        let back = read_checkpoint(&a[..]).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.config(), m.config());
        let mut b = Vec::new();
        write_checkpoint(&back, DType::F64, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_storage_and_corruption() {
        let m = DcCrn::new(ModelConfig::tiny(), 9).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, DType::F32, &mut a).unwrap();
        let back = read_checkpoint(&a[..]).unwrap();
        let p = back.params().by_name("head.w").unwrap();
        let q = m.params().by_name("head.w").unwrap();
        assert!(p.data.iter().zip(&q.data).all(|(x, y)| *x == (*y as f32) as f64));
        assert!(read_checkpoint(&a[..a.len() - 1]).is_err());
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
        let mut extra = a;
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
    }
}
