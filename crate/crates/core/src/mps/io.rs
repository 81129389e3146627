//! Binary MPS snapshots.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u64` site count,
//! `u64` chi_max, `f64` svd cutoff, `u64` center, `n + 1` `u64` bond
//! dimensions including both unit edges, then every site tensor in row-major
//! `(chi_l, 2, chi_r)` order as `(re, im)` pairs of `f64`.

use std::io::{Read, Write};

use ndarray::Array3;
use num_complex::Complex64 as C64;

use super::state::Mps;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ISQMPS\0\0";
const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mps: &Mps, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(mps.len() as u64).to_le_bytes())?;
    w.write_all(&(mps.chi_max() as u64).to_le_bytes())?;
    w.write_all(&mps.svd_cutoff().to_le_bytes())?;
    w.write_all(&(mps.center() as u64).to_le_bytes())?;
    w.write_all(&1u64.to_le_bytes())?;
    for t in mps.tensors() {
        w.write_all(&(t.dim().2 as u64).to_le_bytes())?;
    }
    for t in mps.tensors() {
        for x in t.as_standard_layout().iter() {
            w.write_all(&x.re.to_le_bytes())?;
            w.write_all(&x.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Mps> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MPS snapshot".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    let chi_max = read_u64(&mut r)? as usize;
    let cutoff = read_f64(&mut r)?;
    let center = read_u64(&mut r)? as usize;
    if n == 0 || center >= n || n > 1 << 20 {
        return Err(Error::Format(format!("bad header: n = {n}, center = {center}")));
    }
    let bonds: Vec<usize> = (0..=n).map(|_| read_u64(&mut r).map(|x| x as usize)).collect::<Result<_>>()?;
    if bonds[0] != 1 || bonds[n] != 1 || bonds.iter().any(|&b| b == 0 || b > 1 << 16) {
        return Err(Error::Format("bad bond dimensions".into()));
    }
    let mut tensors = Vec::with_capacity(n);
    for l in 0..n {
        let count = bonds[l] * 2 * bonds[l + 1];
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        tensors.push(Array3::from_shape_vec((bonds[l], 2, bonds[l + 1]), data)?);
    }
    Ok(Mps::from_raw_parts(tensors, center, chi_max, cutoff))
}
