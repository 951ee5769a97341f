//! CAST binary array container.
//!
//! Layout: magic `CAST`, version byte `1`, `ndim` byte, dtype byte (`0` real f64, `1` complex
//! f64 pairs), `ndim` little-endian u64 dimensions, the row-major little-endian payload, then a
//! u32 little-endian length and that many bytes of UTF-8 metadata.

use std::io::{Read, Write};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CAST";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum CastArray {
    Real(ArrayD<f64>),
    Complex(ArrayD<Complex64>),
}

impl CastArray {
    pub fn shape(&self) -> &[usize] {
        match self {
            CastArray::Real(a) => a.shape(),
            CastArray::Complex(a) => a.shape(),
        }
    }
}

pub fn write_cast<W: Write>(mut w: W, array: &CastArray, metadata: &str) -> Result<()> {
    let shape = array.shape();
    if shape.len() > u8::MAX as usize {
        return Err(Error::invalid("too many dimensions for CAST"));
    }
    let meta_len = u32::try_from(metadata.len()).map_err(|_| Error::invalid("CAST metadata too long"))?;
    w.write_all(MAGIC)?;
    let dtype = match array {
        CastArray::Real(_) => 0u8,
        CastArray::Complex(_) => 1u8,
    };
    w.write_all(&[VERSION, shape.len() as u8, dtype])?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut payload = Vec::new();
    match array {
        CastArray::Real(a) => a.iter().for_each(|v| payload.extend_from_slice(&v.to_le_bytes())),
        CastArray::Complex(a) => a.iter().for_each(|v| {
            payload.extend_from_slice(&v.re.to_le_bytes());
            payload.extend_from_slice(&v.im.to_le_bytes());
        }),
    }
    w.write_all(&payload)?;
    w.write_all(&meta_len.to_le_bytes())?;
    w.write_all(metadata.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated CAST file: {e}")))?;
    Ok(buf)
}

fn f64_at(bytes: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"))
}

pub fn read_cast<R: Read>(mut r: R) -> Result<(CastArray, String)> {
    let head = read_exact(&mut r, 7)?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("not a CAST file".into()));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!("unsupported CAST version {}", head[4])));
    }
    let ndim = head[5] as usize;
    let dtype = head[6];
    let dims_raw = read_exact(&mut r, 8 * ndim)?;
    let dims: Vec<usize> = (0..ndim)
        .map(|i| u64::from_le_bytes(dims_raw[8 * i..8 * i + 8].try_into().expect("8 bytes")) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("CAST dimensions overflow".into()))?;
    let width = match dtype {
        0 => 8,
        1 => 16,
        other => return Err(Error::Format(format!("unknown CAST dtype {other}"))),
    };
    let payload = read_exact(&mut r, count.checked_mul(width).ok_or_else(|| Error::Format("CAST payload overflow".into()))?)?;
    let array = if dtype == 0 {
        CastArray::Real(
            ArrayD::from_shape_vec(IxDyn(&dims), (0..count).map(|i| f64_at(&payload, i)).collect())
                .map_err(|e| Error::Format(e.to_string()))?,
        )
    } else {
        CastArray::Complex(
            ArrayD::from_shape_vec(
                IxDyn(&dims),
                (0..count).map(|i| Complex64::new(f64_at(&payload, 2 * i), f64_at(&payload, 2 * i + 1))).collect(),
            )
            .map_err(|e| Error::Format(e.to_string()))?,
        )
    };
    let len = u32::from_le_bytes(read_exact(&mut r, 4)?.try_into().expect("4 bytes")) as usize;
    let metadata = String::from_utf8(read_exact(&mut r, len)?).map_err(|_| Error::Format("CAST metadata is not UTF-8".into()))?;
    Ok((array, metadata))
}
