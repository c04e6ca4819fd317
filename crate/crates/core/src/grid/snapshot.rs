//! Binary field snapshots.
//!
//! Layout (little-endian): magic `MFLD0001`, `u32 n`, `u32` reserved (zero),
//! `f64 side_length`, `f64 time`, `f64 rho`, then `n²` row-major `f64` samples.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::Field;
use super::torus::TorusGrid;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"MFLD0001";
pub const SNAPSHOT_HEADER_LEN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: u32,
    pub side_length: f64,
    pub time: f64,
    pub rho: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field<T: Scalar>(field: &Field<T>, time: f64, rho: f64) -> Self {
        Self {
            n: field.grid().n() as u32,
            side_length: field.grid().side_length().as_f64(),
            time,
            rho,
            values: field.values().iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn grid<T: Scalar>(&self) -> Result<Arc<TorusGrid<T>>> {
        TorusGrid::new(self.n as usize, T::lit(self.side_length))
    }

    pub fn to_field<T: Scalar>(&self) -> Result<Field<T>> {
        self.to_field_on(&self.grid()?)
    }

    /// Loads the samples onto an existing grid of the same shape.
    pub fn to_field_on<T: Scalar>(&self, grid: &Arc<TorusGrid<T>>) -> Result<Field<T>> {
        if grid.n() != self.n as usize || grid.side_length().as_f64() != T::lit(self.side_length).as_f64() {
            return Err(Error::GridMismatch);
        }
        Field::new(grid.clone(), self.values.iter().map(|&v| T::lit(v)).collect())
    }
}

pub fn write_snapshot<W: Write, T: Scalar>(mut w: W, field: &Field<T>, time: f64, rho: f64) -> Result<()> {
    let n = field.grid().n() as u32;
    let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * field.values().len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&field.grid().side_length().as_f64().to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    buf.extend_from_slice(&rho.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().expect("4-byte slice"));
    let side_length = f64_at(&header, 16);
    let time = f64_at(&header, 24);
    let rho = f64_at(&header, 32);
    let count = (n as usize)
        .checked_mul(n as usize)
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;
    let mut body = vec![0u8; count * 8];
    r.read_exact(&mut body)?;
    let values = body.chunks_exact(8).map(|c| f64_at(c, 0)).collect();
    Ok(Snapshot {
        n,
        side_length,
        time,
        rho,
        values,
    })
}
