//! Flat-torus geometry: grids, sampled fields, spectral calculus, quadrature and
//! geodesic-ball utilities.

mod field;
mod interp;
mod snapshot;
mod spectral;
mod torus;

pub use field::Field;
pub use interp::window_axis;
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_HEADER_LEN, SNAPSHOT_MAGIC};
pub use torus::{Point, TorusGrid};
