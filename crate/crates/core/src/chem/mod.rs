pub mod basis;
pub mod fcidump;
pub mod geometry;
pub mod integrals;

pub use basis::BasisSet;
pub use geometry::{parse_xyz, Geometry, Units, ANGSTROM_TO_BOHR};
pub use integrals::{compute_integrals, Eri, IntegralSet};
