//! Exact non-equilibrium steady states of a boundary-driven hardcore-boson
//! flux ladder, with a Gaussian free-boson reference.

pub mod basis;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod free;
pub mod full;
pub mod liouvillian;
pub mod model;
pub mod observables;
pub mod solver;
pub mod spectra;

pub use basis::{OccupationState, SectorBasis, SiteIndex};
pub use error::{Error, Result};
pub use liouvillian::{BlockDensityMatrix, BlockLiouvillian};
pub use model::{DriveSpec, LadderSpec, SparseSectorOperator};
