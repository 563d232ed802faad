//! Broken-FEEC (CONGA) discretization of the two-dimensional grad-curl de Rham
//! complex on Cartesian multipatch grids.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis1d;
pub mod conga;
pub mod error;
pub mod femspace;
pub mod grid;
pub mod linalg;
pub mod solve;
pub mod sparse;

pub use assembly::{AssemblyOptions, ComplexOperators};
pub use basis1d::Basis1D;
pub use conga::{HarmonicBasis, HodgeDecomposition, HodgeOperator};
pub use error::{CongaError, Result};
pub use femspace::{BrokenField, MassBlocks, SmoothFunction};
pub use grid::{GeomElement, Grid, GridSpec, Level, MultiIndex};
pub use solve::{EigenReport, MixedSolution, SolveReport};
pub use sparse::{Space, SparseOperator};
