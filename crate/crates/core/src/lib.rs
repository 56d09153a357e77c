//! RBF-FD discretisation on scattered nodes with Neumann boundary rows, the
//! determinant analysis of the local interpolation matrices, and two
//! stabilisation strategies for the boundary nodes.

pub mod dmat;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod interp;
pub mod kernels;
pub mod optdir;
pub mod pde;
pub mod stabilize;

pub use dmat::DMat;
pub use error::{Error, Result};
pub use geometry::{Domain2D, NodeKind, NodeSet, Point, Stencil};
pub use interp::{DiffOperator, StencilSystem};
pub use kernels::{Family, KernelSpec, PolyBasis};
pub use optdir::{Init, OptResult, SchurData};
pub use stabilize::SelectionConfig;
