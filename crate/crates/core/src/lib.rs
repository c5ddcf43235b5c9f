//! Finite-level calculus on the two-dimensional Sierpinski gasket.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! machinery: exact level graphs `V_m`, harmonic extension and graph energies,
//! Hausdorff / Kusuoka / energy measures, the random-walk approximation of
//! Brownian motion together with its Brownian-martingale increments, backward
//! SDE solvers on the resulting Markov chain, the weak-form semi-linear
//! parabolic solver, and the special functions used by the moment bounds.
//!
//! File formats, the command line and multi-threaded path ensembles live in
//! the companion `gasket-lab` crate.

#![no_std]

extern crate alloc;

pub mod bounds;
pub mod bsde;
pub mod cell;
pub mod driver;
pub mod ensemble;
pub mod error;
pub mod frame;
pub mod graph;
pub mod harmonic;
pub mod kernel;
pub mod matrix;
pub mod measure;
pub mod pde;
pub mod scalar;
pub mod special;
pub mod stats;
pub mod walk;

pub use cell::CellWord;
pub use error::{Error, Result};
pub use graph::{Coord, LevelGraph, Vertex};
pub use kernel::StepKernel;
pub use scalar::{Rational, Scalar};

/// Largest level accepted by [`LevelGraph::build`]; `|V_12|` is about 8e5.
pub const MAX_LEVEL: u8 = 12;

/// Largest level for which exact rational tables are produced.
pub const MAX_EXACT_LEVEL: u8 = 10;
