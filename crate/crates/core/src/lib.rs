pub mod classical;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod lattice;
pub mod numerics;
pub mod observables;
pub mod propagate;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
