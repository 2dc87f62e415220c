//! Subordinate Brauer group data, local densities and fibre censuses for families of
//! diagonal conics whose coefficients are signed squarefree monomials.

pub mod analytic;
pub mod brgroup;
pub mod census;
pub mod cli;
pub mod error;
pub mod exec;
pub mod f2res;
pub mod family;
pub mod localdens;
pub mod qlocal;
pub(crate) mod util;
pub mod verify;

pub use error::{Error, Result};
