//! Inverse source problem for the Helmholtz equation: recover p(x) from
//! boundary Cauchy data of u(x, θ) over a range of plane-wave incidence
//! angles, by truncating w = −u/(k²u₀) in a special angular basis and solving
//! the resulting coupled elliptic system with the quasi-reversibility method.

pub mod basis;
pub mod config;
pub mod data;
pub(crate) mod dense;
pub mod error;
pub mod forward;
pub mod grid;
pub mod io;
pub mod phantoms;
pub mod pipeline;
pub mod qrm;
pub mod recon;
pub mod sparse;

pub use error::{Error, Result};
