//! Forward and inverse Dirichlet-to-Neumann maps for Schrödinger operators on
//! finite square-lattice quantum graphs.
//!
//! Every edge of the lattice carries a symmetric potential on `[0, 1]`. The
//! crate computes the edge and vertex Dirichlet-to-Neumann maps of the region
//! `D_N = {0..N}^2` from given potentials, and reconstructs the potentials of
//! all interior edges from the edge map by sweeping diagonal lines.

pub mod dn_file;
pub mod dn_maps;
pub mod edge_ode;
pub mod error;
pub mod experiment;
pub mod isp1d;
pub mod lattice;
pub mod numerics;
pub mod potentials;
pub mod reconstruct;
pub mod vertex_system;

pub use error::{Error, Reason, Result};
