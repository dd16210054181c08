//! Distributed optimization for networks of uncertain high-order agents.
//!
//! Each agent is a chain of integrators driven by an unknown, linearly
//! parameterized nonlinearity. A distributed optimal signal generator
//! (`r`, `lambda` states exchanged over an undirected graph) produces a
//! reference that converges to the minimizer of the sum of local costs, and
//! a certainty-equivalence adaptive tracker drives every agent output onto
//! its reference while estimating the unknown parameters.
//!
//! Module map:
//!
//! - [`graph`]: weighted undirected topology, Laplacian, connectivity.
//! - [`costs`]: local costs, global gradient and the bisection optimum oracle.
//! - [`plant`]: agent dynamics, basis registry, Van der Pol preset.
//! - [`control`]: gain design, Lyapunov solve, generator and adaptive laws.
//! - [`numerics`]: fixed-step RK4 and small dense eigen-routines.
//! - [`sim`]: closed-loop assembly, runs, PE monitor, metrics, CSV.
//! - [`config`]: TOML scenario files and bundled presets.
//! - [`sweep`]: one-parameter scenario sweeps.

pub mod config;
pub mod control;
pub mod costs;
mod error;
pub mod graph;
pub mod numerics;
pub mod plant;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
