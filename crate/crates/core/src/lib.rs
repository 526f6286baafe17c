//! Exact-arithmetic laboratory for geometric maximal operators over
//! homothecy-invariant families, halo functions and Tauberian constants.

pub mod augment;
pub mod basis;
pub mod cli;
pub mod error;
pub mod grid;
pub mod halo;
pub mod maximal;
mod parallel;
pub mod prefix;
pub mod rational;
pub mod tauber;

pub use basis::{Basis, BasisElement, BasisFamily, ElementSpec, FamilyKind};
pub use error::{Error, Result};
pub use grid::{CellSet, GridGeometry};
pub use maximal::{maximal_field, superlevel, superlevel_direct, MaximalField};
pub use rational::{rat, Rational};
