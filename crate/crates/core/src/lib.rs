//! Coupling-controlled polarization rotation of a weak probe in a
//! multi-Zeeman-sublevel EIT vapor (87Rb D1 line).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angmom;
pub mod atomic;
pub mod cli;
pub mod config;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod quadrature;
pub mod scenarios;
pub mod spectra;

pub use error::{Error, Result};
