#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod integrator;
pub mod model;
pub mod mpc;
pub mod scenario;
pub mod single_interval;
pub mod trajectory;

pub use error::{Error, Result};
