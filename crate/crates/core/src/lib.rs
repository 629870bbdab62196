//! Groups with compatible C-relations and C-quasi-orders: construction,
//! axiom checking, classification, structural decomposition and canonical trees.

pub mod carrier;
pub mod classify;
pub mod crel;
pub mod ctree;
pub mod error;
pub mod fixtures;
pub mod laws;
pub mod qorder;
pub mod structure;

pub use error::{Error, Result};
