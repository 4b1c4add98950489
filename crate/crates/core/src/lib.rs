pub mod bundles;
pub mod calculus;
pub mod cli;
pub mod config;
pub mod connections;
pub mod error;
pub mod liegroup;
pub mod principal;
pub mod report;
pub mod scenarios;
pub mod suite;

pub use error::{Error, Result};
