//! Worked scenarios: ordinary principal bundles, affine connections on
//! vector bundles and jets of gauge transformations.

pub mod affine;
pub mod gauge;
pub mod standard;
