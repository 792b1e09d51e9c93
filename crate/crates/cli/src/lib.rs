//! Instance loading, generators and experiment plumbing behind the `ksys`
//! binary.

pub mod algorithms;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod parse;
