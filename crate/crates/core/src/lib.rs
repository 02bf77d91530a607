pub mod emotion;
pub mod env;
pub mod error;
pub mod exec;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod scope;
pub mod seed;
pub mod text;

pub use error::{Error, Result};
