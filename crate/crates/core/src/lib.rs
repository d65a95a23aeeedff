pub mod acquisition;
pub mod bico;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kg;
pub mod optim;
pub mod posterior;
pub mod stats;
pub mod testbeds;

pub use error::{BicoError, Result};
