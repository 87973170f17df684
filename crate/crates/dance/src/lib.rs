pub mod bench;
pub mod data;
pub mod distrib;
pub mod error;
pub mod model;
pub mod pcg;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
