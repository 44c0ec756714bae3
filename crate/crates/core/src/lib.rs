pub mod cech;
pub mod elliptic;
pub mod error;
pub mod forms;
pub mod genmaps;
pub mod grid;
pub mod intertwine;
pub mod invariants;
pub mod lift;
pub mod quat;

pub use error::{Error, Result};
