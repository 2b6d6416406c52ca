pub mod checkpoint;
pub mod classical;
pub mod cvqnn;
pub mod datagen;
pub mod error;
pub mod fock;
pub mod hybrid;
pub mod model;
pub mod noise;
pub mod report;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
