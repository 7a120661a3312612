pub mod corpus;
pub mod evalkit;
pub mod error;
pub mod genkit;
pub mod refiner;
pub mod runner;
pub mod seed;
pub mod selection;
pub mod splitter;

pub use error::{Error, Result};
