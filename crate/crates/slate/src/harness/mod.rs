//! Instance generators, canonical serialization and the seeded experiment
//! runner behind the command-line interface.

mod experiment;
mod generate;
mod serialize;

pub use experiment::*;
pub use generate::*;
pub use serialize::*;
