//! Community-count selection for stochastic block models.

pub mod dcsbm;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod model;
pub(crate) mod rows;
pub mod sbm;
pub mod seeding;
pub mod selection;
pub mod simgen;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Assignment, CountStats, EdgeMode, Graph};
pub use model::Model;
