//! Hierarchical behavioural repertoires for a kinematic hexapod, with
//! GP-guided trial-and-error damage recovery in maze navigation.

pub mod adapt;
pub mod analysis;
pub mod archive;
pub mod bench;
pub mod config;
pub mod error;
pub mod evolve;
pub mod geom;
pub mod gp;
pub mod hexasim;
pub mod hierarchy;
pub mod persist;
pub mod planner;
pub mod stats;
pub mod store;
pub mod svg;

pub use error::{Error, Result};
