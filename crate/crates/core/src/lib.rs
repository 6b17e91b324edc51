//! Safety filter for real-time optimization: wraps any iterative input
//! generator so that every applied input stays strictly feasible and, in full
//! mode, the cost decreases monotonically until a KKT point is reached.

pub mod algorithms;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod harness;
pub mod kkt;
pub mod problem;
pub mod scfo;
pub mod smallsolve;
pub mod verify;

pub use error::{Result, ScfoError};
