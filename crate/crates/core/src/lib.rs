//! Maximum causal Tsallis entropy: sparsemax policies, sparse MDP solvers,
//! feature-matching estimation with KKT checks, sparse mixture density
//! policies and adversarial imitation learning.

pub mod error;
pub mod mdn;
pub mod multigoal;
pub mod nn;
pub mod optim;
pub mod solver;
pub mod sparsemax;
pub mod tabular;
pub mod trainer;
pub mod trajectory;

pub use error::{Error, Result};
