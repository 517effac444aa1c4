//! Adaptive variational quantum dynamics on a dense statevector simulator.
//!
//! The variational state is a product of Pauli rotations acting on a
//! reference state. Parameters follow McLachlan's variational principle, and
//! the ansatz grows from an operator pool whenever the McLachlan distance
//! exceeds a cutoff. Trotterized and exact propagators serve as baselines.

pub mod ansatz;
pub mod driver;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod mclachlan;
pub mod models;
pub mod observables;
pub mod pauli;
pub mod state;
pub mod vqe;

#[cfg(test)]
mod testing;

pub use ansatz::Ansatz;
pub use driver::{AvqdsConfig, TrajectoryRecord};
pub use error::{Error, Result};
pub use mclachlan::McLachlanSystem;
pub use models::Schedule;
pub use pauli::{parse_pauli, Pauli, PauliString, PauliSum, Phase};
pub use state::StateVector;
