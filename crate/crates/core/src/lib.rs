//! Simulation and analysis of two noisy qubit channels combined in
//! superpositions of trajectories.
//!
//! Three coherent layouts are modelled, each as a joint state over the
//! trajectory (`T`), information (`I`) and auxiliary (`H`) qubits:
//!
//! * quantum control of two parallel channels,
//! * two channels in series with quantum-controlled unitaries,
//! * quantum control of the channel order (the quantum switch),
//!
//! together with the single-use and classical-mixture baselines. Layouts are
//! scored by coherent information against the Bell probe, and can be
//! characterised end to end with simulated process tomography.
//!
//! Subsystem ordering is fixed everywhere: `T` is the most significant qubit,
//! then `I`, then `H`.

pub mod channels;
pub mod error;
pub mod exec;
pub mod infometrics;
pub mod layouts;
pub mod qmat;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
