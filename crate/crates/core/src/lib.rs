//! Amplitude-estimation state preparation: circuit IR, statevector
//! simulation, function loading, Grover powers with the Spin-Echo rewrite,
//! MLAE, quadrature, CNOT counting, error mitigation and the Heston example.

// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod grover;
pub mod heston;
pub mod mitigation;
pub mod mlae;
pub mod pipelines;
pub mod quadrature;
pub mod spin_echo;
pub mod state_prep;
pub mod statevector;
pub mod transpile;

pub use circuit::{Circuit, Gate};
pub use error::{Error, Result};
pub use grover::{build_q, build_s0, build_s_psi0, grover_power, PowerCircuit};
pub use heston::{build_heston_A, GridSpec, HestonParams, HestonTables};
pub use mitigation::{NoiseModel, ReadoutCalibration};
pub use mlae::{mlae_estimate, MlaeResult, MlaeSchedule};
pub use quadrature::{ErrorBound, QuadratureSpec, Rule};
pub use spin_echo::{verify_equivalence, NormalForm, Pauli, SpinEchoPattern};
pub use state_prep::{FlaggedOperator, MarkovProcessSpec, RotationOracle};
pub use statevector::{GoodStateFlags, ShotCounts, StateVector};
pub use transpile::{CountReport, TopologyKind, TopologySpec};
