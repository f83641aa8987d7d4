//! Two-phase RIS-assisted batteryless IoT link model.
//!
//! A base station's RF signal charges a batteryless sensor S through a
//! reconfigurable intelligent surface (phase 1); S then spends the harvested
//! energy on a device-to-device transmission to a peer D, again assisted by
//! the panel (phase 2). The library maximizes the transmitted bits over the
//! phase-1 element count `m`, the phase-2 element count `k` and the D2D
//! slot `tau`, both with an iterative block-coordinate solver and with an
//! exhaustive oracle, and reproduces the standard parameter sweeps.
//!
//! Modules:
//! - [`params`] / [`model`]: domain types and the closed-form physics.
//! - [`channel`]: 3GPP UMi pathloss + Rayleigh fading, seeded.
//! - [`solver`]: block-coordinate descent with SCA and exhaustive blocks.
//! - [`oracle`]: ground-truth enumeration of the decision space.
//! - [`experiments`]: sweeps and CSV emission.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod params;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    align_phases, bits_transmitted, check_feasibility, effective_cascade, harvested_energy,
    ChannelMode, ChannelRealization, Decision, FeasibilityReport, PhaseConfig,
};
pub use params::{dbm_to_watts, Geometry, SystemParams};
pub use solver::{bcd_solve, BlockSolver, SolveResult, SolveStatus, SolverConfig};
