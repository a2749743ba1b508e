//! H-infinity filtering for linear systems that receive an auxiliary
//! measurement through a channel with bounded time-varying delay, with a
//! quarter-car suspension as the worked plant.
//!
//! The crate covers the whole design loop:
//!
//! * [`model`]: plant construction, delay augmentation and road signals;
//! * [`lmi`]: block-affine matrix inequalities for analysis and synthesis;
//! * [`solver`]: a dense barrier solver and an eigenvalue certificate check;
//! * [`synthesis`]: gain recovery, certification and attenuation search;
//! * [`simulator`]: fixed-step simulation, a Kalman baseline and metrics.

pub mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod simulator;
pub mod solver;
pub mod synthesis;

pub use error::{Error, Result};
pub use lmi::{
    assemble_synthesis_lmi, assemble_verification_lmi, build_error_system, schur_check,
    AffineMatrixInequality, ErrorSystem, LmiProblem, MatrixVariable, VariableKind, VariableValues,
};
pub use model::{
    augment, build_plant, eval_road, AugmentParams, AugmentedDelaySystem, Plant, RoadProfile,
    RoadSegment, SuspensionParams, Waveform,
};
pub use simulator::{
    kalman_baseline, metrics, simulate, simulate_kalman, DelayProfile, KalmanBaseline, Metrics,
    SimConfig, SimMode, SimTrace,
};
pub use solver::{certify, solve_feasibility, SdpCertificate, SolveStatus, SolverOptions};
pub use synthesis::{
    minimize_gamma, recover_gains, synthesize, FilterGains, SynthesisOptions, SynthesisResult,
};
