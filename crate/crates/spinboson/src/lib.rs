//! Simulation of dissipative multiphoton and nonlinear spin-boson models
//! realized from a driven, linearly coupled spin-boson system.
//!
//! A two-level system linearly coupled to one bosonic mode, biased and
//! driven, simulates multi-boson exchange models (one- and two-boson
//! Jaynes-Cummings and quantum Rabi models, and their Fock-nonlinear
//! counterparts) after a unitary frame map. The same map transports the
//! standard dissipation channels, generally into time-dependent jump
//! operators. This crate builds both sides, integrates both master
//! equations, and quantifies how well the physical system reproduces the
//! simulated model.
//!
//! Conventions: the spin basis is ordered (|e>, |g>); composite operators
//! are `spin (x) boson`; the boson frequency sets the unit of frequency and
//! all scenario inputs are ratios.

pub mod density;
pub mod dissipator;
pub mod error;
pub mod frame;
pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod operator;
pub mod presets;
pub mod scenario;

pub use density::{
    coherent_state, fidelity, fidelity_dm, fock_vector, leakage_top4, product_state, purity,
    spin_pure, thermal_state, DensityMatrix, SpinState,
};
pub use dissipator::{
    approx_dissipator, dressed_dissipators, engineered_source, standard_jump,
    transformed_channel, transformed_jump_closed_form, transformed_jump_numeric, Channel, Jump,
    JumpKind, SpectralRate,
};
pub use error::{Error, Result};
pub use frame::{from_simulated_frame, gamma, t_operator, to_simulated_frame, FrameMap, FrameSpec};
pub use linalg::{CMat, CVec};
pub use lindblad::{
    evolve, linear_grid, lindblad_rhs, Dissipation, EvolutionProblem, Hamiltonian, Observable,
    Trajectory,
};
pub use model::{
    build_hg, build_hn, build_hn_eta, build_target, classify_target, effective_coupling,
    f_n_operator, remove_a2, sideband_frequency, DrivingTerm, ModelKind, Sideband, SystemParams,
    TargetModel,
};
pub use operator::{displacement, embed, fock_annihilate, fock_number, squeeze, Operator};
pub use presets::{preset, PRESET_NAMES};
pub use scenario::{
    resolve, run_scenario, run_sweep, rwa_convergence, set_axis, sweep_summary_csv, write_csv,
    ScenarioConfig, ScenarioResult, Summary,
};
