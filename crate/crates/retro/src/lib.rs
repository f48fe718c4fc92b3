//! Reactive trajectory optimization for nonlinear discrete-time systems.
//!
//! The crate plans a control sequence with differential dynamic programming
//! (DDP/iLQR) against a forecast of a moving target, then fine-tunes that
//! sequence online whenever the target forecast shifts, without re-running
//! the optimizer. The fine-tuning step exploits a linearly-solvable
//! formulation: the KL divergence between the updated and the previous
//! target belief enters the value function, the exponentiated value shift
//! (the desirability `z`) satisfies a linear fixed-point equation `z = Mz`,
//! and one linear solve yields value shifts and feedforward control
//! corrections for the whole remaining horizon.
//!
//! Modules:
//!
//! - [`dynamics`] — system-model interface, tracking costs, built-in
//!   desk-scale models, trajectory rollout.
//! - [`ddp`] — the DDP/iLQR solver (backward Q-expansion, regularized
//!   gains, line-searched forward pass) plus a Riccati LQR reference.
//! - [`belief`] — Gaussian/mixture target beliefs, ballistic Kalman
//!   forecasting, mixture-of-parabolas EM, KL divergence.
//! - [`adjust`] — the desirability system: cost shifts, the `z = Mz`
//!   solve, value gradients, control corrections, and the online session.
//! - [`regret`] — oracle comparison, regret series against the
//!   `alpha(1/T) + log T` bound, normalization-term checks, timing
//!   benchmarks, horizon sweeps.
//! - [`harness`] — scenario configuration, target generation, the four
//!   baseline methods, and report serialization behind the `retro` CLI.

pub mod adjust;
pub mod belief;
pub mod ddp;
pub mod dynamics;
pub mod harness;
pub mod regret;

pub use adjust::{AdjustmentResult, CostShiftVector, DesirabilityMatrix, DesirabilitySolution};
pub use belief::{BeliefTrajectory, GaussianBelief, MixtureBelief, Observation, ShiftEvent};
pub use ddp::{GainSchedule, QExpansion, SolveOptions, SolveReport, ValueTrace};
pub use dynamics::{ControlVector, NominalTrajectory, StateVector, SystemModel, TargetSeries};
pub use regret::{ComplexityRecord, RegretReport};

#[cfg(doctest)]
mod book;
