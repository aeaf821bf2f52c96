//! Hierarchical reduced-order-model locomotion control for bipedal robots.
//!
//! The stack is split into layers that each consume the output of the one
//! above it:
//!
//! * [`planner`] solves a nonlinear MPC over the step-to-step ALIP dynamics,
//!   jointly choosing step lengths, step periods and ankle torques.
//! * [`refgen`] turns a step plan into stance-foot schedules and single
//!   rigid body reference trajectories.
//! * [`mpc`] tracks those references with a linear MPC over the SRB model or
//!   the decomposed SRB model that adds torso yaw and single-axis arm masses.
//! * [`sim`] integrates a nonlinear plant of the decomposed body and runs
//!   closed-loop episodes with disturbances.
//!
//! [`model`] holds the shared reduced-order model mathematics and [`qp`] the
//! dense operator-splitting QP solver used by both optimization layers.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
pub(crate) mod math;

pub mod model;
pub mod mpc;
pub mod planner;
pub mod qp;
pub mod refgen;
pub mod sim;

pub use error::{Error, Result};
