//! Unit commitment with a vehicle-to-grid fleet.
//!
//! A day is split into intervals. Each interval gets an on/off decision per
//! thermal unit and an aggregate EV power (positive = discharging into the
//! grid). [`dispatch`] prices a schedule, [`constraints`] checks and builds
//! feasible ones, [`neighborhood`] moves between them and [`cro`] searches.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod cro;
pub mod dispatch;
pub mod model;
pub mod neighborhood;
pub mod schedule;
pub mod solution;

pub use cro::{solve, CroOutcome, CroParams};
pub use dispatch::{evaluate, DispatchResult};
pub use model::{builtin_instance, Instance, Mode, SystemSize};
pub use solution::{Commitment, Solution};
