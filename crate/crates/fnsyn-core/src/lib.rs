//! Differential Fowler-Nordheim (FN) synapse: device physics, the two-node ODE
//! oracle and its reduced discrete update, single-electron sampling, memory
//! lifetime experiments and a small continual-learning stack.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! thread-parallel drivers live in the companion `fnsyn` crate.
#![no_std]
// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consolidation;
pub mod device;
pub mod error;
pub mod learning;
pub mod math;
pub mod ode;
pub mod rng;
pub mod stats;
pub mod stochastic;
pub mod synapse;

pub use device::DeviceParams;
pub use error::{Error, Result};
pub use synapse::{Polarity, Pulse, SynapseState};
