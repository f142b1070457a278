//! Jointly optimal pilot length and go/no-go threshold for packet delivery
//! over a two-state block-fading channel with incremental-redundancy feedback.
//!
//! A transmitter sends `n` pilot symbols; the receiver averages them and
//! compares the mean against a threshold `T`. Above the threshold the packet
//! is sent with variable-length coding, otherwise the block is abandoned and
//! the attempt is repeated on the next, independent, block. The crate
//! computes the expected channel usage of this scheme, finds the pair
//! `(n, T)` minimizing it, and checks the result against brute force and
//! Monte Carlo.
//!
//! Module map:
//!
//! - [`special`]: Gaussian tail, scaled Mills ratio and chi-square CDF.
//! - [`roots`]: bracketed Newton/bisection scalar root finder.
//! - [`channel`]: channel and cost model, expected usage, gradient, Hessian.
//! - [`level_set`]: the convex auxiliary curve, its inverse branches and the
//!   monotone function whose root locates the interior optimum.
//! - [`optimizer`]: real-valued stationary point, integer policy, grid oracle.
//! - [`rcsp`]: per-state expected data lengths from the sphere-packing model.
//! - [`simulator`]: renewal-process Monte Carlo.
//! - [`experiments`]: scenarios, sweeps and CSV output used by the CLI.

// `!(a < b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod level_set;
pub mod optimizer;
pub mod rcsp;
pub mod roots;
pub mod simulator;
pub mod special;

pub use channel::{ChannelSpec, PilotPolicy, Threshold, TransmissionCost};
pub use error::{Error, Result};
pub use optimizer::{optimize, solve_real_optimum, OptimalPolicy, StationaryPoint};
pub use rcsp::RcspConfig;
pub use simulator::{simulate, DataModel, SimConfig, SimResult};
