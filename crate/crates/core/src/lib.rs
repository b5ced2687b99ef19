//! Joint power and subcarrier allocation for a full-duplex multicarrier cell.
//!
//! A full-duplex base station serves `K` downlink and `J` uplink users on
//! `N_F` orthogonal subcarriers. Each subcarrier carries at most one
//! downlink/uplink user pair; the uplink signal interferes with the paired
//! downlink user (co-channel interference) and the base station's own
//! downlink transmission leaks into its uplink receiver (residual
//! self-interference). The solver maximizes the weighted sum throughput over
//! subcarrier assignments and transmit powers:
//!
//! * [`channel`] draws random drops (user positions and fading) and converts
//!   them into noise-normalized channel gains,
//! * [`model`] holds the physical problem and evaluates rates and
//!   feasibility,
//! * [`reform`] lifts the mixed-binary program: big-M product decomposition,
//!   quadratic penalty on the relaxed assignment variables, and the
//!   difference-of-convex split with its linearizations,
//! * [`convex`] is a dense/block log-barrier interior-point method for the
//!   per-iteration convex surrogate,
//! * [`sca`] runs the successive convex approximation outer loop and turns
//!   the relaxed solution into a binary allocation,
//! * [`baselines`] provides a brute-force grid oracle, a half-duplex scheme,
//!   and a decoupled two-stage scheme for comparison,
//! * [`experiment`] is the Monte Carlo harness behind the `fdmc-alloc` CLI.

pub mod baselines;
pub mod channel;
pub mod convex;
pub mod error;
pub mod experiment;
pub mod model;
pub mod reform;
pub mod sca;
pub mod units;

pub use error::{Error, Result};
