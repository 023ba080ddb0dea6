//! Optimal dynamic resource allocation for the fading MISO broadcast channel.
//!
//! The base station has `M` antennas and serves `K` single-antenna users over a
//! block-fading channel. Every computation happens in the dual SIMO
//! multiple-access channel, where the capacity region is a polymatroid and
//! weighted power minimization decomposes over fading states.
//!
//! Layout:
//!
//! - [`fading`]: finite, seeded ensembles of channel states.
//! - [`macregion`]: subset rate bounds, successive-decoding corner points and
//!   region membership.
//! - [`wsolver`]: block-coordinate descent for the per-state weighted power
//!   minimization.
//! - [`scheduler`]: the two-layer dual scheduler (per-state delay-constrained
//!   multipliers inside, average-rate multipliers outside), its online variant,
//!   and a proportional-fair stepper for comparison.
//! - [`throughput`]: expected and delay-limited throughput under a rate
//!   profile, the delay and fairness penalties, and the large-`K` bound.
//! - [`baselines`]: TDMA with coherent precoding and zero-forcing SDMA.
//!
//! The crate is `no_std` and only needs `alloc`. All floating point math goes
//! through `libm`, so results are bit-reproducible across targets.

#![no_std]
// Dense kernels index several arrays per loop, and `!(x >= 0.0)` is how
// NaN gets rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod fading;
pub mod linalg;
pub mod macregion;
pub mod math;
pub mod scheduler;
pub mod throughput;
pub mod wsolver;

pub use error::{Error, Result};
pub use fading::{ChannelMatrix, ChannelSet, FadingSpec};
pub use linalg::C64;
pub use macregion::DecodingOrder;
pub use scheduler::{SolverConfig, TrafficClass, UserProfile};
