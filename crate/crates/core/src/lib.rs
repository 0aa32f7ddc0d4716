//! Multi-skip differential feature stacking.
//!
//! The crate is `no_std` (with `alloc`) and contains only numerics:
//!
//! * [`latent`]: the generative latent-signal model and its Rademacher mixing pairs.
//! * [`skipstack`]: differential features at one or several time skips, and windowed
//!   difference descriptors for real multichannel series.
//! * [`conditioning`]: empirical condition numbers, the concentration sandwich bounds,
//!   matrix Bernstein checks and Monte-Carlo coverage.
//! * [`encoder`]: PCA, diagonal GMM fitted by EM, Fisher vectors and normalization.
//! * [`classify`]: one-vs-all linear hinge-loss SVMs and MAcc / MAP evaluation.
//!
//! IO, file formats and the command line live in the companion `skipstack` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod conditioning;
pub mod encoder;
mod error;
pub mod latent;
pub mod linalg;
pub mod rng;
pub mod skipstack;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
