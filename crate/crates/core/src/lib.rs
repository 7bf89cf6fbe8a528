//! Self-normalized degenerate U-statistics of order 2 with spectral kernels.
//!
//! Layers, bottom-up:
//!
//! * [`rng`]: counter-based streams addressed by `(seed, stream, draw)`
//! * [`distributions`]: samplers and truncated second moments `L(x)`
//! * [`kernels`]: spectral kernels and their structural checks
//! * [`truncation`]: truncation levels `b_l`, `z_{n,l}`
//! * [`statistics`]: `U_n`, `W_n` and a brute-force oracle
//! * [`mdp`]: Monte Carlo tail probabilities `P(W_n >= x_n^2)` and log-rates
//! * [`lil`]: paths of `W_n / log log n` on geometric checkpoints
//! * [`inequality_audit`]: numeric checks of exponential tail bounds

pub mod distributions;
pub mod inequality_audit;
pub mod kernels;
pub mod lil;
pub mod mdp;
pub mod parallel;
pub mod rng;
pub mod statistics;
pub mod sum;
pub mod truncation;

pub use distributions::{DistributionSpec, Law, MomentMethod, SecondMoment};
pub use kernels::{Component, KernelSpec, Transform};
pub use statistics::StatisticResult;
