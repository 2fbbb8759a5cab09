//! Multi-channel discriminative filters learned in the frequency domain.
//!
//! Two formulations are supported: circular correlation (response spectrum
//! `conj(x̂)·f̂`) and circular convolution (response spectrum `x̂·f̂`). Both
//! reduce to independent `d×d` Hermitian ridge systems, one per frequency bin,
//! solved in [`solver`]. The [`equivalence`] module checks numerically that the
//! two optimal filters are spectral conjugates of each other, that their
//! responses are mirror images about the origin, and that they reach the same
//! mean-square error whenever the target response is centrosymmetric.
//!
//! [`oracle`] solves the same ridge problem as one dense spatial-domain least
//! squares system and is used to cross-check the spectral solver. [`tracker`]
//! is a single-scale online tracker built on the solver.
//!
//! All scalars are `f64`; grids are row-major and samples are channel-major.

pub mod equivalence;
pub mod error;
pub mod labels;
pub mod oracle;
pub mod random;
pub mod solver;
pub mod spectral;
pub mod tensorio;
pub mod tracker;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use solver::SolveSpec;
pub use spectral::Mode;
pub use tensorio::{FilterBank, GridIndex, MultiChannelSample, RealGrid, SpectralGrid};
