//! Numerical study of 1-D Schrödinger wave packets whose initial datum and
//! potential live in bounded Fourier-frequency bands.
//!
//! The crate provides, bottom up:
//!
//! * [`quad`] — an adaptive Gauss–Legendre oracle for quadratic-phase
//!   oscillatory integrals, the ground truth every asymptotic claim is
//!   tested against;
//! * [`bands`] — band-limited functions built from compactly supported
//!   spectral profiles, with analytic derivatives and the Chebyshev
//!   spatial-localization bound;
//! * [`phase`] — the iterated primitives of `exp(-i ω s²)` along a rotated
//!   complex half-line, their closed-form values at the origin and the
//!   certified envelope constants `L_n(δ)`;
//! * [`expansion`] — one- and two-term stationary-phase expansions with the
//!   explicit remainder-constant catalogue;
//! * [`dyson`] — the first two terms of the perturbation series for the
//!   evolution with potential, space-time cone estimates and the uniform
//!   amplitude bounds;
//! * [`amplitude`] — the time-independent decomposition `W = W₁ + W₂/t`,
//!   the refined long-time expansion of the second term and the intervals
//!   where `|W₁| > 0`;
//! * [`solver`] — a split-step spectral reference solver used to validate
//!   the truncated series;
//! * [`experiments`] — scenario orchestration: grids, decay-slope fits,
//!   cone classification and CSV report assembly.

pub mod amplitude;
pub mod bands;
pub mod dyson;
pub mod error;
pub mod expansion;
pub mod experiments;
pub mod phase;
pub mod quad;
pub mod report;
pub mod solver;

pub use error::{Error, Result};

/// Shorthand used across numerical kernels.
pub type C64 = num_complex::Complex64;

/// `e^{iθ}` as a complex number.
#[inline]
pub(crate) fn cis(theta: f64) -> C64 {
    let (s, c) = theta.sin_cos();
    C64::new(c, s)
}
