//! Numerical exterior calculus on flat tori, built to decide whether a
//! volume-preserving flow admits a global cross section and, when it does,
//! to construct the section, its first-return map and the return times.
//!
//! The library works with band-limited fields sampled on periodic grids over
//! `T^2` and `T^3` (period 1 per axis).  Exterior derivatives are spectral,
//! metric operations (Hodge star, codifferential, norms) are pointwise in a
//! metric-orthonormal frame, so the algebraic identities that the section
//! criterion rests on hold discretely to machine precision:
//!
//! * `d ∘ d = 0`,
//! * `⋆⋆ = (−1)^{k(n−k)}`,
//! * `⋆(i_X Ω) = (−1)^{n−1} X^♭` whenever `Ω` is the Riemannian volume,
//! * `‖δ(i_X Ω)‖ = ‖d X^♭‖` (sup operator norms).
//!
//! The decision pipeline is: validate a [`scenario::Scenario`], evaluate the
//! criterion `‖δ_g(i_X Ω)‖_g < m_g(X)^2` ([`criterion`]), project `X^♭` onto
//! closed 1-forms ([`projection`]), rationalize the periods and extract a
//! level-set cross section with its Poincaré map ([`section`]).

pub mod criterion;
pub mod error;
mod fft;
pub mod form;
pub mod grid;
pub mod metric;
pub mod projection;
pub mod scenario;
pub mod section;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
