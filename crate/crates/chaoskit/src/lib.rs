//! Chaos calculus over finite-dimensional complex Gaussian spaces.
//!
//! The crate implements the calculus of complex Hermite polynomials
//! `J_{m,n}(z, rho)` and of complex multiple Wiener-Itô integrals
//! `I_{m,n}(f)` for symmetric kernels `f` on `C^d`, together with the
//! surrounding operator toolbox: Malliavin derivatives and divergences,
//! the complex Ornstein-Uhlenbeck semigroup, Hu-Meyer (Itô vs.
//! Stratonovich) conversion, Wick products, fourth-moment diagnostics,
//! and a complex fractional Ornstein-Uhlenbeck drift-estimation bench.
//!
//! Everything numeric is checked against [`polyfun`], an exact-arithmetic
//! Gaussian moment oracle: chaos integrals are expanded into ordinary
//! polynomials in the coordinates `(zeta_k, conj(zeta_k))` with
//! arbitrary-precision rational coefficients, and expectations are taken
//! termwise from the closed-form moments of the standard complex Gaussian
//! (`E[zeta^a conj(zeta)^b] = delta_{ab} a!` per coordinate). The oracle
//! shares no code with the identities it certifies.
//!
//! Normalisation: coordinates are unit-variance (`E|zeta_k|^2 = 1`) and a
//! normalised symmetric basis kernel evaluates as a product of
//! `J_{m_k,n_k}(zeta_k, 1)` factors. The variance-`rho` family is related
//! by the exact scaling `J_{m,n}(c z, c^2 rho) = c^{m+n} J_{m,n}(z, rho)`.

pub mod chaos;
pub mod combin;
pub mod fixtures;
pub mod hermite;
pub mod linalg;
pub mod moments;
pub mod polyfun;
pub mod process;
pub mod sampling;
pub mod tensor;

/// Default cap on chaos orders / polynomial degrees.
///
/// Factorials and contraction tables grow combinatorially; callers that
/// genuinely need more than this can use the `*_with_cap` entry points
/// where provided.
pub const DEGREE_CAP: usize = 16;
