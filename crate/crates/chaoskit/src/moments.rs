//! Fourth-moment calculus for single-level chaos variables.
//!
//! For `F = I_{m,n}(f)` with symmetric `f` and `E|F|^2 = m! n! ||f||^2`,
//! the central quantity is the fourth-moment gap
//!
//! ```text
//!     gap(F) = E|F|^4 - 2 (E|F|^2)^2 - |E F^2|^2 .
//! ```
//!
//! The gap is nonnegative, vanishes exactly when the matching complex
//! Gaussian has the same first four moments, and is controlled above and
//! below by contraction norms of `f`. This module evaluates the gap four
//! independent ways:
//!
//! * directly from the exact Gaussian moment oracle,
//! * through squared norms of the contractions `f (x)_{i,j} f` plus the
//!   symmetrized level kernels `psi_r` of `|F|^2` (route "psi"),
//! * through squared norms of `f (x)_{i,j} h`, `h` the reversed
//!   conjugate of `f`, plus the level kernels `phi_r` of `F^2` (route
//!   "phi"),
//! * through inner products of derivative-weighted variants against
//!   `psi_r` and `phi_r` (route "inner", requires `m >= 1`).
//!
//! It also derives `E|F|^4` from Malliavin derivatives,
//!
//! ```text
//!     E|F|^4 = (1/m) E[ 2 ||DF||^2 |F|^2 + <DF, D conj(F)> conj(F)^2 ],
//! ```
//!
//! computes closed-form variances of `||DF||^2`, `||D conj(F)||^2` and
//! `<DF, D conj(F)>`, and produces an empirical normality diagnostic for
//! kernel sequences (contraction norms, gaps, and an energy-distance
//! statistic against the moment-matched bivariate Gaussian law).
//!
//! Notation used throughout: `l = m + n`, `l' = 2 min(m, n)`,
//! `h = reversed_conjugate(f)` (so `I_{n,m}(h) = conj(I_{m,n}(f))`).

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::chaos::{
    abs_moment_exact, check_symmetric, kernel_to_poly, ChaosError,
};
use crate::combin::{binomial_f64, factorial_f64};
use crate::polyfun::WickPoly;
use crate::sampling::{complex_vector, rng_for};
use crate::tensor::{Kernel, TensorError};
use crate::DEGREE_CAP;

/// Largest number of points fed to the `O(S^2)` energy-distance
/// statistic; requests beyond it use the first
/// `ENERGY_SUBSAMPLE_CAP` draws of the deterministic sample stream.
pub const ENERGY_SUBSAMPLE_CAP: usize = 8192;

/// Errors from the fourth-moment routines.
#[derive(Debug, thiserror::Error)]
pub enum MomentsError {
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("sandwich inequality violated: {0}")]
    SandwichViolation(String),
}

/// Squared Frobenius norm accumulated directly (no square root), so
/// integer-valued kernels give exactly representable sums.
fn norm_sq(k: &Kernel) -> f64 {
    k.inner(k).expect("same shape").re
}

/// Auxiliary kernel families attached to a symmetric kernel `f` of type
/// `(m, n)`. With `w(i, j) = C(m,i)^2 C(n,j)^2 i! j!` and
/// `v(i, j) = C(m,i) C(n,i) C(n,j) C(m,j) i! j!`, the families are
///
/// ```text
///     psi_r   = sum_{i+j=r} w(i,j)         sym(f (x)_{i,j} h)   type (l-r, l-r)
///     theta_r = sum_{i+j=r} (i/m) w(i,j)   sym(f (x)_{i,j} h)
///     eta_r   = m theta_r
///     xi_r    = sum_{i+j=r} j w(i,j)       sym(h (x)_{j,i} f)
///     phi_r   = sum_{i+j=r} v(i,j)         sym(f (x)_{i,j} f)   type (2m-r, 2n-r)
///     sigma_r = sum_{i+j=r} (i/m) v(i,j)   sym(f (x)_{i,j} f)
///     nu_r    = sum_{i+j=r} i v(i,j)       sym(f (x)_{i,j} f)
/// ```
///
/// `psi_r` equals the level-`(l-r, l-r)` kernel of the chaos expansion
/// of `|F|^2`, and `phi_r` the level-`(2m-r, 2n-r)` kernel of `F^2`;
/// both coincide with the product formula's coefficients, which the
/// tests pin exactly. Each `Vec` is indexed by `r - 1`:
/// `psi/theta/eta/xi` run over `r = 1..=l-1` (every non-constant level
/// of `|F|^2`), and `phi/sigma/nu` over `r = 1..=l'`. The `r = l'`
/// entry is the bottom level of `F^2`: it is the constant `E[F^2]`
/// exactly when `m = n`, and a genuine non-constant level otherwise —
/// so sums over the non-constant levels of `F^2` run
/// `r = 1..=min(l-1, l')`, which equals `l'-1` for `m = n` and `l'`
/// for `m != n`. When `m = 0` the `theta`/`sigma` entries are zero
/// kernels (every summand carries the factor `i = 0`).
#[derive(Debug, Clone)]
pub struct AuxKernels {
    pub m: usize,
    pub n: usize,
    pub psi: Vec<Kernel>,
    pub theta: Vec<Kernel>,
    pub eta: Vec<Kernel>,
    pub xi: Vec<Kernel>,
    pub phi: Vec<Kernel>,
    pub sigma: Vec<Kernel>,
    pub nu: Vec<Kernel>,
}

/// Builds every auxiliary family for a symmetric kernel of total rank
/// `m + n >= 1`.
pub fn aux_kernels(f: &Kernel) -> Result<AuxKernels, MomentsError> {
    check_symmetric(f)?;
    let (d, m, n) = (f.d(), f.m(), f.n());
    if m + n == 0 {
        return Err(MomentsError::BadInput(
            "type (0, 0) kernels have no derivative structure".into(),
        ));
    }
    let h = f.reversed_conjugate();
    let l = m + n;
    let lp = 2 * m.min(n);

    let mut psi = Vec::new();
    let mut theta = Vec::new();
    let mut eta = Vec::new();
    let mut xi = Vec::new();
    for r in 1..l {
        let mut psi_r = Kernel::zeros(d, l - r, l - r)?;
        let mut theta_r = psi_r.clone();
        let mut eta_r = psi_r.clone();
        let mut xi_r = psi_r.clone();
        let i_lo = r.saturating_sub(n);
        for i in i_lo..=r.min(m) {
            let j = r - i;
            let w = binomial_f64(m, i).powi(2)
                * binomial_f64(n, j).powi(2)
                * factorial_f64(i)
                * factorial_f64(j);
            let base = f.contract_sym(&h, i, j)?;
            psi_r = psi_r.add(&base.scale(Complex64::from(w)))?;
            if i > 0 {
                let iw = w * i as f64;
                eta_r = eta_r.add(&base.scale(Complex64::from(iw)))?;
                theta_r = theta_r.add(&base.scale(Complex64::from(iw / m as f64)))?;
            }
            if j > 0 {
                let rev = h.contract_sym(&f, j, i)?;
                xi_r = xi_r.add(&rev.scale(Complex64::from(w * j as f64)))?;
            }
        }
        psi.push(psi_r);
        theta.push(theta_r);
        eta.push(eta_r);
        xi.push(xi_r);
    }

    let mut phi = Vec::new();
    let mut sigma = Vec::new();
    let mut nu = Vec::new();
    for r in 1..=lp {
        let mut phi_r = Kernel::zeros(d, 2 * m - r, 2 * n - r)?;
        let mut sigma_r = phi_r.clone();
        let mut nu_r = phi_r.clone();
        let mn = m.min(n);
        let i_lo = r.saturating_sub(mn);
        for i in i_lo..=r.min(mn) {
            let j = r - i;
            let v = binomial_f64(m, i)
                * binomial_f64(n, i)
                * binomial_f64(n, j)
                * binomial_f64(m, j)
                * factorial_f64(i)
                * factorial_f64(j);
            let base = f.contract_sym(f, i, j)?;
            phi_r = phi_r.add(&base.scale(Complex64::from(v)))?;
            if i > 0 {
                let iv = v * i as f64;
                nu_r = nu_r.add(&base.scale(Complex64::from(iv)))?;
                sigma_r = sigma_r.add(&base.scale(Complex64::from(iv / m as f64)))?;
            }
        }
        phi.push(phi_r);
        sigma.push(sigma_r);
        nu.push(nu_r);
    }

    Ok(AuxKernels {
        m,
        n,
        psi,
        theta,
        eta,
        xi,
        phi,
        sigma,
        nu,
    })
}

/// `E|F|^4` computed from Malliavin derivatives:
/// `(1/m) E[ 2 ||DF||^2 |F|^2 + <DF, D conj(F)> conj(F)^2 ]` with
/// `||DF||^2 = sum_k (d_k P)(conj d_k P)` and
/// `<DF, D conj(F)> = sum_k (d_k P)(dbar_k P)`. Exact rational output.
/// Types with `m = 0 < n` are handled through the reversed conjugate
/// (`|conj F| = |F|`); type `(0, 0)` is rejected.
pub fn fourth_moment_via_derivatives(f: &Kernel) -> Result<BigRational, MomentsError> {
    let (m, n) = (f.m(), f.n());
    if m + n == 0 {
        return Err(MomentsError::BadInput(
            "type (0, 0) kernels have no derivative structure".into(),
        ));
    }
    if m == 0 {
        return fourth_moment_via_derivatives(&f.reversed_conjugate());
    }
    if 4 * (m + n) > DEGREE_CAP {
        return Err(MomentsError::BadInput(format!(
            "fourth moment of type ({m}, {n}) needs degree {} > cap {DEGREE_CAP}",
            4 * (m + n)
        )));
    }
    let p = kernel_to_poly(f)?;
    let pc = p.conj();
    let mut grad_sq = WickPoly::zero(f.d());
    let mut mixed = WickPoly::zero(f.d());
    for k in 0..f.d() {
        let dk = p.d_z(k);
        let dbk = p.d_zbar(k);
        grad_sq = grad_sq.add(&dk.mul(&dk.conj()));
        mixed = mixed.add(&dk.mul(&dbk));
    }
    let two = BigRational::from_integer(2.into());
    let inv_m = BigRational::new(1.into(), (m as i64).into());
    let total = grad_sq
        .expect_product(&p.mul(&pc))
        .scale_rat(&two)
        .add(&mixed.expect_product(&pc.mul(&pc)))
        .scale_rat(&inv_m);
    assert!(
        total.im.is_zero(),
        "fourth absolute moment must be real, got imaginary part {}",
        total.im
    );
    Ok(total.re)
}

/// Fourth-moment gap evaluated through the direct oracle and the three
/// contraction routes. Route values split as `first + second` sums:
///
/// ```text
///     route_via_psi   = contraction_sum_ff + level_sum_psi
///     route_via_phi   = contraction_sum_fh + level_sum_phi
///     route_via_inner = inner_sum_psi + inner_sum_phi
/// ```
///
/// with `R = min(l-1, l')` indexing the non-constant levels of `F^2`
/// (`R = l'-1` for `m = n`, where the bottom level is the constant
/// `E[F^2]`; `R = l'` otherwise) and
///
/// ```text
///     contraction_sum_ff = sum_{0 < i+j <= l', i,j <= min(m,n)}
///         C(m,i) C(n,i) C(n,j) C(m,j) (m! n!)^2 ||f (x)_{i,j} f||^2
///         minus, when m = n, the (i,j) = (m,n) term (it equals |E F^2|^2
///         and cancels against the gap's subtraction)
///     level_sum_psi      = sum_{r=1}^{l-1} ((l-r)!)^2 ||psi_r||^2
///     contraction_sum_fh = sum_{0 < i+j < l, i <= m, j <= n}
///         C(m,i)^2 C(n,j)^2 (m! n!)^2 ||f (x)_{i,j} h||^2
///     level_sum_phi      = sum_{r=1}^{R} (2m-r)! (2n-r)! ||phi_r||^2
///     inner_sum_psi      = 2 sum_{r=1}^{l-1} ((l-r)!)^2 <theta_r, psi_r>
///     inner_sum_phi      = sum_{r=1}^{R} (2m-r)! (2n-r)! <sigma_r, phi_r>
/// ```
///
/// The two head sums are the interior pieces of the symmetrization-norm
/// expansions
///
/// ```text
///     (l!)^2 ||sym(f (x)_{0,0} h)||^2
///         = sum_{0 <= i+j <= l'} C(m,i) C(n,i) C(n,j) C(m,j) (m! n!)^2 ||f (x)_{i,j} f||^2
///     (2m)! (2n)! ||sym(f (x)_{0,0} f)||^2
///         = sum_{0 <= i+j <= l} C(m,i)^2 C(n,j)^2 (m! n!)^2 ||f (x)_{i,j} h||^2
/// ```
///
/// whose boundary terms are exactly the subtracted squared means
/// (`(i,j) = (0,0)` gives `(E|F|^2)^2` in both; `(i,j) = (m,n)` gives
/// `(E|F|^2)^2` again in the second, and `|E F^2|^2` in the first when
/// `m = n`).
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub direct: f64,
    pub contraction_sum_ff: f64,
    pub level_sum_psi: f64,
    pub contraction_sum_fh: f64,
    pub level_sum_phi: f64,
    pub inner_sum_psi: f64,
    pub inner_sum_phi: f64,
}

impl GapReport {
    pub fn route_via_psi(&self) -> f64 {
        self.contraction_sum_ff + self.level_sum_psi
    }

    pub fn route_via_phi(&self) -> f64 {
        self.contraction_sum_fh + self.level_sum_phi
    }

    pub fn route_via_inner(&self) -> f64 {
        self.inner_sum_psi + self.inner_sum_phi
    }

    pub fn routes(&self) -> [f64; 3] {
        [
            self.route_via_psi(),
            self.route_via_phi(),
            self.route_via_inner(),
        ]
    }

    /// Largest absolute deviation of any route from the direct value.
    pub fn max_route_deviation(&self) -> f64 {
        self.routes()
            .iter()
            .map(|r| (r - self.direct).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates the fourth-moment gap along every route for a symmetric
/// kernel with `1 <= m + n` and `4 (m + n) <= DEGREE_CAP`. A type with
/// `m = 0` is redirected through its reversed conjugate, which leaves
/// the gap unchanged and makes the inner route well defined.
pub fn fm_gap(f: &Kernel) -> Result<GapReport, MomentsError> {
    if f.m() == 0 {
        if f.n() == 0 {
            return Err(MomentsError::BadInput(
                "type (0, 0) kernels have no derivative structure".into(),
            ));
        }
        return fm_gap(&f.reversed_conjugate());
    }
    let (m, n) = (f.m(), f.n());
    if 4 * (m + n) > DEGREE_CAP {
        return Err(MomentsError::BadInput(format!(
            "gap of type ({m}, {n}) needs degree {} > cap {DEGREE_CAP}",
            4 * (m + n)
        )));
    }
    let aux = aux_kernels(f)?;
    let l = m + n;
    let lp = 2 * m.min(n);
    let h = f.reversed_conjugate();
    let fact_sq = (factorial_f64(m) * factorial_f64(n)).powi(2);

    let mut contraction_sum_ff = 0.0;
    let mn = m.min(n);
    for i in 0..=mn {
        for j in 0..=mn {
            let r = i + j;
            // (0, 0) equals (E|F|^2)^2; the top corner equals |E F^2|^2
            // when m = n. Both cancel against the gap's subtractions.
            if r == 0 || (m == n && r == lp) {
                continue;
            }
            let w = binomial_f64(m, i)
                * binomial_f64(n, i)
                * binomial_f64(n, j)
                * binomial_f64(m, j);
            contraction_sum_ff += w * fact_sq * norm_sq(&f.contract(f, i, j)?);
        }
    }
    let mut level_sum_psi = 0.0;
    let mut inner_sum_psi = 0.0;
    for (idx, (psi_r, theta_r)) in aux.psi.iter().zip(aux.theta.iter()).enumerate() {
        let r = idx + 1;
        let weight = factorial_f64(l - r).powi(2);
        level_sum_psi += weight * norm_sq(psi_r);
        inner_sum_psi += 2.0 * weight * theta_r.inner(psi_r)?.re;
    }

    let mut contraction_sum_fh = 0.0;
    for i in 0..=m {
        for j in 0..=n {
            let r = i + j;
            if r == 0 || r >= l {
                continue;
            }
            let w = binomial_f64(m, i).powi(2) * binomial_f64(n, j).powi(2);
            contraction_sum_fh += w * fact_sq * norm_sq(&f.contract(&h, i, j)?);
        }
    }
    let mut level_sum_phi = 0.0;
    let mut inner_sum_phi = 0.0;
    let nonconstant = lp.min(l - 1);
    for (idx, (phi_r, sigma_r)) in aux.phi.iter().zip(aux.sigma.iter()).enumerate() {
        let r = idx + 1;
        if r > nonconstant {
            break;
        }
        let weight = factorial_f64(2 * m - r) * factorial_f64(2 * n - r);
        level_sum_phi += weight * norm_sq(phi_r);
        inner_sum_phi += weight * sigma_r.inner(phi_r)?.re;
    }

    let e4 = abs_moment_exact(f, 4)?.to_f64().expect("finite moment");
    let e2 = abs_moment_exact(f, 2)?.to_f64().expect("finite moment");
    let p = kernel_to_poly(f)?;
    let ef2 = p.expect_product(&p).to_complex();
    let direct = e4 - 2.0 * e2 * e2 - ef2.norm_sqr();

    Ok(GapReport {
        direct,
        contraction_sum_ff,
        level_sum_psi,
        contraction_sum_fh,
        level_sum_phi,
        inner_sum_psi,
        inner_sum_phi,
    })
}

/// Closed-form variances of the derivative functionals of
/// `F = I_{m,n}(f)`:
///
/// ```text
///     var_grad     = Var ||DF||^2           = sum_{r=1}^{l-1} ((l-r)!)^2 ||eta_r||^2
///     var_grad_bar = Var ||D conj(F)||^2    = sum_{r=1}^{l-1} ((l-r)!)^2 ||xi_r||^2
///     var_mixed    = Var <DF, D conj(F)>    = sum_{r=1}^{min(l-1, l')} (2m-r)! (2n-r)! ||nu_r||^2
/// ```
///
/// (`Var X = E|X|^2 - |EX|^2`; each sum runs over the non-constant
/// levels of the corresponding chaos expansion).
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub var_grad: f64,
    pub var_grad_bar: f64,
    pub var_mixed: f64,
}

/// Evaluates the three derivative-functional variances from contraction
/// norms alone.
pub fn variance_formulas(f: &Kernel) -> Result<VarianceReport, MomentsError> {
    let aux = aux_kernels(f)?;
    let (m, n) = (f.m(), f.n());
    let l = m + n;
    let mut var_grad = 0.0;
    let mut var_grad_bar = 0.0;
    for (idx, (eta_r, xi_r)) in aux.eta.iter().zip(aux.xi.iter()).enumerate() {
        let r = idx + 1;
        let weight = factorial_f64(l - r).powi(2);
        var_grad += weight * norm_sq(eta_r);
        var_grad_bar += weight * norm_sq(xi_r);
    }
    let mut var_mixed = 0.0;
    let nonconstant = (2 * m.min(n)).min(l - 1);
    for (idx, nu_r) in aux.nu.iter().enumerate() {
        let r = idx + 1;
        if r > nonconstant {
            break;
        }
        var_mixed += factorial_f64(2 * m - r) * factorial_f64(2 * n - r) * norm_sq(nu_r);
    }
    Ok(VarianceReport {
        var_grad,
        var_grad_bar,
        var_mixed,
    })
}

/// One contraction's norms: `||f (x)_{i,j} g||` unsymmetrized and
/// symmetrized, where `g` is `f` itself (family `"ff"`, indices
/// `0 < i + j < l'`) or the reversed conjugate `h` (family `"fh"`,
/// indices `0 < i + j < l`).
#[derive(Debug, Clone, Serialize)]
pub struct ContractionNorm {
    pub family: &'static str,
    pub i: usize,
    pub j: usize,
    pub unsym: f64,
    pub sym: f64,
}

fn contraction_table(f: &Kernel) -> Result<Vec<ContractionNorm>, MomentsError> {
    let (m, n) = (f.m(), f.n());
    let l = m + n;
    let lp = 2 * m.min(n);
    let h = f.reversed_conjugate();
    let mut rows = Vec::new();
    let mn = m.min(n);
    for i in 0..=mn {
        for j in 0..=mn {
            let r = i + j;
            if r == 0 || r >= lp {
                continue;
            }
            let raw = f.contract(f, i, j)?;
            rows.push(ContractionNorm {
                family: "ff",
                i,
                j,
                unsym: raw.norm(),
                sym: raw.symmetrize().norm(),
            });
        }
    }
    for i in 0..=m {
        for j in 0..=n {
            let r = i + j;
            if r == 0 || r >= l {
                continue;
            }
            let raw = f.contract(&h, i, j)?;
            rows.push(ContractionNorm {
                family: "fh",
                i,
                j,
                unsym: raw.norm(),
                sym: raw.symmetrize().norm(),
            });
        }
    }
    Ok(rows)
}

/// Sandwich report: the gap `G` together with the total squared
/// contraction norms, unsymmetrized (`S_u`) and symmetrized (`S_t`).
/// `fmt_sandwich` enforces `G >= -1e-9`, `S_t <= S_u + 1e-9`, and the
/// equivalence `G = 0 <=> S_u = 0` at tolerance `1e-9`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub unsym_sum: f64,
    pub sym_sum: f64,
    pub gap: f64,
    pub table: Vec<ContractionNorm>,
}

const SANDWICH_TOL: f64 = 1e-9;

/// Computes the contraction-norm sandwich around the gap for a
/// symmetric kernel with `m + n >= 2` and checks its defining
/// inequalities, failing with `SandwichViolation` if numerics break
/// them.
pub fn fmt_sandwich(f: &Kernel) -> Result<SandwichReport, MomentsError> {
    if f.m() + f.n() < 2 {
        return Err(MomentsError::BadInput(format!(
            "sandwich needs total rank >= 2, got ({}, {})",
            f.m(),
            f.n()
        )));
    }
    check_symmetric(f)?;
    let table = contraction_table(f)?;
    let unsym_sum: f64 = table.iter().map(|r| r.unsym * r.unsym).sum();
    let sym_sum: f64 = table.iter().map(|r| r.sym * r.sym).sum();
    let gap = fm_gap(f)?.direct;
    if gap < -SANDWICH_TOL {
        return Err(MomentsError::SandwichViolation(format!(
            "gap {gap} below -{SANDWICH_TOL}"
        )));
    }
    if sym_sum > unsym_sum + SANDWICH_TOL {
        return Err(MomentsError::SandwichViolation(format!(
            "symmetrized sum {sym_sum} exceeds unsymmetrized sum {unsym_sum}"
        )));
    }
    if (gap.abs() <= SANDWICH_TOL) != (unsym_sum <= SANDWICH_TOL) {
        return Err(MomentsError::SandwichViolation(format!(
            "gap {gap} and contraction sum {unsym_sum} must vanish together"
        )));
    }
    Ok(SandwichReport {
        unsym_sum,
        sym_sum,
        gap,
        table,
    })
}

/// Per-kernel row of the sequence diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct FmtRow {
    pub index: usize,
    pub dim: usize,
    /// `sigma^2 = E|F|^2`.
    pub second_moment: f64,
    /// `Re E[F^2]` and `Im E[F^2]`.
    pub square_mean_re: f64,
    pub square_mean_im: f64,
    /// `E|F|^4`.
    pub fourth_moment: f64,
    pub gap: f64,
    /// `|E|F|^4 - (2 sigma^4 + c^2 + b^2)|` with `c + i b = E[F^2]`,
    /// the distance to the moment-matched Gaussian fourth moment.
    pub fourth_moment_deviation: f64,
    pub unsym_sum: f64,
    pub sym_sum: f64,
    pub max_contraction: f64,
    pub table: Vec<ContractionNorm>,
    pub variances: VarianceReport,
    /// Energy distance between sampled `(Re F, Im F)` pairs and the
    /// moment-matched Gaussian reference sample.
    pub energy_distance: f64,
}

/// Sequence diagnostic: exact fourth-moment data plus an empirical
/// normality statistic for each kernel.
#[derive(Debug, Clone, Serialize)]
pub struct FmtReport {
    pub m: usize,
    pub n: usize,
    /// Number of points used by the energy statistic.
    pub samples: usize,
    /// Energy distance between two independent reference draws for the
    /// last kernel's Gaussian law — the statistic's own noise floor.
    pub reference_distance: f64,
    pub rows: Vec<FmtRow>,
}

/// Energy distance between two planar samples,
/// `2 E||X - Y|| - E||X - X'|| - E||Y - Y'||` with all means taken as
/// V-statistics over the given points. Nonnegative in expectation and
/// zero exactly on matching laws.
pub fn energy_distance(x: &[[f64; 2]], y: &[[f64; 2]]) -> f64 {
    assert!(!x.is_empty() && !y.is_empty(), "empty sample");
    let dist = |a: &[f64; 2], b: &[f64; 2]| {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        (dx * dx + dy * dy).sqrt()
    };
    let mut cross = 0.0;
    for a in x {
        for b in y {
            cross += dist(a, b);
        }
    }
    cross /= (x.len() * y.len()) as f64;
    let within = |s: &[[f64; 2]]| {
        let mut acc = 0.0;
        for (p, a) in s.iter().enumerate() {
            for b in &s[p + 1..] {
                acc += dist(a, b);
            }
        }
        2.0 * acc / (s.len() * s.len()) as f64
    };
    2.0 * cross - within(x) - within(y)
}

/// Lower Cholesky factor of a symmetric positive semidefinite 2x2
/// matrix `[[c11, c12], [c12, c22]]`, clamping tiny negative pivots
/// that arise from a singular covariance.
pub(crate) fn chol2_psd(c11: f64, c12: f64, c22: f64) -> [[f64; 2]; 2] {
    if c11 <= 0.0 {
        return [[0.0, 0.0], [0.0, c22.max(0.0).sqrt()]];
    }
    let l11 = c11.sqrt();
    let l21 = c12 / l11;
    let l22 = (c22 - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

/// Full diagnostic over a sequence of symmetric kernels sharing one
/// type `(m, n)` with `m + n >= 2` (dimensions may differ). For each
/// kernel it reports the exact contraction norms, variances and gap,
/// plus an energy-distance comparison of `min(samples, cap)` draws of
/// `(Re F, Im F)` against the bivariate Gaussian with matching second
/// moments, i.e. covariance
///
/// ```text
///     C = 1/2 [[sigma^2 + c, b], [b, sigma^2 - c]],   c + i b = E[F^2].
/// ```
///
/// Sampling is deterministic in `(seed, sample index)`; draws share one
/// underlying Gaussian vector across the sequence (kernel `k` reads its
/// first `d_k` coordinates) and all reference draws share one base
/// pair, so distances move coherently along the sequence.
pub fn fmt_diagnostic(
    kernels: &[Kernel],
    samples: usize,
    seed: u64,
) -> Result<FmtReport, MomentsError> {
    if kernels.is_empty() {
        return Err(MomentsError::BadInput("empty kernel sequence".into()));
    }
    let (m, n) = (kernels[0].m(), kernels[0].n());
    if m + n < 2 {
        return Err(MomentsError::BadInput(format!(
            "diagnostic needs total rank >= 2, got ({m}, {n})"
        )));
    }
    if samples < 100 {
        return Err(MomentsError::BadInput(format!(
            "at least 100 samples required, got {samples}"
        )));
    }
    for k in kernels {
        if k.m() != m || k.n() != n {
            return Err(MomentsError::BadInput(format!(
                "sequence mixes types ({m}, {n}) and ({}, {})",
                k.m(),
                k.n()
            )));
        }
        check_symmetric(k)?;
    }

    let s = samples.min(ENERGY_SUBSAMPLE_CAP);
    let d_max = kernels.iter().map(Kernel::d).max().expect("nonempty");
    let compiled: Vec<_> = kernels
        .iter()
        .map(|k| kernel_to_poly(k).map(|p| p.compile()))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(kernels.len());
    let mut chols = Vec::with_capacity(kernels.len());
    for (index, f) in kernels.iter().enumerate() {
        let gap_report = fm_gap(f)?;
        let variances = variance_formulas(f)?;
        let table = contraction_table(f)?;
        let unsym_sum: f64 = table.iter().map(|r| r.unsym * r.unsym).sum();
        let sym_sum: f64 = table.iter().map(|r| r.sym * r.sym).sum();
        let max_contraction = table.iter().map(|r| r.unsym).fold(0.0, f64::max);
        let e2 = abs_moment_exact(f, 2)?.to_f64().expect("finite moment");
        let e4 = abs_moment_exact(f, 4)?.to_f64().expect("finite moment");
        let p = kernel_to_poly(f)?;
        let ef2 = p.expect_product(&p).to_complex();
        let deviation = (e4 - 2.0 * e2 * e2 - ef2.norm_sqr()).abs();
        chols.push(chol2_psd(
            0.5 * (e2 + ef2.re),
            0.5 * ef2.im,
            0.5 * (e2 - ef2.re),
        ));
        rows.push(FmtRow {
            index,
            dim: f.d(),
            second_moment: e2,
            square_mean_re: ef2.re,
            square_mean_im: ef2.im,
            fourth_moment: e4,
            gap: gap_report.direct,
            fourth_moment_deviation: deviation,
            unsym_sum,
            sym_sum,
            max_contraction,
            table,
            variances,
            energy_distance: 0.0,
        });
    }

    let mut x: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(s); kernels.len()];
    let mut y: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(s); kernels.len()];
    let mut y_base: Vec<[f64; 2]> = Vec::with_capacity(s);
    for sample_idx in 0..s {
        let mut rng = rng_for(seed, sample_idx as u64);
        let zeta = complex_vector(&mut rng, d_max);
        for (k, cp) in compiled.iter().enumerate() {
            let v = cp.eval_at(&zeta[..kernels[k].d()]);
            x[k].push([v.re, v.im]);
        }
        let mut rng_ref = rng_for(seed, (1 << 32) + sample_idx as u64);
        let g = [
            rng_ref.sample::<f64, _>(StandardNormal),
            rng_ref.sample::<f64, _>(StandardNormal),
        ];
        let mut rng_base = rng_for(seed, (2 << 32) + sample_idx as u64);
        let gb = [
            rng_base.sample::<f64, _>(StandardNormal),
            rng_base.sample::<f64, _>(StandardNormal),
        ];
        for (k, l) in chols.iter().enumerate() {
            y[k].push([
                l[0][0] * g[0],
                l[1][0] * g[0] + l[1][1] * g[1],
            ]);
        }
        let lb = chols.last().expect("nonempty");
        y_base.push([
            lb[0][0] * gb[0],
            lb[1][0] * gb[0] + lb[1][1] * gb[1],
        ]);
    }
    for (k, row) in rows.iter_mut().enumerate() {
        row.energy_distance = energy_distance(&x[k], &y[k]);
    }
    let reference_distance = energy_distance(&y_base, y.last().expect("nonempty"));

    Ok(FmtReport {
        m,
        n,
        samples: s,
        reference_distance,
        rows,
    })
}
