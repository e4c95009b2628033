//! Complex Hermite polynomials `J_{m,n}(z, rho)` as exact
//! integer-coefficient polynomials, their evaluation, the identities they
//! satisfy (recursions, derivatives, Rodrigues, eigenfunction equation,
//! monomial and product expansions, generating function), and the
//! real<->complex Hermite basis conversions built from trigonometric
//! change-of-basis matrices.
//!
//! `J_{m,n}(z, rho) = sum_{r=0}^{m /\ n} (-1)^r r! C(m,r) C(n,r)
//! z^{m-r} zbar^{n-r} rho^r` is kept symbolic in all three of `z`,
//! `zbar`, `rho` with big-integer coefficients, so every algebraic
//! identity can be tested exactly rather than at floating-point
//! tolerance.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::combin::{binomial_big, binomial_f64, factorial_big};
use crate::linalg::{lu_inverse, LinAlgError, Mat};
use crate::DEGREE_CAP;

/// Condition-number threshold above which a trigonometric basis matrix
/// is rejected as numerically singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum HermiteError {
    #[error("degree ({m},{n}) exceeds the cap {cap}")]
    DegreeTooLarge { m: usize, n: usize, cap: usize },
    #[error("rho must be positive and finite, got {rho}")]
    InvalidRho { rho: f64 },
    #[error("need {expected} angles strictly decreasing in (0, pi), got {got:?}")]
    BadAngles { expected: usize, got: Vec<f64> },
    #[error("trigonometric basis matrix is degenerate: {0}")]
    DegenerateMatrix(#[from] LinAlgError),
    #[error("index {l} out of range 0..={n}")]
    IndexOutOfRange { l: usize, n: usize },
}

// ---------------------------------------------------------------------------
// Exact trivariate polynomials in (z, zbar, rho).
// ---------------------------------------------------------------------------

/// Polynomial in `z`, `zbar`, `rho` with big-integer coefficients,
/// keyed by `(z power, zbar power, rho power)`. `z` and `zbar` are
/// treated as independent variables (Wirtinger calculus); `rho` is an
/// ordinary commuting symbol that derivatives in `z`/`zbar` ignore.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriPoly {
    terms: BTreeMap<(u32, u32, u32), BigInt>,
}

impl TriPoly {
    pub fn zero() -> Self {
        TriPoly::default()
    }

    pub fn one() -> Self {
        TriPoly::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut p = TriPoly::default();
        p.add_term(0, 0, 0, c);
        p
    }

    pub fn monomial(z: u32, zbar: u32, rho: u32, c: BigInt) -> Self {
        let mut p = TriPoly::default();
        p.add_term(z, zbar, rho, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, z: u32, zbar: u32, rho: u32, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry((z, zbar, rho)).or_insert_with(BigInt::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&(z, zbar, rho));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32, u32), &BigInt)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &TriPoly) -> TriPoly {
        let mut out = self.clone();
        for (&k, c) in &other.terms {
            out.add_term(k.0, k.1, k.2, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &TriPoly) -> TriPoly {
        let mut out = self.clone();
        for (&k, c) in &other.terms {
            out.add_term(k.0, k.1, k.2, -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigInt) -> TriPoly {
        let mut out = TriPoly::default();
        for (&k, v) in &self.terms {
            out.add_term(k.0, k.1, k.2, v * c);
        }
        out
    }

    pub fn mul(&self, other: &TriPoly) -> TriPoly {
        let mut out = TriPoly::default();
        for (&a, ca) in &self.terms {
            for (&b, cb) in &other.terms {
                out.add_term(a.0 + b.0, a.1 + b.1, a.2 + b.2, ca * cb);
            }
        }
        out
    }

    /// Multiply by the monomial `z^dz * zbar^dzbar * rho^drho`.
    pub fn mul_monomial(&self, dz: u32, dzbar: u32, drho: u32) -> TriPoly {
        let mut out = TriPoly::default();
        for (&k, c) in &self.terms {
            out.add_term(k.0 + dz, k.1 + dzbar, k.2 + drho, c.clone());
        }
        out
    }

    /// Wirtinger derivative in `z` (treats `zbar` and `rho` as constants).
    pub fn d_z(&self) -> TriPoly {
        let mut out = TriPoly::default();
        for (&k, c) in &self.terms {
            if k.0 > 0 {
                out.add_term(k.0 - 1, k.1, k.2, c * BigInt::from(k.0));
            }
        }
        out
    }

    /// Wirtinger derivative in `zbar`.
    pub fn d_zbar(&self) -> TriPoly {
        let mut out = TriPoly::default();
        for (&k, c) in &self.terms {
            if k.1 > 0 {
                out.add_term(k.0, k.1 - 1, k.2, c * BigInt::from(k.1));
            }
        }
        out
    }

    /// Derivative in the variance symbol `rho`.
    pub fn d_rho(&self) -> TriPoly {
        let mut out = TriPoly::default();
        for (&k, c) in &self.terms {
            if k.2 > 0 {
                out.add_term(k.0, k.1, k.2 - 1, c * BigInt::from(k.2));
            }
        }
        out
    }

    /// Evaluate with `zbar` bound to the conjugate of `z`.
    pub fn eval(&self, z: Complex64, rho: f64) -> Complex64 {
        let zb = z.conj();
        let mut acc = Complex64::new(0.0, 0.0);
        for (&(a, b, r), c) in &self.terms {
            let coeff = c.to_f64().expect("coefficient out of f64 range");
            acc += coeff * z.powu(a) * zb.powu(b) * rho.powi(r as i32);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// The complex Hermite family.
// ---------------------------------------------------------------------------

/// The polynomial `J_{m,n}(z, rho)` together with its indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermitePoly {
    pub m: usize,
    pub n: usize,
    poly: TriPoly,
}

impl HermitePoly {
    pub fn poly(&self) -> &TriPoly {
        &self.poly
    }

    /// Terms as `(z power, zbar power, rho power, coefficient)` in
    /// canonical display order: descending total degree in `(z, zbar)`,
    /// then descending `z` power, then ascending `rho` power.
    pub fn terms_canonical(&self) -> Vec<(usize, usize, usize, BigInt)> {
        let mut terms: Vec<_> = self
            .poly
            .terms()
            .map(|(&(a, b, r), c)| (a as usize, b as usize, r as usize, c.clone()))
            .collect();
        terms.sort_by(|x, y| {
            (y.0 + y.1, y.0, x.2)
                .cmp(&(x.0 + x.1, x.0, y.2))
                .then(x.1.cmp(&y.1))
        });
        terms
    }

    pub fn eval(&self, z: Complex64, rho: f64) -> Complex64 {
        self.poly.eval(z, rho)
    }
}

impl fmt::Display for HermitePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms_canonical();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (a, b, r, c)) in terms.iter().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || (*a == 0 && *b == 0 && *r == 0) {
                factors.push(mag.to_string());
            }
            for (name, pow) in [("z", a), ("zbar", b), ("rho", r)] {
                match pow {
                    0 => {}
                    1 => factors.push(name.to_string()),
                    _ => factors.push(format!("{name}^{pow}")),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Exact symbolic `J_{m,n}` under the default degree cap.
pub fn poly_j(m: usize, n: usize) -> Result<HermitePoly, HermiteError> {
    poly_j_with_cap(m, n, DEGREE_CAP)
}

/// Exact symbolic `J_{m,n}`, capped at total degree `m + n <= cap`.
pub fn poly_j_with_cap(m: usize, n: usize, cap: usize) -> Result<HermitePoly, HermiteError> {
    if m + n > cap {
        return Err(HermiteError::DegreeTooLarge { m, n, cap });
    }
    let mut poly = TriPoly::default();
    for r in 0..=m.min(n) {
        let mut c = factorial_big(r) * binomial_big(m, r) * binomial_big(n, r);
        if r % 2 == 1 {
            c = -c;
        }
        poly.add_term((m - r) as u32, (n - r) as u32, r as u32, c);
    }
    Ok(HermitePoly { m, n, poly })
}

/// Evaluate `J_{m,n}(z, rho)`; `rho` must be positive and finite.
///
/// Evaluation goes through the symbolic polynomial, so it agrees bitwise
/// with `poly_j(m, n).eval(z, rho)`.
pub fn eval_j(m: usize, n: usize, z: Complex64, rho: f64) -> Result<Complex64, HermiteError> {
    eval_j_with_cap(m, n, z, rho, DEGREE_CAP)
}

pub fn eval_j_with_cap(
    m: usize,
    n: usize,
    z: Complex64,
    rho: f64,
    cap: usize,
) -> Result<Complex64, HermiteError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(HermiteError::InvalidRho { rho });
    }
    Ok(poly_j_with_cap(m, n, cap)?.eval(z, rho))
}

/// Probabilists' Hermite polynomial `H_n(x)` by the three-term
/// recurrence `H_{n+1} = x H_n - n H_{n-1}`, `H_0 = 1`, `H_1 = x`.
pub fn eval_h(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Truncated two-index generating function
/// `sum_{m<=M, n<=N} conj(lambda)^m lambda^n / (m! n!) J_{m,n}(z, rho)`.
///
/// The `J` table is filled by the recurrence
/// `J_{m+1,n} = z J_{m,n} - n rho J_{m,n-1}` from the row
/// `J_{0,n} = zbar^n`, and the factorial weights are accumulated
/// multiplicatively, so truncation orders around 25 stay in range.
pub fn gf_partial_sum(lambda: Complex64, z: Complex64, rho: f64, m_max: usize, n_max: usize) -> Complex64 {
    let zb = z.conj();
    // j_row[n] holds J_{m,n}(z, rho) for the current m.
    let mut j_row: Vec<Complex64> = (0..=n_max).map(|n| zb.powu(n as u32)).collect();
    let lb = lambda.conj();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wm = Complex64::new(1.0, 0.0); // conj(lambda)^m / m!
    for m in 0..=m_max {
        if m > 0 {
            // Advance the whole row from m-1 to m.
            let prev = j_row.clone();
            for n in 0..=n_max {
                j_row[n] = z * prev[n]
                    - if n > 0 {
                        n as f64 * rho * prev[n - 1]
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
            }
            wm *= lb / m as f64;
        }
        let mut wn = Complex64::new(1.0, 0.0); // lambda^n / n!
        for n in 0..=n_max {
            if n > 0 {
                wn *= lambda / n as f64;
            }
            acc += wm * wn * j_row[n];
        }
    }
    acc
}

/// Coefficients of `J_{m,n} J_{p,q}` in the `J` basis:
/// a map `(m', n') -> (integer coefficient, rho power)` meaning
/// `coeff * rho^power * J_{m',n'}`.
pub fn j_product_expand(
    m: usize,
    n: usize,
    p: usize,
    q: usize,
) -> BTreeMap<(usize, usize), (BigInt, usize)> {
    let mut out: BTreeMap<(usize, usize), (BigInt, usize)> = BTreeMap::new();
    for i in 0..=m.min(q) {
        for j in 0..=n.min(p) {
            let c = binomial_big(m, i)
                * binomial_big(n, j)
                * binomial_big(p, j)
                * binomial_big(q, i)
                * factorial_big(i)
                * factorial_big(j);
            let key = (m + p - i - j, n + q - i - j);
            let entry = out.entry(key).or_insert_with(|| (BigInt::zero(), i + j));
            debug_assert_eq!(entry.1, i + j, "rho power is determined by the target level");
            entry.0 += c;
        }
    }
    out
}

/// Coefficients of the monomial `z^m zbar^n` in the `J` basis:
/// `z^m zbar^n = sum_r C(m,r) C(n,r) r! rho^r J_{m-r,n-r}`.
pub fn monomial_to_j(m: usize, n: usize) -> BTreeMap<(usize, usize), (BigInt, usize)> {
    let mut out = BTreeMap::new();
    for r in 0..=m.min(n) {
        let c = binomial_big(m, r) * binomial_big(n, r) * factorial_big(r);
        out.insert((m - r, n - r), (c, r));
    }
    out
}

// ---------------------------------------------------------------------------
// Trigonometric change of basis between real-pair and complex chaoses.
// ---------------------------------------------------------------------------

/// The `(n+1) x (n+1)` matrix `M_{i,j} = C(n,j) (sin t_i)^{n-j} (cos t_i)^j`
/// for strictly decreasing angles `t_0 > t_1 > ... > t_n` in `(0, pi)`,
/// together with its inverse and condition number.
///
/// Row `i` expands `H_n(x cos t_i + y sin t_i)` in the products
/// `H_j(x) H_{n-j}(y)`; the inverse therefore converts products of real
/// Hermite polynomials into rotated single-variable ones.
#[derive(Debug, Clone)]
pub struct ThetaMatrix {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub matrix: Mat,
    pub inverse: Mat,
    pub condition: f64,
}

impl ThetaMatrix {
    pub fn new(n: usize, thetas: &[f64]) -> Result<Self, HermiteError> {
        let ok_len = thetas.len() == n + 1;
        let in_range = thetas.iter().all(|&t| t > 0.0 && t < std::f64::consts::PI);
        let decreasing = thetas.windows(2).all(|w| w[0] > w[1]);
        if !(ok_len && in_range && decreasing) {
            return Err(HermiteError::BadAngles {
                expected: n + 1,
                got: thetas.to_vec(),
            });
        }
        let mut matrix = Mat::zeros(n + 1, n + 1);
        for (i, &t) in thetas.iter().enumerate() {
            let (s, c) = t.sin_cos();
            for j in 0..=n {
                matrix[(i, j)] = binomial_f64(n, j) * s.powi((n - j) as i32) * c.powi(j as i32);
            }
        }
        let (inverse, condition) = lu_inverse(&matrix)?;
        if !(condition.is_finite() && condition <= MAX_CONDITION) {
            return Err(HermiteError::DegenerateMatrix(LinAlgError::IllConditioned {
                condition,
            }));
        }
        Ok(ThetaMatrix {
            n,
            thetas: thetas.to_vec(),
            matrix,
            inverse,
            condition,
        })
    }
}

/// Row `l` of the inverse basis matrix: the coefficients `w_k` such that
/// `H_l(x) H_{n-l}(y) = sum_k w_k H_n(x cos t_k + y sin t_k)`.
pub fn hermite_pair_rep(n: usize, l: usize, thetas: &[f64]) -> Result<Vec<f64>, HermiteError> {
    if l > n {
        return Err(HermiteError::IndexOutOfRange { l, n });
    }
    let tm = ThetaMatrix::new(n, thetas)?;
    Ok((0..=n).map(|k| tm.inverse[(l, k)]).collect())
}

/// Direction of a real<->complex Hermite basis conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Real Hermite functional expressed in the complex `J` basis.
    RealToComplex,
    /// Complex `J` functional expressed in rotated real Hermite terms.
    ComplexToReal,
}

/// Coefficient table of one conversion. For `RealToComplex` it has a
/// single row `d_0..d_n`; for `ComplexToReal`, row `k` holds the
/// coefficients expressing `J_{k,n-k}` in the rotated real basis.
#[derive(Debug, Clone)]
pub struct ConversionCoeffs {
    pub n: usize,
    pub direction: Direction,
    pub coeffs: Vec<Vec<Complex64>>,
}

/// Coefficients `d_k` with
/// `H_n(X(f) + Y(g)) = sum_k d_k J_{k,n-k}(Z(h))`, where
/// `h = sqrt(2) e^{i theta} (f - i g)` and `|f|^2 + |g|^2 = 1`:
/// `d_k = 2^{-n} sum_{r+s=k} (-1)^s sum_l C(n,l) C(l,r) C(n-l,s)
/// (cos theta)^l (i sin theta)^{n-l}`.
pub fn prop35_forward(n: usize, theta: f64) -> ConversionCoeffs {
    let (sin_t, cos_t) = theta.sin_cos();
    let i_sin = Complex64::new(0.0, sin_t);
    let scale = 0.5f64.powi(n as i32);
    let mut row = vec![Complex64::new(0.0, 0.0); n + 1];
    for (k, slot) in row.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..=k {
            let s = k - r;
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let mut inner = Complex64::new(0.0, 0.0);
            for l in 0..=n {
                if r > l || s > n - l {
                    continue;
                }
                let c = binomial_f64(n, l) * binomial_f64(l, r) * binomial_f64(n - l, s);
                inner += c * cos_t.powi(l as i32) * i_sin.powu((n - l) as u32);
            }
            acc += sign * inner;
        }
        *slot = scale * acc;
    }
    ConversionCoeffs {
        n,
        direction: Direction::RealToComplex,
        coeffs: vec![row],
    }
}

/// Coefficients `c~_i` with
/// `J_{k,n-k}(Z(h)) = sum_i c~_i H_n(X(f_i) + Y(g_i))`, where
/// `f_i + i g_i = e^{i t_i} conj(h) / sqrt(2)` and `|h| = sqrt(2)`:
/// `c~_i = sum_j Minv_{j,i} i^{n-j} sum_{r+s=j} C(k,r) C(n-k,s)
/// (-1)^{n-k-s}`. Row `k` of the result holds `c~_0..c~_n` for that `k`.
pub fn prop35_inverse(n: usize, thetas: &[f64]) -> Result<ConversionCoeffs, HermiteError> {
    let tm = ThetaMatrix::new(n, thetas)?;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut coeffs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut row = vec![Complex64::new(0.0, 0.0); n + 1];
        for (i, slot) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=n {
                let mut inner = 0.0;
                for r in 0..=j.min(k) {
                    let s = j - r;
                    if s > n - k {
                        continue;
                    }
                    let sign = if (n - k - s) % 2 == 0 { 1.0 } else { -1.0 };
                    inner += sign * binomial_f64(k, r) * binomial_f64(n - k, s);
                }
                acc += tm.inverse[(j, i)] * i_unit.powu((n - j) as u32) * inner;
            }
            *slot = acc;
        }
        coeffs.push(row);
    }
    Ok(ConversionCoeffs {
        n,
        direction: Direction::ComplexToReal,
        coeffs,
    })
}

/// Coefficients `c_k` (index `k = 0..=l`) with
/// `J_{m,l-m}(x + i y, 2) = sum_k c_k H_k(x) H_{l-k}(y)`:
/// `c_k = i^{l-k} sum_{r+s=k} C(m,r) C(l-m,s) (-1)^{l-m-s}`.
pub fn prop2dim2_j_to_hh(m: usize, l: usize) -> Result<Vec<Complex64>, HermiteError> {
    if m > l {
        return Err(HermiteError::IndexOutOfRange { l: m, n: l });
    }
    let i_unit = Complex64::new(0.0, 1.0);
    let mut out = vec![Complex64::new(0.0, 0.0); l + 1];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut inner = 0.0;
        for r in 0..=k.min(m) {
            let s = k - r;
            if s > l - m {
                continue;
            }
            let sign = if (l - m - s) % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * binomial_f64(m, r) * binomial_f64(l - m, s);
        }
        *slot = i_unit.powu((l - k) as u32) * inner;
    }
    Ok(out)
}

/// Coefficients `e_m` (index `m = 0..=l`) with
/// `H_k(x) H_{l-k}(y) = sum_m e_m J_{m,l-m}(x + i y, 2)`:
/// `e_m = i^{l-k} 2^{-l} sum_{r+s=m} C(k,r) C(l-k,s) (-1)^s`.
pub fn prop2dim2_hh_to_j(k: usize, l: usize) -> Result<Vec<Complex64>, HermiteError> {
    if k > l {
        return Err(HermiteError::IndexOutOfRange { l: k, n: l });
    }
    let i_unit = Complex64::new(0.0, 1.0);
    let scale = i_unit.powu((l - k) as u32) * 0.5f64.powi(l as i32);
    let mut out = vec![Complex64::new(0.0, 0.0); l + 1];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut inner = 0.0;
        for r in 0..=m.min(k) {
            let s = m - r;
            if s > l - k {
                continue;
            }
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * binomial_f64(k, r) * binomial_f64(l - k, s);
        }
        *slot = scale * inner;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gauss_hermite;
    use crate::sampling::rng_for;
    use rand::Rng;

    fn assert_close(a: Complex64, b: Complex64, tol: f64, ctx: &str) {
        assert!(
            (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm())),
            "{ctx}: {a} vs {b}"
        );
    }

    #[test]
    fn poly_j_examples() {
        let j10 = poly_j(1, 0).unwrap();
        assert_eq!(
            j10.terms_canonical(),
            vec![(1, 0, 0, BigInt::from(1))],
            "J_{{1,0}} = z"
        );

        let j22 = poly_j(2, 2).unwrap();
        assert_eq!(
            j22.terms_canonical(),
            vec![
                (2, 2, 0, BigInt::from(1)),
                (1, 1, 1, BigInt::from(-4)),
                (0, 0, 2, BigInt::from(2)),
            ],
            "J_{{2,2}} = z^2 zbar^2 - 4 rho z zbar + 2 rho^2"
        );

        let j03 = poly_j(0, 3).unwrap();
        assert_eq!(j03.terms_canonical(), vec![(0, 3, 0, BigInt::from(1))]);
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(poly_j(1, 1).unwrap().to_string(), "z*zbar - rho");
        assert_eq!(poly_j(2, 1).unwrap().to_string(), "z^2*zbar - 2*z*rho");
        assert_eq!(poly_j(0, 3).unwrap().to_string(), "zbar^3");
        assert_eq!(poly_j(0, 0).unwrap().to_string(), "1");
        assert_eq!(
            poly_j(2, 2).unwrap().to_string(),
            "z^2*zbar^2 - 4*z*zbar*rho + 2*rho^2"
        );
    }

    #[test]
    fn eval_j_examples_and_domain() {
        let z = Complex64::new(0.3, -0.7);
        assert_eq!(eval_j(0, 0, z, 1.7).unwrap(), Complex64::new(1.0, 0.0));
        assert_close(
            eval_j(1, 1, z, 0.5).unwrap(),
            z * z.conj() - 0.5,
            1e-15,
            "J_{1,1}",
        );
        let z = Complex64::new(1.0, 1.0);
        assert_close(
            eval_j(2, 1, z, 2.0).unwrap(),
            Complex64::new(-2.0, -2.0),
            1e-15,
            "J_{2,1}(1+i, 2)",
        );
        assert!(matches!(
            eval_j(1, 1, z, 0.0),
            Err(HermiteError::InvalidRho { .. })
        ));
        assert!(matches!(
            eval_j(1, 1, z, -1.0),
            Err(HermiteError::InvalidRho { .. })
        ));
        assert!(matches!(
            eval_j(10, 7, z, 1.0),
            Err(HermiteError::DegreeTooLarge { .. })
        ));
        assert!(eval_j_with_cap(10, 7, z, 1.0, 20).is_ok());
    }

    #[test]
    fn eval_j_agrees_with_poly_bitwise() {
        let pts = [
            (Complex64::new(0.2, 1.3), 0.7),
            (Complex64::new(-1.0, 0.4), 2.0),
            (Complex64::new(3.5, -2.25), 1.0),
        ];
        for m in 0..=5 {
            for n in 0..=5 {
                let p = poly_j(m, n).unwrap();
                for &(z, rho) in &pts {
                    assert_eq!(eval_j(m, n, z, rho).unwrap(), p.eval(z, rho));
                }
            }
        }
    }

    #[test]
    fn recursions_hold_exactly() {
        for m in 0..=8usize {
            for n in 0..=8usize {
                let j = poly_j_with_cap(m, n, 18).unwrap();
                // J_{m+1,n} = z J_{m,n} - n rho J_{m,n-1}
                let mut rhs = j.poly().mul_monomial(1, 0, 0);
                if n > 0 {
                    let lower = poly_j_with_cap(m, n - 1, 18).unwrap();
                    rhs = rhs.sub(&lower.poly().mul_monomial(0, 0, 1).scale(&BigInt::from(n)));
                }
                assert_eq!(&rhs, poly_j_with_cap(m + 1, n, 18).unwrap().poly());

                // J_{m,n+1} = zbar J_{m,n} - m rho J_{m-1,n}
                let mut rhs = j.poly().mul_monomial(0, 1, 0);
                if m > 0 {
                    let lower = poly_j_with_cap(m - 1, n, 18).unwrap();
                    rhs = rhs.sub(&lower.poly().mul_monomial(0, 0, 1).scale(&BigInt::from(m)));
                }
                assert_eq!(&rhs, poly_j_with_cap(m, n + 1, 18).unwrap().poly());
            }
        }
    }

    #[test]
    fn partial_derivatives_hold_exactly() {
        for m in 0..=8usize {
            for n in 0..=8usize {
                let j = poly_j(m, n).unwrap();
                let dz = j.poly().d_z();
                let dzb = j.poly().d_zbar();
                let drho = j.poly().d_rho();
                let expect_dz = if m > 0 {
                    poly_j(m - 1, n).unwrap().poly().scale(&BigInt::from(m))
                } else {
                    TriPoly::zero()
                };
                let expect_dzb = if n > 0 {
                    poly_j(m, n - 1).unwrap().poly().scale(&BigInt::from(n))
                } else {
                    TriPoly::zero()
                };
                let expect_drho = if m > 0 && n > 0 {
                    poly_j(m - 1, n - 1)
                        .unwrap()
                        .poly()
                        .scale(&-BigInt::from(m * n))
                } else {
                    TriPoly::zero()
                };
                assert_eq!(dz, expect_dz);
                assert_eq!(dzb, expect_dzb);
                assert_eq!(drho, expect_drho);
            }
        }
    }

    /// Conjugating the Gaussian density out of the iterated Wirtinger
    /// derivatives turns the classical closed form into the exact
    /// operator identity `J_{m,n} = (-1)^{m+n} V^m(U^n(1))` with
    /// `U(Q) = rho dQ/dz - zbar Q` and `V(Q) = rho dQ/dzbar - z Q`.
    #[test]
    fn rodrigues_operator_form_exact() {
        let u_op = |q: &TriPoly| q.d_z().mul_monomial(0, 0, 1).sub(&q.mul_monomial(0, 1, 0));
        let v_op = |q: &TriPoly| q.d_zbar().mul_monomial(0, 0, 1).sub(&q.mul_monomial(1, 0, 0));
        for m in 0..=5usize {
            for n in 0..=5usize {
                let mut q = TriPoly::one();
                for _ in 0..n {
                    q = u_op(&q);
                }
                for _ in 0..m {
                    q = v_op(&q);
                }
                if (m + n) % 2 == 1 {
                    q = q.scale(&BigInt::from(-1));
                }
                assert_eq!(&q, poly_j(m, n).unwrap().poly(), "Rodrigues at ({m},{n})");
            }
        }
    }

    /// The operator `(1+ic) z d/dz + (1-ic) zbar d/dzbar - 2 rho d2/dzdzbar`
    /// has `J_{m,n}` as an eigenfunction with eigenvalue `m+n + ic(m-n)`.
    /// Splitting into real and imaginary parts, this is the exact pair
    /// `A(J) = (m+n) J` and `c B(J) = c(m-n) J` with
    /// `A = z d_z + zbar d_zbar - 2 rho d_z d_zbar`, `B = z d_z - zbar d_zbar`.
    #[test]
    fn eigenfunction_identity_exact() {
        for m in 0..=6usize {
            for n in 0..=6usize {
                let j = poly_j(m, n).unwrap();
                let p = j.poly();
                let a = p
                    .d_z()
                    .mul_monomial(1, 0, 0)
                    .add(&p.d_zbar().mul_monomial(0, 1, 0))
                    .sub(&p.d_z().d_zbar().mul_monomial(0, 0, 1).scale(&BigInt::from(2)));
                let b = p
                    .d_z()
                    .mul_monomial(1, 0, 0)
                    .sub(&p.d_zbar().mul_monomial(0, 1, 0));
                assert_eq!(a, p.scale(&BigInt::from(m + n)));
                let diff = BigInt::from(m as i64 - n as i64);
                for c in [0i64, 1, -2] {
                    assert_eq!(
                        b.scale(&BigInt::from(c)),
                        p.scale(&(&diff * BigInt::from(c)))
                    );
                }
            }
        }
    }

    #[test]
    fn orthonormality_by_quadrature() {
        // <J_{m,n}, J_{p,q}>_{L2(mu)} = delta delta m! n! rho^{m+n} with
        // dmu = (pi rho)^{-1} exp(-|z|^2/rho) dx dy. Substituting
        // z = sqrt(rho)(u + iv) reduces to the e^{-u^2-v^2} weight.
        let (nodes, weights) = gauss_hermite(40);
        for &rho in &[1.0f64, 2.0] {
            let sq = rho.sqrt();
            for m in 0..=3usize {
                for n in 0..=3usize {
                    for p in 0..=3usize {
                        for q in 0..=3usize {
                            if m + n > 6 || p + q > 6 {
                                continue;
                            }
                            let a = poly_j(m, n).unwrap();
                            let b = poly_j(p, q).unwrap();
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (iu, &u) in nodes.iter().enumerate() {
                                for (iv, &v) in nodes.iter().enumerate() {
                                    let z = Complex64::new(sq * u, sq * v);
                                    acc += weights[iu]
                                        * weights[iv]
                                        * a.eval(z, rho)
                                        * b.eval(z, rho).conj();
                                }
                            }
                            acc /= std::f64::consts::PI;
                            let expect = if m == p && n == q {
                                crate::combin::factorial_f64(m)
                                    * crate::combin::factorial_f64(n)
                                    * rho.powi((m + n) as i32)
                            } else {
                                0.0
                            };
                            assert!(
                                (acc - expect).norm() <= 1e-8 * (1.0 + expect.abs()),
                                "<J_{m},{n}, J_{p},{q}> at rho={rho}: {acc} vs {expect}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_identity() {
        let mut rng = rng_for(11, 0);
        for _ in 0..20 {
            let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rho = rng.gen_range(0.2..2.0);
            let c: f64 = rng.gen_range(0.3..2.5);
            for m in 0..=4usize {
                for n in 0..=4usize {
                    let lhs = eval_j(m, n, c * z, c * c * rho).unwrap();
                    let rhs = c.powi((m + n) as i32) * eval_j(m, n, z, rho).unwrap();
                    assert_close(lhs, rhs, 1e-12, "scaling");
                }
            }
        }
    }

    #[test]
    fn generating_function_matches_exponential() {
        // Truncation at M = N = 25 reaches 1e-10 absolute accuracy on
        // |lambda| <= 1, |z| <= 2, rho <= 2 (worst observed tail there is
        // ~2e-12); larger |lambda| needs a deeper table - see the
        // stress case below.
        let cases = [
            (Complex64::new(0.3, 0.1), Complex64::new(1.0, -1.0), 2.0),
            (Complex64::new(-0.6, 0.7), Complex64::new(0.5, 1.8), 1.0),
            (Complex64::new(0.98, -0.15), Complex64::new(-1.9, 0.3), 0.5),
            (Complex64::new(0.4, -0.9), Complex64::new(1.4, 1.4), 2.0),
        ];
        for (lambda, z, rho) in cases {
            let closed =
                (lambda * z.conj() + lambda.conj() * z - rho * lambda.norm_sqr()).exp();
            let partial = gf_partial_sum(lambda, z, rho, 25, 25);
            assert!(
                (closed - partial).norm() <= 1e-10,
                "gf at lambda={lambda}, z={z}, rho={rho}: {partial} vs {closed}"
            );
        }

        // At the domain corner |lambda| = |z| = 2, rho = 2 the order-25
        // tail is genuinely of order 1e-3; deepening the truncation to
        // 60 terms recovers full accuracy, confirming the gap is pure
        // series truncation.
        let (lambda, z, rho) = (
            Complex64::new(2.0, 0.0) * Complex64::new(0.0, 0.9).exp(),
            Complex64::new(2.0, 0.0) * Complex64::new(0.0, -0.4).exp(),
            2.0,
        );
        let closed = (lambda * z.conj() + lambda.conj() * z - rho * lambda.norm_sqr()).exp();
        let p25 = gf_partial_sum(lambda, z, rho, 25, 25);
        let p60 = gf_partial_sum(lambda, z, rho, 60, 60);
        assert!((closed - p25).norm() > 1e-6, "corner tail is real");
        assert!((closed - p60).norm() <= 1e-10, "corner converges by 60 terms");
        // Degenerate truncations.
        let z = Complex64::new(1.0, -1.0);
        assert_eq!(
            gf_partial_sum(Complex64::new(0.0, 0.0), z, 2.0, 7, 7),
            Complex64::new(1.0, 0.0)
        );
        assert_eq!(
            gf_partial_sum(Complex64::new(0.3, 0.1), z, 2.0, 0, 0),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn monomial_expansion_examples_and_exactness() {
        let e11 = monomial_to_j(1, 1);
        assert_eq!(e11[&(1, 1)], (BigInt::from(1), 0));
        assert_eq!(e11[&(0, 0)], (BigInt::from(1), 1));

        let ek0 = monomial_to_j(4, 0);
        assert_eq!(ek0.len(), 1);
        assert_eq!(ek0[&(4, 0)], (BigInt::from(1), 0));

        let e22 = monomial_to_j(2, 2);
        assert_eq!(e22[&(2, 2)], (BigInt::from(1), 0));
        assert_eq!(e22[&(1, 1)], (BigInt::from(4), 1));
        assert_eq!(e22[&(0, 0)], (BigInt::from(2), 2));

        // Exact reconstruction: z^m zbar^n == sum coeff rho^r J_{m-r,n-r}.
        for m in 0..=5usize {
            for n in 0..=5usize {
                let mut acc = TriPoly::zero();
                for ((mm, nn), (c, r)) in monomial_to_j(m, n) {
                    let jp = poly_j(mm, nn).unwrap();
                    acc = acc.add(&jp.poly().mul_monomial(0, 0, r as u32).scale(&c));
                }
                assert_eq!(
                    acc,
                    TriPoly::monomial(m as u32, n as u32, 0, BigInt::one()),
                    "monomial expansion at ({m},{n})"
                );
            }
        }
    }

    #[test]
    fn product_expansion_examples_and_exactness() {
        let e = j_product_expand(1, 0, 0, 1);
        assert_eq!(e[&(1, 1)], (BigInt::from(1), 0));
        assert_eq!(e[&(0, 0)], (BigInt::from(1), 1));

        let e = j_product_expand(3, 2, 0, 0);
        assert_eq!(e.len(), 1);
        assert_eq!(e[&(3, 2)], (BigInt::from(1), 0));

        // J_{1,1}^2 = J_{2,2} + 2 rho J_{1,1} + rho^2 J_{0,0}; direct
        // symbolic expansion of (z zbar - rho)^2 confirms these weights.
        let e = j_product_expand(1, 1, 1, 1);
        assert_eq!(e[&(2, 2)], (BigInt::from(1), 0));
        assert_eq!(e[&(1, 1)], (BigInt::from(2), 1));
        assert_eq!(e[&(0, 0)], (BigInt::from(1), 2));

        // Exact polynomial identity for all small index combinations.
        for m in 0..=3usize {
            for n in 0..=3usize {
                for p in 0..=3usize {
                    for q in 0..=3usize {
                        let lhs = poly_j(m, n)
                            .unwrap()
                            .poly()
                            .mul(poly_j(p, q).unwrap().poly());
                        let mut rhs = TriPoly::zero();
                        for ((mm, nn), (c, r)) in j_product_expand(m, n, p, q) {
                            let jp = poly_j(mm, nn).unwrap();
                            rhs = rhs.add(&jp.poly().mul_monomial(0, 0, r as u32).scale(&c));
                        }
                        assert_eq!(lhs, rhs, "product expansion at ({m},{n})x({p},{q})");
                    }
                }
            }
        }
    }

    #[test]
    fn eval_h_small_cases() {
        assert_eq!(eval_h(0, 1.7), 1.0);
        assert_eq!(eval_h(1, 1.7), 1.7);
        let x = 0.83;
        assert!((eval_h(2, x) - (x * x - 1.0)).abs() < 1e-15);
        assert_eq!(eval_h(3, 2.0), 2.0); // x^3 - 3x at 2
        let x = -1.9;
        assert!((eval_h(4, x) - (x.powi(4) - 6.0 * x * x + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn theta_matrix_validation_and_inverse() {
        let tm = ThetaMatrix::new(1, &[std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4])
            .unwrap();
        // M = [[1, 0], [s, s]] with s = sqrt(2)/2; inverse [[1, 0], [-1, sqrt(2)]].
        assert!((tm.inverse[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(tm.inverse[(0, 1)].abs() < 1e-12);
        assert!((tm.inverse[(1, 0)] + 1.0).abs() < 1e-12);
        assert!((tm.inverse[(1, 1)] - std::f64::consts::SQRT_2).abs() < 1e-12);

        let prod = tm.matrix.mat_mul(&tm.inverse);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 1e-10);
            }
        }

        // Non-decreasing angles are rejected.
        assert!(matches!(
            ThetaMatrix::new(1, &[0.7, 0.7]),
            Err(HermiteError::BadAngles { .. })
        ));
        assert!(matches!(
            ThetaMatrix::new(1, &[0.5, 1.0]),
            Err(HermiteError::BadAngles { .. })
        ));
        assert!(matches!(
            ThetaMatrix::new(2, &[2.0, 1.0]),
            Err(HermiteError::BadAngles { .. })
        ));
        assert!(matches!(
            ThetaMatrix::new(1, &[3.2, 0.5]),
            Err(HermiteError::BadAngles { .. })
        ));

        // Clustered angles make M numerically singular.
        let clustered: Vec<f64> = (0..9).map(|i| 1.6 - 1e-4 * i as f64).collect();
        assert!(matches!(
            ThetaMatrix::new(8, &clustered),
            Err(HermiteError::DegenerateMatrix(_))
        ));
    }

    #[test]
    fn pair_representation_identity() {
        // Frozen 2x2 case.
        let thetas = [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4];
        let row0 = hermite_pair_rep(1, 0, &thetas).unwrap();
        assert!((row0[0] - 1.0).abs() < 1e-12 && row0[1].abs() < 1e-12);
        let row1 = hermite_pair_rep(1, 1, &thetas).unwrap();
        assert!((row1[0] + 1.0).abs() < 1e-12);
        assert!((row1[1] - std::f64::consts::SQRT_2).abs() < 1e-12);

        // H_l(x) H_{n-l}(y) = sum_k w_k H_n(x cos t_k + y sin t_k) at
        // random points, for well-spread angle sets.
        let mut rng = rng_for(23, 0);
        for n in 1..=6usize {
            let thetas: Vec<f64> = (0..=n)
                .map(|i| 2.9 - 2.6 * i as f64 / n as f64)
                .collect();
            for l in 0..=n {
                let row = hermite_pair_rep(n, l, &thetas).unwrap();
                for _ in 0..20 {
                    let x = rng.gen_range(-2.0..2.0);
                    let y = rng.gen_range(-2.0..2.0);
                    let lhs = eval_h(l, x) * eval_h(n - l, y);
                    let rhs: f64 = row
                        .iter()
                        .zip(&thetas)
                        .map(|(&w, &t)| w * eval_h(n, x * t.cos() + y * t.sin()))
                        .sum();
                    assert!(
                        (lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()),
                        "pair rep n={n} l={l}: {lhs} vs {rhs}"
                    );
                }
                if n % 2 == 1 {
                    // Both sides vanish at the origin for odd total degree.
                    let rhs: f64 = row
                        .iter()
                        .zip(&thetas)
                        .map(|(&w, &t)| w * eval_h(n, 0.0 * t.cos()))
                        .sum();
                    assert!(rhs.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn prop2dim2_both_directions() {
        // Frozen small case: J_{0,1} = zbar = H_1(x) - i H_1(y).
        let c = prop2dim2_j_to_hh(0, 1).unwrap();
        assert_close(c[0], Complex64::new(0.0, -1.0), 1e-12, "j_to_hh(0,1)[0]");
        assert_close(c[1], Complex64::new(1.0, 0.0), 1e-12, "j_to_hh(0,1)[1]");

        let mut rng = rng_for(29, 0);
        for l in 0..=6usize {
            for m in 0..=l {
                let to_hh = prop2dim2_j_to_hh(m, l).unwrap();
                let to_j = prop2dim2_hh_to_j(m, l).unwrap();
                for _ in 0..20 {
                    let x = rng.gen_range(-1.5..1.5);
                    let y = rng.gen_range(-1.5..1.5);
                    let z = Complex64::new(x, y);

                    let lhs = eval_j(m, l - m, z, 2.0).unwrap();
                    let rhs: Complex64 = to_hh
                        .iter()
                        .enumerate()
                        .map(|(k, &ck)| ck * eval_h(k, x) * eval_h(l - k, y))
                        .sum();
                    assert_close(lhs, rhs, 1e-9, &format!("J->HH l={l} m={m}"));

                    // Here the row index is the H-split k = m.
                    let lhs = Complex64::new(eval_h(m, x) * eval_h(l - m, y), 0.0);
                    let rhs: Complex64 = to_j
                        .iter()
                        .enumerate()
                        .map(|(mm, &em)| em * eval_j(mm, l - mm, z, 2.0).unwrap())
                        .sum();
                    assert_close(lhs, rhs, 1e-9, &format!("HH->J l={l} k={m}"));
                }
            }
        }
    }

    /// Desk realization of the forward conversion: with
    /// `zeta = x + i y` (`x, y` iid N(0,1)) and `Z(h) = h zeta / sqrt(2)`,
    /// taking `(f, g) = (cos phi, sin phi)` gives
    /// `H_n(x cos phi + y sin phi) = sum_k d_k(theta)
    /// J_{k,n-k}(e^{i(theta-phi)} (x+iy), 2)`.
    #[test]
    fn prop35_forward_identity() {
        let d0 = prop35_forward(0, 0.77);
        assert_close(d0.coeffs[0][0], Complex64::new(1.0, 0.0), 1e-14, "d_0 at n=0");

        let mut rng = rng_for(31, 0);
        for n in 1..=5usize {
            for &(theta, phi) in &[
                (0.0, 0.0),
                (std::f64::consts::PI / 5.0, 0.0),
                (std::f64::consts::PI / 5.0, std::f64::consts::PI / 7.0),
                (-0.9, 1.3),
            ] {
                let d = prop35_forward(n, theta);
                let rot = Complex64::new(0.0, theta - phi).exp();
                for _ in 0..10 {
                    let x = rng.gen_range(-1.5..1.5);
                    let y = rng.gen_range(-1.5..1.5);
                    let lhs = Complex64::new(eval_h(n, x * phi.cos() + y * phi.sin()), 0.0);
                    let zeta = Complex64::new(x, y);
                    let rhs: Complex64 = d.coeffs[0]
                        .iter()
                        .enumerate()
                        .map(|(k, &dk)| dk * eval_j(k, n - k, rot * zeta, 2.0).unwrap())
                        .sum();
                    assert_close(lhs, rhs, 1e-10, &format!("forward n={n} theta={theta}"));
                }
            }
        }
    }

    /// Desk realization of the inverse conversion: with `h = sqrt(2)
    /// e^{i alpha}`, `f_i + i g_i = e^{i theta_i} conj(h)/sqrt(2)`
    /// gives `J_{k,n-k}(e^{i alpha}(x+iy), 2) = sum_i c~_i
    /// H_n(x cos(theta_i - alpha) + y sin(theta_i - alpha))`.
    #[test]
    fn prop35_inverse_identity() {
        // Frozen n=1 case.
        let thetas = [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4];
        let inv = prop35_inverse(1, &thetas).unwrap();
        assert_close(inv.coeffs[1][0], Complex64::new(-1.0, 1.0), 1e-12, "c~_0");
        assert_close(
            inv.coeffs[1][1],
            Complex64::new(std::f64::consts::SQRT_2, 0.0),
            1e-12,
            "c~_1",
        );

        let mut rng = rng_for(37, 0);
        for n in 1..=5usize {
            let thetas: Vec<f64> = (0..=n)
                .map(|i| 2.8 - 2.4 * i as f64 / n as f64)
                .collect();
            let inv = prop35_inverse(n, &thetas).unwrap();
            for &alpha in &[0.0, 0.4] {
                let rot = Complex64::new(0.0, alpha).exp();
                for k in 0..=n {
                    for _ in 0..10 {
                        let x = rng.gen_range(-1.5..1.5);
                        let y = rng.gen_range(-1.5..1.5);
                        let zeta = Complex64::new(x, y);
                        let lhs = eval_j(k, n - k, rot * zeta, 2.0).unwrap();
                        let rhs: Complex64 = inv.coeffs[k]
                            .iter()
                            .zip(&thetas)
                            .map(|(&ci, &ti)| {
                                ci * eval_h(n, x * (ti - alpha).cos() + y * (ti - alpha).sin())
                            })
                            .sum();
                        assert_close(lhs, rhs, 1e-9, &format!("inverse n={n} k={k} alpha={alpha}"));
                    }
                }
            }
        }
    }

    /// Composing inverse then forward coefficient tables is the identity:
    /// `sum_i c~_i^{(k)} d_j(theta_i) = delta_{kj}`.
    #[test]
    fn prop35_round_trip() {
        let thetas = [
            3.0 * std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_4,
        ];
        let n = 2;
        let inv = prop35_inverse(n, &thetas).unwrap();
        let forwards: Vec<ConversionCoeffs> =
            thetas.iter().map(|&t| prop35_forward(n, t)).collect();
        for k in 0..=n {
            for j in 0..=n {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..=n {
                    acc += inv.coeffs[k][i] * forwards[i].coeffs[0][j];
                }
                let expect = if k == j { 1.0 } else { 0.0 };
                assert_close(
                    acc,
                    Complex64::new(expect, 0.0),
                    1e-12,
                    &format!("round trip ({k},{j})"),
                );
            }
        }
    }
}
