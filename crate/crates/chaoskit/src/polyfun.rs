//! Exact polynomial oracle over complex Gaussian coordinates.
//!
//! A [`WickPoly`] is a polynomial in the `2d` formal symbols
//! `zeta_1..zeta_d, zetabar_1..zetabar_d` with exact complex-rational
//! coefficients. Conjugation pairing between `zeta_k` and `zetabar_k` is
//! imposed only at evaluation and expectation time (Wirtinger calculus).
//!
//! Expectations are taken under `zeta_k` i.i.d. standard symmetric
//! complex Gaussian with `E|zeta_k|^2 = 1`, using the closed form
//! `E[zeta^a zetabar^b] = delta_{ab} a!` per coordinate. Everything is
//! arbitrary-precision rational, so identities verified here are exact,
//! independent of the floating-point code under test.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combin::factorial_big;
use crate::sampling;

/// Exact complex rational `re + im*i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl CRat {
    pub fn zero() -> Self {
        CRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        CRat {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    pub fn i() -> Self {
        CRat {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_int(re: i64) -> Self {
        CRat {
            re: BigRational::from_integer(BigInt::from(re)),
            im: BigRational::zero(),
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        CRat {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    /// Exact dyadic lift of a finite `f64` (and its partner for the
    /// imaginary part). `None` on NaN/infinity.
    pub fn from_f64_pair(re: f64, im: f64) -> Option<Self> {
        Some(CRat {
            re: BigRational::from_float(re)?,
            im: BigRational::from_float(im)?,
        })
    }

    pub fn from_complex(z: Complex64) -> Option<Self> {
        Self::from_f64_pair(z.re, z.im)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        CRat {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        CRat {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn add(&self, o: &CRat) -> Self {
        CRat {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn sub(&self, o: &CRat) -> Self {
        CRat {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    pub fn mul(&self, o: &CRat) -> Self {
        CRat {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn scale_rat(&self, r: &BigRational) -> Self {
        CRat {
            re: &self.re * r,
            im: &self.im * r,
        }
    }

    pub fn norm_sqr_rat(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl fmt::Display for CRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}*i", self.im)
        } else if self.im.is_negative() {
            write!(f, "{} - {}*i", self.re, -self.im.clone())
        } else {
            write!(f, "{} + {}*i", self.re, self.im)
        }
    }
}

/// Exact polynomial `sum c_{a,b} zeta^a zetabar^b` over `d` coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WickPoly {
    d: usize,
    terms: BTreeMap<(Vec<u32>, Vec<u32>), CRat>,
}

/// Float-compiled form of a [`WickPoly`] for hot evaluation loops.
pub struct CompiledPoly {
    d: usize,
    terms: Vec<(Vec<u32>, Vec<u32>, Complex64)>,
}

impl WickPoly {
    pub fn zero(d: usize) -> Self {
        WickPoly {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, c: CRat) -> Self {
        let mut p = WickPoly::zero(d);
        p.add_term(vec![0; d], vec![0; d], c);
        p
    }

    /// The coordinate symbol `zeta_k` (0-based).
    pub fn var(d: usize, k: usize) -> Self {
        assert!(k < d, "variable index {k} out of range for d={d}");
        let mut a = vec![0u32; d];
        a[k] = 1;
        let mut p = WickPoly::zero(d);
        p.add_term(a, vec![0; d], CRat::one());
        p
    }

    /// The conjugate symbol `zetabar_k` (0-based).
    pub fn var_bar(d: usize, k: usize) -> Self {
        assert!(k < d, "variable index {k} out of range for d={d}");
        let mut b = vec![0u32; d];
        b[k] = 1;
        let mut p = WickPoly::zero(d);
        p.add_term(vec![0; d], b, CRat::one());
        p
    }

    pub fn monomial(d: usize, a: Vec<u32>, b: Vec<u32>, c: CRat) -> Self {
        assert!(a.len() == d && b.len() == d, "exponent length mismatch");
        let mut p = WickPoly::zero(d);
        p.add_term(a, b, c);
        p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Vec<u32>, Vec<u32>), &CRat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|(a, b)| (a.iter().sum::<u32>() + b.iter().sum::<u32>()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Largest coefficient magnitude after rounding to `f64` (0 for the
    /// zero polynomial); `p.sub(&q).max_coeff_abs()` measures how far
    /// two exact polynomials are apart.
    pub fn max_coeff_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_complex().norm())
            .fold(0.0, f64::max)
    }

    pub fn add_term(&mut self, a: Vec<u32>, b: Vec<u32>, c: CRat) {
        assert!(a.len() == self.d && b.len() == self.d, "exponent length mismatch");
        if c.is_zero() {
            return;
        }
        let key = (a, b);
        match self.terms.get_mut(&key) {
            Some(slot) => {
                *slot = slot.add(&c);
                if slot.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    fn check_dim(&self, other: &WickPoly) {
        assert_eq!(
            self.d, other.d,
            "polynomial dimension mismatch: {} vs {}",
            self.d, other.d
        );
    }

    pub fn add(&self, other: &WickPoly) -> WickPoly {
        self.check_dim(other);
        let mut out = self.clone();
        for ((a, b), c) in &other.terms {
            out.add_term(a.clone(), b.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &WickPoly) -> WickPoly {
        self.check_dim(other);
        let mut out = self.clone();
        for ((a, b), c) in &other.terms {
            out.add_term(a.clone(), b.clone(), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &CRat) -> WickPoly {
        let mut out = WickPoly::zero(self.d);
        for ((a, b), v) in &self.terms {
            out.add_term(a.clone(), b.clone(), v.mul(c));
        }
        out
    }

    pub fn neg(&self) -> WickPoly {
        self.scale(&CRat::from_int(-1))
    }

    pub fn mul(&self, other: &WickPoly) -> WickPoly {
        self.check_dim(other);
        let mut out = WickPoly::zero(self.d);
        for ((a1, b1), c1) in &self.terms {
            for ((a2, b2), c2) in &other.terms {
                let a: Vec<u32> = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b: Vec<u32> = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                out.add_term(a, b, c1.mul(c2));
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> WickPoly {
        let mut out = WickPoly::constant(self.d, CRat::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Complex conjugate: swaps the holomorphic and antiholomorphic
    /// exponents and conjugates the coefficients.
    pub fn conj(&self) -> WickPoly {
        let mut out = WickPoly::zero(self.d);
        for ((a, b), c) in &self.terms {
            out.add_term(b.clone(), a.clone(), c.conj());
        }
        out
    }

    /// Wirtinger derivative in `zeta_k`.
    pub fn d_z(&self, k: usize) -> WickPoly {
        assert!(k < self.d, "variable index {k} out of range");
        let mut out = WickPoly::zero(self.d);
        for ((a, b), c) in &self.terms {
            if a[k] > 0 {
                let mut na = a.clone();
                na[k] -= 1;
                out.add_term(
                    na,
                    b.clone(),
                    c.scale_rat(&BigRational::from_integer(BigInt::from(a[k]))),
                );
            }
        }
        out
    }

    /// Wirtinger derivative in `zetabar_k`.
    pub fn d_zbar(&self, k: usize) -> WickPoly {
        assert!(k < self.d, "variable index {k} out of range");
        let mut out = WickPoly::zero(self.d);
        for ((a, b), c) in &self.terms {
            if b[k] > 0 {
                let mut nb = b.clone();
                nb[k] -= 1;
                out.add_term(
                    a.clone(),
                    nb,
                    c.scale_rat(&BigRational::from_integer(BigInt::from(b[k]))),
                );
            }
        }
        out
    }

    /// Substitute `zeta = point`, `zetabar = conj(point)`.
    pub fn eval_at(&self, point: &[Complex64]) -> Complex64 {
        self.compile().eval_at(point)
    }

    /// Pre-convert coefficients to `f64` for repeated evaluation.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|((a, b), c)| (a.clone(), b.clone(), c.to_complex()))
                .collect(),
        }
    }

    /// Exact expectation under i.i.d. standard symmetric complex
    /// Gaussian coordinates: termwise `E[zeta^a zetabar^b] =
    /// delta_{ab} a!` per coordinate, by independence.
    pub fn expect_gaussian(&self) -> CRat {
        let mut acc = CRat::zero();
        for ((a, b), c) in &self.terms {
            if a == b {
                let mut weight = BigInt::one();
                for &ak in a {
                    weight *= factorial_big(ak as usize);
                }
                acc = acc.add(&c.scale_rat(&BigRational::from_integer(weight)));
            }
        }
        acc
    }

    /// Exact `E[self * other]` without materializing the product.
    ///
    /// Terms are bucketed by the signed exponent difference `a - b`; a
    /// pair of terms has nonzero expectation iff their differences
    /// cancel, in which case it contributes `c1 c2 prod_k (a1_k + a2_k)!`.
    pub fn expect_product(&self, other: &WickPoly) -> CRat {
        self.check_dim(other);
        let mut groups: HashMap<Vec<i64>, Vec<(&Vec<u32>, &CRat)>> = HashMap::new();
        for ((a, b), c) in &self.terms {
            let delta: Vec<i64> = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| x as i64 - y as i64)
                .collect();
            groups.entry(delta).or_default().push((a, c));
        }
        let mut acc = CRat::zero();
        for ((a2, b2), c2) in &other.terms {
            let neg_delta: Vec<i64> = a2
                .iter()
                .zip(b2)
                .map(|(&x, &y)| y as i64 - x as i64)
                .collect();
            let Some(bucket) = groups.get(&neg_delta) else {
                continue;
            };
            for (a1, c1) in bucket {
                let mut weight = BigInt::one();
                for (&x, &y) in a1.iter().zip(a2) {
                    weight *= factorial_big((x + y) as usize);
                }
                acc = acc.add(&c1.mul(c2).scale_rat(&BigRational::from_integer(weight)));
            }
        }
        acc
    }

    /// Integrate out every variable `k` with `keep(k) == false`,
    /// leaving an exact polynomial in the kept variables (dropped
    /// variables keep zero exponents in the key).
    fn integrate_if(&self, keep: impl Fn(usize) -> bool) -> WickPoly {
        let mut out = WickPoly::zero(self.d);
        'term: for ((a, b), c) in &self.terms {
            let mut na = a.clone();
            let mut nb = b.clone();
            let mut weight = BigInt::one();
            for k in 0..self.d {
                if keep(k) {
                    continue;
                }
                if a[k] != b[k] {
                    continue 'term;
                }
                weight *= factorial_big(a[k] as usize);
                na[k] = 0;
                nb[k] = 0;
            }
            out.add_term(na, nb, c.scale_rat(&BigRational::from_integer(weight)));
        }
        out
    }

    /// Exact conditional expectation onto the first `from` coordinates:
    /// integrates out every variable with index `>= from`.
    pub fn integrate_from(&self, from: usize) -> WickPoly {
        self.integrate_if(|k| k < from)
    }

    /// Integrate out the single variable `k`.
    pub fn integrate_var(&self, k: usize) -> WickPoly {
        self.integrate_if(|j| j != k)
    }

    /// Monte Carlo mean and standard error at `samples` i.i.d. draws.
    /// Deterministic in `(samples, seed)` for any `workers` count.
    pub fn mc_expectation(&self, samples: usize, seed: u64, workers: usize) -> (Complex64, f64) {
        assert!(samples >= 2, "need at least two samples for a standard error");
        let compiled = self.compile();
        let d = self.d;
        let stats = sampling::mc_mean_vec(
            samples,
            seed,
            workers,
            sampling::DEFAULT_BLOCK,
            3,
            |rng, out| {
                let point = sampling::complex_vector(rng, d);
                let v = compiled.eval_at(&point);
                out[0] += v.re;
                out[1] += v.im;
                out[2] += v.norm_sqr();
            },
        );
        let mean = Complex64::new(stats[0], stats[1]);
        let var = (stats[2] - mean.norm_sqr()).max(0.0);
        (mean, (var / samples as f64).sqrt())
    }
}

impl CompiledPoly {
    pub fn eval_at(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.d, "evaluation point has wrong dimension");
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b, c) in &self.terms {
            let mut term = *c;
            for (k, (&ak, &bk)) in a.iter().zip(b.iter()).enumerate() {
                if ak > 0 {
                    term *= point[k].powu(ak);
                }
                if bk > 0 {
                    term *= point[k].conj().powu(bk);
                }
            }
            acc += term;
        }
        acc
    }
}

impl fmt::Display for WickPoly {
    /// Canonical sorted-term form, e.g. `(1/2 + 1*i)*z1^2*zb2 + (3)*zb1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((a, b), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (k, &ak) in a.iter().enumerate() {
                match ak {
                    0 => {}
                    1 => write!(f, "*z{}", k + 1)?,
                    _ => write!(f, "*z{}^{}", k + 1, ak)?,
                }
            }
            for (k, &bk) in b.iter().enumerate() {
                match bk {
                    0 => {}
                    1 => write!(f, "*zb{}", k + 1)?,
                    _ => write!(f, "*zb{}^{}", k + 1, bk)?,
                }
            }
        }
        Ok(())
    }
}
