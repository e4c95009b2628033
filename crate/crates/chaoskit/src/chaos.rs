//! Multiple Wiener-Itô integrals over a `d`-dimensional complex
//! Gaussian space: chaos expansions, the product formula, Wick
//! products, the derivative/divergence pair, the complex
//! Ornstein-Uhlenbeck family, trace (Stratonovich) expansions, and the
//! independence criterion.
//!
//! Coordinates `zeta_1..zeta_d` are i.i.d. standard symmetric complex
//! Gaussian with `E|zeta_k|^2 = 1`. A symmetric `(m, n)` kernel `f`
//! realizes the random variable
//!
//! `I_{m,n}(f)(zeta) = sum_{p,q} f[p; q] prod_k J_{m_k(p), n_k(q)}(zeta_k, 1)`
//!
//! where `m_k(p)` counts occurrences of index `k` among the
//! holomorphic slots (and `n_k(q)` among the antiholomorphic ones).
//! The basis value is the product complex Hermite polynomial, so
//! distinct levels are orthogonal and `E[I_{m,n}(f) conj(I_{m,n}(g))] =
//! m! n! <f, g>`. Everything here is checked in the test suite against
//! the exact-arithmetic oracle in [`crate::polyfun`], which shares no
//! code with these floating-point paths.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::combin::{binomial_f64, factorial_big, factorial_f64};
use crate::hermite::poly_j;
use crate::polyfun::{CRat, WickPoly};
use crate::sampling;
use crate::tensor::{
    distinct_permutations, for_each_multiset, for_each_tuple, Kernel, TensorError,
};
use crate::DEGREE_CAP;

/// Largest tolerated deviation from slot-exchange symmetry, relative to
/// the kernel magnitude: the checks accept `defect <= SYMMETRY_TOL * (1
/// + max_abs)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Contraction norms at or below this are treated as vanishing by the
/// independence criterion.
pub const INDEPENDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChaosError {
    #[error(
        "kernel of type ({m},{n}) is not symmetric: defect {defect:.3e} exceeds tolerance {tol:.3e}"
    )]
    AsymmetricKernel {
        m: usize,
        n: usize,
        defect: f64,
        tol: f64,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("total polynomial degree {degree} exceeds cap {cap}")]
    DegreeTooLarge { degree: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One observation of the coordinate Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct IsonormalSample {
    pub zeta: Vec<Complex64>,
}

impl IsonormalSample {
    pub fn new(zeta: Vec<Complex64>) -> Self {
        IsonormalSample { zeta }
    }

    pub fn draw(d: usize, rng: &mut impl Rng) -> Self {
        IsonormalSample {
            zeta: sampling::complex_vector(rng, d),
        }
    }

    pub fn d(&self) -> usize {
        self.zeta.len()
    }
}

/// Rotation angle and time of the complex Ornstein-Uhlenbeck semigroup;
/// the drift direction is `r = e^{i theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    theta: f64,
    t: f64,
}

impl OUParams {
    pub fn new(theta: f64, t: f64) -> Result<Self, ChaosError> {
        if !theta.is_finite() || theta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(ChaosError::BadParams(format!(
                "theta must lie in (-pi/2, pi/2), got {theta}"
            )));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(ChaosError::BadParams(format!(
                "time must be finite and nonnegative, got {t}"
            )));
        }
        Ok(OUParams { theta, t })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    /// Semigroup eigenvalue on level `(m, n)`:
    /// `exp(-[(m+n) cos(theta) + i (m-n) sin(theta)] t)`.
    pub fn level_factor(&self, m: usize, n: usize) -> Complex64 {
        let rate = Complex64::new(
            (m + n) as f64 * self.theta.cos(),
            (m as f64 - n as f64) * self.theta.sin(),
        );
        (-rate * self.t).exp()
    }
}

pub(crate) fn check_symmetric(f: &Kernel) -> Result<(), ChaosError> {
    let defect = f.symmetry_defect();
    let tol = SYMMETRY_TOL * (1.0 + f.max_abs());
    if defect > tol {
        return Err(ChaosError::AsymmetricKernel {
            m: f.m(),
            n: f.n(),
            defect,
            tol,
        });
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Finite family of symmetric kernels indexed by chaos level `(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    d: usize,
    levels: BTreeMap<(usize, usize), Kernel>,
}

impl ChaosExpansion {
    pub fn new(d: usize) -> Self {
        ChaosExpansion {
            d,
            levels: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, c: Complex64) -> Self {
        let mut out = ChaosExpansion::new(d);
        if c != Complex64::new(0.0, 0.0) {
            let mut k = Kernel::zeros(d, 0, 0).expect("scalar kernel");
            k.set(&[], &[], c).expect("scalar slot");
            out.levels.insert((0, 0), k);
        }
        out
    }

    pub fn from_kernel(f: Kernel) -> Result<Self, ChaosError> {
        let mut out = ChaosExpansion::new(f.d());
        out.accumulate(f)?;
        Ok(out)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> impl Iterator<Item = ((usize, usize), &Kernel)> {
        self.levels.iter().map(|(&k, v)| (k, v))
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn get(&self, m: usize, n: usize) -> Option<&Kernel> {
        self.levels.get(&(m, n))
    }

    /// The `(0, 0)` coefficient, i.e. the mean.
    pub fn mean(&self) -> Complex64 {
        self.levels
            .get(&(0, 0))
            .map(|k| k.coeffs()[0])
            .unwrap_or_default()
    }

    /// Add a symmetric kernel into its level (checked).
    pub fn accumulate(&mut self, f: Kernel) -> Result<(), ChaosError> {
        if f.d() != self.d {
            return Err(ChaosError::DimensionMismatch {
                left: self.d,
                right: f.d(),
            });
        }
        check_symmetric(&f)?;
        self.accumulate_raw(f);
        Ok(())
    }

    /// Internal accumulate for kernels that are symmetric by
    /// construction.
    fn accumulate_raw(&mut self, f: Kernel) {
        let key = (f.m(), f.n());
        match self.levels.get_mut(&key) {
            Some(existing) => {
                *existing = existing.add(&f).expect("same shape");
            }
            None => {
                self.levels.insert(key, f);
            }
        }
    }

    /// Drop levels whose kernels are exactly zero.
    pub fn prune_zeros(&mut self) {
        self.levels.retain(|_, k| k.max_abs() != 0.0);
    }

    pub fn add(&self, other: &ChaosExpansion) -> Result<ChaosExpansion, ChaosError> {
        if self.d != other.d {
            return Err(ChaosError::DimensionMismatch {
                left: self.d,
                right: other.d,
            });
        }
        let mut out = self.clone();
        for (_, k) in other.levels() {
            out.accumulate_raw(k.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ChaosExpansion) -> Result<ChaosExpansion, ChaosError> {
        self.add(&other.scale(real(-1.0)))
    }

    pub fn scale(&self, c: Complex64) -> ChaosExpansion {
        ChaosExpansion {
            d: self.d,
            levels: self
                .levels
                .iter()
                .map(|(&k, v)| (k, v.scale(c)))
                .collect(),
        }
    }

    /// Orthogonal projection onto level `(m, n)`: the stored kernel, or
    /// the zero kernel of that shape.
    pub fn project(&self, m: usize, n: usize) -> Result<Kernel, ChaosError> {
        match self.levels.get(&(m, n)) {
            Some(k) => Ok(k.clone()),
            None => Ok(Kernel::zeros(self.d, m, n)?),
        }
    }

    pub fn eval(&self, sample: &IsonormalSample) -> Result<Complex64, ChaosError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (_, kernel) in self.levels() {
            acc += eval_integral(kernel, sample)?;
        }
        Ok(acc)
    }

    pub fn to_poly(&self) -> Result<WickPoly, ChaosError> {
        let mut acc = WickPoly::zero(self.d);
        for (_, kernel) in self.levels() {
            acc = acc.add(&kernel_to_poly(kernel)?);
        }
        Ok(acc)
    }

    /// Second moment by orthogonality: `E|F|^2 = sum m! n! |f_{m,n}|^2`.
    pub fn second_moment(&self) -> f64 {
        self.levels()
            .map(|((m, n), k)| {
                let w = factorial_f64(m) * factorial_f64(n);
                w * k.norm() * k.norm()
            })
            .sum()
    }

    pub fn max_total_rank(&self) -> usize {
        self.levels.keys().map(|&(m, n)| m + n).max().unwrap_or(0)
    }
}

/// Table of `J_{a,b}(z, 1)` for `a <= mmax`, `b <= nmax`, built with the
/// degree recurrences.
fn j_table(z: Complex64, mmax: usize, nmax: usize) -> Vec<Vec<Complex64>> {
    let zb = z.conj();
    let mut table = Vec::with_capacity(mmax + 1);
    let mut row: Vec<Complex64> = (0..=nmax).map(|b| zb.powu(b as u32)).collect();
    table.push(row.clone());
    for _ in 0..mmax {
        let mut next = Vec::with_capacity(nmax + 1);
        for (b, &cur) in row.iter().enumerate() {
            let lower = if b == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                row[b - 1]
            };
            next.push(z * cur - b as f64 * lower);
        }
        table.push(next.clone());
        row = next;
    }
    table
}

/// Evaluate the multiple integral `I_{m,n}(f)` at a sample point.
pub fn eval_integral(f: &Kernel, sample: &IsonormalSample) -> Result<Complex64, ChaosError> {
    if f.d() != sample.d() {
        return Err(ChaosError::DimensionMismatch {
            left: f.d(),
            right: sample.d(),
        });
    }
    check_symmetric(f)?;
    let (d, m, n) = (f.d(), f.m(), f.n());
    let tables: Vec<Vec<Vec<Complex64>>> =
        sample.zeta.iter().map(|&z| j_table(z, m, n)).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut flat = 0usize;
    let mut mcount = vec![0usize; d.max(1)];
    let mut ncount = vec![0usize; d.max(1)];
    for_each_tuple(d, m + n, |idx| {
        let coeff = f.coeffs()[flat];
        flat += 1;
        if coeff == Complex64::new(0.0, 0.0) {
            return;
        }
        mcount[..d].fill(0);
        ncount[..d].fill(0);
        for &k in &idx[..m] {
            mcount[k] += 1;
        }
        for &k in &idx[m..] {
            ncount[k] += 1;
        }
        let mut basis = Complex64::new(1.0, 0.0);
        for k in 0..d {
            if mcount[k] > 0 || ncount[k] > 0 {
                basis *= tables[k][mcount[k]][ncount[k]];
            }
        }
        acc += coeff * basis;
    });
    Ok(acc)
}

/// `J_{a,b}` at `rho = 1` as exact `(z power, zbar power) -> integer`
/// coefficient lists.
fn j_coeffs_at_one(a: usize, b: usize) -> Vec<(u32, u32, BigInt)> {
    let poly = poly_j(a, b).expect("level degree under cap");
    let mut collapsed: BTreeMap<(u32, u32), BigInt> = BTreeMap::new();
    for (&(zp, zbp, _rp), c) in poly.poly().terms() {
        *collapsed.entry((zp, zbp)).or_insert_with(BigInt::zero) += c;
    }
    collapsed
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((zp, zbp), c)| (zp, zbp, c))
        .collect()
}

fn orbit_size_big(sorted: &[usize], d: usize) -> BigInt {
    let mut counts = vec![0usize; d.max(1)];
    for &x in sorted {
        counts[x] += 1;
    }
    let mut size = factorial_big(sorted.len());
    for &c in &counts {
        if c > 1 {
            size /= factorial_big(c);
        }
    }
    size
}

/// Exact polynomial `sum_{p,q} entry(p,q) prod_k J_{m_k, n_k}(zeta_k, 1)`
/// for entries constant on symmetry orbits (evaluated at the sorted
/// representative and weighted by the orbit size).
fn poly_from_symmetric_entries(
    d: usize,
    m: usize,
    n: usize,
    entry: impl Fn(&[usize], &[usize]) -> CRat,
) -> WickPoly {
    let mut reps_p = Vec::new();
    for_each_multiset(d, m, |p| reps_p.push(p.to_vec()));
    let mut reps_q = Vec::new();
    for_each_multiset(d, n, |q| reps_q.push(q.to_vec()));
    let mut jcache: HashMap<(usize, usize), Vec<(u32, u32, BigInt)>> = HashMap::new();
    let mut acc = WickPoly::zero(d);
    for p in &reps_p {
        for q in &reps_q {
            let value = entry(p, q);
            if value.is_zero() {
                continue;
            }
            let weight = orbit_size_big(p, d) * orbit_size_big(q, d);
            let mut term = WickPoly::constant(
                d,
                value.scale_rat(&BigRational::from_integer(weight)),
            );
            let mut mcount = vec![0usize; d];
            let mut ncount = vec![0usize; d];
            for &k in p {
                mcount[k] += 1;
            }
            for &k in q {
                ncount[k] += 1;
            }
            for k in 0..d {
                let (a, b) = (mcount[k], ncount[k]);
                if a == 0 && b == 0 {
                    continue;
                }
                let coeffs = jcache
                    .entry((a, b))
                    .or_insert_with(|| j_coeffs_at_one(a, b));
                let mut factor = WickPoly::zero(d);
                for (zp, zbp, c) in coeffs.iter() {
                    let mut av = vec![0u32; d];
                    let mut bv = vec![0u32; d];
                    av[k] = *zp;
                    bv[k] = *zbp;
                    factor.add_term(
                        av,
                        bv,
                        CRat {
                            re: BigRational::from_integer(c.clone()),
                            im: BigRational::zero(),
                        },
                    );
                }
                term = term.mul(&factor);
            }
            acc = acc.add(&term);
        }
    }
    acc
}

/// Exact-coefficient polynomial representing `I_{m,n}(f)`: its
/// `eval_at` equals `eval_integral(f, .)` for every sample point.
pub fn kernel_to_poly(f: &Kernel) -> Result<WickPoly, ChaosError> {
    check_symmetric(f)?;
    Ok(poly_from_symmetric_entries(
        f.d(),
        f.m(),
        f.n(),
        |p, q| {
            let v = f.get(p, q).expect("representative index in range");
            CRat::from_complex(v).expect("finite kernel coefficient")
        },
    ))
}

/// Recover the chaos expansion of a polynomial: the `(p, q)` kernel is
/// `(p! q!)^{-1} E[dz^{(i_1..i_p)} dzbar^{(j_1..j_q)} P]`, which is
/// symmetric because mixed partials commute.
pub fn stroock_expand(p: &WickPoly) -> Result<ChaosExpansion, ChaosError> {
    let d = p.d();
    let mut amax = 0usize;
    let mut bmax = 0usize;
    for ((a, b), _) in p.terms() {
        amax = amax.max(a.iter().sum::<u32>() as usize);
        bmax = bmax.max(b.iter().sum::<u32>() as usize);
    }
    let mut out = ChaosExpansion::new(d);
    let mut reps: Vec<Vec<usize>> = Vec::new();
    for pm in 0..=amax {
        for qn in 0..=bmax {
            let mut kernel = Kernel::zeros(d, pm, qn)?;
            let inv_weight = BigRational::new(
                BigInt::one(),
                factorial_big(pm) * factorial_big(qn),
            );
            reps.clear();
            for_each_multiset(d, pm, |i| reps.push(i.to_vec()));
            let mut any = false;
            for i in reps.clone() {
                let mut dp = p.clone();
                for &k in &i {
                    dp = dp.d_z(k);
                }
                if dp.is_zero() {
                    continue;
                }
                let mut reps_j = Vec::new();
                for_each_multiset(d, qn, |j| reps_j.push(j.to_vec()));
                for j in reps_j {
                    let mut dpq = dp.clone();
                    for &k in &j {
                        dpq = dpq.d_zbar(k);
                    }
                    let value = dpq.expect_gaussian().scale_rat(&inv_weight);
                    if value.is_zero() {
                        continue;
                    }
                    any = true;
                    let v = value.to_complex();
                    for pi in distinct_permutations(&i) {
                        for sg in distinct_permutations(&j) {
                            kernel.set(&pi, &sg, v).expect("orbit index in range");
                        }
                    }
                }
            }
            if any {
                out.accumulate_raw(kernel);
            }
        }
    }
    Ok(out)
}

/// Product formula for a pair of multiple integrals:
///
/// `I_{a,b}(f) I_{c,dd}(g) = sum_{i <= a ^ dd} sum_{j <= b ^ c}
///  C(a,i) C(dd,i) C(b,j) C(c,j) i! j! I(sym(f (x)_{i,j} g))`
///
/// with the `(i, j)` term living at level `(a+c-i-j, b+dd-i-j)`.
pub fn product_pair(f: &Kernel, g: &Kernel) -> Result<ChaosExpansion, ChaosError> {
    if f.d() != g.d() {
        return Err(ChaosError::DimensionMismatch {
            left: f.d(),
            right: g.d(),
        });
    }
    check_symmetric(f)?;
    check_symmetric(g)?;
    let (a, b) = (f.m(), f.n());
    let (c, dd) = (g.m(), g.n());
    let mut out = ChaosExpansion::new(f.d());
    for i in 0..=a.min(dd) {
        for j in 0..=b.min(c) {
            let coeff = binomial_f64(a, i)
                * binomial_f64(dd, i)
                * binomial_f64(b, j)
                * binomial_f64(c, j)
                * factorial_f64(i)
                * factorial_f64(j);
            let kernel = f.contract(g, i, j)?.symmetrize().scale(real(coeff));
            out.accumulate_raw(kernel);
        }
    }
    Ok(out)
}

/// Bilinear extension of [`product_pair`] to whole expansions.
pub fn expansion_product(
    f: &ChaosExpansion,
    g: &ChaosExpansion,
) -> Result<ChaosExpansion, ChaosError> {
    if f.d() != g.d() {
        return Err(ChaosError::DimensionMismatch {
            left: f.d(),
            right: g.d(),
        });
    }
    let mut out = ChaosExpansion::new(f.d());
    for (_, kf) in f.levels() {
        for (_, kg) in g.levels() {
            let part = product_pair(kf, kg)?;
            for (_, k) in part.levels() {
                out.accumulate_raw(k.clone());
            }
        }
    }
    Ok(out)
}

/// Wick (top-level) product: the `(i, j) = (0, 0)` term of the product
/// formula, `sym(f (x) g)`, which is the projection of the full product
/// onto level `(m+p, n+q)`.
pub fn wick_product(f: &Kernel, g: &Kernel) -> Result<Kernel, ChaosError> {
    if f.d() != g.d() {
        return Err(ChaosError::DimensionMismatch {
            left: f.d(),
            right: g.d(),
        });
    }
    check_symmetric(f)?;
    check_symmetric(g)?;
    Ok(f.contract(g, 0, 0)?.symmetrize())
}

/// Exact polynomial of the Wick monomial `:Z(f)^p conj(Z(f))^q:` =
/// `I_{p,q}(f^{(x)p} (x) conj(f)^{(x)q})`, built from exact rational
/// vector components.
fn rank_one_wick_poly(p: usize, q: usize, f: &[CRat]) -> WickPoly {
    let fbar: Vec<CRat> = f.iter().map(|c| c.conj()).collect();
    poly_from_symmetric_entries(f.len(), p, q, |pt, qt| {
        let mut v = CRat::one();
        for &k in pt {
            v = v.mul(&f[k]);
        }
        for &k in qt {
            v = v.mul(&fbar[k]);
        }
        v
    })
}

/// Outcome of checking the closed form of a Wick monomial.
#[derive(Debug, Clone)]
pub struct WickMonomialReport {
    pub p: usize,
    pub q: usize,
    /// Exact equality of the two polynomial routes.
    pub matches: bool,
    /// `I_{p,q}` of the rank-one kernel, via the basis expansion.
    pub integral_poly: WickPoly,
    /// The alternating closed form
    /// `sum_k (-1)^k k! C(p,k) C(q,k) Z^{p-k} conj(Z)^{q-k} (E|Z|^2)^k`.
    pub closed_form: WickPoly,
}

/// Verify `:Z(f)^p conj(Z(f))^q:` against its alternating closed form,
/// exactly, for an exactly-unit-norm rational vector `f`.
pub fn wick_monomial_check(
    p: usize,
    q: usize,
    f: &[CRat],
) -> Result<WickMonomialReport, ChaosError> {
    if p + q > DEGREE_CAP {
        return Err(ChaosError::DegreeTooLarge {
            degree: p + q,
            cap: DEGREE_CAP,
        });
    }
    let d = f.len();
    if d == 0 {
        return Err(ChaosError::BadParams("empty direction vector".into()));
    }
    let mut norm = CRat::zero();
    for c in f {
        norm = norm.add(&c.mul(&c.conj()));
    }
    if (norm.to_complex() - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(ChaosError::BadParams(format!(
            "direction vector must have unit norm, got |f|^2 = {}",
            norm.to_complex().re
        )));
    }

    let integral_poly = rank_one_wick_poly(p, q, f);

    let mut zf = WickPoly::zero(d);
    for (k, c) in f.iter().enumerate() {
        zf = zf.add(&WickPoly::var(d, k).scale(c));
    }
    let zfbar = zf.conj();
    let mut closed_form = WickPoly::zero(d);
    for k in 0..=p.min(q) {
        let mut coeff = CRat {
            re: BigRational::from_integer(
                factorial_big(k)
                    * crate::combin::binomial_big(p, k)
                    * crate::combin::binomial_big(q, k),
            ),
            im: BigRational::zero(),
        };
        if k % 2 == 1 {
            coeff = coeff.neg();
        }
        for _ in 0..k {
            coeff = coeff.mul(&norm);
        }
        closed_form = closed_form.add(
            &zf.pow(p - k).mul(&zfbar.pow(q - k)).scale(&coeff),
        );
    }

    Ok(WickMonomialReport {
        p,
        q,
        matches: integral_poly == closed_form,
        integral_poly,
        closed_form,
    })
}

/// Empirical Wick continuity ratio `||I(f <> g)||_2 / (||I(f)||_2 ||I(g)||_2)`
/// in `L^2`, where `f <> g` is the Wick product kernel. No uniform
/// bound independent of the ranks is asserted — the ratio is reported
/// so fixtures can track how it moves with `(m, n, p, q)`.
pub fn wick_continuity_ratio(f: &Kernel, g: &Kernel) -> Result<f64, ChaosError> {
    let w = wick_product(f, g)?;
    let l2 = |k: &Kernel| {
        (factorial_f64(k.m()) * factorial_f64(k.n())).sqrt() * k.norm()
    };
    let denom = l2(f) * l2(g);
    if denom == 0.0 {
        return Err(ChaosError::BadParams(
            "Wick continuity ratio needs nonzero factors".into(),
        ));
    }
    Ok(l2(&w) / denom)
}

/// Derivative in direction `k` of each level: the `(m, n)` kernel maps
/// to the `(m-1, n)` kernel `m f[k, p'; q]`.
pub fn malliavin_d(f: &ChaosExpansion) -> Result<Vec<ChaosExpansion>, ChaosError> {
    let d = f.d();
    let mut out = vec![ChaosExpansion::new(d); d];
    for ((m, n), kernel) in f.levels() {
        if m == 0 {
            continue;
        }
        for (k, component) in out.iter_mut().enumerate() {
            let mut idx = vec![0usize; m];
            let lowered = Kernel::from_fn(d, m - 1, n, |p, q| {
                idx[0] = k;
                idx[1..].copy_from_slice(p);
                m as f64 * kernel.get(&idx, q).expect("index in range")
            })?;
            component.accumulate_raw(lowered);
        }
    }
    Ok(out)
}

/// Conjugate-side derivative: the `(m, n)` kernel maps to the
/// `(m, n-1)` kernel `n f[p; k, q']` in component `k`.
pub fn malliavin_dbar(f: &ChaosExpansion) -> Result<Vec<ChaosExpansion>, ChaosError> {
    let d = f.d();
    let mut out = vec![ChaosExpansion::new(d); d];
    for ((m, n), kernel) in f.levels() {
        if n == 0 {
            continue;
        }
        for (k, component) in out.iter_mut().enumerate() {
            let mut idx = vec![0usize; n];
            let lowered = Kernel::from_fn(d, m, n - 1, |p, q| {
                idx[0] = k;
                idx[1..].copy_from_slice(q);
                n as f64 * kernel.get(p, &idx).expect("index in range")
            })?;
            component.accumulate_raw(lowered);
        }
    }
    Ok(out)
}

/// Adjoint of the derivative: a level-`(m, n)` family `g_k` maps to
/// `I_{m+1,n}(sym(sum_k e_k (x) g_k))`; defined by the duality
/// `E[(div u) conj(G)] = E[sum_k u_k conj((DG)_k)]`.
pub fn divergence(u: &[ChaosExpansion]) -> Result<ChaosExpansion, ChaosError> {
    let d = u.len();
    if d == 0 {
        return Err(ChaosError::BadParams("empty direction family".into()));
    }
    for comp in u {
        if comp.d() != d {
            return Err(ChaosError::DimensionMismatch {
                left: d,
                right: comp.d(),
            });
        }
    }
    let mut level_set: Vec<(usize, usize)> = Vec::new();
    for comp in u {
        for (lvl, _) in comp.levels() {
            if !level_set.contains(&lvl) {
                level_set.push(lvl);
            }
        }
    }
    let mut out = ChaosExpansion::new(d);
    for (m, n) in level_set {
        let raw = Kernel::from_fn(d, m + 1, n, |p, q| {
            let k = p[0];
            match u[k].get(m, n) {
                Some(g) => g.get(&p[1..], q).expect("index in range"),
                None => Complex64::new(0.0, 0.0),
            }
        })?;
        out.accumulate_raw(raw.symmetrize());
    }
    Ok(out)
}

/// Conjugate-side adjoint: a level-`(m, n)` family `g_k` maps to
/// `I_{m,n+1}(sym(.))` with the new slot prepended on the
/// antiholomorphic side; satisfies the mirrored duality against the
/// conjugate derivative.
pub fn divergence_bar(u: &[ChaosExpansion]) -> Result<ChaosExpansion, ChaosError> {
    let d = u.len();
    if d == 0 {
        return Err(ChaosError::BadParams("empty direction family".into()));
    }
    for comp in u {
        if comp.d() != d {
            return Err(ChaosError::DimensionMismatch {
                left: d,
                right: comp.d(),
            });
        }
    }
    let mut level_set: Vec<(usize, usize)> = Vec::new();
    for comp in u {
        for (lvl, _) in comp.levels() {
            if !level_set.contains(&lvl) {
                level_set.push(lvl);
            }
        }
    }
    let mut out = ChaosExpansion::new(d);
    for (m, n) in level_set {
        let raw = Kernel::from_fn(d, m, n + 1, |p, q| {
            let k = q[0];
            match u[k].get(m, n) {
                Some(g) => g.get(p, &q[1..]).expect("index in range"),
                None => Complex64::new(0.0, 0.0),
            }
        })?;
        out.accumulate_raw(raw.symmetrize());
    }
    Ok(out)
}

/// Number operator on the holomorphic side: level `(m, n)` scaled by `m`.
pub fn ou_l(f: &ChaosExpansion) -> ChaosExpansion {
    let mut out = ChaosExpansion::new(f.d());
    for ((m, _), kernel) in f.levels() {
        if m > 0 {
            out.accumulate_raw(kernel.scale(real(m as f64)));
        }
    }
    out
}

/// Number operator on the antiholomorphic side: level `(m, n)` scaled by `n`.
pub fn ou_lbar(f: &ChaosExpansion) -> ChaosExpansion {
    let mut out = ChaosExpansion::new(f.d());
    for ((_, n), kernel) in f.levels() {
        if n > 0 {
            out.accumulate_raw(kernel.scale(real(n as f64)));
        }
    }
    out
}

/// Ornstein-Uhlenbeck semigroup: level `(m, n)` scaled by
/// [`OUParams::level_factor`].
pub fn ou_semigroup(f: &ChaosExpansion, params: &OUParams) -> ChaosExpansion {
    let mut out = ChaosExpansion::new(f.d());
    for ((m, n), kernel) in f.levels() {
        out.accumulate_raw(kernel.scale(params.level_factor(m, n)));
    }
    out
}

/// Monte Carlo estimate of the semigroup action at a fixed outer point:
///
/// `(T_t P)(zeta) = E[P(e^{-rt} zeta + sqrt(1 - e^{-2t cos theta}) zeta')]`
///
/// over fresh standard draws `zeta'`, with `r = e^{i theta}`. Returns
/// the empirical mean and its standard error; deterministic in
/// `(samples, seed)` for any `workers` count.
pub fn mehler_estimate(
    p: &WickPoly,
    zeta: &[Complex64],
    params: &OUParams,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<(Complex64, f64), ChaosError> {
    if samples < 1_000 {
        return Err(ChaosError::BadParams(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    if zeta.len() != p.d() {
        return Err(ChaosError::DimensionMismatch {
            left: p.d(),
            right: zeta.len(),
        });
    }
    let d = p.d();
    let decay = (-params.r() * params.t()).exp();
    let sigma = (1.0 - (-2.0 * params.t() * params.theta().cos()).exp())
        .max(0.0)
        .sqrt();
    let compiled = p.compile();
    let outer: Vec<Complex64> = zeta.iter().map(|&z| decay * z).collect();
    let stats = sampling::mc_mean_vec(
        samples,
        seed,
        workers,
        sampling::DEFAULT_BLOCK,
        3,
        |rng, out| {
            let fresh = sampling::complex_vector(rng, d);
            let point: Vec<Complex64> = (0..d).map(|k| outer[k] + sigma * fresh[k]).collect();
            let v = compiled.eval_at(&point);
            out[0] += v.re;
            out[1] += v.im;
            out[2] += v.norm_sqr();
        },
    );
    let mean = Complex64::new(stats[0], stats[1]);
    let var = (stats[2] - mean.norm_sqr()).max(0.0);
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Exact `E|I_{m,n}(f)|^r` for even `r`, as a rational number.
pub fn abs_moment_exact(f: &Kernel, r: usize) -> Result<BigRational, ChaosError> {
    if r == 0 || r % 2 != 0 {
        return Err(ChaosError::BadParams(format!(
            "absolute moment order must be even and positive, got {r}"
        )));
    }
    let degree = r * (f.m() + f.n());
    if degree > DEGREE_CAP {
        return Err(ChaosError::DegreeTooLarge {
            degree,
            cap: DEGREE_CAP,
        });
    }
    let p = kernel_to_poly(f)?;
    let a = p.mul(&p.conj());
    let b = a.pow(r / 2 - 1);
    let value = b.expect_product(&a);
    debug_assert!(value.im.is_zero(), "absolute moment must be real");
    Ok(value.re)
}

/// Moment-growth margin `(r-1)^{(p+q)/2} (E|I|^2)^{1/2} - (E|I|^r)^{1/r}`;
/// nonnegative for every symmetric kernel and even `r >= 2`.
pub fn hypercontractivity_margin(f: &Kernel, r: usize) -> Result<f64, ChaosError> {
    let e2 = abs_moment_exact(f, 2)?.to_f64().expect("finite moment");
    let er = abs_moment_exact(f, r)?.to_f64().expect("finite moment");
    let halves = (f.m() + f.n()) as f64 / 2.0;
    Ok((r as f64 - 1.0).powf(halves) * e2.sqrt() - er.powf(1.0 / r as f64))
}

/// Map a kernel to the chaos expansion of its raw monomial (trace)
/// integral: `S_{p,q}(f) = sum_k k! C(p,k) C(q,k) I_{p-k,q-k}(Tr^k f)`.
pub fn hu_meyer_forward(f: &Kernel) -> Result<ChaosExpansion, ChaosError> {
    check_symmetric(f)?;
    let (p, q) = (f.m(), f.n());
    let mut out = ChaosExpansion::new(f.d());
    for k in 0..=p.min(q) {
        let coeff = factorial_f64(k) * binomial_f64(p, k) * binomial_f64(q, k);
        out.accumulate_raw(f.trace_k(k)?.scale(real(coeff)));
    }
    Ok(out)
}

/// Trace-side expansion of a single chaos kernel: level `(p-k, q-k)`
/// carries `(-1)^k k! C(p,k) C(q,k) Tr^k f`.
pub type StratonovichExpansion = BTreeMap<(usize, usize), Kernel>;

pub fn hu_meyer_inverse(f: &Kernel) -> Result<StratonovichExpansion, ChaosError> {
    check_symmetric(f)?;
    let (p, q) = (f.m(), f.n());
    let mut out = StratonovichExpansion::new();
    for k in 0..=p.min(q) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = sign * factorial_f64(k) * binomial_f64(p, k) * binomial_f64(q, k);
        out.insert((p - k, q - k), f.trace_k(k)?.scale(real(coeff)));
    }
    Ok(out)
}

/// Interpret a trace-side expansion back in the chaos basis by applying
/// [`hu_meyer_forward`] levelwise; composing with [`hu_meyer_inverse`]
/// returns the original single-level expansion.
pub fn stratonovich_to_chaos(strat: &StratonovichExpansion) -> Result<ChaosExpansion, ChaosError> {
    let mut iter = strat.values();
    let Some(first) = iter.next() else {
        return Err(ChaosError::BadParams("empty trace expansion".into()));
    };
    let mut out = ChaosExpansion::new(first.d());
    for kernel in strat.values() {
        let part = hu_meyer_forward(kernel)?;
        for (_, k) in part.levels() {
            out.accumulate_raw(k.clone());
        }
    }
    Ok(out)
}

/// Exact raw monomial sum of `f` truncated to the first `n_basis`
/// coordinates: `sum_{p,q in [n_basis]^..} f[p;q] zeta^p conj(zeta)^q`.
/// At `n_basis = d` this is the polynomial of [`hu_meyer_forward`].
pub fn stratonovich_partial_sum(f: &Kernel, n_basis: usize) -> Result<WickPoly, ChaosError> {
    if n_basis > f.d() {
        return Err(ChaosError::BadParams(format!(
            "basis truncation {n_basis} exceeds dimension {}",
            f.d()
        )));
    }
    let d = f.d();
    let (m, n) = (f.m(), f.n());
    let mut out = WickPoly::zero(d);
    for_each_tuple(n_basis, m + n, |idx| {
        let (p, q) = idx.split_at(m);
        let v = f.get(p, q).expect("index in range");
        if v == Complex64::new(0.0, 0.0) {
            return;
        }
        let mut a = vec![0u32; d];
        let mut b = vec![0u32; d];
        for &k in p {
            a[k] += 1;
        }
        for &k in q {
            b[k] += 1;
        }
        out.add_term(a, b, CRat::from_complex(v).expect("finite coefficient"));
    });
    Ok(out)
}

/// Norms of the order-one cross contractions that decide independence.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    /// `(label, norm)` for each contraction that exists for these ranks.
    pub norms: Vec<(&'static str, f64)>,
    pub independent: bool,
}

/// Two multiple integrals `I(f)`, `I(g)` are independent iff every
/// defined order-one contraction of `f` against both `g` and
/// `reversed_conjugate(g)` vanishes.
pub fn independence_test(f: &Kernel, g: &Kernel) -> Result<IndependenceReport, ChaosError> {
    if f.d() != g.d() {
        return Err(ChaosError::DimensionMismatch {
            left: f.d(),
            right: g.d(),
        });
    }
    if f.m() + f.n() == 0 || g.m() + g.n() == 0 {
        return Err(ChaosError::BadParams(
            "independence criterion needs nonconstant integrals".into(),
        ));
    }
    let h = g.reversed_conjugate();
    let (a, b) = (f.m(), f.n());
    let (c, dd) = (g.m(), g.n());
    let mut norms = Vec::new();
    if a >= 1 && dd >= 1 {
        norms.push(("f x_{1,0} g", f.contract(g, 1, 0)?.norm()));
    }
    if b >= 1 && c >= 1 {
        norms.push(("f x_{0,1} g", f.contract(g, 0, 1)?.norm()));
    }
    // h has type (dd, c).
    if a >= 1 && c >= 1 {
        norms.push(("f x_{1,0} conj-rev g", f.contract(&h, 1, 0)?.norm()));
    }
    if b >= 1 && dd >= 1 {
        norms.push(("f x_{0,1} conj-rev g", f.contract(&h, 0, 1)?.norm()));
    }
    let independent = norms.iter().all(|&(_, n)| n <= INDEPENDENCE_TOL);
    Ok(IndependenceReport {
        norms,
        independent,
    })
}
