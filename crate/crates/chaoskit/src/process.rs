//! Complex (fractional) Brownian motion, the complex fractional
//! Ornstein-Uhlenbeck process, and its least-squares drift estimator.
//!
//! The model is `dZ_t = -gamma Z_t dt + sqrt(a) d zeta_t` with
//! `gamma = lambda - i omega`, `lambda > 0`, driven by a complex
//! fractional Brownian motion `zeta = (B^1 + i B^2)/sqrt(2)` of Hurst
//! index `H in [1/2, 3/4)`, so that `E|zeta_t|^2 = t^{2H}` and
//! `E[zeta_t^2] = 0`.
//!
//! The drift estimator is the least-squares ratio
//! `gamma_hat = -(integral of conj(Z) dZ) / (integral of |Z|^2 dt)`.
//! Substituting the model equation gives the error representation
//! `sqrt(T)(gamma_hat - gamma) = -sqrt(a) * (T^{-1/2} integral of
//! conj(Z_t) delta zeta_t) / ((1/T) integral of |Z_t|^2 dt)`, whose
//! numerator is (for `Z_0 = 0`) the second-chaos integral `sqrt(a) *
//! I_{1,1}(f_T)` of the kernel
//!
//! ```text
//! f_T(s, r) = T^{-1/2} exp(-conj(gamma)(s - r)) 1_{0 <= r <= s <= T},
//! ```
//!
//! with `s` the unconjugated and `r` the conjugated argument. This
//! module discretizes that kernel on a uniform grid, embeds the grid
//! increments into i.i.d. coordinates through the Cholesky factor of
//! their Gram matrix, and evaluates the chaos integral on the same
//! Gaussian coordinates that drive the simulated path, so the two
//! routes to the estimation error can be compared on one sample.
//!
//! For `H = 1/2` the driving noise has independent increments and the
//! least-squares ratio is computed directly from the path (Itô sums);
//! for `H > 1/2` the pathwise ratio is biased and the numerator is
//! evaluated through the chaos representation instead (a divergence
//! integral: the streamed double sum minus its trace correction).
//!
//! A discrete Clark-Ocone decomposition for polynomial functionals of
//! the increments (Brownian case only) is provided as an exact
//! identity: `F = E[F] + sum_k M_k` where `M_k` is reconstructed from
//! conditional Malliavin derivatives of every order, and the
//! first-order integrands `E[d_k F | F_k]` are exposed separately.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::chaos::{eval_integral, ChaosError, IsonormalSample};
use crate::combin::factorial_big;
use crate::linalg::{cholesky_lower, LinAlgError, Mat};
use crate::moments::{chol2_psd, energy_distance, ENERGY_SUBSAMPLE_CAP};
use crate::polyfun::{CRat, WickPoly};
use crate::sampling::{complex_vector, rng_for};
use crate::tensor::{Kernel, TensorError};
use rand::Rng;

/// Hurst indices accepted by the process simulators and the estimator:
/// the Brownian case plus the long-memory window where the estimator's
/// chaos representation applies.
pub const HURST_MIN: f64 = 0.5;
/// Exclusive upper end of the accepted Hurst range.
pub const HURST_MAX: f64 = 0.75;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error(
        "increment Gram matrix is numerically singular at leading minor {index} \
         (smallest eigenvalue estimate {min_eigenvalue:.3e})"
    )]
    SingularGram { index: usize, min_eigenvalue: f64 },
    #[error("degenerate path: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Linalg(#[from] LinAlgError),
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Uniform grid `t_k = k T / N` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, ProcessError> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(ProcessError::BadParams(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(ProcessError::BadParams(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        Ok(GridSpec { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_k = k T / N` for `k = 0..=N`.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        self.horizon * k as f64 / self.steps as f64
    }
}

/// Parameters of the complex fractional Ornstein-Uhlenbeck model
/// `dZ_t = -gamma Z_t dt + sqrt(a) d zeta_t`, `gamma = lambda - i omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OUModel {
    lambda: f64,
    omega: f64,
    a: f64,
    hurst: f64,
    z0_re: f64,
    z0_im: f64,
}

impl OUModel {
    /// `lambda > 0`; `a >= 0` (zero noise gives the deterministic
    /// decay, useful as an exactness fixture); `hurst` in
    /// `[1/2, 3/4)`.
    pub fn new(
        lambda: f64,
        omega: f64,
        a: f64,
        hurst: f64,
        z0: Complex64,
    ) -> Result<Self, ProcessError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ProcessError::BadParams(format!(
                "drift real part lambda must be positive and finite, got {lambda}"
            )));
        }
        if !omega.is_finite() {
            return Err(ProcessError::BadParams(format!(
                "drift rotation omega must be finite, got {omega}"
            )));
        }
        if !a.is_finite() || a < 0.0 {
            return Err(ProcessError::BadParams(format!(
                "noise intensity must be nonnegative and finite, got {a}"
            )));
        }
        check_hurst_process(hurst)?;
        if !z0.re.is_finite() || !z0.im.is_finite() {
            return Err(ProcessError::BadParams(format!(
                "initial state must be finite, got {z0}"
            )));
        }
        Ok(OUModel {
            lambda,
            omega,
            a,
            hurst,
            z0_re: z0.re,
            z0_im: z0.im,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Noise intensity `a` multiplying the driving noise as `sqrt(a)`.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn z0(&self) -> Complex64 {
        Complex64::new(self.z0_re, self.z0_im)
    }

    /// `gamma = lambda - i omega`.
    pub fn gamma(&self) -> Complex64 {
        Complex64::new(self.lambda, -self.omega)
    }
}

fn check_hurst_process(hurst: f64) -> Result<(), ProcessError> {
    if !hurst.is_finite() || !(HURST_MIN..HURST_MAX).contains(&hurst) {
        return Err(ProcessError::BadParams(format!(
            "Hurst index must lie in [{HURST_MIN}, {HURST_MAX}), got {hurst}"
        )));
    }
    Ok(())
}

fn check_hurst_gram(hurst: f64) -> Result<(), ProcessError> {
    if !hurst.is_finite() || !(HURST_MIN..1.0).contains(&hurst) {
        return Err(ProcessError::BadParams(format!(
            "Gram matrix is defined for Hurst indices in [{HURST_MIN}, 1), got {hurst}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathKind {
    Fbm,
    Ou,
}

/// A sampled complex path on a uniform grid; `values[k]` is the state
/// at node `t_k`, so the vector has `steps + 1` entries and
/// `values[0]` is the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPath {
    pub grid: GridSpec,
    pub kind: PathKind,
    pub values: Vec<Complex64>,
}

/// Gram matrix of the grid-cell indicators `1_{[t_j, t_{j+1})}` under
/// the covariance inner product of fractional Brownian motion with
/// Hurst index `hurst`, i.e. the covariance matrix of the driving
/// increments:
///
/// ```text
/// G[j,k] = (|t_{j+1}-t_k|^{2H} + |t_j-t_{k+1}|^{2H}
///           - |t_j-t_k|^{2H} - |t_{j+1}-t_{k+1}|^{2H}) / 2.
/// ```
///
/// For `H = 1/2` this degenerates to `diag(dt)` (independent
/// increments). Off-diagonal entries equal the double integral of
/// `H(2H-1)|s-t|^{2H-2}` over the two cells; the total sum is
/// `T^{2H}`.
pub fn phi_gram(grid: &GridSpec, hurst: f64) -> Result<Mat, ProcessError> {
    check_hurst_gram(hurst)?;
    let n = grid.steps();
    let mut g = Mat::zeros(n, n);
    if hurst == 0.5 {
        let dt = grid.dt();
        for j in 0..n {
            g[(j, j)] = dt;
        }
        return Ok(g);
    }
    let two_h = 2.0 * hurst;
    let pw = |x: f64| x.abs().powf(two_h);
    for j in 0..n {
        for k in 0..=j {
            let v = 0.5
                * (pw(grid.node(j + 1) - grid.node(k)) + pw(grid.node(j) - grid.node(k + 1))
                    - pw(grid.node(j) - grid.node(k))
                    - pw(grid.node(j + 1) - grid.node(k + 1)));
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    Ok(g)
}

/// Estimate the smallest eigenvalue of a symmetric matrix by power
/// iteration on `c I - G` with `c` a Gershgorin upper bound. Used only
/// to annotate Cholesky failures; returns NaN for very large matrices.
fn min_eigenvalue_estimate(g: &Mat) -> f64 {
    let n = g.rows();
    if n == 0 || n > 4096 {
        return f64::NAN;
    }
    let mut c = f64::NEG_INFINITY;
    for j in 0..n {
        let mut row = 0.0;
        for k in 0..n {
            row += g[(j, k)].abs();
        }
        c = c.max(row);
    }
    // Random start vector so the iteration cannot begin orthogonal to
    // the dominant eigenspace of the shifted matrix.
    let mut rng = rng_for(0x6d69_6e65, 0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let start_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= start_norm;
    }
    let mut shifted_top = 0.0;
    for _ in 0..96 {
        let mut w = vec![0.0; n];
        for j in 0..n {
            let mut gv = 0.0;
            for k in 0..n {
                gv += g[(j, k)] * v[k];
            }
            w[j] = c * v[j] - gv;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return c;
        }
        shifted_top = norm;
        for j in 0..n {
            v[j] = w[j] / norm;
        }
    }
    c - shifted_top
}

fn cholesky_or_singular(g: &Mat) -> Result<Mat, ProcessError> {
    cholesky_lower(g).map_err(|e| match e {
        LinAlgError::NotPositiveDefinite { index } => ProcessError::SingularGram {
            index,
            min_eigenvalue: min_eigenvalue_estimate(g),
        },
        other => ProcessError::Linalg(other),
    })
}

/// Isometric embedding of grid step functions into `C^N` with the
/// standard inner product: if `G = L L^T` is the increment Gram
/// matrix, the map `v -> L^T v` satisfies
/// `<f, g>_phi = <L^T f, L^T g>` for all step functions, and `xi ->
/// L xi` maps i.i.d. standard coordinates to increments with the
/// correct joint law.
#[derive(Debug, Clone)]
pub struct GramEmbed {
    l: Mat,
}

impl GramEmbed {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// The lower-triangular Cholesky factor `L` with `G = L L^T`.
    pub fn factor(&self) -> &Mat {
        &self.l
    }

    /// Coordinates `(L^T v)_p` of a step function with cell values `v`.
    pub fn embed(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "step function has wrong cell count");
        (0..n)
            .map(|p| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in p..n {
                    acc += self.l[(j, p)] * v[j];
                }
                acc
            })
            .collect()
    }

    /// Increment vector `(L xi)_j` generated by i.i.d. standard complex
    /// coordinates `xi`.
    pub fn increments(&self, xi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(xi.len(), n, "coordinate vector has wrong length");
        (0..n)
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..=j {
                    acc += self.l[(j, p)] * xi[p];
                }
                acc
            })
            .collect()
    }

    /// Embedded matrix `L^T A L` of a two-argument cell kernel `A`
    /// (row index = unconjugated argument, column = conjugated), given
    /// row-major. The result represents the same second-chaos element
    /// in the i.i.d. coordinates.
    pub fn embed_matrix(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(a.len(), n * n, "cell kernel has wrong size");
        // t = A L, then L^T t.
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for q in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in q..n {
                    acc += a[j * n + k] * self.l[(k, q)];
                }
                t[j * n + q] = acc;
            }
        }
        let mut b = vec![Complex64::new(0.0, 0.0); n * n];
        for p in 0..n {
            for q in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in p..n {
                    acc += self.l[(j, p)] * t[j * n + q];
                }
                b[p * n + q] = acc;
            }
        }
        b
    }
}

/// Cholesky embedding of the increment Gram matrix; fails with a
/// smallest-eigenvalue report when the matrix is numerically singular.
pub fn gram_embed(grid: &GridSpec, hurst: f64) -> Result<GramEmbed, ProcessError> {
    let g = phi_gram(grid, hurst)?;
    let l = cholesky_or_singular(&g)?;
    Ok(GramEmbed { l })
}

/// Sample a complex fractional Brownian motion `zeta = (B^1 + i
/// B^2)/sqrt(2)` exactly on the grid nodes: the two independent real
/// components are drawn through the Cholesky factor of the node
/// covariance `(s^{2H} + t^{2H} - |s-t|^{2H})/2`, so `E|zeta_t|^2 =
/// t^{2H}` and `E[zeta_t^2] = 0`.
pub fn simulate_cfbm(grid: &GridSpec, hurst: f64, seed: u64) -> Result<ComplexPath, ProcessError> {
    check_hurst_process(hurst)?;
    let n = grid.steps();
    let two_h = 2.0 * hurst;
    let pw = |x: f64| x.abs().powf(two_h);
    let mut cov = Mat::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let (s, t) = (grid.node(j + 1), grid.node(k + 1));
            let v = 0.5 * (pw(s) + pw(t) - pw(s - t));
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }
    let l = cholesky_or_singular(&cov)?;
    let mut rng = rng_for(seed, 0);
    let g1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let g2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut values = Vec::with_capacity(n + 1);
    values.push(Complex64::new(0.0, 0.0));
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for p in 0..=j {
            b1 += l[(j, p)] * g1[p];
            b2 += l[(j, p)] * g2[p];
        }
        values.push(Complex64::new(b1 * inv_sqrt2, b2 * inv_sqrt2));
    }
    Ok(ComplexPath {
        grid: *grid,
        kind: PathKind::Fbm,
        values,
    })
}

/// Per-(model, grid) state shared by every replica: the Gram Cholesky
/// factor (absent in the Brownian case, where it is `sqrt(dt) I`) and
/// the trace correction of the divergence quadratic form.
struct EstimatorContext<'a> {
    model: &'a OUModel,
    grid: &'a GridSpec,
    embed: Option<GramEmbed>,
    /// `sum_{j>k} exp(-conj(gamma)(t_j - t_k)) G[j,k]`; zero for
    /// `H = 1/2` where the kernel support misses the diagonal Gram.
    trace_corr: Complex64,
}

fn estimator_context<'a>(
    model: &'a OUModel,
    grid: &'a GridSpec,
) -> Result<EstimatorContext<'a>, ProcessError> {
    if model.hurst() == 0.5 {
        return Ok(EstimatorContext {
            model,
            grid,
            embed: None,
            trace_corr: Complex64::new(0.0, 0.0),
        });
    }
    let g = phi_gram(grid, model.hurst())?;
    let l = cholesky_or_singular(&g)?;
    let n = grid.steps();
    let dt = grid.dt();
    let gb = model.gamma().conj();
    let step_decay = (-gb * dt).exp();
    let mut trace_corr = Complex64::new(0.0, 0.0);
    for j in 1..n {
        // e^{-conj(gamma)(t_j - t_k)} for k < j, accumulated by k.
        let mut w = step_decay;
        for k in (0..j).rev() {
            trace_corr += w * g[(j, k)];
            w *= step_decay;
        }
    }
    Ok(EstimatorContext {
        model,
        grid,
        embed: Some(GramEmbed { l }),
        trace_corr,
    })
}

impl EstimatorContext<'_> {
    /// Increment vector driven by i.i.d. coordinates `xi`.
    fn increments(&self, xi: &[Complex64]) -> Vec<Complex64> {
        match &self.embed {
            None => {
                let s = self.grid.dt().sqrt();
                xi.iter().map(|&z| s * z).collect()
            }
            Some(e) => e.increments(xi),
        }
    }

    /// OU path on the grid driven by the given coordinates/increments.
    ///
    /// Brownian case: the exact Gaussian transition `Z_{k+1} =
    /// e^{-gamma dt} Z_k + sigma xi_k` with `sigma^2 = a (1 -
    /// e^{-2 lambda dt}) / (2 lambda)`. Long-memory case: the
    /// left-point Riemann-Stieltjes step `Z_{k+1} = e^{-gamma dt}(Z_k +
    /// sqrt(a) d zeta_k)`.
    fn path_values(&self, xi: &[Complex64], increments: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let gamma = self.model.gamma();
        let decay = (-gamma * dt).exp();
        let mut values = Vec::with_capacity(n + 1);
        values.push(self.model.z0());
        if self.model.hurst() == 0.5 {
            let lambda = self.model.lambda();
            let sigma = (self.model.a() * (-(-2.0 * lambda * dt).exp_m1()) / (2.0 * lambda)).sqrt();
            for k in 0..n {
                let next = decay * values[k] + sigma * xi[k];
                values.push(next);
            }
        } else {
            let sqrt_a = self.model.a().sqrt();
            for k in 0..n {
                let next = decay * (values[k] + sqrt_a * increments[k]);
                values.push(next);
            }
        }
        values
    }
}

/// `(1/T)` times the trapezoid-rule integral of `|Z_t|^2`.
fn mean_square_trapezoid(values: &[Complex64], grid: &GridSpec) -> f64 {
    let n = grid.steps();
    let mut acc = 0.5 * (values[0].norm_sqr() + values[n].norm_sqr());
    for v in &values[1..n] {
        acc += v.norm_sqr();
    }
    acc * grid.dt() / grid.horizon()
}

/// Streamed evaluation of the divergence quadratic form
/// `sum_{j>k} e^{-conj(gamma)(t_j - t_k)} dz_j conj(dz_k)` in `O(N)`
/// via the stable prefix recursion `S_{j+1} = e^{-conj(gamma) dt}(S_j
/// + conj(dz_j))`.
fn lower_exponential_form(gamma: Complex64, dt: f64, increments: &[Complex64]) -> Complex64 {
    let decay = (-gamma.conj() * dt).exp();
    let mut s = Complex64::new(0.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    for dz in increments {
        q += dz * s;
        s = decay * (s + dz.conj());
    }
    q
}

/// The two routes to the scaled estimation error `sqrt(T)(gamma_hat -
/// gamma)` on one sample, evaluated on the same Gaussian coordinates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct I11Report {
    /// Second-chaos integral `I_{1,1}` of the embedded kernel
    /// `T^{-1/2} e^{-conj(gamma)(s-r)} 1_{r<s}` (trace-corrected
    /// streamed form).
    pub i11_re: f64,
    pub i11_im: f64,
    /// Trapezoid average `(1/T) integral |Z_t|^2 dt` of the simulated
    /// path.
    pub denominator: f64,
    /// `sqrt(T)(gamma_hat - gamma)` through the chaos representation
    /// of the numerator (divergence route; includes the initial-state
    /// first-chaos term, so it is exact in continuous time for any
    /// starting point).
    pub sqrt_t_error_chaos_re: f64,
    pub sqrt_t_error_chaos_im: f64,
    /// The implied estimate `gamma - sqrt(a) * numerator / integral`.
    pub gamma_hat_chaos_re: f64,
    pub gamma_hat_chaos_im: f64,
    /// Direct least-squares ratio from the path (Brownian case only).
    pub gamma_hat_lse_re: Option<f64>,
    pub gamma_hat_lse_im: Option<f64>,
}

impl I11Report {
    pub fn i11(&self) -> Complex64 {
        Complex64::new(self.i11_re, self.i11_im)
    }

    pub fn sqrt_t_error_chaos(&self) -> Complex64 {
        Complex64::new(self.sqrt_t_error_chaos_re, self.sqrt_t_error_chaos_im)
    }

    pub fn gamma_hat_chaos(&self) -> Complex64 {
        Complex64::new(self.gamma_hat_chaos_re, self.gamma_hat_chaos_im)
    }

    pub fn gamma_hat_lse(&self) -> Option<Complex64> {
        match (self.gamma_hat_lse_re, self.gamma_hat_lse_im) {
            (Some(re), Some(im)) => Some(Complex64::new(re, im)),
            _ => None,
        }
    }

    /// Relative disagreement of the two error routes, when both exist.
    pub fn route_gap(&self, gamma: Complex64, horizon: f64) -> Option<f64> {
        let lse = self.gamma_hat_lse()?;
        let lse_err = horizon.sqrt() * (lse - gamma);
        let chaos_err = self.sqrt_t_error_chaos();
        Some((chaos_err - lse_err).norm() / lse_err.norm().max(f64::EPSILON))
    }
}

fn replica_report(ctx: &EstimatorContext<'_>, xi: &[Complex64]) -> Result<I11Report, ProcessError> {
    let grid = ctx.grid;
    let model = ctx.model;
    let n = grid.steps();
    assert_eq!(xi.len(), n, "coordinate vector has wrong length");
    let gamma = model.gamma();
    let dt = grid.dt();
    let sqrt_t = grid.horizon().sqrt();

    let increments = ctx.increments(xi);
    let values = ctx.path_values(xi, &increments);
    let denominator = mean_square_trapezoid(&values, grid);
    if denominator == 0.0 {
        return Err(ProcessError::Degenerate(
            "path is identically zero (zero noise and zero initial state); \
             the least-squares ratio is undefined"
                .into(),
        ));
    }

    // Divergence numerator: integral of conj(Z) against the noise.
    //   conj(Z_t) = conj(z0) e^{-conj(gamma) t} + sqrt(a) * (kernel part)
    let q = lower_exponential_form(gamma, dt, &increments);
    let raw = q - ctx.trace_corr;
    let i11 = raw / sqrt_t;
    let gb = gamma.conj();
    let mut d1 = Complex64::new(0.0, 0.0);
    let mut w = Complex64::new(1.0, 0.0);
    let step_decay = (-gb * dt).exp();
    for dz in &increments {
        d1 += w * dz;
        w *= step_decay;
    }
    let sqrt_a = model.a().sqrt();
    let numerator = sqrt_a * (model.z0().conj() * d1 + sqrt_a * raw);
    let int_z2 = denominator * grid.horizon();
    let gamma_hat_chaos = gamma - numerator / int_z2;
    let err_chaos = sqrt_t * (gamma_hat_chaos - gamma);

    let (lse_re, lse_im) = if model.hurst() == 0.5 {
        let path = ComplexPath {
            grid: *grid,
            kind: PathKind::Ou,
            values,
        };
        let g = lse_estimate(&path, 0.5)?;
        (Some(g.re), Some(g.im))
    } else {
        (None, None)
    };

    Ok(I11Report {
        i11_re: i11.re,
        i11_im: i11.im,
        denominator,
        sqrt_t_error_chaos_re: err_chaos.re,
        sqrt_t_error_chaos_im: err_chaos.im,
        gamma_hat_chaos_re: gamma_hat_chaos.re,
        gamma_hat_chaos_im: gamma_hat_chaos.im,
        gamma_hat_lse_re: lse_re,
        gamma_hat_lse_im: lse_im,
    })
}

/// Simulate the complex (fractional) Ornstein-Uhlenbeck path on the
/// grid. Brownian case: exact Gaussian transitions. `H > 1/2`:
/// left-point Riemann-Stieltjes steps against exactly-sampled
/// fractional increments.
pub fn simulate_cou(
    model: &OUModel,
    grid: &GridSpec,
    seed: u64,
) -> Result<ComplexPath, ProcessError> {
    let ctx = estimator_context(model, grid)?;
    let mut rng = rng_for(seed, 0);
    let xi = complex_vector(&mut rng, grid.steps());
    let increments = ctx.increments(&xi);
    Ok(ComplexPath {
        grid: *grid,
        kind: PathKind::Ou,
        values: ctx.path_values(&xi, &increments),
    })
}

/// Least-squares drift estimate from a sampled path (Itô sums):
/// `gamma_hat = -(sum_k conj(Z_k)(Z_{k+1} - Z_k)) / (sum_k |Z_k|^2 dt)`.
///
/// Valid only in the Brownian case; for `H > 1/2` the forward sum in
/// the numerator is a biased discretization and [`i11_statistic`]
/// evaluates the estimator error through its chaos representation
/// instead.
pub fn lse_estimate(path: &ComplexPath, hurst: f64) -> Result<Complex64, ProcessError> {
    if hurst != 0.5 {
        return Err(ProcessError::BadParams(format!(
            "the direct least-squares ratio requires H = 1/2 exactly (got {hurst}); \
             for H > 1/2 use i11_statistic, which evaluates the error through \
             its second-chaos representation"
        )));
    }
    let n = path.grid.steps();
    if path.values.len() != n + 1 {
        return Err(ProcessError::BadParams(format!(
            "path has {} values but the grid has {} nodes",
            path.values.len(),
            n + 1
        )));
    }
    let dt = path.grid.dt();
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for k in 0..n {
        num -= path.values[k].conj() * (path.values[k + 1] - path.values[k]);
        den += path.values[k].norm_sqr() * dt;
    }
    if den == 0.0 {
        return Err(ProcessError::Degenerate(
            "path is identically zero over the grid interior; the least-squares \
             denominator vanishes"
                .into(),
        ));
    }
    Ok(num / den)
}

/// Draw one replica and evaluate both routes to the scaled estimation
/// error on the same Gaussian coordinates. Replica `r` of a seed `s`
/// experiment uses the coordinate stream `rng_for(s, r)`; this
/// function is replica 0.
pub fn i11_statistic(
    model: &OUModel,
    grid: &GridSpec,
    seed: u64,
) -> Result<I11Report, ProcessError> {
    let ctx = estimator_context(model, grid)?;
    let mut rng = rng_for(seed, 0);
    let xi = complex_vector(&mut rng, grid.steps());
    replica_report(&ctx, &xi)
}

/// Dense cross-check of the streamed chaos route: materialize the
/// embedded kernel `L^T A L` of `A[j,k] = T^{-1/2}
/// e^{-conj(gamma)(t_j - t_k)} 1_{k<j}` as a type-(1,1) kernel over
/// `C^N` and evaluate the chaos integral directly. Cost grows as
/// `N^2`; intended for small grids.
pub fn i11_via_kernel(
    model: &OUModel,
    grid: &GridSpec,
    xi: &[Complex64],
) -> Result<Complex64, ProcessError> {
    let n = grid.steps();
    if xi.len() != n {
        return Err(ProcessError::BadParams(format!(
            "coordinate vector has length {} but the grid has {} steps",
            xi.len(),
            n
        )));
    }
    let gb = model.gamma().conj();
    let sqrt_t = grid.horizon().sqrt();
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..j {
            a[j * n + k] = (-gb * (grid.node(j) - grid.node(k))).exp() / sqrt_t;
        }
    }
    let ahat = if model.hurst() == 0.5 {
        let dt = grid.dt();
        a.iter().map(|&v| v * dt).collect()
    } else {
        gram_embed(grid, model.hurst())?.embed_matrix(&a)
    };
    let mut kern = Kernel::zeros(n, 1, 1)?;
    for p in 0..n {
        for q in 0..n {
            kern.set(&[p], &[q], ahat[p * n + q])?;
        }
    }
    Ok(eval_integral(&kern, &IsonormalSample::new(xi.to_vec()))?)
}

/// One replica row of a drift-estimation experiment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftReplica {
    pub replica: usize,
    pub gamma_hat_re: f64,
    pub gamma_hat_im: f64,
    pub sqrt_t_error_re: f64,
    pub sqrt_t_error_im: f64,
}

/// Summary of a replicated drift-estimation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct DriftSummary {
    pub model: OUModel,
    pub grid: GridSpec,
    pub replicas: usize,
    pub mean_gamma_hat_re: f64,
    pub mean_gamma_hat_im: f64,
    /// Standard errors of the replica means, componentwise.
    pub se_re: f64,
    pub se_im: f64,
    /// `|mean gamma_hat - gamma|`.
    pub bias_abs: f64,
    /// Energy distance between the cloud of scaled errors and a
    /// centered Gaussian with the cloud's own second moments
    /// (diagnostic; small values mean the error looks Gaussian).
    pub normality_distance: f64,
    pub rows: Vec<DriftReplica>,
}

/// Run `replicas` independent estimation replicas (coordinate stream
/// `r` of `seed` for replica `r`) and summarize. In the Brownian case
/// the reported estimate is the direct least-squares ratio; for
/// `H > 1/2` it is the chaos-route estimate.
pub fn drift_experiment(
    model: &OUModel,
    grid: &GridSpec,
    replicas: usize,
    seed: u64,
) -> Result<DriftSummary, ProcessError> {
    if replicas < 2 {
        return Err(ProcessError::BadParams(format!(
            "experiment needs at least 2 replicas, got {replicas}"
        )));
    }
    let ctx = estimator_context(model, grid)?;
    let n = grid.steps();
    let mut rows = Vec::with_capacity(replicas);
    let sqrt_t = grid.horizon().sqrt();
    let gamma = model.gamma();
    for r in 0..replicas {
        let mut rng = rng_for(seed, r as u64);
        let xi = complex_vector(&mut rng, n);
        let rep = replica_report(&ctx, &xi)?;
        let gamma_hat = rep.gamma_hat_lse().unwrap_or_else(|| rep.gamma_hat_chaos());
        let err = sqrt_t * (gamma_hat - gamma);
        rows.push(DriftReplica {
            replica: r,
            gamma_hat_re: gamma_hat.re,
            gamma_hat_im: gamma_hat.im,
            sqrt_t_error_re: err.re,
            sqrt_t_error_im: err.im,
        });
    }

    let nf = replicas as f64;
    let mean_re = rows.iter().map(|r| r.gamma_hat_re).sum::<f64>() / nf;
    let mean_im = rows.iter().map(|r| r.gamma_hat_im).sum::<f64>() / nf;
    let var_re = rows
        .iter()
        .map(|r| (r.gamma_hat_re - mean_re).powi(2))
        .sum::<f64>()
        / (nf - 1.0);
    let var_im = rows
        .iter()
        .map(|r| (r.gamma_hat_im - mean_im).powi(2))
        .sum::<f64>()
        / (nf - 1.0);
    let bias = Complex64::new(mean_re - gamma.re, mean_im - gamma.im);

    // Normality diagnostic on the scaled-error cloud against a
    // centered Gaussian with matching second moments.
    let s = replicas.min(ENERGY_SUBSAMPLE_CAP);
    let cloud: Vec<[f64; 2]> = rows[..s]
        .iter()
        .map(|r| [r.sqrt_t_error_re, r.sqrt_t_error_im])
        .collect();
    let c11 = cloud.iter().map(|p| p[0] * p[0]).sum::<f64>() / s as f64;
    let c12 = cloud.iter().map(|p| p[0] * p[1]).sum::<f64>() / s as f64;
    let c22 = cloud.iter().map(|p| p[1] * p[1]).sum::<f64>() / s as f64;
    let chol = chol2_psd(c11, c12, c22);
    let mut ref_rng = rng_for(seed, (1u64 << 32) + 1);
    let reference: Vec<[f64; 2]> = (0..s)
        .map(|_| {
            let g0: f64 = ref_rng.sample(StandardNormal);
            let g1: f64 = ref_rng.sample(StandardNormal);
            [
                chol[0][0] * g0,
                chol[1][0] * g0 + chol[1][1] * g1,
            ]
        })
        .collect();
    let normality_distance = energy_distance(&cloud, &reference);

    Ok(DriftSummary {
        model: *model,
        grid: *grid,
        replicas,
        mean_gamma_hat_re: mean_re,
        mean_gamma_hat_im: mean_im,
        se_re: (var_re / nf).sqrt(),
        se_im: (var_im / nf).sqrt(),
        bias_abs: bias.norm(),
        normality_distance,
        rows,
    })
}

/// Exact discrete Clark-Ocone decomposition of a polynomial functional
/// of independent complex Gaussian increments (Brownian case).
///
/// With `T_k = E[F | xi_0..xi_k]` (exact tail integration), the
/// martingale difference `M_k = T_k - T_{k-1}` is reconstructed here
/// from conditional Malliavin derivatives: expanding `T_k` in the
/// orthogonal basis `J_{alpha,beta}(xi_k, 1)` of its newest variable,
///
/// ```text
/// M_k = sum_{(alpha,beta) != 0} q_{alpha,beta} J_{alpha,beta}(xi_k, 1),
/// q_{alpha,beta} = E[ d_k^alpha dbar_k^beta T_k | xi_0..xi_{k-1} ] / (alpha! beta!),
/// ```
///
/// so that `F = E[F] + sum_k M_k` holds identically. The first-order
/// coefficients are the predictable integrands of the martingale
/// representation: `integrand_d[k] = E[d_k F | xi_0..xi_{k-1}]` (and
/// conjugate-derivative analog), i.e. the conditional Malliavin
/// derivative at the step, expressed in coordinate scaling (multiply
/// by `dt^{-1/2}` to convert a derivative in the increment to one in
/// the coordinate).
#[derive(Debug, Clone)]
pub struct ClarkOconeParts {
    /// `E[F]`, exact.
    pub mean: CRat,
    /// Martingale differences `M_k`, polynomials in `xi_0..xi_k`.
    pub martingale_terms: Vec<WickPoly>,
    /// `E[d_k F | xi_0..xi_{k-1}]`.
    pub integrand_d: Vec<WickPoly>,
    /// `E[dbar_k F | xi_0..xi_{k-1}]`.
    pub integrand_dbar: Vec<WickPoly>,
}

/// `J_{a,b}(xi_k, 1)` as an exact polynomial in coordinate `k`, built
/// from the degree recursion `J_{a+1,b} = z J_{a,b} - b J_{a,b-1}`.
fn j_basis_poly(d: usize, k: usize, a: usize, b: usize) -> WickPoly {
    let mut row: Vec<WickPoly> = (0..=b).map(|j| WickPoly::var_bar(d, k).pow(j)).collect();
    for _ in 0..a {
        let z = WickPoly::var(d, k);
        let mut next = Vec::with_capacity(b + 1);
        for (j, cur) in row.iter().enumerate() {
            let mut t = cur.mul(&z);
            if j > 0 {
                t = t.sub(&row[j - 1].scale(&CRat::from_int(j as i64)));
            }
            next.push(t);
        }
        row = next;
    }
    row.pop().expect("row is nonempty")
}

/// Decompose a polynomial functional of the grid increments into its
/// exact discrete Clark-Ocone parts. The polynomial must be expressed
/// in the i.i.d. embedded coordinates (one per grid cell), and the
/// Brownian case `H = 1/2` is required: conditioning on the past is
/// exact tail integration only when the increments are independent.
pub fn clark_ocone_decompose(
    p: &WickPoly,
    grid: &GridSpec,
    hurst: f64,
) -> Result<ClarkOconeParts, ProcessError> {
    if hurst != 0.5 {
        return Err(ProcessError::BadParams(format!(
            "the discrete Clark-Ocone identity is implemented for H = 1/2 only \
             (got {hurst}): for correlated fractional increments the conditional \
             expectation is not a coordinate tail integral"
        )));
    }
    if p.d() != grid.steps() {
        return Err(ProcessError::BadParams(format!(
            "polynomial is over {} coordinates but the grid has {} cells",
            p.d(),
            grid.steps()
        )));
    }
    let d = p.d();
    let mean = p.expect_gaussian();
    let mut martingale_terms = Vec::with_capacity(d);
    let mut integrand_d = Vec::with_capacity(d);
    let mut integrand_dbar = Vec::with_capacity(d);
    for k in 0..d {
        let t_k = p.integrate_from(k + 1);
        let mut m_k = WickPoly::zero(d);
        let mut da = t_k.clone();
        let mut alpha = 0usize;
        while !da.is_zero() {
            let mut dab = da.clone();
            let mut beta = 0usize;
            while !dab.is_zero() {
                if alpha + beta > 0 {
                    let q = dab.integrate_var(k);
                    if !q.is_zero() {
                        let weight = CRat {
                            re: BigRational::new(
                                BigInt::one(),
                                factorial_big(alpha) * factorial_big(beta),
                            ),
                            im: BigRational::zero(),
                        };
                        m_k = m_k.add(&q.scale(&weight).mul(&j_basis_poly(d, k, alpha, beta)));
                    }
                }
                dab = dab.d_zbar(k);
                beta += 1;
            }
            da = da.d_z(k);
            alpha += 1;
        }
        integrand_d.push(t_k.d_z(k).integrate_var(k));
        integrand_dbar.push(t_k.d_zbar(k).integrate_var(k));
        martingale_terms.push(m_k);
    }
    Ok(ClarkOconeParts {
        mean,
        martingale_terms,
        integrand_d,
        integrand_dbar,
    })
}

/// Maximum of `|F - E[F] - sum_k M_k|` over `samples` random
/// coordinate draws, where the `M_k` are the Malliavin-reconstructed
/// martingale differences of [`clark_ocone_decompose`]. Identically
/// zero for polynomial functionals up to floating-point evaluation
/// error.
pub fn clark_ocone_residual(
    p: &WickPoly,
    grid: &GridSpec,
    hurst: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, ProcessError> {
    if samples == 0 {
        return Err(ProcessError::BadParams(
            "residual check needs at least one sample".into(),
        ));
    }
    let parts = clark_ocone_decompose(p, grid, hurst)?;
    let cf = p.compile();
    let cms: Vec<_> = parts.martingale_terms.iter().map(|m| m.compile()).collect();
    let mean = parts.mean.to_complex();
    let mut rng = rng_for(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let point = complex_vector(&mut rng, p.d());
        let mut resid = cf.eval_at(&point) - mean;
        for cm in &cms {
            resid -= cm.eval_at(&point);
        }
        worst = worst.max(resid.norm());
    }
    Ok(worst)
}
