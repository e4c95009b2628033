//! Randomized property checks across module boundaries. These are
//! cheaper and broader than the acceptance checklist: each property
//! holds for *every* generated input, not just curated fixtures.

use num_complex::Complex64;
use proptest::prelude::*;

use chaoskit::chaos::{kernel_to_poly, ou_semigroup, product_pair, ChaosExpansion, OUParams};
use chaoskit::combin::factorial_f64;
use chaoskit::hermite::{gf_partial_sum, poly_j};
use chaoskit::process::{phi_gram, GridSpec, OUModel};
use chaoskit::tensor::Kernel;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A dense kernel of shape `(d, m, n)` filled from a flat entry list,
/// cycling if the list is shorter than the coefficient table.
fn kernel_from_list(d: usize, m: usize, n: usize, raw: &[(f64, f64)]) -> Kernel {
    let mut flat = 0usize;
    Kernel::from_fn(d, m, n, |_, _| {
        let (re, im) = raw[flat % raw.len()];
        flat += 1;
        c(re, im)
    })
    .expect("shape is valid by construction")
}

/// Shape parameters kept at desk scale.
fn shape_strategy() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=3, 0usize..=2, 0usize..=2).prop_filter("nonconstant", |&(_, m, n)| m + n >= 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Swapping the two indices of a complex Hermite polynomial
    /// conjugates its values: the coefficient table is real.
    #[test]
    fn hermite_index_swap_conjugates(
        m in 0usize..=5,
        n in 0usize..=5,
        zre in -2.0f64..2.0,
        zim in -2.0f64..2.0,
        rho in 0.25f64..3.0,
    ) {
        let z = c(zre, zim);
        let a = poly_j(m, n).unwrap().eval(z, rho);
        let b = poly_j(n, m).unwrap().eval(z, rho);
        let scale = a.norm().max(1.0);
        prop_assert!((a - b.conj()).norm() <= 1e-9 * scale);
    }

    /// Near the origin the truncated generating function converges
    /// fast; order 20 is already at roundoff.
    #[test]
    fn generating_function_small_argument(
        lre in -0.5f64..0.5,
        lim in -0.5f64..0.5,
        zre in -1.5f64..1.5,
        zim in -1.5f64..1.5,
        rho in 0.5f64..2.0,
    ) {
        let lambda = c(lre, lim);
        let z = c(zre, zim);
        let closed = (lambda * z.conj() + lambda.conj() * z - rho * lambda.norm_sqr()).exp();
        let partial = gf_partial_sum(lambda, z, rho, 20, 20);
        prop_assert!((closed - partial).norm() <= 1e-9);
    }

    /// Fixture JSON round-trips every kernel bit for bit.
    #[test]
    fn kernel_json_round_trip(
        (d, m, n) in shape_strategy(),
        seed_entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81),
    ) {
        let f = kernel_from_list(d, m, n, &seed_entries);
        let back = Kernel::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(back.max_abs_diff(&f).unwrap(), 0.0);
    }

    /// Symmetrization is a projection: applying it twice changes
    /// nothing beyond the first application's roundoff.
    #[test]
    fn symmetrize_idempotent((d, m, n) in shape_strategy(), raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81)) {
        let f = kernel_from_list(d, m, n, &raw);
        let once = f.symmetrize();
        let twice = once.symmetrize();
        prop_assert!(twice.max_abs_diff(&once).unwrap() <= 1e-13);
    }

    /// The kernel pairing is Hermitian.
    #[test]
    fn inner_product_hermitian((d, m, n) in shape_strategy(), raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 162)) {
        let len = d.pow((m + n) as u32);
        let f = kernel_from_list(d, m, n, &raw[..81]);
        let g = kernel_from_list(d, m, n, &raw[81..]);
        let fg = f.inner(&g).unwrap();
        let gf = g.inner(&f).unwrap();
        prop_assert!((fg - gf.conj()).norm() <= 1e-12 * (1.0 + fg.norm()) * len as f64);
    }

    /// `E[p conj(p)]` is a nonnegative real rational, exactly.
    #[test]
    fn second_moment_is_nonnegative_real((d, m, n) in shape_strategy(), raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81)) {
        let f = kernel_from_list(d, m, n, &raw).symmetrize();
        let p = kernel_to_poly(&f).unwrap();
        let moment = p.expect_product(&p.conj());
        prop_assert!(moment.im == num_rational::BigRational::from_integer(0.into()));
        prop_assert!(moment.re >= num_rational::BigRational::from_integer(0.into()));
    }

    /// Isometry against the exact oracle on arbitrary dense kernels
    /// (the acceptance suite pins this on symmetric fixtures; here the
    /// symmetrization happens implicitly inside the integral).
    #[test]
    fn isometry_on_symmetrized_kernels((d, m, n) in shape_strategy(), raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81)) {
        let f = kernel_from_list(d, m, n, &raw).symmetrize();
        let p = kernel_to_poly(&f).unwrap();
        let got = p.expect_product(&p.conj()).to_complex();
        let want = factorial_f64(m) * factorial_f64(n) * f.inner(&f).unwrap();
        prop_assert!((got - want).norm() <= 1e-10 * (1.0 + want.norm()));
    }

    /// Chaos levels produced by the product formula never exceed the
    /// additive rank bound and alternate down in steps of one.
    #[test]
    fn product_levels_within_rank_bounds(
        d in 1usize..=2,
        m1 in 0usize..=2, n1 in 0usize..=2,
        m2 in 0usize..=2, n2 in 0usize..=2,
        raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 162),
    ) {
        prop_assume!(m1 + n1 >= 1 && m2 + n2 >= 1);
        let f = kernel_from_list(d, m1, n1, &raw[..81]).symmetrize();
        let g = kernel_from_list(d, m2, n2, &raw[81..]).symmetrize();
        let prod = product_pair(&f, &g).unwrap();
        for ((m, n), _) in prod.levels() {
            prop_assert!(m <= m1 + m2 && n <= n1 + n2);
            // Contractions remove matched holomorphic/antiholomorphic
            // pairs, so the two deficits agree.
            prop_assert_eq!((m1 + m2 - m) as i64, (n1 + n2 - n) as i64);
        }
    }

    /// Zero time is the identity of the OU semigroup, exactly.
    #[test]
    fn ou_semigroup_at_zero_is_identity(
        theta in -1.5f64..1.5,
        (d, m, n) in shape_strategy(),
        raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 81),
    ) {
        let f = kernel_from_list(d, m, n, &raw).symmetrize();
        let mut e = ChaosExpansion::new(d);
        e.accumulate(f.clone()).unwrap();
        let params = OUParams::new(theta, 0.0).unwrap();
        let back = ou_semigroup(&e, &params);
        prop_assert_eq!(back.project(m, n).unwrap().max_abs_diff(&f).unwrap(), 0.0);
    }

    /// The covariance Gram of the grid embedding always sums to
    /// `T^{2H}` — the variance of the endpoint value.
    #[test]
    fn gram_total_mass(
        t in 0.5f64..4.0,
        steps in 2usize..=40,
        hurst in 0.5f64..0.95,
    ) {
        let grid = GridSpec::new(t, steps).unwrap();
        let g = phi_gram(&grid, hurst).unwrap();
        let mut total = 0.0;
        for j in 0..steps {
            for k in 0..steps {
                total += g[(j, k)];
            }
        }
        let want = t.powf(2.0 * hurst);
        prop_assert!((total - want).abs() <= 1e-8 * want);
    }

    /// Constructor validation never panics, whatever the floats are.
    #[test]
    fn constructors_never_panic(
        horizon in proptest::num::f64::ANY,
        steps in proptest::num::usize::ANY,
        lambda in proptest::num::f64::ANY,
        omega in proptest::num::f64::ANY,
        a in proptest::num::f64::ANY,
        hurst in proptest::num::f64::ANY,
    ) {
        let _ = GridSpec::new(horizon, steps);
        let _ = OUModel::new(lambda, omega, a, hurst, c(omega, a));
        let _ = OUParams::new(lambda, a);
    }
}
