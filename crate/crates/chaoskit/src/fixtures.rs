//! Deterministic test fixtures: seeded random symmetric kernels and
//! expansions, plus the named kernel sequences consumed by the CLI.
//!
//! Random kernels are built orbit by orbit (draw one value per sorted
//! index pair, copy it to every rearrangement), so they are exactly
//! symmetric — bit-for-bit fixed points of `Kernel::symmetrize`. The
//! integer-valued generators additionally keep every coefficient an
//! integer multiple of a caller-chosen scale, which keeps downstream
//! contraction/symmetrization arithmetic exact in `f64`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosExpansion;
use crate::tensor::{for_each_multiset, for_each_tuple, Kernel, TensorError};

fn fill_orbits(
    d: usize,
    m: usize,
    n: usize,
    mut draw: impl FnMut() -> Complex64,
) -> Kernel {
    let mut kernel = Kernel::zeros(d, m, n).expect("fixture kernel too large");
    let mut reps_p = Vec::new();
    for_each_multiset(d, m, |p| reps_p.push(p.to_vec()));
    let mut reps_q = Vec::new();
    for_each_multiset(d, n, |q| reps_q.push(q.to_vec()));
    for p in &reps_p {
        for q in &reps_q {
            let value = draw();
            let p_perms = crate::tensor::distinct_permutations(p);
            let q_perms = crate::tensor::distinct_permutations(q);
            for pp in &p_perms {
                for qq in &q_perms {
                    kernel.set(pp, qq, value).expect("orbit index in range");
                }
            }
        }
    }
    kernel
}

/// Symmetric kernel with one standard complex Gaussian value per orbit.
pub fn random_symmetric_kernel(d: usize, m: usize, n: usize, rng: &mut impl Rng) -> Kernel {
    fill_orbits(d, m, n, || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// Symmetric kernel whose coefficients are `scale` times small Gaussian
/// integers (real and imaginary parts in `-9..=9`, not all zero).
pub fn random_integer_symmetric_kernel(
    d: usize,
    m: usize,
    n: usize,
    scale: i64,
    rng: &mut impl Rng,
) -> Kernel {
    fill_orbits(d, m, n, || {
        Complex64::new(
            (rng.gen_range(-9..=9i64) * scale) as f64,
            (rng.gen_range(-9..=9i64) * scale) as f64,
        )
    })
}

/// Random expansion with levels drawn from `(m, n) <= (max_m, max_n)`,
/// each present with probability 1/2 (at least one level guaranteed).
pub fn random_expansion(
    d: usize,
    max_m: usize,
    max_n: usize,
    rng: &mut impl Rng,
) -> ChaosExpansion {
    random_expansion_with(d, max_m, max_n, rng, random_symmetric_kernel)
}

/// As [`random_expansion`] but with integer-valued kernels (coefficients
/// multiples of `scale`), so linear kernel arithmetic stays exact.
pub fn random_integer_expansion(
    d: usize,
    max_m: usize,
    max_n: usize,
    scale: i64,
    rng: &mut impl Rng,
) -> ChaosExpansion {
    random_expansion_with(d, max_m, max_n, rng, |d, m, n, rng| {
        random_integer_symmetric_kernel(d, m, n, scale, rng)
    })
}

fn random_expansion_with<R: Rng>(
    d: usize,
    max_m: usize,
    max_n: usize,
    rng: &mut R,
    mut gen: impl FnMut(usize, usize, usize, &mut R) -> Kernel,
) -> ChaosExpansion {
    let mut out = ChaosExpansion::new(d);
    loop {
        for m in 0..=max_m {
            for n in 0..=max_n {
                if rng.gen_bool(0.5) {
                    out.accumulate(gen(d, m, n, rng))
                        .expect("fixture kernels are symmetric by construction");
                }
            }
        }
        if out.num_levels() > 0 {
            return out;
        }
    }
}

/// The diagonal contraction-decay sequence member `f_d =
/// d^{-1/2} sum_k e_k (x) conj(e_k)`: a unit-norm `(1,1)` kernel whose
/// integral has variance one for every `d` while all nontrivial
/// contraction norms decay like `d^{-1/2}`.
pub fn trend_kernel(d: usize) -> Kernel {
    let w = 1.0 / (d as f64).sqrt();
    Kernel::from_fn(d, 1, 1, |p, q| {
        if p[0] == q[0] {
            Complex64::new(w, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .expect("trend kernel is small")
}

/// A list of kernels analyzed one per row by the normality diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFixture {
    pub kernels: Vec<Kernel>,
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    d: usize,
    m: usize,
    n: usize,
    entries: Vec<(Vec<usize>, f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct SequenceJson {
    kernels: Vec<KernelJson>,
}

impl SequenceFixture {
    pub fn trend(ds: &[usize]) -> Self {
        SequenceFixture {
            kernels: ds.iter().map(|&d| trend_kernel(d)).collect(),
        }
    }

    /// JSON form `{"kernels": [{d, m, n, entries: [[[i,j,...], re, im], ...]}]}`
    /// with 0-based indices and zero coefficients omitted.
    pub fn to_json(&self) -> String {
        let kernels = self
            .kernels
            .iter()
            .map(|k| {
                let mut entries = Vec::new();
                let mut flat = 0usize;
                for_each_tuple(k.d(), k.m() + k.n(), |idx| {
                    let c = k.coeffs()[flat];
                    flat += 1;
                    if c != Complex64::new(0.0, 0.0) {
                        entries.push((idx.to_vec(), c.re, c.im));
                    }
                });
                KernelJson {
                    d: k.d(),
                    m: k.m(),
                    n: k.n(),
                    entries,
                }
            })
            .collect();
        serde_json::to_string_pretty(&SequenceJson { kernels }).expect("serializable")
    }

    /// Strict parse: malformed JSON, out-of-range indices, wrong index
    /// lengths, duplicate entries, and oversized shapes are all errors.
    pub fn from_json(text: &str) -> Result<Self, TensorError> {
        let parsed: SequenceJson =
            serde_json::from_str(text).map_err(|e| TensorError::Json(e.to_string()))?;
        let mut kernels = Vec::with_capacity(parsed.kernels.len());
        for kj in parsed.kernels {
            let entries: Vec<(Vec<usize>, Complex64)> = kj
                .entries
                .into_iter()
                .map(|(idx, re, im)| (idx, Complex64::new(re, im)))
                .collect();
            kernels.push(Kernel::from_entries(kj.d, kj.m, kj.n, &entries)?);
        }
        Ok(SequenceFixture { kernels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_for;

    #[test]
    fn generated_kernels_are_exactly_symmetric() {
        let mut rng = rng_for(101, 0);
        for (m, n) in [(1, 0), (2, 1), (2, 2), (3, 1)] {
            let f = random_symmetric_kernel(3, m, n, &mut rng);
            assert_eq!(f.symmetry_defect(), 0.0);
            let g = random_integer_symmetric_kernel(3, m, n, 720, &mut rng);
            assert_eq!(g.symmetry_defect(), 0.0);
            for c in g.coeffs() {
                assert_eq!(c.re, c.re.round());
                assert_eq!(c.re % 720.0, 0.0);
                assert_eq!(c.im % 720.0, 0.0);
            }
        }
    }

    #[test]
    fn generators_are_deterministic_in_the_seed() {
        let a = random_symmetric_kernel(3, 2, 2, &mut rng_for(7, 3));
        let b = random_symmetric_kernel(3, 2, 2, &mut rng_for(7, 3));
        assert_eq!(a, b);
        let e1 = random_expansion(2, 2, 2, &mut rng_for(9, 0));
        let e2 = random_expansion(2, 2, 2, &mut rng_for(9, 0));
        assert_eq!(e1, e2);
        assert!(e1.num_levels() > 0);
    }

    #[test]
    fn trend_kernel_shape() {
        for d in [1usize, 2, 4, 8, 16] {
            let f = trend_kernel(d);
            assert!((f.norm() - 1.0).abs() < 1e-12);
            assert_eq!(f.symmetry_defect(), 0.0);
            let tr = f.trace_k(1).unwrap();
            let mean = tr.coeffs()[0];
            assert!((mean.re - (d as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_fixture_json_round_trip() {
        let fixture = SequenceFixture::trend(&[1, 2, 4]);
        let text = fixture.to_json();
        let back = SequenceFixture::from_json(&text).unwrap();
        assert_eq!(fixture, back);

        assert!(SequenceFixture::from_json("{").is_err());
        assert!(SequenceFixture::from_json("{\"kernels\": [{\"d\":1,\"m\":1,\"n\":0,\"entries\":[[[5],1.0,0.0]]}]}").is_err());
        assert!(SequenceFixture::from_json(
            "{\"kernels\": [{\"d\":1,\"m\":1,\"n\":0,\"entries\":[[[0],1.0,0.0],[[0],2.0,0.0]]}]}"
        )
        .is_err());
    }
}
