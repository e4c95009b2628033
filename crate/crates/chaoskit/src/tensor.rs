//! Dense kernels over `C^d` with separate holomorphic / antiholomorphic
//! slot groups, and their contraction, trace, and symmetrization algebra.
//!
//! A [`Kernel`] of type `(m, n)` stores a complex coefficient for every
//! index tuple `(p; q)` with `p` in `[d]^m` (holomorphic slots) and `q`
//! in `[d]^n` (antiholomorphic slots). Kernels that enter multiple
//! integrals are symmetric within each slot group; [`Kernel::symmetrize`]
//! projects onto that subspace by orbit averaging.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on stored coefficients (`d^(m+n)`), guarding allocations on
/// untrusted inputs.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 22;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("kernel of shape d={d}, ranks ({m},{n}) exceeds the entry cap")]
    TooLarge { d: usize, m: usize, n: usize },
    #[error("dimension mismatch: d={left} vs d={right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("rank mismatch: expected ({em},{en}), got ({gm},{gn})")]
    RankMismatch {
        em: usize,
        en: usize,
        gm: usize,
        gn: usize,
    },
    #[error(
        "contraction (i={i}, j={j}) out of range for types ({a},{b}) x ({c},{dd}): need i <= min(a,dd), j <= min(b,c)"
    )]
    ContractionOutOfRange {
        i: usize,
        j: usize,
        a: usize,
        b: usize,
        c: usize,
        dd: usize,
    },
    #[error("trace order {k} out of range for type ({m},{n})")]
    TraceOutOfRange { k: usize, m: usize, n: usize },
    #[error("index {index:?} invalid for d={d}, ranks ({m},{n})")]
    BadIndex {
        index: Vec<usize>,
        d: usize,
        m: usize,
        n: usize,
    },
    #[error("duplicate entry for index {index:?}")]
    DuplicateEntry { index: Vec<usize> },
    #[error("non-finite coefficient at index {index:?}")]
    NonFinite { index: Vec<usize> },
    #[error("kernel JSON is invalid: {0}")]
    Json(String),
}

/// Visit every tuple in `[d]^len` in lexicographic order.
pub(crate) fn for_each_tuple(d: usize, len: usize, mut f: impl FnMut(&[usize])) {
    if len == 0 {
        f(&[]);
        return;
    }
    if d == 0 {
        return;
    }
    let mut idx = vec![0usize; len];
    'outer: loop {
        f(&idx);
        for k in (0..len).rev() {
            idx[k] += 1;
            if idx[k] < d {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
}

/// Visit every nondecreasing tuple in `[d]^len` (multiset
/// representatives) in lexicographic order.
pub(crate) fn for_each_multiset(d: usize, len: usize, mut f: impl FnMut(&[usize])) {
    if len == 0 {
        f(&[]);
        return;
    }
    if d == 0 {
        return;
    }
    let mut idx = vec![0usize; len];
    'outer: loop {
        f(&idx);
        for k in (0..len).rev() {
            if idx[k] + 1 < d {
                let v = idx[k] + 1;
                for slot in idx.iter_mut().skip(k) {
                    *slot = v;
                }
                continue 'outer;
            }
        }
        break;
    }
}

/// All distinct rearrangements of `tuple` (multiset permutations),
/// in lexicographic order.
pub(crate) fn distinct_permutations(tuple: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = tuple.to_vec();
    cur.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(cur.clone());
        // Standard next-permutation step.
        let Some(i) = (0..cur.len().saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1])
        else {
            return out;
        };
        let j = (i + 1..cur.len()).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

/// Dense coefficient array of an element of the `(m, n)`-kernel space
/// over `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    d: usize,
    m: usize,
    n: usize,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    d: usize,
    m: usize,
    n: usize,
    entries: Vec<(Vec<usize>, f64, f64)>,
}

impl Kernel {
    pub fn zeros(d: usize, m: usize, n: usize) -> Result<Self, TensorError> {
        let len = d
            .checked_pow((m + n) as u32)
            .filter(|&l| l <= MAX_KERNEL_ENTRIES)
            .ok_or(TensorError::TooLarge { d, m, n })?;
        // d = 0 with m = n = 0 still has the single empty-tuple slot.
        let len = if m + n == 0 { 1 } else { len };
        Ok(Kernel {
            d,
            m,
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    /// Basis kernel `e_{p_1} x ... x e_{p_m} x conj(e_{q_1}) x ... x conj(e_{q_n})`.
    pub fn basis(d: usize, p: &[usize], q: &[usize]) -> Result<Self, TensorError> {
        let mut k = Kernel::zeros(d, p.len(), q.len())?;
        let flat = k.flat_index(p, q)?;
        k.coeffs[flat] = Complex64::new(1.0, 0.0);
        Ok(k)
    }

    pub fn from_entries(
        d: usize,
        m: usize,
        n: usize,
        entries: &[(Vec<usize>, Complex64)],
    ) -> Result<Self, TensorError> {
        let mut k = Kernel::zeros(d, m, n)?;
        let mut seen = BTreeSet::new();
        for (index, value) in entries {
            if index.len() != m + n || index.iter().any(|&x| x >= d) {
                return Err(TensorError::BadIndex {
                    index: index.clone(),
                    d,
                    m,
                    n,
                });
            }
            if !seen.insert(index.clone()) {
                return Err(TensorError::DuplicateEntry {
                    index: index.clone(),
                });
            }
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(TensorError::NonFinite {
                    index: index.clone(),
                });
            }
            let flat = k.flat_index(&index[..m], &index[m..])?;
            k.coeffs[flat] = *value;
        }
        Ok(k)
    }

    /// Build a kernel by evaluating `f(p, q)` on every index pair.
    pub fn from_fn(
        d: usize,
        m: usize,
        n: usize,
        mut f: impl FnMut(&[usize], &[usize]) -> Complex64,
    ) -> Result<Self, TensorError> {
        let mut k = Kernel::zeros(d, m, n)?;
        let mut flat = 0usize;
        for_each_tuple(d, m + n, |idx| {
            k.coeffs[flat] = f(&idx[..m], &idx[m..]);
            flat += 1;
        });
        Ok(k)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn flat_index(&self, p: &[usize], q: &[usize]) -> Result<usize, TensorError> {
        if p.len() != self.m || q.len() != self.n {
            return Err(TensorError::RankMismatch {
                em: self.m,
                en: self.n,
                gm: p.len(),
                gn: q.len(),
            });
        }
        let mut flat = 0usize;
        for &x in p.iter().chain(q.iter()) {
            if x >= self.d {
                let mut index = p.to_vec();
                index.extend_from_slice(q);
                return Err(TensorError::BadIndex {
                    index,
                    d: self.d,
                    m: self.m,
                    n: self.n,
                });
            }
            flat = flat * self.d + x;
        }
        Ok(flat)
    }

    pub fn get(&self, p: &[usize], q: &[usize]) -> Result<Complex64, TensorError> {
        Ok(self.coeffs[self.flat_index(p, q)?])
    }

    pub fn set(&mut self, p: &[usize], q: &[usize], value: Complex64) -> Result<(), TensorError> {
        let flat = self.flat_index(p, q)?;
        self.coeffs[flat] = value;
        Ok(())
    }

    fn check_same_shape(&self, other: &Kernel) -> Result<(), TensorError> {
        if self.d != other.d {
            return Err(TensorError::DimensionMismatch {
                left: self.d,
                right: other.d,
            });
        }
        if self.m != other.m || self.n != other.n {
            return Err(TensorError::RankMismatch {
                em: self.m,
                en: self.n,
                gm: other.m,
                gn: other.n,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel, TensorError> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (o, v) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += v;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel, TensorError> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (o, v) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o -= v;
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Kernel {
        let mut out = self.clone();
        for v in out.coeffs.iter_mut() {
            *v *= c;
        }
        out
    }

    /// Hilbert-Schmidt pairing `sum_{p,q} f[p;q] conj(g[p;q])`.
    pub fn inner(&self, other: &Kernel) -> Result<Complex64, TensorError> {
        self.check_same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> Result<f64, TensorError> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Project onto the subspace symmetric within each slot group:
    /// `sym(f)[p;q] = (m! n!)^{-1} sum_{pi, sigma} f[pi(p); sigma(q)]`.
    ///
    /// Computed per orbit as a mean over the distinct rearrangements of
    /// `(p, q)`; orbits whose values are already identical are copied
    /// through bit-for-bit, so symmetric inputs (and repeated
    /// applications) are exact fixed points.
    pub fn symmetrize(&self) -> Kernel {
        let mut out = self.clone();
        let mut visited = vec![false; self.coeffs.len()];
        let mut flat = 0usize;
        let d = self.d;
        let m = self.m;
        for_each_tuple(d, m + self.n, |idx| {
            let my_flat = flat;
            flat += 1;
            if visited[my_flat] {
                return;
            }
            let p_perms = distinct_permutations(&idx[..m]);
            let q_perms = distinct_permutations(&idx[m..]);
            let mut members = Vec::with_capacity(p_perms.len() * q_perms.len());
            for pp in &p_perms {
                for qq in &q_perms {
                    let mut f = 0usize;
                    for &x in pp.iter().chain(qq.iter()) {
                        f = f * d + x;
                    }
                    members.push(f);
                }
            }
            let first = self.coeffs[members[0]];
            let uniform = members.iter().all(|&f| self.coeffs[f] == first);
            let value = if uniform {
                first
            } else {
                members.iter().map(|&f| self.coeffs[f]).sum::<Complex64>()
                    / members.len() as f64
            };
            for &f in &members {
                visited[f] = true;
                out.coeffs[f] = value;
            }
        });
        out
    }

    /// Largest absolute deviation from the symmetrized kernel.
    pub fn symmetry_defect(&self) -> f64 {
        self.sub(&self.symmetrize())
            .expect("same shape by construction")
            .max_abs()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    /// Contraction `f (x)_{i,j} g` of `i` holomorphic slots of `f`
    /// against antiholomorphic slots of `g` and `j` the other way
    /// around: with `f` of type `(a, b)`, `g` of type `(c, dd)`,
    ///
    /// `(f (x)_{i,j} g)[t_f, t_g; s_f, s_g] = sum_{u in [d]^i, v in [d]^j}
    ///  f[t_f, u; s_f, v] g[t_g, v; s_g, u]`,
    ///
    /// of type `(a + c - i - j, b + dd - i - j)`. Stored coefficients
    /// are never conjugated; which slot groups pair up is the whole
    /// content of the operation.
    pub fn contract(&self, g: &Kernel, i: usize, j: usize) -> Result<Kernel, TensorError> {
        if self.d != g.d {
            return Err(TensorError::DimensionMismatch {
                left: self.d,
                right: g.d,
            });
        }
        let (a, b) = (self.m, self.n);
        let (c, dd) = (g.m, g.n);
        if i > a.min(dd) || j > b.min(c) {
            return Err(TensorError::ContractionOutOfRange { i, j, a, b, c, dd });
        }
        let d = self.d;
        let mut out = Kernel::zeros(d, a + c - i - j, b + dd - i - j)?;
        let mut out_flat = 0usize;
        let mut f_idx = vec![0usize; a + b];
        let mut g_idx = vec![0usize; c + dd];
        for_each_tuple(d, out.m + out.n, |oidx| {
            let (t_f, rest) = oidx.split_at(a - i);
            let (t_g, rest) = rest.split_at(c - j);
            let (s_f, s_g) = rest.split_at(b - j);
            let mut acc = Complex64::new(0.0, 0.0);
            for_each_tuple(d, i + j, |uv| {
                let (u, v) = uv.split_at(i);
                f_idx[..a - i].copy_from_slice(t_f);
                f_idx[a - i..a].copy_from_slice(u);
                f_idx[a..a + b - j].copy_from_slice(s_f);
                f_idx[a + b - j..].copy_from_slice(v);
                g_idx[..c - j].copy_from_slice(t_g);
                g_idx[c - j..c].copy_from_slice(v);
                g_idx[c..c + dd - i].copy_from_slice(s_g);
                g_idx[c + dd - i..].copy_from_slice(u);
                let mut f_flat = 0usize;
                for &x in &f_idx {
                    f_flat = f_flat * d + x;
                }
                let mut g_flat = 0usize;
                for &x in &g_idx {
                    g_flat = g_flat * d + x;
                }
                acc += self.coeffs[f_flat] * g.coeffs[g_flat];
            });
            out.coeffs[out_flat] = acc;
            out_flat += 1;
        });
        Ok(out)
    }

    /// Contraction followed by symmetrization (the `~(x)` of the
    /// fourth-moment expansions).
    pub fn contract_sym(&self, g: &Kernel, i: usize, j: usize) -> Result<Kernel, TensorError> {
        Ok(self.contract(g, i, j)?.symmetrize())
    }

    /// The kernel `h` of type `(n, m)` with `h[q; p] = conj(f[p; q])`,
    /// realizing `conj(I_{m,n}(f)) = I_{n,m}(h)`. An involution.
    pub fn reversed_conjugate(&self) -> Kernel {
        let mut out = Kernel::zeros(self.d, self.n, self.m).expect("same size as input");
        let mut flat = 0usize;
        for_each_tuple(self.d, self.m + self.n, |idx| {
            let (p, q) = idx.split_at(self.m);
            let mut out_flat = 0usize;
            for &x in q.iter().chain(p.iter()) {
                out_flat = out_flat * self.d + x;
            }
            out.coeffs[out_flat] = self.coeffs[flat].conj();
            flat += 1;
        });
        out
    }

    /// Trace of order `k`: `(Tr^k f)[p'; q'] = sum_{u in [d]^k} f[u, p'; u, q']`.
    pub fn trace_k(&self, k: usize) -> Result<Kernel, TensorError> {
        if k > self.m.min(self.n) {
            return Err(TensorError::TraceOutOfRange {
                k,
                m: self.m,
                n: self.n,
            });
        }
        let d = self.d;
        let mut out = Kernel::zeros(d, self.m - k, self.n - k)?;
        let mut out_flat = 0usize;
        let mut idx = vec![0usize; self.m + self.n];
        for_each_tuple(d, out.m + out.n, |oidx| {
            let (p_rest, q_rest) = oidx.split_at(out.m);
            let mut acc = Complex64::new(0.0, 0.0);
            for_each_tuple(d, k, |u| {
                idx[..k].copy_from_slice(u);
                idx[k..self.m].copy_from_slice(p_rest);
                idx[self.m..self.m + k].copy_from_slice(u);
                idx[self.m + k..].copy_from_slice(q_rest);
                let mut flat = 0usize;
                for &x in &idx {
                    flat = flat * d + x;
                }
                acc += self.coeffs[flat];
            });
            out.coeffs[out_flat] = acc;
            out_flat += 1;
        });
        Ok(out)
    }

    /// Serialize to the fixture JSON `{d, m, n, entries: [[idx...], re, im]}`
    /// with 0-based indices; zero coefficients are omitted.
    pub fn to_json(&self) -> String {
        let mut entries = Vec::new();
        let mut flat = 0usize;
        for_each_tuple(self.d, self.m + self.n, |idx| {
            let c = self.coeffs[flat];
            flat += 1;
            if c != Complex64::new(0.0, 0.0) {
                entries.push((idx.to_vec(), c.re, c.im));
            }
        });
        serde_json::to_string(&KernelJson {
            d: self.d,
            m: self.m,
            n: self.n,
            entries,
        })
        .expect("kernel JSON serialization cannot fail")
    }

    /// Parse the fixture JSON format. Strict: indices must be 0-based,
    /// in range, of length `m + n`, and free of duplicates; the shape
    /// must respect the entry cap; coefficients must be finite. Never
    /// panics on malformed input.
    pub fn from_json(text: &str) -> Result<Self, TensorError> {
        let parsed: KernelJson =
            serde_json::from_str(text).map_err(|e| TensorError::Json(e.to_string()))?;
        let entries: Vec<(Vec<usize>, Complex64)> = parsed
            .entries
            .into_iter()
            .map(|(idx, re, im)| (idx, Complex64::new(re, im)))
            .collect();
        Kernel::from_entries(parsed.d, parsed.m, parsed.n, &entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rng_for, standard_complex};
    use rand_chacha::ChaCha12Rng;

    fn random_kernel(d: usize, m: usize, n: usize, rng: &mut ChaCha12Rng) -> Kernel {
        Kernel::from_fn(d, m, n, |_, _| standard_complex(rng)).unwrap()
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut k = Kernel::zeros(3, 2, 1).unwrap();
        k.set(&[1, 2], &[0], Complex64::new(5.0, -1.0)).unwrap();
        assert_eq!(k.get(&[1, 2], &[0]).unwrap(), Complex64::new(5.0, -1.0));
        assert_eq!(k.get(&[2, 1], &[0]).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(
            k.get(&[1, 3], &[0]),
            Err(TensorError::BadIndex { .. })
        ));
        assert!(matches!(
            k.get(&[1], &[0]),
            Err(TensorError::RankMismatch { .. })
        ));
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        assert!(matches!(
            Kernel::zeros(10, 4, 4),
            Err(TensorError::TooLarge { .. })
        ));
        // Scalar kernels always fit.
        assert_eq!(Kernel::zeros(0, 0, 0).unwrap().coeffs().len(), 1);
    }

    #[test]
    fn symmetrize_examples() {
        // e1 (x) e2 -> (e1 (x) e2 + e2 (x) e1) / 2.
        let raw = Kernel::basis(2, &[0, 1], &[]).unwrap();
        let sym = raw.symmetrize();
        assert_eq!(sym.get(&[0, 1], &[]).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(sym.get(&[1, 0], &[]).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(sym.get(&[0, 0], &[]).unwrap(), Complex64::new(0.0, 0.0));

        // Idempotence is bit-exact.
        let mut rng = rng_for(3, 0);
        for _ in 0..50 {
            let raw = random_kernel(2, 2, 1, &mut rng);
            let s1 = raw.symmetrize();
            let s2 = s1.symmetrize();
            assert_eq!(s1, s2);
            // Contraction (projection) shrinks the norm.
            assert!(s1.norm() <= raw.norm() + 1e-12);
        }

        // A symmetric input passes through unchanged, bitwise.
        let sym_input = Kernel::from_fn(3, 2, 0, |p, _| {
            Complex64::new((p[0] + p[1]) as f64, (p[0] * p[1]) as f64)
        })
        .unwrap();
        assert_eq!(sym_input.symmetrize(), sym_input);
        assert!(sym_input.is_symmetric(0.0));
    }

    #[test]
    fn symmetrize_matches_full_permutation_sum() {
        // Orbit averaging equals the textbook (m! n!)^{-1} double sum.
        let mut rng = rng_for(5, 0);
        for _ in 0..20 {
            let raw = random_kernel(2, 3, 2, &mut rng);
            let sym = raw.symmetrize();
            let m_perms = crate::combin::permutations(3);
            let n_perms = crate::combin::permutations(2);
            let mut expect = Kernel::zeros(2, 3, 2).unwrap();
            for_each_tuple(2, 5, |idx| {
                let (p, q) = idx.split_at(3);
                let mut acc = Complex64::new(0.0, 0.0);
                for pi in &m_perms {
                    for sigma in &n_perms {
                        let pp: Vec<usize> = pi.iter().map(|&k| p[k]).collect();
                        let qq: Vec<usize> = sigma.iter().map(|&k| q[k]).collect();
                        acc += raw.get(&pp, &qq).unwrap();
                    }
                }
                expect
                    .set(p, q, acc / (m_perms.len() * n_perms.len()) as f64)
                    .unwrap();
            });
            assert!(sym.max_abs_diff(&expect).unwrap() < 1e-13);
        }
    }

    #[test]
    fn contract_examples() {
        // d=1: <e1, e1-bar slot> pairing gives the scalar 1.
        let f = Kernel::basis(1, &[0], &[]).unwrap();
        let g = Kernel::basis(1, &[], &[0]).unwrap();
        let s = f.contract(&g, 1, 0).unwrap();
        assert_eq!((s.m(), s.n()), (0, 0));
        assert_eq!(s.coeffs()[0], Complex64::new(1.0, 0.0));

        // Orthogonal basis indices contract to zero.
        let f = Kernel::basis(2, &[0], &[]).unwrap();
        let g = Kernel::basis(2, &[], &[1]).unwrap();
        let s = f.contract(&g, 1, 0).unwrap();
        assert_eq!(s.coeffs()[0], Complex64::new(0.0, 0.0));

        // i = j = 0 is the plain tensor product.
        let mut rng = rng_for(7, 0);
        let f = random_kernel(2, 1, 1, &mut rng);
        let g = random_kernel(2, 1, 0, &mut rng);
        let t = f.contract(&g, 0, 0).unwrap();
        assert_eq!((t.m(), t.n()), (2, 1));
        for p0 in 0..2 {
            for p1 in 0..2 {
                for q0 in 0..2 {
                    // Output holomorphic slots are (t_f, t_g).
                    let expect = f.get(&[p0], &[q0]).unwrap() * g.get(&[p1], &[]).unwrap();
                    assert_eq!(t.get(&[p0, p1], &[q0]).unwrap(), expect);
                }
            }
        }

        // Out-of-range contraction counts are errors, not zeros: g has no
        // antiholomorphic slot for i=1 to pair against.
        assert!(matches!(
            f.contract(&g, 1, 0),
            Err(TensorError::ContractionOutOfRange { .. })
        ));
        let h = random_kernel(3, 1, 1, &mut rng);
        assert!(matches!(
            f.contract(&h, 0, 0),
            Err(TensorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn contract_bilinear_and_bounded() {
        let mut rng = rng_for(11, 0);
        for _ in 0..25 {
            let f1 = random_kernel(2, 2, 1, &mut rng);
            let f2 = random_kernel(2, 2, 1, &mut rng);
            let g = random_kernel(2, 1, 2, &mut rng);
            let a = Complex64::new(0.7, -0.3);
            let lhs = f1.scale(a).add(&f2).unwrap().contract(&g, 1, 1).unwrap();
            let rhs = f1
                .contract(&g, 1, 1)
                .unwrap()
                .scale(a)
                .add(&f2.contract(&g, 1, 1).unwrap())
                .unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);

            // Cauchy-Schwarz bound for every admissible contraction.
            for i in 0..=2usize.min(2) {
                for j in 0..=1usize.min(1) {
                    let c = f1.contract(&g, i, j).unwrap();
                    assert!(c.norm() <= f1.norm() * g.norm() + 1e-12);
                    let cs = f1.contract_sym(&g, i, j).unwrap();
                    assert!(cs.norm() <= c.norm() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn reversed_conjugate_examples() {
        // (1+i) e1 (x) e2-bar -> (1-i) e2 (x) e1-bar.
        let f = Kernel::basis(2, &[0], &[1])
            .unwrap()
            .scale(Complex64::new(1.0, 1.0));
        let h = f.reversed_conjugate();
        assert_eq!((h.m(), h.n()), (1, 1));
        assert_eq!(h.get(&[1], &[0]).unwrap(), Complex64::new(1.0, -1.0));
        assert_eq!(h.get(&[0], &[1]).unwrap(), Complex64::new(0.0, 0.0));

        let mut rng = rng_for(13, 0);
        for _ in 0..50 {
            let f = random_kernel(2, 2, 1, &mut rng);
            assert_eq!(f.reversed_conjugate().reversed_conjugate(), f);
        }

        // Hermitian real kernel with m = n is a fixed point.
        let f = Kernel::from_fn(2, 1, 1, |p, q| Complex64::new((p[0] + q[0]) as f64, 0.0)).unwrap();
        assert_eq!(f.reversed_conjugate(), f);

        // Symmetrization commutes with reversed conjugation.
        for _ in 0..20 {
            let f = random_kernel(2, 2, 2, &mut rng);
            let a = f.symmetrize().reversed_conjugate();
            let b = f.reversed_conjugate().symmetrize();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-13);
        }
    }

    #[test]
    fn inner_and_norm() {
        let e = Kernel::basis(2, &[0], &[0]).unwrap();
        assert_eq!(e.inner(&e).unwrap(), Complex64::new(1.0, 0.0));
        let mut rng = rng_for(17, 0);
        for _ in 0..100 {
            let f = random_kernel(2, 1, 2, &mut rng);
            let g = random_kernel(2, 1, 2, &mut rng);
            let ip = f.inner(&g).unwrap();
            assert!(ip.norm() <= f.norm() * g.norm() + 1e-12, "Cauchy-Schwarz");
            assert!(f.inner(&f).unwrap().im.abs() < 1e-14);
            assert!(f.inner(&f).unwrap().re >= 0.0);
        }
        let h = random_kernel(2, 2, 1, &mut rng);
        let f = random_kernel(2, 1, 2, &mut rng);
        assert!(f.inner(&h).is_err());
    }

    #[test]
    fn trace_examples_and_iteration() {
        let f = Kernel::basis(1, &[0], &[0]).unwrap();
        let t = f.trace_k(1).unwrap();
        assert_eq!(t.coeffs()[0], Complex64::new(1.0, 0.0));

        // Identity kernel on C^2 has trace 2.
        let id = Kernel::from_fn(2, 1, 1, |p, q| {
            Complex64::new(if p[0] == q[0] { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let t = id.trace_k(1).unwrap();
        assert_eq!(t.coeffs()[0], Complex64::new(2.0, 0.0));

        let mut rng = rng_for(19, 0);
        let f = random_kernel(2, 2, 2, &mut rng);
        assert_eq!(f.trace_k(0).unwrap(), f);
        let t2 = f.trace_k(2).unwrap();
        let t11 = f.trace_k(1).unwrap().trace_k(1).unwrap();
        assert!(t2.max_abs_diff(&t11).unwrap() < 1e-13);
        assert!(matches!(
            f.trace_k(3),
            Err(TensorError::TraceOutOfRange { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut rng = rng_for(23, 0);
        let f = random_kernel(2, 1, 2, &mut rng);
        let text = f.to_json();
        let back = Kernel::from_json(&text).unwrap();
        assert_eq!(f, back);

        // 0-based strictness.
        assert!(Kernel::from_json(r#"{"d":2,"m":1,"n":0,"entries":[[[2],1.0,0.0]]}"#).is_err());
        // Wrong index length.
        assert!(Kernel::from_json(r#"{"d":2,"m":1,"n":1,"entries":[[[0],1.0,0.0]]}"#).is_err());
        // Duplicate entries.
        assert!(matches!(
            Kernel::from_json(
                r#"{"d":2,"m":1,"n":0,"entries":[[[0],1.0,0.0],[[0],2.0,0.0]]}"#
            ),
            Err(TensorError::DuplicateEntry { .. })
        ));
        // Malformed JSON is an error, not a panic.
        assert!(Kernel::from_json("{").is_err());
        // Oversized shapes are rejected before allocation.
        assert!(matches!(
            Kernel::from_json(r#"{"d":100,"m":8,"n":8,"entries":[]}"#),
            Err(TensorError::TooLarge { .. })
        ));
        // Overlong float literals are a parse error, not infinity.
        assert!(matches!(
            Kernel::from_json(r#"{"d":1,"m":1,"n":0,"entries":[[[0],1e999,0.0]]}"#),
            Err(TensorError::Json(_))
        ));
        // Non-finite coefficients are rejected at construction: such a
        // kernel could never serialize back.
        assert!(matches!(
            Kernel::from_entries(1, 1, 0, &[(vec![0], Complex64::new(f64::INFINITY, 0.0))]),
            Err(TensorError::NonFinite { .. })
        ));

        let ok = Kernel::from_json(r#"{"d":2,"m":1,"n":1,"entries":[[[0,1],0.5,-0.25]]}"#).unwrap();
        assert_eq!(
            ok.get(&[0], &[1]).unwrap(),
            Complex64::new(0.5, -0.25)
        );
    }

    #[test]
    fn distinct_permutations_basics() {
        assert_eq!(distinct_permutations(&[]), vec![Vec::<usize>::new()]);
        assert_eq!(distinct_permutations(&[1, 1]), vec![vec![1, 1]]);
        let p = distinct_permutations(&[2, 0, 2]);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], vec![0, 2, 2]);
        assert!(p.contains(&vec![2, 0, 2]) && p.contains(&vec![2, 2, 0]));
    }

    #[test]
    fn multiset_enumeration() {
        let mut seen = Vec::new();
        for_each_multiset(3, 2, |t| seen.push(t.to_vec()));
        assert_eq!(
            seen,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 1],
                vec![1, 2],
                vec![2, 2]
            ]
        );
        // Union of orbits of the representatives covers [d]^len exactly.
        let mut total = 0usize;
        for_each_multiset(2, 3, |t| total += distinct_permutations(t).len());
        assert_eq!(total, 8);
        let mut empties = 0;
        for_each_multiset(4, 0, |t| {
            assert!(t.is_empty());
            empties += 1;
        });
        assert_eq!(empties, 1);
    }
}
