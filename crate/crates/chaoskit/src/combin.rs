//! Small combinatorics helpers shared across the crate.

use num_bigint::BigInt;
use num_traits::One;

/// `n!` as `u128`. Exact for `n <= 33`; panics beyond that.
pub fn factorial_u128(n: usize) -> u128 {
    assert!(n <= 33, "factorial_u128 overflows above 33! (got {n})");
    (1..=n as u128).product()
}

/// `n!` as `f64` (exact for `n <= 22`, thereafter correctly rounded
/// within the `u128` range).
pub fn factorial_f64(n: usize) -> f64 {
    factorial_u128(n) as f64
}

/// `n!` as an arbitrary-precision integer.
pub fn factorial_big(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k as u64;
    }
    acc
}

/// Binomial coefficient `C(n, k)` as `u128` (0 when `k > n`).
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Binomial coefficient as `f64`.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial_u128(n, k) as f64
}

/// Binomial coefficient as a big integer.
pub fn binomial_big(n: usize, k: usize) -> BigInt {
    BigInt::from(binomial_u128(n, k))
}

/// All permutations of `0..n` (Heap's algorithm). Small `n` only.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(factorial_u128(n.min(20)) as usize);
    heap_recurse(n, &mut items, &mut out);
    out
}

fn heap_recurse(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_recurse(k - 1, items, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}
