//! Deterministic Monte Carlo plumbing.
//!
//! Sampling is organised in fixed-size blocks. Block `b` of a run draws
//! from its own ChaCha12 stream keyed by `(seed, b)`, and block partial
//! sums are reduced in block-index order. The estimate is therefore a
//! pure function of `(samples, seed, block_size)` - bit-identical across
//! worker counts and across runs - while still parallelising cleanly.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Default number of samples per block.
pub const DEFAULT_BLOCK: usize = 4096;

/// Independent RNG stream `stream` of the run keyed by `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw of the standard complex Gaussian: `(g1 + i g2) / sqrt(2)`
/// with `g1, g2` independent real standard normals, so `E|z|^2 = 1`
/// and `E[z^2] = 0`.
pub fn standard_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Complex64::new(g1, g2) / std::f64::consts::SQRT_2
}

/// A vector of `d` independent standard complex Gaussians.
pub fn complex_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<Complex64> {
    (0..d).map(|_| standard_complex(rng)).collect()
}

/// Deterministic block Monte Carlo mean of a complex-valued statistic.
///
/// `eval` is called once per sample with the block's RNG and must draw
/// the same number of variates on every call, so that results depend
/// only on `(samples, seed, block_size)`.
pub fn mc_mean<F>(samples: usize, seed: u64, workers: usize, block_size: usize, eval: F) -> Complex64
where
    F: Fn(&mut ChaCha12Rng) -> Complex64 + Sync,
{
    let sums = mc_block_sums(samples, seed, workers, block_size, 2, |rng, out| {
        let v = eval(rng);
        out[0] += v.re;
        out[1] += v.im;
    });
    Complex64::new(sums[0], sums[1]) / samples as f64
}

/// Deterministic block Monte Carlo for vector statistics: returns the
/// per-coordinate mean of `dim` accumulators filled by `eval`.
pub fn mc_mean_vec<F>(
    samples: usize,
    seed: u64,
    workers: usize,
    block_size: usize,
    dim: usize,
    eval: F,
) -> Vec<f64>
where
    F: Fn(&mut ChaCha12Rng, &mut [f64]) + Sync,
{
    let sums = mc_block_sums(samples, seed, workers, block_size, dim, eval);
    sums.into_iter().map(|s| s / samples as f64).collect()
}

/// Shared core: per-block partial sums, reduced in block-index order.
fn mc_block_sums<F>(
    samples: usize,
    seed: u64,
    workers: usize,
    block_size: usize,
    dim: usize,
    eval: F,
) -> Vec<f64>
where
    F: Fn(&mut ChaCha12Rng, &mut [f64]) + Sync,
{
    assert!(samples > 0, "mc_block_sums needs at least one sample");
    assert!(block_size > 0, "block size must be positive");
    let workers = workers.max(1);
    let blocks = samples.div_ceil(block_size);
    let run_block = |b: usize| -> Vec<f64> {
        let mut rng = rng_for(seed, b as u64);
        let len = block_size.min(samples - b * block_size);
        let mut acc = vec![0.0; dim];
        for _ in 0..len {
            eval(&mut rng, &mut acc);
        }
        acc
    };

    let partials: Vec<Vec<f64>> = if workers == 1 || blocks == 1 {
        (0..blocks).map(run_block).collect()
    } else {
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; blocks];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let run_block = &run_block;
                handles.push(scope.spawn(move || {
                    let mut mine = Vec::new();
                    let mut b = w;
                    while b < blocks {
                        mine.push((b, run_block(b)));
                        b += workers;
                    }
                    mine
                }));
            }
            for h in handles {
                for (b, partial) in h.join().expect("sampling worker panicked") {
                    slots[b] = Some(partial);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("missing block")).collect()
    };

    // Reduce in block-index order so the float sum is order-stable.
    let mut out = vec![0.0; dim];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}
