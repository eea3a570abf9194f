//! Deterministic random-number plumbing for Monte Carlo runs.
//!
//! Samples are drawn in fixed-size chunks. Each chunk gets its own ChaCha8
//! stream keyed by (seed, tag, chunk index), and partial sums are folded
//! sequentially in chunk order with compensated accumulation, so results are
//! byte-identical for any worker count.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK_SAMPLES: u64 = 1024;

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// 32-byte ChaCha key derived from a user seed and a context tag.
pub fn derive_key(seed: u64, tag: &str) -> [u8; 32] {
    let mut state = seed ^ fnv1a64(tag.as_bytes());
    let mut key = [0u8; 32];
    for word in 0..4 {
        let v = splitmix64(&mut state);
        key[word * 8..word * 8 + 8].copy_from_slice(&v.to_le_bytes());
    }
    key
}

/// Generator for one logical chunk of a tagged run.
pub fn chunk_rng(seed: u64, tag: &str, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(seed, tag));
    rng.set_stream(chunk);
    rng
}

#[derive(Clone, Copy, Debug)]
pub struct McRawSums {
    pub sum: Complex64,
    pub sum_sq: f64,
    pub flagged: u64,
    pub samples: u64,
}

#[derive(Clone, Copy, Default)]
struct KahanComplex {
    sum_re: f64,
    sum_im: f64,
    c_re: f64,
    c_im: f64,
}

impl KahanComplex {
    fn add(&mut self, z: Complex64) {
        let y = z.re - self.c_re;
        let t = self.sum_re + y;
        self.c_re = (t - self.sum_re) - y;
        self.sum_re = t;
        let y = z.im - self.c_im;
        let t = self.sum_im + y;
        self.c_im = (t - self.sum_im) - y;
        self.sum_im = t;
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.sum_re, self.sum_im)
    }
}

#[derive(Clone, Copy, Default)]
struct KahanReal {
    sum: f64,
    c: f64,
}

impl KahanReal {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Runs `samples` evaluations of `f`, which returns one complex sample and a
/// repair flag, and accumulates sum, sum of squared moduli, and flag count.
pub fn mc_run<F>(seed: u64, tag: &str, samples: u64, f: F) -> McRawSums
where
    F: Fn(&mut ChaCha8Rng) -> (Complex64, bool) + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SAMPLES);
    let partials: Vec<(Complex64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, tag, ci);
            let lo = ci * CHUNK_SAMPLES;
            let hi = samples.min(lo + CHUNK_SAMPLES);
            let mut sum = KahanComplex::default();
            let mut sum_sq = KahanReal::default();
            let mut flagged = 0u64;
            for _ in lo..hi {
                let (z, flag) = f(&mut rng);
                sum.add(z);
                sum_sq.add(z.norm_sqr());
                flagged += flag as u64;
            }
            (sum.value(), sum_sq.sum, flagged)
        })
        .collect();
    let mut sum = KahanComplex::default();
    let mut sum_sq = KahanReal::default();
    let mut flagged = 0u64;
    for (s, s2, fl) in partials {
        sum.add(s);
        sum_sq.add(s2);
        flagged += fl;
    }
    McRawSums { sum: sum.value(), sum_sq: sum_sq.sum, flagged, samples }
}

impl McRawSums {
    pub fn mean(&self) -> Complex64 {
        self.sum / self.samples as f64
    }

    /// Standard error of the mean of the complex samples.
    pub fn stderr(&self) -> f64 {
        if self.samples < 2 {
            return f64::INFINITY;
        }
        let n = self.samples as f64;
        let var_total = (self.sum_sq - self.sum.norm_sqr() / n).max(0.0);
        (var_total / (n * (n - 1.0))).sqrt()
    }
}
