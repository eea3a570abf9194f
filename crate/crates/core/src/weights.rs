//! Highest-weight lattice of the twisted spherical representations:
//! enumeration, exact dimensions, Casimir constants, and smoothness thresholds.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{self, GrassmannParams};

/// A point of the twisted spherical weight lattice. The character index l and
/// the partition m determine lambda_i = 2 m_i + |l|, the spectral parameters
/// n_i = m_i + q - i and c_i = n_i (n_i + |l| + k + 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SphericalWeight {
    pub l: i64,
    pub m: Vec<i64>,
    pub lambda: Vec<i64>,
    pub spectral_n: Vec<i64>,
    pub spectral_c: Vec<i64>,
}

pub fn make_weight(space: &GrassmannParams, l: i64, m: Vec<i64>) -> Result<SphericalWeight> {
    let q = space.q as usize;
    if m.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: m.len() });
    }
    if m.windows(2).any(|w| w[0] < w[1]) || *m.last().unwrap() < 0 {
        return Err(Error::ParameterDomain(format!(
            "m must satisfy m_1 >= ... >= m_q >= 0, got {m:?}"
        )));
    }
    let le = l.abs();
    let lambda: Vec<i64> = m.iter().map(|&mi| 2 * mi + le).collect();
    let spectral_n: Vec<i64> = m
        .iter()
        .enumerate()
        .map(|(i0, &mi)| mi + space.q - (i0 as i64 + 1))
        .collect();
    let spectral_c: Vec<i64> = spectral_n
        .iter()
        .map(|&ni| ni * (ni + le + space.k + 1))
        .collect();
    Ok(SphericalWeight { l, m, lambda, spectral_n, spectral_c })
}

/// All weights with m_1 <= m1_max, in decreasing lexicographic order of m.
/// The count is binomial(m1_max + q, q).
pub fn enumerate_weights(
    space: &GrassmannParams,
    l: i64,
    m1_max: i64,
) -> Result<Vec<SphericalWeight>> {
    if m1_max < 0 {
        return Err(Error::ParameterDomain(format!("m1_max must be >= 0, got {m1_max}")));
    }
    let q = space.q as usize;
    let mut out = Vec::new();
    let mut stack: Vec<i64> = Vec::with_capacity(q);
    fn rec(
        space: &GrassmannParams,
        l: i64,
        q: usize,
        cap: i64,
        stack: &mut Vec<i64>,
        out: &mut Vec<SphericalWeight>,
    ) {
        if stack.len() == q {
            out.push(make_weight(space, l, stack.clone()).expect("generated m is valid"));
            return;
        }
        for v in (0..=cap).rev() {
            stack.push(v);
            rec(space, l, q, v, stack, out);
            stack.pop();
        }
    }
    rec(space, l, q, m1_max, &mut stack, &mut out);
    Ok(out)
}

fn mul_frac(num: &mut BigInt, den: &mut BigInt, a: i64, b: i64) {
    *num *= BigInt::from(a);
    *den *= BigInt::from(b);
}

/// Dimension of the irreducible representation attached to a spherical weight,
/// evaluated as an exact product of rationals; the quotient is verified to be
/// an integer. Written with L = |l|, the factors are
///   prod_i (2 m_i + L + k + 1 + 2(q-i)) / (k + 1 + 2(q-i))
/// * prod_{i<j} [(m_i + m_j + L + k + 1 + 2q - (i+j)) / (k + 1 + 2q - (i+j))]^2
/// * prod_{i<j} [(m_i - m_j + j - i) / (j - i)]^2
/// * prod_i prod_{s=1..k} (m_i + L + q - i + s)(m_i + q - i + s) / (q - i + s)^2,
/// where the last block is empty when p = q.
pub fn dimension(space: &GrassmannParams, w: &SphericalWeight) -> BigInt {
    let q = space.q;
    let k = space.k;
    let le = w.l.abs();
    let m = &w.m;
    let mi = |i: i64| m[(i - 1) as usize];

    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 1..=q {
        mul_frac(
            &mut num,
            &mut den,
            2 * mi(i) + le + k + 1 + 2 * (q - i),
            k + 1 + 2 * (q - i),
        );
    }
    for i in 1..=q {
        for j in (i + 1)..=q {
            let a = mi(i) + mi(j) + le + k + 1 + 2 * q - (i + j);
            let b = k + 1 + 2 * q - (i + j);
            mul_frac(&mut num, &mut den, a, b);
            mul_frac(&mut num, &mut den, a, b);
            let a = mi(i) - mi(j) + j - i;
            let b = j - i;
            mul_frac(&mut num, &mut den, a, b);
            mul_frac(&mut num, &mut den, a, b);
        }
    }
    for i in 1..=q {
        for s in 1..=k {
            mul_frac(&mut num, &mut den, mi(i) + le + q - i + s, q - i + s);
            mul_frac(&mut num, &mut den, mi(i) + q - i + s, q - i + s);
        }
    }
    let (d, r) = num.div_rem(&den);
    assert!(r.is_zero(), "dimension product must cancel to an integer");
    d
}

pub fn dimension_f64(space: &GrassmannParams, w: &SphericalWeight) -> f64 {
    dimension(space, w).to_f64().expect("dimension fits in f64 range")
}

/// Upper bound (lambda_1 + 1)^(q(2p-1)) = (2 m_1 + |l| + 1)^(q(2p-1)).
/// Every factor of the dimension product is at most lambda_1 + 1 and there
/// are exactly q(2p-1) of them, so dimension(w) <= dimension_bound(w).
pub fn dimension_bound(space: &GrassmannParams, w: &SphericalWeight) -> BigInt {
    let base = BigInt::from(w.lambda[0] + 1);
    let exp = (space.q * (2 * space.p - 1)) as u32;
    base.pow(exp)
}

/// Same bound as a float, taking m_1 as a free parameter; used by tail
/// estimates over shells amassed by m_1.
pub fn dimension_bound_f64(space: &GrassmannParams, l: i64, m1: i64) -> f64 {
    let base = (2 * m1 + l.abs() + 1) as f64;
    base.powi((space.q * (2 * space.p - 1)) as i32)
}

/// Casimir constant <lambda, lambda + 2 rho> at the default inner-product scale.
pub fn casimir(space: &GrassmannParams, w: &SphericalWeight) -> i64 {
    let rho = space::rho(space);
    let shifted: Vec<i64> = w
        .lambda
        .iter()
        .zip(&rho)
        .map(|(&li, &ri)| li + 2 * ri)
        .collect();
    space::killing_inner(space, &w.lambda, &shifted).expect("lengths agree by construction")
}

/// Casimir constant at a caller-selected inner-product scale.
pub fn casimir_scaled(space: &GrassmannParams, w: &SphericalWeight, scale: f64) -> f64 {
    let rho = space::rho(space);
    let dot: i64 = w
        .lambda
        .iter()
        .zip(&rho)
        .map(|(&li, &ri)| li * (li + 2 * ri))
        .sum();
    scale * dot as f64
}

/// Minimum number r of convolution factors guaranteeing a C^nu density:
/// max(floor(((p+q)^2 + 2 nu + q(2p-1)) / (2p-q)) + 1, 2pq).
pub fn smoothness_threshold(space: &GrassmannParams, nu: i64) -> Result<i64> {
    if nu < 1 {
        return Err(Error::ParameterDomain(format!("nu must be >= 1, got {nu}")));
    }
    let numer = space.n * space.n + 2 * nu + space.q * (2 * space.p - 1);
    let denom = 2 * space.p - space.q;
    Ok((numer / denom + 1).max(space.dim_uk))
}

/// Exponent s = nu + ((p+q)^2 - 1)/2 + epsilon used by the smoothness argument.
pub fn sobolev_exponent(space: &GrassmannParams, nu: i64, epsilon: f64) -> f64 {
    nu as f64 + ((space.n * space.n - 1) as f64) / 2.0 + epsilon
}

/// True iff r > (1 + 2s + q(2p-1)) / (2p-q) (strict) and r >= 2pq.
pub fn sobolev_r_condition(space: &GrassmannParams, s: f64, r: i64) -> bool {
    let lhs = r as f64;
    let rhs = (1.0 + 2.0 * s + (space.q * (2 * space.p - 1)) as f64)
        / ((2 * space.p - space.q) as f64);
    lhs > rhs && r >= space.dim_uk
}

/// True iff r >= 2pq, the hypothesis under which the convolution measure is
/// absolutely continuous.
pub fn absolute_continuity_gate(space: &GrassmannParams, r: i64) -> bool {
    r >= space.dim_uk
}
