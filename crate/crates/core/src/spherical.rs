//! Evaluation of the twisted spherical functions on the torus: determinantal
//! formula over Jacobi blocks with confluent divided differences, identity
//! calibration, finite-difference gradients, and decay-exponent fits.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi;
use crate::space::GrassmannParams;
use crate::weights::{make_weight, SphericalWeight};

/// Largest admissible m_1; beyond this the block degrees make the divided
/// difference tables too ill-conditioned for double precision.
pub const MAX_M1: i64 = 300;

const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusPoint {
    pub t: Vec<f64>,
}

pub fn make_torus_point(space: &GrassmannParams, t: Vec<f64>) -> Result<TorusPoint> {
    let q = space.q as usize;
    if t.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: t.len() });
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterDomain("torus coordinates must be finite".into()));
    }
    Ok(TorusPoint { t })
}

/// Reduce by the actual invariances of the evaluation formula: 2 pi
/// periodicity, evenness in each coordinate, and permutations. The result has
/// coordinates in [0, pi] sorted decreasingly. No folding across pi/2 is
/// applied: t -> pi - t flips the sign of cos t and is not a symmetry when
/// |l| is odd.
pub fn canonicalize(space: &GrassmannParams, t: &[f64]) -> Result<TorusPoint> {
    let q = space.q as usize;
    if t.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: t.len() });
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut out: Vec<f64> = t
        .iter()
        .map(|&v| {
            let mut w = v.rem_euclid(tau);
            if w > std::f64::consts::PI {
                w -= tau;
            }
            w.abs()
        })
        .collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    make_torus_point(space, out)
}

/// Canonical domain: pi/2 >= t_1 >= ... >= t_q >= 0.
pub fn is_canonical(space: &GrassmannParams, pt: &TorusPoint) -> bool {
    pt.t.len() == space.q as usize
        && pt.t.first().map_or(true, |&t1| t1 <= std::f64::consts::FRAC_PI_2 + 1e-15)
        && pt.t.last().map_or(true, |&tq| tq >= 0.0)
        && pt.t.windows(2).all(|w| w[0] >= w[1])
}

/// Regular points have all coordinates strictly inside (0, pi/2) and pairwise
/// distinct; these represent elements outside the normalizer of K.
pub fn is_regular(space: &GrassmannParams, pt: &TorusPoint) -> bool {
    if pt.t.len() != space.q as usize {
        return false;
    }
    let inside = pt
        .t
        .iter()
        .all(|&v| v > 0.0 && v < std::f64::consts::FRAC_PI_2);
    let distinct = (0..pt.t.len()).all(|i| (0..i).all(|j| pt.t[i] != pt.t[j]));
    inside && distinct
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Divide by the fully confluent value at t = 0, cached per weight.
    IdentityCalibrated,
    /// Multiply by the closed-form constant; agrees with calibration up to
    /// floating-point error and exists as an independent cross-check.
    ExplicitConstant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphericalEvalOptions {
    /// Spacing of cos(2 t_i) below which coincident nodes are merged and the
    /// divided-difference table switches to derivative columns.
    pub confluence_tolerance: f64,
    pub normalization_mode: NormalizationMode,
}

impl Default for SphericalEvalOptions {
    fn default() -> Self {
        SphericalEvalOptions {
            confluence_tolerance: 1e-6,
            normalization_mode: NormalizationMode::IdentityCalibrated,
        }
    }
}

/// One-variable block inside the determinant: the classical Jacobi polynomial
/// with alpha = k and beta = |l|.
pub fn normalized_block(nhat: i64, space: &GrassmannParams, l: i64, x: f64) -> Result<f64> {
    jacobi::jacobi(nhat, space.k as f64, l.abs() as f64, x)
}

/// Transitively cluster ascending-sorted nodes whose gaps fall below tol and
/// snap each cluster to its mean, so that coincident-node detection inside the
/// divided-difference table is an exact equality test.
fn cluster_nodes(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut start = 0;
    for i in 0..=sorted.len() {
        let boundary = i == sorted.len() || (i > 0 && sorted[i] - sorted[i - 1] >= tol);
        if boundary && i > start {
            let mean = sorted[start..i].iter().sum::<f64>() / (i - start) as f64;
            out.extend(std::iter::repeat(mean).take(i - start));
            start = i;
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, v| acc * v as f64)
}

/// Prefix divided differences f[z_1], f[z_1,z_2], ..., f[z_1..z_q] of the
/// degree-n Jacobi block over (possibly repeated) ascending nodes. Repeated
/// nodes use the Hermite rule f[z,...,z] = f^(r)(z) / r!.
fn divided_difference_prefix(
    n: i64,
    alpha: f64,
    beta: f64,
    nodes: &[f64],
) -> Result<Vec<f64>> {
    let q = nodes.len();
    let mut table = vec![vec![0.0f64; q]; q];
    for (r, row) in table.iter_mut().enumerate() {
        row[r] = jacobi::jacobi(n, alpha, beta, nodes[r])?;
    }
    for len in 1..q {
        for r in 0..q - len {
            let c = r + len;
            table[r][c] = if nodes[c] == nodes[r] {
                jacobi::jacobi_derivative(n, alpha, beta, len as i64, nodes[r])?
                    / factorial(len)
            } else {
                (table[r + 1][c] - table[r][c - 1]) / (nodes[c] - nodes[r])
            };
        }
    }
    Ok((0..q).map(|c| table[0][c]).collect())
}

fn validate_eval(
    space: &GrassmannParams,
    w: &SphericalWeight,
    t: &[f64],
    opts: &SphericalEvalOptions,
) -> Result<()> {
    let q = space.q as usize;
    if w.m.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: w.m.len() });
    }
    if t.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: t.len() });
    }
    if w.m[0] > MAX_M1 {
        return Err(Error::ParameterDomain(format!(
            "m_1 = {} exceeds the supported maximum {MAX_M1}",
            w.m[0]
        )));
    }
    if !(opts.confluence_tolerance > 0.0) {
        return Err(Error::ParameterDomain(
            "confluence_tolerance must be positive".into(),
        ));
    }
    Ok(())
}

/// Uncalibrated value: the prefix divided-difference determinant times
/// prod_j cos^{|l|}(t_j). Equal to det[f_i(x_j)] / prod_{i<j}|x_i - x_j| times
/// the cosine factor at distinct nodes, and to its confluent limit otherwise.
fn raw_value(
    space: &GrassmannParams,
    w: &SphericalWeight,
    t: &[f64],
    confluence_tolerance: f64,
) -> Result<f64> {
    let q = space.q as usize;
    let le = w.l.abs();
    let mut xs: Vec<f64> = t.iter().map(|&ti| (2.0 * ti).cos()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nodes = cluster_nodes(&xs, confluence_tolerance);
    let mut mat = DMatrix::<f64>::zeros(q, q);
    for (i, &ni) in w.spectral_n.iter().enumerate() {
        let row = divided_difference_prefix(ni, space.k as f64, le as f64, &nodes)?;
        for (j, &v) in row.iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    let det = mat.lu().determinant();
    let cos_factor: f64 = t.iter().map(|&ti| ti.cos().powi(le as i32)).product();
    Ok(det * cos_factor)
}

type CacheKey = (i64, i64, i64, Vec<i64>);

fn calibration_cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Fully confluent raw value at t = 0, computed at most once per weight and
/// shared across threads.
fn identity_raw(space: &GrassmannParams, w: &SphericalWeight) -> Result<f64> {
    let key: CacheKey = (space.p, space.q, w.l.abs(), w.m.clone());
    if let Some(&v) = calibration_cache().read().expect("cache lock").get(&key) {
        return Ok(v);
    }
    let mut cache = calibration_cache().write().expect("cache lock");
    if let Some(&v) = cache.get(&key) {
        return Ok(v);
    }
    let zeros = vec![0.0; space.q as usize];
    let v = raw_value(space, w, &zeros, 1e-6)?;
    cache.insert(key, v);
    Ok(v)
}

/// Closed-form normalization constant: the reciprocal of the fully confluent
/// determinant at t = 0, expanded as
///   (-1)^Q 2^Q prod_{j=0}^{q-1} (k+1)_j j! prod_i [n_i! / (k+1)_{n_i}]
///     / prod_{i<j} (c_i - c_j),
/// with Q = q(q-1)/2 and c_i the spectral constants of the weight.
fn explicit_constant(space: &GrassmannParams, w: &SphericalWeight) -> f64 {
    let q = space.q;
    let k = space.k as f64;
    let big_q = (q * (q - 1) / 2) as i32;
    let mut c = if big_q % 2 == 0 { 1.0 } else { -1.0 };
    c *= 2f64.powi(big_q);
    for j in 0..q {
        c *= jacobi::pochhammer(k + 1.0, j) * jacobi::pochhammer(1.0, j);
    }
    for &ni in &w.spectral_n {
        for s in 1..=ni {
            c *= s as f64 / (k + s as f64);
        }
    }
    for i in 0..w.spectral_c.len() {
        for j in (i + 1)..w.spectral_c.len() {
            c /= (w.spectral_c[i] - w.spectral_c[j]) as f64;
        }
    }
    c
}

pub fn spherical_value(
    space: &GrassmannParams,
    w: &SphericalWeight,
    pt: &TorusPoint,
    opts: &SphericalEvalOptions,
) -> Result<f64> {
    validate_eval(space, w, &pt.t, opts)?;
    let raw = raw_value(space, w, &pt.t, opts.confluence_tolerance)?;
    match opts.normalization_mode {
        NormalizationMode::IdentityCalibrated => Ok(raw / identity_raw(space, w)?),
        NormalizationMode::ExplicitConstant => Ok(raw * explicit_constant(space, w)),
    }
}

/// Central differences with a caller-selected step; truncation error O(step^2).
pub fn spherical_gradient_with_step(
    space: &GrassmannParams,
    w: &SphericalWeight,
    pt: &TorusPoint,
    opts: &SphericalEvalOptions,
    step: f64,
) -> Result<Vec<f64>> {
    validate_eval(space, w, &pt.t, opts)?;
    if !is_regular(space, pt) {
        return Err(Error::NotRegular(format!(
            "gradient requires a regular torus point, got {:?}",
            pt.t
        )));
    }
    if !(step > 0.0) {
        return Err(Error::ParameterDomain("step must be positive".into()));
    }
    let mut grad = Vec::with_capacity(pt.t.len());
    for j in 0..pt.t.len() {
        let mut plus = pt.t.clone();
        let mut minus = pt.t.clone();
        plus[j] += step;
        minus[j] -= step;
        let fp = raw_value(space, w, &plus, opts.confluence_tolerance)?;
        let fm = raw_value(space, w, &minus, opts.confluence_tolerance)?;
        let scale = match opts.normalization_mode {
            NormalizationMode::IdentityCalibrated => 1.0 / identity_raw(space, w)?,
            NormalizationMode::ExplicitConstant => explicit_constant(space, w),
        };
        grad.push(scale * (fp - fm) / (2.0 * step));
    }
    Ok(grad)
}

pub fn spherical_gradient(
    space: &GrassmannParams,
    w: &SphericalWeight,
    pt: &TorusPoint,
    opts: &SphericalEvalOptions,
) -> Result<Vec<f64>> {
    spherical_gradient_with_step(space, w, pt, opts, GRADIENT_STEP)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayBranch {
    /// Least-squares slope of log |psi| against log n-hat.
    pub slope: f64,
    /// Slope divided by the number of growing coordinates.
    pub per_axis_slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Fit along m = (n, ..., n), all coordinates growing.
    pub diagonal: DecayBranch,
    /// Fit along m = (n, ..., n, 0), last coordinate pinned to zero;
    /// present only when requested and q >= 2.
    pub boundary: Option<DecayBranch>,
}

fn fit_log_slope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 4 {
        return Err(Error::ParameterDomain(format!(
            "decay fit needs at least 4 usable sample points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    Ok((slope, (rss / n).sqrt()))
}

fn decay_branch(
    space: &GrassmannParams,
    l: i64,
    pt: &TorusPoint,
    n_values: &[i64],
    make_m: impl Fn(i64) -> Vec<i64>,
    axes: i64,
) -> Result<DecayBranch> {
    let opts = SphericalEvalOptions::default();
    let mut samples = Vec::with_capacity(n_values.len());
    for &nv in n_values {
        let w = make_weight(space, l, make_m(nv))?;
        let v = spherical_value(space, &w, pt, &opts)?;
        samples.push(((nv as f64).ln(), v.abs().ln()));
    }
    let (slope, residual) = fit_log_slope(&samples)?;
    Ok(DecayBranch { slope, per_axis_slope: slope / axes as f64, residual })
}

/// Log-log decay fit of |psi| along growing weight families at a fixed
/// regular torus point.
pub fn decay_exponent_fit(
    space: &GrassmannParams,
    l: i64,
    pt: &TorusPoint,
    n_values: &[i64],
    include_boundary: bool,
) -> Result<DecayFit> {
    if !is_regular(space, pt) {
        return Err(Error::NotRegular(format!(
            "decay fit requires a regular torus point, got {:?}",
            pt.t
        )));
    }
    if n_values.len() < 4 {
        return Err(Error::ParameterDomain(format!(
            "decay fit needs at least 4 sample degrees, got {}",
            n_values.len()
        )));
    }
    if n_values[0] < 10 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ParameterDomain(
            "sample degrees must be strictly increasing with minimum >= 10".into(),
        ));
    }
    let q = space.q as usize;
    let diagonal = decay_branch(space, l, pt, n_values, |nv| vec![nv; q], space.q)?;
    let boundary = if include_boundary {
        if q < 2 {
            return Err(Error::ParameterDomain(
                "boundary decay branch needs q >= 2".into(),
            ));
        }
        let mk = |nv: i64| {
            let mut m = vec![nv; q];
            m[q - 1] = 0;
            m
        };
        Some(decay_branch(space, l, pt, n_values, mk, space.q - 1)?)
    } else {
        None
    };
    Ok(DecayFit { diagonal, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::make_space;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval(p: i64, q: i64, l: i64, m: &[i64], t: &[f64]) -> f64 {
        let s = make_space(p, q).unwrap();
        let w = make_weight(&s, l, m.to_vec()).unwrap();
        let pt = make_torus_point(&s, t.to_vec()).unwrap();
        spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap()
    }

    #[test]
    fn rank_one_closed_forms() {
        for i in 0..=24 {
            let t = -0.2 + 0.08 * i as f64;
            assert_relative_eq!(eval(1, 1, 0, &[1], &[t]), (2.0 * t).cos(), epsilon = 1e-12);
            assert_relative_eq!(eval(1, 1, 1, &[0], &[t]), t.cos(), epsilon = 1e-12);
            assert_relative_eq!(
                eval(1, 1, 2, &[1], &[t]),
                (2.0 * (2.0 * t).cos() - 1.0) * t.cos().powi(2),
                epsilon = 1e-12
            );
            assert_relative_eq!(eval(1, 1, -1, &[0], &[t]), t.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn trivial_weight_is_constant_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (p, q) in [(1i64, 1i64), (2, 1), (2, 2), (3, 2)] {
            let zero = vec![0i64; q as usize];
            for _ in 0..20 {
                let t: Vec<f64> = (0..q)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2))
                    .collect();
                assert_relative_eq!(eval(p, q, 0, &zero, &t), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn identity_value_is_exactly_one_when_calibrated() {
        for (p, q) in [(1i64, 1i64), (2, 1), (2, 2), (3, 2)] {
            let s = make_space(p, q).unwrap();
            for l in 0..=2 {
                for w in crate::weights::enumerate_weights(&s, l, 2).unwrap() {
                    let pt = make_torus_point(&s, vec![0.0; q as usize]).unwrap();
                    let v =
                        spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
                    assert_eq!(v, 1.0);
                }
            }
        }
    }

    #[test]
    fn normalization_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let explicit = SphericalEvalOptions {
            normalization_mode: NormalizationMode::ExplicitConstant,
            ..SphericalEvalOptions::default()
        };
        for (p, q) in [(1i64, 1i64), (2, 1), (2, 2), (3, 2), (4, 2)] {
            let s = make_space(p, q).unwrap();
            for l in 0..=3 {
                for w in crate::weights::enumerate_weights(&s, l, 3).unwrap() {
                    let t: Vec<f64> = (0..q)
                        .map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2))
                        .collect();
                    let pt = make_torus_point(&s, t).unwrap();
                    let a =
                        spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
                    let b = spherical_value(&s, &w, &pt, &explicit).unwrap();
                    assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn bounded_by_one_on_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (p, q) in [(1i64, 1i64), (2, 1), (3, 1), (4, 1), (2, 2), (3, 2)] {
            let s = make_space(p, q).unwrap();
            let grid: Vec<Vec<f64>> = (0..50)
                .map(|_| {
                    (0..q)
                        .map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2))
                        .collect()
                })
                .collect();
            for l in -3..=3 {
                for w in crate::weights::enumerate_weights(&s, l, 6).unwrap() {
                    for t in &grid {
                        let pt = make_torus_point(&s, t.clone()).unwrap();
                        let v = spherical_value(&s, &w, &pt, &SphericalEvalOptions::default())
                            .unwrap();
                        assert!(
                            v.abs() <= 1.0 + 1e-8,
                            "|psi| = {} > 1 at (p,q)=({p},{q}), l={l}, m={:?}, t={t:?}",
                            v.abs(),
                            w.m
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_and_sign_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (p, q) in [(2i64, 2i64), (3, 2), (3, 3)] {
            let s = make_space(p, q).unwrap();
            for l in 0..=2 {
                for w in crate::weights::enumerate_weights(&s, l, 2).unwrap() {
                    let t: Vec<f64> = (0..q)
                        .map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2))
                        .collect();
                    let base = eval_weight(&s, &w, &t);
                    let mut perm = t.clone();
                    perm.reverse();
                    assert_relative_eq!(eval_weight(&s, &w, &perm), base, epsilon = 1e-10);
                    let mut flipped = t.clone();
                    flipped[0] = -flipped[0];
                    assert_relative_eq!(eval_weight(&s, &w, &flipped), base, epsilon = 1e-10);
                }
            }
        }
    }

    fn eval_weight(s: &GrassmannParams, w: &SphericalWeight, t: &[f64]) -> f64 {
        let pt = make_torus_point(s, t.to_vec()).unwrap();
        spherical_value(s, w, &pt, &SphericalEvalOptions::default()).unwrap()
    }

    #[test]
    fn confluence_continuity_sweep() {
        let s = make_space(2, 2).unwrap();
        let w = make_weight(&s, 1, vec![3, 1]).unwrap();
        let opts = SphericalEvalOptions::default();
        // Coincident point: both coordinates at t0.
        let t0 = 0.6f64;
        let x0 = (2.0 * t0).cos();
        let coincident = make_torus_point(&s, vec![t0, t0]).unwrap();
        let vc = spherical_value(&s, &w, &coincident, &opts).unwrap();
        let mut prev_diff = f64::INFINITY;
        for &eps in &[1e-3, 1e-4, 1e-5] {
            // Split the nodes to cos 2t = x0 +- eps, i.e. |x gap| = 2 eps.
            let ta = 0.5 * (x0 + eps).acos();
            let tb = 0.5 * (x0 - eps).acos();
            let pt = make_torus_point(&s, vec![ta, tb]).unwrap();
            let v = spherical_value(&s, &w, &pt, &opts).unwrap();
            let diff = (v - vc).abs();
            assert!(diff <= 100.0 * eps, "diff {diff} not O(eps) at eps={eps}");
            assert!(diff < prev_diff || diff < 1e-12);
            prev_diff = diff;
        }
    }

    #[test]
    fn gradient_closed_form_and_zero_weight() {
        let s = make_space(1, 1).unwrap();
        let w = make_weight(&s, 0, vec![1]).unwrap();
        let pt = make_torus_point(&s, vec![std::f64::consts::FRAC_PI_8]).unwrap();
        let g = spherical_gradient(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
        assert_relative_eq!(g[0], -(2f64.sqrt()), epsilon = 1e-8);

        let s = make_space(2, 2).unwrap();
        let w = make_weight(&s, 0, vec![0, 0]).unwrap();
        let pt = make_torus_point(&s, vec![0.9, 0.4]).unwrap();
        let g = spherical_gradient(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
        for v in g {
            assert!(v.abs() <= 1e-9);
        }
    }

    #[test]
    fn gradient_second_order_in_step() {
        let s = make_space(2, 2).unwrap();
        let w = make_weight(&s, 1, vec![2, 1]).unwrap();
        let pt = make_torus_point(&s, vec![0.95, 0.35]).unwrap();
        let opts = SphericalEvalOptions::default();
        let coarse = spherical_gradient_with_step(&s, &w, &pt, &opts, 2e-3).unwrap();
        let fine = spherical_gradient_with_step(&s, &w, &pt, &opts, 1e-3).unwrap();
        // Richardson: the step-halved error drops by ~4, so the extrapolated
        // value (4 fine - coarse)/3 is the reference.
        for j in 0..2 {
            let reference = (4.0 * fine[j] - coarse[j]) / 3.0;
            let ec = (coarse[j] - reference).abs();
            let ef = (fine[j] - reference).abs();
            assert!(ec > 1e-12, "coarse step already exact, test vacuous");
            let ratio = ec / ef;
            assert!(
                (2.5..6.0).contains(&ratio),
                "error ratio {ratio} not second order"
            );
        }
    }

    #[test]
    fn gradient_vanishes_near_axis_by_evenness() {
        let s = make_space(2, 1).unwrap();
        let w = make_weight(&s, 1, vec![2]).unwrap();
        let pt = make_torus_point(&s, vec![1e-3]).unwrap();
        let g = spherical_gradient(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
        assert!(g[0].abs() <= 100.0 * 1e-3);
    }

    #[test]
    fn gradient_rejects_irregular_points() {
        let s = make_space(2, 2).unwrap();
        let w = make_weight(&s, 0, vec![1, 0]).unwrap();
        let opts = SphericalEvalOptions::default();
        let boundary = make_torus_point(&s, vec![0.5, 0.0]).unwrap();
        assert!(spherical_gradient(&s, &w, &boundary, &opts).is_err());
        let repeated = make_torus_point(&s, vec![0.5, 0.5]).unwrap();
        assert!(spherical_gradient(&s, &w, &repeated, &opts).is_err());
    }

    #[test]
    fn canonicalize_wraps_folds_and_sorts() {
        let s = make_space(3, 2).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let pt = canonicalize(&s, &[-0.3, 1.2 + tau]).unwrap();
        assert_relative_eq!(pt.t[0], 1.2, epsilon = 1e-12);
        assert_relative_eq!(pt.t[1], 0.3, epsilon = 1e-12);
        assert!(is_canonical(&s, &pt));
        assert!(is_regular(&s, &pt));
        // Values above pi/2 are preserved, not reflected: the map keeps every
        // evaluation point equivalent under evenness and periodicity alone.
        let pt = canonicalize(&s, &[1.8, -0.2 - tau]).unwrap();
        assert_relative_eq!(pt.t[0], 1.8, epsilon = 1e-12);
        assert_relative_eq!(pt.t[1], 0.2, epsilon = 1e-12);
        assert!(!is_canonical(&s, &pt));
        let boundary = make_torus_point(&s, vec![0.5, 0.0]).unwrap();
        assert!(is_canonical(&s, &boundary) && !is_regular(&s, &boundary));
    }

    #[test]
    fn value_invariant_under_canonicalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = make_space(3, 2).unwrap();
        let w = make_weight(&s, 1, vec![2, 1]).unwrap();
        for _ in 0..30 {
            let t: Vec<f64> = (0..2).map(|_| rng.gen_range(-7.0..7.0)).collect();
            let canon = canonicalize(&s, &t).unwrap();
            let direct = eval_weight(&s, &w, &t);
            let reduced = eval_weight(&s, &w, &canon.t);
            assert_relative_eq!(direct, reduced, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_oversized_weights_and_bad_lengths() {
        let s = make_space(2, 1).unwrap();
        let w = make_weight(&s, 0, vec![MAX_M1 + 1]).unwrap();
        let pt = make_torus_point(&s, vec![0.4]).unwrap();
        assert!(spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).is_err());
        assert!(make_torus_point(&s, vec![0.1, 0.2]).is_err());
        assert!(make_torus_point(&s, vec![f64::NAN]).is_err());
    }

    #[test]
    fn calibration_cache_is_thread_consistent() {
        let s = make_space(2, 2).unwrap();
        let w = make_weight(&s, 2, vec![4, 1]).unwrap();
        let pt = make_torus_point(&s, vec![0.8, 0.3]).unwrap();
        let expected =
            spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (s, w, pt) = (s, w.clone(), pt.clone());
                std::thread::spawn(move || {
                    spherical_value(&s, &w, &pt, &SphericalEvalOptions::default()).unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    }

    #[test]
    fn decay_fit_rank_one() {
        let s = make_space(1, 1).unwrap();
        let pt = make_torus_point(&s, vec![0.7]).unwrap();
        let ns: Vec<i64> = (2..=20).map(|i| 10 * i).collect();
        let fit = decay_exponent_fit(&s, 0, &pt, &ns, false).unwrap();
        assert!(
            fit.diagonal.per_axis_slope <= -0.4,
            "slope {} too shallow",
            fit.diagonal.per_axis_slope
        );
    }

    #[test]
    fn decay_fit_boundary_branch_steeper() {
        let s = make_space(2, 2).unwrap();
        let pt = make_torus_point(&s, vec![0.9, 0.4]).unwrap();
        let ns: Vec<i64> = (2..=20).map(|i| 10 * i).collect();
        let fit = decay_exponent_fit(&s, 0, &pt, &ns, true).unwrap();
        let b = fit.boundary.expect("boundary branch requested");
        // Boundary stratum decays with per-axis exponent (2p-q+3)/2 = 2.5
        // against the interior 1.0; allow a generous fitting margin.
        assert!(fit.diagonal.per_axis_slope <= -0.8);
        assert!(b.per_axis_slope <= -1.8, "boundary slope {}", b.per_axis_slope);
        assert!(b.per_axis_slope < fit.diagonal.per_axis_slope);
    }

    #[test]
    fn decay_fit_validates_inputs() {
        let s = make_space(2, 1).unwrap();
        let pt = make_torus_point(&s, vec![0.7]).unwrap();
        assert!(decay_exponent_fit(&s, 0, &pt, &[10, 20, 30], false).is_err());
        assert!(decay_exponent_fit(&s, 0, &pt, &[5, 10, 15, 20], false).is_err());
        assert!(decay_exponent_fit(&s, 0, &pt, &[10, 20, 20, 30], false).is_err());
        assert!(decay_exponent_fit(&s, 0, &pt, &[10, 20, 30, 40], true).is_err());
        let irregular = make_torus_point(&s, vec![0.0]).unwrap();
        assert!(decay_exponent_fit(&s, 0, &irregular, &[10, 20, 30, 40], false).is_err());
    }
}
