//! Group-side sampling and Monte Carlo pairings: Haar draws on the unitary
//! group and its block-diagonal subgroup, torus embeddings, KAK coordinates,
//! twisted orbital measures, and the estimators used to validate the product
//! identities satisfied by twisted spherical functions.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::rng;
use crate::space::GrassmannParams;
use crate::spherical::{self, SphericalEvalOptions, TorusPoint};
use crate::weights::SphericalWeight;

const UNITARY_TOL: f64 = 1e-10;
const DRIFT_TOL: f64 = 1e-9;
const STDERR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct UnitaryElement {
    pub entries: CMatrix,
}

#[derive(Clone, Debug)]
pub struct KElement {
    pub a_block: CMatrix,
    pub b_block: CMatrix,
}

#[derive(Clone, Debug)]
pub struct OrbitalMeasureSpec {
    pub l: i64,
    pub points: Vec<TorusPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct MCEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub samples: u64,
}

impl MCEstimate {
    fn from_raw(raw: &rng::McRawSums) -> Self {
        MCEstimate { value: raw.mean(), stderr: raw.stderr(), samples: raw.samples }
    }
}

#[derive(Clone, Debug)]
pub struct PairingReport {
    pub estimate: MCEstimate,
    pub reference: Complex64,
    pub sigmas: f64,
    pub repaired_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct FunctionalEquationReport {
    pub residual: MCEstimate,
    pub sigmas: f64,
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub joint: MCEstimate,
    pub composed: MCEstimate,
    pub sigmas: f64,
    pub repaired_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct CombinationReport {
    pub estimate: MCEstimate,
    pub reference: Complex64,
    pub sigmas: f64,
}

pub fn make_unitary(space: &GrassmannParams, entries: CMatrix) -> Result<UnitaryElement> {
    let n = space.n as usize;
    if entries.nrows() != n || entries.ncols() != n {
        return Err(Error::LengthMismatch { expected: n, got: entries.nrows() });
    }
    let defect = linalg::unitarity_defect(&entries);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let det_err = (linalg::determinant(&entries) - Complex64::new(1.0, 0.0)).norm();
    if det_err > UNITARY_TOL {
        return Err(Error::NotUnitary(det_err));
    }
    Ok(UnitaryElement { entries })
}

pub fn make_k_element(space: &GrassmannParams, a_block: CMatrix, b_block: CMatrix) -> Result<KElement> {
    let (p, q) = (space.p as usize, space.q as usize);
    if a_block.nrows() != p || a_block.ncols() != p {
        return Err(Error::LengthMismatch { expected: p, got: a_block.nrows() });
    }
    if b_block.nrows() != q || b_block.ncols() != q {
        return Err(Error::LengthMismatch { expected: q, got: b_block.nrows() });
    }
    let defect = linalg::unitarity_defect(&a_block).max(linalg::unitarity_defect(&b_block));
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let det_err =
        (linalg::determinant(&a_block) * linalg::determinant(&b_block) - Complex64::new(1.0, 0.0)).norm();
    if det_err > UNITARY_TOL {
        return Err(Error::NotUnitary(det_err));
    }
    Ok(KElement { a_block, b_block })
}

/// Block-diagonal embedding of a subgroup element into the full group.
pub fn embed(space: &GrassmannParams, k: &KElement) -> CMatrix {
    let (p, q) = (space.p as usize, space.q as usize);
    let n = p + q;
    let mut m = CMatrix::zeros(n, n);
    m.view_mut((0, 0), (p, p)).copy_from(&k.a_block);
    m.view_mut((p, p), (q, q)).copy_from(&k.b_block);
    m
}

/// Integer power of a unimodular complex number, with true inversion for
/// negative exponents.
fn unit_pow(z: Complex64, e: i64) -> Complex64 {
    let base = if e >= 0 { z } else { z.conj() / z.norm_sqr() };
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..e.unsigned_abs() {
        acc *= base;
    }
    acc
}

/// The twisting character: the determinant of the lower block raised to l.
pub fn chi_l(l: i64, k: &KElement) -> Complex64 {
    unit_pow(linalg::determinant(&k.b_block), l)
}

fn torus_matrix(space: &GrassmannParams, pt: &TorusPoint) -> CMatrix {
    let (q, n) = (space.q as usize, space.n as usize);
    let mut m = CMatrix::identity(n, n);
    for j in 0..q {
        let (c, s) = (pt.t[j].cos(), pt.t[j].sin());
        m[(j, j)] = Complex64::new(c, 0.0);
        m[(n - 1 - j, n - 1 - j)] = Complex64::new(c, 0.0);
        m[(j, n - 1 - j)] = Complex64::new(0.0, s);
        m[(n - 1 - j, j)] = Complex64::new(0.0, s);
    }
    m
}

/// Torus representative pairing coordinate j with coordinate n-1-j through a
/// rotation block with imaginary off-diagonal entries.
pub fn torus_element(space: &GrassmannParams, pt: &TorusPoint) -> Result<UnitaryElement> {
    if pt.t.len() != space.q as usize {
        return Err(Error::LengthMismatch { expected: space.q as usize, got: pt.t.len() });
    }
    Ok(UnitaryElement { entries: torus_matrix(space, pt) })
}

/// Haar-distributed unitary from orthonormalization of a complex Gaussian
/// matrix; the positive-diagonal triangular convention makes this exact.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    linalg::mgs_orthonormalize(&g).expect("Gaussian matrix is almost surely full rank")
}

/// Haar draw on the determinant-one pair group: independent Haar factors, a
/// phase pulled into the first block to fix the joint determinant, and a
/// uniformly random branch of the p-th root to keep the law exactly invariant.
pub fn haar_k(space: &GrassmannParams, rng: &mut ChaCha8Rng) -> KElement {
    let (p, q) = (space.p as usize, space.q as usize);
    let mut a = haar_unitary(p, rng);
    let b = haar_unitary(q, rng);
    let theta = (linalg::determinant(&a) * linalg::determinant(&b)).arg();
    let branch: u64 = rng.gen_range(0..p as u64);
    let zeta = Complex64::from_polar(
        1.0,
        (-theta + std::f64::consts::TAU * branch as f64) / p as f64,
    );
    a *= zeta;
    KElement { a_block: a, b_block: b }
}

/// Singular-value coordinates of the off-diagonal block, i.e. the canonical
/// torus coordinates of the double coset containing u.
pub fn kak_coordinates(space: &GrassmannParams, u: &UnitaryElement) -> Result<TorusPoint> {
    let (p, q) = (space.p as usize, space.q as usize);
    let g12 = u.entries.view((0, p), (p, q)).clone_owned();
    let (_, sigma, _) = linalg::jacobi_svd(&g12)?;
    let t: Vec<f64> = sigma.iter().map(|&s| s.clamp(0.0, 1.0).asin()).collect();
    spherical::make_torus_point(space, t)
}

fn reversal(q: usize) -> CMatrix {
    CMatrix::from_fn(q, q, |i, j| {
        if i + j == q - 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    })
}

/// Full double-coset factorization u = k1 * e_T(t) * k2 with k1, k2 in the
/// determinant-one pair group and e_T the torus representative above.
pub fn kak_decompose(
    space: &GrassmannParams,
    u: &UnitaryElement,
) -> Result<(KElement, TorusPoint, KElement)> {
    let (p, q, n) = (space.p as usize, space.q as usize, space.n as usize);
    let f = linalg::cs_decompose(p, q, &u.entries)?;
    let rev = reversal(q);
    let mut k1 = KElement { a_block: f.a1, b_block: &f.b1 * &rev };
    let mut k2 = KElement { a_block: f.a2, b_block: &rev * &f.b2 };
    let d1 = linalg::determinant(&k1.a_block) * linalg::determinant(&k1.b_block);
    let phase = -d1.arg() / n as f64;
    let (z1, z2) = (Complex64::from_polar(1.0, phase), Complex64::from_polar(1.0, -phase));
    k1.a_block *= z1;
    k1.b_block *= z1;
    k2.a_block *= z2;
    k2.b_block *= z2;
    let tp = spherical::make_torus_point(space, f.t)?;
    Ok((k1, tp, k2))
}

fn group_value_raw(
    space: &GrassmannParams,
    w: &SphericalWeight,
    g: &CMatrix,
    opts: &SphericalEvalOptions,
) -> Result<Complex64> {
    let u = UnitaryElement { entries: g.clone() };
    let (k1, tp, k2) = kak_decompose(space, &u)?;
    let det_b = linalg::determinant(&k1.b_block) * linalg::determinant(&k2.b_block);
    let torus_val = spherical::spherical_value(space, w, &tp, opts)?;
    // psi(k1 u k2) = chi(k1 k2)^{-1} psi(u), so at u = k1 e_T k2 the value is
    // the torus value divided by chi of the two factors.
    Ok(unit_pow(det_b, -w.l) * torus_val)
}

/// Value of the twisted spherical function at an arbitrary group element,
/// through its double-coset factorization.
pub fn spherical_value_group(
    space: &GrassmannParams,
    w: &SphericalWeight,
    u: &UnitaryElement,
    opts: &SphericalEvalOptions,
) -> Result<Complex64> {
    group_value_raw(space, w, &u.entries, opts)
}

pub fn make_orbital_spec(
    space: &GrassmannParams,
    l: i64,
    points: Vec<TorusPoint>,
) -> Result<OrbitalMeasureSpec> {
    if points.is_empty() {
        return Err(Error::ParameterDomain("orbital measure needs at least one point".into()));
    }
    for pt in &points {
        if !spherical::is_regular(space, pt) {
            return Err(Error::NotRegular(format!("{:?}", pt.t)));
        }
    }
    Ok(OrbitalMeasureSpec { l, points })
}

fn restore_special_unitary(m: &CMatrix) -> CMatrix {
    let q = linalg::mgs_orthonormalize(m).expect("drifted sample stays full rank");
    let phase = linalg::determinant(&q).arg();
    q * Complex64::from_polar(1.0, -phase / m.nrows() as f64)
}

/// One draw from the twisted orbital measure: a random alternating product
/// k_1 a_1 k_2 ... a_r k_{r+1} together with the character weight
/// chi(k_1 ... k_{r+1})^{-1}. The flag reports whether accumulated rounding
/// drift forced a re-orthonormalization.
pub fn orbital_sample(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    rng: &mut ChaCha8Rng,
) -> (CMatrix, Complex64, bool) {
    let n = space.n as usize;
    let mut g = CMatrix::identity(n, n);
    let mut det_b = Complex64::new(1.0, 0.0);
    for pt in &spec.points {
        let k = haar_k(space, rng);
        det_b *= linalg::determinant(&k.b_block);
        g = g * embed(space, &k) * torus_matrix(space, pt);
    }
    let k = haar_k(space, rng);
    det_b *= linalg::determinant(&k.b_block);
    g *= embed(space, &k);
    let weight = unit_pow(det_b, -spec.l);
    let defect = linalg::unitarity_defect(&g);
    let repaired = defect > DRIFT_TOL;
    if repaired {
        g = restore_special_unitary(&g);
    }
    (g, weight, repaired)
}

fn stream_tag(kind: &str, space: &GrassmannParams, l: i64, m: &[i64], points: &[TorusPoint]) -> String {
    let mut bytes = Vec::with_capacity(points.len() * 8 * 2);
    for pt in points {
        for &t in &pt.t {
            bytes.extend_from_slice(&t.to_bits().to_le_bytes());
        }
    }
    let pt_hash = rng::fnv1a64(&bytes);
    format!("{kind}/p{}q{}l{l}m{m:?}/{pt_hash:016x}", space.p, space.q)
}

/// Deterministic value of the pairing: the product of spherical values at the
/// defining points (inversion leaves these values unchanged by evenness).
pub fn pairing_reference(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    w: &SphericalWeight,
    opts: &SphericalEvalOptions,
) -> Result<Complex64> {
    let mut acc = 1.0f64;
    for pt in &spec.points {
        acc *= spherical::spherical_value(space, w, pt, opts)?;
    }
    Ok(Complex64::new(acc, 0.0))
}

fn check_character_match(spec: &OrbitalMeasureSpec, w: &SphericalWeight) -> Result<()> {
    if spec.l != w.l {
        return Err(Error::ParameterDomain(format!(
            "measure character {} does not match weight character {}",
            spec.l, w.l
        )));
    }
    Ok(())
}

/// Monte Carlo pairing of the orbital measure against the conjugated
/// spherical function, with its deterministic product reference.
pub fn pairing_estimate(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    w: &SphericalWeight,
    samples: u64,
    seed: u64,
) -> Result<PairingReport> {
    check_character_match(spec, w)?;
    let opts = SphericalEvalOptions::default();
    let reference = pairing_reference(space, spec, w, &opts)?;
    let tag = stream_tag("pairing", space, spec.l, &w.m, &spec.points);
    let (space_c, spec_c, w_c) = (*space, spec.clone(), w.clone());
    let raw = rng::mc_run(seed, &tag, samples, move |rng| {
        let (g, weight, repaired) = orbital_sample(&space_c, &spec_c, rng);
        let val = group_value_raw(&space_c, &w_c, &g, &opts)
            .expect("double-coset factorization failed during sampling");
        (val.conj() * weight, repaired)
    });
    let estimate = MCEstimate::from_raw(&raw);
    let sigmas = (estimate.value - reference).norm() / estimate.stderr.max(STDERR_FLOOR);
    Ok(PairingReport {
        estimate,
        reference,
        sigmas,
        repaired_fraction: raw.flagged as f64 / raw.samples as f64,
    })
}

/// Monte Carlo check of the product identity: averaging
/// psi(u1 k u2) chi(k) over Haar k reproduces psi(u1) psi(u2).
pub fn functional_equation_check(
    space: &GrassmannParams,
    w: &SphericalWeight,
    u1: &TorusPoint,
    u2: &TorusPoint,
    samples: u64,
    seed: u64,
) -> Result<FunctionalEquationReport> {
    let opts = SphericalEvalOptions::default();
    let lhs1 = spherical::spherical_value(space, w, u1, &opts)?;
    let lhs2 = spherical::spherical_value(space, w, u2, &opts)?;
    let product = Complex64::new(lhs1 * lhs2, 0.0);
    let a1 = torus_matrix(space, u1);
    let a2 = torus_matrix(space, u2);
    let tag = stream_tag("funceq", space, w.l, &w.m, &[u1.clone(), u2.clone()]);
    let (space_c, w_c) = (*space, w.clone());
    let raw = rng::mc_run(seed, &tag, samples, move |rng| {
        let k = haar_k(&space_c, rng);
        let g = &a1 * embed(&space_c, &k) * &a2;
        let val = group_value_raw(&space_c, &w_c, &g, &opts)
            .expect("double-coset factorization failed during sampling");
        (val * chi_l(w_c.l, &k) - product, false)
    });
    let residual = MCEstimate::from_raw(&raw);
    let sigmas = residual.value.norm() / residual.stderr.max(STDERR_FLOOR);
    Ok(FunctionalEquationReport { residual, sigmas })
}

/// Compares the joint sampler of the r-point orbital measure against the
/// composition of r independent one-point samplers; the two laws agree, so
/// the pairings must match within Monte Carlo error.
pub fn convolution_consistency_check(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    w: &SphericalWeight,
    samples: u64,
    seed: u64,
) -> Result<ConsistencyReport> {
    check_character_match(spec, w)?;
    if spec.points.len() < 2 {
        return Err(Error::ParameterDomain(
            "convolution consistency needs at least two points".into(),
        ));
    }
    let opts = SphericalEvalOptions::default();
    let joint_report = pairing_estimate(space, spec, w, samples, seed)?;
    let tag = stream_tag("composed", space, spec.l, &w.m, &spec.points);
    let (space_c, spec_c, w_c) = (*space, spec.clone(), w.clone());
    let raw = rng::mc_run(seed, &tag, samples, move |rng| {
        let n = space_c.n as usize;
        let mut g = CMatrix::identity(n, n);
        let mut det_b = Complex64::new(1.0, 0.0);
        for pt in &spec_c.points {
            let k_left = haar_k(&space_c, rng);
            let k_right = haar_k(&space_c, rng);
            det_b *= linalg::determinant(&k_left.b_block) * linalg::determinant(&k_right.b_block);
            g = g * embed(&space_c, &k_left) * torus_matrix(&space_c, pt) * embed(&space_c, &k_right);
        }
        let weight = unit_pow(det_b, -spec_c.l);
        let repaired = linalg::unitarity_defect(&g) > DRIFT_TOL;
        let g = if repaired { restore_special_unitary(&g) } else { g };
        let val = group_value_raw(&space_c, &w_c, &g, &opts)
            .expect("double-coset factorization failed during sampling");
        (val.conj() * weight, repaired)
    });
    let composed = MCEstimate::from_raw(&raw);
    let joint = joint_report.estimate;
    let combined = (joint.stderr * joint.stderr + composed.stderr * composed.stderr)
        .sqrt()
        .max(STDERR_FLOOR);
    let sigmas = (joint.value - composed.value).norm() / combined;
    let repaired_fraction = joint_report.repaired_fraction
        + raw.flagged as f64 / raw.samples as f64;
    Ok(ConsistencyReport { joint, composed, sigmas, repaired_fraction })
}

/// Pairing of the orbital measure against a finite real combination of
/// spherical functions, sharing one coset factorization per sample.
pub fn pairing_estimate_combination(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    terms: &[(SphericalWeight, f64)],
    samples: u64,
    seed: u64,
) -> Result<CombinationReport> {
    if terms.is_empty() {
        return Err(Error::ParameterDomain("combination needs at least one term".into()));
    }
    for (w, _) in terms {
        check_character_match(spec, w)?;
    }
    let opts = SphericalEvalOptions::default();
    let mut reference = Complex64::new(0.0, 0.0);
    for (w, coef) in terms {
        reference += pairing_reference(space, spec, w, &opts)? * *coef;
    }
    let tag = stream_tag("combination", space, spec.l, &terms[0].0.m, &spec.points);
    let (space_c, spec_c) = (*space, spec.clone());
    let terms_c: Vec<(SphericalWeight, f64)> = terms.to_vec();
    let raw = rng::mc_run(seed, &tag, samples, move |rng| {
        let (g, weight, repaired) = orbital_sample(&space_c, &spec_c, rng);
        let u = UnitaryElement { entries: g };
        let (k1, tp, k2) = kak_decompose(&space_c, &u)
            .expect("double-coset factorization failed during sampling");
        let det_b = linalg::determinant(&k1.b_block) * linalg::determinant(&k2.b_block);
        let phase = unit_pow(det_b, -spec_c.l);
        let mut h = Complex64::new(0.0, 0.0);
        for (w, coef) in &terms_c {
            let torus_val = spherical::spherical_value(&space_c, w, &tp, &opts)
                .expect("torus evaluation failed during sampling");
            h += phase * torus_val * *coef;
        }
        (h.conj() * weight, repaired)
    });
    let estimate = MCEstimate::from_raw(&raw);
    let sigmas = (estimate.value - reference).norm() / estimate.stderr.max(STDERR_FLOOR);
    Ok(CombinationReport { estimate, reference, sigmas })
}

/// Mean character weight of the orbital sampler; the expected value is one
/// for the trivial character and zero otherwise.
pub fn orbital_mass(
    space: &GrassmannParams,
    spec: &OrbitalMeasureSpec,
    samples: u64,
    seed: u64,
) -> MCEstimate {
    let tag = stream_tag("mass", space, spec.l, &[], &spec.points);
    let (space_c, spec_c) = (*space, spec.clone());
    let raw = rng::mc_run(seed, &tag, samples, move |rng| {
        let (_, weight, repaired) = orbital_sample(&space_c, &spec_c, rng);
        (weight, repaired)
    });
    MCEstimate::from_raw(&raw)
}
