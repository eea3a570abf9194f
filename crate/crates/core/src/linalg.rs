//! Dense complex linear algebra kernels: Gram-Schmidt orthonormalization,
//! unitary completion and polar projection, one-sided Jacobi SVD, the
//! cosine-sine decomposition used for KAK coordinates, and small helpers for
//! matrix exponentials and unitary eigenvalue arguments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    let gram = m.adjoint() * m;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            defect = defect.max((gram[(i, j)] - target).norm());
        }
    }
    defect
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

/// Modified Gram-Schmidt with a second reorthogonalization pass. The implied
/// triangular factor has a positive diagonal, which is the unique phase
/// convention making Gaussian matrices map to Haar unitaries.
pub fn mgs_orthonormalize(m: &CMatrix) -> Result<CMatrix> {
    let mut q = m.clone();
    let n = q.ncols();
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let proj: Complex64 = qi.dotc(&q.column(j).clone_owned());
                let update = &qi * proj;
                for r in 0..q.nrows() {
                    q[(r, j)] -= update[r];
                }
            }
        }
        let norm = q.column(j).norm();
        if norm < 1e-12 {
            return Err(Error::Decomposition(
                "rank deficiency during orthonormalization".into(),
            ));
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for r in 0..q.nrows() {
            q[(r, j)] *= inv;
        }
    }
    Ok(q)
}

/// Extend `given` orthonormal columns (n x r) to a full n x n unitary by
/// orthonormalizing standard basis candidates against them, always picking the
/// candidate with the largest residual.
pub fn complete_to_unitary(given: &CMatrix) -> Result<CMatrix> {
    let n = given.nrows();
    let r = given.ncols();
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((0, 0), (n, r)).copy_from(given);
    let mut filled = r;
    while filled < n {
        let mut best: Option<(f64, DVector<Complex64>)> = None;
        for cand in 0..n {
            let mut v = DVector::<Complex64>::zeros(n);
            v[cand] = Complex64::new(1.0, 0.0);
            for _pass in 0..2 {
                for i in 0..filled {
                    let qi = out.column(i).clone_owned();
                    let proj = qi.dotc(&v);
                    v -= qi * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |(bn, _)| norm > *bn) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("candidate set is nonempty");
        if norm < 1e-8 {
            return Err(Error::Decomposition(
                "unable to complete columns to a unitary basis".into(),
            ));
        }
        let v = v / Complex64::new(norm, 0.0);
        out.set_column(filled, &v);
        filled += 1;
    }
    Ok(out)
}

/// Nearest unitary in the polar sense via the Newton iteration
/// X <- (X + X^{-H}) / 2, run to a defect below 1e-14.
pub fn polar_unitary(m: &CMatrix) -> Result<CMatrix> {
    let mut x = m.clone();
    for _ in 0..60 {
        if unitarity_defect(&x) < 1e-14 {
            return Ok(x);
        }
        let inv_h = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Decomposition("singular matrix in polar iteration".into()))?
            .adjoint();
        x = (x + inv_h) * Complex64::new(0.5, 0.0);
    }
    if unitarity_defect(&x) < 1e-12 {
        Ok(x)
    } else {
        Err(Error::Decomposition("polar iteration failed to converge".into()))
    }
}

/// exp(i H) for a real symmetric H, via its spectral decomposition.
pub fn expm_i_symmetric(h: &DMatrix<f64>) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n {
                let phase = Complex64::from_polar(1.0, eig.eigenvalues[s]);
                acc += phase * eig.eigenvectors[(r, s)] * eig.eigenvectors[(c, s)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

pub fn determinant(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// One-sided Jacobi SVD of an m x n complex matrix with m >= n. Returns
/// (U, sigma, V) with U m x m unitary, sigma descending of length n, V n x n
/// unitary, and A = U diag(sigma) V^H.
pub fn jacobi_svd(a: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let m = a.nrows();
    let n = a.ncols();
    if m < n {
        return Err(Error::Decomposition("jacobi_svd requires nrows >= ncols".into()));
    }
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = w.column(i).clone_owned();
                let cj = w.column(j).clone_owned();
                let aa = ci.norm_squared();
                let bb = cj.norm_squared();
                let c = ci.dotc(&cj);
                let cn = c.norm();
                off = off.max(cn / scale / scale);
                if cn <= 1e-30 * scale * scale {
                    continue;
                }
                let chat = c / cn;
                let tau = (bb - aa) / (2.0 * cn);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // Columns rotate by [[cs, sn*chat], [-sn*conj(chat), cs]].
                for r in 0..m {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    w[(r, i)] = wi * cs - wj * sn * chat.conj();
                    w[(r, j)] = wi * sn * chat + wj * cs;
                }
                for r in 0..n {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = vi * cs - vj * sn * chat.conj();
                    v[(r, j)] = vi * sn * chat + vj * cs;
                }
            }
        }
        if off < 1e-28 {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());
    let mut sigma = Vec::with_capacity(n);
    let mut u_cols = CMatrix::zeros(m, n);
    let mut v_sorted = CMatrix::zeros(n, n);
    let mut kept = 0usize;
    for (slot, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        v_sorted.set_column(slot, &v.column(src));
        if norms[src] > 1e-13 * scale.max(1.0) {
            let col = w.column(src) / Complex64::new(norms[src], 0.0);
            u_cols.set_column(slot, &col);
            kept = slot + 1;
        }
    }
    // Null-space columns of U are arbitrary; fill them by completion.
    let head = u_cols.view((0, 0), (m, kept)).clone_owned();
    let u = complete_to_unitary(&head)?;
    Ok((u, sigma, v_sorted))
}

/// Cosine-sine decomposition of a unitary g in U(p+q), q <= p, with respect to
/// the (p, q) block split: g = diag(A1, B1) * E(t) * diag(A2, B2), where E(t)
/// is the paired-coordinate model
///   E[j][j] = cos t_j, E[p+j][p+j] = cos t_j, E[j][p+j] = E[p+j][j] = i sin t_j
/// for j < q, and E[i][i] = 1 for q <= i < p. The t_j are returned in
/// decreasing order in [0, pi/2].
pub struct CsFactors {
    pub a1: CMatrix,
    pub b1: CMatrix,
    pub t: Vec<f64>,
    pub a2: CMatrix,
    pub b2: CMatrix,
}

pub fn cs_decompose(p: usize, q: usize, g: &CMatrix) -> Result<CsFactors> {
    let n = p + q;
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::LengthMismatch { expected: n, got: g.nrows() });
    }
    if q > p {
        return Err(Error::ParameterDomain("cs_decompose requires q <= p".into()));
    }
    let g11 = g.view((0, 0), (p, p)).clone_owned();
    let g12 = g.view((0, p), (p, q)).clone_owned();
    let g21 = g.view((p, 0), (q, p)).clone_owned();
    let g22 = g.view((p, p), (q, q)).clone_owned();

    let (u_b, sigma, v_b) = jacobi_svd(&g12)?;
    let s: Vec<f64> = sigma.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    let t: Vec<f64> = s.iter().map(|&v| v.asin()).collect();
    let c: Vec<f64> = s.iter().map(|&v| (1.0 - v * v).max(0.0).sqrt()).collect();

    // g12 = A1 (i S_pad) B2 with the first q columns of A1 equal to U_B's
    // and B2 = -i V_B^H.
    let a1 = u_b;
    let b2 = v_b.adjoint() * Complex64::new(0.0, -1.0);

    // g11 = A1 E11 A2 with E11 = diag(c_1..c_q, 1..1): rows j < q of
    // A1^H g11 carry a factor c_j. Rows with c_j too small are deferred.
    let mut a2 = a1.adjoint() * &g11;
    let mut deferred_rows = Vec::new();
    for j in 0..q {
        let norm = a2.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let inv = Complex64::new(1.0 / (c[j].max(1e-300)), 0.0);
            for cc in 0..p {
                a2[(j, cc)] *= inv;
            }
            let rn = a2.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let fix = Complex64::new(1.0 / rn, 0.0);
            for cc in 0..p {
                a2[(j, cc)] *= fix;
            }
        } else {
            deferred_rows.push(j);
            for cc in 0..p {
                a2[(j, cc)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    // g22 = B1 E22 B2 with E22 = diag(c_j): columns of g22 B2^H carry c_j.
    let mut b1 = &g22 * b2.adjoint();
    let mut deferred_cols = Vec::new();
    for j in 0..q {
        let norm = b1.column(j).norm();
        if norm > 1e-12 {
            let inv = Complex64::new(1.0 / (c[j].max(1e-300)), 0.0);
            for rr in 0..q {
                b1[(rr, j)] *= inv;
            }
            let cn = b1.column(j).norm();
            let fix = Complex64::new(1.0 / cn, 0.0);
            for rr in 0..q {
                b1[(rr, j)] *= fix;
            }
        } else {
            deferred_cols.push(j);
            for rr in 0..q {
                b1[(rr, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    // Deferred B1 columns (c_j ~ 0) are fixed by unitary completion of the
    // healthy columns, then deferred A2 rows follow from
    // g21 = B1 E21 A2, i.e. (B1^H g21)_j = i s_j (A2)_j with s_j ~ 1.
    if !deferred_cols.is_empty() {
        let healthy: Vec<usize> = (0..q).filter(|j| !deferred_cols.contains(j)).collect();
        let mut head = CMatrix::zeros(q, healthy.len());
        for (slot, &j) in healthy.iter().enumerate() {
            head.set_column(slot, &b1.column(j));
        }
        let full = complete_to_unitary(&head)?;
        for (slot, &j) in deferred_cols.iter().enumerate() {
            b1.set_column(j, &full.column(healthy.len() + slot));
        }
    }
    if !deferred_rows.is_empty() {
        let rhs = b1.adjoint() * &g21;
        for &j in &deferred_rows {
            let inv = Complex64::new(0.0, -1.0) / Complex64::new(s[j].max(1e-300), 0.0);
            for cc in 0..p {
                a2[(j, cc)] = rhs[(j, cc)] * inv;
            }
        }
    }

    let a2 = polar_unitary(&a2)?;
    let b1 = polar_unitary(&b1)?;

    // Residual check against the E(t) model.
    let mut e = CMatrix::identity(n, n);
    for j in 0..q {
        e[(j, j)] = Complex64::new(c[j], 0.0);
        e[(p + j, p + j)] = Complex64::new(c[j], 0.0);
        e[(j, p + j)] = Complex64::new(0.0, s[j]);
        e[(p + j, j)] = Complex64::new(0.0, s[j]);
    }
    let mut left = CMatrix::zeros(n, n);
    left.view_mut((0, 0), (p, p)).copy_from(&a1);
    left.view_mut((p, p), (q, q)).copy_from(&b1);
    let mut right = CMatrix::zeros(n, n);
    right.view_mut((0, 0), (p, p)).copy_from(&a2);
    right.view_mut((p, p), (q, q)).copy_from(&b2);
    let recon = &left * &e * &right;
    let residual = max_abs_diff(&recon, g);
    if residual > 1e-9 {
        return Err(Error::Decomposition(format!(
            "cosine-sine reconstruction residual {residual:.3e} exceeds 1e-9"
        )));
    }
    Ok(CsFactors { a1, b1, t, a2, b2 })
}

/// Eigenvalue arguments of a 3x3 unitary matrix via its characteristic cubic
/// (coefficients from traces) and Cardano's formula.
pub fn eig_args_unitary3(m: &CMatrix) -> [f64; 3] {
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let m2 = (m * m).trace();
    let det = determinant(m);
    // lambda^3 - tr lambda^2 + e2 lambda - det, e2 = (tr^2 - tr(M^2)) / 2.
    let e2 = (tr * tr - m2) * Complex64::new(0.5, 0.0);
    let a = -tr;
    let b = e2;
    let c = -det;
    // Depressed cubic y^3 + py + q0 with lambda = y - a/3.
    let third = Complex64::new(1.0 / 3.0, 0.0);
    let p = b - a * a * third;
    let q0 = a * a * a * Complex64::new(2.0 / 27.0, 0.0) - a * b * third + c;
    let disc = (q0 * Complex64::new(0.5, 0.0)).powu(2) + (p * third).powu(3);
    let sq = disc.sqrt();
    let mut u = (-q0 * Complex64::new(0.5, 0.0) + sq).cbrt();
    if u.norm() < 1e-12 {
        u = (-q0 * Complex64::new(0.5, 0.0) - sq).cbrt();
    }
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut args = [0.0f64; 3];
    for (k, arg) in args.iter_mut().enumerate() {
        let uk = u * omega.powu(k as u32);
        let y = if uk.norm() < 1e-12 { uk } else { uk - p * third / uk };
        let lambda = y - a * third;
        *arg = lambda.arg();
    }
    args
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        mgs_orthonormalize(&random_complex_matrix(rng, n, n)).unwrap()
    }

    fn random_special_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let u = random_unitary(rng, n);
        let phase = determinant(&u).arg();
        u * Complex64::from_polar(1.0, -phase / n as f64)
    }

    #[test]
    fn mgs_produces_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2usize, 3, 5, 8] {
            let q = random_unitary(&mut rng, n);
            assert!(unitarity_defect(&q) < 1e-13);
        }
    }

    #[test]
    fn completion_extends_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 5);
        let head = u.view((0, 0), (5, 2)).clone_owned();
        let full = complete_to_unitary(&head).unwrap();
        assert!(unitarity_defect(&full) < 1e-12);
        assert!(max_abs_diff(&full.view((0, 0), (5, 2)).clone_owned(), &head) == 0.0);
    }

    #[test]
    fn polar_restores_perturbed_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(&mut rng, 4);
        let noise = random_complex_matrix(&mut rng, 4, 4) * Complex64::new(1e-6, 0.0);
        let fixed = polar_unitary(&(u.clone() + noise)).unwrap();
        assert!(unitarity_defect(&fixed) < 1e-13);
        assert!(max_abs_diff(&fixed, &u) < 1e-5);
    }

    #[test]
    fn expm_diagonalizes_simple_generator() {
        // H = [[0, t], [t, 0]] exponentiates to cos/sin blocks.
        let t = 0.83;
        let h = DMatrix::from_row_slice(2, 2, &[0.0, t, t, 0.0]);
        let e = expm_i_symmetric(&h);
        assert!((e[(0, 0)] - Complex64::new(t.cos(), 0.0)).norm() < 1e-13);
        assert!((e[(0, 1)] - Complex64::new(0.0, t.sin())).norm() < 1e-13);
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (m, n) in [(3usize, 2usize), (4, 4), (5, 3), (6, 2)] {
            let a = random_complex_matrix(&mut rng, m, n);
            let (u, sigma, v) = jacobi_svd(&a).unwrap();
            assert!(unitarity_defect(&u) < 1e-12);
            assert!(unitarity_defect(&v) < 1e-12);
            assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
            let mut s = CMatrix::zeros(m, n);
            for (i, &sv) in sigma.iter().enumerate() {
                s[(i, i)] = Complex64::new(sv, 0.0);
            }
            let recon = &u * s * v.adjoint();
            assert!(max_abs_diff(&recon, &a) < 1e-12);
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let col = random_complex_matrix(&mut rng, 4, 1);
        let a = &col * col.adjoint().row(0).clone_owned();
        let (u, sigma, v) = jacobi_svd(&a.view((0, 0), (4, 3)).clone_owned()).unwrap();
        assert!(sigma[1] < 1e-12 && sigma[2] < 1e-12);
        assert!(unitarity_defect(&u) < 1e-11);
        assert!(unitarity_defect(&v) < 1e-11);
    }

    #[test]
    fn cs_decomposition_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, q) in [(2usize, 1usize), (2, 2), (3, 2), (4, 3)] {
            for _ in 0..25 {
                let g = random_special_unitary(&mut rng, p + q);
                let f = cs_decompose(p, q, &g).unwrap();
                assert!(unitarity_defect(&f.a1) < 1e-11);
                assert!(unitarity_defect(&f.b1) < 1e-11);
                assert!(unitarity_defect(&f.a2) < 1e-11);
                assert!(unitarity_defect(&f.b2) < 1e-11);
                assert!(f.t.windows(2).all(|w| w[0] >= w[1]));
                assert!(f.t.iter().all(|&t| (0.0..=std::f64::consts::FRAC_PI_2).contains(&t)));
            }
        }
    }

    #[test]
    fn cs_decomposition_handles_near_identity_and_near_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p, q) = (2usize, 2usize);
        // Near identity: tiny t, c_j ~ 1.
        for _ in 0..10 {
            let noise = random_complex_matrix(&mut rng, 4, 4) * Complex64::new(1e-8, 0.0);
            let g = polar_unitary(&(CMatrix::identity(4, 4) + noise)).unwrap();
            cs_decompose(p, q, &g).unwrap();
        }
        // Near the corner of the chamber: t_j ~ pi/2, c_j ~ 0 exercises the
        // deferred-row repair path.
        let mut e = CMatrix::zeros(4, 4);
        let (tc, ts) = (1e-13f64, 1.0f64);
        for j in 0..2 {
            e[(j, j)] = Complex64::new(tc, 0.0);
            e[(2 + j, 2 + j)] = Complex64::new(tc, 0.0);
            e[(j, 2 + j)] = Complex64::new(0.0, ts);
            e[(2 + j, j)] = Complex64::new(0.0, ts);
        }
        let ka = random_unitary(&mut rng, 2);
        let kb = random_unitary(&mut rng, 2);
        let mut left = CMatrix::identity(4, 4);
        left.view_mut((0, 0), (2, 2)).copy_from(&ka);
        let mut right = CMatrix::identity(4, 4);
        right.view_mut((2, 2), (2, 2)).copy_from(&kb);
        let g = left * e * right;
        let f = cs_decompose(p, q, &g).unwrap();
        assert!(f.t[0] > std::f64::consts::FRAC_PI_2 - 1e-5);
    }

    #[test]
    fn unitary3_eigenvalue_arguments_match_known_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Diagonal case: arguments are read off directly.
        let phases = [0.3f64, -1.2, 2.4];
        let d = CMatrix::from_fn(3, 3, |i, j| {
            if i == j { Complex64::from_polar(1.0, phases[i]) } else { Complex64::new(0.0, 0.0) }
        });
        let mut got = eig_args_unitary3(&d).to_vec();
        let mut want = phases.to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
        // Conjugation invariance.
        let u = random_unitary(&mut rng, 3);
        let m = &u * d * u.adjoint();
        let mut got = eig_args_unitary3(&m).to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}
