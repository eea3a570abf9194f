//! Root data for the symmetric pair (SU(p+q), S(U(p)xU(q))).

use serde::Serialize;

use crate::error::{Error, Result};

/// Parameters of the complex Grassmannian SU(p+q)/S(U(p)xU(q)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GrassmannParams {
    pub p: i64,
    pub q: i64,
    /// k = p - q, the multiplicity parameter of the short roots.
    pub k: i64,
    /// n = p + q.
    pub n: i64,
    /// Real dimension of U/K, equal to 2pq.
    pub dim_uk: i64,
}

pub fn make_space(p: i64, q: i64) -> Result<GrassmannParams> {
    if q < 1 || p < q {
        return Err(Error::ParameterDomain(format!(
            "require p >= q >= 1, got p={p}, q={q}"
        )));
    }
    Ok(GrassmannParams {
        p,
        q,
        k: p - q,
        n: p + q,
        dim_uk: 2 * p * q,
    })
}

/// A restricted root, stored as integer coordinates in the basis
/// alpha_1, ..., alpha_q of the dual of the maximal abelian subspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrictedRoot {
    pub coeffs: Vec<i64>,
    pub multiplicity: i64,
}

/// Positive restricted roots: alpha_i (multiplicity 2k, omitted when k = 0),
/// 2 alpha_i (multiplicity 1), and alpha_i +- alpha_j for i < j (multiplicity 2).
pub fn positive_roots(space: &GrassmannParams) -> Vec<RestrictedRoot> {
    let q = space.q as usize;
    let mut roots = Vec::new();
    let unit = |i: usize, scale: i64| {
        let mut c = vec![0i64; q];
        c[i] = scale;
        c
    };
    if space.k > 0 {
        for i in 0..q {
            roots.push(RestrictedRoot {
                coeffs: unit(i, 1),
                multiplicity: 2 * space.k,
            });
        }
    }
    for i in 0..q {
        roots.push(RestrictedRoot {
            coeffs: unit(i, 2),
            multiplicity: 1,
        });
    }
    for i in 0..q {
        for j in (i + 1)..q {
            let mut minus = vec![0i64; q];
            minus[i] = 1;
            minus[j] = -1;
            roots.push(RestrictedRoot {
                coeffs: minus,
                multiplicity: 2,
            });
            let mut plus = vec![0i64; q];
            plus[i] = 1;
            plus[j] = 1;
            roots.push(RestrictedRoot {
                coeffs: plus,
                multiplicity: 2,
            });
        }
    }
    roots
}

/// Half sum of positive roots with multiplicities: rho_i = k + 1 + 2(q - i).
pub fn rho(space: &GrassmannParams) -> Vec<i64> {
    (1..=space.q).map(|i| space.k + 1 + 2 * (space.q - i)).collect()
}

/// Default scale of the invariant inner product on the dual of the torus algebra.
pub fn default_inner_scale(space: &GrassmannParams) -> i64 {
    4 * space.n
}

/// Inner product <u, v> = scale * sum_i u_i v_i with the default scale 4n.
pub fn killing_inner(space: &GrassmannParams, u: &[i64], v: &[i64]) -> Result<i64> {
    let q = space.q as usize;
    if u.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: u.len() });
    }
    if v.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: v.len() });
    }
    let dot: i64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(default_inner_scale(space) * dot)
}

/// Inner product with a caller-selected positive scale. The scale only
/// renormalizes Casimir constants; convergence thresholds do not depend on it.
pub fn killing_inner_scaled(
    space: &GrassmannParams,
    u: &[f64],
    v: &[f64],
    scale: f64,
) -> Result<f64> {
    let q = space.q as usize;
    if u.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: u.len() });
    }
    if v.len() != q {
        return Err(Error::LengthMismatch { expected: q, got: v.len() });
    }
    if !(scale > 0.0) {
        return Err(Error::ParameterDomain(format!("scale must be positive, got {scale}")));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(scale * dot)
}
