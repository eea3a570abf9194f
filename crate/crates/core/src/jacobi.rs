//! Classical Jacobi polynomials P_n^(alpha,beta) and their derivatives,
//! evaluated by the standard three-term recurrence.

use crate::error::{Error, Result};

fn validate(n: i64, alpha: f64, beta: f64) -> Result<()> {
    if n < 0 {
        return Err(Error::ParameterDomain(format!("degree must be >= 0, got {n}")));
    }
    if !(alpha > -1.0) || !(beta > -1.0) {
        return Err(Error::ParameterDomain(format!(
            "need alpha > -1 and beta > -1, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(())
}

/// Rising factorial (a)_r = a (a+1) ... (a+r-1).
pub fn pochhammer(a: f64, r: i64) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// P_n^(alpha,beta)(x) by the three-term recurrence. Starting the recurrence
/// at n = 2 keeps the leading coefficient 2n(n+a+b)(2n+a+b-2) positive for
/// every admissible alpha, beta > -1.
pub fn jacobi(n: i64, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    validate(n, alpha, beta)?;
    let (a, b) = (alpha, beta);
    if n == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0;
    let mut cur = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
    for j in 2..=n {
        let j = j as f64;
        let c1 = 2.0 * j * (j + a + b) * (2.0 * j + a + b - 2.0);
        let c2 = (2.0 * j + a + b - 1.0) * (a * a - b * b);
        let c3 = (2.0 * j + a + b - 1.0) * (2.0 * j + a + b) * (2.0 * j + a + b - 2.0);
        let c4 = 2.0 * (j + a - 1.0) * (j + b - 1.0) * (2.0 * j + a + b);
        let next = ((c2 + c3 * x) * cur - c4 * prev) / c1;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// r-th derivative: d^r/dx^r P_n^(a,b) = 2^-r (n+a+b+1)_r P_{n-r}^(a+r,b+r),
/// and zero when r exceeds the degree.
pub fn jacobi_derivative(n: i64, alpha: f64, beta: f64, r: i64, x: f64) -> Result<f64> {
    validate(n, alpha, beta)?;
    if r < 0 {
        return Err(Error::ParameterDomain(format!("derivative order must be >= 0, got {r}")));
    }
    if r > n {
        return Ok(0.0);
    }
    let factor = pochhammer(n as f64 + alpha + beta + 1.0, r) / 2f64.powi(r as i32);
    Ok(factor * jacobi(n - r, alpha + r as f64, beta + r as f64, x)?)
}

/// P_n^(alpha,beta)(1) = (alpha+1)_n / n!.
pub fn jacobi_at_one(n: i64, alpha: f64) -> f64 {
    pochhammer(alpha + 1.0, n) / pochhammer(1.0, n)
}
