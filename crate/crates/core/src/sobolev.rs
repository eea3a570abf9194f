//! Certified partial sums of the spectral series attached to an orbital
//! measure, Sobolev-weighted summands, and synthesis of the density of the
//! convolved measure on the torus.
//!
//! The tail certificate splits the missing shells into an interior branch
//! (all partition entries positive) and a boundary branch (last entry zero).
//! Each branch combines exact shell counts, the dimension bound, the exact
//! shell-maximal Casimir factor, and an empirical decay envelope fitted on
//! the last computed shells, summed numerically out to a large horizon with
//! an integral-comparison remainder past it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::GrassmannParams;
use crate::spherical::{self, SphericalEvalOptions, TorusPoint, MAX_M1};
use crate::weights::{self, SphericalWeight};

const ENVELOPE_SHELLS: usize = 20;
const CONVERGENCE_RATIO: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SeriesReport {
    pub cutoffs: Vec<i64>,
    pub partial_sums: Vec<f64>,
    pub tail_bounds: Vec<f64>,
    pub tail_bound: f64,
    pub converged: bool,
    pub cutoff: i64,
}

#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub grid: Vec<TorusPoint>,
    pub values: Vec<f64>,
    pub cutoff: i64,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Measure data the series depends on: the character label and the defining
/// torus points (validated as regular by the caller through the measure
/// module, or explicitly here).
#[derive(Clone, Debug)]
pub struct SeriesSpec {
    pub l: i64,
    pub points: Vec<TorusPoint>,
}

pub fn make_series_spec(
    space: &GrassmannParams,
    l: i64,
    points: Vec<TorusPoint>,
) -> Result<SeriesSpec> {
    if points.is_empty() {
        return Err(Error::ParameterDomain("series needs at least one point".into()));
    }
    for pt in &points {
        if !spherical::is_regular(space, pt) {
            return Err(Error::NotRegular(format!("{:?}", pt.t)));
        }
    }
    Ok(SeriesSpec { l, points })
}

/// One term of the series: dimension times the Sobolev factor (1 + Casimir)^s
/// times the squared product of spherical values over the defining points.
pub fn summand(
    space: &GrassmannParams,
    spec: &SeriesSpec,
    w: &SphericalWeight,
    s: f64,
) -> Result<f64> {
    if w.l != spec.l {
        return Err(Error::ParameterDomain(format!(
            "series character {} does not match weight character {}",
            spec.l, w.l
        )));
    }
    let opts = SphericalEvalOptions::default();
    let mut prod = 1.0f64;
    for pt in &spec.points {
        let v = spherical::spherical_value(space, w, pt, &opts)?;
        prod *= v * v;
    }
    let kappa = weights::casimir(space, w) as f64;
    Ok(weights::dimension_f64(space, w) * (1.0 + kappa).powf(s) * prod)
}

struct WeightData {
    m1: i64,
    boundary: bool,
    term: f64,
    abs_psi: Vec<f64>,
}

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan::default()
    }

    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Number of weakly decreasing (q-1)-tuples below m1 with all entries >= lo.
fn shell_count(m1: f64, q: i64, lo: i64) -> f64 {
    // Interior (lo = 1): C(m1 + q - 2, q - 1); boundary complement handled by
    // the caller. Computed as a product to stay in f64.
    match lo {
        1 => (0..q - 1).map(|u| (m1 - 1.0 + (q - 1 - u) as f64) / (q - 1 - u) as f64).product(),
        0 => (0..q - 1).map(|u| (m1 + (q - 1 - u) as f64) / (q - 1 - u) as f64).product(),
        _ => unreachable!(),
    }
}

struct TailModel {
    q: i64,
    l_abs: i64,
    dim_exponent: i32,
    scale: f64,
    rho_sum: f64,
    s: f64,
    e_int: i32,
    e_bd: i32,
}

impl TailModel {
    fn new(space: &GrassmannParams, l: i64, s: f64) -> Self {
        let rho = crate::space::rho(space);
        TailModel {
            q: space.q,
            l_abs: l.abs(),
            dim_exponent: (space.q * (2 * space.p - 1)) as i32,
            scale: crate::space::default_inner_scale(space) as f64,
            rho_sum: rho.iter().map(|&r| r as f64).sum(),
            s,
            e_int: (2 * space.p - space.q) as i32,
            e_bd: (2 * space.p - space.q + 3) as i32,
        }
    }

    fn dim_bound(&self, m1: f64) -> f64 {
        (2.0 * m1 + self.l_abs as f64 + 1.0).powi(self.dim_exponent)
    }

    /// Exact maximum of 1 + Casimir over the shell, attained at the diagonal.
    fn kappa_top(&self, m1: f64) -> f64 {
        let lam = 2.0 * m1 + self.l_abs as f64;
        1.0 + self.scale * lam * (self.q as f64 * lam + 2.0 * self.rho_sum)
    }

    fn sobolev_factor(&self, m1: f64) -> f64 {
        if self.s > 0.0 { self.kappa_top(m1).powf(self.s) } else { 1.0 }
    }

    /// Bound on one shell of the interior branch.
    fn shell_interior(&self, m1: f64, c_int: &[f64]) -> f64 {
        if c_int.is_empty() {
            return 0.0;
        }
        let count = shell_count(m1, self.q, 1);
        let base = ((m1 + self.q as f64 - 1.0) * factorial(self.q - 1)).powi(self.e_int);
        let mut prod = count * self.dim_bound(m1) * self.sobolev_factor(m1);
        for &c in c_int {
            prod *= (c * c / base).min(1.0);
        }
        prod
    }

    /// Bound on one shell of the boundary branch (last entry zero), absent
    /// when q = 1.
    fn shell_boundary(&self, m1: f64, c_bd: &[f64]) -> f64 {
        if self.q < 2 || c_bd.is_empty() {
            return 0.0;
        }
        let count = shell_count(m1, self.q - 1, 0);
        let base = ((m1 + self.q as f64 - 1.0) * factorial(self.q - 2)).powi(self.e_bd);
        let mut prod = count * self.dim_bound(m1) * self.sobolev_factor(m1);
        for &c in c_bd {
            prod *= (c * c / base).min(1.0);
        }
        prod
    }

    /// Upper bound on the full tail past `cutoff`: numeric shell sums to a
    /// horizon, then an integral-comparison remainder using envelope
    /// constants valid beyond it.
    fn tail(&self, cutoff: i64, c_int: &[f64], c_bd: &[f64]) -> f64 {
        let horizon = (2 * (cutoff + 1)).max(20_000);
        let mut acc = Kahan::new();
        for m1 in (cutoff + 1)..=horizon {
            acc.add(self.shell_interior(m1 as f64, c_int));
            acc.add(self.shell_boundary(m1 as f64, c_bd));
        }
        let x0 = horizon as f64;
        let r = c_int.len() as f64;
        let q = self.q as f64;
        let two_s = if self.s > 0.0 { 2.0 * self.s } else { 0.0 };
        let mut remainder = 0.0f64;
        // Interior branch envelope: count <= c_count m^{q-1},
        // dim <= c_dim m^E, 1 + kappa <= (kappa_top(x0)/x0^2) m^2, and each
        // point contributes C_i^2 ((q-1)! m)^{-e_int}.
        if !c_int.is_empty() {
            let gamma = (q - 1.0) + self.dim_exponent as f64 + two_s - r * self.e_int as f64;
            if gamma >= -1.0 {
                return f64::INFINITY;
            }
            let c_count = (1.0 + (q - 2.0).max(0.0) / x0).powi(self.q as i32 - 1)
                / factorial(self.q - 1);
            let c_dim = (2.0 + (self.l_abs as f64 + 1.0) / x0).powi(self.dim_exponent);
            let c_sob = if self.s > 0.0 {
                (self.kappa_top(x0) / (x0 * x0)).powf(self.s)
            } else {
                1.0
            };
            let mut a = c_count * c_dim * c_sob;
            for &c in c_int {
                a *= c * c / factorial(self.q - 1).powi(self.e_int);
            }
            remainder += a * x0.powf(gamma + 1.0) / (-gamma - 1.0);
        }
        if self.q >= 2 && !c_bd.is_empty() {
            let gamma = (q - 2.0) + self.dim_exponent as f64 + two_s - r * self.e_bd as f64;
            if gamma >= -1.0 {
                return f64::INFINITY;
            }
            let c_count = (1.0 + (q - 2.0).max(0.0) / x0).powi(self.q as i32 - 2)
                / factorial(self.q - 2);
            let c_dim = (2.0 + (self.l_abs as f64 + 1.0) / x0).powi(self.dim_exponent);
            let c_sob = if self.s > 0.0 {
                (self.kappa_top(x0) / (x0 * x0)).powf(self.s)
            } else {
                1.0
            };
            let mut a = c_count * c_dim * c_sob;
            for &c in c_bd {
                a *= c * c / factorial(self.q - 2).powi(self.e_bd);
            }
            remainder += a * x0.powf(gamma + 1.0) / (-gamma - 1.0);
        }
        acc.sum + remainder
    }
}

/// Partial sums of the series with per-cutoff certified tail bounds. The
/// summands are evaluated in parallel but reduced in enumeration order, so
/// results do not depend on the worker count.
pub fn sobolev_partial_sums(
    space: &GrassmannParams,
    spec: &SeriesSpec,
    s: f64,
    m1_max: i64,
) -> Result<SeriesReport> {
    if !(1..=MAX_M1).contains(&m1_max) {
        return Err(Error::ParameterDomain(format!(
            "m1_max must lie in 1..={MAX_M1}, got {m1_max}"
        )));
    }
    if !s.is_finite() {
        return Err(Error::ParameterDomain("sobolev exponent must be finite".into()));
    }
    let opts = SphericalEvalOptions::default();
    let all = weights::enumerate_weights(space, spec.l, m1_max)?;
    let data: Vec<WeightData> = all
        .par_iter()
        .map(|w| {
            let mut abs_psi = Vec::with_capacity(spec.points.len());
            let mut prod = 1.0f64;
            for pt in &spec.points {
                let v = spherical::spherical_value(space, w, pt, &opts)
                    .expect("enumerated weight evaluates on validated points");
                abs_psi.push(v.abs());
                prod *= v * v;
            }
            let kappa = weights::casimir(space, w) as f64;
            let term = weights::dimension_f64(space, w) * (1.0 + kappa).powf(s) * prod;
            WeightData { m1: w.m[0], boundary: *w.m.last().unwrap() == 0, term, abs_psi }
        })
        .collect();

    let q = space.q;
    let r = spec.points.len();
    let model = TailModel::new(space, spec.l, s);
    // Shell-indexed cumulative sums and per-shell, per-point envelope
    // statistics max |psi| prod n_j^{e/2} for each branch.
    let n_shells = (m1_max + 1) as usize;
    let mut shell_sums = vec![Kahan::new(); n_shells];
    let mut stat_int = vec![vec![0.0f64; r]; n_shells];
    let mut stat_bd = vec![vec![0.0f64; r]; n_shells];
    for (w, d) in all.iter().zip(&data) {
        let shell = d.m1 as usize;
        shell_sums[shell].add(d.term);
        // q = 1 has no boundary branch: every weight feeds the interior
        // statistics (the zero weight contributes nothing to the envelope).
        let treat_boundary = d.boundary && q >= 2;
        if treat_boundary {
            let scale: f64 = w.spectral_n[..(q - 1) as usize]
                .iter()
                .map(|&n| (n as f64).powi(model.e_bd))
                .product::<f64>()
                .sqrt();
            for (slot, &a) in d.abs_psi.iter().enumerate() {
                stat_bd[shell][slot] = stat_bd[shell][slot].max(a * scale);
            }
        } else {
            let scale: f64 = w
                .spectral_n
                .iter()
                .map(|&n| (n as f64).powi(model.e_int))
                .product::<f64>()
                .sqrt();
            for (slot, &a) in d.abs_psi.iter().enumerate() {
                stat_int[shell][slot] = stat_int[shell][slot].max(a * scale);
            }
        }
    }

    let mut cutoffs = Vec::with_capacity(m1_max as usize);
    let mut partial_sums = Vec::with_capacity(m1_max as usize);
    let mut tail_bounds = Vec::with_capacity(m1_max as usize);
    let mut running = Kahan::new();
    running.add(shell_sums[0].sum);
    for c in 1..=m1_max {
        running.add(shell_sums[c as usize].sum);
        let lo = (c - ENVELOPE_SHELLS as i64 + 1).max(0) as usize;
        let mut c_int = vec![0.0f64; r];
        let mut c_bd = vec![0.0f64; r];
        for shell in lo..=(c as usize) {
            for slot in 0..r {
                c_int[slot] = c_int[slot].max(stat_int[shell][slot]);
                c_bd[slot] = c_bd[slot].max(stat_bd[shell][slot]);
            }
        }
        if q < 2 {
            c_bd.clear();
        }
        cutoffs.push(c);
        partial_sums.push(running.sum);
        tail_bounds.push(model.tail(c, &c_int, &c_bd));
    }
    let tail_bound = *tail_bounds.last().unwrap();
    let last = *partial_sums.last().unwrap();
    let converged = tail_bound.is_finite() && tail_bound < CONVERGENCE_RATIO * last.abs();
    Ok(SeriesReport { cutoffs, partial_sums, tail_bounds, tail_bound, converged, cutoff: m1_max })
}

/// Coefficient carried by one weight in the synthesized density: dimension
/// times the product of spherical values at the defining points.
pub fn synthesis_coefficient(
    space: &GrassmannParams,
    spec: &SeriesSpec,
    w: &SphericalWeight,
) -> Result<f64> {
    if w.l != spec.l {
        return Err(Error::ParameterDomain(format!(
            "series character {} does not match weight character {}",
            spec.l, w.l
        )));
    }
    let opts = SphericalEvalOptions::default();
    let mut prod = 1.0f64;
    for pt in &spec.points {
        prod *= spherical::spherical_value(space, w, pt, &opts)?;
    }
    Ok(weights::dimension_f64(space, w) * prod)
}

/// Synthesizes the density of the convolved orbital measure on a grid of
/// torus points, up to the spectral cutoff. Requires the absolute-continuity
/// gate; non-convergence of the underlying series at the cutoff is reported
/// as a warning, not an error.
pub fn density_synthesis(
    space: &GrassmannParams,
    spec: &SeriesSpec,
    grid: &[TorusPoint],
    m1_max: i64,
) -> Result<DensityGrid> {
    let r = spec.points.len() as i64;
    if !weights::absolute_continuity_gate(space, r) {
        return Err(Error::ParameterDomain(format!(
            "absolute continuity gate requires at least {} factors, got {r}",
            space.dim_uk
        )));
    }
    if grid.is_empty() {
        return Err(Error::ParameterDomain("density grid must be nonempty".into()));
    }
    if m1_max < 0 {
        return Err(Error::ParameterDomain(format!("cutoff must be >= 0, got {m1_max}")));
    }
    let report = sobolev_partial_sums(space, spec, 0.0, m1_max.max(1))?;
    let warning = if report.converged {
        None
    } else {
        Some(format!(
            "series tail not certified at cutoff {m1_max}: bound {:.3e} vs partial sum {:.6e}",
            report.tail_bound,
            report.partial_sums.last().unwrap()
        ))
    };
    let opts = SphericalEvalOptions::default();
    let all = weights::enumerate_weights(space, spec.l, m1_max)?;
    let coefs: Vec<f64> = all
        .par_iter()
        .map(|w| synthesis_coefficient(space, spec, w).expect("validated points evaluate"))
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|pt| {
            let mut acc = Kahan::new();
            for (w, &coef) in all.iter().zip(&coefs) {
                let v = spherical::spherical_value(space, w, pt, &opts)
                    .expect("grid points evaluate");
                acc.add(coef * v);
            }
            acc.sum
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterDomain("density synthesis produced non-finite values".into()));
    }
    Ok(DensityGrid {
        grid: grid.to_vec(),
        values,
        cutoff: m1_max,
        converged: report.converged,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::make_space;
    use crate::spherical::make_torus_point;
    use crate::weights::make_weight;

    fn spec_21(r: usize) -> (GrassmannParams, SeriesSpec) {
        let space = make_space(2, 1).unwrap();
        let base = [0.7f64, 1.1, 0.4, 0.9, 1.3];
        let points: Vec<TorusPoint> = base[..r]
            .iter()
            .map(|&t| make_torus_point(&space, vec![t]).unwrap())
            .collect();
        let spec = make_series_spec(&space, 1, points).unwrap();
        (space, spec)
    }

    #[test]
    fn zero_weight_term_is_one_for_trivial_character() {
        let space = make_space(2, 1).unwrap();
        let points = vec![make_torus_point(&space, vec![0.8]).unwrap()];
        let spec = make_series_spec(&space, 0, points).unwrap();
        let w = make_weight(&space, 0, vec![0]).unwrap();
        for s in [0.0, 1.5, 7.0] {
            assert_eq!(summand(&space, &spec, &w, s).unwrap(), 1.0);
        }
    }

    #[test]
    fn summand_is_monotone_in_s() {
        let (space, spec) = spec_21(2);
        let w = make_weight(&space, 1, vec![3]).unwrap();
        let s_vals = [0.0, 0.5, 1.0, 2.0, 4.0];
        let terms: Vec<f64> =
            s_vals.iter().map(|&s| summand(&space, &spec, &w, s).unwrap()).collect();
        for pair in terms.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn partial_sums_increase_and_dominate_negative_exponent() {
        let (space, spec) = spec_21(2);
        let report = sobolev_partial_sums(&space, &spec, 0.0, 30).unwrap();
        assert_eq!(report.cutoffs.len(), 30);
        for pair in report.partial_sums.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        let negative = sobolev_partial_sums(&space, &spec, -0.5, 30).unwrap();
        for (a, b) in report.partial_sums.iter().zip(&negative.partial_sums) {
            assert!(a >= b);
        }
    }

    #[test]
    fn tail_bound_dominates_later_shells() {
        let (space, spec) = spec_21(2);
        let report = sobolev_partial_sums(&space, &spec, 0.0, 80).unwrap();
        let at = |c: i64| -> (f64, f64) {
            let idx = report.cutoffs.iter().position(|&v| v == c).unwrap();
            (report.partial_sums[idx], report.tail_bounds[idx])
        };
        let (sum60, bound60) = at(60);
        let (sum80, _) = at(80);
        assert!(
            bound60 >= sum80 - sum60,
            "tail bound {bound60:.3e} fails to cover realized shells {:.3e}",
            sum80 - sum60
        );
    }

    #[test]
    fn extending_the_cutoff_stays_within_the_certificate() {
        let (space, spec) = spec_21(2);
        let short = sobolev_partial_sums(&space, &spec, 0.0, 40).unwrap();
        let long = sobolev_partial_sums(&space, &spec, 0.0, 60).unwrap();
        let diff = (long.partial_sums.last().unwrap() - short.partial_sums.last().unwrap()).abs();
        assert!(diff <= short.tail_bound);
    }

    #[test]
    fn single_point_series_is_not_certified() {
        let (space, spec) = spec_21(1);
        let report = sobolev_partial_sums(&space, &spec, 0.0, 40).unwrap();
        assert!(!report.converged);
        assert!(!report.tail_bound.is_finite() || report.tail_bound > report.partial_sums[0]);
    }

    #[test]
    fn square_space_certificate_refuses_non_summable_tail() {
        let space = make_space(2, 2).unwrap();
        let points: Vec<TorusPoint> = [(0.7f64, 0.3f64), (1.1, 0.5), (0.9, 0.2), (1.2, 0.8)]
            .iter()
            .map(|&(a, b)| make_torus_point(&space, vec![a, b]).unwrap())
            .collect();
        let spec = make_series_spec(&space, 1, points).unwrap();
        // r = 4, q = 2: interior gamma = 1 + 6 - 4*2 = -1 is NOT summable,
        // so the certificate must refuse; r = 8 would pass but is slow here.
        let report = sobolev_partial_sums(&space, &spec, 0.0, 25).unwrap();
        assert!(!report.tail_bound.is_finite());
        assert!(!report.converged);
    }

    #[test]
    fn density_requires_gate_and_synthesizes_constants() {
        let space = make_space(1, 1).unwrap();
        let pt = make_torus_point(&space, vec![0.6]).unwrap();
        let spec1 = make_series_spec(&space, 0, vec![pt.clone()]).unwrap();
        let grid = vec![make_torus_point(&space, vec![0.3]).unwrap()];
        assert!(density_synthesis(&space, &spec1, &grid, 5).is_err());
        let spec2 = make_series_spec(&space, 0, vec![pt.clone(), pt.clone()]).unwrap();
        let out = density_synthesis(&space, &spec2, &grid, 0).unwrap();
        assert_eq!(out.values.len(), 1);
        assert_eq!(out.values[0], 1.0);
    }

    #[test]
    fn synthesis_coefficient_matches_product_reference() {
        let (space, spec) = spec_21(3);
        let opts = SphericalEvalOptions::default();
        for m1 in 0..6 {
            let w = make_weight(&space, 1, vec![m1]).unwrap();
            let coef = synthesis_coefficient(&space, &spec, &w).unwrap();
            let mut prod = 1.0f64;
            for pt in &spec.points {
                prod *= crate::spherical::spherical_value(&space, &w, pt, &opts).unwrap();
            }
            let d = weights::dimension_f64(&space, &w);
            assert!((coef / d - prod).abs() <= 1e-12 * prod.abs().max(1.0));
        }
    }

    #[test]
    fn shell_contributions_decay_for_convergent_configuration() {
        let (space, spec) = spec_21(2);
        let report = sobolev_partial_sums(&space, &spec, 0.0, 70).unwrap();
        let shell = |c: i64| -> f64 {
            let idx = report.cutoffs.iter().position(|&v| v == c).unwrap();
            report.partial_sums[idx] - report.partial_sums[idx - 1]
        };
        let early: f64 = (8..12).map(shell).sum();
        let late: f64 = (60..64).map(shell).sum();
        assert!(late < 0.2 * early, "late shells {late:.3e} vs early {early:.3e}");
    }

    #[test]
    fn rejects_invalid_inputs() {
        let (space, spec) = spec_21(2);
        assert!(sobolev_partial_sums(&space, &spec, 0.0, 0).is_err());
        assert!(sobolev_partial_sums(&space, &spec, f64::NAN, 10).is_err());
        assert!(sobolev_partial_sums(&space, &spec, 0.0, MAX_M1 + 1).is_err());
        let w_bad = make_weight(&space, 2, vec![1]).unwrap();
        assert!(summand(&space, &spec, &w_bad, 0.0).is_err());
        let boundary = make_torus_point(&space, vec![0.0]).unwrap();
        assert!(make_series_spec(&space, 0, vec![boundary]).is_err());
    }
}
