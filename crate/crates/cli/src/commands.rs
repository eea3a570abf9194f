//! Subcommand implementations: resolve inputs, run one core pipeline, emit
//! one deterministic document, and map outcomes to exit codes.

use crate::config::{self, McConfig, McMode, SobolevConfig, SphericalConfig, SynthesisConfig};
use crate::output::{float, indexed, json_doc, Csv, Format, Sink};
use crate::{with_workers, CmdResult, ConfigError, EXIT_CERTIFICATION, EXIT_OK};
use grassmann_core::num_complex::Complex64;
use grassmann_core::space::{default_inner_scale, positive_roots, rho, RestrictedRoot};
use grassmann_core::{make_space, measure, sobolev, spherical, weights};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct RootsDoc {
    p: i64,
    q: i64,
    k: i64,
    n: i64,
    dim_uk: i64,
    inner_scale: i64,
    rho: Vec<i64>,
    roots: Vec<RestrictedRoot>,
}

pub fn cmd_roots(p: i64, q: i64, sink: &Sink) -> CmdResult {
    let space = make_space(p, q)?;
    let roots = positive_roots(&space);
    let text = match sink.format {
        Format::Json => json_doc(&RootsDoc {
            p,
            q,
            k: space.k,
            n: space.n,
            dim_uk: space.dim_uk,
            inner_scale: default_inner_scale(&space),
            rho: rho(&space),
            roots,
        })?,
        Format::Csv => {
            let mut header = indexed("coeff", q as usize);
            header.push("multiplicity".into());
            let mut table = Csv::new(&header);
            for root in &roots {
                let mut cells: Vec<String> =
                    root.coeffs.iter().map(|c| c.to_string()).collect();
                cells.push(root.multiplicity.to_string());
                table.row(&cells);
            }
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct WeightRow {
    p: i64,
    q: i64,
    l: i64,
    m: Vec<i64>,
    lambda: Vec<i64>,
    /// Exact integer, serialized as a decimal string since it can overflow
    /// every fixed-width type.
    d_lambda: String,
    kappa_lambda: i64,
}

pub fn cmd_weights(p: i64, q: i64, l: i64, m1_max: i64, sink: &Sink) -> CmdResult {
    let space = make_space(p, q)?;
    let all = weights::enumerate_weights(&space, l, m1_max)?;
    let rows: Vec<WeightRow> = all
        .iter()
        .map(|w| WeightRow {
            p,
            q,
            l,
            m: w.m.clone(),
            lambda: w.lambda.clone(),
            d_lambda: weights::dimension(&space, w).to_string(),
            kappa_lambda: weights::casimir(&space, w),
        })
        .collect();
    let text = match sink.format {
        Format::Json => json_doc(&rows)?,
        Format::Csv => {
            let qs = q as usize;
            let mut header = indexed("m", qs);
            header.extend(indexed("lambda", qs));
            header.push("d_lambda".into());
            header.push("kappa_lambda".into());
            let mut table = Csv::new(&header);
            for row in &rows {
                let mut cells: Vec<String> = row.m.iter().map(|v| v.to_string()).collect();
                cells.extend(row.lambda.iter().map(|v| v.to_string()));
                cells.push(row.d_lambda.clone());
                cells.push(row.kappa_lambda.to_string());
                table.row(&cells);
            }
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ThresholdDoc {
    p: i64,
    q: i64,
    nu: i64,
    epsilon: f64,
    /// Closed-form factor count guaranteeing a C^nu density.
    threshold: i64,
    /// Factors needed for absolute continuity alone, dim U/K = 2pq.
    dimension_gate: i64,
    /// Embedding exponent nu + (dim SU(p+q))/2 + epsilon.
    sobolev_exponent: f64,
    /// Smallest r passing the raw series-convergence inequality together
    /// with the dimension gate; exposed so the closed form can be compared
    /// against the inequality it rounds.
    r_condition_minimum: i64,
}

pub fn cmd_threshold(p: i64, q: i64, nu: i64, epsilon: f64, sink: &Sink) -> CmdResult {
    let space = make_space(p, q)?;
    let threshold = weights::smoothness_threshold(&space, nu)?;
    let s = weights::sobolev_exponent(&space, nu, epsilon);
    let r_condition_minimum = (1..=4 * threshold + 16)
        .find(|&r| weights::sobolev_r_condition(&space, s, r))
        .ok_or_else(|| ConfigError("no admissible factor count below search bound".into()))?;
    let doc = ThresholdDoc {
        p,
        q,
        nu,
        epsilon,
        threshold,
        dimension_gate: space.dim_uk,
        sobolev_exponent: s,
        r_condition_minimum,
    };
    let text = match sink.format {
        Format::Json => json_doc(&doc)?,
        Format::Csv => {
            let header: Vec<String> = [
                "p",
                "q",
                "nu",
                "epsilon",
                "threshold",
                "dimension_gate",
                "sobolev_exponent",
                "r_condition_minimum",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let mut table = Csv::new(&header);
            table.row(&[
                doc.p.to_string(),
                doc.q.to_string(),
                doc.nu.to_string(),
                float(doc.epsilon),
                doc.threshold.to_string(),
                doc.dimension_gate.to_string(),
                float(doc.sobolev_exponent),
                doc.r_condition_minimum.to_string(),
            ]);
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SphericalRow {
    m: Vec<i64>,
    l: i64,
    t: Vec<f64>,
    psi: f64,
}

pub fn cmd_spherical(path: &Path, sink: &Sink) -> CmdResult {
    let cfg: SphericalConfig = config::load(path)?;
    let space = make_space(cfg.p, cfg.q)?;
    let opts = cfg.eval_options();
    let eval_points = config::torus_points(&space, &cfg.points)?;
    let mut rows = Vec::new();
    for m in &cfg.weights {
        let w = weights::make_weight(&space, cfg.l, m.clone())?;
        for (raw, pt) in cfg.points.iter().zip(&eval_points) {
            let psi = spherical::spherical_value(&space, &w, pt, &opts)?;
            rows.push(SphericalRow { m: m.clone(), l: cfg.l, t: raw.clone(), psi });
        }
    }
    let text = match sink.format {
        Format::Json => json_doc(&rows)?,
        Format::Csv => {
            let qs = space.q as usize;
            let mut header = indexed("m", qs);
            header.push("l".into());
            header.extend(indexed("t", qs));
            header.push("psi".into());
            let mut table = Csv::new(&header);
            for row in &rows {
                let mut cells: Vec<String> = row.m.iter().map(|v| v.to_string()).collect();
                cells.push(row.l.to_string());
                cells.extend(row.t.iter().map(|v| float(*v)));
                cells.push(float(row.psi));
                table.row(&cells);
            }
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct McDoc {
    mode: &'static str,
    p: i64,
    q: i64,
    l: i64,
    m: Vec<i64>,
    points: Vec<Vec<f64>>,
    samples: u64,
    seed: u64,
    estimate: [f64; 2],
    stderr: f64,
    reference: [f64; 2],
    sigmas: f64,
    repaired_fraction: f64,
}

pub fn cmd_convolve_mc(
    path: &Path,
    seed_flag: Option<u64>,
    workers_flag: Option<usize>,
    sink: &Sink,
) -> CmdResult {
    let cfg: McConfig = config::load(path)?;
    let space = make_space(cfg.p, cfg.q)?;
    let seed = seed_flag.unwrap_or(cfg.seed);
    let workers = workers_flag.or(cfg.workers);
    let points = config::torus_points(&space, &cfg.points)?;
    let w = weights::make_weight(&space, cfg.l, cfg.weight.m.clone())?;
    let mode = cfg.mode.unwrap_or(McMode::Pairing);
    let base = |est: Complex64, stderr: f64, reference: Complex64, sigmas: f64, rep: f64| McDoc {
        mode: mode.name(),
        p: cfg.p,
        q: cfg.q,
        l: cfg.l,
        m: cfg.weight.m.clone(),
        points: cfg.points.clone(),
        samples: cfg.samples,
        seed,
        estimate: [est.re, est.im],
        stderr,
        reference: [reference.re, reference.im],
        sigmas,
        repaired_fraction: rep,
    };
    let doc = with_workers(workers, || -> Result<McDoc, ConfigError> {
        match mode {
            McMode::Pairing => {
                let spec = measure::make_orbital_spec(&space, cfg.l, points.clone())?;
                let rep = measure::pairing_estimate(&space, &spec, &w, cfg.samples, seed)?;
                Ok(base(
                    rep.estimate.value,
                    rep.estimate.stderr,
                    rep.reference,
                    rep.sigmas,
                    rep.repaired_fraction,
                ))
            }
            McMode::FunctionalEquation => {
                if points.len() != 2 {
                    return Err(ConfigError(
                        "functional_equation mode needs exactly two points".into(),
                    ));
                }
                let rep = measure::functional_equation_check(
                    &space,
                    &w,
                    &points[0],
                    &points[1],
                    cfg.samples,
                    seed,
                )?;
                Ok(base(
                    rep.residual.value,
                    rep.residual.stderr,
                    Complex64::new(0.0, 0.0),
                    rep.sigmas,
                    0.0,
                ))
            }
            McMode::Consistency => {
                let spec = measure::make_orbital_spec(&space, cfg.l, points.clone())?;
                let rep =
                    measure::convolution_consistency_check(&space, &spec, &w, cfg.samples, seed)?;
                let combined =
                    (rep.joint.stderr.powi(2) + rep.composed.stderr.powi(2)).sqrt();
                Ok(base(
                    rep.joint.value,
                    combined,
                    rep.composed.value,
                    rep.sigmas,
                    rep.repaired_fraction,
                ))
            }
        }
    })??;
    let text = match sink.format {
        Format::Json => json_doc(&doc)?,
        Format::Csv => {
            let header: Vec<String> = [
                "mode",
                "estimate_re",
                "estimate_im",
                "stderr",
                "reference_re",
                "reference_im",
                "sigmas",
                "repaired_fraction",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let mut table = Csv::new(&header);
            table.row(&[
                doc.mode.to_string(),
                float(doc.estimate[0]),
                float(doc.estimate[1]),
                float(doc.stderr),
                float(doc.reference[0]),
                float(doc.reference[1]),
                float(doc.sigmas),
                float(doc.repaired_fraction),
            ]);
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SobolevDoc {
    p: i64,
    q: i64,
    l: i64,
    points: Vec<Vec<f64>>,
    s: f64,
    m1_max: i64,
    cutoffs: Vec<i64>,
    partial_sums: Vec<f64>,
    /// Certified bounds; an unbounded certificate serializes as null.
    tail_bounds: Vec<f64>,
    tail_bound: f64,
    converged: bool,
    cutoff: i64,
}

pub fn cmd_sobolev(path: &Path, workers_flag: Option<usize>, sink: &Sink) -> CmdResult {
    let cfg: SobolevConfig = config::load(path)?;
    let space = make_space(cfg.p, cfg.q)?;
    let s = cfg.exponent(&space)?;
    let workers = workers_flag.or(cfg.workers);
    let points = config::torus_points(&space, &cfg.points)?;
    let spec = sobolev::make_series_spec(&space, cfg.l, points)?;
    let report =
        with_workers(workers, || sobolev::sobolev_partial_sums(&space, &spec, s, cfg.m1_max))??;
    let doc = SobolevDoc {
        p: cfg.p,
        q: cfg.q,
        l: cfg.l,
        points: cfg.points.clone(),
        s,
        m1_max: cfg.m1_max,
        cutoffs: report.cutoffs.clone(),
        partial_sums: report.partial_sums.clone(),
        tail_bounds: report.tail_bounds.clone(),
        tail_bound: report.tail_bound,
        converged: report.converged,
        cutoff: report.cutoff,
    };
    let text = match sink.format {
        Format::Json => json_doc(&doc)?,
        Format::Csv => {
            let header: Vec<String> =
                ["cutoff", "partial_sum", "tail_bound"].iter().map(|s| s.to_string()).collect();
            let mut table = Csv::new(&header);
            for i in 0..doc.cutoffs.len() {
                table.row(&[
                    doc.cutoffs[i].to_string(),
                    float(doc.partial_sums[i]),
                    float(doc.tail_bounds[i]),
                ]);
            }
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(if report.converged { EXIT_OK } else { EXIT_CERTIFICATION })
}

#[derive(Serialize)]
struct SynthesisDoc {
    p: i64,
    q: i64,
    l: i64,
    points: Vec<Vec<f64>>,
    m1_max: i64,
    cutoff: i64,
    converged: bool,
    warning: Option<String>,
    grid: Vec<Vec<f64>>,
    values: Vec<f64>,
}

pub fn cmd_synthesize(path: &Path, workers_flag: Option<usize>, sink: &Sink) -> CmdResult {
    let cfg: SynthesisConfig = config::load(path)?;
    let space = make_space(cfg.p, cfg.q)?;
    let workers = workers_flag.or(cfg.workers);
    let points = config::torus_points(&space, &cfg.points)?;
    let spec = sobolev::make_series_spec(&space, cfg.l, points)?;
    let grid = config::torus_points(&space, &cfg.grid)?;
    let den =
        with_workers(workers, || sobolev::density_synthesis(&space, &spec, &grid, cfg.m1_max))??;
    if let Some(warning) = &den.warning {
        eprintln!("warning: {warning}");
    }
    let doc = SynthesisDoc {
        p: cfg.p,
        q: cfg.q,
        l: cfg.l,
        points: cfg.points.clone(),
        m1_max: cfg.m1_max,
        cutoff: den.cutoff,
        converged: den.converged,
        warning: den.warning.clone(),
        grid: cfg.grid.clone(),
        values: den.values.clone(),
    };
    let text = match sink.format {
        Format::Json => json_doc(&doc)?,
        Format::Csv => {
            let qs = space.q as usize;
            let mut header = indexed("t", qs);
            header.push("f".into());
            let mut table = Csv::new(&header);
            for (raw, value) in cfg.grid.iter().zip(&doc.values) {
                let mut cells: Vec<String> = raw.iter().map(|v| float(*v)).collect();
                cells.push(float(*value));
                table.row(&cells);
            }
            table.finish()
        }
    };
    sink.write(&text)?;
    Ok(EXIT_OK)
}
