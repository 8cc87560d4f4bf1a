use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use zs_resonance::resonances::auto_depth;
use zs_resonance::{
    counting_report, default_determinant_lambdas, find_resonances, forbidden_domain_check, log_det,
    run_verification, scattering_coefficients, scattering_phase, verify_a_equals_d, ContourBox,
    Potential, VerifyOptions,
};

use crate::config::{Depth, RunConfig};

/// Full-precision float, 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf)> {
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((w, path))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

pub fn resonances(cfg: &RunConfig, p: &Potential, out: &Path) -> Result<Vec<PathBuf>> {
    let rc = &cfg.resonances;
    let depth = match rc.depth {
        Depth::Fixed(d) => d,
        Depth::Named(_) => auto_depth(p.support_end(), rc.re_max),
    };
    let region = ContourBox::new(-rc.re_max, rc.re_max, -depth, 0.0);
    info!("searching [{}, {}] x [{}, 0]", -rc.re_max, rc.re_max, -depth);
    let search = find_resonances(p, &region, rc.tol).context("resonance search")?;
    let mult = search.multiplicity_sum();
    if mult != search.total_count {
        warn!("multiplicity sum {mult} differs from region winding {}", search.total_count);
    }
    info!("{} zeros ({} distinct)", search.total_count, search.resonances.len());

    let mut files = Vec::new();
    let (mut w, path) = writer(out, "resonances.csv")?;
    w.write_record(["re", "im", "multiplicity", "residual", "cluster_radius"])?;
    for r in &search.resonances {
        w.write_record([
            fmt_f(r.location.re),
            fmt_f(r.location.im),
            r.multiplicity.to_string(),
            fmt_f(r.newton_residual),
            fmt_f(r.cluster_radius),
        ])?;
    }
    w.flush()?;
    files.push(path);

    let radii = rc
        .counting_radii
        .clone()
        .unwrap_or_else(|| (1..=10).map(|k| rc.re_max * k as f64 / 10.0).collect());
    let counting = counting_report(p, &search.resonances, &radii);
    let (mut w, path) = writer(out, "counting.csv")?;
    w.write_record(["r", "N"])?;
    for (r, n) in counting.radii.iter().zip(&counting.counts) {
        w.write_record([fmt_f(*r), n.to_string()])?;
    }
    w.flush()?;
    files.push(path);

    let grid = linspace(-rc.re_max, rc.re_max, rc.grid_points);
    let forbidden = forbidden_domain_check(p, &search.resonances, &grid)?;
    files.push(write_json(out, "forbidden_domain.json", &forbidden)?);
    Ok(files)
}

pub fn verify(cfg: &RunConfig, p: &Potential, out: &Path, only: Option<&[String]>) -> Result<(Vec<PathBuf>, bool)> {
    let v = &cfg.verify;
    let mut opts = VerifyOptions {
        identities: only.map(<[String]>::to_vec).unwrap_or_else(|| v.identities.clone()),
        tolerances: v.tolerances.clone(),
        determinant_terms: cfg.determinant.terms,
        determinant_nodes: cfg.determinant.nodes,
        ..VerifyOptions::default()
    };
    if let Some(r) = v.search_radius {
        opts.search_radius = r;
    }
    if let Some(w) = v.action_window {
        opts.action_window = w;
    }
    if !cfg.determinant.lambdas.is_empty() {
        opts.determinant_lambdas = Some(
            cfg.determinant
                .lambdas
                .iter()
                .map(|l| Complex64::new(l[0], l[1]))
                .collect(),
        );
    }
    let report = run_verification(p, &opts)?;
    for r in &report.records {
        let tag = if r.pass { "pass" } else { "FAIL" };
        info!("{tag} {:<18} residual {:.3e} bound {:.3e}", r.name, r.residual, r.bound);
    }
    let ok = report.all_pass();
    Ok((vec![write_json(out, "report.json", &report)?], ok))
}

pub fn scattering(cfg: &RunConfig, p: &Potential, out: &Path) -> Result<Vec<PathBuf>> {
    let sc = &cfg.scattering;
    let grid = linspace(sc.lambda_min, sc.lambda_max, sc.n_points);
    let coeffs = grid
        .par_iter()
        .map(|&l| scattering_coefficients(p, Complex64::new(l, 0.0)))
        .collect::<zs_resonance::Result<Vec<_>>>()?;
    let phase = scattering_phase(p, &grid)?;
    let (mut w, path) = writer(out, "scattering.csv")?;
    w.write_record(["lambda", "re_a", "im_a", "re_b", "im_b", "unitarity", "phase"])?;
    for ((l, c), ph) in grid.iter().zip(&coeffs).zip(&phase) {
        let u = c.a.norm_sqr() - c.b.norm_sqr();
        w.write_record([
            fmt_f(*l),
            fmt_f(c.a.re),
            fmt_f(c.a.im),
            fmt_f(c.b.re),
            fmt_f(c.b.im),
            fmt_f(u),
            fmt_f(*ph),
        ])?;
    }
    w.flush()?;
    Ok(vec![path])
}

pub fn determinant(cfg: &RunConfig, p: &Potential, out: &Path) -> Result<Vec<PathBuf>> {
    let dc = &cfg.determinant;
    let lambdas: Vec<Complex64> = if dc.lambdas.is_empty() {
        default_determinant_lambdas(p)
    } else {
        dc.lambdas.iter().map(|l| Complex64::new(l[0], l[1])).collect()
    };
    let records = verify_a_equals_d(p, &lambdas, dc.terms, dc.nodes)?;
    let dets = lambdas
        .par_iter()
        .map(|&l| log_det(p, l, dc.terms, dc.nodes))
        .collect::<zs_resonance::Result<Vec<_>>>()?;

    let (mut w, path) = writer(out, "determinant.csv")?;
    w.write_record([
        "re_lambda",
        "im_lambda",
        "re_log_d",
        "im_log_d",
        "epsilon",
        "tail_bound",
        "quadrature_estimate",
        "abs_d_minus_a",
        "pass",
    ])?;
    for r in &records {
        let log_d = r.d.ln();
        w.write_record([
            fmt_f(r.lambda.re),
            fmt_f(r.lambda.im),
            fmt_f(log_d.re),
            fmt_f(log_d.im),
            fmt_f(r.epsilon),
            fmt_f(r.tail_bound),
            fmt_f(r.quadrature_estimate),
            fmt_f(r.residual),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;

    let (mut w, terms_path) = writer(out, "determinant_terms.csv")?;
    w.write_record(["re_lambda", "im_lambda", "k", "re_term", "im_term"])?;
    for d in &dets {
        for (k, t) in d.terms.iter().enumerate() {
            w.write_record([
                fmt_f(d.lambda.re),
                fmt_f(d.lambda.im),
                (k + 1).to_string(),
                fmt_f(t.re),
                fmt_f(t.im),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![path, terms_path])
}
