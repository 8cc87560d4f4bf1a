//! Named identity checks bundled into a structured report.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::determinant::{verify_a_equals_d, DEFAULT_NODES, DEFAULT_TERMS};
use crate::error::{Error, Result};
use crate::identities::{
    breit_wigner_compare, hadamard_eval, high_energy_check, q0_action_check, resolvent_trace_sum,
    TailModel,
};
use crate::potential::{Potential, Representation};
use crate::resonances::{auto_depth, find_resonances, forbidden_domain_check, ContourBox, Resonance};
use crate::scattering::{a_value, scattering_coefficients};

type C = Complex64;

pub const SUITE_NAMES: [&str; 11] = [
    "unitarity",
    "conjugation",
    "complex_identity",
    "jost_bounds",
    "a_equals_d",
    "hadamard",
    "breit_wigner",
    "resolvent_trace",
    "q0_action",
    "high_energy",
    "forbidden_domain",
];

const NEEDS_RESONANCES: [&str; 4] = ["hadamard", "breit_wigner", "resolvent_trace", "forbidden_domain"];

/// Evaluation points inside `|λ| ≤ 2.1` used for the product reconstruction.
pub const HADAMARD_POINTS: [(f64, f64); 5] = [(-1.0, -0.5), (0.5, 0.0), (1.0, 1.0), (-0.5, 2.0), (1.5, -1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub paper_anchor: String,
    pub inputs: serde_json::Value,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRecord {
    fn new(name: &str, anchor: &str, inputs: serde_json::Value, residual: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            paper_anchor: anchor.to_string(),
            inputs,
            residual,
            bound,
            pass: residual <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub potential_label: String,
    pub potential_fingerprint: String,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Checks to run; all of `SUITE_NAMES` when empty.
    pub identities: Vec<String>,
    /// Bound overrides keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
    /// Resonances are searched up to this modulus.
    pub search_radius: f64,
    pub newton_tol: f64,
    pub action_window: f64,
    pub determinant_lambdas: Option<Vec<Complex64>>,
    pub determinant_terms: usize,
    pub determinant_nodes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            identities: Vec::new(),
            tolerances: BTreeMap::new(),
            search_radius: 300.0,
            newton_tol: 1e-10,
            action_window: 400.0,
            determinant_lambdas: None,
            determinant_terms: DEFAULT_TERMS,
            determinant_nodes: DEFAULT_NODES,
        }
    }
}

/// Checks that every name is a known suite.
pub fn validate_names(names: &[String]) -> Result<()> {
    for n in names {
        if !SUITE_NAMES.contains(&n.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unknown identity '{n}'; known: {}",
                SUITE_NAMES.join(", ")
            )));
        }
    }
    Ok(())
}

/// Deterministic points spread over `[re0, re1] × [im0, im1]` (Kronecker sequence).
pub fn spread_points(n: usize, re: (f64, f64), im: (f64, f64)) -> Vec<C> {
    let g1 = 0.754_877_666_246_692_7;
    let g2 = 0.569_840_290_998_053_2;
    (1..=n)
        .map(|k| {
            let u = (k as f64 * g1).fract();
            let v = (k as f64 * g2).fract();
            C::new(re.0 + (re.1 - re.0) * u, im.0 + (im.1 - im.0) * v)
        })
        .collect()
}

fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

struct Ctx<'a> {
    p: &'a Potential,
    opts: &'a VerifyOptions,
    resonances: Vec<Resonance>,
    search_info: serde_json::Value,
}

impl Ctx<'_> {
    fn bound(&self, name: &str, default: f64) -> f64 {
        self.opts.tolerances.get(name).copied().unwrap_or(default)
    }

    fn smooth(&self) -> bool {
        matches!(self.p.representation(), Representation::Sampled { .. })
    }
}

fn check_unitarity(c: &Ctx) -> Result<CheckRecord> {
    let grid: Vec<f64> = (0..2000).map(|k| -50.0 + 100.0 * k as f64 / 1999.0).collect();
    let vals: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&l| {
            let s = scattering_coefficients(c.p, C::new(l, 0.0))?;
            Ok((s.a.norm_sqr() - s.b.norm_sqr() - 1.0).abs())
        })
        .collect();
    Ok(CheckRecord::new(
        "unitarity",
        "real-axis unitarity |a|^2 - |b|^2 = 1",
        json!({"grid": [-50.0, 50.0], "points": 2000}),
        max_of(vals?),
        c.bound("unitarity", 1e-9),
    ))
}

fn check_conjugation(c: &Ctx) -> Result<CheckRecord> {
    let q = c.p.conjugate_negate();
    let pts = spread_points(100, (-10.0, 10.0), (-3.0, 3.0));
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|&l| {
            let lhs = a_value(c.p, l)?.conj();
            let rhs = a_value(&q, -l.conj())?;
            Ok((lhs - rhs).norm() / (1.0 + lhs.norm()))
        })
        .collect();
    Ok(CheckRecord::new(
        "conjugation",
        "conjugation symmetry conj a(lambda, q) = a(-conj lambda, -conj q)",
        json!({"points": 100, "re": [-10.0, 10.0], "im": [-3.0, 3.0], "residual": "relative"}),
        max_of(vals?),
        c.bound("conjugation", 1e-10),
    ))
}

fn check_complex_identity(c: &Ctx) -> Result<CheckRecord> {
    let pts = spread_points(100, (-10.0, 10.0), (-5.0, 5.0));
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|&l| {
            let s = scattering_coefficients(c.p, l)?;
            let m = scattering_coefficients(c.p, l.conj())?;
            let aa = s.a * m.a.conj();
            Ok((aa - s.b * m.b.conj() - 1.0).norm() / (1.0 + aa.norm()))
        })
        .collect();
    Ok(CheckRecord::new(
        "complex_identity",
        "analytic continuation a(l) conj a(conj l) - b(l) conj b(conj l) = 1",
        json!({"points": 100, "re": [-10.0, 10.0], "im": [-5.0, 5.0], "residual": "relative"}),
        max_of(vals?),
        c.bound("complex_identity", 1e-8),
    ))
}

fn check_jost_bounds(c: &Ctx) -> Result<CheckRecord> {
    let n = c.p.norms();
    let gamma = c.p.support_end();
    let pts = spread_points(200, (-20.0, 20.0), (-4.0, 10.0));
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|&l| {
            let a = a_value(c.p, l)?;
            let g = (gamma * (l.im.abs() - l.im)).exp();
            let mut worst = (a - 1.0).norm() / (g * (n.phi0 - 1.0)).max(1e-300);
            worst = worst.max(a.norm() / (g * n.phi0));
            if l.im > 0.0 {
                worst = worst.max((a - 1.0).norm() / (n.phi0 * n.l2 * n.l1 / l.im.sqrt()).max(1e-300));
            }
            Ok(worst)
        })
        .collect();
    Ok(CheckRecord::new(
        "jost_bounds",
        "Jost function bounds |a-1| <= e^{g(|eta|-eta)}(cosh|q|_1 - 1), |a| <= e^{g(|eta|-eta)} cosh|q|_1, |a-1| <= cosh|q|_1 |q|_2|q|_1/sqrt(Im l)",
        json!({"points": 200, "residual": "largest ratio of value to bound"}),
        max_of(vals?),
        c.bound("jost_bounds", 1.0),
    ))
}

fn check_a_equals_d(c: &Ctx) -> Result<CheckRecord> {
    let lambdas = c
        .opts
        .determinant_lambdas
        .clone()
        .unwrap_or_else(|| default_determinant_lambdas(c.p));
    let recs = verify_a_equals_d(c.p, &lambdas, c.opts.determinant_terms, c.opts.determinant_nodes)?;
    let residual = max_of(
        recs.iter()
            .map(|r| r.residual - r.tail_bound - r.quadrature_estimate),
    );
    Ok(CheckRecord::new(
        "a_equals_d",
        "a equals the modified Fredholm determinant D in the upper half-plane",
        json!({"terms": c.opts.determinant_terms, "nodes": c.opts.determinant_nodes,
               "residual": "max |D - a| minus truncation and quadrature estimates",
               "points": recs}),
        residual,
        c.bound("a_equals_d", 1e-8),
    ))
}

fn check_hadamard(c: &Ctx) -> Result<CheckRecord> {
    let big = 200f64.min(c.opts.search_radius);
    let small = big / 4.0;
    let threshold = c.bound("hadamard", 0.05);
    let model = TailModel::fit(&c.resonances, big);
    let mut rows = Vec::new();
    let mut residual: f64 = 0.0;
    for &(re, im) in &HADAMARD_POINTS {
        let l = C::new(re, im);
        let a = a_value(c.p, l)?;
        let e_small = (hadamard_eval(c.p, &c.resonances, l, small)?.value / a - 1.0).norm();
        let e_big = (hadamard_eval(c.p, &c.resonances, l, big)?.value / a - 1.0).norm();
        // first-order tail: |λ| |Σ_{|λₙ|>R} 1/(λ - λₙ)|
        let tail = model.map_or(0.0, |m| l.norm() * m.resolvent_tail(l));
        let allowed = threshold.max(tail);
        residual = residual.max(e_big / allowed).max(e_big / e_small);
        rows.push(json!({"lambda": [re, im], "error_small_r": e_small, "error_big_r": e_big,
                         "tail_estimate": tail}));
    }
    Ok(CheckRecord::new(
        "hadamard",
        "Hadamard product a(0) e^{i g l} prod (1 - l/l_n), uniformly on discs",
        json!({"radii": [small, big], "threshold": threshold,
               "residual": "max of err(R)/max(threshold, tail_estimate) and err(R)/err(R/4)",
               "points": rows}),
        residual,
        1.0,
    ))
}

fn check_breit_wigner(c: &Ctx) -> Result<CheckRecord> {
    let radius = 200f64.min(c.opts.search_radius);
    let mut rows = Vec::new();
    let mut residual = f64::NEG_INFINITY;
    for l in [-3.0, 0.0, 3.0] {
        let b = breit_wigner_compare(c.p, &c.resonances, l, radius, 1e-3)?;
        residual = residual.max(b.difference - b.tail_estimate);
        rows.push(b);
    }
    Ok(CheckRecord::new(
        "breit_wigner",
        "scattering phase derivative as a sum of Breit-Wigner profiles over resonances",
        json!({"radius": radius, "fd_spacing": 1e-3,
               "residual": "max |phase' - (g + sum Im l_n/|l - l_n|^2)| minus tail estimate",
               "points": rows}),
        residual,
        c.bound("breit_wigner", 1e-3),
    ))
}

fn check_resolvent(c: &Ctx) -> Result<CheckRecord> {
    let r3 = 300f64.min(c.opts.search_radius);
    let radii = [r3 / 4.0, r3 / 2.0, r3];
    let threshold = c.bound("resolvent_trace", 0.05);
    let l = C::new(1.0, 2.0);
    let mut diffs = Vec::new();
    let mut rows = Vec::new();
    for r in radii {
        let t = resolvent_trace_sum(c.p, &c.resonances, l, r)?;
        diffs.push(t.difference);
        rows.push(t);
    }
    let residual = (diffs[1] / diffs[0]).max(diffs[2] / diffs[1]).max(diffs[2] / threshold);
    Ok(CheckRecord::new(
        "resolvent_trace",
        "resolvent trace -a'/a = -i g - sum 1/(l - l_n)",
        json!({"lambda": [1.0, 2.0], "radii": radii, "threshold": threshold,
               "residual": "max of successive difference ratios and final difference/threshold",
               "points": rows}),
        residual,
        1.0,
    ))
}

fn check_q0(c: &Ctx) -> Result<CheckRecord> {
    let r = q0_action_check(c.p, c.opts.action_window, 2.0)?;
    let default = if c.smooth() { 0.02 } else { 0.05 };
    Ok(CheckRecord::new(
        "q0_action",
        "first conservation law (1/pi) int log|a| = |q|_2^2 / 2",
        json!({"report": r, "residual": "relative error"}),
        r.relative_error,
        c.bound("q0_action", default),
    ))
}

fn check_high_energy(c: &Ctx) -> Result<CheckRecord> {
    let l2sq = c.p.norms().l2.powi(2);
    let base = 20f64.max(5.0 * l2sq);
    if c.smooth() {
        let etas = [base, 2.0 * base, 4.0 * base];
        let r = high_energy_check(c.p, &etas)?;
        Ok(CheckRecord::new(
            "high_energy",
            "second-order high-energy law a = 1 - |q|_2^2/(2 i l) + O(l^-2)",
            json!({"report": r, "residual": "max r(2 eta)/r(eta)"}),
            max_of(r.ratios.iter().copied()),
            c.bound("high_energy", 1.5),
        ))
    } else {
        let etas = [base, 2.0 * base, 4.0 * base, 8.0 * base];
        let r = high_energy_check(c.p, &etas)?;
        let ratios = r.first_order.windows(2).map(|w| w[1] / w[0]);
        Ok(CheckRecord::new(
            "high_energy",
            "first-order law a = 1 - |q|_2^2/(2 i l) + o(1/l) (q' not integrable)",
            json!({"report": r, "residual": "max successive ratio of eta*|a - 1 - |q|^2/(2 eta)|"}),
            max_of(ratios),
            c.bound("high_energy", 1.0),
        ))
    }
}

fn check_forbidden(c: &Ctx) -> Result<CheckRecord> {
    let w = (2.0 * c.opts.search_radius).max(200.0);
    let n = (20.0 * w) as usize;
    let grid: Vec<f64> = (0..=n).map(|k| -w + 2.0 * w * k as f64 / n as f64).collect();
    let f = forbidden_domain_check(c.p, &c.resonances, &grid)?;
    let residual = max_of(f.entries.iter().map(|e| e.lhs / e.rhs));
    Ok(CheckRecord::new(
        "forbidden_domain",
        "forbidden domain |l_n^2 + (i/2) l_n |q|_2^2| <= C1 e^{-2 g Im l_n}",
        json!({"c1": f.c1, "c0": f.c0, "safety_factor": f.safety_factor,
               "grid": [-w, w], "grid_points": n + 1,
               "zero_bound_all_pass": f.zero_bound_all_pass,
               "log_curve_offset": f.log_curve_offset, "log_curve_pass": f.log_curve_pass,
               "informational": f.informational, "resonances": f.entries.len(),
               "residual": "max lhs/rhs"}),
        residual,
        c.bound("forbidden_domain", 1.0),
    ))
}

/// Upper half-plane points for the determinant check, pushed up with `‖q‖₂²`.
pub fn default_determinant_lambdas(p: &Potential) -> Vec<C> {
    let scale = (1.2 * p.norms().l2.powi(2) / 3.0).max(1.0);
    [C::new(0.0, 3.0), C::new(0.0, 5.0), C::new(0.0, 10.0), C::new(2.0, 5.0)]
        .iter()
        .map(|l| C::new(l.re, l.im * scale))
        .collect()
}

/// Runs the selected checks on `p`.
pub fn run_verification(p: &Potential, opts: &VerifyOptions) -> Result<VerificationReport> {
    validate_names(&opts.identities)?;
    let selected: Vec<&str> = if opts.identities.is_empty() {
        SUITE_NAMES.to_vec()
    } else {
        SUITE_NAMES
            .iter()
            .copied()
            .filter(|n| opts.identities.iter().any(|m| m == n))
            .collect()
    };
    let mut ctx = Ctx {
        p,
        opts,
        resonances: Vec::new(),
        search_info: json!(null),
    };
    if selected.iter().any(|n| NEEDS_RESONANCES.contains(n)) && !p.is_zero() {
        let r = opts.search_radius;
        let region = ContourBox::new(-r - 2.0, r + 2.0, -auto_depth(p.support_end(), r), 0.0);
        let s = find_resonances(p, &region, opts.newton_tol)?;
        ctx.search_info = json!({"region": s.region, "count": s.total_count});
        ctx.resonances = s.resonances;
    }
    let mut records = Vec::with_capacity(selected.len());
    for name in &selected {
        let rec = match *name {
            "unitarity" => check_unitarity(&ctx)?,
            "conjugation" => check_conjugation(&ctx)?,
            "complex_identity" => check_complex_identity(&ctx)?,
            "jost_bounds" => check_jost_bounds(&ctx)?,
            "a_equals_d" => check_a_equals_d(&ctx)?,
            "hadamard" => check_hadamard(&ctx)?,
            "breit_wigner" => check_breit_wigner(&ctx)?,
            "resolvent_trace" => check_resolvent(&ctx)?,
            "q0_action" => check_q0(&ctx)?,
            "high_energy" => check_high_energy(&ctx)?,
            "forbidden_domain" => check_forbidden(&ctx)?,
            _ => unreachable!("names validated above"),
        };
        let mut rec = rec;
        if NEEDS_RESONANCES.contains(name) {
            if let serde_json::Value::Object(m) = &mut rec.inputs {
                m.insert("search".into(), ctx.search_info.clone());
            }
        }
        log::debug!("{}: residual {:.3e} bound {:.3e} pass {}", rec.name, rec.residual, rec.bound, rec.pass);
        records.push(rec);
    }
    let passed = records.iter().filter(|r| r.pass).count();
    Ok(VerificationReport {
        potential_label: p.label.clone(),
        potential_fingerprint: p.fingerprint(),
        summary: Summary {
            total: records.len(),
            passed,
            failed: records.len() - passed,
        },
        records,
        warnings: p.warnings().to_vec(),
    })
}
