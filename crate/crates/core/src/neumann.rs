//! Neumann-series oracle for `χ(x, λ)`, `a(λ) = χ(0, λ)` and `b̃(λ)`.
//!
//! The iterates obey `χₙ(x) = ∫ₓ^γ q(t) ∫_t^γ e^{2iλ(s-t)} q̄(s) χₙ₋₁(s) ds dt`,
//! evaluated as two nested right-cumulative integrals on a panel grid aligned
//! with the potential's breakpoints. This path shares no code with the
//! transfer-matrix propagator.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{PanelRule, PanelSet};

const PANEL_ORDER: usize = 20;
const NODE_BUDGET: usize = 200_000;
const DEFAULT_TARGET: f64 = 1e-10;
const MAX_DEFAULT_TERMS: usize = 12;
/// Largest `-Im λ · γ` for which the oracle is used. In the upper half-plane
/// the majorant carries no exponential factor and there is no limit.
pub const MAX_DEPTH_PRODUCT: f64 = 20.0;

/// A truncated series value with a rigorous bound on the omitted tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub value: Complex64,
    pub terms_used: usize,
    pub remainder_bound: f64,
    pub per_term: Option<Vec<Complex64>>,
}

fn panel_rule() -> Arc<PanelRule> {
    static RULE: OnceLock<Arc<PanelRule>> = OnceLock::new();
    RULE.get_or_init(|| Arc::new(PanelRule::new(PANEL_ORDER)))
        .clone()
}

/// `Σ_{n>N} L^{k(n)} / k(n)!` with `k(n) = 2n + offset`, summed directly.
fn factorial_tail(l: f64, n: usize, offset: usize) -> f64 {
    let mut sum = 0.0;
    let mut k = 2 * (n + 1) + offset;
    // L^k / k!
    let mut term = (1..=k).fold(1.0, |acc, j| acc * l / j as f64);
    while term > 1e-300 {
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        term *= l * l / ((k + 1) * (k + 2)) as f64;
        k += 2;
    }
    sum
}

/// Bound on the tail of the series for `χ(x, λ)` after `n` terms.
pub fn chi_remainder_bound(p: &Potential, x: f64, lambda: Complex64, n: usize) -> f64 {
    let eta = lambda.im;
    let growth = ((p.support_end() - x) * (eta.abs() - eta)).exp();
    growth * factorial_tail(p.l1_from(x), n, 0)
}

/// Bound on the tail of the series for `b̃(λ)` after `n` terms.
pub fn b_tilde_remainder_bound(p: &Potential, lambda: Complex64, n: usize) -> f64 {
    let eta = lambda.im;
    let growth = (p.support_end() * (eta.abs() - eta)).exp();
    growth * factorial_tail(p.l1_from(0.0), n, 1)
}

/// Smallest term count whose remainder bound is below `1e-10`, capped at 12.
pub fn default_terms(p: &Potential, x: f64, lambda: Complex64) -> usize {
    (0..=MAX_DEFAULT_TERMS)
        .find(|&n| chi_remainder_bound(p, x, lambda, n) < DEFAULT_TARGET)
        .unwrap_or(MAX_DEFAULT_TERMS)
}

struct Iterates {
    /// `χₙ(x)` for `n = 0..=N`
    at_x: Vec<Complex64>,
    /// `∫ₓ^γ e^{2iλ(s-x)} q̄ χₙ ds` at `x`, for `n = 0..=N`
    u_at_x: Vec<Complex64>,
}

fn iterate(p: &Potential, x: f64, lambda: Complex64, n: usize) -> Result<Iterates> {
    let gamma = p.support_end();
    if !(0.0..=gamma).contains(&x) {
        return Err(Error::InvalidInput(format!("x = {x} is outside [0, {gamma}]")));
    }
    if -lambda.im * gamma > MAX_DEPTH_PRODUCT {
        return Err(Error::InvalidInput(format!(
            "-Im(lambda)*gamma = {} exceeds the oracle range {MAX_DEPTH_PRODUCT}",
            -lambda.im * gamma
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    if x == gamma || p.is_zero() {
        return Ok(Iterates {
            at_x: std::iter::once(one)
                .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), n))
                .collect(),
            u_at_x: vec![Complex64::new(0.0, 0.0); n + 1],
        });
    }
    let max_len = (1.5 / lambda.norm().max(1e-300)).min(gamma / 2.0);
    let rule = panel_rule();
    let panels_est = ((gamma - x) / max_len).ceil() as usize + p.pieces().len();
    if panels_est * PANEL_ORDER > NODE_BUDGET {
        return Err(Error::QuadratureBudget {
            needed: panels_est * PANEL_ORDER,
            budget: NODE_BUDGET,
        });
    }
    let set = PanelSet::new(rule, x, gamma, &p.breakpoints(), max_len);
    let (nodes, _) = set.nodes_and_weights();
    let q: Vec<Complex64> = nodes.iter().map(|&t| p.value_at(t)).collect();
    let omega = lambda * 2.0;
    let mut chi = vec![one; nodes.len()];
    let mut at_x = vec![one];
    let mut u_at_x = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let f: Vec<Complex64> = q.iter().zip(&chi).map(|(qv, c)| qv.conj() * c).collect();
        let (u, u0) = set.right_exp_cumulative(&f, omega);
        u_at_x.push(u0);
        if k == n {
            break;
        }
        let g: Vec<Complex64> = q.iter().zip(&u).map(|(qv, uv)| qv * uv).collect();
        let (next, next0) = set.right_exp_cumulative(&g, Complex64::new(0.0, 0.0));
        chi = next;
        at_x.push(next0);
    }
    Ok(Iterates { at_x, u_at_x })
}

/// `χ(x, λ) ≈ Σ_{n≤N} χₙ(x, λ)`.
pub fn chi_series(p: &Potential, x: f64, lambda: Complex64, n: usize) -> Result<SeriesResult> {
    let it = iterate(p, x, lambda, n)?;
    Ok(SeriesResult {
        value: it.at_x.iter().sum(),
        terms_used: n,
        remainder_bound: chi_remainder_bound(p, x, lambda, n),
        per_term: Some(it.at_x),
    })
}

/// `a(λ) = χ(0, λ)`.
pub fn a_series(p: &Potential, lambda: Complex64, n: usize) -> Result<SeriesResult> {
    chi_series(p, 0.0, lambda, n)
}

/// `a_series` with the default term count.
pub fn a_series_auto(p: &Potential, lambda: Complex64) -> Result<SeriesResult> {
    a_series(p, lambda, default_terms(p, 0.0, lambda))
}

/// `b̃(λ) = -i ∫₀^γ e^{2iλt} q̄(t) χ(t, λ) dt` with `χ` truncated after `N` terms.
pub fn b_tilde_series(p: &Potential, lambda: Complex64, n: usize) -> Result<SeriesResult> {
    let it = iterate(p, 0.0, lambda, n)?;
    let terms: Vec<Complex64> = it.u_at_x.iter().map(|u| -Complex64::i() * u).collect();
    Ok(SeriesResult {
        value: terms.iter().sum(),
        terms_used: n,
        remainder_bound: b_tilde_remainder_bound(p, lambda, n),
        per_term: Some(terms),
    })
}
