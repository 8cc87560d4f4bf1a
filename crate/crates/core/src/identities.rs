//! Trace formulas, Hadamard factorization and high-energy asymptotics checked
//! against a computed resonance list.
//!
//! Every sum or product over resonances is truncated by modulus: the terms
//! with `|λₙ| ≤ R` are included, each repeated by its multiplicity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::GaussRule;
use crate::resonances::{circle_winding, Resonance};
use crate::scattering::{a_jet, a_value, scattering_phase};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSum {
    pub value: Complex64,
    pub radius: f64,
    pub n_terms: usize,
}

fn included(resonances: &[Resonance], radius: f64) -> impl Iterator<Item = &Resonance> {
    resonances.iter().filter(move |r| r.location.norm() <= radius)
}

fn count_terms(resonances: &[Resonance], radius: f64) -> usize {
    included(resonances, radius).map(|r| r.multiplicity).sum()
}

/// `a(0) e^{iγλ} Π_{|λₙ|≤R} (1 - λ/λₙ)`.
///
/// When `a(0) = 0` the prefactor becomes `a^{(m)}(0)/m! · λ^m` with `m` the
/// winding of `a` around the origin.
pub fn hadamard_eval(p: &Potential, resonances: &[Resonance], lambda: Complex64, radius: f64) -> Result<TruncatedSum> {
    let gamma = p.support_end();
    let a0 = a_value(p, C::new(0.0, 0.0))?;
    let near_zero = |r: &&Resonance| r.location.norm() < 1e-8;
    let mut prefactor = a0;
    if a0.norm() < 1e-12 {
        let m = circle_winding(p, C::new(0.0, 0.0), 1e-3, 64).round() as i32;
        if m < 1 {
            return Err(Error::InvalidInput("a(0) vanishes but has no winding at 0".into()));
        }
        // Cauchy integral for a^{(m)}(0)/m!
        let rule = GaussRule::new(64);
        let r = 0.05;
        let coef = rule.integrate(0.0, 2.0 * PI, |t| {
            let z = C::from_polar(r, t);
            a_value(p, z).unwrap_or(C::new(f64::NAN, 0.0)) / z.powi(m) / (2.0 * PI)
        });
        log::info!("a(0) = 0 with order {m}; using the derivative prefactor");
        prefactor = coef * lambda.powi(m);
    }
    let mut value = prefactor * (C::i() * gamma * lambda).exp();
    for r in included(resonances, radius).filter(|r| !near_zero(r)) {
        value *= (1.0 - lambda / r.location).powi(r.multiplicity as i32);
    }
    Ok(TruncatedSum {
        value,
        radius,
        n_terms: count_terms(resonances, radius),
    })
}

/// `(1/π) Σ_{|λₙ|≤R} Im λₙ / |λ - λₙ|²`, the density as printed; never positive.
pub fn breit_wigner_density(resonances: &[Resonance], lambda: f64, radius: f64) -> TruncatedSum {
    let s: f64 = included(resonances, radius)
        .map(|r| r.multiplicity as f64 * r.location.im / (lambda - r.location).norm_sqr())
        .sum();
    TruncatedSum {
        value: C::new(s / PI, 0.0),
        radius,
        n_terms: count_terms(resonances, radius),
    }
}

/// `γ + Σ_{|λₙ|≤R} Im λₙ / |λ - λₙ|²`, the imaginary part of
/// `a'/a = iγ + Σ 1/(λ - λₙ)` on the real axis.
pub fn phase_derivative_from_resonances(
    p: &Potential,
    resonances: &[Resonance],
    lambda: f64,
    radius: f64,
) -> TruncatedSum {
    let s: f64 = included(resonances, radius)
        .map(|r| r.multiplicity as f64 * r.location.im / (lambda - r.location).norm_sqr())
        .sum();
    TruncatedSum {
        value: C::new(p.support_end() + s, 0.0),
        radius,
        n_terms: count_terms(resonances, radius),
    }
}

/// Large-modulus model of the resonance set fitted on `R/2 < |λₙ| ≤ R`:
/// count density `dN/dr` and depth `|Im λₙ| ≈ α + β log|λₙ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub density: f64,
    pub depth_offset: f64,
    pub depth_slope: f64,
    pub radius: f64,
}

impl TailModel {
    pub fn fit(resonances: &[Resonance], radius: f64) -> Option<Self> {
        let shell: Vec<&Resonance> = resonances
            .iter()
            .filter(|r| {
                let m = r.location.norm();
                m > 0.5 * radius && m <= radius
            })
            .collect();
        let count: usize = shell.iter().map(|r| r.multiplicity).sum();
        if shell.len() < 4 {
            return None;
        }
        let xs: Vec<f64> = shell.iter().map(|r| r.location.norm().ln()).collect();
        let ys: Vec<f64> = shell.iter().map(|r| -r.location.im).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        // shift the line up so it bounds every depth in the shell
        let offset = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| y - slope * x)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            density: count as f64 / (0.5 * radius),
            depth_offset: offset,
            depth_slope: slope,
            radius,
        })
    }

    /// `∫_R^∞ n(r) · depth(r) · weight(r) dr` on a log-spaced grid.
    fn integrate<F: Fn(f64) -> f64>(&self, weight: F) -> f64 {
        let rule = GaussRule::new(32);
        let mut total = 0.0;
        let mut lo = self.radius;
        for _ in 0..40 {
            let hi = lo * 2.0;
            total += rule
                .integrate(lo, hi, |r| {
                    let depth = (self.depth_offset + self.depth_slope * r.ln()).max(0.0);
                    C::new(self.density * depth * weight(r), 0.0)
                })
                .re;
            lo = hi;
        }
        total
    }

    /// Bound-style estimate of `Σ_{|λₙ|>R} |Im λₙ| / |λ - λₙ|²` for real `λ`.
    pub fn breit_wigner_tail(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        self.integrate(|r| 1.0 / (r - l).max(1e-12).powi(2))
    }

    /// Estimate of `|Σ_{|λₙ|>R} 1/(λ - λₙ)|` under the `λₙ ↔ -λ̄ₙ` pairing,
    /// whose pair sums are `≈ 2|Im λₙ|/|λₙ|²` plus `O(|λ|/|λₙ|²)`.
    pub fn resolvent_tail(&self, lambda: Complex64) -> f64 {
        let l = lambda.norm();
        self.integrate(|r| 1.0 / (r * (r - l).max(1e-12)))
            + self.density * l / self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreitWignerComparison {
    pub lambda: f64,
    /// Centered finite difference of the scattering phase.
    pub finite_difference: f64,
    /// `γ + Σ Im λₙ/|λ - λₙ|²`
    pub model: f64,
    /// `(1/π) Σ Im λₙ/|λ - λₙ|²`
    pub printed_density: f64,
    pub tail_estimate: f64,
    pub difference: f64,
    pub n_terms: usize,
}

pub fn breit_wigner_compare(
    p: &Potential,
    resonances: &[Resonance],
    lambda: f64,
    radius: f64,
    spacing: f64,
) -> Result<BreitWignerComparison> {
    let phase = scattering_phase(p, &[lambda - spacing, lambda + spacing])?;
    let fd = (phase[1] - phase[0]) / (2.0 * spacing);
    let model = phase_derivative_from_resonances(p, resonances, lambda, radius);
    let tail = TailModel::fit(resonances, radius)
        .map(|m| m.breit_wigner_tail(lambda))
        .unwrap_or(f64::INFINITY);
    Ok(BreitWignerComparison {
        lambda,
        finite_difference: fd,
        model: model.value.re,
        printed_density: breit_wigner_density(resonances, lambda, radius).value.re,
        tail_estimate: tail,
        difference: (fd - model.value.re).abs(),
        n_terms: model.n_terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventTrace {
    /// `-iγ - Σ_{|λₙ|≤R} 1/(λ - λₙ)`
    pub sum: TruncatedSum,
    /// `-a'(λ)/a(λ)`
    pub direct: Complex64,
    pub difference: f64,
    pub tail_estimate: Option<f64>,
}

pub fn resolvent_trace_sum(
    p: &Potential,
    resonances: &[Resonance],
    lambda: Complex64,
    radius: f64,
) -> Result<ResolventTrace> {
    if let Some(r) = included(resonances, radius).find(|r| (lambda - r.location).norm() < 0.1) {
        return Err(Error::InvalidInput(format!(
            "lambda {lambda} is within 0.1 of the resonance {}",
            r.location
        )));
    }
    let s: C = included(resonances, radius)
        .map(|r| r.multiplicity as f64 / (lambda - r.location))
        .sum();
    let value = -C::i() * p.support_end() - s;
    let direct = -a_jet(p, lambda).log_derivative();
    Ok(ResolventTrace {
        sum: TruncatedSum {
            value,
            radius,
            n_terms: count_terms(resonances, radius),
        },
        direct,
        difference: (value - direct).norm(),
        tail_estimate: TailModel::fit(resonances, radius).map(|m| m.resolvent_tail(lambda)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub window: f64,
    /// `(1/π) ∫_{-W}^{W} log|a|`
    pub truncated: f64,
    /// `Σ |jumps of q|² / (4πW)`
    pub tail_correction: f64,
    pub estimate: f64,
    /// `‖q‖₂² / 2`
    pub target: f64,
    pub relative_error: f64,
}

/// `(1/π)∫ log|a(λ)| dλ` against `‖q‖₂²/2`. `density` is the number of
/// Gauss panels per unit length.
///
/// On ℝ, `log|a| = ½ log(1 + |b|²)`. For large `|λ|` the first Born term of
/// `b` is the sum of the jumps of `q` times `e^{2iλx}/(2iλ)`, so the averaged
/// tail beyond the window is `Σ|Δq|²/(8λ²)` per side.
pub fn q0_action_check(p: &Potential, window: f64, density: f64) -> Result<ActionReport> {
    if !(window > 0.0 && density > 0.0) {
        return Err(Error::InvalidInput("window and density must be positive".into()));
    }
    let target = 0.5 * p.norms().l2.powi(2);
    let panels = ((2.0 * window * density).ceil() as usize).max(1);
    let rule = GaussRule::new(16);
    let h = 2.0 * window / panels as f64;
    let parts: Vec<Result<f64>> = (0..panels)
        .into_par_iter()
        .map(|k| {
            let lo = -window + k as f64 * h;
            let mut s = 0.0;
            for (x, w) in rule.mapped(lo, lo + h) {
                s += w * a_value(p, C::new(x, 0.0))?.norm().ln();
            }
            Ok(s)
        })
        .collect();
    let mut integral = 0.0;
    for v in parts {
        integral += v?;
    }
    let truncated = integral / PI;
    let jumps: f64 = p.jumps().iter().map(|j| j.norm_sqr()).sum();
    let tail_correction = jumps / (4.0 * PI * window);
    let estimate = truncated + tail_correction;
    Ok(ActionReport {
        window,
        truncated,
        tail_correction,
        estimate,
        target,
        relative_error: if target > 0.0 {
            (estimate - target).abs() / target
        } else {
            estimate.abs()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighEnergyReport {
    pub etas: Vec<f64>,
    /// `|a(iη) - 1 - ‖q‖₂²/(2η)|`
    pub deviations: Vec<f64>,
    /// `η² · deviation`
    pub scaled: Vec<f64>,
    /// `r(η_{k+1}) / r(η_k)`
    pub ratios: Vec<f64>,
    /// `η · deviation`, the quantity that must tend to zero for any `q ∈ L²`
    pub first_order: Vec<f64>,
}

/// Along `λ = iη`, `a = 1 - ‖q‖₂²/(2iλ) + …` gives `a(iη) ≈ 1 + ‖q‖₂²/(2η)`.
pub fn high_energy_check(p: &Potential, etas: &[f64]) -> Result<HighEnergyReport> {
    let l2sq = p.norms().l2.powi(2);
    let mut deviations = Vec::with_capacity(etas.len());
    for &eta in etas {
        if !(eta > 0.0) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        let a = a_value(p, C::new(0.0, eta))?;
        deviations.push((a - 1.0 - l2sq / (2.0 * eta)).norm());
    }
    let scaled: Vec<f64> = etas.iter().zip(&deviations).map(|(e, d)| e * e * d).collect();
    let ratios = scaled
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(HighEnergyReport {
        etas: etas.to_vec(),
        first_order: etas.iter().zip(&deviations).map(|(e, d)| e * d).collect(),
        deviations,
        scaled,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_box, sample_fn};
    use crate::resonances::{auto_depth, find_resonances, ContourBox};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn box_resonances(p: &Potential, r: f64) -> Vec<Resonance> {
        let region = ContourBox::new(-r - 2.0, r + 2.0, -auto_depth(p.support_end(), r), 0.0);
        find_resonances(p, &region, 1e-10).unwrap().resonances
    }

    #[test]
    fn empty_lists() {
        assert_eq!(breit_wigner_density(&[], 0.3, 10.0).value, c(0.0, 0.0));
        let p = make_box(c(0.01, 0.0), 1.0).unwrap();
        let h = hadamard_eval(&p, &[], c(1.0, 0.0), 10.0).unwrap();
        assert_eq!(h.n_terms, 0);
    }

    #[test]
    fn sign_of_high_energy_term_is_frozen() {
        // a(iη) - 1 ≈ +‖q‖²/(2η), not minus
        let p = make_box(c(1.0, 0.0), 1.0).unwrap();
        let a = a_value(&p, c(0.0, 200.0)).unwrap();
        assert!(((a.re - 1.0) * 400.0 - 1.0).abs() < 0.01);
        let r = high_energy_check(&p, &[50.0, 100.0, 200.0]).unwrap();
        assert!(r.first_order.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn weak_box_hadamard_and_resolvent() {
        let p = make_box(c(0.05, 0.0), 1.0).unwrap();
        let res = box_resonances(&p, 300.0);
        let a = a_value(&p, c(1.0, 0.0)).unwrap();
        let err = |r: f64| (hadamard_eval(&p, &res, c(1.0, 0.0), r).unwrap().value / a - 1.0).norm();
        let tail = TailModel::fit(&res, 200.0).unwrap().resolvent_tail(c(0.0, 0.0));
        assert!(err(200.0) < err(50.0));
        assert!(err(200.0) < 1.2 * tail, "{} vs {tail}", err(200.0));
        let t = resolvent_trace_sum(&p, &res, c(0.0, 2.0), 300.0).unwrap();
        assert!(t.difference < 1.2 * t.tail_estimate.unwrap(), "{t:?}");
    }

    #[test]
    fn product_vanishes_at_a_resonance() {
        let p = make_box(c(2.0, 0.0), 1.0).unwrap();
        let res = box_resonances(&p, 20.0);
        let z = res[0].location;
        assert_eq!(hadamard_eval(&p, &res, z, 50.0).unwrap().value, c(0.0, 0.0));
        assert!(a_value(&p, z).unwrap().norm() < 1e-10);
    }

    #[test]
    fn printed_density_is_nonpositive_and_even_for_symmetric_sets() {
        let p = make_box(c(0.0, 2.0), 1.0).unwrap();
        let res = box_resonances(&p, 40.0);
        for l in [-3.0, -1.0, 0.0, 2.5] {
            let d = breit_wigner_density(&res, l, 40.0).value.re;
            assert!(d <= 0.0);
            let m = breit_wigner_density(&res, -l, 40.0).value.re;
            assert!((d - m).abs() < 1e-9);
        }
    }

    #[test]
    fn action_for_box() {
        let p = make_box(c(1.0, 0.0), 1.0).unwrap();
        let r = q0_action_check(&p, 400.0, 2.0).unwrap();
        assert!(r.relative_error < 0.05, "{r:?}");
        let z = Potential::zero(1.0).unwrap();
        assert!(q0_action_check(&z, 10.0, 1.0).unwrap().estimate.abs() < 1e-14);
    }

    #[test]
    fn smooth_high_energy_ratio() {
        let p = sample_fn(|x| c(3.0 * (PI * x).sin().powi(2), 0.0), 1.0, 2000).unwrap();
        let r = high_energy_check(&p, &[20.0, 40.0, 80.0]).unwrap();
        assert!(r.ratios.iter().all(|&q| q <= 1.5), "{r:?}");
    }

    #[test]
    fn smooth_scaled_residual_stays_bounded() {
        // for sin² the η⁻² and η⁻³ terms cancel near η ≈ 35, so only boundedness
        // and the limit ‖q‖₂⁴/8 are asserted
        let p = sample_fn(|x| c((PI * x).sin().powi(2), 0.0), 1.0, 2000).unwrap();
        let r = high_energy_check(&p, &[20.0, 40.0, 80.0, 160.0, 640.0]).unwrap();
        assert!(r.scaled.iter().all(|&v| v < 0.05), "{r:?}");
        let limit = p.norms().l2.powi(4) / 8.0;
        assert!((r.scaled[4] - limit).abs() < 0.2 * limit, "{r:?}");
    }
}
