//! Zeros of `a(λ)` in the lower half-plane.
//!
//! Zeros are counted with the argument principle, `(1/2πi)∮ a'/a`, using
//! composite Gauss-Legendre quadrature on each edge of a rectangle. The
//! winding along each edge is snapped to the branch of `arg a(B) - arg a(A)`
//! nearest to the quadrature value, so an accepted box always has an exact
//! integer count. Boxes are subdivided until each holds one zero (or one tight
//! cluster), which Newton's method then refines.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Potential, Representation};
use crate::quadrature::GaussRule;
use crate::scattering::{a_jet, a_scaled, a_value};

type C = Complex64;

const EDGE_ORDER: usize = 16;
const MAX_PANELS_PER_EDGE: usize = 1 << 13;
const WINDING_STABLE: f64 = 0.01;
const MAX_RESIDUAL: f64 = 0.25;
/// Highest allowed top edge for boxes touching the real axis.
pub const TOP_CAP: f64 = -1e-9;
const NEWTON_MAX_ITER: usize = 60;
const SPLIT_FRACTIONS: [f64; 7] = [0.5, 0.47, 0.53, 0.44, 0.56, 0.41, 0.59];
const NUDGE_STEPS: [f64; 4] = [0.005, 0.01, 0.015, 0.02];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nodes_per_side: usize,
}

impl ContourBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
            nodes_per_side: 32,
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> C {
        C::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn contains(&self, z: C) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("contour box has empty interior: {self:?}")))
        }
    }

    fn corners(&self) -> [C; 4] {
        [
            C::new(self.re_min, self.im_min),
            C::new(self.re_max, self.im_min),
            C::new(self.re_max, self.im_max),
            C::new(self.re_min, self.im_max),
        ]
    }

    fn expanded(&self, by: f64) -> Self {
        Self {
            re_min: self.re_min - by,
            re_max: self.re_max + by,
            im_min: self.im_min - by,
            im_max: if self.im_max >= TOP_CAP { self.im_max } else { (self.im_max + by).min(TOP_CAP) },
            nodes_per_side: self.nodes_per_side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub location: Complex64,
    pub multiplicity: usize,
    /// `|a(λₙ)|`
    pub newton_residual: f64,
    pub cluster_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    /// Unsnapped quadrature winding.
    pub raw: f64,
    /// `|raw - count|`
    pub residual: f64,
    /// `(1/2πi)∮ z a'/a dz`, the sum of the enclosed zeros.
    pub first_moment: Complex64,
    /// The box actually integrated (after any nudge).
    pub contour: ContourBox,
}

/// One box whose count was accepted during a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptedBox {
    pub contour: ContourBox,
    pub count: usize,
    pub raw: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub region: ContourBox,
    pub resonances: Vec<Resonance>,
    /// Snapped winding of the whole region.
    pub total_count: usize,
    pub accepted_boxes: Vec<AcceptedBox>,
}

impl SearchResult {
    pub fn multiplicity_sum(&self) -> usize {
        self.resonances.iter().map(|r| r.multiplicity).sum()
    }
}

struct EdgeIntegral {
    /// `∫ a'/a dz`, imaginary part snapped
    log: C,
    moment: C,
    raw_im: f64,
}

fn edge_panels(p: &Potential, rule: &GaussRule, za: C, zb: C, panels: usize) -> (C, C) {
    let mut s0 = C::new(0.0, 0.0);
    let mut s1 = C::new(0.0, 0.0);
    for k in 0..panels {
        let a = za + (zb - za) * (k as f64 / panels as f64);
        let b = za + (zb - za) * ((k + 1) as f64 / panels as f64);
        let mid = (a + b) * 0.5;
        let half = (b - a) * 0.5;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z = mid + half * t;
            let ld = a_jet(p, z).log_derivative();
            s0 += ld * w * half;
            s1 += ld * z * w * half;
        }
    }
    (s0, s1)
}

fn integrate_edge(p: &Potential, rule: &GaussRule, za: C, zb: C, min_panels: usize) -> Result<EdgeIntegral> {
    let len = (zb - za).norm();
    let h0 = 0.5f64.min(0.5 / p.support_end());
    let mut panels = ((len / h0).ceil() as usize).max(min_panels).max(1);
    let mut prev = edge_panels(p, rule, za, zb, panels);
    let (s0, s1) = loop {
        panels *= 2;
        let cur = edge_panels(p, rule, za, zb, panels);
        if ((cur.0 - prev.0).norm() / (2.0 * PI)) < WINDING_STABLE {
            break cur;
        }
        if panels >= MAX_PANELS_PER_EDGE {
            return Err(Error::ContourRejected {
                raw: f64::NAN,
                residual: f64::INFINITY,
            });
        }
        prev = cur;
    };
    let aa = a_scaled(p, za);
    let ab = a_scaled(p, zb);
    let principal = (ab.mantissa / aa.mantissa).arg();
    let turns = (s0.im - principal) / (2.0 * PI);
    let k = turns.round();
    if (turns - k).abs() >= MAX_RESIDUAL {
        return Err(Error::ContourRejected {
            raw: turns,
            residual: (turns - k).abs(),
        });
    }
    let ln_ratio = ab.ln_abs() - aa.ln_abs();
    if (s0.re - ln_ratio).abs() / (2.0 * PI) >= MAX_RESIDUAL {
        return Err(Error::ContourRejected {
            raw: s0.re,
            residual: (s0.re - ln_ratio).abs() / (2.0 * PI),
        });
    }
    Ok(EdgeIntegral {
        log: C::new(ln_ratio, principal + 2.0 * PI * k),
        moment: s1,
        raw_im: s0.im,
    })
}

fn count_exact(p: &Potential, b: &ContourBox) -> Result<ZeroCount> {
    b.validate()?;
    let rule = GaussRule::new(EDGE_ORDER);
    let corners = b.corners();
    let min_panels = b.nodes_per_side.div_ceil(EDGE_ORDER);
    let edges: Vec<Result<EdgeIntegral>> = (0..4)
        .into_par_iter()
        .map(|k| integrate_edge(p, &rule, corners[k], corners[(k + 1) % 4], min_panels))
        .collect();
    let mut total = C::new(0.0, 0.0);
    let mut moment = C::new(0.0, 0.0);
    let mut raw = 0.0;
    for e in edges {
        let e = e?;
        total += e.log;
        moment += e.moment;
        raw += e.raw_im;
    }
    let raw = raw / (2.0 * PI);
    let snapped = total.im / (2.0 * PI);
    let count = snapped.round();
    let residual = (raw - count).abs();
    if residual >= MAX_RESIDUAL || count < 0.0 {
        return Err(Error::ContourRejected { raw, residual });
    }
    Ok(ZeroCount {
        count: count as usize,
        raw,
        residual,
        first_moment: moment / (2.0 * PI * C::i()),
        contour: *b,
    })
}

/// Number of zeros of `a` inside `b`, nudging the box outward by up to 2% of
/// its diagonal when a zero sits too close to the boundary.
pub fn count_zeros_in_box(p: &Potential, b: &ContourBox) -> Result<ZeroCount> {
    b.validate()?;
    if p.is_zero() {
        return Ok(ZeroCount {
            count: 0,
            raw: 0.0,
            residual: 0.0,
            first_moment: C::new(0.0, 0.0),
            contour: *b,
        });
    }
    let mut last = match count_exact(p, b) {
        Ok(c) => return Ok(c),
        Err(e) => e,
    };
    for f in NUDGE_STEPS {
        let nudged = b.expanded(f * b.diagonal());
        match count_exact(p, &nudged) {
            Ok(c) => return Ok(c),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Winding of `a'/a` on the circle `|z - center| = radius`.
pub fn circle_winding(p: &Potential, center: C, radius: f64, nodes: usize) -> f64 {
    let mut sum = C::new(0.0, 0.0);
    for k in 0..nodes {
        let t = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
        let e = C::from_polar(1.0, t);
        let z = center + e * radius;
        sum += a_jet(p, z).log_derivative() * e * radius;
    }
    // trapezoid on a periodic integrand; dz = i e r dt
    (sum * C::i() * (2.0 * PI / nodes as f64) / (2.0 * PI * C::i())).re
}

fn newton(p: &Potential, start: C, m: usize, tol: f64, region: &ContourBox) -> Option<C> {
    let mut z = start;
    for _ in 0..NEWTON_MAX_ITER {
        let ld = a_jet(p, z).log_derivative();
        if !(ld.re.is_finite() && ld.im.is_finite()) || ld.norm() == 0.0 {
            return if region.contains(z) { Some(z) } else { None };
        }
        let step = m as f64 / ld;
        z -= step;
        if !region.contains(z) {
            return None;
        }
        if step.norm() <= 0.1 * tol * z.norm().max(1.0) {
            return Some(z);
        }
    }
    let ok = a_jet(p, z).log_derivative().norm().recip() * m as f64 <= tol * z.norm().max(1.0);
    ok.then_some(z)
}

fn make_resonance(p: &Potential, z: C, m: usize, tol: f64) -> Resonance {
    let radius = (10.0 * tol).max(1e-6);
    let w = circle_winding(p, z, radius, 64).round().max(1.0) as usize;
    let newton_residual = a_value(p, z).map(|v| v.norm()).unwrap_or(f64::INFINITY);
    Resonance {
        location: z,
        multiplicity: if w == m { w } else { m.max(w) },
        newton_residual,
        cluster_radius: radius,
    }
}

struct Found {
    resonances: Vec<Resonance>,
    boxes: Vec<AcceptedBox>,
}

fn accepted(zc: &ZeroCount) -> AcceptedBox {
    AcceptedBox {
        contour: zc.contour,
        count: zc.count,
        raw: zc.raw,
        residual: zc.residual,
    }
}

fn split(b: &ContourBox, f: f64) -> Vec<ContourBox> {
    let w = b.width();
    let h = b.height();
    let xm = b.re_min + f * w;
    let ym = b.im_min + (1.0 - f) * h;
    let mk = |r0, r1, i0, i1| ContourBox {
        re_min: r0,
        re_max: r1,
        im_min: i0,
        im_max: i1,
        nodes_per_side: b.nodes_per_side,
    };
    if w > 2.0 * h {
        vec![mk(b.re_min, xm, b.im_min, b.im_max), mk(xm, b.re_max, b.im_min, b.im_max)]
    } else if h > 2.0 * w {
        vec![mk(b.re_min, b.re_max, b.im_min, ym), mk(b.re_min, b.re_max, ym, b.im_max)]
    } else {
        vec![
            mk(b.re_min, xm, b.im_min, ym),
            mk(xm, b.re_max, b.im_min, ym),
            mk(b.re_min, xm, ym, b.im_max),
            mk(xm, b.re_max, ym, b.im_max),
        ]
    }
}

fn subdivide(p: &Potential, zc: ZeroCount, tol: f64, depth: usize) -> Result<Found> {
    let b = zc.contour;
    let mut found = Found {
        resonances: Vec::new(),
        boxes: vec![accepted(&zc)],
    };
    if zc.count == 0 {
        return Ok(found);
    }
    let tiny = b.diagonal() < 1e-5 * b.center().norm().max(1.0);
    if zc.count == 1 || tiny {
        let m = zc.count;
        let start = zc.first_moment / m as f64;
        let start = if b.contains(start) { start } else { b.center() };
        if let Some(z) = newton(p, start, m, tol, &b) {
            let mut r = make_resonance(p, z, m, tol);
            if tiny && m > 1 {
                r.cluster_radius = r.cluster_radius.max(0.5 * b.diagonal());
                r.multiplicity = m;
            }
            found.resonances.push(r);
            return Ok(found);
        }
        if tiny || depth > 60 {
            let z = start;
            let mut r = make_resonance(p, z, m, tol);
            r.multiplicity = m;
            r.cluster_radius = r.cluster_radius.max(0.5 * b.diagonal());
            log::warn!("unresolved zero cluster of size {m} near {z}");
            found.resonances.push(r);
            return Ok(found);
        }
    }
    let mut last_err = None;
    for f in SPLIT_FRACTIONS {
        let children = split(&b, f);
        let counts: Vec<Result<ZeroCount>> =
            children.par_iter().map(|c| count_exact(p, c)).collect();
        let counts: Result<Vec<ZeroCount>> = counts.into_iter().collect();
        match counts {
            Ok(counts) if counts.iter().map(|c| c.count).sum::<usize>() == zc.count => {
                let subs: Vec<Result<Found>> = counts
                    .into_par_iter()
                    .map(|c| subdivide(p, c, tol, depth + 1))
                    .collect();
                for s in subs {
                    let s = s?;
                    found.resonances.extend(s.resonances);
                    found.boxes.extend(s.boxes);
                }
                return Ok(found);
            }
            Ok(counts) => {
                last_err = Some(Error::Search(format!(
                    "child counts {:?} do not add up to {} in {b:?}",
                    counts.iter().map(|c| c.count).collect::<Vec<_>>(),
                    zc.count
                )))
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Search("subdivision failed".into())))
}

/// Search depth `A + 1.5 log(R)/γ` with `A = 2`.
pub fn auto_depth(gamma: f64, radius: f64) -> f64 {
    2.0 + 1.5 * radius.max(1.0).ln() / gamma
}

/// Locates every zero of `a` in `region` (top edge capped below ℝ).
pub fn find_resonances(p: &Potential, region: &ContourBox, tol: f64) -> Result<SearchResult> {
    region.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if region.im_min >= TOP_CAP {
        return Err(Error::InvalidInput("search region must extend below the real axis".into()));
    }
    let mut capped = *region;
    capped.im_max = capped.im_max.min(TOP_CAP);
    if p.is_zero() {
        return Ok(SearchResult {
            region: capped,
            resonances: Vec::new(),
            total_count: 0,
            accepted_boxes: Vec::new(),
        });
    }
    let root = count_zeros_in_box(p, &capped)?;
    let total = root.count;
    let found = subdivide(p, root, tol, 0)?;
    let mut resonances = found.resonances;
    resonances.sort_by(|a, b| {
        a.location
            .re
            .total_cmp(&b.location.re)
            .then(a.location.im.total_cmp(&b.location.im))
    });
    // merge hits whose cluster circles overlap
    let mut merged: Vec<Resonance> = Vec::with_capacity(resonances.len());
    for r in resonances {
        if let Some(prev) = merged
            .iter_mut()
            .find(|q| (q.location - r.location).norm() < q.cluster_radius + r.cluster_radius)
        {
            log::warn!("merging resonance hits at {} and {}", prev.location, r.location);
            prev.multiplicity += r.multiplicity;
            prev.cluster_radius = prev.cluster_radius.max(r.cluster_radius);
            continue;
        }
        merged.push(r);
    }
    Ok(SearchResult {
        region: root.contour,
        resonances: merged,
        total_count: total,
        accepted_boxes: found.boxes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope_estimate: f64,
    pub theoretical_slope: f64,
    /// Fraction of zeros within 0.3 rad of the real axis (either direction).
    pub sector_fraction_symmetric: f64,
    /// Fraction inside the one-sided sectors `0 < arg < 0.3`, `π - 0.3 < arg < π`.
    pub sector_fraction_upper_only: f64,
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `N(r)` counted by modulus with multiplicity; slope fitted over the upper
/// half of the radii.
pub fn counting_report(p: &Potential, resonances: &[Resonance], radii: &[f64]) -> CountingReport {
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let counts: Vec<usize> = radii
        .iter()
        .map(|&r| {
            resonances
                .iter()
                .filter(|z| z.location.norm() <= r)
                .map(|z| z.multiplicity)
                .sum()
        })
        .collect();
    let half = radii.len() / 2;
    let ys: Vec<f64> = counts[half..].iter().map(|&c| c as f64).collect();
    let slope = if radii.len() >= 2 {
        least_squares_slope(&radii[half..], &ys)
    } else {
        0.0
    };
    let r_max = radii.last().copied().unwrap_or(0.0);
    let inside: Vec<&Resonance> = resonances.iter().filter(|z| z.location.norm() <= r_max).collect();
    let total: usize = inside.iter().map(|z| z.multiplicity).sum();
    let frac = |pred: &dyn Fn(f64) -> bool| {
        if total == 0 {
            return 0.0;
        }
        inside
            .iter()
            .filter(|z| pred(z.location.arg()))
            .map(|z| z.multiplicity)
            .sum::<usize>() as f64
            / total as f64
    };
    let delta = 0.3;
    CountingReport {
        theoretical_slope: 2.0 * p.support_end() / PI,
        sector_fraction_symmetric: frac(&|t| t.abs() < delta || (t.abs() - PI).abs() < delta),
        sector_fraction_upper_only: frac(&|t| (t > 0.0 && t < delta) || (t > PI - delta && t < PI)),
        radii,
        counts,
        slope_estimate: slope,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenDomainEntry {
    pub location: Complex64,
    /// `|λₙ² + (i/2)λₙ‖q‖₂²|`
    pub lhs: f64,
    /// `1.5 · C₁ · e^{-2γ Im λₙ}`
    pub rhs: f64,
    pub pass: bool,
    /// `|λₙ| ≤ C₀ e^{-2γ Im λₙ}`
    pub zero_bound_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenDomainReport {
    /// `sup |λ²(a - 1 + ‖q‖₂²/(2iλ))|` over the grid
    pub c1: f64,
    /// `sup |λ(a - 1)|` over the grid
    pub c0: f64,
    pub safety_factor: f64,
    pub entries: Vec<ForbiddenDomainEntry>,
    pub all_pass: bool,
    pub zero_bound_all_pass: bool,
    /// Offset fitted from the five shallowest zeros with `|Re λ| ≥ 10`.
    pub log_curve_offset: Option<f64>,
    pub log_curve_pass: bool,
    /// True when `q` is piecewise constant, so `q' ∈ L¹` fails and the
    /// outcome is informational only.
    pub informational: bool,
}

/// `C₁` and `C₀` as sups over `real_grid`.
pub fn forbidden_constants(p: &Potential, real_grid: &[f64]) -> Result<(f64, f64)> {
    let l2sq = p.norms().l2.powi(2);
    let vals: Vec<Result<(f64, f64)>> = real_grid
        .par_iter()
        .map(|&l| {
            let z = C::new(l, 0.0);
            let a = a_value(p, z)?;
            let c0 = (z * (a - 1.0)).norm();
            let c1 = if l == 0.0 {
                0.0
            } else {
                (z * z * (a - 1.0 + l2sq / (2.0 * C::i() * z))).norm()
            };
            Ok((c1, c0))
        })
        .collect();
    let mut c1: f64 = 0.0;
    let mut c0: f64 = 0.0;
    for v in vals {
        let (a, b) = v?;
        c1 = c1.max(a);
        c0 = c0.max(b);
    }
    Ok((c1, c0))
}

pub fn forbidden_domain_check(
    p: &Potential,
    resonances: &[Resonance],
    real_grid: &[f64],
) -> Result<ForbiddenDomainReport> {
    let (c1, c0) = forbidden_constants(p, real_grid)?;
    let gamma = p.support_end();
    let l2sq = p.norms().l2.powi(2);
    let safety = 1.5;
    let entries: Vec<ForbiddenDomainEntry> = resonances
        .iter()
        .map(|r| {
            let z = r.location;
            let growth = (-2.0 * gamma * z.im).exp();
            let lhs = (z * z + C::i() * 0.5 * z * l2sq).norm();
            let rhs = safety * c1 * growth;
            ForbiddenDomainEntry {
                location: z,
                lhs,
                rhs,
                pass: lhs <= rhs,
                zero_bound_pass: z.norm() <= safety * c0 * growth,
            }
        })
        .collect();
    let mut far: Vec<C> = resonances
        .iter()
        .map(|r| r.location)
        .filter(|z| z.re.abs() >= 10.0)
        .collect();
    far.sort_by(|a, b| b.im.total_cmp(&a.im));
    let offset = (far.len() >= 5).then(|| {
        far[..5]
            .iter()
            .map(|z| z.im + z.re.abs().ln() / gamma)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let log_curve_pass = match offset {
        Some(a) => far
            .iter()
            .all(|z| z.im <= -z.re.abs().ln() / gamma + a + 1e-9),
        None => true,
    };
    Ok(ForbiddenDomainReport {
        c1,
        c0,
        safety_factor: safety,
        all_pass: entries.iter().all(|e| e.pass),
        zero_bound_all_pass: entries.iter().all(|e| e.zero_bound_pass),
        entries,
        log_curve_offset: offset,
        log_curve_pass,
        informational: matches!(p.representation(), Representation::PiecewiseConstant { .. }),
    })
}
