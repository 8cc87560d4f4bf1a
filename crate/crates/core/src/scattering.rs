//! Propagation of the Zakharov-Shabat system `f' = A f` with
//! `A = [[iλ, -iq], [iq̄, -iλ]]` across piecewise-constant potentials, and the
//! scattering data built from the Jost solutions.
//!
//! On a piece with constant value `c` and length `ℓ`,
//! `exp(ℓA) = cos(κℓ) I + sin(κℓ)/κ A` with `κ² = λ² - |c|²`. Both coefficient
//! functions are even in `κ`, so the branch of the square root never matters.
//!
//! Everything deep in the lower half-plane grows like `e^{γ|Im λ|}`, so states
//! are carried as a mantissa plus a real log-scale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Largest `|Im κ|·ℓ` allowed in a single piece exponential.
const MAX_GROWTH_PER_STEP: f64 = 30.0;
/// Recombined values above `e^LOG_OVERFLOW` are reported as overflow.
const LOG_OVERFLOW: f64 = 700.0;

type C = Complex64;

fn zero() -> C {
    C::new(0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spinor2 {
    pub f1: Complex64,
    pub f2: Complex64,
}

/// A complex number stored as `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    /// `ln |value|`, finite even when `value` itself is not representable.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn try_value(&self) -> Result<Complex64> {
        if self.log_scale > LOG_OVERFLOW {
            return Err(Error::Overflow(format!(
                "magnitude e^{:.1} is not representable",
                self.ln_abs()
            )));
        }
        Ok(self.value())
    }
}

/// `M(x₁ ← x₀; λ) = mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub m: [[Complex64; 2]; 2],
    pub log_scale: f64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        Self {
            m: [[C::new(1.0, 0.0), zero()], [zero(), C::new(1.0, 0.0)]],
            log_scale: 0.0,
        }
    }

    /// Recombined entries. Fails when they are not representable.
    pub fn matrix(&self) -> Result<[[Complex64; 2]; 2]> {
        if self.log_scale > LOG_OVERFLOW {
            return Err(Error::Overflow("transfer matrix entries overflow".into()));
        }
        let s = self.log_scale.exp();
        Ok([
            [self.m[0][0] * s, self.m[0][1] * s],
            [self.m[1][0] * s, self.m[1][1] * s],
        ])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.m;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * (2.0 * self.log_scale).exp()
    }

    /// `self · rhs`
    pub fn compose(&self, rhs: &TransferMatrix) -> TransferMatrix {
        let mut out = TransferMatrix {
            m: mat_mul(&self.m, &rhs.m),
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.normalize();
        out
    }

    pub fn apply(&self, v: Spinor2) -> Result<Spinor2> {
        let m = self.matrix()?;
        Ok(Spinor2 {
            f1: m[0][0] * v.f1 + m[0][1] * v.f2,
            f2: m[1][0] * v.f1 + m[1][1] * v.f2,
        })
    }

    fn normalize(&mut self) {
        let s = self
            .m
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            for z in self.m.iter_mut().flatten() {
                *z /= s;
            }
            self.log_scale += s.ln();
        }
    }
}

fn mat_mul(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub a: Complex64,
    pub b: Complex64,
    pub b_tilde: Complex64,
    pub lambda: Complex64,
    /// `|det(ψ⁺, ψ⁻) - 1|` at `x = 0`.
    pub wronskian_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMatrix {
    pub entries: [[Complex64; 2]; 2],
    pub lambda: f64,
    /// `max |(S*S - I)_{jk}|`
    pub unitarity_residual: f64,
}

impl SMatrix {
    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }
}

/// Coefficients of `exp(±ℓA)` on one piece: `cos κℓ`, `sin κℓ / κ` and
/// `g = (ℓ cos κℓ - sin κℓ/κ)/κ²`, the latter entering `d/dλ (sin κℓ/κ) = λ g`.
/// `em = cos κℓ - iλ sinc` and `ep = cos κℓ + iλ sinc` are the diagonal
/// entries, formed without cancellation when `|c|` is small.
#[derive(Debug, Clone, Copy)]
struct PieceExp {
    cos: C,
    sinc: C,
    g: C,
    em: C,
    ep: C,
}

fn piece_exp(lambda: C, abs2: f64, len: f64) -> PieceExp {
    let k2 = lambda * lambda - abs2;
    let z = k2 * (len * len);
    let zn = z.norm();
    let g = if zn < 0.25 {
        // ℓ³ Σ_{n≥1} (-1)^n z^{n-1} 2n/(2n+1)!
        let mut term = C::new(-len.powi(3) / 3.0, 0.0);
        let mut sum = term;
        for n in 2..14 {
            let nf = n as f64;
            // ratio of consecutive terms
            term *= -z * (nf / (nf - 1.0)) / ((2.0 * nf) * (2.0 * nf + 1.0));
            sum += term;
        }
        sum
    } else {
        zero()
    };
    if zn < 1e-8 {
        // |κℓ| < 1e-4: four-term Taylor forms
        let mut cos = zero();
        let mut sinc = zero();
        let mut t_c = C::new(1.0, 0.0);
        let mut t_s = C::new(len, 0.0);
        for n in 0..4 {
            cos += t_c;
            sinc += t_s;
            let nf = n as f64;
            t_c *= -z / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
            t_s *= -z / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
        }
        let il = C::i() * lambda * sinc;
        return PieceExp {
            cos,
            sinc,
            g,
            em: cos - il,
            ep: cos + il,
        };
    }
    // branch of κ closest to λ, so that λ - κ = |c|²/(λ + κ) is well conditioned
    let mut kappa = k2.sqrt();
    if (kappa * lambda.conj()).re < 0.0 {
        kappa = -kappa;
    }
    let i = C::i();
    let x = kappa * len;
    let cos = x.cos();
    let sinc = x.sin() / kappa;
    let g = if zn < 0.25 { g } else { (cos * len - sinc) / k2 };
    let shift = abs2 / (lambda + kappa);
    PieceExp {
        cos,
        sinc,
        g,
        em: (-i * x).exp() - i * shift * sinc,
        ep: (i * x).exp() + i * shift * sinc,
    }
}

/// Number of equal sub-steps needed to keep `|Im κ| ℓ` bounded.
fn substeps(lambda: C, abs2: f64, len: f64) -> usize {
    let im = (lambda * lambda - abs2).sqrt().im.abs();
    ((im * len) / MAX_GROWTH_PER_STEP).ceil().max(1.0) as usize
}

/// `exp(sign·ℓA)` for the piece value `c`.
fn piece_matrix(lambda: C, c: C, len: f64, sign: f64) -> [[C; 2]; 2] {
    let e = piece_exp(lambda, c.norm_sqr(), len);
    let i = C::i();
    let s = e.sinc * sign;
    let (d1, d2) = if sign > 0.0 { (e.ep, e.em) } else { (e.em, e.ep) };
    [[d1, -s * i * c], [s * i * c.conj(), d2]]
}

/// Forward transfer matrix from `x0` to `x1`.
pub fn transfer(p: &Potential, lambda: Complex64, x0: f64, x1: f64) -> Result<TransferMatrix> {
    let gamma = p.support_end();
    if !(0.0 <= x0 && x0 <= x1 && x1 <= gamma) {
        return Err(Error::InvalidInput(format!(
            "transfer needs 0 <= x0 <= x1 <= gamma, got x0={x0}, x1={x1}, gamma={gamma}"
        )));
    }
    let mut t = TransferMatrix::identity();
    for piece in p.pieces() {
        let lo = piece.start.max(x0);
        let hi = piece.end.min(x1);
        if hi <= lo {
            continue;
        }
        let len = hi - lo;
        let n = substeps(lambda, piece.value.norm_sqr(), len);
        let step = piece_matrix(lambda, piece.value, len / n as f64, 1.0);
        for _ in 0..n {
            t.m = mat_mul(&step, &t.m);
            t.normalize();
        }
    }
    Ok(t)
}

/// Jost solution state at `x = 0` with its λ-derivative, sharing one scale.
#[derive(Debug, Clone, Copy)]
pub struct JostState {
    pub v: [Complex64; 2],
    pub dv: [Complex64; 2],
    pub log_scale: f64,
}

/// Back-propagates `e^{sign·iλγ} e_±` from `γ` to `0` together with the
/// variational (λ-derivative) system.
fn jost_at_zero(p: &Potential, lambda: C, plus: bool) -> JostState {
    let gamma = p.support_end();
    let i = C::i();
    let sign = if plus { 1.0 } else { -1.0 };
    let phase = C::from_polar(1.0, sign * lambda.re * gamma);
    let mut v = if plus { [phase, zero()] } else { [zero(), phase] };
    let mut dv = [v[0] * i * (sign * gamma), v[1] * i * (sign * gamma)];
    let mut log_scale = -sign * gamma * lambda.im;
    for piece in p.pieces().iter().rev() {
        let c = piece.value;
        let abs2 = c.norm_sqr();
        let n = substeps(lambda, abs2, piece.len());
        let len = piece.len() / n as f64;
        let e = piece_exp(lambda, abs2, len);
        let dcos = -len * lambda * e.sinc;
        let dsinc = lambda * e.g;
        // exp(-ℓA) = cos I - sinc A
        let a = [[i * lambda, -i * c], [i * c.conj(), -i * lambda]];
        for _ in 0..n {
            let av = [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
            let adv = [
                a[0][0] * dv[0] + a[0][1] * dv[1],
                a[1][0] * dv[0] + a[1][1] * dv[1],
            ];
            // dA/dλ = diag(i, -i)
            let jv = [i * v[0], -i * v[1]];
            let nv = [
                e.em * v[0] + e.sinc * i * c * v[1],
                e.ep * v[1] - e.sinc * i * c.conj() * v[0],
            ];
            let ndv = [
                dcos * v[0] - dsinc * av[0] - e.sinc * jv[0] + e.cos * dv[0] - e.sinc * adv[0],
                dcos * v[1] - dsinc * av[1] - e.sinc * jv[1] + e.cos * dv[1] - e.sinc * adv[1],
            ];
            let s = nv[0].norm().max(nv[1].norm());
            if s > 0.0 && s.is_finite() {
                v = [nv[0] / s, nv[1] / s];
                dv = [ndv[0] / s, ndv[1] / s];
                log_scale += s.ln();
            } else {
                v = nv;
                dv = ndv;
            }
        }
    }
    JostState { v, dv, log_scale }
}

/// `a(λ)` together with `a'(λ)` in scaled form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AJet {
    pub a: ScaledComplex,
    pub da: ScaledComplex,
}

impl AJet {
    /// `a'/a`, independent of the scale.
    pub fn log_derivative(&self) -> Complex64 {
        self.da.mantissa / self.a.mantissa
    }
}

pub fn a_jet(p: &Potential, lambda: Complex64) -> AJet {
    let s = jost_at_zero(p, lambda, true);
    AJet {
        a: ScaledComplex {
            mantissa: s.v[0],
            log_scale: s.log_scale,
        },
        da: ScaledComplex {
            mantissa: s.dv[0],
            log_scale: s.log_scale,
        },
    }
}

/// `a(λ)` in scaled form; never overflows.
pub fn a_scaled(p: &Potential, lambda: Complex64) -> ScaledComplex {
    a_jet(p, lambda).a
}

pub fn a_value(p: &Potential, lambda: Complex64) -> Result<Complex64> {
    a_scaled(p, lambda).try_value()
}

/// `da/dλ` from the variational system.
pub fn a_derivative(p: &Potential, lambda: Complex64) -> Result<Complex64> {
    a_jet(p, lambda).da.try_value()
}

/// `a'(λ)/a(λ)`
pub fn a_log_derivative(p: &Potential, lambda: Complex64) -> Complex64 {
    a_jet(p, lambda).log_derivative()
}

pub fn scattering_coefficients(p: &Potential, lambda: Complex64) -> Result<ScatteringCoefficients> {
    let plus = jost_at_zero(p, lambda, true);
    let minus = jost_at_zero(p, lambda, false);
    let scale = |st: &JostState, z: C| {
        ScaledComplex {
            mantissa: z,
            log_scale: st.log_scale,
        }
        .try_value()
    };
    let a = scale(&plus, plus.v[0])?;
    let b_tilde = scale(&plus, plus.v[1])?;
    let b = -scale(&minus, minus.v[0])?;
    let w = (plus.v[0] * minus.v[1] - plus.v[1] * minus.v[0])
        * (plus.log_scale + minus.log_scale).exp();
    Ok(ScatteringCoefficients {
        a,
        b,
        b_tilde,
        lambda,
        wronskian_residual: (w - 1.0).norm(),
    })
}

/// `S(λ) = (1/a) [[1, -b̄], [b, 1]]` for real `λ`.
pub fn s_matrix(p: &Potential, lambda: f64) -> Result<SMatrix> {
    let sc = scattering_coefficients(p, C::new(lambda, 0.0))?;
    let inv = 1.0 / sc.a;
    let e = [[inv, -sc.b.conj() * inv], [sc.b * inv, inv]];
    let mut res: f64 = 0.0;
    for j in 0..2 {
        for k in 0..2 {
            let mut s: C = e.iter().map(|row| row[j].conj() * row[k]).sum();
            if j == k {
                s -= 1.0;
            }
            res = res.max(s.norm());
        }
    }
    Ok(SMatrix {
        entries: e,
        lambda,
        unitarity_residual: res,
    })
}

const PHASE_STEP: f64 = 0.5;
const PHASE_MAX_DEPTH: u32 = 40;

/// Continues `arg a` from `z0` (where `a = a0`) to `z1` by bisection until every
/// step turns by less than `PHASE_STEP`.
fn continue_arg(p: &Potential, z0: C, a0: C, z1: C, depth: u32) -> Result<(f64, C)> {
    let a1 = a_scaled(p, z1).mantissa;
    let d = (a1 / a0).arg();
    if d.abs() < PHASE_STEP {
        return Ok((d, a1));
    }
    if depth >= PHASE_MAX_DEPTH {
        return Err(Error::BranchAmbiguity { lambda: z1.re });
    }
    let mid = (z0 + z1) * 0.5;
    let (d0, am) = continue_arg(p, z0, a0, mid, depth + 1)?;
    let (d1, a1) = continue_arg(p, mid, am, z1, depth + 1)?;
    Ok((d0 + d1, a1))
}

/// Height of the phase anchor `iη` on the imaginary axis.
pub fn phase_anchor_height(p: &Potential) -> f64 {
    10f64.max(10.0 * p.norms().l2.powi(2))
}

/// Continuous branch of `arg a` on an increasing real grid, normalized so that
/// `log a(iη) → 0` as `η → ∞`.
pub fn scattering_phase(p: &Potential, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("phase grid must be strictly increasing".into()));
    }
    let anchor = C::new(0.0, phase_anchor_height(p));
    let a_anchor = a_scaled(p, anchor).mantissa;
    let mut phase = a_anchor.arg();
    let start = C::new(grid[0], 0.0);
    let segments = ((start - anchor).norm() / 0.25).ceil().max(1.0) as usize;
    let mut z = anchor;
    let mut a = a_anchor;
    for k in 1..=segments {
        let next = anchor + (start - anchor) * (k as f64 / segments as f64);
        let (d, a1) = continue_arg(p, z, a, next, 0)?;
        phase += d;
        z = next;
        a = a1;
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(phase);
    for w in grid.windows(2) {
        let (d, a1) = continue_arg(p, C::new(w[0], 0.0), a, C::new(w[1], 0.0), 0)?;
        phase += d;
        a = a1;
        out.push(phase);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_box, make_multibox, sample_fn};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn box21() -> Potential {
        make_box(c(2.0, 0.0), 1.0).unwrap()
    }

    fn closed_form_box_a(cv: C, gamma: f64, lambda: C) -> C {
        let kappa = (lambda * lambda - cv.norm_sqr()).sqrt();
        (C::i() * lambda * gamma).exp()
            * ((kappa * gamma).cos() - C::i() * lambda * (kappa * gamma).sin() / kappa)
    }

    #[test]
    fn free_transfer_is_diagonal() {
        let p = Potential::zero(2.0).unwrap();
        let l = c(1.3, -0.4);
        let m = transfer(&p, l, 0.5, 1.7).unwrap().matrix().unwrap();
        assert!((m[0][0] - (C::i() * l * 1.2).exp()).norm() < 1e-14);
        assert!((m[1][1] - (-C::i() * l * 1.2).exp()).norm() < 1e-14);
        assert!(m[0][1].norm() < 1e-15 && m[1][0].norm() < 1e-15);
    }

    #[test]
    fn degenerate_kappa_has_unit_det() {
        let p = box21();
        for l in [c(2.0, 0.0), c(-2.0, 0.0), c(2.0 + 1e-9, 0.0)] {
            let t = transfer(&p, l, 0.0, 1.0).unwrap();
            assert!((t.det() - 1.0).norm() < 1e-12);
        }
        // exact κ = 0 agrees with a nearby point
        let a0 = a_value(&p, c(2.0, 0.0)).unwrap();
        let a1 = a_value(&p, c(2.0 + 1e-7, 0.0)).unwrap();
        assert!((a0 - a1).norm() < 1e-5);
    }

    #[test]
    fn transfer_matches_dense_exponential() {
        let p = box21();
        let l = c(3.0, 0.0);
        let a = Matrix2::new(C::i() * l, -C::i() * c(2.0, 0.0), C::i() * c(2.0, 0.0), -C::i() * l);
        let oracle = a.exp();
        let m = transfer(&p, l, 0.0, 1.0).unwrap().matrix().unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((m[j][k] - oracle[(j, k)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn box_a_matches_closed_form() {
        let p = box21();
        for l in [c(5.0, 0.0), c(0.0, 0.0), c(1.0, 1.0), c(-3.0, -2.0), c(0.5, 10.0)] {
            let a = a_value(&p, l).unwrap();
            let e = closed_form_box_a(c(2.0, 0.0), 1.0, l);
            assert!((a - e).norm() < 1e-12 * (1.0 + e.norm()), "{l}: {a} vs {e}");
        }
        assert_abs_diff_eq!(a_value(&p, c(0.0, 0.0)).unwrap().re, 2f64.cosh(), epsilon = 1e-13);
    }

    #[test]
    fn free_system() {
        let p = Potential::zero(1.0).unwrap();
        let sc = scattering_coefficients(&p, c(0.7, -3.0)).unwrap();
        assert!((sc.a - 1.0).norm() < 1e-14);
        assert!(sc.b.norm() < 1e-14 && sc.b_tilde.norm() < 1e-14);
        assert!(a_derivative(&p, c(2.0, 1.0)).unwrap().norm() < 1e-14);
        let s = s_matrix(&p, 1.5).unwrap();
        assert!(s.unitarity_residual < 1e-14);
    }

    #[test]
    fn unitarity_and_s_matrix() {
        let p = box21();
        let sc = scattering_coefficients(&p, c(5.0, 0.0)).unwrap();
        assert!((sc.a.norm_sqr() - sc.b.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(sc.wronskian_residual < 1e-12);
        let s = s_matrix(&p, 5.0).unwrap();
        assert!(s.unitarity_residual < 1e-9);
        let expected = C::from_polar(1.0, -2.0 * sc.a.arg());
        assert!((s.det() - expected).norm() < 1e-10);
    }

    #[test]
    fn b_tilde_sign_relation() {
        let p = make_multibox(&[(0.4, c(1.0, 0.5)), (0.6, c(-0.3, 1.2))]).unwrap();
        for l in [c(1.0, 0.0), c(-2.0, 0.7), c(0.4, -1.1)] {
            let here = scattering_coefficients(&p, l).unwrap();
            let mirror = scattering_coefficients(&p, l.conj()).unwrap();
            assert!((here.b_tilde + mirror.b.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference_and_cauchy() {
        let p = make_multibox(&[(0.5, c(2.0, 0.0)), (0.5, c(0.5, -1.0))]).unwrap();
        let l = c(3.0, 0.0);
        let d = a_derivative(&p, l).unwrap();
        let h = 1e-5;
        let fd = (a_value(&p, l + h).unwrap() - a_value(&p, l - h).unwrap()) / (2.0 * h);
        assert!((d - fd).norm() < 1e-6 * d.norm());

        let rule = crate::quadrature::GaussRule::new(64);
        let r = 0.3;
        let cauchy = rule.integrate(0.0, 2.0 * std::f64::consts::PI, |t| {
            let z = l + C::from_polar(r, t);
            let dz = C::i() * C::from_polar(r, t);
            a_value(&p, z).unwrap() / ((z - l) * (z - l)) * dz
        }) / (2.0 * std::f64::consts::PI * C::i());
        assert!((cauchy - d).norm() < 1e-8 * (1.0 + d.norm()));
    }

    #[test]
    fn deep_lower_half_plane_stays_finite() {
        let p = box21();
        let s = a_scaled(&p, c(3.0, -800.0));
        assert!(s.ln_abs().is_finite());
        assert!(s.ln_abs() > 1500.0);
        assert!(a_value(&p, c(3.0, -800.0)).is_err());
        let e = closed_form_box_a(c(2.0, 0.0), 1.0, c(3.0, -20.0));
        let a = a_value(&p, c(3.0, -20.0)).unwrap();
        assert!((a - e).norm() < 1e-12 * e.norm());
    }

    #[test]
    fn jost_bounds() {
        let p = box21();
        let n = p.norms();
        let a = a_value(&p, c(0.0, 10.0)).unwrap();
        assert!((a - 1.0).norm() <= n.phi0 * n.l2 * n.l1 / 10f64.sqrt());
        let a = a_value(&p, c(-1.0, -1.0)).unwrap();
        assert!(a.norm() <= 2f64.exp() * n.phi0);
    }

    #[test]
    fn phase_vanishes_for_free_system_and_decays() {
        let p = Potential::zero(1.0).unwrap();
        let ph = scattering_phase(&p, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(ph.iter().all(|v| v.abs() < 1e-14));
        let p = box21();
        let grid: Vec<f64> = (0..=400).map(|k| -200.0 + k as f64).collect();
        let ph = scattering_phase(&p, &grid).unwrap();
        // arg a ~ Im(-‖q‖²/(2iλ)) = ‖q‖²/(2λ) at large |λ|
        assert!((ph[0] - (-4.0 / 400.0)).abs() < 2e-3, "{}", ph[0]);
        assert!((ph[400] - 4.0 / 400.0).abs() < 2e-3, "{}", ph[400]);
        assert!((ph[200] - a_value(&p, c(0.0, 0.0)).unwrap().arg()).abs() < 1e-12);
    }

    #[test]
    fn sampled_smooth_potential_unitarity() {
        let p = sample_fn(|x| c((std::f64::consts::PI * x).sin().powi(2), 0.0), 1.0, 400).unwrap();
        for l in [-7.0, 0.0, 0.3, 12.0] {
            let sc = scattering_coefficients(&p, c(l, 0.0)).unwrap();
            assert!((sc.a.norm_sqr() - sc.b.norm_sqr() - 1.0).abs() < 1e-11);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transfer_det_and_semigroup(
            re in -10.0f64..10.0, im in -6.0f64..6.0,
            x0 in 0.0f64..0.4, x1 in 0.4f64..0.7, x2 in 0.7f64..1.0,
        ) {
            let p = make_multibox(&[(0.3, c(1.0, 2.0)), (0.5, c(-1.5, 0.0)), (0.2, c(0.0, 0.7))]).unwrap();
            let l = c(re, im);
            let t01 = transfer(&p, l, x0, x1).unwrap();
            let t12 = transfer(&p, l, x1, x2).unwrap();
            let t02 = transfer(&p, l, x0, x2).unwrap();
            prop_assert!((t02.det() - 1.0).norm() < 1e-10);
            let comp = t12.compose(&t01).matrix().unwrap();
            let direct = t02.matrix().unwrap();
            let scale = direct.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
            for j in 0..2 { for k in 0..2 {
                prop_assert!((comp[j][k] - direct[j][k]).norm() < 1e-10 * scale);
            }}
        }

        #[test]
        fn conjugation_symmetry(re in -10.0f64..10.0, im in -4.0f64..4.0) {
            let p = make_multibox(&[(0.3, c(1.0, 2.0)), (0.7, c(-1.5, 0.4))]).unwrap();
            let q = p.conjugate_negate();
            let l = c(re, im);
            let lhs = a_value(&p, l).unwrap().conj();
            let rhs = a_value(&q, -l.conj()).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn complex_plane_identity(re in -8.0f64..8.0, im in -5.0f64..5.0) {
            let p = make_multibox(&[(0.5, c(1.0, -0.5)), (0.5, c(0.3, 0.8))]).unwrap();
            let l = c(re, im);
            let s = scattering_coefficients(&p, l).unwrap();
            let m = scattering_coefficients(&p, l.conj()).unwrap();
            let v = s.a * m.a.conj() - s.b * m.b.conj();
            prop_assert!((v - 1.0).norm() < 1e-8 * (1.0 + (s.a * m.a.conj()).norm()));
        }

        #[test]
        fn jost_bound_a_minus_one(re in -10.0f64..10.0, im in -4.0f64..4.0) {
            let p = make_multibox(&[(0.5, c(1.0, -0.5)), (0.5, c(0.3, 0.8))]).unwrap();
            let n = p.norms();
            let g = p.support_end();
            let a = a_value(&p, c(re, im)).unwrap();
            let bound = (g * (im.abs() - im)).exp() * (n.phi0 - 1.0);
            prop_assert!((a - 1.0).norm() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn no_zeros_in_closed_upper_half_plane(re in -20.0f64..20.0, im in 0.0f64..10.0) {
            let p = box21();
            let a = a_value(&p, c(re, im)).unwrap();
            prop_assert!(a.norm() > 0.0);
            if im == 0.0 { prop_assert!(a.norm() >= 1.0 - 1e-12); }
        }
    }
}
