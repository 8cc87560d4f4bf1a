//! Compactly supported complex potentials on `[0, γ]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A constant piece `q(x) = value` for `x ∈ [start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub value: Complex64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    /// Breakpoints `0 = x₀ < … < x_m = γ` and one value per interval.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Complex64>,
    },
    /// `M + 1` samples on a uniform grid over `[0, γ]`. Each grid cell carries
    /// the mean of its two end samples.
    Sampled { samples: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    support_end: f64,
    representation: Representation,
    pub label: String,
    pieces: Vec<Piece>,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialNorms {
    pub l1: f64,
    pub l2: f64,
    /// `cosh ‖q‖₁`
    pub phi0: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "support length must be positive and finite, got {gamma}"
        )));
    }
    Ok(())
}

fn check_finite(v: Complex64, what: &str) -> Result<()> {
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} is not finite: {v}")));
    }
    Ok(())
}

impl Potential {
    fn from_parts(support_end: f64, representation: Representation, label: String) -> Self {
        let pieces = match &representation {
            Representation::PiecewiseConstant { breakpoints, values } => breakpoints
                .windows(2)
                .zip(values)
                .map(|(w, &value)| Piece {
                    start: w[0],
                    end: w[1],
                    value,
                })
                .collect(),
            Representation::Sampled { samples } => {
                let m = samples.len() - 1;
                let h = support_end / m as f64;
                (0..m)
                    .map(|j| Piece {
                        start: j as f64 * h,
                        end: if j + 1 == m { support_end } else { (j + 1) as f64 * h },
                        value: (samples[j] + samples[j + 1]) * 0.5,
                    })
                    .collect()
            }
        };
        let mut p = Self {
            support_end,
            representation,
            label,
            pieces,
            warnings: Vec::new(),
        };
        p.check_hull();
        p
    }

    fn check_hull(&mut self) {
        let first = self.pieces.first().map(|p| p.value);
        let last = self.pieces.last().map(|p| p.value);
        if self.pieces.iter().all(|p| p.value == Complex64::new(0.0, 0.0)) {
            self.warnings
                .push("potential vanishes identically; [0, gamma] is not the support hull".into());
            return;
        }
        if first == Some(Complex64::new(0.0, 0.0)) || last == Some(Complex64::new(0.0, 0.0)) {
            let lo = self
                .pieces
                .iter()
                .find(|p| p.value != Complex64::new(0.0, 0.0))
                .map_or(0.0, |p| p.start);
            let hi = self
                .pieces
                .iter()
                .rev()
                .find(|p| p.value != Complex64::new(0.0, 0.0))
                .map_or(self.support_end, |p| p.end);
            self.warnings.push(format!(
                "support hull is [{lo}, {hi}], not [0, {}]",
                self.support_end
            ));
        }
        for w in &self.warnings {
            log::warn!("{}: {w}", self.label);
        }
    }

    /// The zero potential on `[0, γ]`. Carries a hull warning.
    pub fn zero(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self::from_parts(
            gamma,
            Representation::PiecewiseConstant {
                breakpoints: vec![0.0, gamma],
                values: vec![Complex64::new(0.0, 0.0)],
            },
            format!("zero({gamma})"),
        ))
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    /// Piecewise-constant pieces used for propagation, ordered left to right.
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.value == Complex64::new(0.0, 0.0))
    }

    /// `q(x)`, zero outside `[0, γ)`.
    pub fn value_at(&self, x: f64) -> Complex64 {
        if x < 0.0 || x >= self.support_end {
            return Complex64::new(0.0, 0.0);
        }
        let k = self.pieces.partition_point(|p| p.end <= x);
        self.pieces
            .get(k)
            .map_or(Complex64::new(0.0, 0.0), |p| p.value)
    }

    /// Interior breakpoints of the propagation pieces.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// Jumps of `q` at every breakpoint including both ends of the support.
    pub fn jumps(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut prev = Complex64::new(0.0, 0.0);
        for p in &self.pieces {
            out.push(p.value - prev);
            prev = p.value;
        }
        out.push(-prev);
        out
    }

    /// `∫ₓ^γ |q|`.
    pub fn l1_from(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.value.norm() * (p.end - p.start.max(x)).max(0.0))
            .sum()
    }

    pub fn norms(&self) -> PotentialNorms {
        let l1 = self.l1_from(0.0);
        let l2 = self
            .pieces
            .iter()
            .map(|p| p.value.norm_sqr() * p.len())
            .sum::<f64>()
            .sqrt();
        PotentialNorms {
            l1,
            l2,
            phi0: l1.cosh(),
        }
    }

    /// The potential `-q̄`.
    pub fn conjugate_negate(&self) -> Self {
        let representation = match &self.representation {
            Representation::PiecewiseConstant { breakpoints, values } => {
                Representation::PiecewiseConstant {
                    breakpoints: breakpoints.clone(),
                    values: values.iter().map(|v| -v.conj()).collect(),
                }
            }
            Representation::Sampled { samples } => Representation::Sampled {
                samples: samples.iter().map(|v| -v.conj()).collect(),
            },
        };
        Self::from_parts(
            self.support_end,
            representation,
            format!("conjugate_negate({})", self.label),
        )
    }

    /// Hex SHA-256 of the support length and representation.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.support_end.to_le_bytes());
        match &self.representation {
            Representation::PiecewiseConstant { breakpoints, values } => {
                hasher.update(b"pwc");
                for x in breakpoints {
                    hasher.update(x.to_le_bytes());
                }
                for v in values {
                    hasher.update(v.re.to_le_bytes());
                    hasher.update(v.im.to_le_bytes());
                }
            }
            Representation::Sampled { samples } => {
                hasher.update(b"sampled");
                for v in samples {
                    hasher.update(v.re.to_le_bytes());
                    hasher.update(v.im.to_le_bytes());
                }
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// A single constant piece of value `c` on `[0, γ]`.
pub fn make_box(c: Complex64, gamma: f64) -> Result<Potential> {
    check_gamma(gamma)?;
    check_finite(c, "box value")?;
    if c == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidInput(
            "box value must be nonzero so that [0, gamma] is the support hull".into(),
        ));
    }
    Ok(Potential::from_parts(
        gamma,
        Representation::PiecewiseConstant {
            breakpoints: vec![0.0, gamma],
            values: vec![c],
        },
        format!("box({c}, {gamma})"),
    ))
}

/// Consecutive constant pieces given as `(length, value)`.
pub fn make_multibox(pieces: &[(f64, Complex64)]) -> Result<Potential> {
    if pieces.is_empty() {
        return Err(Error::InvalidInput("multibox needs at least one piece".into()));
    }
    let mut breakpoints = vec![0.0];
    let mut values = Vec::with_capacity(pieces.len());
    for (k, &(len, v)) in pieces.iter().enumerate() {
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::InvalidInput(format!(
                "piece {k} has non-positive length {len}"
            )));
        }
        check_finite(v, "piece value")?;
        breakpoints.push(breakpoints[k] + len);
        values.push(v);
    }
    let gamma = *breakpoints.last().unwrap();
    Ok(Potential::from_parts(
        gamma,
        Representation::PiecewiseConstant {
            breakpoints,
            values,
        },
        format!("multibox({} pieces, gamma={gamma})", pieces.len()),
    ))
}

/// Uniform samples `q(jγ/M)`, `j = 0..=M`.
pub fn make_sampled(samples: &[Complex64], gamma: f64) -> Result<Potential> {
    check_gamma(gamma)?;
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "sampled potential needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    for v in samples {
        check_finite(*v, "sample")?;
    }
    Ok(Potential::from_parts(
        gamma,
        Representation::Sampled {
            samples: samples.to_vec(),
        },
        format!("sampled({} samples, gamma={gamma})", samples.len()),
    ))
}

/// Samples a function on the uniform grid with `cells` cells.
pub fn sample_fn<F>(f: F, gamma: f64, cells: usize) -> Result<Potential>
where
    F: Fn(f64) -> Complex64,
{
    let samples: Vec<Complex64> = (0..=cells)
        .map(|j| f(gamma * j as f64 / cells as f64))
        .collect();
    make_sampled(&samples, gamma)
}
