//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::Deserialize;
use zs_resonance::{make_box, make_multibox, make_sampled, Potential};

pub const ENV_OUTPUT_DIR: &str = "ZS_OUTPUT_DIR";
pub const ENV_THREADS: &str = "ZS_THREADS";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub resonances: ResonancesConfig,
    #[serde(default)]
    pub scattering: ScatteringConfig,
    #[serde(default)]
    pub determinant: DeterminantConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Directory of the config file, used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Box,
    Multibox,
    Sampled,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(rename = "type")]
    pub kind: PotentialKind,
    pub gamma: Option<f64>,
    pub value: Option<[f64; 2]>,
    pub pieces: Option<Vec<PieceConfig>>,
    pub samples_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub length: f64,
    pub value: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_output_dir() }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Depth {
    Fixed(f64),
    Named(DepthKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthKeyword {
    Auto,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonancesConfig {
    #[serde(default = "default_re_max")]
    pub re_max: f64,
    #[serde(default = "default_depth")]
    pub depth: Depth,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Radii for `counting.csv`; defaults to ten steps up to `re_max`.
    #[serde(default)]
    pub counting_radii: Option<Vec<f64>>,
    /// Real grid size for the forbidden-domain constants.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl Default for ResonancesConfig {
    fn default() -> Self {
        Self {
            re_max: default_re_max(),
            depth: default_depth(),
            tol: default_tol(),
            counting_radii: None,
            grid_points: default_grid_points(),
        }
    }
}

fn default_re_max() -> f64 {
    40.0
}
fn default_depth() -> Depth {
    Depth::Named(DepthKeyword::Auto)
}
fn default_tol() -> f64 {
    1e-10
}
fn default_grid_points() -> usize {
    801
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            lambda_min: default_lambda_min(),
            lambda_max: default_lambda_max(),
            n_points: default_n_points(),
        }
    }
}

fn default_lambda_min() -> f64 {
    -20.0
}
fn default_lambda_max() -> f64 {
    20.0
}
fn default_n_points() -> usize {
    401
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterminantConfig {
    #[serde(default)]
    pub lambdas: Vec<[f64; 2]>,
    #[serde(rename = "N", default = "default_terms")]
    pub terms: usize,
    #[serde(rename = "M", default = "default_nodes")]
    pub nodes: usize,
}

impl Default for DeterminantConfig {
    fn default() -> Self {
        Self {
            lambdas: Vec::new(),
            terms: default_terms(),
            nodes: default_nodes(),
        }
    }
}

fn default_terms() -> usize {
    zs_resonance::determinant::DEFAULT_TERMS
}
fn default_nodes() -> usize {
    zs_resonance::determinant::DEFAULT_NODES
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub identities: Vec<String>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub search_radius: Option<f64>,
    pub action_window: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        positive("resonances.re_max", self.resonances.re_max)?;
        positive("resonances.tol", self.resonances.tol)?;
        if let Depth::Fixed(d) = self.resonances.depth {
            positive("resonances.depth", d)?;
        }
        if let Some(radii) = &self.resonances.counting_radii {
            for &r in radii {
                positive("resonances.counting_radii", r)?;
            }
        }
        if self.resonances.grid_points < 2 {
            bail!("key `resonances.grid_points` must be at least 2");
        }
        let s = &self.scattering;
        if !(s.lambda_min.is_finite() && s.lambda_max.is_finite() && s.lambda_min < s.lambda_max) {
            bail!("keys `scattering.lambda_min`/`scattering.lambda_max` must be finite with lambda_min < lambda_max");
        }
        if s.n_points < 2 {
            bail!("key `scattering.n_points` must be at least 2");
        }
        if self.determinant.terms == 0 {
            bail!("key `determinant.N` must be positive");
        }
        if self.determinant.nodes < 16 {
            bail!("key `determinant.M` must be at least 16");
        }
        for (k, l) in self.determinant.lambdas.iter().enumerate() {
            if !(l[0].is_finite() && l[1].is_finite()) {
                bail!("key `determinant.lambdas[{k}]` is not finite");
            }
        }
        if let Some(r) = self.verify.search_radius {
            positive("verify.search_radius", r)?;
        }
        if let Some(w) = self.verify.action_window {
            positive("verify.action_window", w)?;
        }
        if self.threads == Some(0) {
            bail!("key `threads` must be positive");
        }
        Ok(())
    }

    /// Applies `ZS_OUTPUT_DIR` and `ZS_THREADS`.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            self.output.dir = PathBuf::from(dir);
        }
        if let Ok(t) = std::env::var(ENV_THREADS) {
            let n: usize = t
                .parse()
                .map_err(|_| anyhow!("environment variable {ENV_THREADS}={t:?} is not a positive integer"))?;
            if n == 0 {
                bail!("environment variable {ENV_THREADS} must be positive");
            }
            self.threads = Some(n);
        }
        Ok(())
    }

    pub fn build_potential(&self) -> Result<Potential> {
        let pc = &self.potential;
        match pc.kind {
            PotentialKind::Box => {
                let gamma = pc.gamma.ok_or_else(|| anyhow!("key `potential.gamma` is required for a box"))?;
                positive("potential.gamma", gamma)?;
                let v = pc.value.ok_or_else(|| anyhow!("key `potential.value` is required for a box"))?;
                let c = complex("potential.value", v)?;
                if c == Complex64::new(0.0, 0.0) {
                    return Potential::zero(gamma).context("key `potential.gamma`");
                }
                make_box(c, gamma).context("key `potential`")
            }
            PotentialKind::Multibox => {
                let pieces = pc
                    .pieces
                    .as_ref()
                    .ok_or_else(|| anyhow!("key `potential.pieces` is required for a multibox"))?;
                let mut out = Vec::with_capacity(pieces.len());
                for (k, piece) in pieces.iter().enumerate() {
                    positive(&format!("potential.pieces[{k}].length"), piece.length)?;
                    out.push((piece.length, complex(&format!("potential.pieces[{k}].value"), piece.value)?));
                }
                make_multibox(&out).context("key `potential.pieces`")
            }
            PotentialKind::Sampled => {
                let file = pc
                    .samples_file
                    .as_ref()
                    .ok_or_else(|| anyhow!("key `potential.samples_file` is required for sampled data"))?;
                let path = if file.is_absolute() { file.clone() } else { self.base_dir.join(file) };
                let (xs, samples) = read_samples(&path)
                    .with_context(|| format!("key `potential.samples_file` ({})", path.display()))?;
                let gamma = match pc.gamma {
                    Some(g) => g,
                    None => *xs.last().unwrap(),
                };
                positive("potential.gamma", gamma)?;
                check_uniform(&xs, gamma)
                    .with_context(|| format!("key `potential.samples_file` ({})", path.display()))?;
                make_sampled(&samples, gamma).context("key `potential.samples_file`")
            }
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("key `{key}` must be a positive finite number, got {v}");
    }
    Ok(())
}

fn complex(key: &str, v: [f64; 2]) -> Result<Complex64> {
    if !(v[0].is_finite() && v[1].is_finite()) {
        bail!("key `{key}` must be a finite complex number [re, im]");
    }
    Ok(Complex64::new(v[0], v[1]))
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x: f64,
    re: f64,
    im: f64,
}

fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut xs = Vec::new();
    let mut qs = Vec::new();
    for (k, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let row = row.with_context(|| format!("row {}", k + 1))?;
        xs.push(row.x);
        qs.push(Complex64::new(row.re, row.im));
    }
    if xs.len() < 2 {
        bail!("need at least two samples, got {}", xs.len());
    }
    Ok((xs, qs))
}

fn check_uniform(xs: &[f64], gamma: f64) -> Result<()> {
    let m = (xs.len() - 1) as f64;
    let tol = 1e-9 * gamma.max(1.0);
    for (j, &x) in xs.iter().enumerate() {
        let expect = gamma * j as f64 / m;
        if (x - expect).abs() > tol {
            bail!("sample {j} at x={x} is off the uniform grid on [0, {gamma}] (expected {expect})");
        }
    }
    Ok(())
}
