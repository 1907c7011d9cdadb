//! Experiment configuration: a single JSON document describing the problem
//! (ν, q, truncation, horizon, precision) shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use condlab::condensation::{liouville_nu, LiouvilleSpec, ParityTrack};
use condlab::fnspace::{PrecisionContext, SampledFunction, TrigPoly, VectorField2};
use condlab::spectral::{Coupling, NuValue, ProblemData};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NuSpec {
    /// √ν = i₀/j₀.
    Rational([u64; 2]),
    /// ν as a decimal string.
    Real(String),
    /// Liouville-type √ν built from `p` convergents on one parity track.
    Liouville { sigma: f64, p: usize, parity: String },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpec {
    /// q(x) = Σ cₘ sin(m·x).
    SineSeries(Vec<f64>),
    /// Two-column file `x value` on [0, π], whitespace- or comma-separated.
    File(PathBuf),
    /// Prescribed coupling integrals |I(k²)| = e^{−τk²} (no pointwise q).
    Synthetic { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gram,
    Blaschke,
    Hum,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct InitialData {
    #[serde(default)]
    pub first: Vec<f64>,
    #[serde(default)]
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nu: NuSpec,
    pub q: QSpec,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_sim", default)]
    pub n_sim: Option<usize>,
    #[serde(rename = "T", default = "default_horizon")]
    pub t: f64,
    #[serde(default)]
    pub precision_bits: Option<u32>,
    #[serde(default)]
    pub quad_panels: Option<u32>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Initial datum (sine coefficients per component); required by the
    /// control/simulate commands and by observability for generic data.
    #[serde(default)]
    pub y0: Option<InitialData>,
    /// Time steps for simulation / sample counts for synthesis grids.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Control samples CSV consumed by `simulate` (defaults to the
    /// `control.csv` previously written into the output directory).
    #[serde(default)]
    pub control_file: Option<PathBuf>,
}

fn default_horizon() -> f64 {
    1.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)
            .with_context(|| format!("config file {} is not a valid RunConfig", path.display()))?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            bail!("K must be positive");
        }
        if !(self.t > 0.0) {
            bail!("T must be positive");
        }
        if let Some(b) = self.precision_bits {
            if b < 53 {
                bail!("precision_bits must be at least 53");
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                bail!("epsilon must be positive");
            }
        }
        Ok(())
    }

    pub fn context(&self) -> PrecisionContext {
        let mut ctx = PrecisionContext::default();
        if let Some(b) = self.precision_bits {
            ctx.working_bits = b;
        }
        if let Some(p) = self.quad_panels {
            ctx.quad_panels_per_period = p;
        }
        ctx
    }

    pub fn nu(&self) -> Result<(NuValue, Option<LiouvilleSpec>)> {
        let ctx = self.context();
        let bits = ctx.working_bits.max(64);
        match &self.nu {
            NuSpec::Rational([i0, j0]) => Ok((NuValue::rational(*i0, *j0, bits)?, None)),
            NuSpec::Real(s) => {
                let nu: f64 = s
                    .trim()
                    .parse()
                    .with_context(|| format!("nu.real {s:?} is not a decimal number"))?;
                if !(nu > 0.0) {
                    bail!("nu must be positive");
                }
                Ok((NuValue::real(nu.sqrt(), bits)?, None))
            }
            NuSpec::Liouville { sigma, p, parity } => {
                let track = match parity.as_str() {
                    "even" => ParityTrack::Even,
                    "odd" => ParityTrack::Odd,
                    other => bail!("nu.liouville.parity must be \"even\" or \"odd\", got {other:?}"),
                };
                let (spec, nu) = liouville_nu(*sigma, *p, track, &ctx)?;
                Ok((nu, Some(spec)))
            }
        }
    }

    pub fn coupling(&self) -> Result<Coupling> {
        match &self.q {
            QSpec::SineSeries(coeffs) => {
                if coeffs.is_empty() {
                    bail!("q.sine_series needs at least one coefficient");
                }
                Ok(Coupling::Trig(TrigPoly {
                    constant: 0.0,
                    sin_coeffs: coeffs.clone(),
                    cos_coeffs: vec![],
                }))
            }
            QSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read q samples from {}", path.display()))?;
                let mut xs = Vec::new();
                let mut vals = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut cols = line
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty());
                    let parse = |tok: Option<&str>| -> Result<f64> {
                        tok.context("missing column")?.parse::<f64>().context("not a number")
                    };
                    let x = parse(cols.next())
                        .with_context(|| format!("{}:{}: bad x column", path.display(), i + 1))?;
                    let v = parse(cols.next())
                        .with_context(|| format!("{}:{}: bad value column", path.display(), i + 1))?;
                    xs.push(x);
                    vals.push(v);
                }
                Ok(Coupling::Samples(SampledFunction::new(xs, vals)?))
            }
            QSpec::Synthetic { tau } => Ok(Coupling::Synthetic { tau: *tau }),
        }
    }

    pub fn problem(&self) -> Result<ProblemData> {
        let (nu, _) = self.nu()?;
        Ok(ProblemData::new(nu, self.coupling()?, self.k, self.context())?)
    }

    pub fn n_sim(&self) -> usize {
        self.n_sim.unwrap_or(2 * self.k)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(8192)
    }

    pub fn method(&self) -> Method {
        self.method.unwrap_or(Method::Gram)
    }

    pub fn initial_data(&self) -> Result<VectorField2> {
        let spec = self
            .y0
            .as_ref()
            .context("this command needs the y0 field (initial datum) in the config")?;
        if spec.first.is_empty() && spec.second.is_empty() {
            bail!("y0 must have at least one nonzero component");
        }
        let n = spec.first.len().max(spec.second.len()).max(1);
        let mut y0 = VectorField2::zeros(n);
        for (i, v) in spec.first.iter().enumerate() {
            y0.first.set_coeff(i + 1, *v);
        }
        for (i, v) in spec.second.iter().enumerate() {
            y0.second.set_coeff(i + 1, *v);
        }
        Ok(y0)
    }
}
