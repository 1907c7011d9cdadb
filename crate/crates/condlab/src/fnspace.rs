//! Functions on (0,π) represented by truncated Fourier-sine series.
//!
//! The orthonormal basis is φ_n(x) = √(2/π)·sin(nx), n ≥ 1, so that for a
//! series f = Σ aₙφₙ the three norms used throughout the crate are
//! ‖f‖²_{L²} = Σ aₙ², ‖f‖²_{H¹₀} = Σ n²aₙ² and ‖f‖²_{H⁻¹} = Σ aₙ²/n².
//! All function arithmetic happens in coefficient space; physical-grid
//! evaluation exists only for I/O and quadrature.

use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Normalization constant √(2/π) of the sine basis.
pub const PHI_NORM: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Numerical working parameters shared by every module.
///
/// `working_bits` is the mantissa size of the configurable-precision real
/// type used on condensation-sensitive paths (53 = plain f64 everywhere;
/// quantities like sin(kπ/√ν) for Liouville-type ν need hundreds of bits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionContext {
    /// Mantissa bits of the configurable-precision real type (≥ 53).
    pub working_bits: u32,
    /// Quadrature panels per oscillation of the integrand (≥ 4).
    pub quad_panels_per_period: u32,
    /// Series cutoff N_max used when projecting functions.
    pub series_cutoff: usize,
    /// Absolute tolerance target for quadrature / truncation certificates.
    pub tail_tolerance: f64,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            working_bits: 53,
            quad_panels_per_period: 8,
            series_cutoff: 64,
            tail_tolerance: 1e-12,
        }
    }
}

impl PrecisionContext {
    /// Validate the invariants documented on the fields.
    pub fn validate(&self) -> Result<()> {
        if self.working_bits < 53 {
            return Err(Error::InvalidInput("working_bits must be >= 53".into()));
        }
        if self.quad_panels_per_period < 4 {
            return Err(Error::InvalidInput(
                "quad_panels_per_period must be >= 4".into(),
            ));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(Error::InvalidInput("tail_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Which inner-product space a norm or pairing is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Plain L²(0,π): weight 1.
    L2,
    /// H¹₀(0,π): weight n².
    H10,
    /// H⁻¹(0,π): weight 1/n².
    Hm1,
}

impl Space {
    #[inline]
    fn weight(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Space::L2 => 1.0,
            Space::H10 => nf * nf,
            Space::Hm1 => 1.0 / (nf * nf),
        }
    }
}

/// A scalar function on (0,π) stored as sine coefficients a₁..a_N.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SineSeries {
    coeffs: Vec<f64>,
}

impl SineSeries {
    /// Build from coefficients (a₁, a₂, …). Rejects non-finite entries.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "sine coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    /// The zero series with cutoff `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![0.0; n],
        }
    }

    /// The basis function φ_n, stored with cutoff `cutoff` (≥ n).
    pub fn basis(n: usize, cutoff: usize) -> Self {
        let mut coeffs = vec![0.0; cutoff.max(n)];
        coeffs[n - 1] = 1.0;
        Self { coeffs }
    }

    /// Coefficient aₙ (1-based mode index); 0 beyond the cutoff.
    #[inline]
    pub fn coeff(&self, n: usize) -> f64 {
        if n >= 1 && n <= self.coeffs.len() {
            self.coeffs[n - 1]
        } else {
            0.0
        }
    }

    /// Coefficient slice (a₁..a_N).
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of stored modes N.
    pub fn cutoff(&self) -> usize {
        self.coeffs.len()
    }

    /// Point evaluation Σ aₙ√(2/π) sin(nx).
    pub fn eval(&self, x: f64) -> f64 {
        // Evaluate with a sin/cos recurrence to avoid N libm calls.
        let (s1, c1) = x.sin_cos();
        let mut s_prev = 0.0; // sin(0·x)
        let mut s_cur = s1; // sin(1·x)
        let mut acc = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if i > 0 {
                let s_next = 2.0 * c1 * s_cur - s_prev;
                s_prev = s_cur;
                s_cur = s_next;
            }
            acc += a * s_cur;
        }
        PHI_NORM * acc
    }

    /// Derivative at the left endpoint, Σ aₙ·n·√(2/π).
    ///
    /// Converges to the true boundary derivative only when the coefficients
    /// decay fast enough; callers that need certified observation values use
    /// closed-form metadata instead.
    pub fn deriv_at_zero(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| a * (i + 1) as f64)
            .sum::<f64>()
            * PHI_NORM
    }

    /// Norm in the requested space.
    pub fn norm(&self, space: Space) -> f64 {
        self.norm_sq(space).sqrt()
    }

    /// Squared norm in the requested space.
    pub fn norm_sq(&self, space: Space) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| space.weight(i + 1) * a * a)
            .sum()
    }

    /// Weighted inner product; the shorter series is zero-padded.
    pub fn inner(&self, other: &Self, space: Space) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .enumerate()
            .map(|(i, (&a, &b))| space.weight(i + 1) * a * b)
            .sum()
    }

    /// Linear combination self + c·other (result cutoff = max of the two).
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (i, slot) in coeffs.iter_mut().enumerate() {
            let m = i + 1;
            *slot = self.coeff(m) + c * other.coeff(m);
        }
        Self { coeffs }
    }

    /// Scale every coefficient by `c`.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Overwrite the coefficient of φ_n (1-based), growing if needed.
    pub fn set_coeff(&mut self, n: usize, v: f64) {
        if n > self.coeffs.len() {
            self.coeffs.resize(n, 0.0);
        }
        self.coeffs[n - 1] = v;
    }

    /// Pad or truncate to exactly `n` modes.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n, 0.0);
        Self { coeffs }
    }
}

/// An ℝ²-valued function (y₁,y₂) or (θ₁,θ₂); both components share a cutoff.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorField2 {
    /// First component (the uncontrolled equation's state).
    pub first: SineSeries,
    /// Second component (the boundary-controlled equation's state).
    pub second: SineSeries,
}

impl VectorField2 {
    /// Pair two components, padding to a common cutoff.
    pub fn new(first: SineSeries, second: SineSeries) -> Self {
        let n = first.cutoff().max(second.cutoff());
        Self {
            first: first.resized(n),
            second: second.resized(n),
        }
    }

    /// Zero field with cutoff `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            first: SineSeries::zeros(n),
            second: SineSeries::zeros(n),
        }
    }

    /// Common cutoff of the two components.
    pub fn cutoff(&self) -> usize {
        self.first.cutoff()
    }

    /// Squared norm = sum of the component squared norms.
    pub fn norm_sq(&self, space: Space) -> f64 {
        self.first.norm_sq(space) + self.second.norm_sq(space)
    }

    /// Norm in the requested space.
    pub fn norm(&self, space: Space) -> f64 {
        self.norm_sq(space).sqrt()
    }

    /// Component-wise inner product.
    pub fn inner(&self, other: &Self, space: Space) -> f64 {
        self.first.inner(&other.first, space) + self.second.inner(&other.second, space)
    }

    /// self + c·other.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            first: self.first.axpy(c, &other.first),
            second: self.second.axpy(c, &other.second),
        }
    }

    /// Scale both components.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            first: self.first.scale(c),
            second: self.second.scale(c),
        }
    }

    /// The duality pairing ⟨self, other⟩_{H⁻¹,H¹₀} = Σ aₙbₙ over both
    /// components (the extension of the L² pairing).
    pub fn pair(&self, other: &Self) -> f64 {
        self.inner(other, Space::L2)
    }
}

/// A finite sine–cosine polynomial
/// q(x) = c₀ + Σₘ sₘ·sin(mx) + Σₘ cₘ·cos(mx)
/// (plain sin/cos, not the normalized basis).
///
/// This closed-form descriptor enables exact coupling integrals; sampled
/// coupling functions fall back to quadrature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    /// Constant term c₀.
    pub constant: f64,
    /// sin coefficients: `sin_coeffs[m-1]` multiplies sin(mx).
    pub sin_coeffs: Vec<f64>,
    /// cos coefficients: `cos_coeffs[m-1]` multiplies cos(mx).
    pub cos_coeffs: Vec<f64>,
}

impl TrigPoly {
    /// The constant function q ≡ c.
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Default::default()
        }
    }

    /// q(x) = sin(m·x).
    pub fn sin(m: usize) -> Self {
        let mut sin_coeffs = vec![0.0; m];
        sin_coeffs[m - 1] = 1.0;
        Self {
            constant: 0.0,
            sin_coeffs,
            cos_coeffs: vec![],
        }
    }

    /// q(x) = cos(m·x).
    pub fn cos(m: usize) -> Self {
        let mut cos_coeffs = vec![0.0; m];
        cos_coeffs[m - 1] = 1.0;
        Self {
            constant: 0.0,
            sin_coeffs: vec![],
            cos_coeffs,
        }
    }

    /// Point evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for (i, &s) in self.sin_coeffs.iter().enumerate() {
            v += s * ((i + 1) as f64 * x).sin();
        }
        for (i, &c) in self.cos_coeffs.iter().enumerate() {
            v += c * ((i + 1) as f64 * x).cos();
        }
        v
    }

    /// An upper bound for ‖q‖_∞ (triangle inequality).
    pub fn sup_bound(&self) -> f64 {
        self.constant.abs()
            + self.sin_coeffs.iter().map(|c| c.abs()).sum::<f64>()
            + self.cos_coeffs.iter().map(|c| c.abs()).sum::<f64>()
    }
}

/// A function given by samples on a uniform grid over [0,π].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    /// Build from a uniform grid; the endpoints must be 0 and π.
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::InvalidInput(
                "sampled function needs >= 2 matching grid points".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
        let eps = 1e-9;
        if xs[0].abs() > eps || (xs[xs.len() - 1] - PI).abs() > eps {
            return Err(Error::InvalidInput(
                "sample grid must span [0, pi] exactly".into(),
            ));
        }
        Ok(Self { xs, values })
    }

    /// Sample a closure on `n` uniform points over [0,π].
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs: Vec<f64> = (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, values)
    }

    /// Linear interpolation (constant extrapolation outside the grid).
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0];
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        let h = self.xs[1] - self.xs[0];
        let i = ((x - self.xs[0]) / h).floor() as usize;
        let i = i.min(n - 2);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Grid access.
    pub fn grid(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.values)
    }
}

/// Result of a quadrature with its a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    /// The computed integral value.
    pub value: f64,
    /// Richardson-style error estimate |I(2m panels) − I(m panels)|.
    pub err_estimate: f64,
    /// False when the panel cap was reached before meeting the tolerance
    /// (the accuracy warning is never silent).
    pub converged: bool,
}

const GL_ORDER: usize = 12;

fn gauss_legendre_rule() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on Legendre P_n with the Chebyshev-based initial
        // guess; nodes on [-1,1].
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Evaluate P_n and P_n' by the three-term recurrence.
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            // Recompute derivative at the converged node for the weight.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Composite Gauss–Legendre integration of `f` over [a,b] with `panels`
/// equal panels.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre_rule();
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let left = a + h * p as f64;
        let mid = left + 0.5 * h;
        let half = 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            panel += w * f(mid + half * x);
        }
        acc += panel * half;
    }
    acc
}

/// Integrate `f` over (0,π) where `f` contains an oscillatory factor of
/// angular frequency `omega` (sin/cos(ω·x + φ)); the panel count scales with
/// ω and is refined until the Richardson estimate meets
/// `ctx.tail_tolerance` or the refinement cap is hit.
pub fn quad_oscillatory(
    f: &dyn Fn(f64) -> f64,
    omega: f64,
    ctx: &PrecisionContext,
) -> Result<QuadResult> {
    if !omega.is_finite() {
        return Err(Error::InvalidInput("oscillation frequency not finite".into()));
    }
    // Number of oscillation periods over (0,π) is |ω|/2.
    let periods = (omega.abs() / 2.0).ceil().max(1.0);
    let mut panels = (periods as usize)
        .saturating_mul(ctx.quad_panels_per_period as usize)
        .max(4);
    let mut value = integrate(f, 0.0, PI, panels);
    let mut err = f64::INFINITY;
    const MAX_REFINES: usize = 8;
    for _ in 0..MAX_REFINES {
        panels *= 2;
        let refined = integrate(f, 0.0, PI, panels);
        err = (refined - value).abs();
        value = refined;
        if err <= ctx.tail_tolerance {
            return Ok(QuadResult {
                value,
                err_estimate: err,
                converged: true,
            });
        }
    }
    Ok(QuadResult {
        value,
        err_estimate: err,
        converged: false,
    })
}

/// Project a closure onto the first `n_modes` sine modes:
/// returns {⟨f,φ_n⟩}_{n≤N}.
pub fn project(
    f: &dyn Fn(f64) -> f64,
    n_modes: usize,
    ctx: &PrecisionContext,
) -> Result<SineSeries> {
    let mut coeffs = Vec::with_capacity(n_modes);
    for n in 1..=n_modes {
        let nf = n as f64;
        let g = |x: f64| f(x) * PHI_NORM * (nf * x).sin();
        let q = quad_oscillatory(&g, nf, ctx)?;
        coeffs.push(q.value);
    }
    SineSeries::new(coeffs)
}

/// Project a sampled function (linear interpolation between samples).
///
/// Integrates segment by segment so quadrature panels never straddle a
/// kink of the interpolant; each segment is linear × sin and a single
/// Gauss–Legendre panel resolves it to machine accuracy.
pub fn project_samples(
    f: &SampledFunction,
    n_modes: usize,
    _ctx: &PrecisionContext,
) -> Result<SineSeries> {
    let (xs, _) = f.grid();
    let mut coeffs = vec![0.0; n_modes];
    for (n, c) in coeffs.iter_mut().enumerate() {
        let nf = (n + 1) as f64;
        let g = |x: f64| f.eval(x) * PHI_NORM * (nf * x).sin();
        // Keep each panel under a fraction of the oscillation period.
        let max_h = PI / (4.0 * nf);
        let mut acc = 0.0;
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let sub = ((b - a) / max_h).ceil().max(1.0) as usize;
            acc += integrate(&g, a, b, sub);
        }
        *c = acc;
    }
    SineSeries::new(coeffs)
}
