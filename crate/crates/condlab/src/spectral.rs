//! Spectrum and (generalized) eigenfunctions of the adjoint operator
//! L* = −D∂ₓₓ + qA₀* on (0,π)² with Dirichlet conditions, where
//! D = diag(1, ν) and A₀ is the 2×2 Jordan block. Componentwise,
//!
//!   (L*θ)₁ = −θ₁″,    (L*θ)₂ = −νθ₂″ + qθ₁.
//!
//! The spectrum is {k²} ∪ {νk²}. The "fast" eigenfunctions are
//! Φ*₁,ₖ = (φ_k, ψ_k) where ψ_k solves the two-point problem
//! νψ″ + k²ψ = qφ_k with ψ(0) = ψ(π) = 0, solvable whenever
//! sin(kπ/√ν) ≠ 0; the "slow" ones are Φ*₂,ₖ = (0, φ_k). For rational
//! √ν = i₀/j₀ the two branches collide on {i₀²l²} and the colliding
//! points carry either a Jordan chain or a genuinely double eigenvalue,
//! decided by the coupling integral I(ζ).
//!
//! This module builds the classified spectrum table, the explicit ψ
//! solutions by three independent routes (Duhamel closed form, series
//! expansion, RK4 shooting), the boundary-observation values
//! B*D∂ₓΦ(0) = ν·∂ₓΦ₂(0), and the nearest-integer index maps.

use crate::fnspace::{
    quad_oscillatory, PrecisionContext, SampledFunction, SineSeries, TrigPoly, VectorField2,
    PHI_NORM,
};
use std::f64::consts::PI;
use crate::{Error, Result};
use rug::Float;

/// Number of uniform panels for grid-based constructions (cumulative
/// Simpson of Duhamel kernels, RK4 shooting). Composite-Simpson error
/// scales like h⁴ ≈ 2·10⁻¹⁵ per unit derivative at this resolution.
const GRID_PANELS: usize = 8192;

// ---------------------------------------------------------------------------
// Diffusion coefficient ν
// ---------------------------------------------------------------------------

/// How the diffusion ratio ν was constructed.
#[derive(Debug, Clone, PartialEq)]
pub enum NuKind {
    /// √ν = i₀/j₀ with i₀, j₀ coprime positive integers.
    Rational { i0: u64, j0: u64 },
    /// Generic irrational √ν stored at high precision.
    Real,
    /// √ν produced by the Liouville-type construction with exponent σ
    /// (|j√ν − k| ≤ C·k·e^{−k^{2+σ}} along a sequence of convergents).
    Liouville { sigma: f64 },
}

/// The diffusion ratio ν of the second equation, carried at working
/// precision together with a certified error bound on √ν.
#[derive(Debug, Clone)]
pub struct NuValue {
    kind: NuKind,
    sqrt_nu: Float,
    err_bound: f64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl NuValue {
    /// √ν = i₀/j₀ in lowest terms.
    pub fn rational(i0: u64, j0: u64, bits: u32) -> Result<Self> {
        if i0 == 0 || j0 == 0 {
            return Err(Error::InvalidInput("i0, j0 must be positive".into()));
        }
        if gcd(i0, j0) != 1 {
            return Err(Error::InvalidInput(format!(
                "i0 = {i0} and j0 = {j0} are not coprime"
            )));
        }
        let sqrt_nu = Float::with_val(bits, i0) / Float::with_val(bits, j0);
        Ok(Self {
            kind: NuKind::Rational { i0, j0 },
            sqrt_nu,
            err_bound: 0.0,
        })
    }

    /// Generic positive √ν from an f64 (treated as exact binary value).
    pub fn real(sqrt_nu: f64, bits: u32) -> Result<Self> {
        if !(sqrt_nu > 0.0) || !sqrt_nu.is_finite() {
            return Err(Error::InvalidInput("sqrt_nu must be positive".into()));
        }
        Ok(Self {
            kind: NuKind::Real,
            sqrt_nu: Float::with_val(bits, sqrt_nu),
            err_bound: 0.0,
        })
    }

    /// √ν from a high-precision value with a certified error bound
    /// (used by the Liouville construction).
    pub fn liouville(sigma: f64, sqrt_nu: Float, err_bound: f64) -> Result<Self> {
        if !sqrt_nu.is_sign_positive() || sqrt_nu.is_zero() {
            return Err(Error::InvalidInput("sqrt_nu must be positive".into()));
        }
        let bits = sqrt_nu.prec();
        // Cap the exponent so the threshold stays representable in f64;
        // err_bound = 0 means the stored float is the value by definition.
        if err_bound >= 2f64.powi(-(((bits / 2).min(960)) as i32)) && err_bound != 0.0 {
            return Err(Error::PrecisionEscalation {
                reason: format!("error bound {err_bound:e} too large for {bits} stored bits"),
                required_bits: bits * 2,
            });
        }
        Ok(Self {
            kind: NuKind::Liouville { sigma },
            sqrt_nu,
            err_bound,
        })
    }

    pub fn kind(&self) -> &NuKind {
        &self.kind
    }

    pub fn sqrt_nu_hp(&self) -> &Float {
        &self.sqrt_nu
    }

    pub fn nu_hp(&self) -> Float {
        self.sqrt_nu.clone().square()
    }

    pub fn sqrt_nu_f64(&self) -> f64 {
        self.sqrt_nu.to_f64()
    }

    pub fn nu_f64(&self) -> f64 {
        self.nu_hp().to_f64()
    }

    pub fn err_bound(&self) -> f64 {
        self.err_bound
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.kind, NuKind::Rational { .. })
    }
}

// ---------------------------------------------------------------------------
// Coupling coefficient q
// ---------------------------------------------------------------------------

/// The scalar coupling coefficient q of the zero-order term.
#[derive(Debug, Clone)]
pub enum Coupling {
    /// Trigonometric polynomial (closed-form mode couplings available).
    Trig(TrigPoly),
    /// Grid samples with linear interpolation.
    Samples(SampledFunction),
    /// No explicit function; the coupling integrals are prescribed
    /// directly as |I(k²)| = e^{−τk²} (with positive sign). Used to
    /// exercise the minimal-time estimators and the blow-up witness in
    /// a regime where a concrete q would be impossible to resolve.
    Synthetic { tau: f64 },
}

impl Coupling {
    /// Pointwise evaluation; synthetic couplings have no pointwise form.
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            Coupling::Trig(p) => Ok(p.eval(x)),
            Coupling::Samples(s) => Ok(s.eval(x)),
            Coupling::Synthetic { .. } => Err(Error::InvalidInput(
                "synthetic coupling has no pointwise values".into(),
            )),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, Coupling::Synthetic { .. })
    }

    /// A uniform bound on |q| (used for series tail estimates).
    pub fn sup_bound(&self) -> f64 {
        match self {
            Coupling::Trig(p) => p.sup_bound(),
            Coupling::Samples(s) => {
                let (_, v) = s.grid();
                v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
            }
            Coupling::Synthetic { .. } => 0.0,
        }
    }

    /// ⟨qφ_k, φ_n⟩ for n = 1..=n_modes: closed form for trigonometric q,
    /// segment-exact quadrature for sampled q.
    pub fn mode_couplings(
        &self,
        k: usize,
        n_modes: usize,
        ctx: &PrecisionContext,
    ) -> Result<Vec<f64>> {
        match self {
            Coupling::Trig(p) => Ok((1..=n_modes)
                .map(|n| crate::hp::oracles::coupling_closed_form(p, k as i64, n as i64))
                .collect()),
            Coupling::Samples(_) => {
                let kf = k as f64;
                let g = |x: f64| self.eval(x).unwrap() * PHI_NORM * (kf * x).sin();
                let projected = crate::fnspace::project(&g, n_modes, ctx)?;
                Ok(projected.coeffs().to_vec())
            }
            Coupling::Synthetic { .. } => Err(Error::InvalidInput(
                "synthetic coupling has no mode couplings".into(),
            )),
        }
    }
}

/// Full problem description: diffusion, coupling, truncation, precision.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub nu: NuValue,
    pub q: Coupling,
    /// Both eigenvalue branches are truncated at index K.
    pub k_trunc: usize,
    pub ctx: PrecisionContext,
}

impl ProblemData {
    pub fn new(nu: NuValue, q: Coupling, k_trunc: usize, ctx: PrecisionContext) -> Result<Self> {
        if k_trunc == 0 {
            return Err(Error::InvalidInput("K must be at least 1".into()));
        }
        ctx.validate()?;
        Ok(Self { nu, q, k_trunc, ctx })
    }

    /// Sine-series cutoff used for all eigenfunction storage: large
    /// enough to carry every populated mode index.
    pub fn cutoff(&self) -> usize {
        let base = self.ctx.series_cutoff.max(2 * self.k_trunc);
        match self.nu.kind {
            NuKind::Rational { i0, j0 } => {
                let l_max = self.k_trunc / i0.min(j0) as usize;
                base.max((i0.max(j0) as usize) * l_max.max(1) + 4)
            }
            _ => base,
        }
    }
}

// ---------------------------------------------------------------------------
// Eigenpairs
// ---------------------------------------------------------------------------

/// Which branch of the spectrum an eigenvalue belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// λ = k² (first-component dominated).
    Fast { k: usize },
    /// λ = νk² (second-component dominated).
    Slow { k: usize },
}

/// Algebraic structure at this eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Simple,
    /// Two independent eigenfunctions at a collision point (I(ζ) = 0).
    Double,
    /// Jordan chain of length 2 at a collision point (I(ζ) ≠ 0).
    GeneralizedChain,
}

/// Λ-partition tag in the rational regime (Λ₁ slow-only, Λ₂ fast-only,
/// Λ₃ collision points); irrational eigenvalues carry their own tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaTag {
    Lambda1,
    Lambda2,
    Lambda3,
    Irrational,
}

impl LambdaTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaTag::Lambda1 => "Lambda1",
            LambdaTag::Lambda2 => "Lambda2",
            LambdaTag::Lambda3 => "Lambda3",
            LambdaTag::Irrational => "irrational",
        }
    }
}

/// One eigenvalue with its eigenfunction(s) and boundary metadata.
///
/// The boundary observation B*D∂ₓΦ(0) is stored from closed-form
/// metadata (ψ′(0) values from quadrature), never from differentiating
/// the truncated sine series.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub branch: Branch,
    pub class: Classification,
    pub tag: LambdaTag,
    pub eigfn: VectorField2,
    /// Jordan-chain vector Φ̂*₁,ₗ at a collision point (or the second
    /// eigenfunction when the point is genuinely double).
    pub generalized_partner: Option<VectorField2>,
    /// B*D∂ₓΦ(0) = ν·∂ₓΦ₂(0) of the eigenfunction.
    pub observation: f64,
    /// ln|observation| (finite even when the value underflows f64).
    pub log_abs_observation: f64,
    /// I(ζ) where defined (rational regime, ζ = k²).
    pub coupling_integral: Option<f64>,
    /// ln|I(ζ)| where defined (−∞ for exact zero).
    pub log_abs_coupling: Option<f64>,
    /// ∂ₓ(second component)(0) from closed-form metadata.
    pub psi_prime_zero: f64,
    /// ⟨ψ̂_l-complement⟩ coefficient α_l of the chain vector.
    pub alpha_l: Option<f64>,
}

impl EigenPair {
    pub fn fast_index(&self) -> Option<usize> {
        match self.branch {
            Branch::Fast { k } => Some(k),
            Branch::Slow { .. } => None,
        }
    }
}

/// Nearest-integer index maps between the two branches.
#[derive(Debug, Clone)]
pub struct IndexMaps {
    /// i_k = nearest integer to √ν·k, for k = 1..=range.
    pub i_k: Vec<u64>,
    /// j_k = nearest integer to k/√ν, for k = 1..=range.
    pub j_k: Vec<u64>,
    /// Î = positive integers ≤ max(i_k) not attained by i.
    pub i_hat: Vec<u64>,
    /// Ĵ = positive integers ≤ max(j_k) not attained by j.
    pub j_hat: Vec<u64>,
}

/// Spectrum regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    IrrationalGt1,
    IrrationalLt1,
    Rational,
}

/// The classified spectrum, sorted by eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    pub entries: Vec<EigenPair>,
    pub regime: Regime,
    /// σ(L*) is complete only below this value at truncation K.
    pub complete_below: f64,
}

// ---------------------------------------------------------------------------
// Grid helpers
// ---------------------------------------------------------------------------

fn uniform_grid(panels: usize) -> Vec<f64> {
    let h = PI / panels as f64;
    (0..=panels).map(|i| i as f64 * h).collect()
}

/// Cumulative integral on a uniform grid with Simpson pairs (even nodes)
/// and the 5-8-(−1) Newton–Cotes half rule (odd nodes); O(h⁴) accurate.
fn cumulative_simpson(vals: &[f64], h: f64) -> Vec<f64> {
    let n = vals.len() - 1;
    assert!(n % 2 == 0, "need an even number of panels");
    let mut acc = vec![0.0; vals.len()];
    for i in (0..n).step_by(2) {
        let (f0, f1, f2) = (vals[i], vals[i + 1], vals[i + 2]);
        acc[i + 1] = acc[i] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        acc[i + 2] = acc[i] + h / 3.0 * (f0 + 4.0 * f1 + f2);
    }
    acc
}

/// Composite-Simpson integral of samples on a uniform grid.
fn simpson(vals: &[f64], h: f64) -> f64 {
    let n = vals.len() - 1;
    assert!(n % 2 == 0);
    let mut s = vals[0] + vals[n];
    for (i, v) in vals.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Sine-coefficients of grid samples by composite Simpson (independent
/// of the linear-interpolant projection path in the function-space
/// layer; used where the O(h²) interpolation error would dominate).
fn project_grid(xs: &[f64], vals: &[f64], n_modes: usize) -> SineSeries {
    let h = xs[1] - xs[0];
    let coeffs = (1..=n_modes)
        .map(|n| {
            let nf = n as f64;
            let integrand: Vec<f64> = xs
                .iter()
                .zip(vals)
                .map(|(&x, &v)| v * PHI_NORM * (nf * x).sin())
                .collect();
            simpson(&integrand, h)
        })
        .collect();
    SineSeries::new(coeffs).expect("finite grid projection")
}

// ---------------------------------------------------------------------------
// ψ solvers
// ---------------------------------------------------------------------------

/// ψ_k together with its closed-form boundary derivative.
#[derive(Debug, Clone)]
pub struct PsiSolution {
    pub series: SineSeries,
    /// ψ′_k(0) from the quadrature formula, not from the series.
    pub psi_prime_zero: f64,
    /// Grid values (for boundary-behaviour diagnostics).
    pub grid: SampledFunction,
}

fn check_resonance(mu: f64, k: usize, ctx: &PrecisionContext) -> Result<f64> {
    let s = (mu * PI).sin();
    if s.abs() < 1e-12 {
        return Err(Error::PrecisionEscalation {
            reason: format!("sin(kπ/√ν) = {s:e} at k = {k} is below the f64 resolution floor"),
            required_bits: ctx.working_bits.max(53) * 2,
        });
    }
    Ok(s)
}

/// Solve νψ″ + k²ψ = qφ_k, ψ(0) = ψ(π) = 0 by the explicit Duhamel
/// formula: with μ = k/√ν,
///
///   ψ(x) = a·sin(μx) + (1/(νμ))·[sin(μx)·C(x) − cos(μx)·S(x)],
///   C(x) = ∫₀ˣ qφ_k·cos(μξ)dξ,  S(x) = ∫₀ˣ qφ_k·sin(μξ)dξ,
///   ψ′(0) = aμ = −∫₀^π qφ_k·sin(μ(π−s))ds / (ν·sin(μπ)).
///
/// Requires sin(kπ/√ν) ≠ 0 (automatic off the collision set).
pub fn psi_closed_form(p: &ProblemData, k: usize) -> Result<PsiSolution> {
    let nu = p.nu.nu_f64();
    let kf = k as f64;
    let mu = kf / p.nu.sqrt_nu_f64();
    let s_pi = check_resonance(mu, k, &p.ctx)?;

    // ψ′(0) from oscillatory quadrature of the source against the kernel.
    let g = |s: f64| p.q.eval(s).unwrap() * PHI_NORM * (kf * s).sin() * (mu * (PI - s)).sin();
    let quad = quad_oscillatory(&g, kf + mu, &p.ctx)?;
    let psi_prime_zero = -quad.value / (nu * s_pi);

    // Grid assembly via cumulative kernels.
    let xs = uniform_grid(GRID_PANELS);
    let h = xs[1] - xs[0];
    let f_cos: Vec<f64> = xs
        .iter()
        .map(|&x| p.q.eval(x).unwrap() * PHI_NORM * (kf * x).sin() * (mu * x).cos())
        .collect();
    let f_sin: Vec<f64> = xs
        .iter()
        .map(|&x| p.q.eval(x).unwrap() * PHI_NORM * (kf * x).sin() * (mu * x).sin())
        .collect();
    let c = cumulative_simpson(&f_cos, h);
    let s = cumulative_simpson(&f_sin, h);
    // Enforce ψ(π) = 0 with the grid's own boundary values so the grid
    // and its projection are internally consistent.
    let end = (mu * PI).sin() * c[GRID_PANELS] - (mu * PI).cos() * s[GRID_PANELS];
    let a = -end / (nu * mu * s_pi);
    let vals: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| a * (mu * x).sin() + ((mu * x).sin() * c[i] - (mu * x).cos() * s[i]) / (nu * mu))
        .collect();
    let series = project_grid(&xs, &vals, p.cutoff());
    let grid = SampledFunction::new(xs, vals)?;
    Ok(PsiSolution {
        series,
        psi_prime_zero,
        grid,
    })
}

/// Eigenfunction-expansion solution of the same two-point problem:
/// ψ_k = Σₙ ⟨qφ_k, φ_n⟩ / (k² − νn²) · φ_n, truncated at the series
/// cutoff; returns the partial sum and an H¹₀ tail bound.
pub fn psi_series(p: &ProblemData, k: usize) -> Result<(SineSeries, f64)> {
    let nu = p.nu.nu_f64();
    let mu = k as f64 / p.nu.sqrt_nu_f64();
    check_resonance(mu, k, &p.ctx)?;
    let n_max = p.cutoff();
    let couplings = p.q.mode_couplings(k, n_max, &p.ctx)?;
    let k2 = (k * k) as f64;
    let coeffs: Vec<f64> = couplings
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let n = (i + 1) as f64;
            c / (k2 - nu * n * n)
        })
        .collect();
    // |⟨qφ_k,φ_n⟩| ≤ sup|q| and |k²−νn²| ≥ νn²/2 for n past the cutoff,
    // so the H¹₀ tail is ≤ sup|q|·(2/ν)·√(Σ_{n>N} 1/n²) ≤ sup·2/(ν√N).
    let tail = p.q.sup_bound() * 2.0 / (nu * (n_max as f64).sqrt());
    Ok((SineSeries::new(coeffs)?, tail))
}

/// Independent RK4-shooting solution of the same two-point problem:
/// integrate the IVPs (particular with zero data, homogeneous with unit
/// slope) and match the right boundary. Shares no code with the Duhamel
/// or series routes.
pub fn ode_oracle_psi(p: &ProblemData, k: usize) -> Result<SineSeries> {
    let nu = p.nu.nu_f64();
    let kf = k as f64;
    let k2 = kf * kf;
    let mu = kf / p.nu.sqrt_nu_f64();
    check_resonance(mu, k, &p.ctx)?;

    let n = GRID_PANELS;
    let h = PI / n as f64;
    let src = |x: f64| p.q.eval(x).unwrap() * PHI_NORM * (kf * x).sin();
    // State (y, y′, z, z′): particular and homogeneous solutions.
    let mut state = [0.0, 0.0, 0.0, 1.0];
    let mut y_part = Vec::with_capacity(n + 1);
    let mut y_hom = Vec::with_capacity(n + 1);
    y_part.push(0.0);
    y_hom.push(0.0);
    let deriv = |x: f64, s: &[f64; 4]| -> [f64; 4] {
        [
            s[1],
            (src(x) - k2 * s[0]) / nu,
            s[3],
            -k2 * s[2] / nu,
        ]
    };
    for i in 0..n {
        let x = i as f64 * h;
        let k1 = deriv(x, &state);
        let mid1 = std::array::from_fn(|j| state[j] + 0.5 * h * k1[j]);
        let k2v = deriv(x + 0.5 * h, &mid1);
        let mid2 = std::array::from_fn(|j| state[j] + 0.5 * h * k2v[j]);
        let k3 = deriv(x + 0.5 * h, &mid2);
        let end = std::array::from_fn(|j| state[j] + h * k3[j]);
        let k4 = deriv(x + h, &end);
        for j in 0..4 {
            state[j] += h / 6.0 * (k1[j] + 2.0 * k2v[j] + 2.0 * k3[j] + k4[j]);
        }
        y_part.push(state[0]);
        y_hom.push(state[2]);
    }
    let hom_end = *y_hom.last().unwrap();
    if hom_end.abs() < 1e-12 {
        return Err(Error::PrecisionEscalation {
            reason: format!("homogeneous solution vanishes at π for k = {k}"),
            required_bits: p.ctx.working_bits.max(53) * 2,
        });
    }
    let a = -y_part.last().unwrap() / hom_end;
    let xs = uniform_grid(n);
    let vals: Vec<f64> = y_part
        .iter()
        .zip(&y_hom)
        .map(|(&yp, &yh)| yp + a * yh)
        .collect();
    Ok(project_grid(&xs, &vals, p.cutoff()))
}

// ---------------------------------------------------------------------------
// Rational regime: coupling integrals, ψ̃, ψ̂
// ---------------------------------------------------------------------------

pub(crate) fn rational_parts(nu: &NuValue) -> Result<(u64, u64)> {
    match nu.kind {
        NuKind::Rational { i0, j0 } => Ok((i0, j0)),
        _ => Err(Error::Domain(
            "operation requires the rational regime".into(),
        )),
    }
}

/// I(ζ) = ∫₀^π q(s)·φ_√ζ(s)·√(π/2)·sin(√(ζ/ν)(π−s)) ds for ζ = k².
pub fn coupling_integral(p: &ProblemData, zeta: f64) -> Result<f64> {
    let (_, _) = rational_parts(&p.nu)?;
    let kf = zeta.sqrt();
    let k = kf.round();
    if (kf - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::Domain(format!(
            "ζ = {zeta} is not the square of a positive integer"
        )));
    }
    if let Coupling::Synthetic { tau } = p.q {
        return Ok((-tau * zeta).exp());
    }
    let mu = k / p.nu.sqrt_nu_f64();
    let half_pi_sqrt = (PI / 2.0).sqrt();
    let g =
        |s: f64| p.q.eval(s).unwrap() * PHI_NORM * (k * s).sin() * half_pi_sqrt * (mu * (PI - s)).sin();
    Ok(quad_oscillatory(&g, k + mu, &p.ctx)?.value)
}

/// ln|I(ζ)|; exact in log space for synthetic couplings (where the
/// plain value may underflow f64).
pub fn log_abs_coupling_integral(p: &ProblemData, zeta: f64) -> Result<f64> {
    if let Coupling::Synthetic { tau } = p.q {
        return Ok(-tau * zeta);
    }
    Ok(coupling_integral(p, zeta)?.abs().ln())
}

/// ψ̃_k for rational √ν and k ∉ i₀N*: the same two-point problem as the
/// irrational regime, solvable because sin(kπ/√ν) ≠ 0 off i₀N*.
pub fn psi_tilde(p: &ProblemData, k: usize) -> Result<PsiSolution> {
    let (i0, _) = rational_parts(&p.nu)?;
    if k as u64 % i0 == 0 {
        return Err(Error::Domain(format!(
            "k = {k} is a multiple of i0 = {i0}; the two-point problem is resonant"
        )));
    }
    psi_closed_form(p, k)
}

/// Jordan-chain data at the collision point ζ = i₀²l².
#[derive(Debug, Clone)]
pub struct PsiHat {
    /// Second component ψ̂_l = α_l·φ_{j₀l} + β_l of the chain vector.
    pub psi_hat: SineSeries,
    pub alpha_l: f64,
    pub beta: SineSeries,
    /// Grid values of β_l (β_l(0) = β′_l(0) = 0 by construction).
    pub beta_grid: SampledFunction,
    /// I(i₀²l²).
    pub coupling: f64,
    /// First-component scale s_l: the chain vector is (s_l·φ_{i₀l}, ψ̂_l)
    /// and satisfies (L* − i₀²l²)Φ̂ = I·Φ*₂,ⱼ₀ₗ exactly.
    pub scale: f64,
    /// ψ̂′_l(0) = α_l·j₀l·√(2/π), from metadata (β′_l(0) = 0).
    pub psi_hat_prime_zero: f64,
}

/// Chain construction at ζ = i₀²l². Solves
///
///   νψ̂″ + ζψ̂ = s_l·qφ_{i₀l} − I(ζ)·φ_{j₀l},   ψ̂(0) = ψ̂(π) = 0,
///
/// with the first-component scale s_l = (−1)^{j₀l+1}·π/2 chosen so the
/// right-hand side satisfies the solvability condition exactly and the
/// chain identity holds with the coupling integral I as defined in
/// [`coupling_integral`]. β_l is the particular solution with zero
/// Cauchy data at 0 (hence β′_l(0) = 0) and α_l = −⟨β_l, φ_{j₀l}⟩
/// makes ψ̂_l orthogonal to φ_{j₀l}.
pub fn psi_hat(p: &ProblemData, l: usize) -> Result<PsiHat> {
    let (i0, j0) = rational_parts(&p.nu)?;
    if l == 0 {
        return Err(Error::InvalidInput("l must be at least 1".into()));
    }
    let nu = p.nu.nu_f64();
    let ki = i0 as usize * l; // fast index
    let kj = j0 as usize * l; // slow index, also the kernel frequency
    let zeta = (ki * ki) as f64;
    let mu = kj as f64;
    let coupling = coupling_integral(p, zeta)?;
    let scale = if kj % 2 == 0 { -PI / 2.0 } else { PI / 2.0 };

    if p.q.is_synthetic() {
        // The witness construction: chain metadata only, ψ̂ ≡ 0.
        let cutoff = p.cutoff();
        return Ok(PsiHat {
            psi_hat: SineSeries::zeros(cutoff),
            alpha_l: 0.0,
            beta: SineSeries::zeros(cutoff),
            beta_grid: SampledFunction::from_fn(9, |_| 0.0)?,
            coupling,
            scale,
            psi_hat_prime_zero: 0.0,
        });
    }

    let kif = ki as f64;
    let source = |x: f64| {
        scale * p.q.eval(x).unwrap() * PHI_NORM * (kif * x).sin()
            - coupling * PHI_NORM * (mu * x).sin()
    };
    // β(x) = (1/(νμ)) ∫₀ˣ sin(μ(x−ξ))·h(ξ) dξ with h = source.
    let xs = uniform_grid(GRID_PANELS);
    let h_step = xs[1] - xs[0];
    let f_cos: Vec<f64> = xs.iter().map(|&x| source(x) * (mu * x).cos()).collect();
    let f_sin: Vec<f64> = xs.iter().map(|&x| source(x) * (mu * x).sin()).collect();
    let c = cumulative_simpson(&f_cos, h_step);
    let s = cumulative_simpson(&f_sin, h_step);
    let beta_vals: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| ((mu * x).sin() * c[i] - (mu * x).cos() * s[i]) / (nu * mu))
        .collect();
    let cutoff = p.cutoff();
    let beta = project_grid(&xs, &beta_vals, cutoff);
    let alpha_l = -beta.coeff(kj);
    let mut psi = beta.clone();
    psi.set_coeff(kj, psi.coeff(kj) + alpha_l);
    let psi_hat_prime_zero = alpha_l * mu * PHI_NORM;
    Ok(PsiHat {
        psi_hat: psi,
        alpha_l,
        beta,
        beta_grid: SampledFunction::new(xs, beta_vals)?,
        coupling,
        scale,
        psi_hat_prime_zero,
    })
}

// ---------------------------------------------------------------------------
// Index maps
// ---------------------------------------------------------------------------

/// Nearest-integer index maps k ↦ i_k = ⌊√ν·k⌉ and k ↦ j_k = ⌊k/√ν⌉
/// with the complement sets, computed at the stored precision of √ν so
/// that Liouville-type values round correctly.
pub fn index_maps(nu: &NuValue, k_range: usize) -> Result<IndexMaps> {
    if nu.is_rational() {
        return Err(Error::Domain(
            "index maps are defined for the irrational regime".into(),
        ));
    }
    let bits = nu.sqrt_nu.prec();
    let tie_floor = Float::with_val(bits, -((bits / 2) as f64)).exp2();
    let nearest_under = |prod: Float| -> Result<u64> {
        let rounded = prod.clone().round();
        let dist = ((prod - &rounded).abs() - Float::with_val(bits, 0.5)).abs();
        if dist < tie_floor {
            return Err(Error::PrecisionEscalation {
                reason: "nearest-integer tie at the stored precision of √ν".into(),
                required_bits: bits * 2,
            });
        }
        Ok(rounded.to_f64() as u64)
    };
    let mut i_k = Vec::with_capacity(k_range);
    let mut j_k = Vec::with_capacity(k_range);
    for k in 1..=k_range as u64 {
        i_k.push(nearest_under(Float::with_val(bits, &nu.sqrt_nu * k))?);
        j_k.push(nearest_under(
            Float::with_val(bits, k) / nu.sqrt_nu.clone(),
        )?);
    }
    let complement = |image: &[u64]| -> Vec<u64> {
        let max = image.iter().copied().max().unwrap_or(0);
        let set: std::collections::BTreeSet<u64> = image.iter().copied().collect();
        (1..=max).filter(|m| !set.contains(m)).collect()
    };
    Ok(IndexMaps {
        i_hat: complement(&i_k),
        j_hat: complement(&j_k),
        i_k,
        j_k,
    })
}

// ---------------------------------------------------------------------------
// Observation and normalization
// ---------------------------------------------------------------------------

/// B*D∂ₓΦ(0) = ν·∂ₓ(second component)(0), from stored metadata.
pub fn observation(e: &EigenPair) -> f64 {
    e.observation
}

/// Eigenfunction divided by its boundary observation (the ψ_{i,k}
/// normalization that sends every moment trace to the same scale).
pub fn normalize_by_observation(e: &EigenPair) -> Result<VectorField2> {
    if e.observation == 0.0 {
        return Err(Error::ZeroObservation { lambda: e.lambda });
    }
    Ok(e.eigfn.scale(1.0 / e.observation))
}

// ---------------------------------------------------------------------------
// Operator application (for residual checks)
// ---------------------------------------------------------------------------

/// Apply L* = (−∂², −ν∂² + q·first) spectrally at the series cutoff.
/// The multiplication by q is performed on the physical grid and
/// projected back.
pub fn apply_lstar(p: &ProblemData, v: &VectorField2) -> Result<VectorField2> {
    let cutoff = v.first.cutoff();
    let nu = p.nu.nu_f64();
    let first = SineSeries::new(
        v.first
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, &a)| ((i + 1) * (i + 1)) as f64 * a)
            .collect(),
    )?;
    let q_times = multiply_by_q(p, &v.first)?;
    let second = SineSeries::new(
        v.second
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, &b)| nu * ((i + 1) * (i + 1)) as f64 * b + q_times.coeff(i + 1))
            .collect(),
    )?;
    let _ = cutoff;
    Ok(VectorField2::new(first, second))
}

/// q·f as a sine series: evaluate on the grid, project by Simpson.
pub fn multiply_by_q(p: &ProblemData, f: &SineSeries) -> Result<SineSeries> {
    if p.q.is_synthetic() {
        return Err(Error::InvalidInput(
            "synthetic coupling has no pointwise values".into(),
        ));
    }
    let xs = uniform_grid(GRID_PANELS);
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| p.q.eval(x).unwrap() * f.eval(x))
        .collect();
    Ok(project_grid(&xs, &vals, f.cutoff()))
}

// ---------------------------------------------------------------------------
// Spectrum assembly
// ---------------------------------------------------------------------------

fn slow_pair(p: &ProblemData, j: usize, tag: LambdaTag) -> EigenPair {
    let nu = p.nu.nu_f64();
    let cutoff = p.cutoff();
    let jf = j as f64;
    let lambda = nu * jf * jf;
    let obs = nu * jf * PHI_NORM;
    EigenPair {
        lambda,
        branch: Branch::Slow { k: j },
        class: Classification::Simple,
        tag,
        eigfn: VectorField2::new(SineSeries::zeros(cutoff), SineSeries::basis(j, cutoff)),
        generalized_partner: None,
        observation: obs,
        log_abs_observation: obs.abs().ln(),
        coupling_integral: None,
        log_abs_coupling: None,
        psi_prime_zero: jf * PHI_NORM,
        alpha_l: None,
    }
}

fn fast_pair(p: &ProblemData, k: usize, tag: LambdaTag) -> Result<EigenPair> {
    let nu = p.nu.nu_f64();
    let cutoff = p.cutoff();
    let kf = k as f64;
    let lambda = kf * kf;
    let (series, psi_prime_zero, coupling, log_coupling) = if p.q.is_synthetic() {
        // Metadata-only mode: observation from the −I/(√(π/2)·sin(kπ/√ν))
        // identity, carried in log space to survive underflow.
        let i = coupling_integral(p, lambda)?;
        let log_i = log_abs_coupling_integral(p, lambda)?;
        let s_pi = (kf * PI / p.nu.sqrt_nu_f64()).sin();
        let half_pi_sqrt = (PI / 2.0).sqrt();
        let ppz = -i / (half_pi_sqrt * s_pi) / nu;
        (SineSeries::zeros(cutoff), ppz, Some(i), Some(log_i))
    } else {
        let sol = psi_closed_form(p, k)?;
        let (coupling, log_coupling) = if p.nu.is_rational() {
            let i = coupling_integral(p, lambda)?;
            (Some(i), Some(i.abs().ln()))
        } else {
            (None, None)
        };
        (sol.series, sol.psi_prime_zero, coupling, log_coupling)
    };
    let obs = nu * psi_prime_zero;
    let log_obs = match log_coupling {
        // |obs| = |I|/(√(π/2)·|sin(kπ/√ν)|) in the rational regime.
        Some(li) => {
            let s_pi = (kf * PI / p.nu.sqrt_nu_f64()).sin();
            li - ((PI / 2.0).sqrt() * s_pi.abs()).ln()
        }
        None => obs.abs().ln(),
    };
    Ok(EigenPair {
        lambda,
        branch: Branch::Fast { k },
        class: Classification::Simple,
        tag,
        eigfn: VectorField2::new(SineSeries::basis(k, cutoff), series),
        generalized_partner: None,
        observation: obs,
        log_abs_observation: log_obs,
        coupling_integral: coupling,
        log_abs_coupling: log_coupling,
        psi_prime_zero,
        alpha_l: None,
    })
}

fn collision_pair(p: &ProblemData, l: usize) -> Result<EigenPair> {
    let (i0, j0) = rational_parts(&p.nu)?;
    let nu = p.nu.nu_f64();
    let cutoff = p.cutoff();
    let ki = i0 as usize * l;
    let kj = j0 as usize * l;
    let lambda = (ki * ki) as f64;
    let hat = psi_hat(p, l)?;
    // Dichotomy with a numerical band: |I| below 10× the quadrature
    // error counts as a double eigenvalue.
    let i_tol = if p.q.is_synthetic() {
        0.0
    } else {
        10.0 * p.ctx.tail_tolerance
    };
    let is_double = hat.coupling.abs() <= i_tol;
    let obs = nu * kj as f64 * PHI_NORM;
    let partner_second = hat.psi_hat.clone();
    let partner_first = SineSeries::basis(ki, cutoff).scale(hat.scale);
    Ok(EigenPair {
        lambda,
        branch: Branch::Slow { k: kj },
        class: if is_double {
            Classification::Double
        } else {
            Classification::GeneralizedChain
        },
        tag: LambdaTag::Lambda3,
        eigfn: VectorField2::new(SineSeries::zeros(cutoff), SineSeries::basis(kj, cutoff)),
        generalized_partner: Some(VectorField2::new(partner_first, partner_second)),
        observation: obs,
        log_abs_observation: obs.abs().ln(),
        coupling_integral: Some(hat.coupling),
        log_abs_coupling: Some(if p.q.is_synthetic() {
            log_abs_coupling_integral(p, lambda)?
        } else {
            hat.coupling.abs().ln()
        }),
        psi_prime_zero: kj as f64 * PHI_NORM,
        alpha_l: Some(hat.alpha_l),
    })
}

/// Build the classified spectrum up to branch index K. σ(L*) is only
/// complete below min(K², νK²); the table records max(K², νK²) entries
/// but flags where completeness ends.
pub fn spectrum(p: &ProblemData) -> Result<SpectrumTable> {
    let k_max = p.k_trunc;
    let nu = p.nu.nu_f64();
    let mut entries = Vec::new();
    let regime = match p.nu.kind {
        NuKind::Rational { .. } => Regime::Rational,
        _ if p.nu.sqrt_nu_f64() > 1.0 => Regime::IrrationalGt1,
        _ => Regime::IrrationalLt1,
    };
    match p.nu.kind {
        NuKind::Rational { i0, j0 } => {
            for k in 1..=k_max {
                if k as u64 % i0 != 0 {
                    entries.push(fast_pair(p, k, LambdaTag::Lambda2)?);
                }
            }
            for j in 1..=k_max {
                if j as u64 % j0 != 0 {
                    entries.push(slow_pair(p, j, LambdaTag::Lambda1));
                }
            }
            // A collision point belongs to the truncated table as soon as
            // either of its branch indices is within range.
            let l_max = k_max / i0.min(j0) as usize;
            for l in 1..=l_max {
                entries.push(collision_pair(p, l)?);
            }
        }
        _ => {
            for k in 1..=k_max {
                if p.q.is_synthetic() {
                    return Err(Error::InvalidInput(
                        "synthetic coupling is defined only in the rational regime".into(),
                    ));
                }
                entries.push(fast_pair(p, k, LambdaTag::Irrational)?);
            }
            for j in 1..=k_max {
                entries.push(slow_pair(p, j, LambdaTag::Irrational));
            }
        }
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let kf = k_max as f64;
    Ok(SpectrumTable {
        entries,
        regime,
        complete_below: (kf * kf).min(nu * kf * kf),
    })
}

// ---------------------------------------------------------------------------
// Approximate controllability
// ---------------------------------------------------------------------------

/// Outcome of the zero-observation scan.
#[derive(Debug, Clone)]
pub struct ControllabilityReport {
    /// (λ, reason) for every eigenvalue with a vanishing observation
    /// or vanishing coupling integral at a collision point.
    pub failures: Vec<(f64, String)>,
    pub controllable: bool,
    /// The scan only covers eigenvalues at truncation K.
    pub truncation: usize,
}

/// Scan the spectrum for vanishing boundary observations (the
/// Fattorini-type criterion: approximate controllability fails exactly
/// at eigenvalues invisible from the control boundary).
pub fn approx_controllability_check(p: &ProblemData) -> Result<ControllabilityReport> {
    let table = spectrum(p)?;
    let mut failures = Vec::new();
    let tol = 10.0 * p.ctx.tail_tolerance;
    for e in &table.entries {
        match e.branch {
            Branch::Fast { k } => {
                if e.observation.abs() <= tol {
                    failures.push((e.lambda, format!("fast eigenvalue k = {k}: observation ≈ 0")));
                }
            }
            Branch::Slow { .. } => {
                if e.class == Classification::Double {
                    failures.push((
                        e.lambda,
                        format!("collision point λ = {}: I(λ) ≈ 0", e.lambda),
                    ));
                }
            }
        }
    }
    Ok(ControllabilityReport {
        controllable: failures.is_empty(),
        failures,
        truncation: p.k_trunc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn problem(nu: NuValue, q: Coupling, k: usize) -> ProblemData {
        ProblemData::new(nu, q, k, ctx()).unwrap()
    }

    fn nu_real(v: f64) -> NuValue {
        NuValue::real(v.sqrt(), 64).unwrap()
    }

    fn q_sin() -> Coupling {
        Coupling::Trig(TrigPoly::sin(1))
    }

    fn h10_diff(a: &SineSeries, b: &SineSeries) -> f64 {
        let n = a.cutoff().max(b.cutoff());
        a.resized(n)
            .axpy(-1.0, &b.resized(n))
            .norm(crate::fnspace::Space::H10)
    }

    #[test]
    fn psi_vanishes_for_zero_coupling() {
        let p = problem(nu_real(2.0), Coupling::Trig(TrigPoly::constant(0.0)), 3);
        let sol = psi_closed_form(&p, 1).unwrap();
        assert!(sol.series.norm(crate::fnspace::Space::H10) < 1e-12);
        assert_abs_diff_eq!(sol.psi_prime_zero, 0.0, epsilon = 1e-14);
        let (ser, _) = psi_series(&p, 1).unwrap();
        assert!(ser.norm(crate::fnspace::Space::L2) < 1e-14);
        let ode = ode_oracle_psi(&p, 1).unwrap();
        assert!(ode.norm(crate::fnspace::Space::L2) < 1e-12);
    }

    #[test]
    fn three_routes_agree_nu2_qsin_k1() {
        let p = problem(nu_real(2.0), q_sin(), 3);
        let closed = psi_closed_form(&p, 1).unwrap();
        let (series, tail) = psi_series(&p, 1).unwrap();
        let ode = ode_oracle_psi(&p, 1).unwrap();
        assert!(h10_diff(&closed.series, &series) < 1e-8 + tail);
        assert!(h10_diff(&closed.series, &ode) < 1e-8);
    }

    #[test]
    fn three_routes_agree_high_modes() {
        let p = problem(nu_real(2.0), Coupling::Trig(TrigPoly::sin(2)), 3);
        for k in [3usize, 7, 20] {
            let closed = psi_closed_form(&p, k).unwrap();
            let (series, tail) = psi_series(&p, k).unwrap();
            let ode = ode_oracle_psi(&p, k).unwrap();
            assert!(
                h10_diff(&closed.series, &series) < 1e-8 + tail,
                "closed vs series at k = {k}"
            );
            assert!(h10_diff(&closed.series, &ode) < 1e-8, "closed vs ode at k = {k}");
        }
    }

    #[test]
    fn series_coefficient_matches_quadrature_oracle() {
        // coefficient at n: ⟨qφ_k,φ_n⟩/(k²−νn²) for q = sin x, ν=2, k=1, n=2.
        let p = problem(nu_real(2.0), q_sin(), 3);
        let (series, _) = psi_series(&p, 1).unwrap();
        let numer = crate::hp::oracles::adaptive_simpson(
            &|x| x.sin() * PHI_NORM * x.sin() * PHI_NORM * (2.0 * x).sin(),
            0.0,
            PI,
            1e-13,
        );
        assert_abs_diff_eq!(series.coeff(2), numer / (1.0 - 8.0), epsilon = 1e-12);
    }

    #[test]
    fn ode_oracle_is_linear() {
        let q1 = TrigPoly::sin(1);
        let q2 = TrigPoly::sin(2);
        let mut q12 = TrigPoly::sin(1);
        q12.sin_coeffs = vec![1.0, 1.0];
        let nu = nu_real(2.0);
        let a = ode_oracle_psi(&problem(nu.clone(), Coupling::Trig(q1), 3), 3).unwrap();
        let b = ode_oracle_psi(&problem(nu.clone(), Coupling::Trig(q2), 3), 3).unwrap();
        let ab = ode_oracle_psi(&problem(nu, Coupling::Trig(q12), 3), 3).unwrap();
        let sum = a.axpy(1.0, &b);
        assert!(h10_diff(&sum, &ab) < 1e-10);
    }

    #[test]
    fn coupling_integral_examples() {
        // ν = 4, q ≡ 1: I(1) = ∫ sin s·cos(s/2) ds = 4/3; I(4) = 0.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::constant(1.0)), 4);
        assert_abs_diff_eq!(coupling_integral(&p, 1.0).unwrap(), 4.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(coupling_integral(&p, 4.0).unwrap(), 0.0, epsilon = 1e-10);
        let p0 = problem(
            NuValue::rational(2, 1, 64).unwrap(),
            Coupling::Trig(TrigPoly::constant(0.0)),
            4,
        );
        for z in [1.0, 4.0, 9.0] {
            assert_abs_diff_eq!(coupling_integral(&p0, z).unwrap(), 0.0, epsilon = 1e-14);
        }
        assert!(coupling_integral(&p0, 2.5).is_err());
    }

    #[test]
    fn spectrum_nu4_classification() {
        // ν = 4 (i₀=2, j₀=1), K = 3: eigenvalues {1, 4, 9, 16, 36},
        // Λ₁ = ∅, Λ₂ = {1, 9}, Λ₃ = {4, 16, 36}.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::constant(1.0)), 3);
        let t = spectrum(&p).unwrap();
        let lambdas: Vec<f64> = t.entries.iter().map(|e| e.lambda).collect();
        assert_eq!(lambdas, vec![1.0, 4.0, 9.0, 16.0, 36.0]);
        let tagged = |tag| -> Vec<f64> {
            t.entries
                .iter()
                .filter(|e| e.tag == tag)
                .map(|e| e.lambda)
                .collect()
        };
        assert!(tagged(LambdaTag::Lambda1).is_empty());
        assert_eq!(tagged(LambdaTag::Lambda2), vec![1.0, 9.0]);
        assert_eq!(tagged(LambdaTag::Lambda3), vec![4.0, 16.0, 36.0]);
    }

    #[test]
    fn spectrum_nu2_all_simple() {
        let p = problem(nu_real(2.0), q_sin(), 2);
        let t = spectrum(&p).unwrap();
        let lambdas: Vec<f64> = t.entries.iter().map(|e| e.lambda).collect();
        assert_eq!(lambdas.len(), 4);
        for (got, want) in lambdas.iter().zip([1.0, 2.0, 4.0, 8.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(t.entries.iter().all(|e| e.class == Classification::Simple));
    }

    #[test]
    fn spectrum_nu_9_over_4() {
        // √ν = 3/2: Λ₁ ∋ 2.25, Λ₂ ⊇ {1, 4, 16}, Λ₃ ∋ 9 at K = 4.
        let nu = NuValue::rational(3, 2, 64).unwrap();
        let p = problem(nu, q_sin(), 4);
        let t = spectrum(&p).unwrap();
        let find = |lambda: f64| {
            t.entries
                .iter()
                .find(|e| (e.lambda - lambda).abs() < 1e-9)
                .unwrap()
        };
        assert_eq!(find(2.25).tag, LambdaTag::Lambda1);
        for z in [1.0, 4.0, 16.0] {
            assert_eq!(find(z).tag, LambdaTag::Lambda2);
        }
        assert_eq!(find(9.0).tag, LambdaTag::Lambda3);
    }

    #[test]
    fn double_eigenvalue_flag_nu4_q1() {
        // ν = 4, q ≡ 1, l = 1: I(4) = 0 by sine orthogonality.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::constant(1.0)), 2);
        let t = spectrum(&p).unwrap();
        let e = t
            .entries
            .iter()
            .find(|e| (e.lambda - 4.0).abs() < 1e-9)
            .unwrap();
        assert_eq!(e.class, Classification::Double);
    }

    #[test]
    fn beta_has_zero_derivative_at_origin() {
        // β′_l(0) = 0 by construction: β(h)/h should vanish linearly.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::cos(1)), 2);
        let hat = psi_hat(&p, 1).unwrap();
        let (xs, vals) = hat.beta_grid.grid();
        let h = xs[1];
        assert!(vals[0].abs() < 1e-14);
        assert!((vals[1] / h).abs() < 10.0 * h, "β(h)/h = {}", vals[1] / h);
        // ⟨ψ̂, φ_{j₀l}⟩ = 0.
        assert_abs_diff_eq!(hat.psi_hat.coeff(1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn chain_identity_nu4_qcos() {
        // ν = 4, q = cos x: I(4) = ∫cos s·sin 2s·sin s ds = π/4 ≠ 0, and
        // (L* − 4)Φ̂ = I(4)·Φ*₂,₁ must hold to quadrature accuracy.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::cos(1)), 2);
        let i4 = coupling_integral(&p, 4.0).unwrap();
        assert_abs_diff_eq!(i4, PI / 4.0, epsilon = 1e-10);
        let t = spectrum(&p).unwrap();
        let e = t
            .entries
            .iter()
            .find(|x| (x.lambda - 4.0).abs() < 1e-9)
            .unwrap();
        assert_eq!(e.class, Classification::GeneralizedChain);
        let hat = e.generalized_partner.as_ref().unwrap();
        let resid = apply_lstar(&p, hat)
            .unwrap()
            .axpy(-4.0, hat)
            .axpy(-i4, &e.eigfn);
        let norm = resid.norm(crate::fnspace::Space::L2);
        assert!(norm <= 1e-8 * 5.0, "chain residual {norm}");
    }

    #[test]
    fn eigen_residuals_below_tolerance() {
        let p = problem(nu_real(2.0), q_sin(), 6);
        let t = spectrum(&p).unwrap();
        for e in &t.entries {
            let resid = apply_lstar(&p, &e.eigfn)
                .unwrap()
                .axpy(-e.lambda, &e.eigfn);
            let norm = resid.norm(crate::fnspace::Space::L2);
            assert!(
                norm <= 1e-8 * (1.0 + e.lambda),
                "residual {norm} at λ = {}",
                e.lambda
            );
        }
    }

    #[test]
    fn index_maps_nu2() {
        let nu = nu_real(2.0);
        let maps = index_maps(&nu, 10).unwrap();
        assert_eq!(&maps.i_k[..5], &[1, 3, 4, 6, 7]);
        assert_eq!(&maps.i_hat[..4], &[2, 5, 9, 12]);
        assert_eq!(maps.j_k[0], 1);
        assert_eq!(maps.j_k[1], 1);
        // Partition: {i_k} ∪ Î = 1..max, disjoint.
        let mut all: Vec<u64> = maps.i_k.iter().chain(&maps.i_hat).copied().collect();
        all.sort_unstable();
        let max = *all.last().unwrap();
        assert_eq!(all, (1..=max).collect::<Vec<_>>());
    }

    #[test]
    fn index_map_j_injective_below_one() {
        let nu = nu_real(0.5);
        let maps = index_maps(&nu, 50).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for &j in &maps.j_k {
            assert!(seen.insert(j), "j map not injective at {j}");
        }
    }

    #[test]
    fn observation_values() {
        // Slow eigenfunction: νk√(2/π). Fast with q ≡ 0: zero.
        let p = problem(nu_real(2.0), Coupling::Trig(TrigPoly::constant(0.0)), 2);
        let t = spectrum(&p).unwrap();
        for e in &t.entries {
            match e.branch {
                Branch::Slow { k } => {
                    assert_abs_diff_eq!(
                        e.observation,
                        2.0 * k as f64 * PHI_NORM,
                        epsilon = 1e-12
                    );
                    normalize_by_observation(e).unwrap();
                }
                Branch::Fast { .. } => {
                    assert_abs_diff_eq!(e.observation, 0.0, epsilon = 1e-12);
                    assert!(matches!(
                        normalize_by_observation(e),
                        Err(Error::ZeroObservation { .. })
                    ));
                }
            }
        }
    }

    #[test]
    fn rational_fast_observation_identity() {
        // Φ̃*₁,ₖ observation = −I(k²)/(√(π/2)·sin(kπ/√ν)).
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, q_sin(), 3);
        let t = spectrum(&p).unwrap();
        for e in t.entries.iter().filter(|e| e.tag == LambdaTag::Lambda2) {
            let k = e.fast_index().unwrap() as f64;
            let i = e.coupling_integral.unwrap();
            let expect = -i / ((PI / 2.0).sqrt() * (k * PI / 2.0).sin());
            assert_abs_diff_eq!(e.observation, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn controllability_scan() {
        // ν = 4, q ≡ 1 fails at the collision λ = 4.
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Trig(TrigPoly::constant(1.0)), 2);
        let r = approx_controllability_check(&p).unwrap();
        assert!(!r.controllable);
        assert!(r.failures.iter().any(|(l, _)| (*l - 4.0).abs() < 1e-9));
        // q ≡ 0 fails at every fast eigenvalue.
        let p0 = problem(nu_real(2.0), Coupling::Trig(TrigPoly::constant(0.0)), 3);
        let r0 = approx_controllability_check(&p0).unwrap();
        assert_eq!(r0.failures.len(), 3);
        // ν = 2, q = sin x, K = 20: all observations nonzero.
        let p1 = problem(nu_real(2.0), q_sin(), 20);
        let r1 = approx_controllability_check(&p1).unwrap();
        assert!(r1.controllable, "failures: {:?}", r1.failures);
    }

    #[test]
    fn completeness_proxy_full_rank() {
        // Normalized L² Gram of {Φ*₁,ₖ, Φ*₂,ₖ}, k ≤ 12, has full
        // numerical rank (smallest LU pivot bounded away from zero).
        let p = problem(nu_real(2.0), q_sin(), 12);
        let t = spectrum(&p).unwrap();
        let vecs: Vec<VectorField2> = t
            .entries
            .iter()
            .map(|e| e.eigfn.scale(1.0 / e.eigfn.norm(crate::fnspace::Space::L2)))
            .collect();
        let n = vecs.len();
        let mut g: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| vecs[i].inner(&vecs[j], crate::fnspace::Space::L2))
                    .collect()
            })
            .collect();
        let mut min_pivot = f64::INFINITY;
        for col in 0..n {
            let (pr, _) = (col..n)
                .map(|r| (r, g[r][col].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            g.swap(col, pr);
            let piv = g[col][col];
            min_pivot = min_pivot.min(piv.abs());
            for r in col + 1..n {
                let f = g[r][col] / piv;
                for c in col..n {
                    g[r][c] -= f * g[col][c];
                }
            }
        }
        assert!(min_pivot > 1e-3, "smallest pivot {min_pivot}");
    }

    #[test]
    fn synthetic_coupling_metadata() {
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, Coupling::Synthetic { tau: 1.0 }, 5);
        assert_abs_diff_eq!(
            log_abs_coupling_integral(&p, 9.0).unwrap(),
            -9.0,
            epsilon = 1e-12
        );
        let t = spectrum(&p).unwrap();
        let e = t
            .entries
            .iter()
            .find(|e| (e.lambda - 9.0).abs() < 1e-9)
            .unwrap();
        // log|obs| = log|I| − log(√(π/2)|sin(3π/2)|) = −9 − log√(π/2).
        assert_abs_diff_eq!(
            e.log_abs_observation,
            -9.0 - (PI / 2.0f64).sqrt().ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn psi_tilde_rejects_resonant_index() {
        let nu = NuValue::rational(2, 1, 64).unwrap();
        let p = problem(nu, q_sin(), 4);
        assert!(matches!(psi_tilde(&p, 2), Err(Error::Domain(_))));
        psi_tilde(&p, 3).unwrap();
    }
}
