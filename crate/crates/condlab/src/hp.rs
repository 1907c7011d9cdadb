//! Configurable-precision arithmetic helpers (MPFR-backed via `rug`).
//!
//! Condensation-sensitive quantities — sin(kπ/√ν) for a Liouville-type ν,
//! eigenvalue gaps |k² − νj²| near convergents, exponential Gram matrices —
//! suffer catastrophic cancellation in 53-bit arithmetic. This module
//! provides the small set of exact/high-precision building blocks the rest
//! of the crate needs: exact integrals of trigonometric products over (0,π),
//! closed-form sine-mode couplings of a [`TrigPoly`], and a dense linear
//! solver at arbitrary precision.

use crate::fnspace::TrigPoly;
use crate::{Error, Result};
use rug::ops::CompleteRound;
use rug::{Complete, Complex, Float, Integer};

/// Construct a Float of the given precision from an f64.
pub fn real(bits: u32, v: f64) -> Float {
    Float::with_val(bits, v)
}

/// π at the given precision.
pub fn pi(bits: u32) -> Float {
    Float::with_val(bits, rug::float::Constant::Pi)
}

/// √(2/π) at the given precision (the sine-basis normalization).
pub fn phi_norm(bits: u32) -> Float {
    let two_over_pi = Float::with_val(bits, 2) / pi(bits);
    two_over_pi.sqrt()
}

/// A finite sum Σₜ ampₜ·e^{i·freqₜ·s} with complex amplitudes and real
/// frequencies, used to integrate products of sin/cos factors exactly.
#[derive(Debug, Clone)]
pub struct TrigProd {
    bits: u32,
    terms: Vec<(Complex, Float)>, // (amplitude, frequency)
}

impl TrigProd {
    /// The constant function 1.
    pub fn one(bits: u32) -> Self {
        Self {
            bits,
            terms: vec![(Complex::with_val(bits, (1, 0)), Float::with_val(bits, 0))],
        }
    }

    /// sin(a·s + b) as a two-term exponential sum.
    pub fn sin(bits: u32, a: &Float, b: &Float) -> Self {
        // sin θ = (e^{iθ} − e^{−iθ})/(2i); e^{i(as+b)} = e^{ib}·e^{ias}.
        let half_over_i = Complex::with_val(bits, (0, -0.5)); // 1/(2i) = −i/2
        let eib = Complex::with_val(bits, (Float::with_val(bits, b.clone().cos()), b.clone().sin()));
        let emib = eib.clone().conj();
        let amp_plus = (&half_over_i * &eib).complete((bits, bits));
        let amp_minus = -(half_over_i * emib);
        Self {
            bits,
            terms: vec![
                (amp_plus, a.clone()),
                (amp_minus, -a.clone()),
            ],
        }
    }

    /// cos(a·s + b) as a two-term exponential sum.
    pub fn cos(bits: u32, a: &Float, b: &Float) -> Self {
        let half = Complex::with_val(bits, (0.5, 0));
        let eib = Complex::with_val(bits, (Float::with_val(bits, b.clone().cos()), b.clone().sin()));
        let emib = eib.clone().conj();
        let amp_plus = (&half * &eib).complete((bits, bits));
        let amp_minus = half * emib;
        Self {
            bits,
            terms: vec![
                (amp_plus, a.clone()),
                (amp_minus, -a.clone()),
            ],
        }
    }

    /// Product of two expansions (term-by-term convolution).
    pub fn mul(&self, other: &Self) -> Self {
        let bits = self.bits;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a1, f1) in &self.terms {
            for (a2, f2) in &other.terms {
                terms.push(((a1 * a2).complete((bits, bits)), (f1 + f2).complete(bits)));
            }
        }
        Self { bits, terms }
    }

    /// ∫₀^π of the expansion; the result of integrating a real-valued
    /// product has negligible imaginary part, returned as the real part.
    pub fn integrate(&self) -> Float {
        let bits = self.bits;
        let pi_hp = pi(bits);
        let mut acc = Complex::with_val(bits, (0, 0));
        for (amp, freq) in &self.terms {
            if freq.clone().abs() < Float::with_val(bits, 1e-300) {
                acc += (amp * &pi_hp).complete((bits, bits));
            } else {
                // ∫₀^π e^{iωs} ds = (e^{iωπ} − 1)/(iω)
                let phase = (freq * &pi_hp).complete(bits);
                let eiwp = Complex::with_val(
                    bits,
                    (Float::with_val(bits, phase.clone().cos()), phase.sin()),
                );
                let numer = eiwp - Complex::with_val(bits, (1, 0));
                let denom = Complex::with_val(bits, (Float::with_val(bits, 0), freq.clone()));
                acc += amp * (numer / denom);
            }
        }
        acc.real().clone()
    }

    /// Term-wise sum of two expansions.
    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self {
            bits: self.bits,
            terms,
        }
    }

    /// Scale every amplitude by a real constant.
    pub fn scale_real(&self, c: &Float) -> Self {
        Self {
            bits: self.bits,
            terms: self
                .terms
                .iter()
                .map(|(a, f)| ((a * c).complete((self.bits, self.bits)), f.clone()))
                .collect(),
        }
    }

    /// A trigonometric polynomial as an exponential sum.
    pub fn from_poly(bits: u32, q: &crate::fnspace::TrigPoly) -> Self {
        let zero = Float::with_val(bits, 0);
        let mut acc = Self::one(bits).scale_real(&Float::with_val(bits, q.constant));
        if q.constant == 0.0 {
            acc.terms.clear();
        }
        for (i, &c) in q.sin_coeffs.iter().enumerate() {
            if c != 0.0 {
                let m = Float::with_val(bits, (i + 1) as u32);
                acc = acc.add(&Self::sin(bits, &m, &zero).scale_real(&Float::with_val(bits, c)));
            }
        }
        for (i, &c) in q.cos_coeffs.iter().enumerate() {
            if c != 0.0 {
                let m = Float::with_val(bits, (i + 1) as u32);
                acc = acc.add(&Self::cos(bits, &m, &zero).scale_real(&Float::with_val(bits, c)));
            }
        }
        acc
    }
}

/// Exact value of S(m,d) = ∫₀^π sin(mx)·cos(dx) dx for integers m ≥ 1, d:
/// zero when m+d is even, else 2m/(m²−d²).
fn sin_cos_integral(bits: u32, m: &Integer, d: &Integer) -> Float {
    let parity = (m.clone() + d.clone()) % Integer::from(2);
    if parity == 0 {
        return Float::with_val(bits, 0);
    }
    let m2 = m.clone() * m.clone();
    let d2 = d.clone() * d.clone();
    let numer = Float::with_val(bits, 2 * m.clone());
    let denom = Float::with_val(bits, m2 - d2);
    numer / denom
}

/// Closed-form coupling coefficient ⟨q·φ_k, φ_n⟩ = ∫₀^π q(x)φ_k(x)φ_n(x) dx
/// for a trigonometric-polynomial q, with arbitrary (possibly huge) integer
/// mode indices, at the requested precision.
///
/// Uses product-to-sum identities: with the basis normalization 2/π,
/// φ_kφ_n = (1/π)[cos((k−n)x) − cos((k+n)x)], so each sin(mx) term of q
/// contributes (1/π)[S(m,k−n) − S(m,k+n)] and each cos(mx) term contributes
/// ½(δ_{m,|k−n|} − δ_{m,k+n}); the constant term contributes c₀·δ_{kn}.
pub fn coupling_exact(bits: u32, q: &TrigPoly, k: &Integer, n: &Integer) -> Float {
    let mut acc = Float::with_val(bits, 0);
    let diff = (k - n).complete();
    let sum = (k + n).complete();
    if q.constant != 0.0 && k == n {
        acc += Float::with_val(bits, q.constant);
    }
    let inv_pi = Float::with_val(bits, 1) / pi(bits);
    for (i, &s) in q.sin_coeffs.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let m = Integer::from(i + 1);
        let val = sin_cos_integral(bits, &m, &diff) - sin_cos_integral(bits, &m, &sum);
        acc += Float::with_val(bits, s) * val * &inv_pi;
    }
    for (i, &c) in q.cos_coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let m = Integer::from(i + 1);
        let mut val = Float::with_val(bits, 0);
        if diff.clone().abs() == m {
            val += Float::with_val(bits, 0.5);
        }
        if sum == m {
            val -= Float::with_val(bits, 0.5);
        }
        acc += Float::with_val(bits, c) * val;
    }
    acc
}

/// Solve the dense linear system A·x = b by Gaussian elimination with
/// partial pivoting at the precision carried by the entries. Returns the
/// solution and the pivot-ratio condition indicator max|pivot|/min|pivot|.
pub fn solve_linear(a: &[Vec<Float>], b: &[Float]) -> Result<(Vec<Float>, f64)> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) || b.len() != n {
        return Err(Error::InvalidInput("solve_linear: shape mismatch".into()));
    }
    let bits = a[0][0].prec();
    let mut m: Vec<Vec<Float>> = a.to_vec();
    let mut rhs: Vec<Float> = b.to_vec();
    let mut max_piv = Float::with_val(bits, 0);
    let mut min_piv: Option<Float> = None;
    for col in 0..n {
        // Partial pivoting.
        let mut best = col;
        for row in col + 1..n {
            if m[row][col].clone().abs() > m[best][col].clone().abs() {
                best = row;
            }
        }
        m.swap(col, best);
        rhs.swap(col, best);
        let piv = m[col][col].clone();
        let piv_abs = piv.clone().abs();
        if piv_abs.is_zero() {
            return Err(Error::PrecisionEscalation {
                reason: "singular pivot in linear solve".into(),
                required_bits: bits.saturating_mul(2),
            });
        }
        if piv_abs > max_piv {
            max_piv = piv_abs.clone();
        }
        match &min_piv {
            Some(mp) if piv_abs >= *mp => {}
            _ => min_piv = Some(piv_abs),
        }
        for row in col + 1..n {
            let factor = (&m[row][col] / &piv).complete(bits);
            if factor.is_zero() {
                continue;
            }
            for c in col..n {
                let delta = (&factor * &m[col][c]).complete(bits);
                m[row][c] -= delta;
            }
            let delta = (&factor * &rhs[col]).complete(bits);
            rhs[row] -= delta;
        }
    }
    // Back substitution.
    let mut x = vec![Float::with_val(bits, 0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for c in row + 1..n {
            let delta = (&m[row][c] * &x[c]).complete(bits);
            acc -= delta;
        }
        x[row] = acc / &m[row][row];
    }
    let cond = (max_piv / min_piv.unwrap()).to_f64();
    Ok((x, cond))
}

/// Independent reference implementations used to cross-check the main code
/// paths in tests. Deliberately simple and slow.

/// High-precision boundary derivative of the two-point solution:
/// ψ′_k(0) = −∫₀^π q(s)·φ_k(s)·sin(μ(π−s)) ds / (ν·sin(μπ)), μ = k/√ν,
/// evaluated by exact integration of the trigonometric product. Errors
/// when sin(μπ) vanishes to the working precision.
pub fn psi_prime_zero_hp(q: &crate::fnspace::TrigPoly, k: u64, sqrt_nu: &Float) -> Result<Float> {
    let bits = sqrt_nu.prec();
    let pi_hp = pi(bits);
    let nu = sqrt_nu.clone().square();
    let mu = Float::with_val(bits, k) / sqrt_nu.clone();
    let s_pi = Float::with_val(bits, &mu * &pi_hp).sin();
    if s_pi.is_zero() {
        return Err(Error::PrecisionEscalation {
            reason: format!("sin(kπ/√ν) vanishes at k = {k} at {bits} bits"),
            required_bits: bits * 2,
        });
    }
    let kf = Float::with_val(bits, k);
    let zero = Float::with_val(bits, 0);
    let kernel = TrigProd::sin(
        bits,
        &(-mu.clone()),
        &Float::with_val(bits, &mu * &pi_hp),
    );
    let prod = TrigProd::sin(bits, &kf, &zero)
        .scale_real(&phi_norm(bits))
        .mul(&TrigProd::from_poly(bits, q))
        .mul(&kernel);
    let integral = prod.integrate();
    Ok(-integral / (nu * s_pi))
}

pub mod oracles {
    use crate::fnspace::TrigPoly;

    /// Adaptive Simpson quadrature with absolute tolerance `tol`.
    pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
        }
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            whole: f64,
            m: f64,
            fm: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (left, lm, flm) = simpson(f, a, fa, m, fm);
            let (right, rm, frm) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            // Always bisect down to a minimum depth: sampling only dyadic
            // points of an oscillatory integrand can alias to a false zero.
            if depth == 0 || (depth <= 44 && delta.abs() <= 15.0 * tol) {
                left + right + delta / 15.0
            } else {
                rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                    + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb) = (f(a), f(b));
        let (whole, m, fm) = simpson(f, a, fa, b, fb);
        rec(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    /// f64 closed-form coupling ⟨q·φ_k, φ_n⟩ by product-to-sum expansion;
    /// independent of the arbitrary-precision implementation above only in
    /// arithmetic type, so tests also compare both against quadrature.
    pub fn coupling_closed_form(q: &TrigPoly, k: i64, n: i64) -> f64 {
        use std::f64::consts::PI;
        fn s_int(m: i64, d: i64) -> f64 {
            if (m + d).rem_euclid(2) == 0 {
                0.0
            } else {
                2.0 * m as f64 / ((m * m - d * d) as f64)
            }
        }
        let mut acc = 0.0;
        if k == n {
            acc += q.constant;
        }
        for (i, &s) in q.sin_coeffs.iter().enumerate() {
            let m = (i + 1) as i64;
            acc += s * (s_int(m, k - n) - s_int(m, k + n)) / PI;
        }
        for (i, &c) in q.cos_coeffs.iter().enumerate() {
            let m = (i + 1) as i64;
            if (k - n).abs() == m {
                acc += 0.5 * c;
            }
            if k + n == m {
                acc -= 0.5 * c;
            }
        }
        acc
    }
}
