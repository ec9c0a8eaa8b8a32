//! Generalized eigenfunctions of the three-term recurrence: forward
//! extension, the fundamental pair, Weyl solutions, transfer matrices and
//! fitted asymptotics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{carleman_prefix, truncate, ModelSpec, SumPower};
use crate::scalar::Scalar;
use crate::tridiag::{resolvent_column, ResolventColumn};

/// Mantissas are renormalised once they exceed this magnitude.
const RESCALE_AT: f64 = 1e100;
/// Largest tolerated accumulated log-magnitude.
pub const LOG_SCALE_LIMIT: f64 = 1e15;

/// A sequence `u(n) = values[n] · exp(log_scale[n])` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSequence<T> {
    pub values: Vec<T>,
    pub log_scale: Vec<f64>,
}

impl<T: Scalar> ScaledSequence<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `u(n)`; may overflow to infinity when the scale is huge.
    pub fn value(&self, n: usize) -> T {
        self.values[n] * self.log_scale[n].exp()
    }

    /// `ln |u(n)|`
    pub fn log_abs(&self, n: usize) -> f64 {
        self.values[n].modulus().ln() + self.log_scale[n]
    }

    /// Unscaled copy; only meaningful when nothing was rescaled.
    pub fn to_plain(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.value(n)).collect()
    }
}

/// `(z - q_n) / λ_n` and `λ_{n-1} / λ_n`.
fn step_coefficients<T: Scalar>(spec: &ModelSpec, z: T, n: usize) -> Result<(T, f64)> {
    let lam = spec.weight(n)?;
    let lam_prev = spec.weight(n - 1)?;
    Ok(((z - T::from_real(spec.diag(n))) / lam, lam_prev / lam))
}

/// Runs the recurrence for several solutions at once, sharing one scale so
/// that bilinear expressions between them stay exact.
fn extend_many<T: Scalar, const K: usize>(
    spec: &ModelSpec,
    z: T,
    init: [(T, T); K],
    horizon: usize,
) -> Result<([Vec<T>; K], Vec<f64>)> {
    let horizon = horizon.max(1);
    let mut out: [Vec<T>; K] = std::array::from_fn(|_| Vec::with_capacity(horizon + 1));
    let mut scale = Vec::with_capacity(horizon + 1);
    let mut prev: [T; K] = std::array::from_fn(|i| init[i].0);
    let mut cur: [T; K] = std::array::from_fn(|i| init[i].1);
    let mut log_scale = 0.0;
    for i in 0..K {
        out[i].push(prev[i]);
        out[i].push(cur[i]);
    }
    scale.push(0.0);
    scale.push(0.0);
    for n in 1..horizon {
        let (a, b) = step_coefficients(spec, z, n)?;
        let mut peak = 0.0f64;
        for i in 0..K {
            let next = a * cur[i] - prev[i] * b;
            prev[i] = cur[i];
            cur[i] = next;
            peak = peak.max(next.modulus()).max(prev[i].modulus());
        }
        if peak > RESCALE_AT {
            for i in 0..K {
                prev[i] = prev[i] / peak;
                cur[i] = cur[i] / peak;
            }
            log_scale += peak.ln();
            if log_scale.abs() > LOG_SCALE_LIMIT {
                return Err(Error::Overflow(log_scale));
            }
        }
        for i in 0..K {
            out[i].push(cur[i]);
        }
        scale.push(log_scale);
    }
    Ok((out, scale))
}

/// Forward solution of `λ_{n-1}u(n-1) + q_n u(n) + λ_n u(n+1) = z u(n)` on
/// `0..=horizon` from `u(0) = u0`, `u(1) = u1`.
pub fn recurrence_extend<T: Scalar>(
    spec: &ModelSpec,
    z: T,
    u0: T,
    u1: T,
    horizon: usize,
) -> Result<ScaledSequence<T>> {
    let ([values], log_scale) = extend_many(spec, z, [(u0, u1)], horizon)?;
    Ok(ScaledSequence { values, log_scale })
}

/// Solutions `φ` (`φ(0)=0, φ(1)=1`) and `ψ` (`ψ(0)=-1, ψ(1)=0`) on a common
/// scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalPair<T> {
    pub phi: Vec<T>,
    pub psi: Vec<T>,
    pub log_scale: Vec<f64>,
    pub z: T,
    pub horizon: usize,
}

impl<T: Scalar> FundamentalPair<T> {
    pub fn phi_at(&self, n: usize) -> T {
        self.phi[n] * self.log_scale[n].exp()
    }

    pub fn psi_at(&self, n: usize) -> T {
        self.psi[n] * self.log_scale[n].exp()
    }

    /// `λ_n (φ(n)ψ(n+1) - φ(n+1)ψ(n))` together with the magnitude of its
    /// two products, for relative comparisons.
    pub fn wronskian(&self, spec: &ModelSpec, n: usize) -> Result<(T, f64)> {
        let lam = spec.weight(n)?;
        let factor = (self.log_scale[n] + self.log_scale[n + 1]).exp() * lam;
        let a = self.phi[n] * self.psi[n + 1];
        let b = self.phi[n + 1] * self.psi[n];
        Ok(((a - b) * factor, (a.modulus() + b.modulus()) * factor))
    }
}

pub fn fundamental_pair<T: Scalar>(spec: &ModelSpec, z: T, horizon: usize) -> Result<FundamentalPair<T>> {
    let one = T::from_real(1.0);
    let ([phi, psi], log_scale) = extend_many(spec, z, [(T::zero(), one), (-one, T::zero())], horizon)?;
    Ok(FundamentalPair {
        phi,
        psi,
        log_scale,
        z,
        horizon: horizon.max(1),
    })
}

/// Square-summable solution at `E + iη` realised as a resolvent column.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylSolution {
    pub column: ResolventColumn,
    /// `m(E + iη)`, the column's first entry.
    pub m: Complex64,
}

impl WeylSolution {
    /// Largest `|column(n) - ψ(n) - m φ(n)| / max(|ψ(n)|, |φ(n)|)` for
    /// `1 ≤ n ≤ horizon`.
    pub fn decomposition_residual(&self, spec: &ModelSpec, horizon: usize) -> Result<f64> {
        let horizon = horizon.min(self.column.size);
        let pair = fundamental_pair(spec, self.column.z, horizon)?;
        let mut worst = 0.0f64;
        for n in 1..=horizon {
            let (phi, psi) = (pair.phi_at(n), pair.psi_at(n));
            let diff = (self.column.at(n) - psi - self.m * phi).norm();
            let scale = phi.norm().max(psi.norm());
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            }
        }
        Ok(worst)
    }
}

/// Weyl solution of the `N`-section at `E + iη`. With `η = 0` the energy
/// must stay off the truncated spectrum.
pub fn weyl_solution(spec: &ModelSpec, e: f64, eta: f64, n: usize) -> Result<WeylSolution> {
    if eta < 0.0 {
        return Err(Error::InvalidModel(format!("eta must be non-negative, got {eta}")));
    }
    let slice = truncate(spec, 1, n)?;
    let column = resolvent_column(&slice, Complex64::new(e, eta))?;
    let m = column.values[0];
    Ok(WeylSolution { column, m })
}

/// 2×2 matrix stored row-major.
pub type Mat2<T> = [[T; 2]; 2];

pub fn mat2_mul<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn mat2_det<T: Scalar>(a: &Mat2<T>) -> T {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Transfer matrix `B_n` mapping `(u(n-1), u(n))` to `(u(n), u(n+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferStep<T> {
    pub n: usize,
    pub matrix: Mat2<T>,
}

/// `B_n = [[0, 1], [-λ_{n-1}/λ_n, (z - q_n)/λ_n]]`, `n ≥ 1`.
pub fn transfer_step<T: Scalar>(spec: &ModelSpec, z: T, n: usize) -> Result<TransferStep<T>> {
    if n == 0 {
        return Err(Error::IndexOutOfWindow { n, lo: 1, hi: usize::MAX });
    }
    let (a, b) = step_coefficients(spec, z, n)?;
    Ok(TransferStep {
        n,
        matrix: [[T::zero(), T::from_real(1.0)], [T::from_real(-b), a]],
    })
}

/// `B_{2n} B_{2n-1}` at real energy `lambda`.
pub fn transfer_product_two_step(spec: &ModelSpec, lambda: f64, n: usize) -> Result<Mat2<f64>> {
    if n == 0 {
        return Err(Error::IndexOutOfWindow { n, lo: 1, hi: usize::MAX });
    }
    let odd = transfer_step(spec, lambda, 2 * n - 1)?;
    let even = transfer_step(spec, lambda, 2 * n)?;
    Ok(mat2_mul(&even.matrix, &odd.matrix))
}

fn power_exponent(spec: &ModelSpec) -> Result<f64> {
    match spec {
        ModelSpec::PowerModulated { alpha, .. } | ModelSpec::PowerPeriodic { alpha, .. } => Ok(*alpha),
        _ => Err(Error::InvalidModel(
            "discriminant needs a power-law weight model".into(),
        )),
    }
}

/// `V(n) = (2n)^α (B_{2n}B_{2n-1} + I)`.
pub fn rescaled_two_step(spec: &ModelSpec, lambda: f64, n: usize) -> Result<Mat2<f64>> {
    let alpha = power_exponent(spec)?;
    let p = transfer_product_two_step(spec, lambda, n)?;
    let s = (2.0 * n as f64).powf(alpha);
    Ok([
        [s * (p[0][0] + 1.0), s * p[0][1]],
        [s * p[1][0], s * (p[1][1] + 1.0)],
    ])
}

/// `(tr V)² - 4 det V` for `V` from [`rescaled_two_step`].
pub fn discriminant_v(spec: &ModelSpec, lambda: f64, n: usize) -> Result<f64> {
    let v = rescaled_two_step(spec, lambda, n)?;
    let tr = v[0][0] + v[1][1];
    Ok(tr * tr - 4.0 * mat2_det(&v))
}

/// Large-`n` limit of the discriminant for the power-modulated model.
///
/// To leading order `V(n) ≈ [[cφ₋, λ], [-λ, -cφ₊]]` with `c = c₁ - c₂`,
/// `φ₋ = φ((2n-2)^γ)`, `φ₊ = φ((2n-1)^γ)`, so the discriminant tends to
/// `-4[λ² - c² φ((2n-1)^γ) φ((2n)^γ)]` (consecutive phases agree in the
/// limit). It is negative exactly when `|λ| > |c| φ`.
pub fn discriminant_limit(spec: &ModelSpec, lambda: f64, n: usize) -> Result<f64> {
    let ModelSpec::PowerModulated {
        gamma,
        period,
        c1,
        c2,
        phi,
        ..
    } = spec
    else {
        return Err(Error::InvalidModel("limit formula needs the power-modulated model".into()));
    };
    let f = |m: usize| phi.eval((m as f64).powf(*gamma), *period);
    Ok(-4.0 * (lambda * lambda - (c2 - c1).powi(2) * f(2 * n - 1) * f(2 * n)))
}

/// Regressor for [`fit_asymptotics`], evaluated at the sequence index `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    Constant,
    LogN,
    SqrtN,
    Linear,
    /// Explicit values aligned with the fitted sequence (index `n` ↦ `values[n]`).
    Sampled { name: String, values: Vec<f64> },
}

impl Basis {
    /// `Σ_{k=1}^{n-1} λ_k^{-power}` for `n = 0..=n_max`.
    pub fn carleman(spec: &ModelSpec, power: SumPower, n_max: usize) -> Result<Basis> {
        let name = match power {
            SumPower::One => "sum_inv_weight",
            SumPower::Half => "sum_inv_sqrt_weight",
        };
        Ok(Basis::Sampled {
            name: name.into(),
            values: carleman_prefix(spec, n_max, power, 1)?,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Basis::Constant => "one",
            Basis::LogN => "ln_n",
            Basis::SqrtN => "sqrt_n",
            Basis::Linear => "n",
            Basis::Sampled { name, .. } => name,
        }
    }

    fn eval(&self, n: usize) -> f64 {
        let x = n as f64;
        match self {
            Basis::Constant => 1.0,
            Basis::LogN => x.ln(),
            Basis::SqrtN => x.sqrt(),
            Basis::Linear => x,
            Basis::Sampled { values, .. } => values[n],
        }
    }
}

/// Least-squares model `ln values(n) ≈ Σ_j coefficients[j] · basis_j(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub basis: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inclusive index range.
    pub window: (usize, usize),
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
}

impl AsymptoticFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.basis
            .iter()
            .position(|b| b == name)
            .map(|i| self.coefficients[i])
    }
}

/// Minimum ratio of smallest to largest triangular pivot before a basis is
/// considered degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// Fits `ln values[n]` for `n` in the inclusive `window` on `basis`.
pub fn fit_asymptotics(values: &[f64], window: (usize, usize), basis: &[Basis]) -> Result<AsymptoticFit> {
    let (lo, hi) = window;
    if hi >= values.len() || lo > hi {
        return Err(Error::IndexOutOfWindow {
            n: hi,
            lo: 0,
            hi: values.len().saturating_sub(1),
        });
    }
    let rows = hi - lo + 1;
    let need = 10 * basis.len();
    if basis.is_empty() || rows < need {
        return Err(Error::InsufficientWindow { len: rows, need: need.max(1) });
    }
    let mut y = DVector::zeros(rows);
    for (r, n) in (lo..=hi).enumerate() {
        let v = values[n];
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidModel(format!("fit needs positive finite values, got {v} at {n}")));
        }
        y[r] = v.ln();
    }
    let mut a = DMatrix::from_fn(rows, basis.len(), |r, c| basis[c].eval(lo + r));
    let norms: Vec<f64> = (0..basis.len()).map(|c| a.column(c).norm()).collect();
    for (c, norm) in norms.iter().enumerate() {
        if *norm == 0.0 {
            return Err(Error::DegenerateBasis(0.0));
        }
        a.column_mut(c).unscale_mut(*norm);
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let pivots: Vec<f64> = (0..basis.len()).map(|i| r[(i, i)].abs()).collect();
    let big = pivots.iter().cloned().fold(0.0, f64::max);
    let small = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if small <= DEGENERACY_RATIO * big {
        return Err(Error::DegenerateBasis(small / big));
    }
    let qty = qr.q().transpose() * &y;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::DegenerateBasis(0.0))?;
    let fitted = &a * &scaled;
    let residual = ((&y - fitted).norm_squared() / rows as f64).sqrt();
    Ok(AsymptoticFit {
        basis: basis.iter().map(|b| b.name().to_string()).collect(),
        coefficients: scaled.iter().zip(&norms).map(|(c, n)| c / n).collect(),
        window,
        residual,
    })
}
