//! Exponential decay envelopes for resolvent entries `⟨(J - λ)⁻¹ e_1, e_n⟩`,
//! the constants they depend on, and checks against computed columns.
//!
//! All envelopes come from conjugating `J` with `φ = e^{-γρ}` where `ρ` is a
//! (possibly truncated) Carleman-type sum. The perturbation `φ⁻¹Jφ - J`
//! splits into a symmetric part of size `O(γ²)` and an antisymmetric part
//! of size `O(γ)`; the constants below bound both from the weight rule.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{carleman_prefix, truncate, ModelSpec, SumPower};
use crate::tridiag::{resolvent_column, ResolventColumn};

/// Region of the real line free of spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapWindow {
    /// Open gap `(r, s)`.
    FiniteGap { r: f64, s: f64 },
    /// `σ(J) ⊂ [d, ∞)`; energies below `d`.
    BelowBottom { d: f64 },
    /// `σ(J) ⊂ (-∞, d]`; energies above `d`.
    AboveTop { d: f64 },
}

impl GapWindow {
    pub fn finite(r: f64, s: f64) -> Result<Self> {
        if !(r < s) {
            return Err(Error::InvalidModel(format!("gap needs r < s, got ({r}, {s})")));
        }
        Ok(GapWindow::FiniteGap { r, s })
    }

    pub fn contains(&self, lambda: f64) -> bool {
        match *self {
            GapWindow::FiniteGap { r, s } => r < lambda && lambda < s,
            GapWindow::BelowBottom { d } => lambda < d,
            GapWindow::AboveTop { d } => lambda > d,
        }
    }

    /// Distance from `lambda` to the excluded spectrum.
    pub fn distance(&self, lambda: f64) -> f64 {
        match *self {
            GapWindow::FiniteGap { r, s } => (lambda - r).min(s - lambda),
            GapWindow::BelowBottom { d } => d - lambda,
            GapWindow::AboveTop { d } => lambda - d,
        }
    }

    /// `w(λ) = (λ - r)(s - λ)` for a finite gap, the plain distance otherwise.
    pub fn width_factor(&self, lambda: f64) -> f64 {
        match *self {
            GapWindow::FiniteGap { r, s } => (lambda - r) * (s - lambda),
            _ => self.distance(lambda),
        }
    }

    pub(crate) fn check(&self, lambda: f64) -> Result<()> {
        if self.contains(lambda) {
            Ok(())
        } else {
            Err(Error::OutsideGap { lambda })
        }
    }
}

/// Exponential weight `φ = e^{-γρ}` with
/// `ρ(n) = Σ_{k=max(start,1)}^{min(n,cap)-1} λ_k^{-power}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugationWeight {
    pub gamma: f64,
    /// First index contributing to `ρ`; 0 and 1 both mean "from the start".
    pub start: usize,
    /// `ρ` stays constant from this index on.
    pub cap: Option<usize>,
    pub power: SumPower,
}

impl ConjugationWeight {
    pub fn carleman(gamma: f64) -> Self {
        ConjugationWeight {
            gamma,
            start: 0,
            cap: None,
            power: SumPower::One,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidModel(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if let Some(cap) = self.cap {
            if cap <= self.start {
                return Err(Error::InvalidModel("weight cap must exceed its start".into()));
            }
        }
        Ok(())
    }

    /// Whether `ρ(n+1) - ρ(n)` is non-zero.
    fn active(&self, n: usize) -> bool {
        n >= self.start.max(1) && self.cap.is_none_or(|cap| n < cap)
    }

    /// `γ (ρ(n+1) - ρ(n))` given `λ_n`.
    fn step(&self, n: usize, weight: f64) -> f64 {
        if self.active(n) {
            self.gamma * self.power.apply(weight)
        } else {
            0.0
        }
    }
}

/// Off-diagonal entries `(a_n, b_n)` of `φ⁻¹Jφ - J`.
pub fn conjugation_entries(spec: &ModelSpec, weight: &ConjugationWeight, n: usize) -> Result<(f64, f64)> {
    let lam = spec.weight(n)?;
    let x = weight.step(n, lam);
    Ok((lam * (-x).exp_m1(), lam * x.exp_m1()))
}

/// Certified norm bounds for the symmetric and antisymmetric parts of the
/// conjugation perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    /// `‖Re A(γ)‖ ≤ c1 γ²`
    pub c1: f64,
    /// `‖Im A(γ)‖ ≤ c2 γ`
    pub c2: f64,
    /// Bound on `‖Re A(γ)‖` at the certified `γ`.
    pub eps_n: f64,
    /// Bound on `‖Im A(γ)‖` at the certified `γ`.
    pub delta_n: f64,
    /// `(inf_{p ≥ start} λ_p)⁻¹`
    pub r_n: f64,
    pub gamma: f64,
    pub scan_n: usize,
}

/// `λ (cosh x - 1)` and `λ sinh x` for `x = γ λ^{-power}`.
fn psi_pair(lam: f64, gamma: f64, power: SumPower) -> (f64, f64) {
    let x = gamma * power.apply(lam);
    let half = (0.5 * x).sinh();
    (2.0 * lam * half * half, lam * x.sinh())
}

/// Certifies `ε(N) = 2 sup ψ₁`, `δ(N) = 2 sup(-ψ₂)` over the support of the
/// weight, sampling up to `scan_n` and bounding the rest from the rule's
/// tail infimum.
pub fn certify_constants(spec: &ModelSpec, weight: &ConjugationWeight, scan_n: usize) -> Result<NormConstants> {
    weight.validate()?;
    let first = weight.start.max(1);
    let last = weight.cap.map_or(usize::MAX, |cap| cap - 1);
    let scan_end = scan_n.max(first).min(last);

    let mut sup1 = 0.0f64;
    let mut sup2 = 0.0f64;
    let mut inf_weight = f64::INFINITY;
    for p in first..=scan_end {
        let lam = spec.weight(p)?;
        inf_weight = inf_weight.min(lam);
        let (psi1, psi2) = psi_pair(lam, weight.gamma, weight.power);
        sup1 = sup1.max(psi1);
        sup2 = sup2.max(psi2);
    }

    // Beyond the scan both ψ₁ and (for the first power) -ψ₂ decrease in λ,
    // so the tail infimum bounds them.
    let tail_low = spec.tail_inf(scan_end + 1);
    if !(tail_low > 0.0) {
        return Err(Error::UnverifiedTail { scan_n: scan_end });
    }
    inf_weight = inf_weight.min(tail_low);
    if scan_end < last {
        let (psi1, psi2) = psi_pair(tail_low, weight.gamma, weight.power);
        sup1 = sup1.max(psi1);
        match weight.power {
            SumPower::One => sup2 = sup2.max(psi2),
            SumPower::Half => {
                // -ψ₂ grows like γ√λ here, so an uncapped weight is unbounded
                sup2 = if last == usize::MAX {
                    f64::INFINITY
                } else {
                    let top = spec.weight_upper_bound(scan_end + 1, last);
                    sup2.max(psi_pair(top, weight.gamma, weight.power).1)
                };
            }
        }
    }

    let eps_n = 2.0 * sup1;
    let delta_n = 2.0 * sup2;
    let gamma = weight.gamma;
    let (c1, c2) = if gamma == 0.0 {
        (0.0, 0.0)
    } else {
        (eps_n / (gamma * gamma), delta_n / gamma)
    };
    Ok(NormConstants {
        c1,
        c2,
        eps_n,
        delta_n,
        r_n: 1.0 / inf_weight,
        gamma,
        scan_n: scan_end,
    })
}

/// Constants valid uniformly for every energy in `[lambda_lo, lambda_hi]`
/// inside `window`, certified at the largest `γ` the envelope can use there.
pub fn certify_for_window(
    spec: &ModelSpec,
    window: &GapWindow,
    lambda_lo: f64,
    lambda_hi: f64,
    scan_n: usize,
) -> Result<NormConstants> {
    window.check(lambda_lo)?;
    window.check(lambda_hi)?;
    let gamma_max = match *window {
        // c2 ≥ 2 forces η ≤ 1/8, and √w ≤ (s - r)/2.
        GapWindow::FiniteGap { r, s } => (s - r) / 16.0,
        GapWindow::BelowBottom { .. } | GapWindow::AboveTop { .. } => {
            // c1 ≥ r_1, so γ = √(dist / 2c1) ≤ √(dist / 2r_1).
            let r_one = certify_constants(spec, &ConjugationWeight::carleman(0.0), scan_n)?.r_n;
            let dist = window.distance(lambda_lo).max(window.distance(lambda_hi));
            (dist / (2.0 * r_one)).sqrt()
        }
    };
    certify_constants(spec, &ConjugationWeight::carleman(gamma_max), scan_n)
}

/// Rate `η` used by the first-order envelope.
pub fn eta_thm1(window: &GapWindow, constants: &NormConstants) -> f64 {
    match *window {
        GapWindow::FiniteGap { r, s } => {
            (1.0 / (4.0 * constants.c2)).min(1.0 / (2.0 * constants.c1 * (s - r)).sqrt())
        }
        _ => 1.0 / (2.0 * constants.c1).sqrt(),
    }
}

/// Rate `η'` used by the two-set envelope with complex energy.
pub fn eta_thm4(window: &GapWindow, constants: &NormConstants) -> f64 {
    match *window {
        GapWindow::FiniteGap { r, s } => {
            (1.0 / (8.0 * constants.c2)).min(1.0 / (2.0 * constants.c1 * (s - r)).sqrt())
        }
        _ => eta_thm1(window, constants),
    }
}

/// `4 max{(λ-r)⁻¹, (s-λ)⁻¹} exp(-η √w ρ_n)` in a finite gap, or
/// `4 dist⁻¹ exp(-η √dist ρ_n)` next to a half-line spectrum, where
/// `ρ_n = Σ_{k=1}^{n-1} 1/λ_k`.
pub fn envelope_thm1(window: &GapWindow, constants: &NormConstants, lambda: f64, rho_n: f64) -> Result<f64> {
    window.check(lambda)?;
    let eta = eta_thm1(window, constants);
    let w = window.width_factor(lambda);
    Ok(4.0 / window.distance(lambda) * (-eta * w.sqrt() * rho_n).exp())
}

/// `(s-r) / (ε w) · exp(-(1/2 - ε) √w Σ_{k=N}^{n-1} 1/λ_k)`.
pub fn envelope_thm2(window: &GapWindow, lambda: f64, eps: f64, sum_n: f64) -> Result<f64> {
    let GapWindow::FiniteGap { r, s } = *window else {
        return Err(Error::InvalidModel("growing-weight envelope needs a finite gap".into()));
    };
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::BadEpsilon(eps));
    }
    window.check(lambda)?;
    let w = window.width_factor(lambda);
    Ok((s - r) / (eps * w) * (-(0.5 - eps) * w.sqrt() * sum_n).exp())
}

/// `[(d - Re λ) ε]⁻¹ exp(-(1 - ε) √(d - Re λ) Σ_{k=N}^{n-1} λ_k^{-1/2})`.
pub fn envelope_thm3(d: f64, lambda: num_complex::Complex64, eps: f64, sum_sqrt_n: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadEpsilon(eps));
    }
    if !(lambda.re < d) {
        return Err(Error::OutsideHalfLine { re: lambda.re, d });
    }
    let dist = d - lambda.re;
    Ok(1.0 / (dist * eps) * (-(1.0 - eps) * dist.sqrt() * sum_sqrt_n).exp())
}

/// Two-set envelope at energy `λ + iδ`; `sum_ba = Σ_{k=max B}^{min A - 1} 1/λ_k`.
pub fn envelope_thm4(
    window: &GapWindow,
    constants: &NormConstants,
    lambda: f64,
    delta: f64,
    sum_ba: f64,
) -> Result<f64> {
    window.check(lambda)?;
    let GapWindow::FiniteGap { .. } = *window else {
        return Err(Error::InvalidModel("two-set envelope needs a finite gap".into()));
    };
    let w = window.width_factor(lambda);
    let bound = w.sqrt() / 8.0;
    if delta.abs() > bound {
        return Err(Error::DeltaTooLarge { delta, bound });
    }
    let eta = eta_thm4(window, constants);
    Ok(4.0 / window.distance(lambda) * (-eta * w.sqrt() * sum_ba).exp())
}

const NOT_UNBOUNDED_NEAR: usize = 1_000;
const NOT_UNBOUNDED_FAR: usize = 1_000_000_000_000;
const SCAN_LIMIT: usize = 1 << 26;

fn check_unbounded(spec: &ModelSpec) -> Result<()> {
    let near = spec.tail_inf(NOT_UNBOUNDED_NEAR);
    let far = spec.tail_inf(NOT_UNBOUNDED_FAR);
    if far > 2.0 * near.max(1.0) {
        Ok(())
    } else {
        Err(Error::NotUnbounded { tail_inf: far })
    }
}

/// Smallest `N` with `inf_{p ≥ N} λ_p ≥ threshold`, combining sampled suffix
/// minima with the rule's tail infimum.
fn first_index_with_tail_above(spec: &ModelSpec, threshold: f64) -> Result<usize> {
    check_unbounded(spec)?;
    let mut horizon = 1024usize;
    loop {
        let mut suffix_min = spec.tail_inf(horizon + 1);
        let mut best = None;
        for n in (1..=horizon).rev() {
            suffix_min = suffix_min.min(spec.weight(n)?);
            if suffix_min >= threshold {
                best = Some(n);
            } else {
                break;
            }
        }
        if let Some(n) = best {
            return Ok(n);
        }
        if spec.tail_inf(horizon + 1) >= threshold {
            return Ok(horizon + 1);
        }
        if horizon >= SCAN_LIMIT {
            return Err(Error::NotUnbounded {
                tail_inf: spec.tail_inf(horizon + 1),
            });
        }
        horizon *= 2;
    }
}

/// Outcome of choosing the start index for the growing-weight envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm2Choice {
    pub n: usize,
    /// Constant `C₃` in `d₊d₋ - β² ≥ w (4ε - 4ε² - C₃ r(N))`.
    pub c3: f64,
    pub r_n: f64,
}

/// `C₃` for the finite gap `(r, s)`, valid for every `N` (uses `r(1)`).
///
/// With `γ = (1/2 - ε)√w` and `x = γ/λ_p ≤ x₀ = (s-r) r(1) / 4`:
/// `‖Re A‖ ≤ g w r(N) / 4` where `g = 2(cosh x₀ - 1)/x₀²`, and
/// `β² ≤ (1-2ε)² w (1 + K' r(N)²)` where `K' = (h² - 1)(s-r)²/(16 x₀²)`,
/// `h = sinh x₀ / x₀`. Expanding `d₊d₋ - β²` then gives
/// `C₃ = g (s-r)/4 + K' r(1)`.
pub fn thm2_c3(spec: &ModelSpec, window: &GapWindow, scan_n: usize) -> Result<f64> {
    let GapWindow::FiniteGap { r, s } = *window else {
        return Err(Error::InvalidModel("growing-weight envelope needs a finite gap".into()));
    };
    let r_one = certify_constants(spec, &ConjugationWeight::carleman(0.0), scan_n)?.r_n;
    let x0 = (s - r) * r_one / 4.0;
    let (g, k_prime) = if x0 < 1e-4 {
        // series limits: g → 1, (h² - 1)/x² → 1/3
        (1.0, (s - r).powi(2) / 48.0)
    } else {
        let h = x0.sinh() / x0;
        (
            2.0 * (x0.cosh() - 1.0) / (x0 * x0),
            (h * h - 1.0) * (s - r).powi(2) / (16.0 * x0 * x0),
        )
    };
    Ok(g * (s - r) / 4.0 + k_prime * r_one)
}

/// Smallest `N` with `r(N) ≤ min(4ε², 3ε - 4ε²) / C₃` for an explicit `C₃`.
pub fn pick_n_thm2_with_c3(spec: &ModelSpec, eps: f64, c3: f64) -> Result<Thm2Choice> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::BadEpsilon(eps));
    }
    let allowance = (4.0 * eps * eps).min(3.0 * eps - 4.0 * eps * eps);
    let threshold = c3 / allowance;
    let n = first_index_with_tail_above(spec, threshold)?;
    let r_n = 1.0 / suffix_inf(spec, n)?;
    Ok(Thm2Choice { n, c3, r_n })
}

/// Start index for [`envelope_thm2`] with a certified `C₃`.
pub fn pick_n_thm2(spec: &ModelSpec, window: &GapWindow, eps: f64) -> Result<Thm2Choice> {
    check_unbounded(spec)?;
    let c3 = thm2_c3(spec, window, 4096)?;
    pick_n_thm2_with_c3(spec, eps, c3)
}

/// `inf_{p ≥ n} λ_p` bounded from below via a short scan plus the tail rule.
fn suffix_inf(spec: &ModelSpec, n: usize) -> Result<f64> {
    let horizon = n + 4096;
    let mut low = spec.tail_inf(horizon + 1);
    for p in n..=horizon {
        low = low.min(spec.weight(p)?);
    }
    Ok(low)
}

/// Smallest `N` with `inf_{n≥N} λ_n ≥ 1` and
/// `2 (inf_{n≥N} λ_n)⁻¹ exp((1-ε)²(d - Re λ)) ≤ ε`.
pub fn pick_n_thm3(spec: &ModelSpec, d: f64, lambda: num_complex::Complex64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadEpsilon(eps));
    }
    if !(lambda.re < d) {
        return Err(Error::OutsideHalfLine { re: lambda.re, d });
    }
    let dist = d - lambda.re;
    let threshold = (2.0 * ((1.0 - eps).powi(2) * dist).exp() / eps).max(1.0);
    first_index_with_tail_above(spec, threshold)
}

/// Which inverse-norm bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaMode {
    /// `2 max{1/d₊, 1/d₋}` for `|β| ≤ √(d₊d₋)/2`.
    L1,
    /// `[Δ₊ - (Δ₊² + β² - d₊d₋)^{1/2}]⁻¹` for `|β| < √(d₊d₋)`.
    L2,
}

/// Bound on `‖(T + iβS)⁻¹‖` for self-adjoint `T` with spectral distances
/// `d₊`, `d₋` from zero on either side and `‖S‖ ≤ 1`. An infinite distance
/// means no spectrum on that side; the bound is then the limit of the
/// finite formula and `β` is unrestricted.
pub fn lemma_inverse_bound(d_plus: f64, d_minus: f64, beta: f64, mode: LemmaMode) -> Result<f64> {
    if !(d_plus > 0.0 && d_minus > 0.0) {
        return Err(Error::InvalidModel("spectral distances must be positive".into()));
    }
    let one_sided = d_plus.is_infinite() || d_minus.is_infinite();
    if d_plus.is_infinite() && d_minus.is_infinite() {
        return Err(Error::InvalidModel("at least one spectral distance must be finite".into()));
    }
    let geo = (d_plus * d_minus).sqrt();
    match mode {
        LemmaMode::L1 => {
            if !one_sided && beta.abs() > 0.5 * geo {
                return Err(Error::BetaTooLarge {
                    beta,
                    bound: 0.5 * geo,
                });
            }
            Ok(2.0 * (1.0 / d_plus).max(1.0 / d_minus))
        }
        LemmaMode::L2 => {
            if one_sided {
                return Ok(1.0 / d_plus.min(d_minus));
            }
            if beta.abs() >= geo {
                return Err(Error::BetaTooLarge { beta, bound: geo });
            }
            // rationalized to avoid cancellation in Δ₊ - √(Δ₋² + β²)
            let sum = 0.5 * (d_plus + d_minus);
            let diff = 0.5 * (d_plus - d_minus);
            Ok((sum + diff.hypot(beta)) / (d_plus * d_minus - beta * beta))
        }
    }
}

/// Indices where a computed column exceeds its envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// `(n, |column(n)|, envelope(n))` for every violation.
    pub violations: Vec<(usize, f64, f64)>,
    pub checked: usize,
    /// Largest `|column(n)| / envelope(n)` over the checked range.
    pub worst_ratio: f64,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative slack allowed when comparing a column with its envelope.
pub const ENVELOPE_SLACK: f64 = 1e-6;

/// Compares `|column(n)|` with `envelope` (aligned with `column.values`),
/// skipping the last `skirt` entries.
pub fn verify_envelope(column: &ResolventColumn, envelope: &[f64], skirt: usize) -> EnvelopeReport {
    let checked = column.values.len().saturating_sub(skirt).min(envelope.len());
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (i, (v, &env)) in column.values.iter().zip(envelope).take(checked).enumerate() {
        let value = v.norm();
        if value > env * (1.0 + ENVELOPE_SLACK) {
            violations.push((column.lo + i, value, env));
        }
        let ratio = if env > 0.0 {
            value / env
        } else if value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst_ratio = worst_ratio.max(ratio);
    }
    EnvelopeReport {
        violations,
        checked,
        worst_ratio,
    }
}

/// One energy of a first-order envelope check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCheck {
    pub lambda: f64,
    pub column: ResolventColumn,
    /// Envelope aligned with `column.values`.
    pub envelope: Vec<f64>,
    pub report: EnvelopeReport,
}

/// Compares the `[1, n]` resolvent column at every real `λ` with the
/// first-order envelope, using constants certified once for the whole
/// energy range.
pub fn bounds_check(
    spec: &ModelSpec,
    window: &GapWindow,
    lambdas: &[f64],
    n: usize,
    skirt: usize,
    scan_n: usize,
) -> Result<(NormConstants, Vec<BoundsCheck>)> {
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= hi) {
        return Err(Error::InvalidModel("empty energy grid".into()));
    }
    let constants = certify_for_window(spec, window, lo, hi, scan_n)?;
    let slice = truncate(spec, 1, n)?;
    let rho = carleman_prefix(spec, n, SumPower::One, 1)?;
    let checks = lambdas
        .iter()
        .map(|&lambda| {
            let column = resolvent_column(&slice, Complex64::new(lambda, 0.0))?;
            let envelope = (1..=n)
                .map(|m| envelope_thm1(window, &constants, lambda, rho[m]))
                .collect::<Result<Vec<_>>>()?;
            let report = verify_envelope(&column, &envelope, skirt);
            Ok(BoundsCheck {
                lambda,
                column,
                envelope,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((constants, checks))
}
