//! Jacobi operators on the half-line given by evaluable weight and diagonal
//! rules.
//!
//! An operator acts as
//!
//! ```text
//! (J u)(n) = λ_{n-1} u(n-1) + q_n u(n) + λ_n u(n+1),   n ≥ 1,
//! ```
//!
//! with the convention `λ_0 = 1`. A [`ModelSpec`] is a pure rule: sampling it
//! at `n` is deterministic and never caches, so specs are freely shared
//! across threads.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::barriers::BarrierLayout;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Periodic modulation profile for [`ModelSpec::PowerModulated`].
///
/// Every variant is `C²`, periodic with the model's period, takes values in
/// `[0, 1]` and attains both 0 (at phase 0) and 1 (at half period).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiRule {
    /// `(1 - cos(2πx/T)) / 2`
    #[default]
    RaisedCosine,
    /// `((1 - cos(2πx/T)) / 2)^power`
    RaisedCosinePower { power: u32 },
}

impl PhiRule {
    pub fn eval(&self, x: f64, period: f64) -> f64 {
        let base = 0.5 * (1.0 - (2.0 * PI * x / period).cos());
        match *self {
            PhiRule::RaisedCosine => base,
            PhiRule::RaisedCosinePower { power } => base.powi(power as i32),
        }
    }

    /// Phase in `[0, T)` where the profile vanishes.
    pub fn zero_phase(&self, _period: f64) -> f64 {
        0.0
    }

    /// Phase in `[0, T)` where the profile reaches 1.
    pub fn peak_phase(&self, period: f64) -> f64 {
        0.5 * period
    }
}

/// Rule-based description of a Jacobi operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `λ_n = lambda`, `q_n = q`.
    Constant { lambda: f64, q: f64 },
    /// `λ_n = n + c_n` with two-periodic `c_n = (c1, c2, c1, ...)`, `q_n = 0`.
    Example1 { c1: f64, c2: f64 },
    /// `λ_n = n`, `q_n = -2n`.
    Example2,
    /// `λ_n = n^alpha + c_n φ(n^gamma)`, zero diagonal.
    PowerModulated {
        alpha: f64,
        gamma: f64,
        period: f64,
        c1: f64,
        c2: f64,
        #[serde(default)]
        phi: PhiRule,
    },
    /// `λ_n = n^alpha + c_n`, zero diagonal. With `c1 = c2 = 0` this is the
    /// pure power operator.
    PowerPeriodic { alpha: f64, c1: f64, c2: f64 },
    /// `base` on every matching region of `layout`, `inside` elsewhere.
    BarrierComposite {
        base: Box<ModelSpec>,
        layout: BarrierLayout,
        inside: Box<ModelSpec>,
    },
    /// Explicit leading entries (`weights[i] = λ_{i+1}`, `diag[i] = q_{i+1}`)
    /// followed by `tail` once a table runs out.
    Table {
        weights: Vec<f64>,
        diag: Vec<f64>,
        tail: Box<ModelSpec>,
    },
    /// `base + coupling · ⟨·, e_1⟩ e_1`.
    RankOne { base: Box<ModelSpec>, coupling: f64 },
    /// Unitarily equivalent copy of `-base`: same weights, negated diagonal.
    Reflected { base: Box<ModelSpec> },
}

fn two_periodic(n: usize, c1: f64, c2: f64) -> f64 {
    if n % 2 == 1 {
        c1
    } else {
        c2
    }
}

impl ModelSpec {
    pub fn constant(lambda: f64, q: f64) -> Self {
        ModelSpec::Constant { lambda, q }
    }

    pub fn free() -> Self {
        ModelSpec::Constant { lambda: 1.0, q: 0.0 }
    }

    pub fn example1(c1: f64, c2: f64) -> Self {
        ModelSpec::Example1 { c1, c2 }
    }

    /// Power-modulated model with the raised-cosine profile.
    pub fn power_modulated(alpha: f64, gamma: f64, period: f64, c1: f64, c2: f64) -> Self {
        ModelSpec::PowerModulated {
            alpha,
            gamma,
            period,
            c1,
            c2,
            phi: PhiRule::RaisedCosine,
        }
    }

    /// Weight rule without positivity check. `n = 0` gives the convention 1.
    fn raw_weight(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let x = n as f64;
        match self {
            ModelSpec::Constant { lambda, .. } => *lambda,
            ModelSpec::Example1 { c1, c2 } => x + two_periodic(n, *c1, *c2),
            ModelSpec::Example2 => x,
            ModelSpec::PowerModulated {
                alpha,
                gamma,
                period,
                c1,
                c2,
                phi,
            } => x.powf(*alpha) + two_periodic(n, *c1, *c2) * phi.eval(x.powf(*gamma), *period),
            ModelSpec::PowerPeriodic { alpha, c1, c2 } => x.powf(*alpha) + two_periodic(n, *c1, *c2),
            ModelSpec::BarrierComposite {
                base,
                layout,
                inside,
            } => {
                if layout.in_matching_region(n) {
                    base.raw_weight(n)
                } else {
                    inside.raw_weight(n)
                }
            }
            ModelSpec::Table { weights, tail, .. } => match weights.get(n - 1) {
                Some(w) => *w,
                None => tail.raw_weight(n),
            },
            ModelSpec::RankOne { base, .. } | ModelSpec::Reflected { base } => base.raw_weight(n),
        }
    }

    /// `λ_n`, with `λ_0 = 1`.
    pub fn weight(&self, n: usize) -> Result<f64> {
        let value = self.raw_weight(n);
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonPositiveWeight { n, value })
        }
    }

    /// `q_n`, with `q_0 = 0` by convention.
    pub fn diag(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            ModelSpec::Constant { q, .. } => *q,
            ModelSpec::Example2 => -2.0 * n as f64,
            ModelSpec::Example1 { .. }
            | ModelSpec::PowerModulated { .. }
            | ModelSpec::PowerPeriodic { .. } => 0.0,
            ModelSpec::BarrierComposite {
                base,
                layout,
                inside,
            } => {
                if layout.in_matching_region(n) {
                    base.diag(n)
                } else {
                    inside.diag(n)
                }
            }
            ModelSpec::Table { diag, tail, .. } => match diag.get(n - 1) {
                Some(q) => *q,
                None => tail.diag(n),
            },
            ModelSpec::RankOne { base, coupling } => {
                if n == 1 {
                    base.diag(1) + coupling
                } else {
                    base.diag(n)
                }
            }
            ModelSpec::Reflected { base } => -base.diag(n),
        }
    }

    /// `(λ_n, q_n)`.
    pub fn sample(&self, n: usize) -> Result<(f64, f64)> {
        Ok((self.weight(n)?, self.diag(n)))
    }

    /// Checks the parameter invariants of every variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidModel(msg.to_string()));
        match self {
            ModelSpec::Constant { lambda, q } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return bad("constant weight must be positive and finite");
                }
                if !q.is_finite() {
                    return bad("constant diagonal must be finite");
                }
            }
            ModelSpec::Example1 { c1, c2 } => {
                if c1 == c2 {
                    return bad("example1 requires c1 != c2");
                }
                if !(1.0 + c1 > 0.0 && 2.0 + c2 > 0.0) {
                    return bad("example1 requires n + c_n > 0 for all n");
                }
            }
            ModelSpec::Example2 => {}
            ModelSpec::PowerModulated {
                alpha,
                gamma,
                period,
                c1,
                c2,
                phi,
            } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad("power_modulated requires 0 < alpha < 1");
                }
                if !(*gamma > 0.0 && *gamma < (1.0 - alpha) / 2.0) {
                    return bad("power_modulated requires 0 < gamma < (1 - alpha) / 2");
                }
                if !(*c1 > 0.0 && *c2 > 0.0) || c1 == c2 {
                    return bad("power_modulated requires c1, c2 > 0 and c1 != c2");
                }
                if !(*period > 0.0 && period.is_finite()) {
                    return bad("power_modulated requires a positive period");
                }
                if let PhiRule::RaisedCosinePower { power } = phi {
                    if *power == 0 {
                        return bad("phi power must be at least 1");
                    }
                }
            }
            ModelSpec::PowerPeriodic { alpha, c1, c2 } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return bad("power_periodic requires 0 < alpha <= 1");
                }
                if !(1.0 + c1 > 0.0 && 2f64.powf(*alpha) + c2 > 0.0) {
                    return bad("power_periodic weights must be positive");
                }
            }
            ModelSpec::BarrierComposite {
                base,
                layout,
                inside,
            } => {
                base.validate()?;
                inside.validate()?;
                layout.validate()?;
            }
            ModelSpec::Table {
                weights,
                diag,
                tail,
            } => {
                if let Some((i, w)) = weights
                    .iter()
                    .enumerate()
                    .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
                {
                    return Err(Error::NonPositiveWeight { n: i + 1, value: *w });
                }
                if diag.iter().any(|q| !q.is_finite()) {
                    return bad("table diagonal must be finite");
                }
                tail.validate()?;
            }
            ModelSpec::RankOne { base, coupling } => {
                if !coupling.is_finite() {
                    return bad("rank-one coupling must be finite");
                }
                base.validate()?;
            }
            ModelSpec::Reflected { base } => base.validate()?,
        }
        Ok(())
    }

    /// Certified lower bound on `inf_{p ≥ n} λ_p`, derived from the rule
    /// rather than by sampling. May be non-positive when no useful bound
    /// exists that far out.
    pub fn tail_inf(&self, n: usize) -> f64 {
        let n = n.max(1);
        let x = n as f64;
        match self {
            ModelSpec::Constant { lambda, .. } => *lambda,
            ModelSpec::Example1 { c1, c2 } => x + c1.min(*c2),
            ModelSpec::Example2 => x,
            // φ ≥ 0 and c_n > 0
            ModelSpec::PowerModulated { alpha, .. } => x.powf(*alpha),
            ModelSpec::PowerPeriodic { alpha, c1, c2 } => x.powf(*alpha) + c1.min(*c2),
            ModelSpec::BarrierComposite { base, inside, .. } => base.tail_inf(n).min(inside.tail_inf(n)),
            ModelSpec::Table { weights, tail, .. } => {
                let tail_bound = tail.tail_inf(n.max(weights.len() + 1));
                weights
                    .iter()
                    .skip(n - 1)
                    .copied()
                    .fold(tail_bound, f64::min)
            }
            ModelSpec::RankOne { base, .. } | ModelSpec::Reflected { base } => base.tail_inf(n),
        }
    }

    /// Upper bound on `max_{lo ≤ p ≤ hi} λ_p` from the rule; exact for
    /// monotone rules, conservative otherwise.
    pub fn weight_upper_bound(&self, lo: usize, hi: usize) -> f64 {
        let top = hi.max(1) as f64;
        match self {
            ModelSpec::Constant { lambda, .. } => *lambda,
            ModelSpec::Example1 { c1, c2 } => top + c1.max(*c2),
            ModelSpec::Example2 => top,
            ModelSpec::PowerModulated { alpha, c1, c2, .. } => top.powf(*alpha) + c1.max(*c2),
            ModelSpec::PowerPeriodic { alpha, c1, c2 } => top.powf(*alpha) + c1.max(*c2),
            ModelSpec::BarrierComposite { base, inside, .. } => base
                .weight_upper_bound(lo, hi)
                .max(inside.weight_upper_bound(lo, hi)),
            ModelSpec::Table { weights, tail, .. } => {
                let table_max = (lo.max(1)..=hi.min(weights.len()))
                    .map(|n| weights[n - 1])
                    .fold(f64::NEG_INFINITY, f64::max);
                if hi > weights.len() {
                    table_max.max(tail.weight_upper_bound(lo.max(weights.len() + 1), hi))
                } else {
                    table_max
                }
            }
            ModelSpec::RankOne { base, .. } | ModelSpec::Reflected { base } => base.weight_upper_bound(lo, hi),
        }
    }

    /// Whether `q_n = 0` for every `n`, decided from the rule.
    pub fn has_zero_diagonal(&self) -> bool {
        match self {
            ModelSpec::Constant { q, .. } => *q == 0.0,
            ModelSpec::Example2 => false,
            ModelSpec::Example1 { .. }
            | ModelSpec::PowerModulated { .. }
            | ModelSpec::PowerPeriodic { .. } => true,
            ModelSpec::BarrierComposite { base, inside, .. } => {
                base.has_zero_diagonal() && inside.has_zero_diagonal()
            }
            ModelSpec::Table { diag, tail, .. } => {
                diag.iter().all(|q| *q == 0.0) && tail.has_zero_diagonal()
            }
            ModelSpec::RankOne { base, coupling } => *coupling == 0.0 && base.has_zero_diagonal(),
            ModelSpec::Reflected { base } => base.has_zero_diagonal(),
        }
    }

    /// `J + coupling · ⟨·, e_1⟩ e_1`; the zero coupling returns the spec as is.
    pub fn rank_one_perturb(&self, coupling: f64) -> ModelSpec {
        if coupling == 0.0 {
            return self.clone();
        }
        match self {
            ModelSpec::RankOne { base, coupling: c } => ModelSpec::RankOne {
                base: base.clone(),
                coupling: c + coupling,
            },
            _ => ModelSpec::RankOne {
                base: Box::new(self.clone()),
                coupling,
            },
        }
    }

    /// Sign-flip adapter: `U(-J)U` with `U = diag((-1)^n)`. Resolvent
    /// entries of the result at `-z` have the same modulus as those of `J`
    /// at `z`.
    pub fn reflected(&self) -> ModelSpec {
        match self {
            ModelSpec::Reflected { base } => (**base).clone(),
            _ => ModelSpec::Reflected {
                base: Box::new(self.clone()),
            },
        }
    }
}

/// `(λ_n, q_n)` for `n ≥ 0`.
pub fn sample_operator(spec: &ModelSpec, n: usize) -> Result<(f64, f64)> {
    spec.sample(n)
}

/// Exponent of a Carleman-type sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumPower {
    /// `Σ 1/λ_k`
    One,
    /// `Σ 1/√λ_k`
    Half,
}

impl SumPower {
    pub fn apply(self, weight: f64) -> f64 {
        match self {
            SumPower::One => 1.0 / weight,
            SumPower::Half => 1.0 / weight.sqrt(),
        }
    }
}

/// `Σ_{k=start}^{n-1} λ_k^{-power}`; zero when `n ≤ start`.
pub fn carleman_sum(spec: &ModelSpec, n: usize, power: SumPower, start: usize) -> Result<f64> {
    let start = start.max(1);
    let mut sum = 0.0;
    for k in start..n {
        sum += power.apply(spec.weight(k)?);
    }
    Ok(sum)
}

/// Running sums `out[n] = Σ_{k=start}^{n-1} λ_k^{-power}` for `n = 0..=n_max`.
pub fn carleman_prefix(spec: &ModelSpec, n_max: usize, power: SumPower, start: usize) -> Result<Vec<f64>> {
    let start = start.max(1);
    let mut out = vec![0.0; n_max + 1];
    let mut acc = 0.0;
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let k = n - 1;
        if k >= start {
            acc += power.apply(spec.weight(k)?);
        }
        *slot = acc;
    }
    Ok(out)
}

/// `λ_{n-1} u(n-1) + q_n u(n) + λ_n u(n+1)` for a sequence indexed from 0.
pub fn apply_operator<T: Scalar>(spec: &ModelSpec, u: &[T], n: usize) -> Result<T> {
    if n == 0 || n + 1 >= u.len() {
        return Err(Error::IndexOutOfWindow {
            n,
            lo: 1,
            hi: u.len().saturating_sub(2),
        });
    }
    let (lam_prev, lam) = (spec.weight(n - 1)?, spec.weight(n)?);
    Ok(u[n - 1] * lam_prev + u[n] * spec.diag(n) + u[n + 1] * lam)
}

/// Finite section `[lo, hi]` of `spec` with Dirichlet edges.
pub fn truncate(spec: &ModelSpec, lo: usize, hi: usize) -> Result<crate::tridiag::TridiagonalSlice> {
    if lo == 0 || lo > hi {
        return Err(Error::IndexOutOfWindow { n: lo, lo: 1, hi });
    }
    let diag = (lo..=hi).map(|n| spec.diag(n)).collect();
    let offdiag = (lo..hi).map(|n| spec.weight(n)).collect::<Result<Vec<_>>>()?;
    crate::tridiag::TridiagonalSlice::new(lo, diag, offdiag)
}

pub fn rank_one_perturb(spec: &ModelSpec, coupling: f64) -> ModelSpec {
    spec.rank_one_perturb(coupling)
}
