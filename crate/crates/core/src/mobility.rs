//! The power-modulated model with a mobility edge at `±c`, `c = |c₁ - c₂|`:
//! gap counting for the unmodulated operator, Weyl sequences at energies in
//! `(-c, c)` and the barrier layout feeding the summability criterion.

use serde::{Deserialize, Serialize};

use crate::barriers::{
    ak_bound, alpha_k, barrier_blocks, barrier_caps, bk_from_distances, block_distances, build_composite,
    criterion_log_term, criterion_partial_sum, BarrierLayout, BarrierRates, CriterionRow, CriterionSum,
};
use crate::envelopes::{certify_for_window, GapWindow, NormConstants};
use crate::error::{Error, Result};
use crate::model::{truncate, ModelSpec, PhiRule};
use crate::solutions::recurrence_extend;
use crate::tridiag::{eigs_in_window, kth_eigenvalue, sturm_count, SpectrumQuery};

/// Parameters of the power-modulated model, pulled out of a spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedParams {
    pub alpha: f64,
    pub gamma: f64,
    pub period: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi: PhiRule,
}

impl ModulatedParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match *spec {
            ModelSpec::PowerModulated {
                alpha,
                gamma,
                period,
                c1,
                c2,
                phi,
            } => Ok(ModulatedParams {
                alpha,
                gamma,
                period,
                c1,
                c2,
                phi,
            }),
            _ => Err(Error::InvalidModel("expected a power_modulated model".into())),
        }
    }

    /// `|c₁ - c₂|`
    pub fn edge(&self) -> f64 {
        (self.c1 - self.c2).abs()
    }

    /// The unmodulated operator `λ_n = n^α + c_n`.
    pub fn unmodulated(&self) -> ModelSpec {
        ModelSpec::PowerPeriodic {
            alpha: self.alpha,
            c1: self.c1,
            c2: self.c2,
        }
    }

    /// The pure power operator `λ_n = n^α`.
    pub fn pure_power(&self) -> ModelSpec {
        ModelSpec::PowerPeriodic {
            alpha: self.alpha,
            c1: 0.0,
            c2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapCount {
    pub n: usize,
    pub at_n: usize,
    pub at_2n: usize,
}

impl GapCount {
    pub fn stable(&self) -> bool {
        self.at_n == self.at_2n
    }
}

/// Eigenvalue count of the `[1, n]` and `[1, 2n]` sections of
/// `λ_n = n^α + c_n` in `(-c + margin, c - margin)`.
pub fn gap_count_j0(alpha: f64, c1: f64, c2: f64, n: usize, margin: f64) -> Result<GapCount> {
    let spec = ModelSpec::PowerPeriodic { alpha, c1, c2 };
    spec.validate()?;
    let c = (c1 - c2).abs();
    let (lo, hi) = (-c + margin, c - margin);
    let count = |size: usize| -> Result<usize> {
        if lo >= hi {
            return Ok(0);
        }
        let slice = truncate(&spec, 1, size)?;
        Ok(sturm_count(&slice, hi).saturating_sub(sturm_count(&slice, lo)))
    };
    Ok(GapCount {
        n,
        at_n: count(n)?,
        at_2n: count(2 * n)?,
    })
}

/// Tent-windowed Weyl sequence parameters for a zero of the modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylSequenceSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub period: f64,
    /// Phase with `φ(x₀) = 0`.
    pub x0: f64,
    /// Exponent shift in `ε_i = i^{(α+γ-1)/γ + δ}`.
    pub delta: f64,
    /// Exponent loss in the upper width bound `M n_i^{1-γ-ε}`.
    pub eps: f64,
    pub m: f64,
}

/// The `i`-th window `[n_i, n_i + Δ_i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylWindow {
    pub i: usize,
    pub n_i: usize,
    pub width: usize,
    pub eps_i: f64,
}

impl WeylWindow {
    /// `ñ_i = n_i + Δ_i/2`
    pub fn center(&self) -> usize {
        self.n_i + self.width / 2
    }

    /// `β_i = 2/Δ_i`
    pub fn beta(&self) -> f64 {
        2.0 / self.width as f64
    }

    pub fn end(&self) -> usize {
        self.n_i + self.width
    }
}

impl WeylSequenceSpec {
    /// `δ = (1-α-γ)/2γ`, `ε = (1-α-γ-γδ)/2`, `M = 4`.
    pub fn default_for(spec: &ModelSpec) -> Result<Self> {
        let p = ModulatedParams::from_spec(spec)?;
        let delta = 0.5 * (1.0 - p.alpha - p.gamma) / p.gamma;
        let eps = 0.5 * (1.0 - p.alpha - p.gamma - p.gamma * delta);
        let wspec = WeylSequenceSpec {
            alpha: p.alpha,
            gamma: p.gamma,
            period: p.period,
            x0: p.phi.zero_phase(p.period),
            delta,
            eps,
            m: 4.0,
        };
        wspec.validate()?;
        Ok(wspec)
    }

    pub fn validate(&self) -> Result<()> {
        let slack = 1.0 - self.alpha - self.gamma;
        if !(self.gamma > 0.0 && slack > 0.0) {
            return Err(Error::InvalidModel("need α + γ < 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < slack / self.gamma) {
            return Err(Error::InvalidModel(format!("δ = {} outside (0, (1-α-γ)/γ)", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps < slack - self.gamma * self.delta) {
            return Err(Error::InvalidModel(format!("ε = {} outside (0, 1-α-γ-γδ)", self.eps)));
        }
        if !(self.m > 0.0) {
            return Err(Error::InvalidModel("M must be positive".into()));
        }
        Ok(())
    }

    /// `n_i = ⌊(x₀ + iT)^{1/γ}⌋`, `Δ_i` the smallest even integer
    /// `≥ ε_i n_i^{1-γ}`, capped at `M n_i^{1-γ-ε}` and at least 2.
    pub fn window(&self, i: usize) -> WeylWindow {
        let x = (self.x0 + i as f64 * self.period).powf(1.0 / self.gamma);
        let n_i = (x.floor() as usize).max(1);
        let n = n_i as f64;
        let eps_i = (i as f64).powf((self.alpha + self.gamma - 1.0) / self.gamma + self.delta);
        let lower = eps_i * n.powf(1.0 - self.gamma);
        let upper = self.m * n.powf(1.0 - self.gamma - self.eps);
        let even_up = 2 * (lower / 2.0).ceil() as usize;
        let even_cap = 2 * (upper / 2.0).floor() as usize;
        WeylWindow {
            i,
            n_i,
            width: even_up.min(even_cap).max(2),
            eps_i,
        }
    }

    /// Windows for `i = 1, 2, ...` while `n_i + Δ_i ≤ n_max`.
    pub fn windows_up_to(&self, n_max: usize) -> Vec<WeylWindow> {
        (1..)
            .map(|i| self.window(i))
            .take_while(|w| w.end() <= n_max)
            .collect()
    }
}

/// Solution of `λ_{n-1}u_{n-1} + λ_n u_{n+1} = E u_n` for the pure power
/// operator with `u_0 = 0`, `u_1 = 1`, rescaled so that the mean of
/// `u_n² n^α` over `[n_max/2, n_max]` is one. `u[n]` holds `u_n`.
pub fn reference_solution(alpha: f64, energy: f64, n_max: usize) -> Result<Vec<f64>> {
    let spec = ModelSpec::PowerPeriodic {
        alpha,
        c1: 0.0,
        c2: 0.0,
    };
    let seq = recurrence_extend(&spec, energy, 0.0, 1.0, n_max)?;
    let mut u: Vec<f64> = (0..=n_max).map(|n| seq.value(n)).collect();
    let lo = (n_max / 2).max(1);
    let mean = (lo..=n_max)
        .map(|n| u[n] * u[n] * (n as f64).powf(alpha))
        .sum::<f64>()
        / (n_max - lo + 1) as f64;
    let scale = mean.sqrt().recip();
    u.iter_mut().for_each(|v| *v *= scale);
    Ok(u)
}

/// Tent-windowed copy of `u` on `[n_i, n_i + Δ_i]`; `values[j]` sits at
/// `n_i + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylVector {
    pub lo: usize,
    pub values: Vec<f64>,
}

impl WeylVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `v(n) = u_n (1 - β_i |n - ñ_i|)` on the window, zero elsewhere.
pub fn weyl_sequence(u: &[f64], window: &WeylWindow) -> Result<WeylVector> {
    if window.end() >= u.len() {
        return Err(Error::IndexOutOfWindow {
            n: window.end(),
            lo: 0,
            hi: u.len().saturating_sub(1),
        });
    }
    let center = window.center() as f64;
    let beta = window.beta();
    let values = (window.n_i..=window.end())
        .map(|n| u[n] * (1.0 - beta * (n as f64 - center).abs()))
        .collect();
    Ok(WeylVector {
        lo: window.n_i,
        values,
    })
}

/// `‖(J - E)v‖ / ‖v‖`, evaluated on the support of `v` and its neighbours.
pub fn weyl_quotient_of(spec: &ModelSpec, energy: f64, v: &WeylVector) -> Result<f64> {
    let len = v.values.len();
    let at = |n: usize| -> f64 {
        if n >= v.lo && n < v.lo + len {
            v.values[n - v.lo]
        } else {
            0.0
        }
    };
    let mut sq = 0.0;
    for n in v.lo.saturating_sub(1).max(1)..=v.lo + len {
        let r = spec.weight(n - 1)? * at(n - 1) + (spec.diag(n) - energy) * at(n) + spec.weight(n)? * at(n + 1);
        sq += r * r;
    }
    Ok(sq.sqrt() / v.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylQuotientRow {
    pub window: WeylWindow,
    pub norm_sq: f64,
    /// `‖v‖² / (Δ_i n_i^{-α})`
    pub norm_ratio: f64,
    pub quotient: f64,
}

/// Quotients for every window with `n_i + Δ_i ≤ n_max`, sharing one
/// reference solution.
pub fn weyl_quotients(spec: &ModelSpec, energy: f64, wspec: &WeylSequenceSpec, n_max: usize) -> Result<Vec<WeylQuotientRow>> {
    wspec.validate()?;
    let windows = wspec.windows_up_to(n_max);
    let u = reference_solution(wspec.alpha, energy, n_max + 1)?;
    windows
        .into_iter()
        .map(|window| {
            let v = weyl_sequence(&u, &window)?;
            let norm_sq = v.norm().powi(2);
            let model = window.width as f64 * (window.n_i as f64).powf(-wspec.alpha);
            Ok(WeylQuotientRow {
                window,
                norm_sq,
                norm_ratio: norm_sq / model,
                quotient: weyl_quotient_of(spec, energy, &v)?,
            })
        })
        .collect()
}

/// Quotient for the single window `i`.
pub fn weyl_quotient(spec: &ModelSpec, energy: f64, wspec: &WeylSequenceSpec, i: usize) -> Result<f64> {
    wspec.validate()?;
    let window = wspec.window(i);
    let u = reference_solution(wspec.alpha, energy, window.end() + 1)?;
    weyl_quotient_of(spec, energy, &weyl_sequence(&u, &window)?)
}

/// Number of sample points used to check the phase window.
const PHASE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedLayout {
    pub layout: BarrierLayout,
    /// Barrier operator: the modulated weights on matching regions and
    /// `n^α + c_n` elsewhere.
    pub j_eps: ModelSpec,
    /// Distance of the energy window from `±c`.
    pub delta_e: f64,
    /// Lower bound on `φ` over the phase window.
    pub threshold: f64,
    /// Phase index `k` of every barrier.
    pub phases: Vec<usize>,
}

/// Barriers centred at the integers closest to the middle of
/// `[(x₀ + kT - ε)^{1/γ}, (x₀ + kT + ε)^{1/γ}]` with half-length a quarter
/// of that interval, for `k = 1..=k_max`. Phases whose matching region
/// leaves the interval are skipped.
pub fn derive_barrier_layout(
    spec: &ModelSpec,
    window: (f64, f64),
    x0: f64,
    eps_phase: f64,
    k_max: usize,
) -> Result<DerivedLayout> {
    let p = ModulatedParams::from_spec(spec)?;
    let c = p.edge();
    let (lo_e, hi_e) = window;
    if !(-c < lo_e && lo_e <= hi_e && hi_e < c) {
        return Err(Error::OutsideGap {
            lambda: if lo_e <= -c { lo_e } else { hi_e },
        });
    }
    let delta_e = (lo_e + c).min(c - hi_e);
    let threshold = 1.0 - delta_e / (2.0 * p.c1.max(p.c2));
    for j in 0..=PHASE_SAMPLES {
        let x = x0 - eps_phase + 2.0 * eps_phase * j as f64 / PHASE_SAMPLES as f64;
        let value = p.phi.eval(x, p.period);
        if value < threshold {
            return Err(Error::PhaseNotFound { x, value, threshold });
        }
    }

    let inv = 1.0 / p.gamma;
    let mut centers: Vec<usize> = Vec::new();
    let mut half_lengths: Vec<usize> = Vec::new();
    let mut phases = Vec::new();
    for k in 1..=k_max {
        let mid = x0 + k as f64 * p.period;
        let a = (mid - eps_phase).powf(inv);
        let b = (mid + eps_phase).powf(inv);
        let x = (0.5 * (a + b)).round() as usize;
        let l = ((b - a) / 4.0).floor() as usize;
        if x < l + 2 || ((x - l - 2) as f64) < a || ((x + l + 1) as f64) > b {
            continue;
        }
        if let (Some(&px), Some(&pl)) = (centers.last(), half_lengths.last()) {
            if px + pl >= x - l {
                continue;
            }
        }
        centers.push(x);
        half_lengths.push(l);
        phases.push(k);
    }
    let layout = BarrierLayout::new(centers, half_lengths)?;
    let j_eps = build_composite(spec, &p.unmodulated(), &layout)?;
    check_deviation(spec, &p.unmodulated(), &layout, 0.5 * delta_e)?;
    Ok(DerivedLayout {
        layout,
        j_eps,
        delta_e,
        threshold,
        phases,
    })
}

/// Samples per matching region in the deviation check.
const DEVIATION_SAMPLES: usize = 4096;

fn check_deviation(spec: &ModelSpec, reference: &ModelSpec, layout: &BarrierLayout, bound: f64) -> Result<()> {
    for k in 0..layout.len() {
        let (a, b) = layout.matching_region(k);
        let stride = ((b - a) / DEVIATION_SAMPLES).max(1);
        for n in (a..=b).step_by(stride).chain([b]) {
            let dev = (spec.weight(n)? - reference.weight(n)?).abs();
            if dev > bound {
                return Err(Error::InvalidModel(format!(
                    "barrier weight at n = {n} deviates by {dev} > {bound}"
                )));
            }
        }
    }
    Ok(())
}

/// Gap of `spec` around `[lo, hi]` read off the spectrum of the `[1, n]`
/// section: the nearest eigenvalues below `lo` and above `hi`.
pub fn section_gap(spec: &ModelSpec, lo: f64, hi: f64, n: usize) -> Result<GapWindow> {
    let slice = truncate(spec, 1, n)?;
    let query = SpectrumQuery::new(&slice);
    let inside = eigs_in_window(&query, lo, hi);
    if let Some(&lambda) = inside.first() {
        return Err(Error::OutsideGap { lambda });
    }
    let below = sturm_count(&slice, lo);
    let r = below.checked_sub(1).and_then(|k| kth_eigenvalue(&query, k));
    let s = kth_eigenvalue(&query, below);
    match (r, s) {
        (Some(r), Some(s)) => GapWindow::finite(r, s),
        _ => Err(Error::InvalidModel("section has no spectrum on one side".into())),
    }
}

/// Inputs of the end-to-end barrier check on the power-modulated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Energy interval `[α_E, β_E] ⊂ (-c, c)`.
    pub window: (f64, f64),
    /// Phase with `φ(x₀) = 1`.
    pub x0: f64,
    pub eps_phase: f64,
    /// Phases `k = 1..=phases` generate the layout used for the series.
    pub phases: usize,
    /// Leading barriers whose blocks are diagonalised for `b_k(E)`.
    pub tested: usize,
    pub energies: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Sampling horizon for the norm constants.
    pub scan_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub derived: DerivedLayout,
    pub sums: Vec<(f64, CriterionSum)>,
    pub gap: GapWindow,
    pub constants: NormConstants,
    pub rates: BarrierRates,
    pub gamma1: f64,
    /// Barriers `1..tested-1` (0-based), with `b_k` maximised over the
    /// energies.
    pub rows: Vec<CriterionRow>,
    /// `bk[j][r]` is `b_k` at `energies[j]` for `rows[r]`.
    pub bk: Vec<Vec<f64>>,
}

/// The threshold on `b_k(E)` past which the head of the Weyl solution
/// controls its full norm.
pub const BK_THRESHOLD: f64 = 1.0 / 32.0;

impl PipelineReport {
    /// First row index from which every tested `b_k` is at most
    /// [`BK_THRESHOLD`].
    pub fn settled_from(&self) -> Option<usize> {
        let mut first = None;
        for (r, row) in self.rows.iter().enumerate().rev() {
            if row.b_k.is_some_and(|b| b <= BK_THRESHOLD) {
                first = Some(r);
            } else {
                break;
            }
        }
        first
    }
}

/// Derives the layout, sums the criterion series, certifies the decay of
/// the barrier operator inside its gap and evaluates `b_k(E)` on the
/// blocks of `spec` between the leading barriers.
pub fn barrier_pipeline(spec: &ModelSpec, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let derived = derive_barrier_layout(spec, cfg.window, cfg.x0, cfg.eps_phase, cfg.phases)?;
    let layout = &derived.layout;
    let caps = barrier_caps(spec, layout)?;
    let sums = cfg
        .gammas
        .iter()
        .map(|&g| (g, criterion_partial_sum(layout, &caps, g, layout.len())))
        .collect();

    let tested = cfg.tested.min(layout.len());
    if tested < 3 {
        return Err(Error::InvalidModel("need at least three tested barriers".into()));
    }
    let head = BarrierLayout {
        centers: layout.centers[..tested].to_vec(),
        half_lengths: layout.half_lengths[..tested].to_vec(),
    };
    let section = 2 * (head.centers[tested - 1] / 2);
    let gap = section_gap(&derived.j_eps, cfg.window.0, cfg.window.1, section)?;
    let constants = certify_for_window(&derived.j_eps, &gap, cfg.window.0, cfg.window.1, cfg.scan_n)?;
    let rates = BarrierRates::new(&gap, &constants, cfg.window)?;
    let gamma1 = 0.25 * rates.gamma0;

    let blocks = barrier_blocks(spec, &head)?;
    let distances: Vec<Vec<f64>> = cfg.energies.iter().map(|&e| block_distances(&blocks, e)).collect();
    let mut rows = Vec::new();
    let mut bk = vec![Vec::new(); cfg.energies.len()];
    for k in 1..tested - 1 {
        let a = ak_bound(&derived.j_eps, &head, k, caps[k], &rates)?;
        let mut worst = 0.0f64;
        for (j, &e) in cfg.energies.iter().enumerate() {
            let b = bk_from_distances(&caps, a.two_sided, k, e, (distances[j][k - 1], distances[j][k]))?;
            worst = worst.max(b);
            bk[j].push(b);
        }
        rows.push(CriterionRow {
            k,
            cap: caps[k],
            term: criterion_log_term(layout, &caps, 1.0, k).exp(),
            a_k: a.two_sided,
            alpha_k: alpha_k(&caps, layout, gamma1, k).alpha,
            b_k: Some(worst),
        });
    }
    Ok(PipelineReport {
        derived,
        sums,
        gap,
        constants,
        rates,
        gamma1,
        rows,
        bk,
    })
}
