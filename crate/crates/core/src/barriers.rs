//! Barrier layouts and the summability criterion for square-summable
//! generalized eigenfunctions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelopes::{eta_thm4, GapWindow, NormConstants};
use crate::error::{Error, Result};
use crate::model::{apply_operator, carleman_sum, truncate, ModelSpec, SumPower};
use crate::tridiag::{distance_lower_bound, resolvent_column, TridiagonalSlice};

/// Barrier centers `x_k` and half-lengths `ℓ_k`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BarrierLayout {
    pub centers: Vec<usize>,
    pub half_lengths: Vec<usize>,
}

impl BarrierLayout {
    pub fn new(centers: Vec<usize>, half_lengths: Vec<usize>) -> Result<Self> {
        let layout = BarrierLayout {
            centers,
            half_lengths,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.len() != self.half_lengths.len() {
            return Err(Error::InvalidModel(
                "layout needs one half-length per center".into(),
            ));
        }
        for k in 0..self.len() {
            if self.centers[k] < self.half_lengths[k] + 2 {
                return Err(Error::LayoutOverlap { k });
            }
            if k + 1 < self.len() {
                let right_edge = self.centers[k] + self.half_lengths[k];
                let next = self.centers[k + 1];
                if next <= self.centers[k] || next < self.half_lengths[k + 1] || right_edge >= next - self.half_lengths[k + 1] {
                    return Err(Error::LayoutOverlap { k });
                }
            }
        }
        Ok(())
    }

    /// `I_k = [x_k - ℓ_k, x_k + ℓ_k]`.
    pub fn interval(&self, k: usize) -> (usize, usize) {
        let (x, l) = (self.centers[k], self.half_lengths[k]);
        (x - l, x + l)
    }

    /// `Ĩ_k = [x_k - ⌊ℓ_k/2⌋, x_k + ⌊ℓ_k/2⌋]`.
    pub fn inner_interval(&self, k: usize) -> (usize, usize) {
        let (x, l) = (self.centers[k], self.half_lengths[k] / 2);
        (x - l, x + l)
    }

    /// Indices where a composite operator must agree with the barrier
    /// operator: `[x_k - ℓ_k - 2, x_k + ℓ_k + 1]`.
    pub fn matching_region(&self, k: usize) -> (usize, usize) {
        let (x, l) = (self.centers[k], self.half_lengths[k]);
        (x - l - 2, x + l + 1)
    }

    /// Whether `n` lies in some matching region.
    pub fn in_matching_region(&self, n: usize) -> bool {
        let idx = self.centers.partition_point(|&x| x < n);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.len())
            .any(|k| {
                let (a, b) = self.matching_region(k);
                a <= n && n <= b
            })
    }
}

/// Composite operator equal to `base` on every matching region and to
/// `inside` elsewhere.
pub fn build_composite(base: &ModelSpec, inside: &ModelSpec, layout: &BarrierLayout) -> Result<ModelSpec> {
    if !base.has_zero_diagonal() || !inside.has_zero_diagonal() {
        return Err(Error::NonZeroDiagonal);
    }
    layout.validate()?;
    Ok(ModelSpec::BarrierComposite {
        base: Box::new(base.clone()),
        layout: layout.clone(),
        inside: Box::new(inside.clone()),
    })
}

/// Matching regions longer than this get their cap from the weight rule
/// instead of a scan.
pub const CAP_SCAN_LIMIT: usize = 1 << 22;

/// `Λ_k = max λ_n` over the matching region of every barrier.
pub fn barrier_caps(spec: &ModelSpec, layout: &BarrierLayout) -> Result<Vec<f64>> {
    (0..layout.len())
        .map(|k| {
            let (a, b) = layout.matching_region(k);
            if b - a > CAP_SCAN_LIMIT {
                return Ok(spec.weight_upper_bound(a, b));
            }
            (a..=b).try_fold(f64::NEG_INFINITY, |acc, n| Ok(acc.max(spec.weight(n)?)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeriesVerdict {
    ConvergentEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSum {
    /// Number of summed terms.
    pub terms_used: usize,
    pub partial: f64,
    /// Ratio-test bound on the remainder; infinite when inconclusive.
    pub tail: f64,
    pub last_ratio_bound: f64,
    pub verdict: SeriesVerdict,
}

impl CriterionSum {
    pub fn estimate(&self) -> f64 {
        self.partial + self.tail
    }
}

/// Natural log of the `k`-th (0-based) term
/// `Λ_k (Λ_{k-1} + Λ_k + Λ_{k+1}) e^{-γ ℓ_k / Λ_k} (x_{k+1} - x_{k-1})`,
/// with `Λ_{-1} = Λ_0` and `x_{-1} = 0`. Needs `k + 1 < layout.len()`.
pub fn criterion_log_term(layout: &BarrierLayout, caps: &[f64], gamma: f64, k: usize) -> f64 {
    let cap = caps[k];
    let prev = if k == 0 { caps[0] } else { caps[k - 1] };
    let next = caps[k + 1];
    let x_prev = if k == 0 { 0 } else { layout.centers[k - 1] };
    let span = (layout.centers[k + 1] - x_prev) as f64;
    cap.ln() + (prev + cap + next).ln() - gamma * layout.half_lengths[k] as f64 / cap + span.ln()
}

const RATIO_WINDOW_MIN: usize = 3;

/// Partial sum of the barrier summability series over the first `k_max`
/// barriers, plus a ratio-test tail estimate. The verdict is evidence only.
pub fn criterion_partial_sum(layout: &BarrierLayout, caps: &[f64], gamma: f64, k_max: usize) -> CriterionSum {
    let usable = layout.len().min(caps.len()).saturating_sub(1);
    let k_max = k_max.min(usable);
    let logs: Vec<f64> = (0..k_max)
        .map(|k| criterion_log_term(layout, caps, gamma, k))
        .collect();
    let partial = logs.iter().map(|l| l.exp()).sum();

    let ratios: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    let window = (ratios.len() / 2).max(RATIO_WINDOW_MIN);
    let (tail, rho, verdict) = if ratios.len() < window {
        (f64::INFINITY, f64::NAN, SeriesVerdict::Inconclusive)
    } else {
        let worst = ratios[ratios.len() - window..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if worst < 0.0 {
            let rho = worst.exp();
            let last = logs[logs.len() - 1].exp();
            (last * rho / (1.0 - rho), rho, SeriesVerdict::ConvergentEvidence)
        } else {
            (f64::INFINITY, worst.exp(), SeriesVerdict::Inconclusive)
        }
    };
    CriterionSum {
        terms_used: k_max,
        partial,
        tail,
        last_ratio_bound: rho,
        verdict,
    }
}

/// Entrywise `w = (J₀ - z)(χu) - χ((J - z)u)` for the cutoff `χ` of
/// `[a, b]`, compared against the boundary set `{a-2, a-1, a, b, b+1, b+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffReport {
    pub support: Vec<usize>,
    pub values: Vec<Complex64>,
    pub boundary: Vec<usize>,
}

impl CutoffReport {
    pub fn contained(&self) -> bool {
        self.support.iter().all(|n| self.boundary.contains(n))
    }
}

/// `u[i]` holds `u(lo + i)`; entries outside the window count as zero and
/// `w` is evaluated on `[lo + 1, lo + len - 2]`.
pub fn cutoff_residual(
    j: &ModelSpec,
    j0: &ModelSpec,
    z: Complex64,
    u: &[Complex64],
    lo: usize,
    cutoff: (usize, usize),
) -> Result<CutoffReport> {
    let (a, b) = cutoff;
    let inside = |n: usize| a <= n && n <= b;
    let hi = lo + u.len();
    let mut full = vec![Complex64::new(0.0, 0.0); hi + 1];
    let mut cut = full.clone();
    for (i, &value) in u.iter().enumerate() {
        full[lo + i] = value;
        if inside(lo + i) {
            cut[lo + i] = value;
        }
    }
    let mut support = Vec::new();
    let mut values = Vec::new();
    for n in (lo + 1).max(1)..hi.saturating_sub(1) {
        let lhs = apply_operator(j0, &cut, n)? - z * cut[n];
        let rhs = if inside(n) {
            apply_operator(j, &full, n)? - z * full[n]
        } else {
            Complex64::new(0.0, 0.0)
        };
        let w = lhs - rhs;
        if w != Complex64::new(0.0, 0.0) {
            support.push(n);
            values.push(w);
        }
    }
    let boundary = [a.checked_sub(2), a.checked_sub(1), Some(a), Some(b), Some(b + 1), Some(b + 2)]
        .into_iter()
        .flatten()
        .collect();
    Ok(CutoffReport {
        support,
        values,
        boundary,
    })
}

/// Restriction of `spec` to `[x_k, x_{k+1}]` for every consecutive pair of
/// barriers.
pub fn barrier_blocks(spec: &ModelSpec, layout: &BarrierLayout) -> Result<Vec<TridiagonalSlice>> {
    layout
        .centers
        .windows(2)
        .map(|w| truncate(spec, w[0], w[1]))
        .collect()
}

/// `Λ_k² a_k² (1 + (Λ_{k-1}² + Λ_k²)/Δ_{k-1}² + (Λ_k² + Λ_{k+1}²)/Δ_k²)`.
pub fn bk_formula(caps: [f64; 3], a_k: f64, delta_prev: f64, delta_next: f64) -> f64 {
    let [prev, cap, next] = caps.map(|c| c * c);
    cap * a_k * a_k * (1.0 + (prev + cap) / (delta_prev * delta_prev) + (cap + next) / (delta_next * delta_next))
}

/// Relative accuracy of block distances. They are lower bounds, so `b_k`
/// comes out as an upper bound.
pub const BLOCK_DISTANCE_REL: f64 = 1e-6;

/// `Δ_k(E)` for every block.
pub fn block_distances(blocks: &[TridiagonalSlice], e: f64) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| distance_lower_bound(b, e, BLOCK_DISTANCE_REL))
        .collect()
}

/// `b_k(E)` for a barrier `k ≥ 1` (0-based) lying between blocks `k - 1`
/// and `k`.
pub fn bk_of_e(caps: &[f64], a_k: f64, k: usize, e: f64, blocks: &[TridiagonalSlice]) -> Result<f64> {
    if k == 0 || k >= blocks.len() {
        return Err(Error::InvalidModel(format!("barrier {k} needs blocks on both sides")));
    }
    let prev = distance_lower_bound(&blocks[k - 1], e, BLOCK_DISTANCE_REL);
    let next = distance_lower_bound(&blocks[k], e, BLOCK_DISTANCE_REL);
    bk_from_distances(caps, a_k, k, e, (prev, next))
}

/// `b_k(E)` from `(Δ_{k-1}(E), Δ_k(E))`.
pub fn bk_from_distances(caps: &[f64], a_k: f64, k: usize, e: f64, distances: (f64, f64)) -> Result<f64> {
    if k == 0 || k + 1 >= caps.len() {
        return Err(Error::InvalidModel(format!("barrier {k} needs caps on both sides")));
    }
    let (delta_prev, delta_next) = distances;
    if delta_prev == 0.0 {
        return Err(Error::OnBlockSpectrum { k: k - 1, energy: e });
    }
    if delta_next == 0.0 {
        return Err(Error::OnBlockSpectrum { k, energy: e });
    }
    Ok(bk_formula([caps[k - 1], caps[k], caps[k + 1]], a_k, delta_prev, delta_next))
}

/// Decay data of the reference operator over an energy interval inside its
/// gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierRates {
    /// Prefactor `C` of the two-set envelope, uniform over the interval.
    pub c: f64,
    /// Uniform decay rate of the two-set envelope.
    pub gamma0: f64,
    /// `d₀ = dist([α, β], σ(J₀))`.
    pub d0: f64,
    /// Largest admissible imaginary part, `d₀ / 8`.
    pub eta0: f64,
}

impl BarrierRates {
    pub fn new(window: &GapWindow, constants: &NormConstants, energies: (f64, f64)) -> Result<Self> {
        let (lo, hi) = energies;
        window.check(lo)?;
        window.check(hi)?;
        let GapWindow::FiniteGap { .. } = *window else {
            return Err(Error::InvalidModel("barrier rates need a finite gap".into()));
        };
        let d0 = window.distance(lo).min(window.distance(hi));
        let w_min = window.width_factor(lo).min(window.width_factor(hi));
        Ok(BarrierRates {
            c: 4.0 / d0,
            gamma0: eta_thm4(window, constants) * w_min.sqrt(),
            d0,
            eta0: d0 / 8.0,
        })
    }

    /// The smaller of `γ₀` and `η₀`.
    pub fn safe_rate(&self) -> f64 {
        self.gamma0.min(self.eta0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AkBound {
    /// `C e^{-γ₀ Σ_left 1/λ} + C e^{-γ₀ Σ_right 1/λ}`.
    pub two_sided: f64,
    /// `2C e^{-rate ℓ_k / 2Λ_k}` with the safe rate.
    pub cap_form: f64,
    pub left_sum: f64,
    pub right_sum: f64,
}

/// Bound on `sup ‖χ̃_k (J₀ - E - iη)⁻¹ χ_{U_k}‖` over the energy interval
/// and `0 < η ≤ η₀`, from the two-set envelope applied on each side of the
/// inner interval.
pub fn ak_bound(spec: &ModelSpec, layout: &BarrierLayout, k: usize, cap: f64, rates: &BarrierRates) -> Result<AkBound> {
    let (x, l) = (layout.centers[k], layout.half_lengths[k]);
    let inner = l / 2;
    let left_sum = carleman_sum(spec, x - inner, SumPower::One, x - l - 1)?;
    let right_sum = carleman_sum(spec, x + l + 1, SumPower::One, x + inner)?;
    let two_sided = rates.c * ((-rates.gamma0 * left_sum).exp() + (-rates.gamma0 * right_sum).exp());
    let cap_form = 2.0 * rates.c * (-rates.safe_rate() * l as f64 / (2.0 * cap)).exp();
    Ok(AkBound {
        two_sided,
        cap_form,
        left_sum,
        right_sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaK {
    pub alpha: f64,
    /// `4 α_k (x_{k+1} - x_k)`, bounding the measure of energies within
    /// `α_k` of the spectrum of block `k`.
    pub budget: f64,
}

/// `α_k² = Λ_k²(Λ_k² + Λ_{k+1}²) e^{-γ₁ℓ_k/Λ_k} + Λ_{k+1}²(Λ_k² + Λ_{k+1}²) e^{-γ₁ℓ_{k+1}/Λ_{k+1}}`.
pub fn alpha_k(caps: &[f64], layout: &BarrierLayout, gamma1: f64, k: usize) -> AlphaK {
    let (cap, next) = (caps[k], caps[k + 1]);
    let both = cap * cap + next * next;
    let decay = |c: f64, l: usize| (-gamma1 * l as f64 / c).exp();
    let alpha = (cap * cap * both * decay(cap, layout.half_lengths[k])
        + next * next * both * decay(next, layout.half_lengths[k + 1]))
    .sqrt();
    AlphaK {
        alpha,
        budget: 4.0 * alpha * (layout.centers[k + 1] - layout.centers[k]) as f64,
    }
}

/// One row of the per-barrier criterion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub k: usize,
    pub cap: f64,
    pub term: f64,
    pub a_k: f64,
    pub alpha_k: f64,
    pub b_k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub eta: f64,
    pub total: f64,
    pub head: f64,
}

impl TailRow {
    pub fn ratio(&self) -> f64 {
        self.total / self.head
    }

    /// `Σ_n |u_η(n)|² ≤ 2 Σ_{n < x_K} |u_η(n)|²`.
    pub fn dominated(&self) -> bool {
        self.total <= 2.0 * self.head
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub energy: f64,
    pub head_end: usize,
    pub rows: Vec<TailRow>,
    /// `(k, Δ_k(E))` for the blocks from the start barrier on that fit in
    /// the truncation.
    pub block_distances: Vec<(usize, f64)>,
}

impl TailReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(TailRow::ratio).fold(0.0, f64::max)
    }

    pub fn all_dominated(&self) -> bool {
        self.rows.iter().all(TailRow::dominated)
    }

    /// Blocks whose spectrum comes within `margins[k]` of the energy.
    pub fn exceptional(&self, margins: &[f64]) -> Vec<usize> {
        self.block_distances
            .iter()
            .filter(|&&(k, d)| margins.get(k).is_some_and(|m| d < *m))
            .map(|&(k, _)| k)
            .collect()
    }
}

/// Squared norms of the truncated Weyl solution at `E + iη` over all of
/// `[1, n]` and over the head `[1, x_K - 1]`, for every `η` on the grid.
pub fn l2_tail_check(
    spec: &ModelSpec,
    layout: &BarrierLayout,
    energy: f64,
    etas: &[f64],
    n: usize,
    start: usize,
) -> Result<TailReport> {
    if start >= layout.len() {
        return Err(Error::InvalidModel(format!("layout has no barrier {start}")));
    }
    let head_end = layout.centers[start] - 1;
    let slice = truncate(spec, 1, n)?;
    let rows = etas
        .iter()
        .map(|&eta| {
            let column = resolvent_column(&slice, Complex64::new(energy, eta))?;
            let sq: Vec<f64> = column.values.iter().map(|v| v.norm_sqr()).collect();
            Ok(TailRow {
                eta,
                total: sq.iter().sum(),
                head: sq[..head_end.min(sq.len())].iter().sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let block_distances = (start..layout.len().saturating_sub(1))
        .filter(|&k| layout.centers[k + 1] <= n)
        .map(|k| {
            let block = truncate(spec, layout.centers[k], layout.centers[k + 1])?;
            Ok((k, distance_lower_bound(&block, energy, BLOCK_DISTANCE_REL)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport {
        energy,
        head_end,
        rows,
        block_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_layout(k_max: usize) -> BarrierLayout {
        BarrierLayout {
            centers: (1..=k_max).map(|k| k * k).collect(),
            half_lengths: (1..=k_max).collect(),
        }
    }

    #[test]
    fn layout_rejects_overlap() {
        assert!(BarrierLayout::new(vec![10, 20], vec![3, 3]).is_ok());
        assert_eq!(
            BarrierLayout::new(vec![10, 16], vec![3, 3]),
            Err(Error::LayoutOverlap { k: 0 })
        );
        assert_eq!(BarrierLayout::new(vec![3], vec![3]), Err(Error::LayoutOverlap { k: 0 }));
    }

    #[test]
    fn composite_matches_base_on_regions() {
        let base = ModelSpec::example1(3.0, 1.0);
        let inside = ModelSpec::free();
        let layout = BarrierLayout::new(vec![20, 60], vec![5, 8]).unwrap();
        let comp = build_composite(&base, &inside, &layout).unwrap();
        for n in 1..100 {
            let expect = if (13..=26).contains(&n) || (50..=69).contains(&n) {
                base.weight(n).unwrap()
            } else {
                1.0
            };
            assert_eq!(comp.weight(n).unwrap(), expect, "n = {n}");
        }
        let empty = build_composite(&base, &inside, &BarrierLayout::default()).unwrap();
        assert_eq!(empty.weight(7).unwrap(), 1.0);
        assert_eq!(
            build_composite(&ModelSpec::Example2, &inside, &layout),
            Err(Error::NonZeroDiagonal)
        );
    }

    #[test]
    fn quadratic_layout_series() {
        let layout = quadratic_layout(60);
        let caps = vec![1.0; 60];
        let sum = criterion_partial_sum(&layout, &caps, 1.0, 59);
        assert_eq!(sum.verdict, SeriesVerdict::ConvergentEvidence);
        // k = 1 has x_0 = 0, so its term is 3e^{-1}·4 rather than 12e^{-1}
        let e = std::f64::consts::E;
        let closed = 12.0 * e / ((e - 1.0) * (e - 1.0));
        assert!((sum.estimate() - closed).abs() < 1e-9, "{}", sum.estimate());
        assert!((closed - 11.048).abs() < 1e-3);
    }

    #[test]
    fn doubling_layout_is_inconclusive() {
        let layout = BarrierLayout {
            centers: (1..=30).map(|k| 1usize << k).collect(),
            half_lengths: vec![1; 30],
        };
        let sum = criterion_partial_sum(&layout, &vec![1.0; 30], 1.0, 29);
        assert_eq!(sum.verdict, SeriesVerdict::Inconclusive);
        assert!(sum.tail.is_infinite());
    }

    #[test]
    fn bk_arithmetic() {
        assert_eq!(bk_formula([1.0; 3], 1.0, 1.0, 1.0), 5.0);
        assert_eq!(bk_formula([1.0; 3], 0.0, 1.0, 1.0), 0.0);
        let near = bk_formula([1.0; 3], 1.0, 1e-3, 1.0);
        assert!((near * 1e-6 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn alpha_k_constant_caps() {
        let layout = BarrierLayout {
            centers: vec![10, 30],
            half_lengths: vec![4, 4],
        };
        let a = alpha_k(&[1.0, 1.0], &layout, 0.5, 0);
        assert!((a.alpha - 2.0 * (-0.5f64 * 4.0 / 2.0).exp()).abs() < 1e-15);
        assert!((a.budget - 4.0 * a.alpha * 20.0).abs() < 1e-12);
        let flat = alpha_k(&[1.0, 1.0], &layout, 0.0, 0);
        assert_eq!(flat.alpha, 2.0);
    }

    #[test]
    fn alpha_budget_summable_on_quadratic_layout() {
        let layout = quadratic_layout(200);
        let caps = vec![1.0; 200];
        let total: f64 = (0..199).map(|k| alpha_k(&caps, &layout, 0.5, k).budget).sum();
        let late: f64 = (150..199).map(|k| alpha_k(&caps, &layout, 0.5, k).budget).sum();
        assert!(total.is_finite());
        assert!(late < 1e-10 * total);
    }

    #[test]
    fn cutoff_support_is_boundary_only() {
        let base = ModelSpec::example1(3.0, 1.0);
        let inside = ModelSpec::free();
        let layout = BarrierLayout::new(vec![40], vec![10]).unwrap();
        let comp = build_composite(&base, &inside, &layout).unwrap();
        let z = Complex64::new(0.3, 0.2);
        let slice = truncate(&comp, 1, 120).unwrap();
        let column = resolvent_column(&slice, z).unwrap();
        let mut u = vec![Complex64::new(0.0, 0.0)];
        u.extend(column.values.iter().copied());
        let report = cutoff_residual(&comp, &base, z, &u, 0, layout.interval(0)).unwrap();
        assert!(!report.support.is_empty());
        assert!(report.contained(), "{:?}", report.support);

        let zero = vec![Complex64::new(0.0, 0.0); 60];
        assert!(cutoff_residual(&comp, &base, z, &zero, 0, (20, 30)).unwrap().support.is_empty());
        let whole = cutoff_residual(&base, &base, z, &u, 0, (0, 200)).unwrap();
        assert!(whole.support.is_empty());
    }

    #[test]
    fn ak_constant_weights() {
        let spec = ModelSpec::constant(2.0, 0.0);
        let layout = BarrierLayout::new(vec![50], vec![20]).unwrap();
        let rates = BarrierRates {
            c: 3.0,
            gamma0: 0.2,
            d0: 0.5,
            eta0: 0.5 / 8.0,
        };
        let a = ak_bound(&spec, &layout, 0, 2.0, &rates).unwrap();
        assert!((a.left_sum - 11.0 / 2.0).abs() < 1e-12);
        assert!((a.right_sum - 11.0 / 2.0).abs() < 1e-12);
        assert!(a.two_sided <= a.cap_form);
        let bare = BarrierLayout {
            centers: vec![5],
            half_lengths: vec![0],
        };
        let edge = ak_bound(&spec, &bare, 0, 2.0, &rates).unwrap();
        assert!((edge.two_sided - 2.0 * 3.0 * (-0.2f64 * 0.5).exp()).abs() < 1e-12);
        assert_eq!(edge.cap_form, 6.0);
    }

    #[test]
    fn ak_decreases_with_length() {
        let spec = ModelSpec::example1(3.0, 1.0);
        let rates = BarrierRates {
            c: 8.0,
            gamma0: 0.05,
            d0: 0.5,
            eta0: 0.5 / 8.0,
        };
        let mut last = f64::INFINITY;
        for l in [10, 20, 40, 80, 160] {
            let layout = BarrierLayout::new(vec![1000], vec![l]).unwrap();
            let a = ak_bound(&spec, &layout, 0, 1000.0 + l as f64 + 4.0, &rates).unwrap();
            assert!(a.two_sided < last);
            last = a.two_sided;
        }
    }

    #[test]
    fn tail_check_in_a_gap() {
        let spec = ModelSpec::example1(3.0, 1.0);
        let layout = BarrierLayout::new(vec![40, 200], vec![10, 20]).unwrap();
        let report = l2_tail_check(&spec, &layout, 0.0, &[1e-3, 1e-2, 1e-1], 400, 0).unwrap();
        assert!(report.all_dominated());
        let spread = report.rows.iter().map(|r| r.total).fold(0.0, f64::max)
            / report.rows.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
        assert!(spread < 1.01);
    }

    #[test]
    fn caps_take_region_max() {
        let spec = ModelSpec::example1(3.0, 1.0);
        let layout = BarrierLayout::new(vec![20, 60], vec![5, 8]).unwrap();
        assert_eq!(barrier_caps(&spec, &layout).unwrap(), vec![28.0, 72.0]);
    }
}
