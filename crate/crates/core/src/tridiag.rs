//! Finite symmetric tridiagonal matrices: Sturm counts, windowed bisection,
//! pivoted complex solves and distance to the spectrum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest pivot magnitude tolerated by the Sturm recursion.
pub const PIVOT_FLOOR: f64 = 1e-300;
/// Default absolute bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Minimum distance between a real spectral parameter and the spectrum.
pub const SINGULAR_GAP: f64 = 1e-10;

/// Rows `lo..=hi` of a Jacobi operator with Dirichlet edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSlice {
    pub lo: usize,
    pub hi: usize,
    /// `q_lo, ..., q_hi`
    pub diag: Vec<f64>,
    /// `λ_lo, ..., λ_{hi-1}`
    pub offdiag: Vec<f64>,
}

impl TridiagonalSlice {
    pub fn new(lo: usize, diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidModel(format!(
                "slice needs len(offdiag) = len(diag) - 1, got {} and {}",
                offdiag.len(),
                diag.len()
            )));
        }
        if let Some((i, &value)) = offdiag.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::NonPositiveWeight { n: lo + i, value });
        }
        let hi = lo + diag.len() - 1;
        Ok(TridiagonalSlice {
            lo,
            hi,
            diag,
            offdiag,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.offdiag[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.offdiag[i] } else { 0.0 };
            let r = left + right;
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `T u` for a vector of matching length.
    pub fn matvec<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.len();
        assert_eq!(u.len(), n, "vector length must match the slice");
        (0..n)
            .map(|i| {
                let mut acc = u[i] * self.diag[i];
                if i > 0 {
                    acc = acc + u[i - 1] * self.offdiag[i - 1];
                }
                if i + 1 < n {
                    acc = acc + u[i + 1] * self.offdiag[i];
                }
                acc
            })
            .collect()
    }
}

/// Number of eigenvalues of `slice` strictly below `x`.
pub fn sturm_count(slice: &TridiagonalSlice, x: f64) -> usize {
    let mut count = 0;
    let mut pivot = 1.0;
    for i in 0..slice.len() {
        let coupling = if i == 0 {
            0.0
        } else {
            let w = slice.offdiag[i - 1];
            w * w / pivot
        };
        pivot = (slice.diag[i] - x) - coupling;
        if pivot.abs() < PIVOT_FLOOR {
            pivot = if pivot < 0.0 { -PIVOT_FLOOR } else { PIVOT_FLOOR };
        }
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

/// A slice together with the bisection tolerance used to resolve it.
#[derive(Debug, Clone)]
pub struct SpectrumQuery<'a> {
    pub slice: &'a TridiagonalSlice,
    pub tol: f64,
}

impl<'a> SpectrumQuery<'a> {
    pub fn new(slice: &'a TridiagonalSlice) -> Self {
        SpectrumQuery {
            slice,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_tol(slice: &'a TridiagonalSlice, tol: f64) -> Self {
        assert!(tol > 0.0, "bisection tolerance must be positive");
        SpectrumQuery { slice, tol }
    }
}

/// Locates the `k`-th eigenvalue (0-based, ascending) inside `[lo, hi)`,
/// assuming `count(lo) ≤ k < count(hi)`.
fn bisect_kth(slice: &TridiagonalSlice, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(slice, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `k`-th eigenvalue (0-based, ascending), if the slice has one.
pub fn kth_eigenvalue(query: &SpectrumQuery, k: usize) -> Option<f64> {
    if k >= query.slice.len() {
        return None;
    }
    let (lo, hi) = query.slice.gershgorin();
    Some(bisect_kth(query.slice, k, lo - 1.0, hi + 1.0, query.tol))
}

/// Eigenvalues in `[a, b)` in ascending order.
pub fn eigs_in_window(query: &SpectrumQuery, a: f64, b: f64) -> Vec<f64> {
    assert!(a < b, "empty window");
    let below_a = sturm_count(query.slice, a);
    let below_b = sturm_count(query.slice, b);
    (below_a..below_b)
        .map(|k| bisect_kth(query.slice, k, a, b, query.tol))
        .collect()
}

/// `⟨(T - z)⁻¹ e_1, e_n⟩` for `n` across a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventColumn {
    pub z: Complex64,
    /// First row index of the slice the column was computed on.
    pub lo: usize,
    pub size: usize,
    pub values: Vec<Complex64>,
    /// Max-norm of `(T - z) values - e_1`.
    pub residual: f64,
}

impl ResolventColumn {
    /// Value at operator index `n` (`lo ≤ n ≤ lo + size - 1`).
    pub fn at(&self, n: usize) -> Complex64 {
        self.values[n - self.lo]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Tolerance the residual must respect.
    pub fn residual_budget(&self) -> f64 {
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        1e-10 * (1.0 + self.z.norm() + peak)
    }
}

/// Solves `(T - z) u = rhs` by Gaussian elimination with partial pivoting
/// (one extra superdiagonal of fill-in).
pub fn solve_shifted(slice: &TridiagonalSlice, z: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = slice.len();
    assert_eq!(rhs.len(), n);
    let mut d: Vec<Complex64> = slice.diag.iter().map(|q| Complex64::new(*q, 0.0) - z).collect();
    let dl: Vec<Complex64> = slice.offdiag.iter().map(|w| Complex64::new(*w, 0.0)).collect();
    let mut du = dl.clone();
    let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let singular = || Error::NearSingular { z, distance: 0.0 };

    for k in 0..n.saturating_sub(1) {
        if d[k].norm_sqr() >= dl[k].norm_sqr() {
            if d[k] == Complex64::new(0.0, 0.0) {
                return Err(singular());
            }
            let mult = dl[k] / d[k];
            d[k + 1] -= mult * du[k];
            let bk = b[k];
            b[k + 1] -= mult * bk;
        } else {
            let mult = d[k] / dl[k];
            d[k] = dl[k];
            let temp = d[k + 1];
            d[k + 1] = du[k] - mult * temp;
            if k + 2 < n {
                du2[k] = du[k + 1];
                du[k + 1] = -mult * du2[k];
            }
            du[k] = temp;
            let temp = b[k];
            b[k] = b[k + 1];
            b[k + 1] = temp - mult * b[k + 1];
        }
    }
    if d[n - 1] == Complex64::new(0.0, 0.0) {
        return Err(singular());
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for k in (0..n.saturating_sub(2)).rev() {
        b[k] = (b[k] - du[k] * b[k + 1] - du2[k] * b[k + 2]) / d[k];
    }
    if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(singular());
    }
    Ok(b)
}

/// Max-norm of `(T - z) u - rhs`.
pub fn shifted_residual(slice: &TridiagonalSlice, z: Complex64, u: &[Complex64], rhs: &[Complex64]) -> f64 {
    let tu = slice.matvec(u);
    tu.iter()
        .zip(u)
        .zip(rhs)
        .map(|((t, v), r)| (t - z * v - r).norm())
        .fold(0.0, f64::max)
}

/// First column of `(T - z)⁻¹`.
///
/// Real `z` must sit at least [`SINGULAR_GAP`] away from the spectrum of the
/// slice; this is checked with two Sturm counts.
pub fn resolvent_column(slice: &TridiagonalSlice, z: Complex64) -> Result<ResolventColumn> {
    if z.im == 0.0
        && sturm_count(slice, z.re - SINGULAR_GAP) != sturm_count(slice, z.re + SINGULAR_GAP)
    {
        return Err(Error::NearSingular {
            z,
            distance: distance_to_spectrum(slice, z.re),
        });
    }
    let n = slice.len();
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[0] = Complex64::new(1.0, 0.0);
    let values = solve_shifted(slice, z, &rhs).map_err(|_| Error::NearSingular {
        z,
        distance: distance_to_spectrum(slice, z.re),
    })?;
    let residual = shifted_residual(slice, z, &values, &rhs);
    Ok(ResolventColumn {
        z,
        lo: slice.lo,
        size: n,
        values,
        residual,
    })
}

/// Refines the `k`-th eigenvalue inside `[lo, hi]` to nearly full precision.
fn refine_kth(slice: &TridiagonalSlice, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..256 {
        let scale = lo.abs().max(hi.abs());
        if hi - lo <= 4.0 * f64::EPSILON * scale || hi - lo <= PIVOT_FLOOR {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(slice, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `min |E - μ|` over the eigenvalues `μ` of `slice`.
pub fn distance_to_spectrum(slice: &TridiagonalSlice, e: f64) -> f64 {
    let (g_lo, g_hi) = slice.gershgorin();
    let n = slice.len();
    let below = sturm_count(slice, e);
    let mut best = f64::INFINITY;
    if below > 0 {
        let mu = refine_kth(slice, below - 1, g_lo.min(e) - 1.0, e);
        best = best.min(e - mu);
    }
    if below < n {
        let mu = refine_kth(slice, below, e, g_hi.max(e) + 1.0);
        best = best.min(mu - e);
    }
    best.max(0.0)
}

/// Lower bound `t` on the distance from `e` to the spectrum with
/// `dist ≤ t (1 + rel)`, found by an exponential search outward from the
/// mean level spacing followed by bisection. Returns 0 when `e` is an
/// eigenvalue to working precision.
pub fn distance_lower_bound(slice: &TridiagonalSlice, e: f64, rel: f64) -> f64 {
    let (g_lo, g_hi) = slice.gershgorin();
    let n = slice.len();
    let occupied = |t: f64| sturm_count(slice, e + t) > sturm_count(slice, e - t);
    let floor = PIVOT_FLOOR.max(4.0 * f64::EPSILON * e.abs());
    let reach = (g_hi - e).max(e - g_lo).max(0.0) + 1.0;
    let mut t = ((g_hi - g_lo) / n as f64).max(floor);
    let (mut empty, mut hit);
    if occupied(t) {
        hit = t;
        loop {
            t *= 0.5;
            if t < floor {
                return 0.0;
            }
            if !occupied(t) {
                empty = t;
                break;
            }
            hit = t;
        }
    } else {
        empty = t;
        loop {
            t *= 2.0;
            if t > 2.0 * reach {
                return empty;
            }
            if occupied(t) {
                hit = t;
                break;
            }
            empty = t;
        }
    }
    while hit - empty > rel * empty {
        let mid = 0.5 * (empty + hit);
        if occupied(mid) {
            hit = mid;
        } else {
            empty = mid;
        }
    }
    empty
}

/// `√(‖A‖₁ ‖A‖_∞)` for the tridiagonal matrix with the given bands.
/// `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`.
pub fn tridiag_norm_bound(lower: &[f64], diag: &[f64], upper: &[f64]) -> f64 {
    let band = |v: &[f64], i: usize| v.get(i).map_or(0.0, |x| x.abs());
    let mut max_row = 0.0f64;
    let mut max_col = 0.0f64;
    for (i, d) in diag.iter().enumerate() {
        let prev = i.checked_sub(1);
        let row = d.abs() + prev.map_or(0.0, |p| band(lower, p)) + band(upper, i);
        let col = d.abs() + prev.map_or(0.0, |p| band(upper, p)) + band(lower, i);
        max_row = max_row.max(row);
        max_col = max_col.max(col);
    }
    (max_row * max_col).sqrt()
}
