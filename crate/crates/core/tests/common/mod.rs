#![allow(dead_code)]

use jacobi_decay::barriers::{build_composite, cutoff_residual, BarrierLayout};
use jacobi_decay::cli::{parse_config, run};
use jacobi_decay::envelopes::{conjugation_entries, lemma_inverse_bound, ConjugationWeight, LemmaMode};
use jacobi_decay::model::{carleman_sum, truncate, ModelSpec, SumPower};
use jacobi_decay::solutions::{fundamental_pair, recurrence_extend, transfer_step, weyl_solution};
use jacobi_decay::tridiag::{eigs_in_window, resolvent_column, SpectrumQuery, TridiagonalSlice};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------- dense oracles ----------

pub fn dense(slice: &TridiagonalSlice) -> DMatrix<f64> {
    let n = slice.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = slice.diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = slice.offdiag[i];
            m[(i + 1, i)] = slice.offdiag[i];
        }
    }
    m
}

/// First column of `(J - z)^{-1}` from a dense LU inverse.
pub fn dense_resolvent_column(slice: &TridiagonalSlice, z: Complex64) -> Vec<Complex64> {
    let n = slice.len();
    let shifted = dense(slice).map(|x| Complex64::new(x, 0.0)) - DMatrix::identity(n, n) * z;
    let inv = shifted.try_inverse().expect("dense matrix is invertible off the real axis");
    inv.column(0).iter().copied().collect()
}

fn charpoly(diag: &[f64], off: &[f64], k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, diag[0] - x);
    for i in 1..k {
        let next = (diag[i] - x) * cur - off[i - 1] * off[i - 1] * prev;
        prev = cur;
        cur = next;
    }
    if k == 0 {
        1.0
    } else {
        cur
    }
}

/// Eigenvalues of an unreduced symmetric tridiagonal matrix from the
/// determinants of its leading minors: roots of `p_k` are bracketed by the
/// roots of `p_{k-1}` and found by plain bisection on the sign of `p_k`.
pub fn charpoly_eigs(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let radius = (0..n)
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { off[i].abs() } else { 0.0 };
            diag[i].abs() + left + right
        })
        .fold(0.0, f64::max)
        + 1.0;
    let mut roots: Vec<f64> = Vec::new();
    for k in 1..=n {
        let mut edges = vec![-radius];
        edges.extend(&roots);
        edges.push(radius);
        let mut next = Vec::with_capacity(k);
        for w in edges.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let s_lo = charpoly(diag, off, k, lo).signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if charpoly(diag, off, k, mid).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            next.push(0.5 * (lo + hi));
        }
        roots = next;
    }
    roots
}

/// `‖(T + iβS)^{-1}‖₂` as the reciprocal of the smallest singular value.
pub fn dense_inverse_norm(t: &[f64], s: &DMatrix<f64>, beta: f64) -> f64 {
    let n = t.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let re = if i == j { t[i] } else { 0.0 };
        Complex64::new(re, beta * s[(i, j)])
    });
    let sv = m.singular_values();
    1.0 / sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn spectral_norm_sym(s: &DMatrix<f64>) -> f64 {
    s.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}

// ---------- oracle criteria ----------

pub fn random_integer_slice(r: &mut ChaCha8Rng) -> TridiagonalSlice {
    let n = r.gen_range(1..=8);
    let diag = (0..n).map(|_| r.gen_range(-5..=5) as f64).collect();
    let off = (1..n).map(|_| r.gen_range(1..=5) as f64).collect();
    TridiagonalSlice::new(1, diag, off).unwrap()
}

pub fn eigensolver_oracle(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for _ in 0..count {
        let slice = random_integer_slice(&mut r);
        let oracle = charpoly_eigs(&slice.diag, &slice.offdiag);
        let got = eigs_in_window(&SpectrumQuery::new(&slice), -40.0, 40.0);
        if got.len() != oracle.len() {
            mismatched += 1;
            continue;
        }
        for (a, b) in got.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(
        mismatched == 0 && worst <= 1e-10,
        format!("{count} matrices, max abs error {worst:.2e}, count mismatches {mismatched}"),
    )
}

pub fn resolvent_oracle(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = r.gen_range(1..=64);
        let diag = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let off = (1..n).map(|_| r.gen_range(0.1..3.0)).collect();
        let slice = TridiagonalSlice::new(1, diag, off).unwrap();
        let im: f64 = r.gen_range(0.1..2.0);
        let z = Complex64::new(r.gen_range(-6.0..6.0), if r.gen_bool(0.5) { im } else { -im });
        let got = resolvent_column(&slice, z).unwrap();
        let oracle = dense_resolvent_column(&slice, z);
        let scale = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = got
            .values
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    Outcome::new(worst <= 1e-10, format!("{count} slices, max relative error {worst:.2e}"))
}

/// Diagonal `T` avoiding `(-d₋, d₊)`, with the edge values attained when
/// the size allows; `d₋ = ∞` gives a one-sided instance.
fn lemma_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, DMatrix<f64>, f64, f64, f64) {
    let n = r.gen_range(1..=8);
    let d_plus = r.gen_range(0.1..3.0);
    let one_sided = r.gen_bool(0.2);
    let d_minus = if one_sided { f64::INFINITY } else { r.gen_range(0.1..3.0) };
    let mut t: Vec<f64> = (0..n)
        .map(|_| {
            let gap = r.gen_range(0.0..4.0);
            if one_sided || r.gen_bool(0.5) {
                d_plus + gap
            } else {
                -d_minus - gap
            }
        })
        .collect();
    t[0] = d_plus;
    if !one_sided && n > 1 {
        t[1] = -d_minus;
    }
    let raw = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    let sym = &raw + raw.transpose();
    let norm = spectral_norm_sym(&sym);
    let s = if norm > 0.0 { sym * (r.gen_range(0.2..1.0) / norm) } else { sym };
    let beta = if one_sided {
        r.gen_range(-5.0..5.0)
    } else {
        0.5 * (d_plus * d_minus).sqrt() * r.gen_range(-1.0..1.0)
    };
    (t, s, d_plus, d_minus, beta)
}

pub fn lemma_certification(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst_slack = f64::NEG_INFINITY;
    let mut dominance_failures = 0;
    for _ in 0..count {
        let (t, s, d_plus, d_minus, beta) = lemma_instance(&mut r);
        let actual = dense_inverse_norm(&t, &s, beta);
        let l1 = lemma_inverse_bound(d_plus, d_minus, beta, LemmaMode::L1).unwrap();
        let l2 = lemma_inverse_bound(d_plus, d_minus, beta, LemmaMode::L2).unwrap();
        worst_slack = worst_slack.max(actual - l1.min(l2));
        if l2 > l1 * (1.0 + 1e-12) {
            dominance_failures += 1;
        }
    }
    Outcome::new(
        worst_slack <= 1e-9 && dominance_failures == 0,
        format!(
            "{count} instances, max(norm - bound) {worst_slack:.2e}, L2 > L1 in {dominance_failures}"
        ),
    )
}

/// Max relative deviation between `conjugation_entries` and the dense
/// similarity transform `Φ⁻¹JΦ - J` with `Φ = diag(e^{-γρ(n)})`.
pub fn conjugation_mismatch(spec: &ModelSpec, gamma: f64, n: usize) -> f64 {
    let slice = truncate(spec, 1, n).unwrap();
    let j = dense(&slice);
    let rho: Vec<f64> = (1..=n)
        .map(|m| carleman_sum(spec, m, SumPower::One, 1).unwrap())
        .collect();
    let conj = DMatrix::from_fn(n, n, |a, b| (gamma * rho[a]).exp() * j[(a, b)] * (-gamma * rho[b]).exp()) - &j;
    let weight = ConjugationWeight::carleman(gamma);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let expected = if b == a + 1 {
                conjugation_entries(spec, &weight, a + 1).unwrap().0
            } else if a == b + 1 {
                conjugation_entries(spec, &weight, b + 1).unwrap().1
            } else {
                0.0
            };
            let scale = expected.abs().max(j[(a, b)].abs()).max(1e-300);
            worst = worst.max((conj[(a, b)] - expected).abs() / scale);
        }
    }
    worst
}

// ---------- property suite ----------

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn any_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.5f64..3.0, -2.0f64..2.0).prop_map(|(l, q)| ModelSpec::constant(l, q)),
        (-0.5f64..4.0, -0.5f64..4.0).prop_map(|(a, b)| ModelSpec::example1(a, b)),
        Just(ModelSpec::Example2),
        (0.1f64..0.9, 0.1f64..0.5, 0.5f64..2.0, 0.0f64..3.0, 0.0f64..3.0)
            .prop_map(|(a, g, t, c1, c2)| ModelSpec::power_modulated(a, g, t, c1, c2)),
        (0.1f64..0.9, 0.0f64..3.0, 0.0f64..3.0)
            .prop_map(|(alpha, c1, c2)| ModelSpec::PowerPeriodic { alpha, c1, c2 }),
    ]
}

pub fn zero_diagonal_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|l| ModelSpec::constant(l, 0.0)),
        (0.0f64..4.0, 0.0f64..4.0).prop_map(|(a, b)| ModelSpec::example1(a, b)),
        (0.1f64..0.9, 0.1f64..0.5, 0.0f64..3.0, 0.0f64..3.0)
            .prop_map(|(a, g, c1, c2)| ModelSpec::power_modulated(a, g, 1.0, c1, c2)),
    ]
}

pub fn any_layout() -> impl Strategy<Value = BarrierLayout> {
    prop::collection::vec((1usize..20, 0usize..30), 1..6).prop_map(|parts| {
        let mut centers = Vec::new();
        let mut halves = Vec::new();
        let mut edge = 0usize;
        for (half, gap) in parts {
            let center = edge + gap + half + 2;
            centers.push(center);
            halves.push(half);
            edge = center + half;
        }
        BarrierLayout::new(centers, halves).unwrap()
    })
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub fn prop_wronskian(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(any_spec(), -4.0f64..4.0, -1.0f64..1.0), |(spec, re, im)| {
            let z = Complex64::new(re, im);
            let pair = fundamental_pair(&spec, z, 300).map_err(|e| fail(e.to_string()))?;
            for n in 0..300 {
                let (w, scale) = pair.wronskian(&spec, n).map_err(|e| fail(e.to_string()))?;
                if (w - Complex64::new(1.0, 0.0)).norm() > 1e-9 * scale.max(1.0) {
                    return Err(fail(format!("W({n}) = {w}")));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_herglotz(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(any_spec(), -6.0f64..6.0, 1e-3f64..5.0, 1usize..300), |(spec, e, eta, n)| {
            let w = weyl_solution(&spec, e, eta, n).map_err(|e| fail(e.to_string()))?;
            if w.m.im.is_nan() || w.m.im <= 0.0 {
                return Err(fail(format!("Im m = {}", w.m.im)));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_transfer(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(any_spec(), -4.0f64..4.0, -2.0f64..2.0, -2.0f64..2.0),
            |(spec, z, u0, u1)| {
                let u = recurrence_extend(&spec, z, u0, u1, 200).map_err(|e| fail(e.to_string()))?;
                for n in 1..200 {
                    let b = transfer_step(&spec, z, n).map_err(|e| fail(e.to_string()))?.matrix;
                    let (a, c) = (u.value(n - 1), u.value(n));
                    let next = [b[0][0] * a + b[0][1] * c, b[1][0] * a + b[1][1] * c];
                    let target = [u.value(n), u.value(n + 1)];
                    let scale = (b[1][0] * a).abs() + (b[1][1] * c).abs() + c.abs();
                    for i in 0..2 {
                        if (next[i] - target[i]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                            return Err(fail(format!("step {n}: {next:?} vs {target:?}")));
                        }
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// `J₀` agrees with `J` on the cutoff window `[a, b]` and follows an
/// unrelated operator elsewhere.
pub fn prop_cutoff_support(cases: u32) -> Result<(), String> {
    let strategy = (
        any_spec(),
        any_spec(),
        1usize..40,
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12..60),
        0usize..100,
        0usize..100,
        -2.0f64..2.0,
    );
    runner(cases)
        .run(&strategy, |(j, other, lo, raw, pa, pb, re)| {
            let u: Vec<Complex64> = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let len = u.len();
            let a = lo + 2 + pa % (len - 6);
            let b = a + pb % (lo + len - 3 - a);
            let hi = lo + len;
            let mut weights = Vec::with_capacity(hi + 1);
            let mut diag = Vec::with_capacity(hi + 1);
            for n in 1..=hi + 1 {
                let src = if a <= n && n <= b { &j } else { &other };
                let (w, q) = src.sample(n).map_err(|e| fail(e.to_string()))?;
                weights.push(w);
                diag.push(q);
            }
            let j0 = ModelSpec::Table {
                weights,
                diag,
                tail: Box::new(other.clone()),
            };
            let report = cutoff_residual(&j, &j0, Complex64::new(re, 0.5), &u, lo, (a, b))
                .map_err(|e| fail(e.to_string()))?;
            if !report.contained() {
                return Err(fail(format!("support {:?} outside {:?}", report.support, report.boundary)));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_composite_identity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(zero_diagonal_spec(), zero_diagonal_spec(), any_layout()), |(base, inside, layout)| {
            let composite = build_composite(&base, &inside, &layout).map_err(|e| fail(e.to_string()))?;
            for k in 0..layout.len() {
                let (a, b) = layout.matching_region(k);
                for n in a..=b {
                    let got = composite.sample(n).map_err(|e| fail(e.to_string()))?;
                    let want = base.sample(n).map_err(|e| fail(e.to_string()))?;
                    if got.0.to_bits() != want.0.to_bits() || got.1.to_bits() != want.1.to_bits() {
                        return Err(fail(format!("n = {n}: {got:?} vs {want:?}")));
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Runs the same config twice into fresh directories and compares the CSV
/// bytes and the manifest without its `generated` field.
pub fn same_outputs(config_json: &str) -> Result<bool, String> {
    let config = parse_config(config_json).map_err(|e| e.to_string())?;
    let outs: Vec<(Vec<u8>, serde_json::Value)> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let outcome = run(&config, dir.path()).map_err(|e| e.to_string())?;
            let csv = outcome
                .files
                .iter()
                .find(|f| f.extension().is_some_and(|x| x == "csv"))
                .ok_or("no csv written")?;
            let bytes = std::fs::read(csv).map_err(|e| e.to_string())?;
            let manifest_path = outcome
                .files
                .iter()
                .find(|f| f.to_string_lossy().ends_with(".manifest.json"))
                .ok_or("no manifest written")?;
            let mut manifest: serde_json::Value =
                serde_json::from_slice(&std::fs::read(manifest_path).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
            manifest.as_object_mut().ok_or("manifest is not an object")?.remove("generated");
            Ok((bytes, manifest))
        })
        .collect::<Result<_, String>>()?;
    Ok(outs[0] == outs[1])
}

pub fn prop_csv_determinism(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(0.5f64..4.0, 0.0f64..4.0, 2usize..200, 0.1f64..2.0), |(c1, c2, n, im)| {
            let config = format!(
                r#"{{"experiment":"resolvent","model":{{"type":"example1","c1":{c1},"c2":{c2}}},"parameters":{{"z":[0.25,{im}],"n":{n}}}}}"#
            );
            match same_outputs(&config) {
                Ok(true) => Ok(()),
                Ok(false) => Err(fail("outputs differ between runs".into())),
                Err(e) => Err(fail(e)),
            }
        })
        .map_err(|e| e.to_string())
}
