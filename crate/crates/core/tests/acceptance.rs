//! Acceptance suite: one line per criterion with its runtime budget.
//!
//! A criterion may report its failure as expected (XFAIL) when the measured
//! numbers match an analysed mathematical obstruction. Any other failure,
//! including a blown runtime budget, makes the run exit non-zero.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use jacobi_decay::barriers::{barrier_caps, criterion_partial_sum, l2_tail_check, SeriesVerdict};
use jacobi_decay::envelopes::{bounds_check, envelope_thm3, pick_n_thm3, verify_envelope, GapWindow};
use jacobi_decay::mobility::{barrier_pipeline, derive_barrier_layout, weyl_quotients, PipelineConfig, WeylSequenceSpec};
use jacobi_decay::model::{carleman_prefix, truncate, ModelSpec, SumPower};
use jacobi_decay::solutions::{discriminant_limit, discriminant_v, fit_asymptotics, Basis};
use jacobi_decay::tridiag::resolvent_column;
use num_complex::Complex64;

struct Verdict {
    outcome: Outcome,
    /// Set when the failure is the documented one.
    expected_failure: Option<String>,
}

impl From<Outcome> for Verdict {
    fn from(outcome: Outcome) -> Self {
        Verdict {
            outcome,
            expected_failure: None,
        }
    }
}

fn modulated() -> ModelSpec {
    ModelSpec::power_modulated(0.5, 0.2, 1.0, 2.0, 1.0)
}

fn envelope_example1() -> Verdict {
    let spec = ModelSpec::example1(3.0, 1.0);
    let window = GapWindow::finite(-2.0, 2.0).unwrap();
    let lambdas = [-1.5, -1.0, 0.0, 1.0, 1.5];
    let (consts, checks) = bounds_check(&spec, &window, &lambdas, 4000, 400, 1 << 16).unwrap();
    let violations: usize = checks.iter().map(|c| c.report.violations.len()).sum();
    let worst = checks.iter().map(|c| c.report.worst_ratio).fold(0.0, f64::max);
    Outcome::new(
        violations == 0,
        format!(
            "C1 {:.4} C2 {:.4}, {violations} violations, worst |G|/envelope {worst:.3e}",
            consts.c1, consts.c2
        ),
    )
    .into()
}

fn envelope_example2() -> Verdict {
    let flipped = ModelSpec::Example2.reflected();
    let (d, eps, size) = (1.0, 0.5, 4000);
    let z = Complex64::new(0.0, 0.0);
    let start = pick_n_thm3(&flipped, d, z, eps).unwrap();
    let original = resolvent_column(&truncate(&ModelSpec::Example2, 1, size).unwrap(), z).unwrap();
    let column = resolvent_column(&truncate(&flipped, 1, size).unwrap(), z).unwrap();
    let same_modulus = original
        .values
        .iter()
        .zip(&column.values)
        .all(|(a, b)| (a.norm() - b.norm()).abs() <= 1e-12 * b.norm());
    let sums = carleman_prefix(&flipped, size, SumPower::Half, start).unwrap();
    let envelope: Vec<f64> = (1..=size)
        .map(|n| {
            if n < start {
                f64::INFINITY
            } else {
                envelope_thm3(d, z, eps, sums[n]).unwrap()
            }
        })
        .collect();
    let report = verify_envelope(&column, &envelope, size / 10);
    Outcome::new(
        report.passed() && same_modulus,
        format!(
            "N = {start}, {} violations, worst ratio {:.3e}, sign flip preserves |G|: {same_modulus}",
            report.violations.len(),
            report.worst_ratio
        ),
    )
    .into()
}

fn sharpness_example1() -> Verdict {
    let spec = ModelSpec::example1(3.0, 1.0);
    let column = resolvent_column(&truncate(&spec, 1, 8000).unwrap(), Complex64::new(0.0, 0.0)).unwrap();
    let values: Vec<f64> = (0..=2000).map(|m| if m == 0 { 1.0 } else { column.at(2 * m).norm() }).collect();
    let fit = fit_asymptotics(&values, (500, 2000), &[Basis::Constant, Basis::LogN]).unwrap();
    let slope = fit.coefficient("ln_n").unwrap();
    Outcome::new(
        (-1.545..=-1.455).contains(&slope),
        format!("ln-n slope {slope:.5} (target -1.5 ± 3%)"),
    )
    .into()
}

fn sharpness_example2() -> Verdict {
    let column = resolvent_column(&truncate(&ModelSpec::Example2, 1, 6000).unwrap(), Complex64::new(0.0, 0.0)).unwrap();
    let values: Vec<f64> = (0..=4000).map(|m| if m == 0 { 1.0 } else { column.at(m).norm() }).collect();
    let fit = fit_asymptotics(&values, (1000, 4000), &[Basis::Constant, Basis::LogN, Basis::SqrtN]).unwrap();
    let root = fit.coefficient("sqrt_n").unwrap();
    let log = fit.coefficient("ln_n").unwrap();
    Outcome::new(
        (-2.04..=-1.96).contains(&root) && (-0.3125..=-0.1875).contains(&log),
        format!("sqrt-n coefficient {root:.5} (-2 ± 2%), ln-n coefficient {log:.5} (-0.25 ± 25%)"),
    )
    .into()
}

fn weyl_sequence() -> Verdict {
    let spec = modulated();
    let wspec = WeylSequenceSpec::default_for(&spec).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for energy in [0.0, 0.5] {
        let rows = weyl_quotients(&spec, energy, &wspec, 1_000_000).unwrap();
        let tested: Vec<_> = rows.iter().filter(|r| r.window.i >= 2).collect();
        let q: Vec<f64> = tested.iter().map(|r| r.quotient).collect();
        let decreasing = q.windows(2).all(|w| w[1] < w[0]);
        let ratio = q[q.len() - 1] / q[0];
        passed &= decreasing && ratio < 0.25;
        parts.push(format!(
            "E={energy}: i=2..{} quotient {:.3} -> {:.3}, ratio {ratio:.3}, decreasing {decreasing}",
            tested[tested.len() - 1].window.i,
            q[0],
            q[q.len() - 1]
        ));
    }
    Outcome::new(passed, parts.join("; ")).into()
}

fn discriminant() -> Verdict {
    let spec = modulated();
    let (lo, hi) = (100_000usize, 1_000_000usize);
    let mut failing = Vec::new();
    let mut explained = true;
    let mut parts = Vec::new();
    for lambda in [-2.0, -1.5, -1.25, 1.25, 1.5, 2.0] {
        let bound = -2.0 * lambda * lambda;
        let mut worst = f64::NEG_INFINITY;
        let mut limit_gap = 0.0f64;
        for n in lo..=hi {
            let d = discriminant_v(&spec, lambda, n).unwrap();
            if d > worst {
                worst = d;
                limit_gap = (d - discriminant_limit(&spec, lambda, n).unwrap()).abs();
            }
        }
        parts.push(format!("λ={lambda}: max {worst:.3} vs {bound}"));
        if worst >= bound {
            failing.push(lambda);
            explained &= limit_gap < 0.05 * worst.abs() && worst < -4.0 * (lambda * lambda - 1.0) + 0.05;
        }
    }
    let passed = failing.is_empty();
    let expected_failure = (!passed && explained && failing.iter().all(|l: &f64| l.abs() == 1.25)).then(|| {
        "for |λ| = 1.25 the discriminant tends to -4(λ² - c²φφ) ≥ -2.25 > -2λ²; the observed maxima track that limit"
            .to_string()
    });
    Verdict {
        outcome: Outcome::new(passed, parts.join("; ")),
        expected_failure,
    }
}

fn barrier_pipeline_check() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();

    let spec = modulated();
    let derived = derive_barrier_layout(&spec, (-0.5, 0.5), 0.5, 0.1, 600).unwrap();
    let caps = barrier_caps(&spec, &derived.layout).unwrap();
    for gamma in [0.01, 0.1, 1.0] {
        let sum = criterion_partial_sum(&derived.layout, &caps, gamma, derived.layout.len());
        passed &= sum.verdict == SeriesVerdict::ConvergentEvidence;
        parts.push(format!("γ={gamma}: {:?} (last ratio {:.3})", sum.verdict, sum.last_ratio_bound));
    }

    let spec = ModelSpec::power_modulated(0.1, 0.2, 1.0, 2.0, 1.0);
    let cfg = PipelineConfig {
        window: (-0.5, 0.5),
        x0: 0.5,
        eps_phase: 0.1,
        phases: 600,
        tested: 14,
        energies: (0..20).map(|j| -0.5 + (j as f64 + 0.6234) / 20.0).collect(),
        gammas: vec![0.01, 0.1, 1.0],
        scan_n: 1 << 16,
    };
    let report = barrier_pipeline(&spec, &cfg).unwrap();
    let settled = report.settled_from();
    passed &= settled.is_some();
    let worst_tail = settled.map(|k| {
        report.rows[k..]
            .iter()
            .filter_map(|r| r.b_k)
            .fold(0.0, f64::max)
    });
    parts.push(format!(
        "α=0.1 pipeline: b_k ≤ 1/32 from barrier {} on ({} rows, 20 energies, max {:.2e})",
        settled.map_or("none".to_string(), |k| report.rows[k].k.to_string()),
        report.rows.len(),
        worst_tail.unwrap_or(f64::NAN)
    ));

    let eta0 = report.rates.eta0;
    let etas: Vec<f64> = (0..8).map(|j| eta0 * 0.5f64.powi(j)).collect();
    let layout = &report.derived.layout;
    let start = 12;
    let n = layout.centers[start + 3] + layout.half_lengths[start + 3] + 2;
    let mut worst_ratio = 0.0f64;
    for &energy in &[cfg.energies[3], cfg.energies[12]] {
        let tail = l2_tail_check(&spec, layout, energy, &etas, n, start).unwrap();
        passed &= tail.all_dominated();
        worst_ratio = worst_ratio.max(tail.max_ratio());
    }
    parts.push(format!(
        "head dominance on 8 η in (0, {eta0:.4}] at N = {n}: max total/head {worst_ratio:.6}"
    ));
    Outcome::new(passed, parts.join("; ")).into()
}

fn structural_properties() -> Verdict {
    type Property = fn(u32) -> Result<(), String>;
    let checks: [(&str, Property, u32); 6] = [
        ("wronskian", prop_wronskian, 64),
        ("herglotz", prop_herglotz, 128),
        ("transfer", prop_transfer, 64),
        ("cutoff", prop_cutoff_support, 128),
        ("composite", prop_composite_identity, 128),
        ("csv", prop_csv_determinism, 16),
    ];
    let mut failed = Vec::new();
    for (name, check, cases) in checks {
        if let Err(e) = check(cases) {
            failed.push(format!("{name}: {e}"));
        }
    }
    let detail = if failed.is_empty() {
        "wronskian, herglotz, transfer, cutoff, composite, csv all hold".to_string()
    } else {
        failed.join("; ")
    };
    Outcome::new(failed.is_empty(), detail).into()
}

fn main() {
    type Criterion = (u32, &'static str, u64, fn() -> Verdict);
    let criteria: [Criterion; 11] = [
        (1, "envelope validity, Example 1 gap", 10, envelope_example1),
        (2, "envelope validity, Example 2 via sign flip", 10, envelope_example2),
        (3, "Example 1 decay exponent", 10, sharpness_example1),
        (4, "Example 2 decay asymptotics", 10, sharpness_example2),
        (5, "eigensolver vs characteristic polynomial", 5, || eigensolver_oracle(200, 1).into()),
        (6, "resolvent vs dense inverse", 5, || resolvent_oracle(100, 2).into()),
        (7, "inverse-norm bounds certification", 10, || lemma_certification(1000, 3).into()),
        (8, "Weyl sequence quotients", 60, weyl_sequence),
        (9, "transfer-matrix discriminant", 30, discriminant),
        (10, "barrier criterion pipeline", 120, barrier_pipeline_check),
        (11, "structural invariants", 30, structural_properties),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(budget);
        let (status, detail) = match result {
            Ok(v) => {
                let ok = v.outcome.passed && within;
                let status = match (ok, &v.expected_failure) {
                    (true, _) => "PASS",
                    (false, Some(_)) if within => "XFAIL",
                    _ => "FAIL",
                };
                let mut detail = v.outcome.detail;
                if let (false, Some(why)) = (v.outcome.passed, &v.expected_failure) {
                    detail = format!("{detail} [expected: {why}]");
                }
                (status, detail)
            }
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        if status == "FAIL" {
            unexpected += 1;
        }
        println!(
            "criterion {id:>2} {status:<5} {name} ({:.2} s, budget {budget} s): {detail}",
            elapsed.as_secs_f64()
        );
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
