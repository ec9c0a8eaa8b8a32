//! Experiment runner behind the `jacobi-decay` binary: JSON configs in,
//! CSV tables, gnuplot scripts and a JSON manifest out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{SeriesVerdict, BLOCK_DISTANCE_REL};
use crate::envelopes::{bounds_check, GapWindow, ENVELOPE_SLACK};
use crate::error::{Error, Result};
use crate::mobility::{barrier_pipeline, weyl_quotients, PipelineConfig, WeylSequenceSpec, BK_THRESHOLD};
use crate::model::{truncate, ModelSpec};
use crate::solutions::{discriminant_limit, discriminant_v, fit_asymptotics, Basis, DEGENERACY_RATIO};
use crate::tridiag::{eigs_in_window, resolvent_column, SpectrumQuery, DEFAULT_TOL, SINGULAR_GAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Resolvent,
    BoundsCheck,
    Example1,
    Example2,
    Barriers,
    Mobility,
    Eigs,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Resolvent => "resolvent",
            Experiment::BoundsCheck => "bounds-check",
            Experiment::Example1 => "example1",
            Experiment::Example2 => "example2",
            Experiment::Barriers => "barriers",
            Experiment::Mobility => "mobility",
            Experiment::Eigs => "eigs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelSpec,
    #[serde(default)]
    pub parameters: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotStyle {
    Semilogy,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotRequest {
    pub x: String,
    pub columns: Vec<String>,
    #[serde(default = "default_style")]
    pub style: PlotStyle,
}

fn default_style() -> PlotStyle {
    PlotStyle::Semilogy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    /// `count` points strictly inside `(lo, hi)`, evenly spaced.
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.count + 1) as f64;
        (1..=self.count).map(|j| self.lo + step * j as f64).collect()
    }
}

fn default_scan() -> usize {
    1 << 16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolventParams {
    z: [f64; 2],
    n: usize,
    #[serde(flatten)]
    io: OutputParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsParams {
    #[serde(default)]
    lambdas: Option<Vec<f64>>,
    #[serde(default)]
    grid: Option<Grid>,
    n: usize,
    #[serde(default)]
    skirt: Option<usize>,
    #[serde(default)]
    window: Option<GapWindow>,
    #[serde(default = "default_scan")]
    scan_n: usize,
    #[serde(default = "one")]
    stride: usize,
    #[serde(flatten)]
    io: OutputParams,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitParams {
    #[serde(default)]
    lambda: f64,
    n: usize,
    fit: (usize, usize),
    #[serde(flatten)]
    io: OutputParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscriminantParams {
    lambdas: Vec<f64>,
    n_lo: usize,
    n_hi: usize,
    points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MobilityParams {
    lambdas: Vec<f64>,
    n_max: usize,
    #[serde(default)]
    discriminant: Option<DiscriminantParams>,
    #[serde(flatten)]
    io: OutputParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarrierParams {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    #[serde(flatten)]
    io: OutputParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EigsParams {
    #[serde(default = "one")]
    lo: usize,
    hi: usize,
    window: (f64, f64),
    #[serde(flatten)]
    io: OutputParams,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct OutputParams {
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    plot: Option<PlotRequest>,
}

/// Plain-text table written as comma-separated values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header line plus one line per row, `\n`-terminated. Floats use the
    /// shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}"),
                    Cell::Float(v) => write!(out, "{v:?}"),
                    Cell::Bool(v) => write!(out, "{v}"),
                }
                .expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// Gnuplot script plotting `columns` against `x` from the CSV at
/// `csv_path`, which is referenced by file name so the script can sit next
/// to it.
pub fn emit_plot_script(csv_path: &Path, x: &str, columns: &[String], style: PlotStyle) -> Result<String> {
    let text = fs::read_to_string(csv_path)?;
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
    let index = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .map(|j| j + 1)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let xi = index(x)?;
    let mut picked = Vec::with_capacity(columns.len());
    for col in columns {
        picked.push((col, index(col)?));
    }
    let file = csv_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    if style == PlotStyle::Semilogy {
        script.push_str("set logscale y\n");
    }
    let _ = writeln!(script, "set xlabel '{x}'");
    script.push_str("set key top right\n");
    let series: Vec<String> = picked
        .iter()
        .enumerate()
        .map(|(j, (col, ci))| {
            let source = if j == 0 { format!("'{file}'") } else { "''".to_string() };
            format!("{source} using {xi}:{ci} skip 1 with lines title '{col}'")
        })
        .collect();
    if series.is_empty() {
        script.push_str("# no columns requested\n");
    } else {
        let _ = writeln!(script, "plot {}", series.join(", \\\n     "));
    }
    Ok(script)
}

/// Files written by a run and whether every verification passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub verified: bool,
    pub manifest: Value,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.verified {
            EXIT_OK
        } else {
            EXIT_VERIFICATION
        }
    }
}

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidModel(_)
        | Error::Config(_)
        | Error::NonPositiveWeight { .. }
        | Error::BadEpsilon(_)
        | Error::OutsideGap { .. }
        | Error::OutsideHalfLine { .. }
        | Error::LayoutOverlap { .. }
        | Error::NonZeroDiagonal
        | Error::PhaseNotFound { .. }
        | Error::MissingColumn(_)
        | Error::InsufficientWindow { .. }
        | Error::IndexOutOfWindow { .. } => EXIT_CONFIG,
        Error::NearSingular { .. }
        | Error::NotUnbounded { .. }
        | Error::UnverifiedTail { .. }
        | Error::Overflow(_)
        | Error::DegenerateBasis(_)
        | Error::DeltaTooLarge { .. }
        | Error::BetaTooLarge { .. }
        | Error::OnBlockSpectrum { .. }
        | Error::Io(_) => EXIT_NUMERICAL,
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate_config(&config)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn params<T: for<'de> Deserialize<'de>>(config: &ExperimentConfig) -> Result<T> {
    let value = if config.parameters.is_null() {
        json!({})
    } else {
        config.parameters.clone()
    };
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", config.experiment.name())))
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::Config(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

/// Model validation plus the experiment-specific parameter checks.
pub fn validate_config(config: &ExperimentConfig) -> Result<()> {
    config.model.validate()?;
    match config.experiment {
        Experiment::Resolvent => {
            let p: ResolventParams = params(config)?;
            positive("n", p.n)?;
        }
        Experiment::BoundsCheck => {
            let p: BoundsParams = params(config)?;
            positive("n", p.n)?;
            positive("stride", p.stride)?;
            if p.lambdas.is_some() == p.grid.is_some() {
                return Err(Error::Config("give exactly one of `lambdas` and `grid`".into()));
            }
            bounds_window(&config.model, p.window)?;
        }
        Experiment::Example1 | Experiment::Example2 => {
            let p: FitParams = params(config)?;
            if !(p.fit.0 >= 1 && p.fit.0 < p.fit.1 && p.fit.1 <= p.n) {
                return Err(Error::Config("fit window must satisfy 1 ≤ lo < hi ≤ n".into()));
            }
            if config.experiment == Experiment::Example1 && 2 * p.fit.1 > p.n {
                return Err(Error::Config("example1 fits u(2n), so 2·fit.hi must not exceed n".into()));
            }
        }
        Experiment::Barriers => {
            let p: BarrierParams = params(config)?;
            if p.pipeline.energies.is_empty() || p.pipeline.gammas.iter().any(|g| !(*g > 0.0)) {
                return Err(Error::Config("need energies and positive gammas".into()));
            }
        }
        Experiment::Mobility => {
            let p: MobilityParams = params(config)?;
            positive("n_max", p.n_max)?;
            if let Some(d) = &p.discriminant {
                if !(d.n_lo >= 1 && d.n_lo <= d.n_hi && d.points >= 1) {
                    return Err(Error::Config("discriminant range must satisfy 1 ≤ n_lo ≤ n_hi".into()));
                }
            }
        }
        Experiment::Eigs => {
            let p: EigsParams = params(config)?;
            if !(p.lo >= 1 && p.lo <= p.hi && p.window.0 < p.window.1) {
                return Err(Error::Config("need 1 ≤ lo ≤ hi and a nonempty window".into()));
            }
        }
    }
    Ok(())
}

fn bounds_window(model: &ModelSpec, window: Option<GapWindow>) -> Result<GapWindow> {
    match (window, model) {
        (Some(w), _) => Ok(w),
        (None, ModelSpec::Example1 { c1, c2 }) => {
            let rho = (c1 - c2).abs();
            GapWindow::finite(-rho, rho)
        }
        _ => Err(Error::Config("bounds-check needs a `window` for this model".into())),
    }
}

fn tolerances() -> Value {
    json!({
        "envelope_slack": ENVELOPE_SLACK,
        "bisection_tol": DEFAULT_TOL,
        "singular_gap": SINGULAR_GAP,
        "degeneracy_ratio": DEGENERACY_RATIO,
        "block_distance_rel": BLOCK_DISTANCE_REL,
    })
}

struct Product {
    tables: Vec<(String, Table)>,
    constants: Value,
    summary: Value,
    verified: bool,
    io: OutputParams,
}

/// Runs `config`, writing `<output>.csv`, `<output>.manifest.json` and, if
/// requested, `<output>.gp` into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    validate_config(config)?;
    let product = match config.experiment {
        Experiment::Resolvent => run_resolvent(config)?,
        Experiment::BoundsCheck => run_bounds(config)?,
        Experiment::Example1 => run_example1(config)?,
        Experiment::Example2 => run_example2(config)?,
        Experiment::Barriers => run_barriers(config)?,
        Experiment::Mobility => run_mobility(config)?,
        Experiment::Eigs => run_eigs(config)?,
    };
    let base = product
        .io
        .output
        .clone()
        .unwrap_or_else(|| config.experiment.name().to_string());
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut names = Vec::new();
    for (suffix, table) in &product.tables {
        let name = format!("{base}{suffix}.csv");
        let path = out_dir.join(&name);
        fs::write(&path, table.to_csv())?;
        files.push(path);
        names.push(name);
    }
    if let Some(plot) = &product.io.plot {
        let script = emit_plot_script(&files[0], &plot.x, &plot.columns, plot.style)?;
        let name = format!("{base}.gp");
        let path = out_dir.join(&name);
        fs::write(&path, script)?;
        files.push(path);
        names.push(name);
    }
    let manifest = json!({
        "experiment": config.experiment,
        "model": config.model,
        "parameters": config.parameters,
        "constants": product.constants,
        "tolerances": tolerances(),
        "summary": product.summary,
        "verified": product.verified,
        "outputs": names,
        "generated": generated_stamp(),
    });
    let path = out_dir.join(format!("{base}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    files.push(path);
    Ok(RunOutcome {
        files,
        verified: product.verified,
        manifest,
    })
}

fn generated_stamp() -> Value {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({ "tool": concat!("jacobi-decay ", env!("CARGO_PKG_VERSION")), "unix_time": secs })
}

fn run_resolvent(config: &ExperimentConfig) -> Result<Product> {
    let p: ResolventParams = params(config)?;
    let slice = truncate(&config.model, 1, p.n)?;
    let z = Complex64::new(p.z[0], p.z[1]);
    let column = resolvent_column(&slice, z)?;
    let mut table = Table::new(&["n", "re", "im", "abs"]);
    for (i, v) in column.values.iter().enumerate() {
        table.push(vec![(i + 1).into(), v.re.into(), v.im.into(), v.norm().into()]);
    }
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({}),
        summary: json!({ "residual": column.residual }),
        verified: true,
        io: p.io,
    })
}

fn run_bounds(config: &ExperimentConfig) -> Result<Product> {
    let p: BoundsParams = params(config)?;
    let window = bounds_window(&config.model, p.window)?;
    let lambdas = match (&p.lambdas, &p.grid) {
        (Some(l), _) => l.clone(),
        (None, Some(g)) => g.points(),
        (None, None) => unreachable!("validated"),
    };
    let skirt = p.skirt.unwrap_or(p.n / 10);
    let (constants, checks) = bounds_check(&config.model, &window, &lambdas, p.n, skirt, p.scan_n)?;
    let mut table = Table::new(&["lambda", "n", "abs_resolvent", "envelope", "pass"]);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for check in &checks {
        violations += check.report.violations.len();
        worst = worst.max(check.report.worst_ratio);
        for i in (0..check.report.checked).step_by(p.stride) {
            let value = check.column.values[i].norm();
            let env = check.envelope[i];
            let pass = value <= env * (1.0 + ENVELOPE_SLACK);
            table.push(vec![check.lambda.into(), (i + 1).into(), value.into(), env.into(), pass.into()]);
        }
    }
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({
            "c1": constants.c1,
            "c2": constants.c2,
            "eta": crate::envelopes::eta_thm1(&window, &constants),
            "gamma": constants.gamma,
            "window": window,
        }),
        summary: json!({ "violations": violations, "worst_ratio": worst, "skirt": skirt }),
        verified: violations == 0,
        io: p.io,
    })
}

fn run_example1(config: &ExperimentConfig) -> Result<Product> {
    let p: FitParams = params(config)?;
    let slice = truncate(&config.model, 1, p.n)?;
    let column = resolvent_column(&slice, Complex64::new(p.lambda, 0.0))?;
    let half = p.n / 2;
    let mut values = vec![0.0; half + 1];
    let mut table = Table::new(&["n", "abs_u_even"]);
    for (m, slot) in values.iter_mut().enumerate().skip(1) {
        *slot = column.at(2 * m).norm();
        table.push(vec![m.into(), (*slot).into()]);
    }
    let fit = fit_asymptotics(&values, p.fit, &[Basis::Constant, Basis::LogN])?;
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({}),
        summary: json!({ "fit": fit, "slope": fit.coefficient("ln_n") }),
        verified: true,
        io: p.io,
    })
}

fn run_example2(config: &ExperimentConfig) -> Result<Product> {
    let p: FitParams = params(config)?;
    let slice = truncate(&config.model, 1, p.n)?;
    let column = resolvent_column(&slice, Complex64::new(p.lambda, 0.0))?;
    let mut values = vec![0.0; p.n + 1];
    let mut table = Table::new(&["n", "abs_resolvent"]);
    for (m, slot) in values.iter_mut().enumerate().skip(1) {
        *slot = column.at(m).norm();
        table.push(vec![m.into(), (*slot).into()]);
    }
    let fit = fit_asymptotics(&values, p.fit, &[Basis::Constant, Basis::LogN, Basis::SqrtN])?;
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({}),
        summary: json!({ "fit": fit }),
        verified: true,
        io: p.io,
    })
}

fn run_barriers(config: &ExperimentConfig) -> Result<Product> {
    let p: BarrierParams = params(config)?;
    let report = barrier_pipeline(&config.model, &p.pipeline)?;
    let mut table = Table::new(&["k", "cap", "term", "a_k", "alpha_k", "b_k"]);
    for row in &report.rows {
        table.push(vec![
            row.k.into(),
            row.cap.into(),
            row.term.into(),
            row.a_k.into(),
            row.alpha_k.into(),
            row.b_k.unwrap_or(f64::NAN).into(),
        ]);
    }
    let convergent = report
        .sums
        .iter()
        .all(|(_, s)| s.verdict == SeriesVerdict::ConvergentEvidence);
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({
            "c1": report.constants.c1,
            "c2": report.constants.c2,
            "gamma0": report.rates.gamma0,
            "eta0": report.rates.eta0,
            "d0": report.rates.d0,
            "c": report.rates.c,
            "gamma1": report.gamma1,
            "gap": report.gap,
        }),
        summary: json!({
            "layout": report.derived.layout,
            "series": report.sums,
            "settled_from": report.settled_from(),
            "bk_threshold": BK_THRESHOLD,
        }),
        verified: convergent,
        io: p.io,
    })
}

fn run_mobility(config: &ExperimentConfig) -> Result<Product> {
    let p: MobilityParams = params(config)?;
    let wspec = WeylSequenceSpec::default_for(&config.model)?;
    let mut table = Table::new(&["lambda", "i", "n_i", "width", "norm_ratio", "quotient"]);
    for &lambda in &p.lambdas {
        for row in weyl_quotients(&config.model, lambda, &wspec, p.n_max)? {
            table.push(vec![
                lambda.into(),
                row.window.i.into(),
                row.window.n_i.into(),
                row.window.width.into(),
                row.norm_ratio.into(),
                row.quotient.into(),
            ]);
        }
    }
    let mut tables = vec![(String::new(), table)];
    if let Some(d) = &p.discriminant {
        let mut disc = Table::new(&["lambda", "n", "discriminant", "limit"]);
        for &lambda in &d.lambdas {
            for n in log_grid(d.n_lo, d.n_hi, d.points) {
                disc.push(vec![
                    lambda.into(),
                    n.into(),
                    discriminant_v(&config.model, lambda, n)?.into(),
                    discriminant_limit(&config.model, lambda, n)?.into(),
                ]);
            }
        }
        tables.push(("_discriminant".to_string(), disc));
    }
    Ok(Product {
        tables,
        constants: json!({ "weyl_sequence": wspec }),
        summary: json!({}),
        verified: true,
        io: p.io,
    })
}

fn run_eigs(config: &ExperimentConfig) -> Result<Product> {
    let p: EigsParams = params(config)?;
    let slice = truncate(&config.model, p.lo, p.hi)?;
    let eigs = eigs_in_window(&SpectrumQuery::new(&slice), p.window.0, p.window.1);
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (j, e) in eigs.iter().enumerate() {
        table.push(vec![j.into(), (*e).into()]);
    }
    Ok(Product {
        tables: vec![(String::new(), table)],
        constants: json!({}),
        summary: json!({ "count": eigs.len() }),
        verified: true,
        io: p.io,
    })
}

/// `points` integers spread geometrically over `[lo, hi]`, deduplicated.
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if points <= 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..points)
        .map(|j| (a + (b - a) * j as f64 / (points - 1) as f64).exp().round() as usize)
        .map(|n| n.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}
