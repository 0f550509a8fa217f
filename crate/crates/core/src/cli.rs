//! Command-line orchestration: loads case and aero files, runs the
//! relaxation sweep and the Monte-Carlo baseline, and renders reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::f16mrac::case::bundled;
use crate::f16mrac::{assemble_closed_loop, AeroCoeffs, AircraftParams, AssemblyOptions, CaseSpec, ClosedLoop, ControlUnits, ModelError, Variant};
use crate::mc::{self, Integrator, McError, SimConfig, SweepProblem};
use crate::relax::{self, BoundEntry, BoundSequence, RelaxError};
use crate::sdp::{self, SolveStatus, SolverOptions};

/// Notice attached to every report: bounds are only as tight as the
/// measure relaxation itself.
pub const NO_RELAXATION_GAP: &str =
    "the measure LP is assumed to have no relaxation gap with respect to the trajectory problem";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Model { path: String, source: ModelError },
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Verify,
    Simulate,
    Compare,
    ExportSdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Validated,
    NotValidated,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Validated => "validated",
            Verdict::NotValidated => "not-validated",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Validated => 0,
            Verdict::NotValidated => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Least favourable of two verdicts.
    fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (NotValidated, _) | (_, NotValidated) => NotValidated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Validated,
        }
    }
}

/// Where the case comes from: a bundled name or a file.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseSource {
    Bundled(String),
    File(PathBuf),
}

impl CaseSource {
    pub fn resolve(arg: &str) -> Self {
        if bundled::by_name(arg).is_some() && !Path::new(arg).exists() {
            CaseSource::Bundled(arg.to_string())
        } else {
            CaseSource::File(PathBuf::from(arg))
        }
    }

    fn load(&self) -> Result<CaseSpec, CliError> {
        match self {
            CaseSource::Bundled(name) => {
                let text = bundled::by_name(name).ok_or_else(|| CliError::Usage(format!("unknown bundled case `{name}`")))?;
                CaseSpec::parse(text).map_err(|source| CliError::Model {
                    path: name.clone(),
                    source,
                })
            }
            CaseSource::File(p) => CaseSpec::load(p).map_err(|source| CliError::Model {
                path: p.display().to_string(),
                source,
            }),
        }
    }

    fn stem(&self) -> String {
        match self {
            CaseSource::Bundled(name) => name.clone(),
            CaseSource::File(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: CaseSource,
    /// Aero data file; the bundled Morelli fit when absent.
    pub aero: Option<PathBuf>,
    pub mode: Mode,
    pub d_max: u32,
    pub solver: SolverOptions,
    pub sim: SimConfig,
    /// Output prefix for the `.txt`/`.json` pair, or directory for SDPA export.
    pub out: Option<PathBuf>,
    /// Ignored in compare mode, which always runs both.
    pub variants: Vec<Variant>,
    pub assembly: AssemblyOptions,
}

impl RunConfig {
    pub fn new(case: CaseSource, mode: Mode, d_max: u32) -> Self {
        Self {
            case,
            aero: None,
            mode,
            d_max,
            solver: SolverOptions::default(),
            sim: SimConfig::default(),
            out: None,
            variants: vec![Variant::LqrMrac],
            assembly: AssemblyOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.d_max < 1 {
            return Err(CliError::Usage("--dmax must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(CliError::Usage("no controller variant selected".into()));
        }
        self.sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    fn run_variants(&self) -> Vec<Variant> {
        match self.mode {
            Mode::Compare => vec![Variant::Lqr, Variant::LqrMrac],
            _ => self.variants.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    /// `None` when a trajectory diverged (the worst error is infinite).
    pub j_mc: Option<f64>,
    pub diverged: usize,
    pub total: usize,
    pub worst_completed: f64,
    /// Initial state (physical units) of the worst completed trajectory.
    pub argmax: Vec<f64>,
    pub grid: usize,
    pub step: f64,
    pub integrator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub bounds: BoundSequence,
    pub monte_carlo: Option<McSummary>,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub case: String,
    pub mode: Mode,
    pub d_max: u32,
    pub threshold: f64,
    pub state_names: Vec<String>,
    pub variants: Vec<VariantReport>,
    pub verdict: Verdict,
    pub assumptions: Vec<String>,
    /// Files written by `export-sdp`.
    pub exported: Vec<String>,
}

impl ValidationReport {
    pub fn exit_code(&self) -> i32 {
        match self.mode {
            Mode::ExportSdp => 0,
            _ => self.verdict.exit_code(),
        }
    }
}

/// Verdict from a bound sequence: validated when the bound at the highest
/// order is optimal and below the threshold.
pub fn bound_verdict(bounds: &BoundSequence, d_max: u32, threshold: f64) -> Verdict {
    let Some(last) = bounds.entries.iter().find(|e| e.order == d_max) else {
        return Verdict::Inconclusive;
    };
    let optimal = last.status == SolveStatus::Optimal.label();
    match last.bound {
        Some(b) if optimal && b <= threshold => Verdict::Validated,
        Some(_) if optimal => Verdict::NotValidated,
        Some(_) => Verdict::Inconclusive,
        None if last.status == SolveStatus::Infeasible.label() => Verdict::NotValidated,
        None => Verdict::Inconclusive,
    }
}

/// A sweep can refute but never certify.
fn mc_verdict(mc: &McSummary, threshold: f64) -> Verdict {
    match mc.j_mc {
        Some(j) if j <= threshold => Verdict::Inconclusive,
        _ => Verdict::NotValidated,
    }
}

fn load_closed_loops(cfg: &RunConfig) -> Result<(String, Vec<ClosedLoop>), CliError> {
    let case = cfg.case.load()?;
    let aero = match &cfg.aero {
        Some(p) => AeroCoeffs::load(p).map_err(|source| CliError::Model {
            path: p.display().to_string(),
            source,
        })?,
        None => AeroCoeffs::morelli(),
    };
    let params = AircraftParams::f16();
    let loops = cfg
        .run_variants()
        .into_iter()
        .map(|v| {
            assemble_closed_loop(&case, &params, &aero, v, &cfg.assembly).map_err(|source| CliError::Model {
                path: cfg.case.stem(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((cfg.case.stem(), loops))
}

/// Builds and solves one relaxation order.
pub fn solve_order(cl: &ClosedLoop, d: u32, opts: &SolverOptions) -> Result<BoundEntry, RelaxError> {
    let start = Instant::now();
    let problem = relax::build(&cl.system, &cl.terminal_cost, &cl.running_cost, d)?;
    let form = sdp::lower(&problem);
    let result = sdp::solve(&form, opts);
    let wall_time = start.elapsed().as_secs_f64();
    log::info!(
        "{} {} d={d}: {} after {} iterations, gap {:.1e}, {:.2}s",
        cl.name,
        cl.variant.label(),
        result.status,
        result.iterations,
        result.gap,
        wall_time
    );
    let (bound, inexact) = match relax::extract_bound(&problem, &result) {
        Ok(b) => (Some(b.value), b.inexact),
        Err(RelaxError::Solver { .. }) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(BoundEntry {
        order: d,
        bound,
        status: result.status.label().to_string(),
        inexact,
        gap: result.gap,
        wall_time,
    })
}

fn bound_sequence(cl: &ClosedLoop, cfg: &RunConfig) -> Result<BoundSequence, CliError> {
    let entries = (1..=cfg.d_max)
        .into_par_iter()
        .map(|d| solve_order(cl, d, &cfg.solver))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoundSequence { entries })
}

fn monte_carlo(cl: &ClosedLoop, sim: &SimConfig) -> Result<McSummary, CliError> {
    let report = mc::sweep(&SweepProblem::from(cl), sim)?;
    let worst = report.worst_completed();
    Ok(McSummary {
        j_mc: report.j_mc.is_finite().then_some(report.j_mc),
        diverged: report.diverged,
        total: report.total,
        worst_completed: worst,
        argmax: report.argmax.clone(),
        grid: sim.grid,
        step: sim.step,
        integrator: format!("{:?}", sim.integrator).to_lowercase(),
    })
}

fn run_variant(cl: &ClosedLoop, cfg: &RunConfig) -> Result<VariantReport, CliError> {
    let mut diagnostics = Vec::new();
    let bounds = match cfg.mode {
        Mode::Verify | Mode::Compare => bound_sequence(cl, cfg)?,
        _ => BoundSequence::default(),
    };
    for e in &bounds.entries {
        if e.bound.is_none() {
            diagnostics.push(format!("order {}: relaxation {}, no bound available", e.order, e.status));
        } else if e.inexact {
            diagnostics.push(format!("order {}: solver stopped early ({}), gap {:.2e}", e.order, e.status, e.gap));
        }
    }
    let monte_carlo = match cfg.mode {
        Mode::Simulate | Mode::Compare => Some(monte_carlo(cl, &cfg.sim)?),
        _ => None,
    };
    let mut verdict = match cfg.mode {
        Mode::Verify | Mode::Compare => bound_verdict(&bounds, cfg.d_max, cl.threshold),
        _ => Verdict::Inconclusive,
    };
    if let Some(mc) = &monte_carlo {
        if mc.diverged > 0 {
            diagnostics.push(format!("{} of {} simulated trajectories diverged", mc.diverged, mc.total));
        }
        if cfg.mode == Mode::Simulate {
            verdict = mc_verdict(mc, cl.threshold);
        } else if let (Some(j), Some(b)) = (mc.j_mc, bounds.best()) {
            if j > b + 1e-6 {
                diagnostics.push(format!("simulated worst case {j:.6e} exceeds the bound {b:.6e}"));
            }
        }
    }
    Ok(VariantReport {
        variant: cl.variant,
        bounds,
        monte_carlo,
        verdict,
        diagnostics,
    })
}

fn export(cl: &ClosedLoop, cfg: &RunConfig, stem: &str) -> Result<Vec<String>, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let tag = cl.variant.label().replace('+', "-");
    let mut written = Vec::new();
    for d in 1..=cfg.d_max {
        let problem = relax::build(&cl.system, &cl.terminal_cost, &cl.running_cost, d)?;
        let text = sdp::export_sdpa(&sdp::lower(&problem));
        let path = dir.join(format!("{stem}_{tag}_d{d}.dat-s"));
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

pub fn run(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    cfg.validate()?;
    let (stem, loops) = load_closed_loops(cfg)?;
    let first = &loops[0];
    let mut exported = Vec::new();
    let variants = if cfg.mode == Mode::ExportSdp {
        for cl in &loops {
            exported.extend(export(cl, cfg, &stem)?);
        }
        Vec::new()
    } else {
        loops.par_iter().map(|cl| run_variant(cl, cfg)).collect::<Result<Vec<_>, _>>()?
    };
    let verdict = variants.iter().map(|v| v.verdict).reduce(Verdict::combine).unwrap_or(Verdict::Inconclusive);
    let mut assumptions = vec![NO_RELAXATION_GAP.to_string()];
    if cfg.mode == Mode::Simulate {
        assumptions.push("a finite grid sweep can refute the requirement but cannot certify it".into());
    }
    Ok(ValidationReport {
        case: first.name.clone(),
        mode: cfg.mode,
        d_max: cfg.d_max,
        threshold: first.threshold,
        state_names: first.state_names(),
        variants,
        verdict,
        assumptions,
        exported,
    })
}

fn format_bound(e: &BoundEntry) -> String {
    match e.bound {
        Some(b) if e.inexact => format!("{b:.5e} ({})", e.status),
        Some(b) => format!("{b:.5e}"),
        None => e.status.clone(),
    }
}

fn format_mc(mc: &McSummary) -> String {
    match mc.j_mc {
        Some(j) => format!("{j:.5e}"),
        None => format!("inf ({}/{} diverged)", mc.diverged, mc.total),
    }
}

/// Aligned text table with one `Rel Ord | Upper Bnd J | CPU [s]` block per
/// variant, side by side.
pub fn render_table(report: &ValidationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case: {}", report.case);
    let _ = writeln!(out, "threshold: {:.3e}", report.threshold);
    const ORD: usize = 7;
    const BND: usize = 26;
    const CPU: usize = 10;
    let block = ORD + BND + CPU + 4;
    let mut titles = String::new();
    let mut heads = String::new();
    for v in &report.variants {
        let _ = write!(titles, "{:<block$}", v.variant.label().to_uppercase());
        let _ = write!(heads, "{:<ORD$}  {:<BND$}  {:>CPU$}    ", "Rel Ord", "Upper Bnd J", "CPU [s]");
    }
    let _ = writeln!(out, "{}", titles.trim_end());
    let rows = report.variants.iter().map(|v| v.bounds.entries.len()).max().unwrap_or(0);
    if rows > 0 {
        let _ = writeln!(out, "{}", heads.trim_end());
    }
    for r in 0..rows {
        let mut line = String::new();
        for v in &report.variants {
            match v.bounds.entries.get(r) {
                Some(e) => {
                    let _ = write!(line, "{:<ORD$}  {:<BND$}  {:>CPU$.2}    ", e.order, format_bound(e), e.wall_time);
                }
                None => line.push_str(&" ".repeat(block)),
            }
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    if report.variants.iter().any(|v| v.monte_carlo.is_some()) {
        let mut line = String::new();
        for v in &report.variants {
            let text = v.monte_carlo.as_ref().map(format_mc).unwrap_or_default();
            let _ = write!(line, "{:<ORD$}  {:<w$}", "MC", text, w = BND + CPU + 4);
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    for v in &report.variants {
        let _ = writeln!(out, "{}: {}", v.variant.label(), v.verdict.label());
        for d in &v.diagnostics {
            let _ = writeln!(out, "  note: {d}");
        }
    }
    for f in &report.exported {
        let _ = writeln!(out, "wrote {f}");
    }
    for a in &report.assumptions {
        let _ = writeln!(out, "assumption: {a}");
    }
    out
}

/// Machine-readable twin of [`render_table`] with stable key names.
pub fn render_json(report: &ValidationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Command-line flags.
#[derive(Debug, Parser)]
#[command(name = "momentvv", version, about = "Worst-case terminal bounds for polynomial closed loops")]
pub struct Args {
    /// Case file, or one of the bundled cases: case1, case2, case3, surrogate.
    #[arg(long)]
    pub case: String,
    /// Aerodynamic coefficient file (defaults to the bundled polynomial fit).
    #[arg(long)]
    pub aero: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "verify")]
    pub mode: Mode,
    /// Highest relaxation order.
    #[arg(long, default_value_t = 3)]
    pub dmax: u32,
    /// lqr, lqr+mrac or both.
    #[arg(long, default_value = "lqr+mrac")]
    pub variant: String,
    /// Prefix for the report pair (`.txt`, `.json`); directory for export-sdp.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte-Carlo points per swept dimension.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Integration step in seconds.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// rk4 or euler.
    #[arg(long, default_value = "rk4")]
    pub integrator: String,
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub feas_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Sign applied to the adaptive-loop-recovery term.
    #[arg(long, default_value_t = crate::f16mrac::mrac::DEFAULT_ALR_SIGN, allow_hyphen_values = true)]
    pub alr_sign: f64,
    /// Units of the elevator deflection in the aero polynomials: radians or degrees.
    #[arg(long, default_value = "radians")]
    pub control_units: String,
}

impl Args {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let variants = match self.variant.as_str() {
            "both" => vec![Variant::Lqr, Variant::LqrMrac],
            v => vec![v.parse::<Variant>().map_err(|_| CliError::Usage(format!("unknown variant `{v}`")))?],
        };
        let integrator: Integrator = self
            .integrator
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown integrator `{}`", self.integrator)))?;
        let control_units = match self.control_units.as_str() {
            "radians" | "rad" => ControlUnits::Radians,
            "degrees" | "deg" => ControlUnits::Degrees,
            u => return Err(CliError::Usage(format!("unknown control units `{u}`"))),
        };
        let cfg = RunConfig {
            case: CaseSource::resolve(&self.case),
            aero: self.aero,
            mode: self.mode,
            d_max: self.dmax,
            solver: SolverOptions {
                gap_tol: self.gap_tol,
                feas_tol: self.feas_tol,
                max_iter: self.max_iter,
            },
            sim: SimConfig {
                step: self.step,
                integrator,
                grid: self.grid,
                record: false,
            },
            out: self.out,
            variants,
            assembly: AssemblyOptions {
                alr_sign: self.alr_sign,
                control_units,
                ..AssemblyOptions::default()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_outputs(report: &ValidationReport, prefix: &Path) -> Result<(), CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    let txt = prefix.with_extension("txt");
    let json = prefix.with_extension("json");
    std::fs::write(&txt, render_table(report)).map_err(|e| io(&txt, e))?;
    std::fs::write(&json, render_json(report)).map_err(|e| io(&json, e))?;
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
        }
    };
    let result = args.into_config().and_then(|cfg| {
        let report = run(&cfg)?;
        print!("{}", render_table(&report));
        if cfg.mode != Mode::ExportSdp {
            if let Some(prefix) = &cfg.out {
                write_outputs(&report, prefix)?;
            }
        }
        Ok(report.exit_code())
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(order: u32, bound: Option<f64>, status: SolveStatus) -> BoundEntry {
        BoundEntry {
            order,
            bound,
            status: status.label().to_string(),
            inexact: status != SolveStatus::Optimal,
            gap: 0.0,
            wall_time: 0.5,
        }
    }

    fn report(variants: Vec<VariantReport>) -> ValidationReport {
        ValidationReport {
            case: "test".into(),
            mode: Mode::Verify,
            d_max: 1,
            threshold: 3e-3,
            state_names: vec!["x".into()],
            variants,
            verdict: Verdict::Inconclusive,
            assumptions: vec![NO_RELAXATION_GAP.into()],
            exported: vec![],
        }
    }

    fn variant(v: Variant, entries: Vec<BoundEntry>) -> VariantReport {
        VariantReport {
            variant: v,
            bounds: BoundSequence { entries },
            monte_carlo: None,
            verdict: Verdict::Inconclusive,
            diagnostics: vec![],
        }
    }

    #[test]
    fn verdict_rules() {
        let seq = |e| BoundSequence { entries: vec![entry(1, Some(1.0), SolveStatus::Optimal), e] };
        assert_eq!(bound_verdict(&seq(entry(2, Some(1e-3), SolveStatus::Optimal)), 2, 3e-3), Verdict::Validated);
        assert_eq!(bound_verdict(&seq(entry(2, Some(3e-3), SolveStatus::Optimal)), 2, 3e-3), Verdict::Validated);
        assert_eq!(bound_verdict(&seq(entry(2, Some(4e-3), SolveStatus::Optimal)), 2, 3e-3), Verdict::NotValidated);
        assert_eq!(bound_verdict(&seq(entry(2, Some(1e-3), SolveStatus::Inaccurate)), 2, 3e-3), Verdict::Inconclusive);
        assert_eq!(bound_verdict(&seq(entry(2, None, SolveStatus::Infeasible)), 2, 3e-3), Verdict::NotValidated);
        assert_eq!(bound_verdict(&seq(entry(2, None, SolveStatus::IterationLimit)), 2, 3e-3), Verdict::Inconclusive);
        assert_eq!(bound_verdict(&seq(entry(2, Some(1e-3), SolveStatus::Optimal)), 3, 3e-3), Verdict::Inconclusive);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Verdict::Validated.exit_code(), 0);
        assert_eq!(Verdict::NotValidated.exit_code(), 1);
        assert_eq!(Verdict::Inconclusive.exit_code(), 2);
        assert_eq!(Verdict::Validated.combine(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.combine(Verdict::NotValidated), Verdict::NotValidated);
    }

    #[test]
    fn one_row_table() {
        let r = report(vec![variant(Variant::Lqr, vec![entry(1, Some(0.27416), SolveStatus::Optimal)])]);
        let t = render_table(&r);
        let data: Vec<&str> = t.lines().filter(|l| l.starts_with("1 ")).collect();
        assert_eq!(data.len(), 1);
        assert!(data[0].contains("2.74160e-1"));
        assert!(t.contains("Rel Ord") && t.contains("Upper Bnd J") && t.contains("CPU [s]"));
    }

    #[test]
    fn failed_order_is_annotated() {
        let r = report(vec![variant(
            Variant::LqrMrac,
            vec![entry(3, Some(0.1), SolveStatus::Optimal), entry(4, Some(0.09), SolveStatus::Inaccurate)],
        )]);
        let t = render_table(&r);
        let row = t.lines().find(|l| l.starts_with("4 ")).unwrap();
        assert!(row.contains("inaccurate"));
    }

    #[test]
    fn compare_blocks_side_by_side() {
        let e = vec![entry(1, Some(0.27416), SolveStatus::Optimal)];
        let r = report(vec![variant(Variant::Lqr, e.clone()), variant(Variant::LqrMrac, e)]);
        let t = render_table(&r);
        let title = t.lines().find(|l| l.starts_with("LQR")).unwrap();
        assert!(title.contains("LQR+MRAC"));
        let head = t.lines().find(|l| l.starts_with("Rel Ord")).unwrap();
        assert_eq!(head.matches("Rel Ord").count(), 2);
        let row = t.lines().find(|l| l.starts_with("1 ")).unwrap();
        assert_eq!(row.matches("2.74160e-1").count(), 2);
    }

    #[test]
    fn json_has_stable_keys() {
        let r = report(vec![variant(Variant::LqrMrac, vec![entry(1, None, SolveStatus::Infeasible)])]);
        let v: serde_json::Value = serde_json::from_str(&render_json(&r)).unwrap();
        assert_eq!(v["variants"][0]["variant"], "lqr+mrac");
        assert_eq!(v["variants"][0]["bounds"]["entries"][0]["status"], "infeasible");
        assert!(v["variants"][0]["bounds"]["entries"][0]["bound"].is_null());
        assert_eq!(v["mode"], "verify");
    }

    #[test]
    fn flag_parsing() {
        let args = Args::try_parse_from([
            "momentvv", "--case", "surrogate", "--mode", "compare", "--dmax", "2", "--variant", "both", "--alr-sign", "-1",
            "--integrator", "euler",
        ])
        .unwrap();
        let cfg = args.into_config().unwrap();
        assert_eq!(cfg.case, CaseSource::Bundled("surrogate".into()));
        assert_eq!(cfg.mode, Mode::Compare);
        assert_eq!(cfg.variants.len(), 2);
        assert_eq!(cfg.sim.integrator, Integrator::Euler);
        assert_eq!(cfg.assembly.alr_sign, -1.0);
        let bad = Args::try_parse_from(["momentvv", "--case", "x", "--dmax", "0"]).unwrap();
        assert!(matches!(bad.into_config(), Err(CliError::Usage(_))));
    }

    #[test]
    fn usage_errors_exit_3() {
        assert_eq!(main_with_args(["momentvv", "--mode", "verify"]), 3);
        assert_eq!(main_with_args(["momentvv", "--case", "/nonexistent/case.toml"]), 3);
    }

    #[test]
    fn surrogate_is_validated_at_order_two() {
        let cfg = RunConfig::new(CaseSource::Bundled("surrogate".into()), Mode::Verify, 2);
        let r = run(&cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Validated);
        assert_eq!(r.exit_code(), 0);
        assert!(r.assumptions.iter().any(|a| a == NO_RELAXATION_GAP));
    }
}
