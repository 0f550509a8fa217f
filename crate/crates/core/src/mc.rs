//! Fixed-step simulation of piecewise systems over a grid of initial states.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Normalization, PiecewiseSystem, CONTAINMENT_TOL};
use crate::f16mrac::ClosedLoop;
use crate::poly::{monomials_up_to, Monomial, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("initial state {0:?} is outside the initial set")]
    OutsideInitial(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("trajectory diverged at t = {0}; moments are undefined")]
    Diverged(f64),
    #[error("trajectory has no recorded samples")]
    NotRecorded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            _ => Err(format!("unknown integrator `{s}` (expected euler or rk4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step in the system's time units.
    pub step: f64,
    pub integrator: Integrator,
    /// Points per swept dimension.
    pub grid: usize,
    /// Keep every sample (needed for moments and dumps).
    pub record: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            integrator: Integrator::Rk4,
            grid: 21,
            record: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(McError::InvalidConfig("step must be positive".into()));
        }
        if self.grid < 2 {
            return Err(McError::InvalidConfig("grid needs at least 2 points per dimension".into()));
        }
        Ok(())
    }
}

/// Shared monomial table: every monomial is a parent times one variable, so
/// a point is evaluated with one multiply per monomial.
#[derive(Debug, Clone)]
struct MonomialTable {
    /// `(parent, var)`; entry 0 is the constant monomial.
    steps: Vec<(usize, usize)>,
}

impl MonomialTable {
    fn eval(&self, point: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.push(1.0);
        for &(p, v) in &self.steps[1..] {
            let val = buf[p] * point[v];
            buf.push(val);
        }
    }
}

#[derive(Debug, Clone)]
struct SparseDot(Vec<(usize, f64)>);

impl SparseDot {
    #[inline]
    fn eval(&self, buf: &[f64]) -> f64 {
        self.0.iter().map(|&(i, c)| c * buf[i]).sum()
    }
}

/// A piecewise system lowered to straight-line evaluation code.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    table: MonomialTable,
    cell_sets: Vec<Vec<SparseDot>>,
    cell_fields: Vec<Vec<SparseDot>>,
    global: Vec<SparseDot>,
    initial: Vec<SparseDot>,
    nvars: usize,
}

impl CompiledSystem {
    pub fn new(sys: &PiecewiseSystem) -> Self {
        let mut all: BTreeSet<Monomial> = BTreeSet::new();
        let mut collect = |p: &Polynomial| {
            for (m, _) in p.terms() {
                let mut cur = m.clone();
                while all.insert(cur.clone()) && !cur.is_one() {
                    let v = cur.max_var().expect("non-constant");
                    cur = parent_of(&cur, v);
                }
            }
        };
        for c in &sys.cells {
            c.set.constraints().iter().for_each(&mut collect);
            c.field.components().iter().for_each(&mut collect);
        }
        sys.global.constraints().iter().for_each(&mut collect);
        sys.initial.constraints().iter().for_each(&mut collect);
        all.insert(Monomial::one());
        // graded order puts every parent before its children
        let index: BTreeMap<Monomial, usize> = all.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let steps = all
            .iter()
            .map(|m| match m.max_var() {
                None => (0, 0),
                Some(v) => (index[&parent_of(m, v)], v),
            })
            .collect();
        let lower = |p: &Polynomial| SparseDot(p.terms().map(|(m, c)| (index[m], c)).collect());
        Self {
            table: MonomialTable { steps },
            cell_sets: sys.cells.iter().map(|c| c.set.constraints().iter().map(lower).collect()).collect(),
            cell_fields: sys.cells.iter().map(|c| c.field.components().iter().map(lower).collect()).collect(),
            global: sys.global.constraints().iter().map(lower).collect(),
            initial: sys.initial.constraints().iter().map(lower).collect(),
            nvars: sys.registry().len(),
        }
    }

    fn inside(set: &[SparseDot], buf: &[f64]) -> bool {
        set.iter().all(|p| p.eval(buf) >= -CONTAINMENT_TOL)
    }

    fn active(&self, buf: &[f64]) -> Option<usize> {
        self.cell_sets.iter().position(|s| Self::inside(s, buf))
    }

    fn field(&self, cell: usize, buf: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.cell_fields[cell]) {
            *o = f.eval(buf);
        }
    }
}

fn parent_of(m: &Monomial, v: usize) -> Monomial {
    let (rest, e) = m.split_var(v);
    rest.mul(&Monomial::var_pow(v, e - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Diverged { time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Physical states, one row per sample.
    pub states: Vec<Vec<f64>>,
    /// Active cell per sample.
    pub cells: Vec<usize>,
    pub initial: Vec<f64>,
    pub terminal: Vec<f64>,
    pub outcome: Outcome,
    pub step: f64,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    /// Writes one whitespace-separated row per sample: `t`, states, cell.
    pub fn write_dump<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "# t {} cell", names.join(" "))?;
        for ((t, x), c) in self.times.iter().zip(&self.states).zip(&self.cells) {
            write!(w, "{t:.6e}")?;
            for v in x {
                write!(w, " {v:.12e}")?;
            }
            writeln!(w, " {c}")?;
        }
        Ok(())
    }
}

struct Workspace {
    buf: Vec<f64>,
    point: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            buf: Vec::new(),
            point: vec![0.0; n + 1],
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

fn eval_field(sys: &CompiledSystem, cell: usize, t: f64, x: &[f64], ws_buf: &mut Vec<f64>, point: &mut [f64], out: &mut [f64]) {
    point[0] = t;
    point[1..].copy_from_slice(x);
    sys.table.eval(point, ws_buf);
    sys.field(cell, ws_buf, out);
}

fn advance(sys: &CompiledSystem, cell: usize, t: f64, x: &mut [f64], h: f64, method: Integrator, ws: &mut Workspace) {
    let n = x.len();
    match method {
        Integrator::Euler => {
            let Workspace { buf, point, k, .. } = ws;
            eval_field(sys, cell, t, x, buf, point, &mut k[0]);
            for i in 0..n {
                x[i] += h * k[0][i];
            }
        }
        Integrator::Rk4 => {
            let Workspace { buf, point, k, tmp } = ws;
            let [k1, k2, k3, k4] = k;
            eval_field(sys, cell, t, x, buf, point, k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            eval_field(sys, cell, t + 0.5 * h, tmp, buf, point, k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            eval_field(sys, cell, t + 0.5 * h, tmp, buf, point, k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            eval_field(sys, cell, t + h, tmp, buf, point, k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

/// Locates the point state in the global set and a cell; `None` means the
/// trajectory left the domain.
fn classify(sys: &CompiledSystem, t: f64, x: &[f64], ws: &mut Workspace) -> Option<usize> {
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    ws.point[0] = t;
    ws.point[1..].copy_from_slice(x);
    sys.table.eval(&ws.point, &mut ws.buf);
    if !CompiledSystem::inside(&sys.global, &ws.buf) {
        return None;
    }
    sys.active(&ws.buf)
}

/// Integrates from `x0` over `[0, horizon]` with cells dispatched at sample points.
pub fn integrate(sys: &PiecewiseSystem, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory, McError> {
    integrate_compiled(&CompiledSystem::new(sys), sys.horizon, x0, cfg)
}

pub fn integrate_compiled(sys: &CompiledSystem, horizon: f64, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory, McError> {
    cfg.validate()?;
    let n = sys.nvars - 1;
    if x0.len() != n {
        return Err(McError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let mut ws = Workspace::new(n);
    ws.point[0] = 0.0;
    ws.point[1..].copy_from_slice(x0);
    sys.table.eval(&ws.point, &mut ws.buf);
    if !CompiledSystem::inside(&sys.initial, &ws.buf) {
        return Err(McError::OutsideInitial(x0.to_vec()));
    }
    let steps = ((horizon / cfg.step).round() as usize).max(1);
    let h = horizon / steps as f64;
    let mut x = x0.to_vec();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        cells: Vec::new(),
        initial: x0.to_vec(),
        terminal: x0.to_vec(),
        outcome: Outcome::Completed,
        step: h,
    };
    let mut cell = match classify(sys, 0.0, &x, &mut ws) {
        Some(c) => c,
        None => {
            traj.outcome = Outcome::Diverged { time: 0.0 };
            return Ok(traj);
        }
    };
    if cfg.record {
        traj.times.reserve(steps + 1);
        traj.states.reserve(steps + 1);
        traj.times.push(0.0);
        traj.states.push(x.clone());
        traj.cells.push(cell);
    }
    for k in 0..steps {
        let t = k as f64 * h;
        advance(sys, cell, t, &mut x, h, cfg.integrator, &mut ws);
        let t1 = (k + 1) as f64 * h;
        match classify(sys, t1, &x, &mut ws) {
            Some(c) => cell = c,
            None => {
                traj.outcome = Outcome::Diverged { time: t1 };
                traj.terminal = x;
                return Ok(traj);
            }
        }
        if cfg.record {
            traj.times.push(t1);
            traj.states.push(x.clone());
            traj.cells.push(cell);
        }
    }
    traj.terminal = x;
    Ok(traj)
}

/// A cell change between consecutive samples, with the crossing time
/// refined by bisection on the departing cell's dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    /// First sample in the new cell.
    pub sample: usize,
    pub from: usize,
    pub to: usize,
    pub time: f64,
}

pub fn locate_switches(sys: &PiecewiseSystem, traj: &Trajectory, integrator: Integrator) -> Vec<SwitchEvent> {
    let compiled = CompiledSystem::new(sys);
    let n = sys.state_dim();
    let mut ws = Workspace::new(n);
    let mut events = Vec::new();
    for k in 1..traj.cells.len() {
        let (from, to) = (traj.cells[k - 1], traj.cells[k]);
        if from == to {
            continue;
        }
        let t0 = traj.times[k - 1];
        let x0 = &traj.states[k - 1];
        let (mut lo, mut hi) = (0.0, traj.times[k] - t0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let mut x = x0.clone();
            advance(&compiled, from, t0, &mut x, mid, integrator, &mut ws);
            ws.point[0] = t0 + mid;
            ws.point[1..].copy_from_slice(&x);
            compiled.table.eval(&ws.point, &mut ws.buf);
            if compiled.active(&ws.buf) == Some(from) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        events.push(SwitchEvent {
            sample: k,
            from,
            to,
            time: t0 + 0.5 * (lo + hi),
        });
    }
    events
}

/// What to sweep and how to score a terminal state.
#[derive(Debug, Clone)]
pub struct SweepProblem<'a> {
    pub system: &'a PiecewiseSystem,
    pub initial_box: Vec<(f64, f64)>,
    pub swept: Vec<usize>,
    pub cost_state: usize,
    pub command: f64,
}

impl<'a> From<&'a ClosedLoop> for SweepProblem<'a> {
    fn from(cl: &'a ClosedLoop) -> Self {
        Self {
            system: &cl.raw,
            initial_box: cl.initial_box.clone(),
            swept: cl.swept.clone(),
            cost_state: cl.cost_state,
            command: cl.terminal_command,
        }
    }
}

impl SweepProblem<'_> {
    /// Evenly spaced grid over the swept states; the rest sit at the
    /// midpoint of their initial interval.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let base: Vec<f64> = self.initial_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut out = vec![base];
        for &s in &self.swept {
            let (lo, hi) = self.initial_box[s];
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..points).map(move |i| {
                        let mut q = p.clone();
                        q[s] = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    /// Worst terminal error; infinite when any trajectory diverged.
    pub j_mc: f64,
    /// Initial state attaining the worst finite error.
    pub argmax: Vec<f64>,
    pub diverged: usize,
    pub total: usize,
    /// Terminal error per grid point, `None` when diverged.
    pub terminal_errors: Vec<Option<f64>>,
    pub initial_states: Vec<Vec<f64>>,
}

impl McReport {
    /// Worst error over completed trajectories only.
    pub fn worst_completed(&self) -> f64 {
        self.terminal_errors.iter().flatten().fold(0.0, |a: f64, &b| a.max(b))
    }
}

pub fn sweep(problem: &SweepProblem<'_>, cfg: &SimConfig) -> Result<McReport, McError> {
    cfg.validate()?;
    let compiled = CompiledSystem::new(problem.system);
    let grid = problem.grid(cfg.grid);
    let run = SimConfig { record: false, ..*cfg };
    let results: Vec<Result<Option<f64>, McError>> = grid
        .par_iter()
        .map(|x0| {
            let tr = integrate_compiled(&compiled, problem.system.horizon, x0, &run)?;
            Ok(match tr.outcome {
                Outcome::Completed => {
                    let e = problem.command - tr.terminal[problem.cost_state];
                    Some(e * e)
                }
                Outcome::Diverged { .. } => None,
            })
        })
        .collect();
    let errors: Vec<Option<f64>> = results.into_iter().collect::<Result<_, _>>()?;
    let diverged = errors.iter().filter(|e| e.is_none()).count();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, e) in errors.iter().enumerate() {
        if let Some(v) = e {
            if *v > best.0 {
                best = (*v, i);
            }
        }
    }
    let j_mc = if diverged > 0 { f64::INFINITY } else { best.0.max(0.0) };
    Ok(McReport {
        j_mc,
        argmax: grid.get(best.1).cloned().unwrap_or_default(),
        diverged,
        total: grid.len(),
        terminal_errors: errors,
        initial_states: grid,
    })
}

/// Moments of the initial, terminal and per-cell occupation measures of a
/// trajectory in normalized coordinates, one entry per monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMoments {
    pub monomials: Vec<Monomial>,
    pub initial: Vec<f64>,
    pub terminal: Vec<f64>,
    pub occupation: Vec<Vec<f64>>,
}

/// Trapezoidal sums over the normalized graph `(tau, z)`; each step is
/// attributed to the cell active at its left sample.
pub fn empirical_moments(
    traj: &Trajectory,
    nm: &Normalization,
    num_cells: usize,
    max_degree: u32,
) -> Result<EmpiricalMoments, McError> {
    let monomials = monomials_up_to(traj.initial.len() + 1, max_degree);
    empirical_moments_of(traj, nm, num_cells, monomials)
}

/// Like [`empirical_moments`] for an arbitrary monomial list.
pub fn empirical_moments_of(
    traj: &Trajectory,
    nm: &Normalization,
    num_cells: usize,
    monomials: Vec<Monomial>,
) -> Result<EmpiricalMoments, McError> {
    if let Outcome::Diverged { time } = traj.outcome {
        return Err(McError::Diverged(time));
    }
    if traj.times.len() < 2 {
        return Err(McError::NotRecorded);
    }
    let n = traj.initial.len();
    let mut max_exp = vec![0u32; n + 1];
    for m in &monomials {
        for (v, e) in m.iter() {
            max_exp[v] = max_exp[v].max(e);
        }
    }
    let mut powers: Vec<Vec<f64>> = max_exp.iter().map(|&e| vec![1.0; e as usize + 1]).collect();
    let mut eval_all = |t: f64, x: &[f64]| {
        let mut p = Vec::with_capacity(n + 1);
        p.push(t / nm.time_scale);
        p.extend(nm.to_normalized(x));
        for (v, pw) in powers.iter_mut().enumerate() {
            for e in 1..pw.len() {
                pw[e] = pw[e - 1] * p[v];
            }
        }
        monomials
            .iter()
            .map(|m| m.iter().map(|(v, e)| powers[v][e as usize]).product())
            .collect::<Vec<f64>>()
    };
    let initial = eval_all(traj.times[0], &traj.states[0]);
    let last = traj.times.len() - 1;
    let terminal = eval_all(traj.times[last], &traj.states[last]);
    let mut occupation = vec![vec![0.0; monomials.len()]; num_cells];
    let mut prev = initial.clone();
    for k in 0..last {
        let next = eval_all(traj.times[k + 1], &traj.states[k + 1]);
        let w = 0.5 * (traj.times[k + 1] - traj.times[k]) / nm.time_scale;
        let occ = &mut occupation[traj.cells[k]];
        for i in 0..monomials.len() {
            occ[i] += w * (prev[i] + next[i]);
        }
        prev = next;
    }
    Ok(EmpiricalMoments {
        monomials,
        initial,
        terminal,
        occupation,
    })
}
