//! Moment relaxations of the occupation-measure problem for a piecewise
//! polynomial system.
//!
//! Measures live on the normalized system: time runs over `[0, 1]` and the
//! initial and terminal measures have time pinned to `0` and `1`, so their
//! moments are indexed by state monomials only. Occupation measures carry
//! time as an ordinary variable with the localizing constraint `t (1 - t) >= 0`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::PiecewiseSystem;
use crate::mc::EmpiricalMoments;
use crate::poly::{binomial, monomials_in, Monomial, Polynomial, VarRegistry};
use crate::sdp::{SolveResult, SolveStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("relaxation order {given} is below the minimum {required}")]
    OrderTooLow { given: u32, required: u32 },
    #[error("test function {test} needs moments of degree {needed}, only {available} are indexed")]
    DegreeOverflow { test: String, needed: u32, available: u32 },
    #[error("cost and system use different variable registries")]
    RegistryMismatch,
    #[error("solver returned {status}: {detail}")]
    Solver { status: SolveStatus, detail: String },
    #[error("empirical moments miss monomial {0}")]
    MissingMoment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MeasureKind {
    Initial,
    Terminal,
    Occupation(usize),
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureKind::Initial => write!(f, "mu_0"),
            MeasureKind::Terminal => write!(f, "mu_T"),
            MeasureKind::Occupation(j) => write!(f, "mu_{}", j + 1),
        }
    }
}

/// Graded-lex list of the monomials a measure's moments are indexed by,
/// with their position in the global decision vector.
#[derive(Debug, Clone)]
pub struct MomentIndex {
    pub monomials: Vec<Monomial>,
    lookup: HashMap<Monomial, usize>,
    pub offset: usize,
}

impl MomentIndex {
    fn new(vars: &[usize], degree: u32, offset: usize) -> Self {
        let monomials = monomials_in(vars, degree);
        let lookup = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Self {
            monomials,
            lookup,
            offset,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Global decision-vector index of the moment of `m`.
    pub fn get(&self, m: &Monomial) -> Option<usize> {
        self.lookup.get(m).map(|i| i + self.offset)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureVar {
    pub kind: MeasureKind,
    /// Registry variables the moments depend on.
    pub vars: Vec<usize>,
    /// Support constraints `g >= 0`, with time already substituted for
    /// initial and terminal measures.
    pub support: Vec<Polynomial>,
    /// Moment truncation degree `2d`.
    pub degree: u32,
    pub index: MomentIndex,
}

impl MeasureVar {
    /// Linear form `integral p dmu` as terms over the decision vector. For
    /// pinned measures `p` must not depend on time.
    pub fn integrate(&self, p: &Polynomial) -> Result<Vec<(usize, f64)>, Monomial> {
        p.terms()
            .map(|(m, c)| self.index.get(m).map(|i| (i, c)).ok_or_else(|| m.clone()))
            .collect()
    }

    /// Polynomial `p` restricted to this measure's support in time.
    pub fn pin(&self, p: &Polynomial) -> Polynomial {
        match self.kind {
            MeasureKind::Initial => p.fix_var(0, 0.0),
            MeasureKind::Terminal => p.fix_var(0, 1.0),
            MeasureKind::Occupation(_) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn residual(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * y[i]).sum::<f64>() - self.rhs
    }
}

/// Upper-triangle entry `(row, col)` of an affine symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEntry {
    pub row: usize,
    pub col: usize,
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockOrigin {
    Moment,
    /// Index into the measure's support constraints.
    Localizing(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBlock {
    pub measure: usize,
    pub origin: BlockOrigin,
    pub size: usize,
    pub entries: Vec<AffineEntry>,
}

impl MatrixBlock {
    pub fn value(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for e in &self.entries {
            let v = e.constant + e.terms.iter().map(|&(i, c)| c * y[i]).sum::<f64>();
            m[(e.row, e.col)] = v;
            m[(e.col, e.row)] = v;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct MomentLmiProblem {
    pub registry: Arc<VarRegistry>,
    pub order: u32,
    pub measures: Vec<MeasureVar>,
    pub num_vars: usize,
    /// Minimized linear objective.
    pub objective: Vec<(usize, f64)>,
    /// Mass row first, then one row per accepted test function.
    pub equalities: Vec<LinearRow>,
    pub test_functions: Vec<Monomial>,
    pub psd_blocks: Vec<MatrixBlock>,
}

impl MomentLmiProblem {
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * y[i]).sum()
    }

    pub fn measure(&self, kind: MeasureKind) -> Option<&MeasureVar> {
        self.measures.iter().find(|m| m.kind == kind)
    }

    /// First moments of the initial measure (normalized state coordinates).
    /// Only a heuristic for the worst initial state: no rank condition is checked.
    pub fn heuristic_initial_state(&self, y: &[f64]) -> Vec<f64> {
        let mu0 = self.measure(MeasureKind::Initial).expect("initial measure always present");
        let mass = y[mu0.index.get(&Monomial::one()).expect("mass is indexed")];
        mu0.vars
            .iter()
            .map(|&v| y[mu0.index.get(&Monomial::var(v)).expect("first moments are indexed")] / mass)
            .collect()
    }
}

/// Number of moments of degree `<= degree` in `nvars` variables.
pub fn moment_count(nvars: usize, degree: u32) -> usize {
    binomial(nvars as u64 + degree as u64, degree as u64) as usize
}

/// `d/dt v + grad v . f` for the test function `v` and field `f` of one cell.
fn lie_derivative(v: &Polynomial, field: &[Polynomial]) -> Polynomial {
    let mut out = v.partial_index(0);
    for (i, fi) in field.iter().enumerate() {
        let dv = v.partial_index(i + 1);
        if !dv.is_zero() {
            out = &out + &(&dv * fi);
        }
    }
    out
}

/// Weak Liouville row for test monomial `v`:
/// `int v dmu_T - int v dmu_0 - sum_j int (v_t + grad v . f_j) dmu_j = 0`.
pub fn liouville_row(
    v: &Monomial,
    sys: &PiecewiseSystem,
    measures: &[MeasureVar],
) -> Result<LinearRow, RelaxError> {
    let reg = sys.registry();
    let vp = Polynomial::monomial(reg, v.clone(), 1.0);
    let overflow = |m: Monomial, available: u32| RelaxError::DegreeOverflow {
        test: vp.to_string(),
        needed: m.degree(),
        available,
    };
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for mu in measures {
        let (poly, sign) = match mu.kind {
            MeasureKind::Terminal => (mu.pin(&vp), 1.0),
            MeasureKind::Initial => (mu.pin(&vp), -1.0),
            MeasureKind::Occupation(j) => (lie_derivative(&vp, sys.cells[j].field.components()), -1.0),
        };
        let lin = mu.integrate(&poly).map_err(|m| overflow(m, mu.degree))?;
        terms.extend(lin.into_iter().map(|(i, c)| (i, sign * c)));
    }
    terms.sort_by_key(|t| t.0);
    terms.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    terms.retain(|t| t.1 != 0.0);
    Ok(LinearRow { terms, rhs: 0.0 })
}

/// Moment matrix `M[u, v] = y[u v]` over monomials of degree `<= d`.
pub fn moment_matrix(mu: &MeasureVar, measure: usize, d: u32) -> MatrixBlock {
    affine_block(mu, measure, &[(Monomial::one(), 1.0)], d, BlockOrigin::Moment)
}

/// Localizing matrix of `p`: entries `sum_k c_k y[u v m_k]` over monomials of
/// degree `<= d - ceil(deg p / 2)`. Returns `None` when `deg p > 2d`.
pub fn localizing_matrix(mu: &MeasureVar, measure: usize, p: &Polynomial, d: u32, origin: BlockOrigin) -> Option<MatrixBlock> {
    let dp = p.degree();
    if dp > 2 * d {
        return None;
    }
    let terms: Vec<(Monomial, f64)> = p.terms().map(|(m, c)| (m.clone(), c)).collect();
    Some(affine_block(mu, measure, &terms, d - dp.div_ceil(2), origin))
}

fn affine_block(mu: &MeasureVar, measure: usize, p: &[(Monomial, f64)], basis_degree: u32, origin: BlockOrigin) -> MatrixBlock {
    let basis = monomials_in(&mu.vars, basis_degree);
    let mut entries = Vec::with_capacity(basis.len() * (basis.len() + 1) / 2);
    for (r, u) in basis.iter().enumerate() {
        for (c, w) in basis.iter().enumerate().skip(r) {
            let uw = u.mul(w);
            let mut terms: Vec<(usize, f64)> = p
                .iter()
                .map(|(m, coef)| {
                    let idx = mu.index.get(&uw.mul(m)).expect("localizing degree within truncation");
                    (idx, *coef)
                })
                .collect();
            terms.sort_by_key(|t| t.0);
            entries.push(AffineEntry {
                row: r,
                col: c,
                constant: 0.0,
                terms,
            });
        }
    }
    MatrixBlock {
        measure,
        origin,
        size: basis.len(),
        entries,
    }
}

/// Smallest admissible relaxation order. Field degrees are not included: test
/// functions are filtered instead so every Liouville integrand stays indexed.
pub fn minimum_order(sys: &PiecewiseSystem, terminal_cost: &Polynomial, running_cost: &Polynomial) -> u32 {
    let mut deg = terminal_cost.degree().max(running_cost.degree()).max(2);
    let sets = std::iter::once(&sys.global)
        .chain(std::iter::once(&sys.initial))
        .chain(std::iter::once(&sys.terminal))
        .chain(sys.cells.iter().map(|c| &c.set));
    for s in sets {
        deg = deg.max(s.max_degree());
    }
    deg.div_ceil(2).max(1)
}

fn time_constraint(reg: &Arc<VarRegistry>) -> Polynomial {
    let t = Polynomial::var_index(reg, 0);
    &t * &(&Polynomial::constant(reg, 1.0) - &t)
}

/// Drops constants that are nonnegative; keeps everything else.
fn useful(p: Polynomial) -> Option<Polynomial> {
    if p.degree() == 0 && p.coeff(&Monomial::one()) >= 0.0 {
        None
    } else {
        Some(p)
    }
}

/// Order-`d` moment relaxation of
/// `min int h_T dmu_T + sum_j int h dmu_j` subject to the Liouville equation.
pub fn build(
    sys: &PiecewiseSystem,
    terminal_cost: &Polynomial,
    running_cost: &Polynomial,
    d: u32,
) -> Result<MomentLmiProblem, RelaxError> {
    let reg = Arc::clone(sys.registry());
    if terminal_cost.registry().names() != reg.names() || running_cost.registry().names() != reg.names() {
        return Err(RelaxError::RegistryMismatch);
    }
    let required = minimum_order(sys, terminal_cost, running_cost);
    if d < required {
        return Err(RelaxError::OrderTooLow { given: d, required });
    }
    let nvars = reg.len();
    let states: Vec<usize> = (1..nvars).collect();
    let all: Vec<usize> = (0..nvars).collect();
    let deg = 2 * d;

    let mut measures = Vec::new();
    let mut offset = 0;
    let mut push = |kind: MeasureKind, vars: &[usize], support: Vec<Polynomial>| {
        let index = MomentIndex::new(vars, deg, offset);
        offset += index.len();
        measures.push(MeasureVar {
            kind,
            vars: vars.to_vec(),
            support,
            degree: deg,
            index,
        });
    };
    let pinned = |set: &[Polynomial], t: f64| -> Vec<Polynomial> {
        set.iter().filter_map(|p| useful(p.fix_var(0, t))).collect()
    };
    let mut init_support = pinned(sys.initial.constraints(), 0.0);
    init_support.extend(pinned(sys.global.constraints(), 0.0));
    push(MeasureKind::Initial, &states, init_support);
    let mut term_support = pinned(sys.terminal.constraints(), 1.0);
    term_support.extend(pinned(sys.global.constraints(), 1.0));
    push(MeasureKind::Terminal, &states, term_support);
    for (j, cell) in sys.cells.iter().enumerate() {
        let mut support: Vec<Polynomial> = sys.global.constraints().to_vec();
        support.extend(cell.set.constraints().iter().cloned());
        support.push(time_constraint(&reg));
        push(MeasureKind::Occupation(j), &all, support);
    }
    let num_vars = offset;

    // Objective.
    let mut objective = Vec::new();
    for mu in &measures {
        let h = match mu.kind {
            MeasureKind::Terminal => mu.pin(terminal_cost),
            MeasureKind::Occupation(_) => running_cost.clone(),
            MeasureKind::Initial => continue,
        };
        objective.extend(mu.integrate(&h).map_err(|m| RelaxError::DegreeOverflow {
            test: "cost".into(),
            needed: m.degree(),
            available: deg,
        })?);
    }

    // Mass of the initial measure, then Liouville rows.
    let mass = measures[0].index.get(&Monomial::one()).expect("mass is indexed");
    let mut equalities = vec![LinearRow {
        terms: vec![(mass, 1.0)],
        rhs: 1.0,
    }];
    let candidates = monomials_in(&all, deg);
    let rows: Vec<Option<(Monomial, LinearRow)>> = candidates
        .par_iter()
        .map(|v| liouville_row(v, sys, &measures).ok().map(|r| (v.clone(), r)))
        .collect();
    let mut test_functions = Vec::new();
    for (v, row) in rows.into_iter().flatten() {
        if !row.terms.is_empty() {
            test_functions.push(v);
            equalities.push(row);
        }
    }

    // Moment and localizing matrices.
    let mut psd_blocks = Vec::new();
    for (k, mu) in measures.iter().enumerate() {
        psd_blocks.push(moment_matrix(mu, k, d));
        for (c, g) in mu.support.iter().enumerate() {
            if g.degree() == 0 && g.coeff(&Monomial::one()) >= 0.0 {
                continue;
            }
            match localizing_matrix(mu, k, g, d, BlockOrigin::Localizing(c)) {
                Some(b) => psd_blocks.push(b),
                None => log::warn!(
                    "support constraint {g} of {} has degree {} > {deg}; skipped",
                    mu.kind,
                    g.degree()
                ),
            }
        }
    }
    log::info!(
        "order {d}: {num_vars} moments, {} equalities, {} PSD blocks (largest {})",
        equalities.len(),
        psd_blocks.len(),
        psd_blocks.iter().map(|b| b.size).max().unwrap_or(0)
    );
    Ok(MomentLmiProblem {
        registry: reg,
        order: d,
        measures,
        num_vars,
        objective,
        equalities,
        test_functions,
        psd_blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    /// `B_d = -J_d`.
    pub value: f64,
    pub status: SolveStatus,
    /// Set when the solver stopped short of its tolerances.
    pub inexact: bool,
    pub gap: f64,
}

/// Reads the bound `B_d = -J_d` off a solver result.
pub fn extract_bound(problem: &MomentLmiProblem, result: &SolveResult) -> Result<Bound, RelaxError> {
    match result.status {
        SolveStatus::Infeasible | SolveStatus::Unbounded => Err(RelaxError::Solver {
            status: result.status,
            detail: format!(
                "order {}: primal infeasibility {:.2e}, dual infeasibility {:.2e}",
                problem.order, result.primal_infeasibility, result.dual_infeasibility
            ),
        }),
        status => Ok(Bound {
            value: -problem.objective_value(&result.y),
            status,
            inexact: status != SolveStatus::Optimal,
            gap: result.gap,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub order: u32,
    pub bound: Option<f64>,
    pub status: String,
    pub inexact: bool,
    pub gap: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BoundSequence {
    pub entries: Vec<BoundEntry>,
}

impl BoundSequence {
    /// Whether bounds from optimal solves never increase by more than `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let ok: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.status == SolveStatus::Optimal.label())
            .filter_map(|e| e.bound)
            .collect();
        ok.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Tightest bound from a solve that finished (optimal or inexact).
    pub fn best(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.bound).reduce(f64::min)
    }
}

/// Liouville residual of test monomial `v` on empirical trajectory moments.
/// Needs empirical moments up to `deg v - 1 + max field degree`.
pub fn empirical_liouville_residual(
    v: &Monomial,
    sys: &PiecewiseSystem,
    em: &EmpiricalMoments,
) -> Result<f64, RelaxError> {
    let reg = sys.registry();
    let lookup: HashMap<&Monomial, usize> = em.monomials.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let integrate = |p: &Polynomial, values: &[f64]| -> Result<f64, RelaxError> {
        p.terms()
            .map(|(m, c)| {
                lookup
                    .get(m)
                    .map(|&i| c * values[i])
                    .ok_or_else(|| RelaxError::MissingMoment(m_to_string(reg, m)))
            })
            .sum()
    };
    let vp = Polynomial::monomial(reg, v.clone(), 1.0);
    let mut r = integrate(&vp, &em.terminal)? - integrate(&vp, &em.initial)?;
    for (j, cell) in sys.cells.iter().enumerate() {
        let lv = lie_derivative(&vp, cell.field.components());
        r -= integrate(&lv, &em.occupation[j])?;
    }
    Ok(r)
}

fn m_to_string(reg: &Arc<VarRegistry>, m: &Monomial) -> String {
    Polynomial::monomial(reg, m.clone(), 1.0).to_string()
}
