//! Linear matrix inequality problems in standard form, an embedded
//! primal-dual interior-point solver and SDPA exchange files.
//!
//! The standard form is
//!
//! ```text
//! minimize    c^T y
//! subject to  A y = b
//!             F_0^k + sum_i y_i F_i^k  PSD  for every block k
//! ```

mod sdpa;
mod solver;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::relax::MomentLmiProblem;

pub use sdpa::{export_sdpa, import_sdpa_solution, parse_sdpa};
pub use solver::{solve, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("inconsistent problem data: {0}")]
    Dimension(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("solution has {found} entries, problem has {expected} variables")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    Dense,
    /// Diagonal block: every matrix is diagonal and PSD means elementwise
    /// nonnegative. Written with a negative size in SDPA files.
    Diag,
}

/// Symmetric sparse matrix stored as upper-triangle entries `(i, j, v)`, `i <= j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymSparse {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new(entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut s = Self {
            entries: entries
                .into_iter()
                .map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
                .collect(),
        };
        s.canonicalize();
        s
    }

    /// Sorts entries, merges duplicates and drops zeros.
    pub fn canonicalize(&mut self) {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += scale * v;
            if i != j {
                m[(j, i)] += scale * v;
            }
        }
    }

    /// Trace inner product with a symmetric matrix.
    pub fn dot(&self, m: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * m[(i, i)] } else { 2.0 * v * m[(i, j)] })
            .sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// One affine matrix map `y -> F_0 + sum_i y_i F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub kind: BlockKind,
    pub size: usize,
    pub constant: SymSparse,
    /// `(variable, F_i)` sorted by variable, without empty matrices.
    pub coeffs: Vec<(usize, SymSparse)>,
}

impl LmiBlock {
    pub fn new(kind: BlockKind, size: usize, constant: SymSparse, coeffs: Vec<(usize, SymSparse)>) -> Self {
        let mut b = Self {
            kind,
            size,
            constant,
            coeffs,
        };
        b.canonicalize();
        b
    }

    pub fn canonicalize(&mut self) {
        self.constant.canonicalize();
        self.coeffs.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, SymSparse)> = Vec::with_capacity(self.coeffs.len());
        for (var, m) in self.coeffs.drain(..) {
            match merged.last_mut() {
                Some(last) if last.0 == var => last.1.entries.extend(m.entries),
                _ => merged.push((var, m)),
            }
        }
        for (_, m) in &mut merged {
            m.canonicalize();
        }
        merged.retain(|(_, m)| !m.is_empty());
        self.coeffs = merged;
    }

    pub fn value(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        self.constant.add_to(&mut m, 1.0);
        for (var, f) in &self.coeffs {
            f.add_to(&mut m, y[*var]);
        }
        m
    }
}

/// `min c^T y  s.t.  A y = b,  F^k(y) PSD`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiStandardForm {
    pub num_vars: usize,
    pub cost: Vec<f64>,
    /// Sparse rows of `A`, sorted by variable.
    pub eq_rows: Vec<Vec<(usize, f64)>>,
    pub eq_rhs: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl LmiStandardForm {
    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.num_vars;
        if self.cost.len() != n {
            return Err(SdpError::Dimension(format!("cost has {} entries for {n} variables", self.cost.len())));
        }
        if self.eq_rows.len() != self.eq_rhs.len() {
            return Err(SdpError::Dimension(format!(
                "{} equality rows but {} right-hand sides",
                self.eq_rows.len(),
                self.eq_rhs.len()
            )));
        }
        if let Some(&(v, _)) = self.eq_rows.iter().flatten().find(|(v, _)| *v >= n) {
            return Err(SdpError::Dimension(format!("equality references variable {v} of {n}")));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(SdpError::Dimension(format!("block {k} is empty")));
            }
            let mats = std::iter::once(&b.constant).chain(b.coeffs.iter().map(|c| &c.1));
            for m in mats {
                for &(i, j, _) in &m.entries {
                    if i > j || j >= b.size || (b.kind == BlockKind::Diag && i != j) {
                        return Err(SdpError::Dimension(format!("block {k}: bad entry ({i}, {j})")));
                    }
                }
            }
            if let Some((v, _)) = b.coeffs.iter().find(|c| c.0 >= n) {
                return Err(SdpError::Dimension(format!("block {k} references variable {v} of {n}")));
            }
        }
        Ok(())
    }

    /// Sorts and merges all sparse data so that equal problems compare equal.
    pub fn canonicalize(&mut self) {
        for row in &mut self.eq_rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(v, c) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += c,
                    _ => merged.push((v, c)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *row = merged;
        }
        for b in &mut self.blocks {
            b.canonicalize();
        }
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.cost.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// `A y - b`.
    pub fn equality_residuals(&self, y: &[f64]) -> Vec<f64> {
        self.eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| row.iter().map(|&(v, c)| c * y[v]).sum::<f64>() - b)
            .collect()
    }

    pub fn block_values(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.value(y)).collect()
    }

    /// Smallest eigenvalue over all blocks (`+inf` without blocks).
    pub fn min_eigenvalue(&self, y: &[f64]) -> f64 {
        self.block_values(y)
            .into_iter()
            .map(|m| m.symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// Primal objective `c^T y`.
    pub objective: f64,
    pub dual_objective: f64,
    /// `|p - d| / (1 + |p| + |d|)`.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

/// Translates a moment relaxation into standard form. Matrix descriptors of
/// size one become diagonal blocks; all others stay dense.
pub fn lower(problem: &MomentLmiProblem) -> LmiStandardForm {
    let n = problem.num_vars;
    let mut cost = vec![0.0; n];
    for &(v, c) in &problem.objective {
        cost[v] += c;
    }
    let eq_rows = problem.equalities.iter().map(|r| r.terms.clone()).collect();
    let eq_rhs = problem.equalities.iter().map(|r| r.rhs).collect();
    let blocks = problem
        .psd_blocks
        .iter()
        .map(|blk| {
            let mut constant = Vec::new();
            let mut per_var: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
            for e in &blk.entries {
                if e.constant != 0.0 {
                    constant.push((e.row, e.col, e.constant));
                }
                for &(v, c) in &e.terms {
                    per_var.entry(v).or_default().push((e.row, e.col, c));
                }
            }
            let kind = if blk.size == 1 { BlockKind::Diag } else { BlockKind::Dense };
            LmiBlock::new(
                kind,
                blk.size,
                SymSparse::new(constant),
                per_var.into_iter().map(|(v, e)| (v, SymSparse::new(e))).collect(),
            )
        })
        .collect();
    let mut form = LmiStandardForm {
        num_vars: n,
        cost,
        eq_rows,
        eq_rhs,
        blocks,
    };
    form.canonicalize();
    form
}
