//! Infeasible-start primal-dual path following with Nesterov–Todd scaling
//! and a Mehrotra predictor-corrector.
//!
//! The iterate is `(y, S)` for the problem in `y` (with `S = F(y)` at
//! feasibility) and `(X, lambda)` for its dual
//!
//! ```text
//! maximize    b^T lambda - <F_0, X>
//! subject to  F^*(X) + A^T lambda = c,  X PSD.
//! ```

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{BlockKind, LmiStandardForm, SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

const STEP_FACTOR: f64 = 0.95;
/// Relative size below which an equality row counts as dependent.
const DEPENDENT_ROW_TOL: f64 = 1e-10;
/// Looser certificate threshold accepted once progress has stalled.
const STALL_CERT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
enum Mat {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Mat {
    fn zeros_like(&self) -> Mat {
        match self {
            Mat::Dense(m) => Mat::Dense(DMatrix::zeros(m.nrows(), m.ncols())),
            Mat::Diag(v) => Mat::Diag(DVector::zeros(v.len())),
        }
    }

    fn inner(&self, other: &Mat) -> f64 {
        match (self, other) {
            (Mat::Dense(a), Mat::Dense(b)) => a.dot(b),
            (Mat::Diag(a), Mat::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds always match"),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Mat) {
        match (self, other) {
            (Mat::Dense(a), Mat::Dense(b)) => a.zip_apply(b, |x, y| *x += alpha * y),
            (Mat::Diag(a), Mat::Diag(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!("block kinds always match"),
        }
    }

    fn sub(&self, other: &Mat) -> Mat {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Mat::Dense(m) => m.norm_squared(),
            Mat::Diag(v) => v.norm_squared(),
        }
    }

    fn symmetrize(&mut self) {
        if let Mat::Dense(m) = self {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
        }
    }
}

struct Blk {
    kind: BlockKind,
    size: usize,
    f0: Mat,
    vars: Vec<usize>,
    mats: Vec<Vec<(usize, usize, f64)>>,
}

impl Blk {
    fn add_scaled(&self, out: &mut Mat, local: usize, alpha: f64) {
        match out {
            Mat::Dense(m) => {
                for &(i, j, v) in &self.mats[local] {
                    m[(i, j)] += alpha * v;
                    if i != j {
                        m[(j, i)] += alpha * v;
                    }
                }
            }
            Mat::Diag(d) => {
                for &(i, _, v) in &self.mats[local] {
                    d[i] += alpha * v;
                }
            }
        }
    }

    fn dot(&self, local: usize, z: &Mat) -> f64 {
        match z {
            Mat::Dense(m) => self.mats[local]
                .iter()
                .map(|&(i, j, v)| if i == j { v * m[(i, i)] } else { 2.0 * v * m[(i, j)] })
                .sum(),
            Mat::Diag(d) => self.mats[local].iter().map(|&(i, _, v)| v * d[i]).sum(),
        }
    }
}

struct Problem {
    n: usize,
    c: DVector<f64>,
    /// Equalities with orthonormal rows.
    a: DMatrix<f64>,
    b: DVector<f64>,
    blocks: Vec<Blk>,
    f0_norm: f64,
}

/// Orthonormalizes the equality rows by modified Gram–Schmidt, dropping
/// dependent rows. Returns `None` when a dropped row is inconsistent.
fn orthonormalize(form: &LmiStandardForm) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = form.num_vars;
    let bnorm = form.eq_rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (row, &bi) in form.eq_rows.iter().zip(&form.eq_rhs) {
        let mut r = DVector::zeros(n);
        for &(v, c) in row {
            r[v] += c;
        }
        let scale = r.amax();
        if scale == 0.0 {
            if bi.abs() > DEPENDENT_ROW_TOL * (1.0 + bnorm) {
                return None;
            }
            continue;
        }
        r /= scale;
        let mut beta = bi / scale;
        let orig = r.norm();
        for _ in 0..2 {
            for (q, &bq) in rows.iter().zip(&rhs) {
                let coef = r.dot(q);
                r.axpy(-coef, q, 1.0);
                beta -= coef * bq;
            }
        }
        let norm = r.norm();
        if norm <= DEPENDENT_ROW_TOL * orig {
            if beta.abs() > 1e-8 * (1.0 + bnorm) {
                return None;
            }
            continue;
        }
        rows.push(r / norm);
        rhs.push(beta / norm);
    }
    let m = rows.len();
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    Some((a, DVector::from_vec(rhs)))
}

impl Problem {
    fn new(form: &LmiStandardForm, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let blocks: Vec<Blk> = form
            .blocks
            .iter()
            .map(|blk| {
                let mut f0 = match blk.kind {
                    BlockKind::Dense => Mat::Dense(DMatrix::zeros(blk.size, blk.size)),
                    BlockKind::Diag => Mat::Diag(DVector::zeros(blk.size)),
                };
                match &mut f0 {
                    Mat::Dense(m) => blk.constant.add_to(m, 1.0),
                    Mat::Diag(d) => {
                        for &(i, _, v) in &blk.constant.entries {
                            d[i] += v;
                        }
                    }
                }
                Blk {
                    kind: blk.kind,
                    size: blk.size,
                    f0,
                    vars: blk.coeffs.iter().map(|c| c.0).collect(),
                    mats: blk.coeffs.iter().map(|c| c.1.entries.clone()).collect(),
                }
            })
            .collect();
        let f0_norm = blocks.iter().map(|b| b.f0.norm_sq()).sum::<f64>().sqrt();
        Self {
            n: form.num_vars,
            c: DVector::from_column_slice(&form.cost),
            a,
            b,
            blocks,
            f0_norm,
        }
    }

    /// Linear part `sum_i y_i F_i`, optionally plus `F_0`.
    fn apply(&self, y: &DVector<f64>, with_constant: bool) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut out = if with_constant { blk.f0.clone() } else { blk.f0.zeros_like() };
                for (local, &var) in blk.vars.iter().enumerate() {
                    if y[var] != 0.0 {
                        blk.add_scaled(&mut out, local, y[var]);
                    }
                }
                out
            })
            .collect()
    }

    /// `(F^* Z)_i = sum_k <F_i^k, Z_k>`.
    fn adjoint(&self, z: &[Mat]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (blk, zk) in self.blocks.iter().zip(z) {
            for (local, &var) in blk.vars.iter().enumerate() {
                out[var] += blk.dot(local, zk);
            }
        }
        out
    }

    fn initial_point(&self) -> (Vec<Mat>, Vec<Mat>) {
        let mut xs = Vec::new();
        let mut ss = Vec::new();
        for blk in &self.blocks {
            let s = blk.size as f64;
            let mut fmax: f64 = blk.f0.norm_sq().sqrt();
            let mut ratio: f64 = 0.0;
            for (local, &var) in blk.vars.iter().enumerate() {
                let fnorm = blk.mats[local]
                    .iter()
                    .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
                    .sum::<f64>()
                    .sqrt();
                fmax = fmax.max(fnorm);
                ratio = ratio.max((1.0 + self.c[var].abs()) / (1.0 + fnorm));
            }
            let xi = 10f64.max(s.sqrt()).max(s * ratio);
            let eta = 10f64.max(s.sqrt()).max(fmax);
            match blk.kind {
                BlockKind::Dense => {
                    xs.push(Mat::Dense(DMatrix::identity(blk.size, blk.size) * xi));
                    ss.push(Mat::Dense(DMatrix::identity(blk.size, blk.size) * eta));
                }
                BlockKind::Diag => {
                    xs.push(Mat::Diag(DVector::from_element(blk.size, xi)));
                    ss.push(Mat::Diag(DVector::from_element(blk.size, eta)));
                }
            }
        }
        (xs, ss)
    }
}

/// NT scaling of one block: `W = G G^T`, `G^{-1} X G^{-T} = G^T S G = diag(v)`.
enum Scaling {
    Dense {
        g: DMatrix<f64>,
        ginv: DMatrix<f64>,
        w: DMatrix<f64>,
        v: DVector<f64>,
    },
    Diag {
        w: DVector<f64>,
        v: DVector<f64>,
    },
}

impl Scaling {
    fn new(x: &Mat, s: &Mat) -> Option<Scaling> {
        match (x, s) {
            (Mat::Dense(x), Mat::Dense(s)) => {
                let lx = x.clone().cholesky()?.unpack();
                let ls = s.clone().cholesky()?.unpack();
                let svd = (ls.transpose() * &lx).svd(true, true);
                let u = svd.u?;
                let vt = svd.v_t?;
                let sig = svd.singular_values;
                if sig.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return None;
                }
                let isq = sig.map(|v| 1.0 / v.sqrt());
                let mut g = lx * vt.transpose();
                for (j, mut col) in g.column_iter_mut().enumerate() {
                    col *= isq[j];
                }
                let mut ginv = u.transpose() * ls.transpose();
                for (i, mut row) in ginv.row_iter_mut().enumerate() {
                    row *= isq[i];
                }
                let w = &g * g.transpose();
                Some(Scaling::Dense { g, ginv, w, v: sig })
            }
            (Mat::Diag(x), Mat::Diag(s)) => {
                if x.iter().chain(s.iter()).any(|v| !(*v > 0.0)) {
                    return None;
                }
                let w = x.zip_map(s, |a, b| (a / b).sqrt());
                let v = x.zip_map(s, |a, b| (a * b).sqrt());
                Some(Scaling::Diag { w, v })
            }
            _ => unreachable!("block kinds always match"),
        }
    }

    /// `W Z W`.
    fn sandwich(&self, z: &Mat) -> Mat {
        match (self, z) {
            (Scaling::Dense { w, .. }, Mat::Dense(z)) => Mat::Dense(w * z * w),
            (Scaling::Diag { w, .. }, Mat::Diag(z)) => Mat::Diag(z.zip_map(w, |a, b| a * b * b)),
            _ => unreachable!("block kinds always match"),
        }
    }

    /// Scaled primal direction `G^{-1} dX G^{-T}`.
    fn scale_x(&self, dx: &Mat) -> Mat {
        match (self, dx) {
            (Scaling::Dense { ginv, .. }, Mat::Dense(d)) => Mat::Dense(ginv * d * ginv.transpose()),
            (Scaling::Diag { w, .. }, Mat::Diag(d)) => Mat::Diag(d.component_div(w)),
            _ => unreachable!("block kinds always match"),
        }
    }

    /// Scaled slack direction `G^T dS G`.
    fn scale_s(&self, ds: &Mat) -> Mat {
        match (self, ds) {
            (Scaling::Dense { g, .. }, Mat::Dense(d)) => Mat::Dense(g.transpose() * d * g),
            (Scaling::Diag { w, .. }, Mat::Diag(d)) => Mat::Diag(d.component_mul(w)),
            _ => unreachable!("block kinds always match"),
        }
    }

    /// Largest step keeping `V + a D` PSD for a scaled direction `D`.
    fn max_step(&self, d: &Mat) -> f64 {
        let lmin = match (self, d) {
            (Scaling::Dense { v, .. }, Mat::Dense(d)) => {
                let isq = v.map(|x| 1.0 / x.sqrt());
                let b = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * isq[i] * isq[j]);
                let b = (&b + b.transpose()) * 0.5;
                b.symmetric_eigenvalues().min()
            }
            (Scaling::Diag { v, .. }, Mat::Diag(d)) => d.component_div(v).min(),
            _ => unreachable!("block kinds always match"),
        };
        if lmin.is_nan() {
            0.0
        } else if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lmin
        }
    }

    /// Complementarity right-hand side in original coordinates for the target
    /// `sym(X~ S~) = sigma mu I - corr`.
    fn centering(&self, sigma_mu: f64, corr: Option<(&Mat, &Mat)>) -> Mat {
        match self {
            Scaling::Dense { g, v, .. } => {
                let n = v.len();
                let mut rhs = DMatrix::from_fn(n, n, |i, j| if i == j { sigma_mu - v[i] * v[i] } else { 0.0 });
                if let Some((Mat::Dense(dx), Mat::Dense(ds))) = corr {
                    let p = dx * ds;
                    rhs -= (&p + p.transpose()) * 0.5;
                }
                let rt = DMatrix::from_fn(n, n, |i, j| 2.0 * rhs[(i, j)] / (v[i] + v[j]));
                Mat::Dense(g * rt * g.transpose())
            }
            Scaling::Diag { w, v } => {
                let mut rhs = v.map(|x| sigma_mu - x * x);
                if let Some((Mat::Diag(dx), Mat::Diag(ds))) = corr {
                    rhs -= dx.component_mul(ds);
                }
                Mat::Diag(rhs.component_div(v).component_mul(w))
            }
        }
    }
}

/// Schur complement `M_ij = sum_k <F_i^k, W_k F_j^k W_k>`.
fn schur_matrix(p: &Problem, scal: &[Scaling]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p.n, p.n);
    for (blk, sc) in p.blocks.iter().zip(scal) {
        match sc {
            Scaling::Dense { w, .. } => {
                let s = blk.size;
                let mut pm = DMatrix::zeros(s, s);
                for (li, &vi) in blk.vars.iter().enumerate() {
                    pm.fill(0.0);
                    for &(a, b, val) in &blk.mats[li] {
                        let wa = w.column(a);
                        let wb = w.column(b);
                        if a == b {
                            pm.ger(val, &wa, &wa, 1.0);
                        } else {
                            pm.ger(val, &wa, &wb, 1.0);
                            pm.ger(val, &wb, &wa, 1.0);
                        }
                    }
                    let pmat = Mat::Dense(std::mem::replace(&mut pm, DMatrix::zeros(0, 0)));
                    for (lj, &vj) in blk.vars.iter().enumerate().skip(li) {
                        let val = blk.dot(lj, &pmat);
                        m[(vi, vj)] += val;
                        if vi != vj {
                            m[(vj, vi)] += val;
                        }
                    }
                    if let Mat::Dense(back) = pmat {
                        pm = back;
                    }
                }
            }
            Scaling::Diag { w, .. } => {
                let mut by_pos: Vec<Vec<(usize, f64)>> = vec![Vec::new(); blk.size];
                for (li, &vi) in blk.vars.iter().enumerate() {
                    for &(a, _, val) in &blk.mats[li] {
                        by_pos[a].push((vi, val));
                    }
                }
                for (a, list) in by_pos.iter().enumerate() {
                    let w2 = w[a] * w[a];
                    for &(vi, fi) in list {
                        for &(vj, fj) in list {
                            m[(vi, vj)] += fi * fj * w2;
                        }
                    }
                }
            }
        }
    }
    m
}

/// Cholesky factor of `m`, adding a growing multiple of its diagonal if the
/// plain factorization fails.
fn regularized_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let floor = 1e-300f64.max(m.diagonal().amax() * 1e-16);
    let mut delta = 1e-14;
    while delta <= 1e-4 {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += delta * r[(i, i)].max(floor);
        }
        if let Some(c) = r.cholesky() {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

const REFINEMENT_STEPS: usize = 3;

/// Factorization of the reduced Newton system
/// `M dy - A^T dl = h`, `A dy = r`.
struct Newton<'a> {
    m: &'a DMatrix<f64>,
    a: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `L^{-1} A^T` and the Cholesky factor of its Gram matrix.
    z: DMatrix<f64>,
    k: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Newton<'a> {
    fn new(m: &'a DMatrix<f64>, a: &'a DMatrix<f64>) -> Option<Newton<'a>> {
        let chol = regularized_cholesky(m)?;
        if a.nrows() == 0 {
            return Some(Newton {
                m,
                a,
                chol,
                z: DMatrix::zeros(m.nrows(), 0),
                k: None,
            });
        }
        let z = chol.l_dirty().solve_lower_triangular(&a.transpose())?;
        let k = regularized_cholesky(&(z.transpose() * &z))?;
        Some(Newton {
            m,
            a,
            chol,
            z,
            k: Some(k),
        })
    }

    fn solve_once(&self, h: &DVector<f64>, r: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.k {
            None => (self.chol.solve(h), DVector::zeros(0)),
            Some(k) => {
                let lh = self.chol.l_dirty().solve_lower_triangular(h).expect("factor is nonsingular");
                let dl = k.solve(&(r - self.z.transpose() * lh));
                let dy = self.chol.solve(&(h + self.a.transpose() * &dl));
                (dy, dl)
            }
        }
    }

    /// Solves with a few rounds of iterative refinement against the exact `M`.
    fn solve(&self, h: &DVector<f64>, r: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dy, mut dl) = self.solve_once(h, r);
        let scale = h.amax().max(r.amax()).max(1e-300);
        for _ in 0..REFINEMENT_STEPS {
            let r1 = h - (self.m * &dy - self.a.transpose() * &dl);
            let r2 = r - self.a * &dy;
            if r1.amax().max(r2.amax()) <= 1e-15 * scale {
                break;
            }
            let (cy, cl) = self.solve_once(&r1, &r2);
            dy += cy;
            dl += cl;
        }
        (dy, dl)
    }
}

struct Iterate {
    y: DVector<f64>,
    lam: DVector<f64>,
    x: Vec<Mat>,
    s: Vec<Mat>,
}

#[derive(Clone)]
struct Measures {
    pobj: f64,
    dobj: f64,
    gap: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
    /// `||F^*(X) + A^T lambda|| / dobj` when `dobj > 0`.
    infeas_cert: f64,
    /// `||F(y) - F_0 ... ||`-style ray quality when `pobj < 0`.
    unbounded_cert: f64,
}

struct Residuals {
    rp: Vec<Mat>,
    rb: DVector<f64>,
    rd: DVector<f64>,
}

fn residuals(p: &Problem, it: &Iterate) -> Residuals {
    let fy = p.apply(&it.y, true);
    let rp = fy.iter().zip(&it.s).map(|(f, s)| f.sub(s)).collect();
    let rb = &p.b - &p.a * &it.y;
    let rd = &p.c - p.adjoint(&it.x) - p.a.transpose() * &it.lam;
    Residuals { rp, rb, rd }
}

fn measures(p: &Problem, it: &Iterate, res: &Residuals, dim: usize) -> Measures {
    let pobj = p.c.dot(&it.y);
    let f0x: f64 = p.blocks.iter().zip(&it.x).map(|(b, x)| b.f0.inner(x)).sum();
    let dobj = p.b.dot(&it.lam) - f0x;
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    let rp_norm = res.rp.iter().map(Mat::norm_sq).sum::<f64>().sqrt();
    let pinf = (rp_norm / (1.0 + p.f0_norm)).max(res.rb.norm() / (1.0 + p.b.norm()));
    let dinf = res.rd.norm() / (1.0 + p.c.norm());
    let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.inner(s)).sum();
    let mu = xs / dim.max(1) as f64;
    let infeas_cert = if dobj > 0.0 {
        (&p.c - &res.rd).norm() / dobj
    } else {
        f64::INFINITY
    };
    let unbounded_cert = if pobj < 0.0 {
        // The homogeneous part must be nearly feasible relative to the decrease.
        let lin = p.apply(&it.y, false);
        let neg: f64 = lin
            .iter()
            .map(|m| match m {
                Mat::Dense(d) => (-d.symmetric_eigenvalues().min()).max(0.0),
                Mat::Diag(v) => (-v.min()).max(0.0),
            })
            .fold(0.0, f64::max);
        ((&p.a * &it.y).norm() + neg) / (-pobj)
    } else {
        f64::INFINITY
    };
    Measures {
        pobj,
        dobj,
        gap,
        pinf,
        dinf,
        mu,
        infeas_cert,
        unbounded_cert,
    }
}

fn result(
    status: SolveStatus,
    y: &DVector<f64>,
    m: &Measures,
    iterations: usize,
    start: Instant,
) -> SolveResult {
    SolveResult {
        status,
        y: y.iter().copied().collect(),
        objective: m.pobj,
        dual_objective: m.dobj,
        gap: m.gap,
        primal_infeasibility: m.pinf,
        dual_infeasibility: m.dinf,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Solves `form` to the requested tolerances. Numerical trouble yields an
/// `inaccurate` status carrying the best iterate seen.
pub fn solve(form: &LmiStandardForm, opts: &SolverOptions) -> SolveResult {
    let start = Instant::now();
    let Some((a, b)) = orthonormalize(form) else {
        log::info!("equality system is inconsistent");
        return SolveResult {
            status: SolveStatus::Infeasible,
            y: vec![0.0; form.num_vars],
            objective: f64::NAN,
            dual_objective: f64::INFINITY,
            gap: f64::INFINITY,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: 0.0,
            iterations: 0,
            wall_time: start.elapsed().as_secs_f64(),
        };
    };
    let p = Problem::new(form, a, b);
    let dim: usize = p.blocks.iter().map(|b| b.size).sum();
    let (x, s) = p.initial_point();
    let mut it = Iterate {
        y: DVector::zeros(p.n),
        lam: DVector::zeros(p.a.nrows()),
        x,
        s,
    };
    let score = |m: &Measures| (m.gap / opts.gap_tol).max(m.pinf / opts.feas_tol).max(m.dinf / opts.feas_tol);
    let mut best: Option<(f64, DVector<f64>, Measures)> = None;
    let mut stall = 0usize;

    for iter in 0..=opts.max_iter {
        let res = residuals(&p, &it);
        let m = measures(&p, &it, &res, dim);
        log::debug!(
            "iter {iter:3} pobj {:+.8e} dobj {:+.8e} gap {:.2e} pinf {:.2e} dinf {:.2e} mu {:.2e}",
            m.pobj,
            m.dobj,
            m.gap,
            m.pinf,
            m.dinf,
            m.mu
        );
        if m.gap <= opts.gap_tol && m.pinf <= opts.feas_tol && m.dinf <= opts.feas_tol {
            return result(SolveStatus::Optimal, &it.y, &m, iter, start);
        }
        if m.infeas_cert <= opts.feas_tol {
            return result(SolveStatus::Infeasible, &it.y, &m, iter, start);
        }
        if m.unbounded_cert <= opts.feas_tol && -m.pobj > 1e8 * (1.0 + p.c.norm()) {
            return result(SolveStatus::Unbounded, &it.y, &m, iter, start);
        }
        let sc = score(&m);
        if best.as_ref().is_none_or(|(bs, _, _)| sc < *bs) {
            best = Some((sc, it.y.clone(), m.clone()));
        }
        let stalled = |status: SolveStatus, best: Option<(f64, DVector<f64>, Measures)>, it: &Iterate| {
            let last = measures(&p, it, &residuals(&p, it), dim);
            if last.infeas_cert <= STALL_CERT_TOL {
                return result(SolveStatus::Infeasible, &it.y, &last, iter, start);
            }
            if last.unbounded_cert <= STALL_CERT_TOL && -last.pobj > 1e6 * (1.0 + p.c.norm()) {
                return result(SolveStatus::Unbounded, &it.y, &last, iter, start);
            }
            let (_, y, bm) = best.expect("at least one iterate");
            result(status, &y, &bm, iter, start)
        };
        if iter == opts.max_iter {
            return stalled(SolveStatus::IterationLimit, best, &it);
        }

        let Some(scal) = it.x.iter().zip(&it.s).map(|(x, s)| Scaling::new(x, s)).collect::<Option<Vec<_>>>() else {
            return stalled(SolveStatus::Inaccurate, best, &it);
        };
        let mmat = schur_matrix(&p, &scal);
        let Some(newton) = Newton::new(&mmat, &p.a) else {
            return stalled(SolveStatus::Inaccurate, best, &it);
        };
        let wrpw: Vec<Mat> = scal.iter().zip(&res.rp).map(|(sc, r)| sc.sandwich(r)).collect();
        let direction = |rc: &[Mat]| {
            let rhs: Vec<Mat> = rc.iter().zip(&wrpw).map(|(r, w)| r.sub(w)).collect();
            let h = p.adjoint(&rhs) - &res.rd;
            let (dy, dl) = newton.solve(&h, &res.rb);
            let mut ds = p.apply(&dy, false);
            for (d, r) in ds.iter_mut().zip(&res.rp) {
                d.axpy(1.0, r);
            }
            let dx: Vec<Mat> = rc
                .iter()
                .zip(&ds)
                .zip(&scal)
                .map(|((r, d), sc)| {
                    let mut out = r.sub(&sc.sandwich(d));
                    out.symmetrize();
                    out
                })
                .collect();
            (dy, dl, dx, ds)
        };
        let steps = |dx: &[Mat], ds: &[Mat]| {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for ((sc, x), s) in scal.iter().zip(dx).zip(ds) {
                ap = ap.min(sc.max_step(&sc.scale_x(x)));
                ad = ad.min(sc.max_step(&sc.scale_s(s)));
            }
            (ap, ad)
        };

        // Predictor.
        let rc: Vec<Mat> = it
            .x
            .iter()
            .map(|x| {
                let mut r = x.zeros_like();
                r.axpy(-1.0, x);
                r
            })
            .collect();
        let (_, _, dxa, dsa) = direction(&rc);
        let (ap, ad) = steps(&dxa, &dsa);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for (((x, s), dx), ds) in it.x.iter().zip(&it.s).zip(&dxa).zip(&dsa) {
            let mut xn = x.clone();
            xn.axpy(ap, dx);
            let mut sn = s.clone();
            sn.axpy(ad, ds);
            mu_aff += xn.inner(&sn);
        }
        mu_aff /= dim.max(1) as f64;
        let sigma = if m.mu > 0.0 {
            (mu_aff / m.mu).max(0.0).powi(3).min(1.0)
        } else {
            0.0
        };

        // Corrector.
        let rc: Vec<Mat> = scal
            .iter()
            .zip(&dxa)
            .zip(&dsa)
            .map(|((sc, dx), ds)| {
                let (tx, ts) = (sc.scale_x(dx), sc.scale_s(ds));
                sc.centering(sigma * m.mu, Some((&tx, &ts)))
            })
            .collect();
        let (dy, dl, dx, ds) = direction(&rc);
        let (ap, ad) = steps(&dx, &ds);
        let ap = (STEP_FACTOR * ap).min(1.0);
        let ad = (STEP_FACTOR * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || dy.iter().any(|v| !v.is_finite()) {
            return stalled(SolveStatus::Inaccurate, best, &it);
        }
        for (x, d) in it.x.iter_mut().zip(&dx) {
            x.axpy(ap, d);
            x.symmetrize();
        }
        it.lam.axpy(ap, &dl, 1.0);
        it.y.axpy(ad, &dy, 1.0);
        for (s, d) in it.s.iter_mut().zip(&ds) {
            s.axpy(ad, d);
            s.symmetrize();
        }
        if ap.max(ad) < 1e-10 {
            stall += 1;
            if stall >= 3 {
                return stalled(SolveStatus::Inaccurate, best, &it);
            }
        } else {
            stall = 0;
        }
    }
    unreachable!("loop returns at the iteration limit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{LmiBlock, SymSparse};

    fn scalar_block(constant: f64, coef: f64) -> LmiBlock {
        LmiBlock::new(
            BlockKind::Diag,
            1,
            SymSparse::new([(0, 0, constant)]),
            vec![(0, SymSparse::new([(0, 0, coef)]))],
        )
    }

    #[test]
    fn two_by_two_determinant() {
        // [[y, 1], [1, y]] PSD  <=>  y >= 1
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![1.0],
            eq_rows: vec![],
            eq_rhs: vec![],
            blocks: vec![LmiBlock::new(
                BlockKind::Dense,
                2,
                SymSparse::new([(0, 1, 1.0)]),
                vec![(0, SymSparse::new([(0, 0, 1.0), (1, 1, 1.0)]))],
            )],
        };
        let r = solve(&form, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.y[0] - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.gap <= 1e-8);
    }

    #[test]
    fn scalar_lower_bound() {
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![1.0],
            eq_rows: vec![],
            eq_rhs: vec![],
            blocks: vec![scalar_block(-3.0, 1.0)],
        };
        let r = solve(&form, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.y[0] - 3.0).abs() < 1e-6);
        assert!((r.objective - 3.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible() {
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![1.0],
            eq_rows: vec![],
            eq_rhs: vec![],
            blocks: vec![scalar_block(-1.0, 1.0), scalar_block(0.0, -1.0)],
        };
        let r = solve(&form, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![1.0],
            eq_rows: vec![],
            eq_rhs: vec![],
            blocks: vec![scalar_block(1.0, -1.0)],
        };
        let r = solve(&form, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn equalities_and_dependent_rows() {
        // min y0 + y1  s.t. y0 - y1 = 1 (twice), y0, y1 >= 0  ->  (1, 0)
        let form = LmiStandardForm {
            num_vars: 2,
            cost: vec![1.0, 1.0],
            eq_rows: vec![vec![(0, 1.0), (1, -1.0)], vec![(0, 2.0), (1, -2.0)]],
            eq_rhs: vec![1.0, 2.0],
            blocks: vec![LmiBlock::new(
                BlockKind::Diag,
                2,
                SymSparse::default(),
                vec![(0, SymSparse::new([(0, 0, 1.0)])), (1, SymSparse::new([(1, 1, 1.0)]))],
            )],
        };
        let r = solve(&form, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.y[0] - 1.0).abs() < 1e-6 && r.y[1].abs() < 1e-6, "{:?}", r.y);
    }

    #[test]
    fn inconsistent_equalities() {
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![0.0],
            eq_rows: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            eq_rhs: vec![1.0, 2.0],
            blocks: vec![],
        };
        assert_eq!(solve(&form, &SolverOptions::default()).status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic() {
        let form = LmiStandardForm {
            num_vars: 1,
            cost: vec![1.0],
            eq_rows: vec![],
            eq_rhs: vec![],
            blocks: vec![scalar_block(-3.0, 1.0), scalar_block(5.0, -1.0)],
        };
        let a = solve(&form, &SolverOptions::default());
        let b = solve(&form, &SolverOptions::default());
        assert_eq!(a.y, b.y);
        assert_eq!(a.iterations, b.iterations);
    }
}
