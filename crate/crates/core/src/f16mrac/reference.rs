//! Piecewise-polynomial approximation of the reference-model step response.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::poly::{Monomial, Polynomial, VarRegistry};

use super::ModelError;

/// Default fit degree per partition.
pub const DEFAULT_FIT_DEGREE: usize = 6;
/// Target fit error in normalized units.
pub const FIT_TOLERANCE: f64 = 1e-3;

/// One time partition `[t0, t1]` (physical seconds) with per-state
/// polynomials in `t`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePiece {
    pub t0: f64,
    pub t1: f64,
    pub coeffs: Vec<Vec<f64>>,
}

impl ReferencePiece {
    pub fn eval(&self, state: usize, t: f64) -> f64 {
        self.coeffs[state].iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// The polynomial for `state` in variable `var` of `registry`.
    pub fn polynomial(&self, registry: &Arc<VarRegistry>, var: usize, state: usize) -> Polynomial {
        Polynomial::from_terms(
            registry,
            self.coeffs[state]
                .iter()
                .enumerate()
                .map(|(k, &c)| (Monomial::var_pow(var, k as u32), c)),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceFit {
    pub pieces: Vec<ReferencePiece>,
    /// Max deviation from the exact response, scaled to normalized units.
    pub max_error: f64,
    /// Largest jump between adjacent pieces at their shared boundary, normalized units.
    pub max_jump: f64,
    pub degree: usize,
}

impl ReferenceFit {
    pub fn within_tolerance(&self) -> bool {
        self.max_error <= FIT_TOLERANCE && self.max_jump <= FIT_TOLERANCE
    }
}

/// Exact response of `x' = A x + B r` from `x(0) = 0` under constant `r`.
pub struct StepResponse {
    a: DMatrix<f64>,
    forced: DVector<f64>,
}

impl StepResponse {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, r: f64) -> Result<Self, ModelError> {
        // x(t) = A^{-1} (e^{At} - I) B r
        let forced = a
            .clone()
            .lu()
            .solve(&(b * r))
            .ok_or_else(|| ModelError::InvalidParameter("reference matrix is singular".into()))?;
        Ok(Self { a: a.clone(), forced })
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        let e = (&self.a * t).exp();
        &e * &self.forced - &self.forced
    }
}

fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

/// Monomial coefficients (ascending) of the Chebyshev series `sum c_k T_k(s)`.
fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // T_0 = 1, T_1 = s, T_{k+1} = 2 s T_k - T_{k-1}
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    prev[0] = 1.0;
    if n > 1 {
        cur[1] = 1.0;
    }
    for (k, &ck) in c.iter().enumerate() {
        let tk = if k == 0 { &prev } else { &cur };
        for i in 0..n {
            out[i] += ck * tk[i];
        }
        if k >= 1 && k + 1 < n {
            let mut next = vec![0.0; n];
            for i in 0..n - 1 {
                next[i + 1] += 2.0 * cur[i];
            }
            for i in 0..n {
                next[i] -= prev[i];
            }
            prev = std::mem::replace(&mut cur, next);
        }
    }
    out
}

/// Coefficients of `p(a s + b)` given those of `p(s)`, ascending.
fn compose_affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    let mut pow = vec![1.0];
    for &c in p {
        for (i, &v) in pow.iter().enumerate() {
            out[i] += c * v;
        }
        let mut next = vec![0.0; pow.len() + 1];
        for (i, &v) in pow.iter().enumerate() {
            next[i] += b * v;
            next[i + 1] += a * v;
        }
        pow = next;
    }
    out
}

const LAWSON_ITERATIONS: usize = 60;

/// Near-minimax fit by Lawson's iteratively reweighted least squares,
/// starting from the plain least-squares solution.
fn lawson_fit(basis: &DMatrix<f64>, values: &DVector<f64>, iterations: usize) -> Result<Vec<f64>, ModelError> {
    let m = basis.nrows();
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for _ in 0..=iterations {
        let sw = w.map(f64::sqrt);
        let a = DMatrix::from_fn(m, basis.ncols(), |i, j| basis[(i, j)] * sw[i]);
        let rhs = values.component_mul(&sw);
        let c = a
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| ModelError::InvalidParameter(format!("reference fit failed: {e}")))?;
        let r = values - basis * &c;
        let err = r.amax();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, c));
        }
        if err == 0.0 {
            break;
        }
        w = w.zip_map(&r, |wi, ri| wi * ri.abs());
        let total = w.sum();
        if !(total > 0.0) {
            break;
        }
        w /= total;
    }
    Ok(best.expect("at least one iteration").1.iter().copied().collect())
}

/// Fits each reference state on each partition by a near-minimax
/// Chebyshev expansion, and reports the achieved error on a dense check grid.
///
/// `breakpoints` are physical times `0 = t_0 < ... < t_N = T`; `scales` map
/// physical states to normalized units for error reporting.
pub fn fit_reference_trajectory(
    a_ref: &DMatrix<f64>,
    b_ref: &DVector<f64>,
    command: f64,
    breakpoints: &[f64],
    degree: usize,
    scales: &[f64],
) -> Result<ReferenceFit, ModelError> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ModelError::InvalidParameter(
            "reference partitions must be increasing with at least one interval".into(),
        ));
    }
    if !super::lyapunov::is_hurwitz(a_ref) {
        let eig = super::lyapunov::eigenvalues(a_ref);
        return Err(ModelError::NotHurwitz(eig.iter().map(|l| (l.re, l.im)).collect()));
    }
    let n = a_ref.nrows();
    let resp = StepResponse::new(a_ref, b_ref, command)?;
    let nodes = chebyshev_nodes(16 * (degree + 1));
    let mut pieces = Vec::new();
    let mut max_error: f64 = 0.0;
    for w in breakpoints.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t1 + t0);
        let mut basis = DMatrix::zeros(nodes.len(), degree + 1);
        let mut values = DMatrix::zeros(nodes.len(), n);
        for (k, &s) in nodes.iter().enumerate() {
            let x = resp.at(mid + half * s);
            for st in 0..n {
                values[(k, st)] = x[st];
            }
            let (mut tm, mut tc) = (1.0, s);
            for d in 0..=degree {
                basis[(k, d)] = if d == 0 { 1.0 } else { tc };
                if d >= 1 {
                    let next = 2.0 * s * tc - tm;
                    tm = tc;
                    tc = next;
                }
            }
        }
        let coeffs: Vec<Vec<f64>> = (0..n)
            .map(|st| {
                let c = lawson_fit(&basis, &values.column(st).into_owned(), LAWSON_ITERATIONS)?;
                // s = (t - mid) / half
                Ok(compose_affine(&chebyshev_to_monomial(&c), 1.0 / half, -mid / half))
            })
            .collect::<Result<_, ModelError>>()?;
        let piece = ReferencePiece { t0, t1, coeffs };
        for k in 0..=400 {
            let t = t0 + (t1 - t0) * k as f64 / 400.0;
            let x = resp.at(t);
            for st in 0..n {
                max_error = max_error.max((piece.eval(st, t) - x[st]).abs() * scales[st]);
            }
        }
        pieces.push(piece);
    }
    let mut max_jump: f64 = 0.0;
    for w in pieces.windows(2) {
        let t = w[0].t1;
        for st in 0..n {
            max_jump = max_jump.max((w[0].eval(st, t) - w[1].eval(st, t)).abs() * scales[st]);
        }
    }
    let fit = ReferenceFit {
        pieces,
        max_error,
        max_jump,
        degree,
    };
    if !fit.within_tolerance() {
        log::warn!(
            "reference fit error {:.3e} (jump {:.3e}) exceeds {FIT_TOLERANCE:e} at degree {degree}; consider a higher degree",
            fit.max_error,
            fit.max_jump
        );
    }
    Ok(fit)
}
