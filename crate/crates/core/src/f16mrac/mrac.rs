//! Model reference adaptive control with e-modification and adaptive loop
//! recovery, in the squared-error form that keeps the weight law polynomial.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::poly::{Monomial, Polynomial, VarRegistry};

use super::lyapunov;
use super::ModelError;

/// Baseline LQR feedback gains `K_1` for the `(e_int, alpha, q)` state.
pub const LQR_GAINS: [f64; 3] = [-10.0000, -10.8756, -6.0565];

/// Default sign of the adaptive-loop-recovery term.
pub const DEFAULT_ALR_SIGN: f64 = -1.0;

/// Affine split of a polynomial map at a point.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// Jacobian with respect to every registry variable, one row per component.
    pub jacobian: DMatrix<f64>,
    /// `f - J (v - point)`: constant plus all higher-order terms.
    pub residual: Vec<Polynomial>,
    pub point: Vec<f64>,
}

impl Linearization {
    /// Re-sums `J (v - point) + residual`, which reproduces the original field.
    pub fn resum(&self) -> Vec<Polynomial> {
        let reg = self.residual[0].registry();
        (0..self.jacobian.nrows())
            .map(|i| {
                let mut acc = self.residual[i].clone();
                for j in 0..self.jacobian.ncols() {
                    let v = self.jacobian[(i, j)];
                    if v != 0.0 {
                        let lin = Polynomial::from_terms(reg, [(Monomial::var(j), v), (Monomial::one(), -v * self.point[j])]);
                        acc = &acc + &lin;
                    }
                }
                acc
            })
            .collect()
    }
}

pub fn linearize(field: &[Polynomial], point: &[f64]) -> Result<Linearization, ModelError> {
    let first = field
        .first()
        .ok_or_else(|| ModelError::InvalidParameter("cannot linearize an empty field".into()))?;
    let reg = Arc::clone(first.registry());
    let n = reg.len();
    if point.len() != n {
        return Err(ModelError::InvalidParameter(format!(
            "linearization point has dimension {}, registry has {n}",
            point.len()
        )));
    }
    let mut jacobian = DMatrix::zeros(field.len(), n);
    let mut residual = Vec::with_capacity(field.len());
    for (i, f) in field.iter().enumerate() {
        let mut g = f.clone();
        for j in 0..n {
            let d = f.partial_index(j).eval(point)?;
            jacobian[(i, j)] = d;
            if d != 0.0 {
                let lin = Polynomial::from_terms(&reg, [(Monomial::var(j), d), (Monomial::one(), -d * point[j])]);
                g = &g - &lin;
            }
        }
        residual.push(g);
    }
    Ok(Linearization {
        jacobian,
        residual,
        point: point.to_vec(),
    })
}

/// Decomposition of a field over `(t, states...)` into the part that does not
/// depend on the state, the part linear in the state with constant
/// coefficients, and everything else.
#[derive(Debug, Clone)]
pub struct FieldSplit {
    pub command: Vec<Polynomial>,
    pub linear: Vec<Polynomial>,
    pub higher: Vec<Polynomial>,
}

impl FieldSplit {
    pub fn resum(&self) -> Vec<Polynomial> {
        self.command
            .iter()
            .zip(&self.linear)
            .zip(&self.higher)
            .map(|((c, l), h)| &(c + l) + h)
            .collect()
    }
}

/// Splits components over a registry whose variable 0 is time.
pub fn split_field(components: &[Polynomial]) -> FieldSplit {
    let mut out = FieldSplit {
        command: Vec::new(),
        linear: Vec::new(),
        higher: Vec::new(),
    };
    for f in components {
        let reg = f.registry();
        let (mut c, mut l, mut h) = (Vec::new(), Vec::new(), Vec::new());
        for (m, v) in f.terms() {
            let state_deg = m.degree() - m.exponent(0);
            let entry = (m.clone(), v);
            match (state_deg, m.exponent(0)) {
                (0, _) => c.push(entry),
                (1, 0) => l.push(entry),
                _ => h.push(entry),
            }
        }
        out.command.push(Polynomial::from_terms(reg, c));
        out.linear.push(Polynomial::from_terms(reg, l));
        out.higher.push(Polynomial::from_terms(reg, h));
    }
    out
}

/// Adaptive-law configuration. Matrices are over the `(e_int, alpha, q)` state.
#[derive(Debug, Clone)]
pub struct MracConfig {
    pub a_ref: DMatrix<f64>,
    pub b_ref: DVector<f64>,
    pub k1: DVector<f64>,
    /// Diagonal of the learning-rate matrix.
    pub gamma: [f64; 3],
    pub k_e: f64,
    pub k_w: f64,
    pub r_lyap: DMatrix<f64>,
    /// Sign applied to the adaptive-loop-recovery term `k_w Phi_x Phi_x^T W`.
    pub alr_sign: f64,
    pub w0: [f64; 3],
}

impl MracConfig {
    /// Reference model `A_r = A - B K_1`, `B_r = [-1, 0, 0]^T`, and the
    /// adaptation gains used for all validation cases.
    pub fn from_plant(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let k1 = DVector::from_row_slice(&LQR_GAINS);
        Self {
            a_ref: a - b * k1.transpose(),
            b_ref: DVector::from_row_slice(&[-1.0, 0.0, 0.0]),
            k1,
            gamma: [0.0, 2000.0, 0.0],
            k_e: 0.001,
            k_w: 12.0,
            r_lyap: DMatrix::from_diagonal(&DVector::from_row_slice(&[0.1, 100.0, 100.0])),
            alr_sign: DEFAULT_ALR_SIGN,
            w0: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !lyapunov::is_hurwitz(&self.a_ref) {
            let eig = lyapunov::eigenvalues(&self.a_ref);
            return Err(ModelError::NotHurwitz(eig.iter().map(|l| (l.re, l.im)).collect()));
        }
        if self.gamma.iter().any(|&g| !(g >= 0.0)) {
            return Err(ModelError::InvalidParameter("learning rates must be nonnegative".into()));
        }
        if !(self.k_e > 0.0) || !(self.k_w > 0.0) {
            return Err(ModelError::InvalidParameter("k_e and k_w must be positive".into()));
        }
        if self.alr_sign != 1.0 && self.alr_sign != -1.0 {
            return Err(ModelError::InvalidParameter("alr_sign must be +1 or -1".into()));
        }
        let r = &self.r_lyap;
        if (r - r.transpose()).amax() > 1e-12 || r.clone().cholesky().is_none() {
            return Err(ModelError::InvalidParameter("R must be symmetric positive definite".into()));
        }
        Ok(())
    }

    pub fn active_weights(&self) -> Vec<usize> {
        (0..3).filter(|&j| self.gamma[j] != 0.0).collect()
    }
}

/// Polynomial ingredients of the adaptive law over a closed-loop registry.
pub struct AdaptiveLawInputs<'a> {
    pub registry: &'a Arc<VarRegistry>,
    /// Plant state `(e_int, alpha, q)` as polynomials.
    pub state: [Polynomial; 3],
    /// Reference state `x_r(t)`.
    pub reference: [Polynomial; 3],
    /// Weight estimates: a variable for active weights, the pinned value otherwise.
    pub weights: [Polynomial; 3],
    /// Basis `Phi(x)`.
    pub basis: [Polynomial; 3],
}

/// `dW_j/dt` for each active weight `j`:
/// `Gamma_jj (Phi_j s + alr_sign k_w (Phi_x Phi_x^T W)_j - k_e s^2 W_j)` with
/// `s = e^T P B`.
pub fn build_adaptive_law(
    cfg: &MracConfig,
    p: &DMatrix<f64>,
    b: &DVector<f64>,
    inputs: &AdaptiveLawInputs<'_>,
) -> Result<Vec<(usize, Polynomial)>, ModelError> {
    let active = cfg.active_weights();
    if active.is_empty() {
        return Err(ModelError::InvalidParameter(
            "MRAC enabled but every learning rate is zero".into(),
        ));
    }
    let reg = inputs.registry;
    let pb = p * b;
    let mut s = Polynomial::zero(reg);
    for i in 0..3 {
        let e_i = &inputs.state[i] - &inputs.reference[i];
        s = &s + &(&e_i * pb[i]);
    }
    let s2 = &s * &s;

    // Phi_x: Jacobian of the basis with respect to (e_int, alpha, q).
    let state_vars: Vec<usize> = inputs
        .state
        .iter()
        .map(|x| {
            x.terms()
                .next()
                .and_then(|(m, _)| m.iter().next().map(|(i, _)| i))
                .ok_or_else(|| ModelError::InvalidParameter("state entries must be single variables".into()))
        })
        .collect::<Result<_, _>>()?;
    let phi_x: Vec<Vec<Polynomial>> = inputs
        .basis
        .iter()
        .map(|phi| state_vars.iter().map(|&v| phi.partial_index(v)).collect())
        .collect();

    let mut out = Vec::new();
    for &j in &active {
        // (Phi_x Phi_x^T W)_j = sum_k (sum_l Phi_x[j][l] Phi_x[k][l]) W_k
        let mut alr = Polynomial::zero(reg);
        for k in 0..3 {
            let mut g = Polynomial::zero(reg);
            for l in 0..3 {
                g = &g + &(&phi_x[j][l] * &phi_x[k][l]);
            }
            alr = &alr + &(&g * &inputs.weights[k]);
        }
        let term = &(&(&inputs.basis[j] * &s) + &(&alr * (cfg.alr_sign * cfg.k_w))) - &(&(&s2 * &inputs.weights[j]) * cfg.k_e);
        out.push((j, &term * cfg.gamma[j]));
    }
    Ok(out)
}
