//! Continuous Lyapunov equation `A^T P + P A + R = 0`.
//!
//! Bartels–Stewart on the complex Schur form of `A`, followed by one step of
//! iterative refinement.

use nalgebra::{Complex, DMatrix, Schur};

use super::ModelError;

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    eigenvalues(a).iter().all(|l| l.re < 0.0)
}

fn check_inputs(a: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), ModelError> {
    let n = a.nrows();
    if a.ncols() != n || r.nrows() != n || r.ncols() != n {
        return Err(ModelError::InvalidParameter(format!(
            "Lyapunov data must be square and conforming: A is {}x{}, R is {}x{}",
            a.nrows(),
            a.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let eig = eigenvalues(a);
    if eig.iter().any(|l| l.re >= 0.0) {
        return Err(ModelError::NotHurwitz(eig.iter().map(|l| (l.re, l.im)).collect()));
    }
    let asym = (r - r.transpose()).amax();
    if asym > 1e-12 * (1.0 + r.amax()) || r.clone().cholesky().is_none() {
        return Err(ModelError::InvalidParameter("R must be symmetric positive definite".into()));
    }
    Ok(())
}

/// Solves `T^H Y + Y T = C` for upper-triangular complex `T`.
fn triangular_solve(t: &DMatrix<Complex<f64>>, c: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let n = t.nrows();
    let mut y = DMatrix::<Complex<f64>>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mut rhs = c[(i, j)];
            for k in 0..i {
                rhs -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                rhs -= y[(i, k)] * t[(k, j)];
            }
            y[(i, j)] = rhs / (t[(i, i)].conj() + t[(j, j)]);
        }
    }
    y
}

struct SchurSolver {
    q: DMatrix<Complex<f64>>,
    t: DMatrix<Complex<f64>>,
}

impl SchurSolver {
    fn new(a: &DMatrix<f64>) -> Self {
        let ac = a.map(|v| Complex::new(v, 0.0));
        let (q, t) = Schur::new(ac).unpack();
        Self { q, t }
    }

    /// Solves `A^T X + X A = rhs` for real symmetric `rhs`.
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let qh = self.q.adjoint();
        let c = &qh * rhs.map(|v| Complex::new(v, 0.0)) * &self.q;
        let y = triangular_solve(&self.t, &c);
        let x = (&self.q * y * qh).map(|z| z.re);
        (&x + x.transpose()) * 0.5
    }
}

pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * p + p * a + r
}

/// Unique symmetric positive definite `P` with `A^T P + P A + R = 0`.
pub fn solve_lyapunov(a: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    check_inputs(a, r)?;
    let solver = SchurSolver::new(a);
    let mut p = solver.solve(&(-r));
    let res = lyapunov_residual(a, &p, r);
    p -= solver.solve(&res);
    if p.clone().cholesky().is_none() {
        return Err(ModelError::InvalidParameter(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    Ok(p)
}
