mod common;

use common::*;
use momentvv::f16mrac::{lyapunov_residual, solve_lyapunov};
use nalgebra::DMatrix;

#[test]
fn random_stable_instances() {
    let mut rng = rng(7);
    for _ in 0..100 {
        let a = random_stable(&mut rng, 3);
        let r = random_spd(&mut rng, 3);
        let p = solve_lyapunov(&a, &r).unwrap();
        let res = lyapunov_residual(&a, &p, &r).amax();
        assert!(res <= 1e-10 * (1.0 + r.amax()), "residual {res}");
        assert!((&p - p.transpose()).amax() <= 1e-12 * p.amax());
        assert!(p.clone().symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn negative_identity() {
    let a = -DMatrix::<f64>::identity(3, 3);
    let r = DMatrix::<f64>::identity(3, 3) * 2.0;
    let p = solve_lyapunov(&a, &r).unwrap();
    assert!((p - DMatrix::<f64>::identity(3, 3)).amax() <= 1e-12);
}

#[test]
fn rejects_unstable() {
    let a = DMatrix::<f64>::identity(2, 2);
    assert!(solve_lyapunov(&a, &DMatrix::identity(2, 2)).is_err());
}
