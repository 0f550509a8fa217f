//! Generators and checks shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;

use momentvv::dynamics::PiecewiseSystem;
use momentvv::f16mrac::case::bundled;
use momentvv::f16mrac::{assemble_closed_loop, AeroCoeffs, AircraftParams, AssemblyOptions, CaseSpec, ClosedLoop, Variant};
use momentvv::mc::{empirical_moments_of, Trajectory};
use momentvv::poly::{monomials_up_to, Monomial, Polynomial, VarRegistry};
use momentvv::relax::empirical_liouville_residual;
use momentvv::sdp::{BlockKind, LmiBlock, LmiStandardForm, SymSparse};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn closed_loop(case: &str, variant: Variant) -> ClosedLoop {
    let spec = CaseSpec::parse(bundled::by_name(case).expect("bundled case")).expect("case parses");
    assemble_closed_loop(&spec, &AircraftParams::f16(), &AeroCoeffs::morelli(), variant, &AssemblyOptions::default())
        .expect("closed loop assembles")
}

// ---- polynomials ----

pub const POLY_VARS: usize = 4;
pub const POLY_DEGREE: u32 = 4;

pub fn poly_registry() -> Arc<VarRegistry> {
    VarRegistry::new(&["a", "b", "c", "d"]).unwrap()
}

fn monomial_strategy() -> impl Strategy<Value = Monomial> {
    prop::collection::vec(0u32..=POLY_DEGREE, POLY_VARS).prop_map(|mut e| {
        while e.iter().sum::<u32>() > POLY_DEGREE {
            let i = e.iter().position(|&x| x > 0).unwrap();
            e[i] -= 1;
        }
        Monomial::from_dense(&e)
    })
}

/// Random polynomial in four variables of degree at most four.
pub fn poly_strategy() -> impl Strategy<Value = Vec<(Monomial, f64)>> {
    prop::collection::vec((monomial_strategy(), -2.0f64..2.0), 0..10)
}

/// Integer coefficients, so products and derivatives are exact.
pub fn int_poly_strategy() -> impl Strategy<Value = Vec<(Monomial, f64)>> {
    prop::collection::vec((monomial_strategy(), (-9i32..=9).prop_map(f64::from)), 0..10)
}

pub fn point_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, POLY_VARS)
}

pub fn poly(reg: &Arc<VarRegistry>, terms: Vec<(Monomial, f64)>) -> Polynomial {
    Polynomial::from_terms(reg, terms)
}

/// Largest coefficient difference.
pub fn coeff_distance(p: &Polynomial, q: &Polynomial) -> f64 {
    let keys: HashSet<&Monomial> = p.terms().chain(q.terms()).map(|(m, _)| m).collect();
    keys.into_iter().map(|m| (p.coeff(m) - q.coeff(m)).abs()).fold(0.0, f64::max)
}

/// Sum of absolute term values at `pt`, the natural scale for rounding error.
pub fn abs_eval(p: &Polynomial, pt: &[f64]) -> f64 {
    p.terms().map(|(m, c)| (c * m.eval(pt)).abs()).sum()
}

// ---- linear algebra ----

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Random Hurwitz matrix: a random matrix shifted left past its spectral abscissa.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n) * 3.0;
    let abscissa = m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let margin = rng.random_range(0.05..2.0);
    m - DMatrix::identity(n, n) * (abscissa + margin)
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    random_matrix(rng, n, n).qr().q()
}

fn to_sym_sparse(m: &DMatrix<f64>) -> SymSparse {
    let n = m.nrows();
    SymSparse::new((0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)])))
}

/// Random SDP whose optimum is known from a complementary primal-dual pair.
///
/// A slack `S` and a multiplier `Z` are drawn with `S Z = 0`, the constant
/// term is chosen so that `F(y*) = S`, and the cost is set from the
/// stationarity condition, so `c . y*` is optimal by weak duality.
pub struct RandomSdp {
    pub form: LmiStandardForm,
    pub y_star: Vec<f64>,
    pub optimum: f64,
}

pub fn random_sdp(seed: u64) -> RandomSdp {
    let mut rng = rng(seed);
    let m = rng.random_range(2..=6);
    let y_star: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cost = vec![0.0; m];
    let mut blocks = Vec::new();
    let nblocks = rng.random_range(1..=3);
    for b in 0..nblocks {
        let diag = b > 0 && rng.random_bool(0.4);
        let n = rng.random_range(2..=5);
        let rank = rng.random_range(1..n);
        let (s, z, fs) = if diag {
            let perm: Vec<bool> = (0..n).map(|i| i < rank).collect();
            let s = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| if perm[i] { rng.random_range(0.5..2.0) } else { 0.0 }));
            let z = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| if perm[i] { 0.0 } else { rng.random_range(0.5..2.0) }));
            let fs: Vec<DMatrix<f64>> = (0..m)
                .map(|_| DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))))
                .collect();
            (s, z, fs)
        } else {
            let q = random_orthogonal(&mut rng, n);
            let ds = DVector::from_fn(n, |i, _| if i < rank { rng.random_range(0.5..2.0) } else { 0.0 });
            let dz = DVector::from_fn(n, |i, _| if i < rank { 0.0 } else { rng.random_range(0.5..2.0) });
            let s = &q * DMatrix::from_diagonal(&ds) * q.transpose();
            let z = &q * DMatrix::from_diagonal(&dz) * q.transpose();
            let fs: Vec<DMatrix<f64>> = (0..m)
                .map(|_| {
                    let a = random_matrix(&mut rng, n, n);
                    (&a + a.transpose()) * 0.5
                })
                .collect();
            (s, z, fs)
        };
        let mut f0 = s.clone();
        for (i, f) in fs.iter().enumerate() {
            f0 -= f * y_star[i];
            cost[i] += f.dot(&z);
        }
        let kind = if diag { BlockKind::Diag } else { BlockKind::Dense };
        blocks.push(LmiBlock::new(
            kind,
            n,
            to_sym_sparse(&f0),
            fs.iter().enumerate().map(|(i, f)| (i, to_sym_sparse(f))).collect(),
        ));
    }
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    if rng.random_bool(0.5) {
        let row: Vec<(usize, f64)> = (0..m).map(|i| (i, rng.random_range(-1.0..1.0))).collect();
        let w = rng.random_range(-1.0..1.0);
        eq_rhs.push(row.iter().map(|&(i, a)| a * y_star[i]).sum());
        for &(i, a) in &row {
            cost[i] += w * a;
        }
        eq_rows.push(row);
    }
    let optimum = cost.iter().zip(&y_star).map(|(c, y)| c * y).sum();
    RandomSdp {
        form: LmiStandardForm {
            num_vars: m,
            cost,
            eq_rows,
            eq_rhs,
            blocks,
        },
        y_star,
        optimum,
    }
}

// ---- Liouville ----

/// `dv/dt + grad v . f` for each cell, written out independently of the
/// relaxation code.
pub fn lie_derivatives(v: &Polynomial, sys: &PiecewiseSystem) -> Vec<Polynomial> {
    sys.cells
        .iter()
        .map(|cell| {
            let mut lv = v.partial_index(0);
            for (i, f) in cell.field.components().iter().enumerate() {
                lv = &lv + &(&v.partial_index(i + 1) * f);
            }
            lv
        })
        .collect()
}

/// Largest Liouville residual of a completed trajectory over all test
/// monomials in `(t, x)` of degree at most `max_degree`.
pub fn max_liouville_residual(cl: &ClosedLoop, traj: &Trajectory, max_degree: u32) -> f64 {
    let sys = &cl.system;
    let reg = sys.registry();
    let tests = monomials_up_to(reg.len(), max_degree);
    let mut seen: HashSet<Monomial> = HashSet::new();
    let mut needed = Vec::new();
    for v in &tests {
        let vp = Polynomial::monomial(reg, v.clone(), 1.0);
        let lvs = lie_derivatives(&vp, sys);
        let terms = std::iter::once(v.clone()).chain(lvs.iter().flat_map(|lv| lv.terms().map(|(m, _)| m.clone())).collect::<Vec<_>>());
        for m in terms {
            if seen.insert(m.clone()) {
                needed.push(m);
            }
        }
    }
    let em = empirical_moments_of(traj, &cl.normalization, sys.cells.len(), needed)
        .expect("completed trajectory");
    tests
        .iter()
        .map(|v| empirical_liouville_residual(v, sys, &em).expect("moments available").abs())
        .fold(0.0, f64::max)
}

// ---- polynomial properties, shared with the acceptance runner ----

pub type Terms = Vec<(Monomial, f64)>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn check_ring_axioms(a: Terms, b: Terms, c: Terms) -> Result<(), String> {
    let r = poly_registry();
    let (a, b, c) = (poly(&r, a), poly(&r, b), poly(&r, c));
    let close = |x: &Polynomial, y: &Polynomial, what: &str| {
        let d = coeff_distance(x, y);
        ensure(d <= 1e-12 * (1.0 + x.max_abs_coeff()), || format!("{what}: coefficient distance {d:e}"))
    };
    close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), "additive associativity")?;
    close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), "multiplicative associativity")?;
    close(&(&a + &b), &(&b + &a), "additive commutativity")?;
    close(&(&a * &b), &(&b * &a), "multiplicative commutativity")?;
    close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), "distributivity")?;
    ensure(&a + &Polynomial::zero(&r) == a, || "additive identity".into())?;
    ensure(&a * &Polynomial::constant(&r, 1.0) == a, || "multiplicative identity".into())?;
    ensure((&a + &(-&a)).is_zero(), || "additive inverse".into())
}

pub fn check_leibniz(a: Terms, b: Terms, v: usize) -> Result<(), String> {
    let r = poly_registry();
    let (a, b) = (poly(&r, a), poly(&r, b));
    let lhs = (&a * &b).partial_index(v);
    let rhs = &(&a.partial_index(v) * &b) + &(&a * &b.partial_index(v));
    ensure(lhs == rhs, || format!("d/d{v}: {lhs} != {rhs}"))
}

pub fn check_eval_homomorphism(a: Terms, b: Terms, pt: Vec<f64>) -> Result<(), String> {
    let r = poly_registry();
    let (a, b) = (poly(&r, a), poly(&r, b));
    let (ea, eb) = (a.eval(&pt).unwrap(), b.eval(&pt).unwrap());
    let prod = (&a * &b).eval(&pt).unwrap();
    let scale = (abs_eval(&a, &pt) * abs_eval(&b, &pt)).max(f64::MIN_POSITIVE);
    ensure((prod - ea * eb).abs() <= 1e-10 * scale, || format!("product: {prod} vs {}", ea * eb))?;
    let sum = (&a + &b).eval(&pt).unwrap();
    let scale = (abs_eval(&a, &pt) + abs_eval(&b, &pt)).max(f64::MIN_POSITIVE);
    ensure((sum - ea - eb).abs() <= 1e-10 * scale, || format!("sum: {sum} vs {}", ea + eb))
}

pub fn check_affine_substitution(a: Terms, pt: Vec<f64>, v: usize, scale: f64, shift: f64) -> Result<(), String> {
    let r = poly_registry();
    let a = poly(&r, a);
    let lhs = a.substitute_affine_index(v, scale, shift).eval(&pt).unwrap();
    let mut moved = pt.clone();
    moved[v] = scale * pt[v] + shift;
    let rhs = a.eval(&moved).unwrap();
    let abs_pt: Vec<f64> = pt.iter().map(|x| x.abs()).collect();
    let magnitude = abs_eval(&a.substitute_affine_index(v, scale.abs(), shift.abs()), &abs_pt).max(f64::MIN_POSITIVE);
    ensure((lhs - rhs).abs() <= 1e-10 * magnitude, || format!("{lhs} vs {rhs}"))
}

pub fn affine_strategy() -> impl Strategy<Value = (Terms, Vec<f64>, usize, f64, f64)> {
    (poly_strategy(), point_strategy(), 0usize..POLY_VARS, -2.0f64..2.0, -2.0f64..2.0)
}
