//! Semialgebraic sets, polynomial vector fields and piecewise systems.
//!
//! Every system lives over a registry whose variable 0 is time `t`; the
//! remaining variables are the state coordinates in order.

use std::sync::Arc;

use thiserror::Error;

use crate::poly::{Monomial, PolyError, Polynomial, VarRegistry};

/// Points within this distance below zero still count as inside a set.
pub const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("normalization scales must be strictly positive (index {0})")]
    NonPositiveScale(usize),
    #[error("state at t = {t} left the state-space partition")]
    LeftPartition { t: f64 },
    #[error("a piecewise system needs at least one cell")]
    NoCells,
    #[error("registry variable 0 must be the time variable `t`")]
    MissingTime,
}

/// `{ x : p_k(x) >= 0 for all k }`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet {
    registry: Arc<VarRegistry>,
    constraints: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn new(registry: &Arc<VarRegistry>, constraints: Vec<Polynomial>) -> Result<Self, DynError> {
        for c in &constraints {
            if c.registry().names() != registry.names() {
                return Err(PolyError::RegistryMismatch.into());
            }
        }
        Ok(Self {
            registry: Arc::clone(registry),
            constraints,
        })
    }

    pub fn whole_space(registry: &Arc<VarRegistry>) -> Self {
        Self {
            registry: Arc::clone(registry),
            constraints: Vec::new(),
        }
    }

    /// One quadratic constraint `(hi - x)(x - lo) >= 0` per listed coordinate.
    pub fn boxed(registry: &Arc<VarRegistry>, bounds: &[(usize, f64, f64)]) -> Self {
        let constraints = bounds
            .iter()
            .map(|&(var, lo, hi)| box_constraint(registry, var, lo, hi))
            .collect();
        Self {
            registry: Arc::clone(registry),
            constraints,
        }
    }

    pub fn registry(&self) -> &Arc<VarRegistry> {
        &self.registry
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn with_constraint(mut self, p: Polynomial) -> Self {
        self.constraints.push(p);
        self
    }

    pub fn intersect(&self, other: &SemialgebraicSet) -> SemialgebraicSet {
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        SemialgebraicSet {
            registry: Arc::clone(&self.registry),
            constraints,
        }
    }

    /// Membership test on a full registry point (time included).
    pub fn contains(&self, point: &[f64]) -> Result<bool, DynError> {
        if point.len() != self.registry.len() {
            return Err(DynError::DimensionMismatch {
                expected: self.registry.len(),
                got: point.len(),
            });
        }
        Ok(self.contains_unchecked(point))
    }

    pub fn contains_unchecked(&self, point: &[f64]) -> bool {
        self.constraints
            .iter()
            .all(|p| p.eval_unchecked(point) >= -CONTAINMENT_TOL)
    }

    pub fn max_degree(&self) -> u32 {
        self.constraints.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    fn map_constraints(&self, f: impl Fn(&Polynomial) -> Polynomial) -> SemialgebraicSet {
        SemialgebraicSet {
            registry: Arc::clone(&self.registry),
            constraints: self.constraints.iter().map(f).collect(),
        }
    }
}

pub fn box_constraint(registry: &Arc<VarRegistry>, var: usize, lo: f64, hi: f64) -> Polynomial {
    // (hi - x)(x - lo) = -x^2 + (hi + lo) x - hi lo
    Polynomial::from_terms(
        registry,
        [
            (Monomial::var_pow(var, 2), -1.0),
            (Monomial::var(var), hi + lo),
            (Monomial::one(), -hi * lo),
        ],
    )
}

/// Polynomial right-hand side in `(t, x)`; component `i` is the derivative of
/// registry variable `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    registry: Arc<VarRegistry>,
    components: Vec<Polynomial>,
}

impl VectorField {
    pub fn new(registry: &Arc<VarRegistry>, components: Vec<Polynomial>) -> Result<Self, DynError> {
        if registry.is_empty() || registry.name(0) != "t" {
            return Err(DynError::MissingTime);
        }
        if components.len() != registry.len() - 1 {
            return Err(DynError::DimensionMismatch {
                expected: registry.len() - 1,
                got: components.len(),
            });
        }
        for c in &components {
            if c.registry().names() != registry.names() {
                return Err(PolyError::RegistryMismatch.into());
            }
        }
        Ok(Self {
            registry: Arc::clone(registry),
            components,
        })
    }

    pub fn registry(&self) -> &Arc<VarRegistry> {
        &self.registry
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Evaluates at `(t, x)` into `out`.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut point = Vec::with_capacity(x.len() + 1);
        point.push(t);
        point.extend_from_slice(x);
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval_unchecked(&point);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub set: SemialgebraicSet,
    pub field: VectorField,
}

/// Cells with their own dynamics plus global, initial and terminal sets.
/// Cell overlaps are assumed to have zero Lebesgue measure; this is not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSystem {
    registry: Arc<VarRegistry>,
    pub cells: Vec<Cell>,
    pub global: SemialgebraicSet,
    pub initial: SemialgebraicSet,
    pub terminal: SemialgebraicSet,
    /// Time span: trajectories run over `[0, horizon]`.
    pub horizon: f64,
}

impl PiecewiseSystem {
    pub fn new(
        cells: Vec<Cell>,
        global: SemialgebraicSet,
        initial: SemialgebraicSet,
        terminal: SemialgebraicSet,
        horizon: f64,
    ) -> Result<Self, DynError> {
        let first = cells.first().ok_or(DynError::NoCells)?;
        let registry = Arc::clone(first.field.registry());
        let same = |r: &Arc<VarRegistry>| r.names() == registry.names();
        let all_same = cells.iter().all(|c| same(c.set.registry()) && same(c.field.registry()))
            && same(global.registry())
            && same(initial.registry())
            && same(terminal.registry());
        if !all_same {
            return Err(PolyError::RegistryMismatch.into());
        }
        Ok(Self {
            registry,
            cells,
            global,
            initial,
            terminal,
            horizon,
        })
    }

    pub fn registry(&self) -> &Arc<VarRegistry> {
        &self.registry
    }

    pub fn state_dim(&self) -> usize {
        self.registry.len() - 1
    }

    pub fn max_field_degree(&self) -> u32 {
        self.cells.iter().map(|c| c.field.degree()).max().unwrap_or(0)
    }

    /// Lowest-index cell containing `(t, x)`.
    pub fn active_cell(&self, t: f64, x: &[f64]) -> Result<usize, DynError> {
        if x.len() != self.state_dim() {
            return Err(DynError::DimensionMismatch {
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        let mut point = Vec::with_capacity(x.len() + 1);
        point.push(t);
        point.extend_from_slice(x);
        self.active_cell_at(&point).ok_or(DynError::LeftPartition { t })
    }

    /// Same as [`Self::active_cell`] on a full `(t, x)` point, without checks.
    pub fn active_cell_at(&self, point: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.set.contains_unchecked(point))
    }

    /// Rewrites the system in `z = D x`, `tau = t / T` coordinates.
    pub fn normalize(&self, nm: &Normalization) -> Result<PiecewiseSystem, DynError> {
        nm.validate()?;
        if nm.scales.len() != self.state_dim() {
            return Err(DynError::DimensionMismatch {
                expected: self.state_dim(),
                got: nm.scales.len(),
            });
        }
        let subst = |p: &Polynomial| nm.apply(p);
        // positive rescaling leaves each set unchanged and improves conditioning
        let subst_set = |p: &Polynomial| {
            let q = nm.apply(p);
            let m = q.max_abs_coeff();
            if m > 0.0 {
                q.scale(1.0 / m)
            } else {
                q
            }
        };
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let comps = c
                    .field
                    .components()
                    .iter()
                    .zip(&nm.scales)
                    .map(|(f, &s)| subst(f).scale(nm.time_scale * s))
                    .collect();
                Ok(Cell {
                    set: c.set.map_constraints(subst_set),
                    field: VectorField::new(&self.registry, comps)?,
                })
            })
            .collect::<Result<Vec<_>, DynError>>()?;
        Ok(PiecewiseSystem {
            registry: Arc::clone(&self.registry),
            cells,
            global: self.global.map_constraints(subst_set),
            initial: self.initial.map_constraints(subst_set),
            terminal: self.terminal.map_constraints(subst_set),
            horizon: self.horizon / nm.time_scale,
        })
    }
}

/// Diagonal state scaling `z = D x` and time scaling `tau = t / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub scales: Vec<f64>,
    pub time_scale: f64,
}

impl Normalization {
    pub fn new(scales: Vec<f64>, time_scale: f64) -> Result<Self, DynError> {
        let nm = Self { scales, time_scale };
        nm.validate()?;
        Ok(nm)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            scales: vec![1.0; dim],
            time_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<(), DynError> {
        if let Some(i) = self.scales.iter().position(|&s| !(s > 0.0)) {
            return Err(DynError::NonPositiveScale(i));
        }
        if !(self.time_scale > 0.0) {
            return Err(DynError::NonPositiveScale(self.scales.len()));
        }
        Ok(())
    }

    /// Rewrites a polynomial in `(t, x)` as one in `(tau, z)`.
    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut q = p.substitute_affine_index(0, self.time_scale, 0.0);
        for (i, &s) in self.scales.iter().enumerate() {
            q = q.substitute_affine_index(i + 1, 1.0 / s, 0.0);
        }
        q
    }

    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scales).map(|(v, s)| v * s).collect()
    }

    pub fn to_physical(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scales).map(|(v, s)| v / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg1() -> Arc<VarRegistry> {
        VarRegistry::new(&["t", "x"]).unwrap()
    }

    fn single(field: Polynomial, bounds: f64, horizon: f64) -> PiecewiseSystem {
        let r = Arc::clone(field.registry());
        let set = SemialgebraicSet::boxed(&r, &[(1, -bounds, bounds)]);
        PiecewiseSystem::new(
            vec![Cell {
                set: SemialgebraicSet::whole_space(&r),
                field: VectorField::new(&r, vec![field]).unwrap(),
            }],
            set.clone(),
            set.clone(),
            set,
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn normalize_linear() {
        let r = reg1();
        let x = Polynomial::var_index(&r, 1);
        let sys = single(-&x, 10.0, 10.0);
        let n = sys.normalize(&Normalization::new(vec![0.5], 10.0).unwrap()).unwrap();
        assert_eq!(n.cells[0].field.components()[0], &x * -10.0);
        assert_eq!(n.horizon, 1.0);
    }

    #[test]
    fn normalize_box_and_quadratic() {
        let r = reg1();
        let x = Polynomial::var_index(&r, 1);
        let sys = single(&x * &x, 10.0, 1.0);
        let n = sys.normalize(&Normalization::new(vec![0.1], 1.0).unwrap()).unwrap();
        assert_eq!(n.cells[0].field.components()[0], &(&x * &x) * 10.0);
        let expect = box_constraint(&r, 1, -1.0, 1.0);
        let got = &n.global.constraints()[0];
        for (m, c) in expect.terms() {
            assert!((got.coeff(m) - c).abs() < 1e-12);
        }
        assert_eq!(got.num_terms(), expect.num_terms());
    }

    #[test]
    fn normalize_preserves_degree() {
        let r = reg1();
        let x = Polynomial::var_index(&r, 1);
        let t = Polynomial::var_index(&r, 0);
        let f = &(&x.pow(3) * &t) + &x;
        let sys = single(f, 2.0, 3.0);
        let n = sys.normalize(&Normalization::new(vec![0.3], 3.0).unwrap()).unwrap();
        assert_eq!(n.cells[0].field.degree(), sys.cells[0].field.degree());
    }

    #[test]
    fn normalize_rejects_bad_scales() {
        let r = reg1();
        let sys = single(Polynomial::var_index(&r, 1), 1.0, 1.0);
        assert!(matches!(
            sys.normalize(&Normalization { scales: vec![0.0], time_scale: 1.0 }),
            Err(DynError::NonPositiveScale(0))
        ));
        assert!(matches!(
            sys.normalize(&Normalization { scales: vec![1.0, 1.0], time_scale: 1.0 }),
            Err(DynError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn box_contains() {
        let r = reg1();
        let b = SemialgebraicSet::boxed(&r, &[(1, -1.0, 1.0)]);
        assert!(b.contains(&[0.0, 0.0]).unwrap());
        assert!(!b.contains(&[0.0, 1.5]).unwrap());
        assert!(b.contains(&[0.0, 1.0]).unwrap());
        assert!(matches!(b.contains(&[0.0]), Err(DynError::DimensionMismatch { .. })));
    }

    fn alpha_cells() -> PiecewiseSystem {
        let r = reg1();
        let a = Polynomial::var_index(&r, 1);
        let w = 0.0233;
        let zero = VectorField::new(&r, vec![Polynomial::zero(&r)]).unwrap();
        let c1 = SemialgebraicSet::new(&r, vec![&Polynomial::constant(&r, w * w) - &(&a * &a)]).unwrap();
        let c2 = SemialgebraicSet::new(&r, vec![&Polynomial::constant(&r, -w) - &a]).unwrap();
        let c3 = SemialgebraicSet::new(&r, vec![&a - &Polynomial::constant(&r, w)]).unwrap();
        let glob = SemialgebraicSet::boxed(&r, &[(1, -1.0, 1.0)]);
        PiecewiseSystem::new(
            [c1, c2, c3].into_iter().map(|set| Cell { set, field: zero.clone() }).collect(),
            glob.clone(),
            glob.clone(),
            glob,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn active_cell_tie_break() {
        let sys = alpha_cells();
        assert_eq!(sys.active_cell(0.0, &[0.0]).unwrap(), 0);
        assert_eq!(sys.active_cell(0.0, &[-0.1]).unwrap(), 1);
        assert_eq!(sys.active_cell(0.0, &[0.1]).unwrap(), 2);
        assert_eq!(sys.active_cell(0.0, &[0.0233]).unwrap(), 0);
    }

    #[test]
    fn active_cell_outside_partition() {
        let r = reg1();
        let a = Polynomial::var_index(&r, 1);
        let zero = VectorField::new(&r, vec![Polynomial::zero(&r)]).unwrap();
        let glob = SemialgebraicSet::boxed(&r, &[(1, -1.0, 1.0)]);
        let sys = PiecewiseSystem::new(
            vec![Cell {
                set: SemialgebraicSet::new(&r, vec![a]).unwrap(),
                field: zero,
            }],
            glob.clone(),
            glob.clone(),
            glob,
            1.0,
        )
        .unwrap();
        assert!(matches!(sys.active_cell(0.5, &[-0.2]), Err(DynError::LeftPartition { .. })));
    }
}
