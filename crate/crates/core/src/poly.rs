//! Sparse multivariate polynomials over a shared variable registry.
//!
//! Monomials are ordered graded-lexicographically (total degree first, then
//! lexicographic with variable 0 most significant). The same order drives the
//! moment indexing in [`crate::relax`], so iteration order of a
//! [`Polynomial`]'s terms is part of its contract.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomials are defined over different variable registries")]
    RegistryMismatch,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index {index} out of range for registry of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("point has dimension {got}, registry has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
}

/// Ordered list of distinct variable names. Indices are stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRegistry {
    names: Vec<String>,
}

impl VarRegistry {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Arc<Self>, PolyError> {
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if out.iter().any(|m| m == n) {
                return Err(PolyError::DuplicateVariable(n.to_string()));
            }
            out.push(n.to_string());
        }
        Ok(Arc::new(Self { names: out }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Result<usize, PolyError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PolyError::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }
}

fn same_registry(a: &Arc<VarRegistry>, b: &Arc<VarRegistry>) -> bool {
    Arc::ptr_eq(a, b) || a.names == b.names
}

/// Product of variable powers. Stored sparsely as `(variable, exponent)`
/// pairs sorted by variable index; zero exponents are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    exps: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(index: usize) -> Self {
        Self {
            exps: vec![(index, 1)],
        }
    }

    pub fn var_pow(index: usize, exp: u32) -> Self {
        if exp == 0 {
            Self::one()
        } else {
            Self {
                exps: vec![(index, exp)],
            }
        }
    }

    /// Builds a monomial from a dense exponent vector.
    pub fn from_dense(exps: &[u32]) -> Self {
        Self {
            exps: exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| (i, e))
                .collect(),
        }
    }

    pub fn to_dense(&self, nvars: usize) -> Vec<u32> {
        let mut out = vec![0; nvars];
        for &(i, e) in &self.exps {
            out[i] = e;
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, var: usize) -> u32 {
        self.exps
            .iter()
            .find(|&&(i, _)| i == var)
            .map_or(0, |&(_, e)| e)
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.exps.last().map(|&(i, _)| i)
    }

    /// `(variable, exponent)` pairs with nonzero exponents, sorted by variable.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.exps.iter().copied()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps = Vec::with_capacity(self.exps.len() + other.exps.len());
        let (mut i, mut j) = (0, 0);
        while i < self.exps.len() && j < other.exps.len() {
            let (a, ea) = self.exps[i];
            let (b, eb) = other.exps[j];
            match a.cmp(&b) {
                Ordering::Less => {
                    exps.push((a, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    exps.push((b, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    exps.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        exps.extend_from_slice(&self.exps[i..]);
        exps.extend_from_slice(&other.exps[j..]);
        Monomial { exps }
    }

    /// Removes `var` entirely, returning the reduced monomial and the exponent it had.
    pub fn split_var(&self, var: usize) -> (Monomial, u32) {
        let mut e = 0;
        let exps = self
            .exps
            .iter()
            .copied()
            .filter(|&(i, x)| {
                if i == var {
                    e = x;
                    false
                } else {
                    true
                }
            })
            .collect();
        (Monomial { exps }, e)
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .map(|&(i, e)| point[i].powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        // Lex with variable 0 most significant: the first variable where the
        // exponents differ decides.
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.exps.get(i), other.exps.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(a, ea)), Some(&(b, eb))) => match a.cmp(&b) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(&eb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    },
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in `nvars` variables of total degree `<= max_degree`,
/// in ascending graded-lex order.
pub fn monomials_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for deg in 0..=max_degree {
        let mut layer = Vec::new();
        let mut cur = vec![0u32; nvars];
        compositions(nvars, deg, 0, &mut cur, &mut layer);
        layer.sort();
        out.extend(layer);
    }
    out
}

/// Like [`monomials_up_to`] but only over the listed variable indices.
pub fn monomials_in(vars: &[usize], max_degree: u32) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = monomials_up_to(vars.len(), max_degree)
        .into_iter()
        .map(|m| Monomial {
            exps: m.iter().map(|(i, e)| (vars[i], e)).collect(),
        })
        .collect();
    out.sort();
    out
}

fn compositions(nvars: usize, remaining: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(Monomial::one());
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = remaining;
        out.push(Monomial::from_dense(cur));
        cur[pos] = 0;
        return;
    }
    for e in 0..=remaining {
        cur[pos] = e;
        compositions(nvars, remaining - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Binomial coefficient, exact for the small arguments used in moment counting.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// Sparse real polynomial. Zero coefficients are never stored.
#[derive(Clone)]
pub struct Polynomial {
    registry: Arc<VarRegistry>,
    terms: BTreeMap<Monomial, f64>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        same_registry(&self.registry, &other.registry) && self.terms == other.terms
    }
}

impl Polynomial {
    pub fn zero(registry: &Arc<VarRegistry>) -> Self {
        Self {
            registry: Arc::clone(registry),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(registry: &Arc<VarRegistry>, c: f64) -> Self {
        Self::from_terms(registry, [(Monomial::one(), c)])
    }

    pub fn var(registry: &Arc<VarRegistry>, name: &str) -> Result<Self, PolyError> {
        let i = registry.index(name)?;
        Ok(Self::var_index(registry, i))
    }

    pub fn var_index(registry: &Arc<VarRegistry>, index: usize) -> Self {
        assert!(index < registry.len(), "variable index out of range");
        Self::from_terms(registry, [(Monomial::var(index), 1.0)])
    }

    pub fn monomial(registry: &Arc<VarRegistry>, m: Monomial, c: f64) -> Self {
        Self::from_terms(registry, [(m, c)])
    }

    /// Sums duplicate monomials and drops exact zeros.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(registry: &Arc<VarRegistry>, terms: I) -> Self {
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in terms {
            if let Some(v) = m.max_var() {
                assert!(v < registry.len(), "monomial uses variable outside the registry");
            }
            *map.entry(m).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Self {
            registry: Arc::clone(registry),
            terms: map,
        }
    }

    pub fn registry(&self) -> &Arc<VarRegistry> {
        &self.registry
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().next_back().map_or(0, Monomial::degree)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn check(&self, other: &Polynomial) -> Result<(), PolyError> {
        if same_registry(&self.registry, &other.registry) {
            Ok(())
        } else {
            Err(PolyError::RegistryMismatch)
        }
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut terms = self.terms.clone();
        for (m, &c) in &other.terms {
            let e = terms.entry(m.clone()).or_insert(0.0);
            *e += c;
            if *e == 0.0 {
                terms.remove(m);
            }
        }
        Ok(Polynomial {
            registry: Arc::clone(&self.registry),
            terms,
        })
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                *terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Ok(Polynomial {
            registry: Arc::clone(&self.registry),
            terms,
        })
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut terms = self.terms.clone();
        for c in terms.values_mut() {
            *c *= s;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            registry: Arc::clone(&self.registry),
            terms,
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(&self.registry, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn partial(&self, var: &str) -> Result<Polynomial, PolyError> {
        let i = self.registry.index(var)?;
        Ok(self.partial_index(i))
    }

    pub fn partial_index(&self, var: usize) -> Polynomial {
        let terms = self.terms.iter().filter_map(|(m, &c)| {
            let (rest, e) = m.split_var(var);
            (e > 0).then(|| (rest.mul(&Monomial::var_pow(var, e - 1)), c * e as f64))
        });
        Polynomial::from_terms(&self.registry, terms)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.registry.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.registry.len(),
                got: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    /// Evaluation without the dimension check; used on hot simulation paths.
    pub fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(point)).sum()
    }

    /// Replaces every occurrence of `var` by `a*var + b`.
    pub fn substitute_affine(&self, var: &str, a: f64, b: f64) -> Result<Polynomial, PolyError> {
        let i = self.registry.index(var)?;
        Ok(self.substitute_affine_index(i, a, b))
    }

    pub fn substitute_affine_index(&self, var: usize, a: f64, b: f64) -> Polynomial {
        let lin = Polynomial::from_terms(&self.registry, [(Monomial::var(var), a), (Monomial::one(), b)]);
        self.substitute_index(var, &lin)
    }

    /// Composes `var ← replacement`.
    pub fn substitute(&self, var: &str, replacement: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(replacement)?;
        let i = self.registry.index(var)?;
        Ok(self.substitute_index(i, replacement))
    }

    pub fn substitute_index(&self, var: usize, replacement: &Polynomial) -> Polynomial {
        let max_e = self.degree_in(var);
        let mut powers = Vec::with_capacity(max_e as usize + 1);
        powers.push(Polynomial::constant(&self.registry, 1.0));
        for k in 1..=max_e as usize {
            let next = &powers[k - 1] * replacement;
            powers.push(next);
        }
        let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, &c) in &self.terms {
            let (rest, e) = m.split_var(var);
            for (pm, pc) in powers[e as usize].terms() {
                *out.entry(rest.mul(pm)).or_insert(0.0) += c * pc;
            }
        }
        out.retain(|_, c| *c != 0.0);
        Polynomial {
            registry: Arc::clone(&self.registry),
            terms: out,
        }
    }

    /// Substitutes a constant value for a variable.
    pub fn fix_var(&self, var: usize, value: f64) -> Polynomial {
        self.substitute_affine_index(var, 0.0, value)
    }

    /// Re-expresses this polynomial over another registry, mapping variables by
    /// name. Variables that do not occur in any term need not exist in `target`.
    pub fn rebase(&self, target: &Arc<VarRegistry>) -> Result<Polynomial, PolyError> {
        let mut map = vec![usize::MAX; self.registry.len()];
        for m in self.terms.keys() {
            for (i, _) in m.iter() {
                if map[i] == usize::MAX {
                    map[i] = target.index(self.registry.name(i))?;
                }
            }
        }
        let terms = self.terms.iter().map(|(m, &c)| {
            let mut pairs: Vec<(usize, u32)> = m.iter().map(|(i, e)| (map[i], e)).collect();
            pairs.sort_unstable();
            (Monomial { exps: pairs }, c)
        });
        Ok(Polynomial::from_terms(target, terms))
    }

    /// Keeps only the terms of total degree `<= max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Polynomial {
        let terms = self.terms.iter().filter(|(m, _)| m.degree() <= max_degree).map(|(m, &c)| (m.clone(), c));
        Polynomial::from_terms(&self.registry, terms)
    }

    /// Truncated Maclaurin series of `sin(var)` or `cos(var)` through `order`.
    pub fn taylor_trig(registry: &Arc<VarRegistry>, kind: Trig, var: &str, order: u32) -> Result<Polynomial, PolyError> {
        let i = registry.index(var)?;
        Ok(Self::taylor_trig_index(registry, kind, i, order))
    }

    pub fn taylor_trig_index(registry: &Arc<VarRegistry>, kind: Trig, var: usize, order: u32) -> Polynomial {
        let mut terms = Vec::new();
        let mut fact = 1.0;
        for k in 0..=order {
            if k > 0 {
                fact *= k as f64;
            }
            let sign = match (kind, k % 4) {
                (Trig::Sin, 1) | (Trig::Cos, 0) => 1.0,
                (Trig::Sin, 3) | (Trig::Cos, 2) => -1.0,
                _ => continue,
            };
            terms.push((Monomial::var_pow(var, k), sign / fact));
        }
        Polynomial::from_terms(registry, terms)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, &c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, e) in m.iter() {
                let name = self.registry.name(i);
                if e == 1 {
                    write!(f, "*{name}")?;
                } else {
                    write!(f, "*{name}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

// Operator sugar for model assembly. These panic on registry mismatch; use the
// fallible methods where the registries are not known to agree.
impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::add(self, rhs).expect("registry mismatch in polynomial addition")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::sub(self, rhs).expect("registry mismatch in polynomial subtraction")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs).expect("registry mismatch in polynomial multiplication")
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}
