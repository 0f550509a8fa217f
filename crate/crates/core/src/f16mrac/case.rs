//! Validation scenarios and closed-loop assembly.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Cell, Normalization, PiecewiseSystem, SemialgebraicSet, VectorField};
use crate::poly::{Monomial, Polynomial, VarRegistry};

use super::aircraft::{build_short_period, AeroCoeffs, AircraftParams, TrigOrders};
use super::lyapunov::solve_lyapunov;
use super::mrac::{build_adaptive_law, linearize, AdaptiveLawInputs, MracConfig};
use super::reference::{fit_reference_trajectory, ReferenceFit, DEFAULT_FIT_DEGREE};
use super::ModelError;

pub const DEFAULT_THRESHOLD: f64 = 3e-3;
pub const DEFAULT_EPSILON: f64 = 1e-3;

fn deg(v: f64) -> f64 {
    v * PI / 180.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "lqr")]
    Lqr,
    #[serde(rename = "lqr+mrac")]
    LqrMrac,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Lqr => "lqr",
            Variant::LqrMrac => "lqr+mrac",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lqr" => Ok(Variant::Lqr),
            "lqr+mrac" | "mrac" => Ok(Variant::LqrMrac),
            _ => Err(format!("unknown controller variant `{s}` (expected lqr or lqr+mrac)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Disturbance {
    #[default]
    None,
    /// `amplitude` inside `|alpha| <= half_width` (radians), zero outside.
    Step { amplitude: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Sideslip {
    #[default]
    None,
    /// `beta = slope * alpha + offset`.
    Affine { slope: f64, offset: f64 },
}

/// Where the terminal measure lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalSupport {
    /// The global box; the threshold only enters the verdict.
    #[default]
    Global,
    /// The global box intersected with `threshold - (r - alpha)^2 >= 0`.
    Threshold,
}

/// Boxes in degrees, except the weight box which is dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBox {
    pub alpha: [f64; 2],
    pub q: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalBox {
    pub e_int: [f64; 2],
    pub alpha: [f64; 2],
    pub q: [f64; 2],
    pub w: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct F16Case {
    pub name: String,
    /// Constant command in degrees.
    pub command_deg: f64,
    pub lambda: f64,
    #[serde(default)]
    pub disturbance: Disturbance,
    #[serde(default)]
    pub sideslip: Sideslip,
    pub horizon: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Breakpoints `0 < ... < horizon` splitting time into cells.
    #[serde(default)]
    pub time_partitions: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub terminal_support: TerminalSupport,
    #[serde(default = "default_fit_degree")]
    pub reference_degree: usize,
    pub initial: InitialBox,
    pub global: GlobalBox,
}

/// `x' = A x` over a box, with terminal cost on one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCase {
    pub name: String,
    pub states: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub horizon: f64,
    pub initial: Vec<[f64; 2]>,
    pub global: Vec<[f64; 2]>,
    pub cost_state: usize,
    #[serde(default)]
    pub command: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_fit_degree() -> usize {
    DEFAULT_FIT_DEGREE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CaseSpec {
    F16(F16Case),
    Linear(LinearCase),
}

fn check_interval(name: &str, iv: [f64; 2]) -> Result<(), ModelError> {
    if !(iv[0].is_finite() && iv[1].is_finite() && iv[0] < iv[1]) {
        return Err(ModelError::Case(format!("{name} interval {iv:?} must be finite with lo < hi")));
    }
    Ok(())
}

fn check_inside(name: &str, inner: [f64; 2], outer: [f64; 2]) -> Result<(), ModelError> {
    if inner[0] < outer[0] || inner[1] > outer[1] {
        return Err(ModelError::Case(format!("{name}: {inner:?} is not inside {outer:?}")));
    }
    Ok(())
}

impl CaseSpec {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let spec: CaseSpec = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)).unwrap_or(0);
            ModelError::Parse {
                line,
                msg: e.message().to_string(),
            }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            ModelError::Parse { line, msg } => ModelError::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("case serializes")
    }

    pub fn name(&self) -> &str {
        match self {
            CaseSpec::F16(c) => &c.name,
            CaseSpec::Linear(c) => &c.name,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            CaseSpec::F16(c) => c.threshold,
            CaseSpec::Linear(c) => c.threshold,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CaseSpec::F16(c) => c.validate(),
            CaseSpec::Linear(c) => c.validate(),
        }
    }
}

impl F16Case {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ModelError::Case(format!("lambda = {} must lie in [0, 1]", self.lambda)));
        }
        if !(self.horizon > 0.0) {
            return Err(ModelError::Case("horizon must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ModelError::Case("epsilon must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(ModelError::Case("threshold must be positive".into()));
        }
        let g = &self.global;
        for (n, iv) in [("e_int", g.e_int), ("alpha", g.alpha), ("q", g.q), ("w", g.w)] {
            check_interval(n, iv)?;
        }
        check_interval("initial alpha", self.initial.alpha)?;
        check_interval("initial q", self.initial.q)?;
        check_inside("initial alpha", self.initial.alpha, g.alpha)?;
        check_inside("initial q", self.initial.q, g.q)?;
        let eps_deg = self.epsilon * 180.0 / PI;
        check_inside("initial e_int", [-eps_deg, eps_deg], g.e_int)?;
        check_inside("initial weight", [-self.epsilon, self.epsilon], g.w)?;
        if self.terminal_support == TerminalSupport::Threshold {
            let r = deg(self.command_deg);
            let h = self.threshold.sqrt();
            if r - h < deg(g.alpha[0]) || r + h > deg(g.alpha[1]) {
                return Err(ModelError::Case("terminal set is not contained in the global box".into()));
            }
        }
        let mut last = 0.0;
        for &b in &self.time_partitions {
            if !(b > last && b < self.horizon) {
                return Err(ModelError::Case(format!(
                    "time partition breakpoints must increase strictly inside (0, {})",
                    self.horizon
                )));
            }
            last = b;
        }
        if let Disturbance::Step { half_width, amplitude } = self.disturbance {
            if !(half_width > 0.0) || !amplitude.is_finite() {
                return Err(ModelError::Case("step disturbance needs a positive half width".into()));
            }
        }
        Ok(())
    }

    pub fn command(&self) -> f64 {
        deg(self.command_deg)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend_from_slice(&self.time_partitions);
        b.push(self.horizon);
        b
    }
}

impl LinearCase {
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.states.len();
        if n == 0 {
            return Err(ModelError::Case("linear case needs at least one state".into()));
        }
        if self.matrix.len() != n || self.matrix.iter().any(|r| r.len() != n) {
            return Err(ModelError::Case(format!("matrix must be {n}x{n}")));
        }
        if self.initial.len() != n || self.global.len() != n {
            return Err(ModelError::Case(format!("initial and global boxes need {n} intervals")));
        }
        for i in 0..n {
            check_interval(&self.states[i], self.global[i])?;
            check_interval(&self.states[i], self.initial[i])?;
            check_inside(&self.states[i], self.initial[i], self.global[i])?;
        }
        if self.cost_state >= n {
            return Err(ModelError::Case("cost_state out of range".into()));
        }
        if !(self.horizon > 0.0) || !(self.threshold > 0.0) {
            return Err(ModelError::Case("horizon and threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Knobs of the assembly that are not part of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub trig: TrigOrders,
    /// Sign of the adaptive-loop-recovery term.
    pub alr_sign: f64,
    pub control_units: ControlUnits,
}

/// Unit of the controller output `u` (and of the disturbance `d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlUnits {
    /// `u` in degrees; the elevator sees `u * pi / 180` radians.
    Degrees,
    #[default]
    Radians,
}

impl ControlUnits {
    /// Elevator radians per unit of `u`.
    pub fn scale(self) -> f64 {
        match self {
            ControlUnits::Degrees => PI / 180.0,
            ControlUnits::Radians => 1.0,
        }
    }
}

impl std::str::FromStr for ControlUnits {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deg" | "degrees" => Ok(ControlUnits::Degrees),
            "rad" | "radians" => Ok(ControlUnits::Radians),
            _ => Err(format!("unknown control units `{s}` (expected degrees or radians)")),
        }
    }
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            trig: TrigOrders::default(),
            alr_sign: super::mrac::DEFAULT_ALR_SIGN,
            control_units: ControlUnits::default(),
        }
    }
}

/// Linear plant data and the adaptive-law ingredients derived from it.
#[derive(Debug, Clone)]
pub struct PlantData {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mrac: MracConfig,
    pub p: Option<DMatrix<f64>>,
}

/// An assembled scenario, in physical and normalized coordinates.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub name: String,
    pub variant: Variant,
    /// Physical units, time in seconds.
    pub raw: PiecewiseSystem,
    /// `z = D x`, `tau = t / T`.
    pub system: PiecewiseSystem,
    pub normalization: Normalization,
    /// Terminal cost over the normalized registry.
    pub terminal_cost: Polynomial,
    pub running_cost: Polynomial,
    /// State (0-based, excluding time) whose terminal error is scored.
    pub cost_state: usize,
    /// Command value at the horizon, physical units.
    pub terminal_command: f64,
    pub threshold: f64,
    pub initial_box: Vec<(f64, f64)>,
    pub global_box: Vec<(f64, f64)>,
    /// States swept by the Monte-Carlo grid.
    pub swept: Vec<usize>,
    pub reference: Option<ReferenceFit>,
    pub plant: Option<PlantData>,
}

impl ClosedLoop {
    pub fn state_names(&self) -> Vec<String> {
        self.raw.registry().names()[1..].to_vec()
    }

    /// `(r_T - x_c(T))^2` for a physical terminal state.
    pub fn terminal_error(&self, x: &[f64]) -> f64 {
        let e = self.terminal_command - x[self.cost_state];
        e * e
    }
}

/// Builds the closed loop for `variant` and normalizes it.
pub fn assemble_closed_loop(
    case: &CaseSpec,
    params: &AircraftParams,
    aero: &AeroCoeffs,
    variant: Variant,
    opts: &AssemblyOptions,
) -> Result<ClosedLoop, ModelError> {
    case.validate()?;
    match case {
        CaseSpec::F16(c) => assemble_f16(c, params, aero, variant, opts),
        CaseSpec::Linear(c) => assemble_linear(c, variant),
    }
}

fn finish(
    name: &str,
    variant: Variant,
    raw: PiecewiseSystem,
    global_box: Vec<(f64, f64)>,
    initial_box: Vec<(f64, f64)>,
    cost_state: usize,
    command: f64,
    threshold: f64,
    swept: Vec<usize>,
    reference: Option<ReferenceFit>,
    plant: Option<PlantData>,
) -> Result<ClosedLoop, ModelError> {
    let reg = Arc::clone(raw.registry());
    let scales = global_box.iter().map(|&(lo, hi)| 1.0 / lo.abs().max(hi.abs())).collect();
    let normalization = Normalization::new(scales, raw.horizon)?;
    let system = raw.normalize(&normalization)?;
    let x = Polynomial::var_index(&reg, cost_state + 1);
    let err = &Polynomial::constant(&reg, command) - &x;
    let terminal_cost = normalization.apply(&(-&(&err * &err)));
    Ok(ClosedLoop {
        name: name.to_string(),
        variant,
        raw,
        system,
        normalization,
        terminal_cost,
        running_cost: Polynomial::zero(&reg),
        cost_state,
        terminal_command: command,
        threshold,
        initial_box,
        global_box,
        swept,
        reference,
        plant,
    })
}

fn assemble_linear(c: &LinearCase, variant: Variant) -> Result<ClosedLoop, ModelError> {
    let n = c.states.len();
    let mut names = vec!["t".to_string()];
    names.extend(c.states.iter().cloned());
    let reg = VarRegistry::new(&names)?;
    let comps = (0..n)
        .map(|i| Polynomial::from_terms(&reg, (0..n).map(|j| (Monomial::var(j + 1), c.matrix[i][j]))))
        .collect();
    let field = VectorField::new(&reg, comps)?;
    let gb: Vec<(f64, f64)> = c.global.iter().map(|iv| (iv[0], iv[1])).collect();
    let ib: Vec<(f64, f64)> = c.initial.iter().map(|iv| (iv[0], iv[1])).collect();
    let boxed = |b: &[(f64, f64)]| {
        let v: Vec<_> = b.iter().enumerate().map(|(i, &(lo, hi))| (i + 1, lo, hi)).collect();
        SemialgebraicSet::boxed(&reg, &v)
    };
    let global = boxed(&gb);
    let raw = PiecewiseSystem::new(
        vec![Cell {
            set: SemialgebraicSet::whole_space(&reg),
            field,
        }],
        global.clone(),
        boxed(&ib),
        global,
        c.horizon,
    )?;
    finish(
        &c.name,
        variant,
        raw,
        gb,
        ib,
        c.cost_state,
        c.command,
        c.threshold,
        (0..n).collect(),
        None,
        None,
    )
}

/// Linear plant over `(e_int, alpha, q)` with input `u`, at the origin with
/// zero sideslip and full control effectiveness. `control_scale` is elevator
/// radians per unit of `u`.
pub fn plant_matrices(
    sp_alpha: &Polynomial,
    sp_q: &Polynomial,
    control_scale: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), ModelError> {
    let lin = linearize(&[sp_alpha.clone(), sp_q.clone()], &[0.0; 4])?;
    let j = &lin.jacobian;
    // registry order: alpha, q, de, beta
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, j[(0, 0)], j[(0, 1)], 0.0, j[(1, 0)], j[(1, 1)]]);
    let b = DVector::from_row_slice(&[0.0, j[(0, 2)], j[(1, 2)]]) * control_scale;
    Ok((a, b))
}

fn assemble_f16(
    c: &F16Case,
    params: &AircraftParams,
    aero: &AeroCoeffs,
    variant: Variant,
    opts: &AssemblyOptions,
) -> Result<ClosedLoop, ModelError> {
    let sp = build_short_period(params, aero, opts.trig)?;
    let control_scale = opts.control_units.scale();
    let (a, b) = plant_matrices(&sp.alpha_dot, &sp.q_dot, control_scale)?;
    let mut cfg = MracConfig::from_plant(&a, &b);
    cfg.alr_sign = opts.alr_sign;
    cfg.validate()?;
    let mrac = variant == Variant::LqrMrac;
    let active = if mrac { cfg.active_weights() } else { Vec::new() };
    if mrac && active.is_empty() {
        return Err(ModelError::InvalidParameter("MRAC enabled but every learning rate is zero".into()));
    }

    let mut names: Vec<String> = ["t", "e_int", "alpha", "q"].iter().map(|s| s.to_string()).collect();
    names.extend(active.iter().map(|j| format!("w{}", j + 1)));
    let reg = VarRegistry::new(&names)?;
    let mut ext_names = names.clone();
    ext_names.extend(["de".to_string(), "beta".to_string()]);
    let ext = VarRegistry::new(&ext_names)?;
    let (de_idx, beta_idx) = (names.len(), names.len() + 1);
    let alpha_dot = sp.alpha_dot.rebase(&ext)?;
    let q_dot = sp.q_dot.rebase(&ext)?;

    let v = |i: usize| Polynomial::var_index(&ext, i);
    let state = [v(1), v(2), v(3)];
    let weights: [Polynomial; 3] = std::array::from_fn(|j| match active.iter().position(|&k| k == j) {
        Some(pos) => v(4 + pos),
        None => Polynomial::constant(&ext, if mrac { cfg.w0[j] } else { 0.0 }),
    });
    let basis = state.clone();

    let r = c.command();
    let mut u = Polynomial::zero(&ext);
    for i in 0..3 {
        u = &u - &(&state[i] * cfg.k1[i]);
    }
    if mrac {
        for j in 0..3 {
            u = &u - &(&weights[j] * &basis[j]);
        }
    }
    let beta = match c.sideslip {
        Sideslip::None => Polynomial::zero(&ext),
        Sideslip::Affine { slope, offset } => &(&state[1] * slope) + &Polynomial::constant(&ext, offset),
    };

    let deg_box = |iv: [f64; 2]| (deg(iv[0]), deg(iv[1]));
    let g = &c.global;
    let mut global_box = vec![deg_box(g.e_int), deg_box(g.alpha), deg_box(g.q)];
    let mut initial_box = vec![(-c.epsilon, c.epsilon), deg_box(c.initial.alpha), deg_box(c.initial.q)];
    for _ in &active {
        global_box.push((g.w[0], g.w[1]));
        initial_box.push((-c.epsilon, c.epsilon));
    }

    let breakpoints = c.breakpoints();
    let p = if mrac { Some(solve_lyapunov(&cfg.a_ref, &cfg.r_lyap)?) } else { None };
    let reference = if mrac {
        let scales: Vec<f64> = global_box[..3].iter().map(|&(lo, hi)| 1.0 / lo.abs().max(hi.abs())).collect();
        Some(fit_reference_trajectory(&cfg.a_ref, &cfg.b_ref, r, &breakpoints, c.reference_degree, &scales)?)
    } else {
        None
    };

    // (constraint, disturbance) per regime
    let alpha = Polynomial::var_index(&reg, 2);
    let regimes: Vec<(Option<Polynomial>, f64)> = match c.disturbance {
        Disturbance::None => vec![(None, 0.0)],
        Disturbance::Step { amplitude, half_width } => vec![
            (Some(&Polynomial::constant(&reg, half_width * half_width) - &(&alpha * &alpha)), amplitude),
            (Some(&(-&alpha) - &Polynomial::constant(&reg, half_width)), 0.0),
            (Some(&alpha - &Polynomial::constant(&reg, half_width)), 0.0),
        ],
    };
    let t = Polynomial::var_index(&reg, 0);
    let mut cells = Vec::new();
    for (k, w) in breakpoints.windows(2).enumerate() {
        let window = if breakpoints.len() > 2 {
            Some(&(&t - &Polynomial::constant(&reg, w[0])) * &(&Polynomial::constant(&reg, w[1]) - &t))
        } else {
            None
        };
        for (constraint, dist) in &regimes {
            let de = &(&u + &Polynomial::constant(&ext, *dist)) * (c.lambda * control_scale);
            let close = |f: &Polynomial| -> Result<Polynomial, ModelError> {
                Ok(f.substitute_index(de_idx, &de).substitute_index(beta_idx, &beta).rebase(&reg)?)
            };
            let mut comps = vec![
                (&state[1] - &Polynomial::constant(&ext, r)).rebase(&reg)?,
                close(&alpha_dot)?,
                close(&q_dot)?,
            ];
            if mrac {
                let piece = &reference.as_ref().expect("fitted when mrac").pieces[k];
                let refs: [Polynomial; 3] = std::array::from_fn(|i| piece.polynomial(&ext, 0, i));
                let inputs = AdaptiveLawInputs {
                    registry: &ext,
                    state: state.clone(),
                    reference: refs,
                    weights: weights.clone(),
                    basis: basis.clone(),
                };
                for (_, law) in build_adaptive_law(&cfg, p.as_ref().expect("solved when mrac"), &b, &inputs)? {
                    comps.push(law.rebase(&reg)?);
                }
            }
            let mut set = SemialgebraicSet::whole_space(&reg);
            if let Some(wc) = &window {
                set = set.with_constraint(wc.clone());
            }
            if let Some(rc) = constraint {
                set = set.with_constraint(rc.clone());
            }
            cells.push(Cell {
                set,
                field: VectorField::new(&reg, comps)?,
            });
        }
    }

    let boxed = |b: &[(f64, f64)]| {
        let v: Vec<_> = b.iter().enumerate().map(|(i, &(lo, hi))| (i + 1, lo, hi)).collect();
        SemialgebraicSet::boxed(&reg, &v)
    };
    let global = boxed(&global_box);
    let terminal = match c.terminal_support {
        TerminalSupport::Global => global.clone(),
        TerminalSupport::Threshold => {
            let e = &Polynomial::constant(&reg, r) - &alpha;
            global.clone().with_constraint(&Polynomial::constant(&reg, c.threshold) - &(&e * &e))
        }
    };
    let raw = PiecewiseSystem::new(cells, global, boxed(&initial_box), terminal, c.horizon)?;
    let plant = PlantData { a, b, mrac: cfg, p };
    finish(
        &c.name,
        variant,
        raw,
        global_box,
        initial_box,
        1,
        r,
        c.threshold,
        vec![1, 2],
        reference,
        Some(plant),
    )
}

/// Bundled scenario files.
pub mod bundled {
    pub const CASE1: &str = include_str!("../../data/cases/case1.toml");
    pub const CASE2: &str = include_str!("../../data/cases/case2.toml");
    pub const CASE3: &str = include_str!("../../data/cases/case3.toml");
    pub const SURROGATE: &str = include_str!("../../data/cases/surrogate.toml");

    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "case1" => Some(CASE1),
            "case2" => Some(CASE2),
            "case3" => Some(CASE3),
            "surrogate" => Some(SURROGATE),
            _ => None,
        }
    }
}
