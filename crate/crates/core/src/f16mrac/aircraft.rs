//! Longitudinal short-period model of the F-16 with polynomial aerodynamics.

use std::path::Path;
use std::sync::Arc;

use crate::poly::{Monomial, Polynomial, Trig, VarRegistry};

use super::ModelError;

/// Aircraft properties at the 502 ft/s, sea-level flight condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftParams {
    /// slugs
    pub mass: f64,
    /// ft²
    pub wing_area: f64,
    /// mean aerodynamic chord, ft
    pub chord: f64,
    /// c.g. offset from the reference location, ft
    pub cg_offset: f64,
    /// lbf
    pub thrust: f64,
    /// ft/s
    pub airspeed: f64,
    pub dynamic_pressure: f64,
    /// ft/s²
    pub gravity: f64,
    /// slug·ft²
    pub pitch_inertia: f64,
}

impl AircraftParams {
    pub fn f16() -> Self {
        let chord = 11.32;
        Self {
            mass: 636.94,
            wing_area: 300.0,
            chord,
            cg_offset: 0.35 * chord,
            thrust: 8000.0,
            airspeed: 502.0,
            dynamic_pressure: 299.0027,
            gravity: 32.17,
            pitch_inertia: 55814.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("mass", self.mass),
            ("wing_area", self.wing_area),
            ("chord", self.chord),
            ("cg_offset", self.cg_offset),
            ("thrust", self.thrust),
            ("airspeed", self.airspeed),
            ("dynamic_pressure", self.dynamic_pressure),
            ("gravity", self.gravity),
            ("pitch_inertia", self.pitch_inertia),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(ModelError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coeff {
    Cx,
    Cz,
    Cm,
    Cxq,
    Czq,
    Cmq,
}

impl Coeff {
    pub const ALL: [Coeff; 6] = [Coeff::Cx, Coeff::Cz, Coeff::Cm, Coeff::Cxq, Coeff::Czq, Coeff::Cmq];

    pub fn name(self) -> &'static str {
        match self {
            Coeff::Cx => "Cx",
            Coeff::Cz => "Cz",
            Coeff::Cm => "Cm",
            Coeff::Cxq => "Cxq",
            Coeff::Czq => "Czq",
            Coeff::Cmq => "Cmq",
        }
    }

    fn parse(s: &str) -> Option<Coeff> {
        Coeff::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Arguments the coefficient may depend on, as a mask over (alpha, de, beta).
    fn allowed(self) -> [bool; 3] {
        match self {
            Coeff::Cx | Coeff::Cm => [true, true, false],
            Coeff::Cz => [true, true, true],
            Coeff::Cxq | Coeff::Czq | Coeff::Cmq => [true, false, false],
        }
    }
}

/// Aerodynamic coefficient polynomials over the registry `(alpha, de, beta)`,
/// all in radians.
#[derive(Debug, Clone)]
pub struct AeroCoeffs {
    registry: Arc<VarRegistry>,
    coeffs: [Option<Polynomial>; 6],
}

impl AeroCoeffs {
    pub fn registry() -> Arc<VarRegistry> {
        VarRegistry::new(&["alpha", "de", "beta"]).expect("static registry")
    }

    pub fn empty() -> Self {
        Self {
            registry: Self::registry(),
            coeffs: Default::default(),
        }
    }

    /// All six coefficients identically zero.
    pub fn zero() -> Self {
        let registry = Self::registry();
        let coeffs = std::array::from_fn(|_| Some(Polynomial::zero(&registry)));
        Self { registry, coeffs }
    }

    pub fn aero_registry(&self) -> &Arc<VarRegistry> {
        &self.registry
    }

    pub fn get(&self, c: Coeff) -> Option<&Polynomial> {
        self.coeffs[c as usize].as_ref()
    }

    pub fn set(&mut self, c: Coeff, p: Polynomial) -> Result<(), ModelError> {
        let allowed = c.allowed();
        for (m, _) in p.terms() {
            for (var, _) in m.iter() {
                if !allowed[var] {
                    return Err(ModelError::InvalidAero(format!(
                        "{} may not depend on {}",
                        c.name(),
                        self.registry.name(var)
                    )));
                }
            }
        }
        self.coeffs[c as usize] = Some(p.rebase(&self.registry)?);
        Ok(())
    }

    fn require(&self, c: Coeff) -> Result<&Polynomial, ModelError> {
        self.get(c).ok_or(ModelError::MissingCoefficient(c.name()))
    }

    /// Parses the aero data format: one term per line,
    /// `<name> <exp_alpha> <exp_de> <exp_beta> <value>`, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let registry = Self::registry();
        let mut terms: [Vec<(Monomial, f64)>; 6] = Default::default();
        let mut seen = [false; 6];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ModelError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err("expected `<name> <exp_alpha> <exp_de> <exp_beta> <value>`"));
            }
            let c = Coeff::parse(fields[0]).ok_or_else(|| err(&format!("unknown coefficient `{}`", fields[0])))?;
            let mut exps = [0u32; 3];
            for k in 0..3 {
                exps[k] = fields[1 + k]
                    .parse()
                    .map_err(|_| err(&format!("bad exponent `{}`", fields[1 + k])))?;
                if exps[k] > 0 && !c.allowed()[k] {
                    return Err(err(&format!("{} may not depend on {}", c.name(), registry.name(k))));
                }
            }
            let value: f64 = fields[4].parse().map_err(|_| err(&format!("bad value `{}`", fields[4])))?;
            terms[c as usize].push((Monomial::from_dense(&exps), value));
            seen[c as usize] = true;
        }
        let mut coeffs: [Option<Polynomial>; 6] = Default::default();
        for (i, t) in terms.into_iter().enumerate() {
            if seen[i] {
                coeffs[i] = Some(Polynomial::from_terms(&registry, t));
            }
        }
        Ok(Self { registry, coeffs })
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

    /// The bundled transcription of the global nonlinear F-16 aerodynamic model.
    pub fn morelli() -> Self {
        Self::parse(MORELLI_DATA).expect("bundled aero data parses")
    }

    /// Small linear aero set used for fast tests.
    pub fn synthetic() -> Self {
        Self::parse(SYNTHETIC_DATA).expect("bundled aero data parses")
    }
}

pub const MORELLI_DATA: &str = include_str!("../../data/morelli.aero");
pub const SYNTHETIC_DATA: &str = include_str!("../../data/synthetic.aero");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigOrders {
    pub sin: u32,
    pub cos: u32,
}

impl Default for TrigOrders {
    fn default() -> Self {
        Self { sin: 3, cos: 2 }
    }
}

/// Short-period right-hand side over the registry `(alpha, q, de, beta)`.
#[derive(Debug, Clone)]
pub struct ShortPeriodModel {
    pub registry: Arc<VarRegistry>,
    pub alpha_dot: Polynomial,
    pub q_dot: Polynomial,
    pub degree: u32,
}

impl ShortPeriodModel {
    pub fn registry() -> Arc<VarRegistry> {
        VarRegistry::new(&["alpha", "q", "de", "beta"]).expect("static registry")
    }
}

/// Builds the short-period equations with pitch angle taken as zero and the
/// trigonometric terms replaced by truncated Maclaurin series.
pub fn build_short_period(p: &AircraftParams, aero: &AeroCoeffs, trig: TrigOrders) -> Result<ShortPeriodModel, ModelError> {
    p.validate()?;
    let reg = ShortPeriodModel::registry();
    let lift = |c: Coeff| -> Result<Polynomial, ModelError> { Ok(aero.require(c)?.rebase(&reg)?) };
    let cx = lift(Coeff::Cx)?;
    let cz = lift(Coeff::Cz)?;
    let cm = lift(Coeff::Cm)?;
    let cxq = lift(Coeff::Cxq)?;
    let czq = lift(Coeff::Czq)?;
    let cmq = lift(Coeff::Cmq)?;

    let q = Polynomial::var(&reg, "q")?;
    let sin_a = Polynomial::taylor_trig(&reg, Trig::Sin, "alpha", trig.sin)?;
    let cos_a = Polynomial::taylor_trig(&reg, Trig::Cos, "alpha", trig.cos)?;
    let one = Polynomial::constant(&reg, 1.0);

    let m = p.mass;
    let v = p.airspeed;
    let qs = p.dynamic_pressure * p.wing_area;
    let damping_gain = qs * p.chord / (2.0 * m * v * v);
    let force_gain = qs / (m * v);

    // alpha_dot
    let pitch_coupling = &one + &(&(&(&czq * &cos_a) - &(&cxq * &sin_a)) * damping_gain);
    let aero_force = &(&(&cz * &cos_a) - &(&cx * &sin_a)) * force_gain;
    let thrust = &sin_a * (-p.thrust / (m * v));
    // cos(theta - alpha) with theta = 0
    let gravity = &cos_a * (p.gravity / v);
    let alpha_dot = &(&(&(&pitch_coupling * &q) + &aero_force) + &thrust) + &gravity;

    // q_dot
    let jy = p.pitch_inertia;
    let rate_term = &(&(&(&cmq * p.chord) + &(&czq * p.cg_offset)) * &q) * (qs * p.chord / (2.0 * jy * v));
    let moment = &(&cm + &(&cz * (p.cg_offset / p.chord))) * (qs * p.chord / jy);
    let q_dot = &rate_term + &moment;

    let degree = alpha_dot.degree().max(q_dot.degree());
    Ok(ShortPeriodModel {
        registry: reg,
        alpha_dot,
        q_dot,
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reports_line_numbers() {
        let err = AeroCoeffs::parse("Cx 0 0 0 1.0\nCq 0 0 0 1.0\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }));
        let err = AeroCoeffs::parse("Cm 0 0 1 1.0\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 1, .. }));
        let err = AeroCoeffs::parse("Cm 0 0 0\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 1, .. }));
    }

    #[test]
    fn bundled_data_loads() {
        let a = AeroCoeffs::morelli();
        for c in Coeff::ALL {
            assert!(a.get(c).is_some(), "{} missing", c.name());
        }
        // C_z carries the (1 - beta^2) factor on its alpha polynomial
        let cz = a.get(Coeff::Cz).unwrap();
        assert_eq!(cz.degree_in(2), 2);
        assert_eq!(a.get(Coeff::Cmq).unwrap().degree(), 5);
    }

    #[test]
    fn missing_coefficient_is_reported() {
        let mut a = AeroCoeffs::empty();
        let r = AeroCoeffs::registry();
        for c in [Coeff::Cx, Coeff::Cz, Coeff::Cm, Coeff::Cxq, Coeff::Czq] {
            a.set(c, Polynomial::zero(&r)).unwrap();
        }
        let err = build_short_period(&AircraftParams::f16(), &a, TrigOrders::default()).unwrap_err();
        assert!(matches!(err, ModelError::MissingCoefficient("Cmq")));
    }

    #[test]
    fn trim_point_value() {
        let p = AircraftParams::f16();
        let a = AeroCoeffs::morelli();
        let m = build_short_period(&p, &a, TrigOrders::default()).unwrap();
        let got = m.alpha_dot.eval(&[0.0; 4]).unwrap();
        // hand evaluation: cos(0) = 1, sin(0) = 0, C_z(0,0,0) = f0
        let cz0 = a.get(Coeff::Cz).unwrap().eval(&[0.0; 3]).unwrap();
        let expect = p.dynamic_pressure * p.wing_area / (p.mass * p.airspeed) * cz0 + p.gravity / p.airspeed;
        assert!((got - expect).abs() < 1e-14);
        assert!((cz0 + 1.378278e-1).abs() < 1e-15);
    }

    #[test]
    fn gravity_only() {
        let mut p = AircraftParams::f16();
        let m = build_short_period(&p, &AeroCoeffs::zero(), TrigOrders::default()).unwrap();
        let reg = &m.registry;
        let q = Polynomial::var(reg, "q").unwrap();
        let cos_a = Polynomial::taylor_trig(reg, Trig::Cos, "alpha", 2).unwrap();
        let sin_a = Polynomial::taylor_trig(reg, Trig::Sin, "alpha", 3).unwrap();
        let thrust = &sin_a * (-p.thrust / (p.mass * p.airspeed));
        let expect = &(&q + &(&cos_a * (p.gravity / p.airspeed))) + &thrust;
        assert_eq!(m.alpha_dot, expect);
        assert!(m.q_dot.is_zero());

        // thrust-only: zero gravity too
        p.gravity = 1e-300;
        let m = build_short_period(&p, &AeroCoeffs::zero(), TrigOrders::default()).unwrap();
        let pt = [0.2, 0.1, 0.0, 0.0];
        let expect = 0.1 - p.thrust / (p.mass * p.airspeed) * (0.2 - 0.2f64.powi(3) / 6.0);
        assert!((m.alpha_dot.eval(&pt).unwrap() - expect).abs() < 1e-12);
    }
}
