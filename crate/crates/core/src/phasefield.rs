//! Phase fields Φ ≈ 1 in the fluid region and ≈ 0 in the porous region, built from a level
//! set through a profile S: Φ^ε = ½(1 + S(ls/ε)), regularized as (1 − 2δ)Φ^ε + δ.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::LevelSet;
use crate::mesh::Point;

/// Threshold δ' defining the diagnostic layer {δ' < Φ < 1 − δ'} for unbounded profiles.
pub const LAYER_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// S(t) = (t+1)^α − 1 on (−1, 0], 1 − (1−t)^α on (0, 1], ±1 outside.
    Power { alpha: f64 },
    /// S(t) = t on [−1, 1], ±1 outside.
    Clamp,
    Tanh,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(arg) = s.strip_prefix("power(").and_then(|r| r.strip_suffix(')')) {
            let alpha: f64 = arg
                .trim()
                .parse()
                .map_err(|_| Error::config("profile", format!("malformed exponent in `{s}`")))?;
            let p = Profile::Power { alpha };
            p.validate()?;
            return Ok(p);
        }
        match s {
            "clamp" => Ok(Profile::Clamp),
            "tanh" => Ok(Profile::Tanh),
            _ => Err(Error::config(
                "profile",
                format!("unknown profile `{s}` (expected power(α), clamp, tanh)"),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Power { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(Error::config(
                "profile",
                format!("power profile exponent must lie in (0, 1), got {alpha}"),
            )),
            _ => Ok(()),
        }
    }

    /// True if Φ^ε is exactly 0 or 1 outside {|ls| < ε}.
    pub fn compact_layer(&self) -> bool {
        !matches!(self, Profile::Tanh)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Power { alpha } => write!(f, "power({alpha})"),
            Profile::Clamp => f.write_str("clamp"),
            Profile::Tanh => f.write_str("tanh"),
        }
    }
}

pub fn eval_s(profile: Profile, t: f64) -> f64 {
    match profile {
        Profile::Power { alpha } => {
            if t <= -1.0 {
                -1.0
            } else if t <= 0.0 {
                (t + 1.0).powf(alpha) - 1.0
            } else if t <= 1.0 {
                1.0 - (1.0 - t).powf(alpha)
            } else {
                1.0
            }
        }
        Profile::Clamp => t.clamp(-1.0, 1.0),
        Profile::Tanh => t.tanh(),
    }
}

/// S'(t); at the kinks |t| = 1 of the compact profiles the outer one-sided value 0 is used.
pub fn eval_ds(profile: Profile, t: f64) -> f64 {
    match profile {
        Profile::Power { alpha } => {
            if t <= -1.0 || t >= 1.0 {
                0.0
            } else if t <= 0.0 {
                alpha * (t + 1.0).powf(alpha - 1.0)
            } else {
                alpha * (1.0 - t).powf(alpha - 1.0)
            }
        }
        Profile::Clamp => {
            if t.abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Profile::Tanh => {
            let s = t.tanh();
            1.0 - s * s
        }
    }
}

/// Value and gradient of a phase weight at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseValue {
    pub phi: f64,
    pub grad: [f64; 2],
}

impl PhaseValue {
    pub fn psi(&self) -> f64 {
        1.0 - self.phi
    }
}

/// Anything that can weight the forms: a diffuse phase field or a constant indicator.
pub trait PhaseWeight: Sync + Send {
    fn eval(&self, p: Point) -> PhaseValue;

    /// Gradient magnitude below which the tangent frame is treated as undefined.
    fn g_min(&self) -> f64 {
        0.0
    }

    fn frame(&self, p: Point) -> DiffuseFrame {
        DiffuseFrame::from_gradient(self.eval(p).grad, self.g_min())
    }
}

/// Constant weight Φ ≡ c (∇Φ = 0); Φ ≡ 1 gives pure Stokes, Φ ≡ 0 pure Darcy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformPhase(pub f64);

impl PhaseWeight for UniformPhase {
    fn eval(&self, _: Point) -> PhaseValue {
        PhaseValue {
            phi: self.0,
            grad: [0.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffuseFrame {
    pub grad: [f64; 2],
    pub norm: f64,
    /// rot90(∇Φ/|∇Φ|) = (−n_y, n_x); zero when the frame is invalid.
    pub tangent: [f64; 2],
    pub valid: bool,
}

impl DiffuseFrame {
    pub fn from_gradient(grad: [f64; 2], g_min: f64) -> Self {
        let norm = grad[0].hypot(grad[1]);
        if norm > 0.0 && norm >= g_min {
            Self {
                grad,
                norm,
                tangent: [-grad[1] / norm, grad[0] / norm],
                valid: true,
            }
        } else {
            Self {
                grad,
                norm,
                tangent: [0.0, 0.0],
                valid: false,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    pub epsilon: f64,
    pub delta: f64,
    pub profile: Profile,
    pub levelset: LevelSet,
    pub g_min: f64,
}

impl PhaseField {
    pub fn new(epsilon: f64, delta: f64, profile: Profile, levelset: LevelSet) -> Result<Self> {
        let pf = Self {
            epsilon,
            delta,
            profile,
            levelset,
            g_min: 1e-10 / epsilon,
        };
        pf.validate()?;
        Ok(pf)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::config("delta", format!("must lie in [0, 1/2), got {}", self.delta)));
        }
        if !(self.g_min >= 0.0) {
            return Err(Error::config("g_min", format!("must be nonnegative, got {}", self.g_min)));
        }
        self.profile.validate()
    }

    /// Φ^ε before regularization.
    pub fn phi_unregularized(&self, p: Point) -> f64 {
        0.5 * (1.0 + eval_s(self.profile, self.levelset.eval(p) / self.epsilon))
    }

    pub fn eval_phi(&self, p: Point) -> f64 {
        self.eval(p).phi
    }

    pub fn eval_psi(&self, p: Point) -> f64 {
        1.0 - self.eval(p).phi
    }

    pub fn eval_grad_phi(&self, p: Point) -> [f64; 2] {
        self.eval(p).grad
    }

    pub fn diffuse_frame(&self, p: Point) -> DiffuseFrame {
        self.frame(p)
    }

    /// Membership in the diffuse layer: {|ls| < ε} for compact profiles,
    /// {δ' < Φ^ε < 1 − δ'} for tanh.
    pub fn in_layer(&self, p: Point) -> bool {
        if self.profile.compact_layer() {
            self.levelset.eval(p).abs() < self.epsilon
        } else {
            let phi = self.phi_unregularized(p);
            phi > LAYER_THRESHOLD && phi < 1.0 - LAYER_THRESHOLD
        }
    }
}

impl PhaseWeight for PhaseField {
    fn eval(&self, p: Point) -> PhaseValue {
        let (ls, g) = self.levelset.eval_with_gradient(p);
        let t = ls / self.epsilon;
        let scale = 1.0 - 2.0 * self.delta;
        let phi_e = 0.5 * (1.0 + eval_s(self.profile, t));
        let d = scale * eval_ds(self.profile, t) / (2.0 * self.epsilon);
        PhaseValue {
            phi: scale * phi_e + self.delta,
            grad: [d * g[0], d * g[1]],
        }
    }

    fn g_min(&self) -> f64 {
        self.g_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PROFILES: [Profile; 3] = [Profile::Power { alpha: 0.5 }, Profile::Clamp, Profile::Tanh];

    #[test]
    fn profile_values() {
        let p = Profile::Power { alpha: 0.5 };
        assert_eq!(eval_s(p, 0.0), 0.0);
        assert!((eval_s(p, -0.75) + 0.5).abs() < 1e-15);
        assert_eq!(eval_s(Profile::Clamp, 2.0), 1.0);
    }

    #[test]
    fn profiles_are_odd_and_monotone() {
        for prof in PROFILES {
            let mut prev = -2.0;
            for i in -300..=300 {
                let t = i as f64 / 100.0;
                let s = eval_s(prof, t);
                assert!((s + eval_s(prof, -t)).abs() < 1e-15, "{prof} at {t}");
                assert!(s >= prev);
                prev = s;
                if prof.compact_layer() && t.abs() >= 1.0 {
                    assert_eq!(s.abs(), 1.0);
                }
            }
        }
    }

    #[test]
    fn power_exponent_is_validated() {
        assert!(Profile::Power { alpha: 1.5 }.validate().is_err());
        assert!(Profile::parse("power(0)").is_err());
        assert_eq!(Profile::parse("power(0.25)").unwrap(), Profile::Power { alpha: 0.25 });
    }

    #[test]
    fn pointwise_values() {
        let flat = LevelSet::Flat { y0: 1.0 };
        for prof in PROFILES {
            let pf = PhaseField::new(0.1, 0.0, prof, flat.clone()).unwrap();
            assert_eq!(pf.eval_phi([0.3, 1.0]), 0.5);
        }
        let pf = PhaseField::new(0.1, 1e-3, Profile::Clamp, flat.clone()).unwrap();
        assert!((pf.eval_phi([0.0, 1.5]) - 0.999).abs() < 1e-15);
        assert!((pf.eval_phi([0.0, 1.5]) + pf.eval_psi([0.0, 1.5]) - 1.0).abs() == 0.0);
        let pf = PhaseField::new(0.1, 0.0, Profile::Clamp, flat).unwrap();
        assert!((pf.eval_phi([0.0, 1.05]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ls = LevelSet::Sine { a: 0.1, k: 4.0, y0: 0.0 };
        for prof in PROFILES {
            let pf = PhaseField::new(0.2, 1e-3, prof, ls.clone()).unwrap();
            let mut found = 0;
            while found < 20 {
                let p = [rng.gen_range(0.0..1.0), rng.gen_range(-0.4..0.4)];
                let t = ls.eval(p) / pf.epsilon;
                // stay clear of the kinks of the compact profiles
                if t.abs() > 0.9 {
                    continue;
                }
                found += 1;
                let h = 1e-7;
                let g = pf.eval_grad_phi(p);
                let fx = (pf.eval_phi([p[0] + h, p[1]]) - pf.eval_phi([p[0] - h, p[1]])) / (2.0 * h);
                let fy = (pf.eval_phi([p[0], p[1] + h]) - pf.eval_phi([p[0], p[1] - h])) / (2.0 * h);
                let scale = 1.0 + g[0].abs().max(g[1].abs());
                assert!((g[0] - fx).abs() < 1e-5 * scale, "{prof} {p:?}");
                assert!((g[1] - fy).abs() < 1e-5 * scale, "{prof} {p:?}");
            }
        }
    }

    #[test]
    fn frames() {
        let pf = PhaseField::new(0.1, 1e-3, Profile::Clamp, LevelSet::Flat { y0: 1.0 }).unwrap();
        let f = pf.diffuse_frame([0.4, 1.02]);
        assert!(f.valid);
        assert_eq!(f.tangent, [-1.0, 0.0]);
        assert!(!pf.diffuse_frame([0.4, 1.5]).valid);

        let sine = LevelSet::Sine { a: 0.1, k: 4.0, y0: 0.0 };
        let pf = PhaseField::new(0.05, 1e-3, Profile::Tanh, sine.clone()).unwrap();
        for x in [0.05, 0.3, 0.61, 0.9] {
            let p = [x, sine.interface_height(x).unwrap()];
            let f = pf.diffuse_frame(p);
            // analytic normal of y = 0.1 sin(4πx), oriented like ∇ls
            let slope = 0.4 * std::f64::consts::PI * (4.0 * std::f64::consts::PI * x).cos();
            let n = [slope, -1.0];
            let len = n[0].hypot(n[1]);
            let dot = (f.tangent[0] * n[0] + f.tangent[1] * n[1]) / len;
            assert!(dot.abs() < 1e-12);
            assert!((f.tangent[0].hypot(f.tangent[1]) - 1.0).abs() < 1e-14);
            // right-handed: det[n, τ] = +1
            assert!((n[0] * f.tangent[1] - n[1] * f.tangent[0]) / len > 0.0);
        }
    }

    #[test]
    fn bounds_and_monotonicity() {
        let ls = LevelSet::Flat { y0: 0.0 };
        for prof in PROFILES {
            let pf = PhaseField::new(0.1, 0.01, prof, ls.clone()).unwrap();
            let mut prev = 0.0;
            for i in -100..=100 {
                let phi = pf.eval_phi([0.0, i as f64 * 0.003]);
                assert!((0.01..=0.99).contains(&phi));
                assert!(phi >= prev);
                prev = phi;
            }
        }
    }
}
