//! Seeded smooth random data: forcing, sources, Neumann data, and initial fields built from
//! a few trigonometric modes. Dirichlet values are zero, so the energy identity has no
//! boundary reaction term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forms::{BoundarySetup, ProblemData};
use crate::mesh::Point;

const MODES: usize = 3;

/// `Σ a_k sin(k_x x + k_y y + ω t + φ_k)`.
#[derive(Clone, Debug, PartialEq)]
struct Field {
    modes: Vec<[f64; 5]>,
}

impl Field {
    fn random(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let modes = (0..MODES)
            .map(|_| {
                [
                    scale * rng.gen_range(-1.0..1.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        Self { modes }
    }

    fn eval(&self, p: Point, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m[0] * (m[1] * p[0] + m[2] * p[1] + m[3] * t + m[4]).sin())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomData {
    boundary: BoundarySetup,
    forcing: [Field; 2],
    source: Field,
    traction: [Field; 2],
    flux: Field,
    initial_u: [Field; 2],
    initial_p: Field,
    forced: bool,
}

impl RandomData {
    pub fn new(seed: u64, boundary: BoundarySetup) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = |scale| Field::random(&mut rng, scale);
        Self {
            forcing: [f(1.0), f(1.0)],
            source: f(1.0),
            traction: [f(0.5), f(0.5)],
            flux: f(0.5),
            initial_u: [f(1.0), f(1.0)],
            initial_p: f(1.0),
            boundary,
            forced: true,
        }
    }

    /// Same initial data with zero forcing, sources, and Neumann data.
    pub fn unforced(mut self) -> Self {
        self.forced = false;
        self
    }
}

impl ProblemData for RandomData {
    fn forcing(&self, p: Point, t: f64) -> [f64; 2] {
        if !self.forced {
            return [0.0; 2];
        }
        [self.forcing[0].eval(p, t), self.forcing[1].eval(p, t)]
    }

    fn source(&self, p: Point, t: f64) -> f64 {
        if self.forced {
            self.source.eval(p, t)
        } else {
            0.0
        }
    }

    fn velocity_boundary(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn darcy_boundary(&self, _: Point, _: f64) -> f64 {
        0.0
    }

    fn traction(&self, p: Point, t: f64, _: [f64; 2]) -> [f64; 2] {
        if !self.forced {
            return [0.0; 2];
        }
        [self.traction[0].eval(p, t), self.traction[1].eval(p, t)]
    }

    fn darcy_flux(&self, p: Point, t: f64, _: [f64; 2]) -> f64 {
        if self.forced {
            self.flux.eval(p, t)
        } else {
            0.0
        }
    }

    fn initial_velocity(&self, p: Point) -> [f64; 2] {
        [self.initial_u[0].eval(p, 0.0), self.initial_u[1].eval(p, 0.0)]
    }

    fn initial_darcy_pressure(&self, p: Point) -> f64 {
        self.initial_p.eval(p, 0.0)
    }

    fn boundary(&self) -> BoundarySetup {
        self.boundary.clone()
    }
}
