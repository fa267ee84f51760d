//! The manufactured benchmark on (0,1)×(0,2) with the fluid above y = 1:
//! `u = (−(1/π)eʸ sin πx, (eʸ − e) cos πx) c(t)`, `π = 2eʸ cos πx c(t)`,
//! `p = (eʸ − e y) cos πx c(t)`, `c(t) = cos 2πt`. Forcing and source are derived for
//! arbitrary ρ, μ, c₀, κ as `F = ∂ₜu − (μΔu − ∇π)/ρ` and `g = c₀∂ₜp − ∇·(κ∇p)`.

use std::f64::consts::{E, PI};

use crate::forms::{BoundarySetup, PhysicalParams, ProblemData};
use crate::levelset::LevelSet;
use crate::mesh::{BoundaryTag, Point};

use super::ExactSolution;

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct ManufacturedCase {
    pub params: PhysicalParams,
}


/// Terms of the time factor c(t) = cos 2πt and its derivative.
fn time_factor(t: f64) -> (f64, f64) {
    let (s, c) = (2.0 * PI * t).sin_cos();
    (c, -2.0 * PI * s)
}

impl ManufacturedCase {
    pub fn new(params: PhysicalParams) -> Self {
        Self { params }
    }

    pub const X_RANGE: (f64, f64) = (0.0, 1.0);
    pub const Y_RANGE: (f64, f64) = (0.0, 2.0);

    /// Level set positive in the fluid (upper) half.
    pub fn levelset() -> LevelSet {
        LevelSet::Flat { y0: 1.0 }
    }

    /// Velocity Dirichlet on top, Darcy Dirichlet on the bottom, weighted Neumann data for
    /// both fields on the left and right sides.
    pub fn boundary_setup() -> BoundarySetup {
        BoundarySetup {
            velocity_dirichlet: vec![BoundaryTag::Top],
            darcy_dirichlet: vec![BoundaryTag::Bottom],
            stokes_neumann: vec![BoundaryTag::Left, BoundaryTag::Right],
            darcy_neumann: vec![BoundaryTag::Left, BoundaryTag::Right],
        }
    }

    /// `(Δu1, Δu2)` of the spatial profile (without c(t)).
    fn laplacian_u(p: Point) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let ey = y.exp();
        let (s, c) = (PI * x).sin_cos();
        [
            -(1.0 / PI) * ey * s * (1.0 - PI * PI),
            (ey - PI * PI * (ey - E)) * c,
        ]
    }

    /// Second derivatives `(p_xx, p_xy, p_yy)` of the spatial profile of p.
    fn hessian_p(p: Point) -> (f64, f64, f64) {
        let (x, y) = (p[0], p[1]);
        let ey = y.exp();
        let (s, c) = (PI * x).sin_cos();
        (-PI * PI * (ey - E * y) * c, -PI * (ey - E) * s, ey * c)
    }

    /// ∇·u at (p, t); zero analytically.
    pub fn divergence(&self, p: Point, t: f64) -> f64 {
        let g = self.velocity_gradient(p, t);
        g[0][0] + g[1][1]
    }
}

impl ExactSolution for ManufacturedCase {
    fn velocity(&self, p: Point, t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let (c, _) = time_factor(t);
        let ey = y.exp();
        let (s, cx) = (PI * x).sin_cos();
        [-(1.0 / PI) * ey * s * c, (ey - E) * cx * c]
    }

    fn velocity_gradient(&self, p: Point, t: f64) -> [[f64; 2]; 2] {
        let (x, y) = (p[0], p[1]);
        let (c, _) = time_factor(t);
        let ey = y.exp();
        let (s, cx) = (PI * x).sin_cos();
        [
            [-ey * cx * c, -(1.0 / PI) * ey * s * c],
            [-PI * (ey - E) * s * c, ey * cx * c],
        ]
    }

    fn fluid_pressure(&self, p: Point, t: f64) -> f64 {
        let (c, _) = time_factor(t);
        2.0 * p[1].exp() * (PI * p[0]).cos() * c
    }

    fn darcy_pressure(&self, p: Point, t: f64) -> f64 {
        let (c, _) = time_factor(t);
        (p[1].exp() - E * p[1]) * (PI * p[0]).cos() * c
    }

    fn darcy_gradient(&self, p: Point, t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let (c, _) = time_factor(t);
        let ey = y.exp();
        let (s, cx) = (PI * x).sin_cos();
        [-PI * (ey - E * y) * s * c, (ey - E) * cx * c]
    }
}

impl ProblemData for ManufacturedCase {
    fn forcing(&self, p: Point, t: f64) -> [f64; 2] {
        let (c, dc) = time_factor(t);
        let (x, y) = (p[0], p[1]);
        let ey = y.exp();
        let (s, cx) = (PI * x).sin_cos();
        let dt_u = [-(1.0 / PI) * ey * s * dc, (ey - E) * cx * dc];
        let lap = Self::laplacian_u(p);
        let grad_pi = [-2.0 * PI * ey * s * c, 2.0 * ey * cx * c];
        let (rho, mu) = (self.params.rho, self.params.mu);
        [
            dt_u[0] - (mu * lap[0] * c - grad_pi[0]) / rho,
            dt_u[1] - (mu * lap[1] * c - grad_pi[1]) / rho,
        ]
    }

    fn source(&self, p: Point, t: f64) -> f64 {
        let (c, dc) = time_factor(t);
        let (pxx, pxy, pyy) = Self::hessian_p(p);
        let k = &self.params.kappa;
        let div_flux = (k[0][0] * pxx + (k[0][1] + k[1][0]) * pxy + k[1][1] * pyy) * c;
        let profile = (p[1].exp() - E * p[1]) * (PI * p[0]).cos();
        self.params.c0 * profile * dc - div_flux
    }

    fn velocity_boundary(&self, p: Point, t: f64) -> [f64; 2] {
        self.velocity(p, t)
    }

    fn darcy_boundary(&self, p: Point, t: f64) -> f64 {
        self.darcy_pressure(p, t)
    }

    /// `σn = (2μD(u) − πI)n`.
    fn traction(&self, p: Point, t: f64, n: [f64; 2]) -> [f64; 2] {
        let g = self.velocity_gradient(p, t);
        let mu = self.params.mu;
        let pi = self.fluid_pressure(p, t);
        let off = mu * (g[0][1] + g[1][0]);
        let s = [[2.0 * mu * g[0][0] - pi, off], [off, 2.0 * mu * g[1][1] - pi]];
        [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
    }

    fn darcy_flux(&self, p: Point, t: f64, n: [f64; 2]) -> f64 {
        let g = self.darcy_gradient(p, t);
        let k = &self.params.kappa;
        (k[0][0] * g[0] + k[0][1] * g[1]) * n[0] + (k[1][0] * g[0] + k[1][1] * g[1]) * n[1]
    }

    fn initial_velocity(&self, p: Point) -> [f64; 2] {
        self.velocity(p, 0.0)
    }

    fn initial_darcy_pressure(&self, p: Point) -> f64 {
        self.darcy_pressure(p, 0.0)
    }

    fn initial_fluid_pressure(&self, p: Point) -> Option<f64> {
        Some(self.fluid_pressure(p, 0.0))
    }

    fn boundary(&self) -> BoundarySetup {
        Self::boundary_setup()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn forcing_matches_closed_form_for_unit_parameters() {
        let case = ManufacturedCase::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = [rng.gen::<f64>(), 2.0 * rng.gen::<f64>()];
            let t: f64 = rng.gen();
            let (s2, c2) = (2.0 * PI * t).sin_cos();
            let (x, y) = (p[0], p[1]);
            let ey = y.exp();
            let f1 = (PI * (2.0 * s2 - 3.0 * PI * c2) + c2) * ey * (PI * x).sin() / PI;
            let f2 = (-2.0 * PI * (ey - E) * s2 + PI * PI * (ey - E) * c2 + ey * c2) * (PI * x).cos();
            let g = (2.0 * PI * (E * y - ey) * s2 - PI * PI * (E * y - ey) * c2 - ey * c2) * (PI * x).cos();
            let f = case.forcing(p, t);
            assert!((f[0] - f1).abs() < 1e-12 * (1.0 + f1.abs()));
            assert!((f[1] - f2).abs() < 1e-12 * (1.0 + f2.abs()));
            assert!((case.source(p, t) - g).abs() < 1e-12 * (1.0 + g.abs()));
            assert!(case.divergence(p, t).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let case = ManufacturedCase::default();
        let (p, t, h) = ([0.3, 1.4], 0.2, 1e-6);
        let g = case.velocity_gradient(p, t);
        let gp = case.darcy_gradient(p, t);
        for d in 0..2 {
            let mut a = p;
            let mut b = p;
            a[d] += h;
            b[d] -= h;
            let (ua, ub) = (case.velocity(a, t), case.velocity(b, t));
            for c in 0..2 {
                assert!(((ua[c] - ub[c]) / (2.0 * h) - g[c][d]).abs() < 1e-7);
            }
            let dp = (case.darcy_pressure(a, t) - case.darcy_pressure(b, t)) / (2.0 * h);
            assert!((dp - gp[d]).abs() < 1e-7);
        }
    }
}
