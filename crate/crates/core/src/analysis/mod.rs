//! Manufactured solutions, total and weighted error norms, energy evaluation, and sweeps.

pub mod energy;
pub mod manufactured;
pub mod random;
pub mod study;
pub mod sweep;

pub use energy::{energy_terms, EnergyTerms};
pub use manufactured::ManufacturedCase;
pub use random::RandomData;
pub use study::ManufacturedStudy;
pub use sweep::{
    convergence_rates, run_sweep, ConvergenceReport, DeltaSchedule, ReportRow, SweepFailure,
    SweepKind, SweepLevel,
};

use crate::error::{Error, Result};
use crate::fem::{make_quadrature, CellGeometry};
use crate::forms::Tensor2;
use crate::mesh::Point;
use crate::model::CoupledModel;
use crate::stepper::SolutionState;

/// Closed-form solution of a coupled problem.
pub trait ExactSolution: Sync {
    fn velocity(&self, p: Point, t: f64) -> [f64; 2];
    /// `∇u` as `[[∂x u1, ∂y u1], [∂x u2, ∂y u2]]`.
    fn velocity_gradient(&self, p: Point, t: f64) -> [[f64; 2]; 2];
    fn fluid_pressure(&self, p: Point, t: f64) -> f64;
    fn darcy_pressure(&self, p: Point, t: f64) -> f64;
    fn darcy_gradient(&self, p: Point, t: f64) -> [f64; 2];
}

fn kappa_times(k: &Tensor2, g: [f64; 2]) -> [f64; 2] {
    [k[0][0] * g[0] + k[0][1] * g[1], k[1][0] * g[0] + k[1][1] * g[1]]
}

/// Discrete fields of a state at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointValues {
    pub phi: f64,
    pub u: [f64; 2],
    pub grad_u: [[f64; 2]; 2],
    /// π, or θ for the unweighted divergence.
    pub pi: f64,
    pub p: f64,
    pub grad_p: [f64; 2],
}

/// Evaluates the discrete unknowns of `state` at barycentric point `l` of `cell`. Unknowns
/// whose space is inactive on `cell` (sharp formulation) evaluate to zero.
pub fn point_values(model: &CoupledModel, state: &SolutionState, cell: usize, l: [f64; 3]) -> PointValues {
    let d = &model.disc;
    let x = CellGeometry::new(model.mesh().triangle_points(cell)).map(l);
    let mut v = PointValues {
        phi: model.phi_at(cell, x),
        ..Default::default()
    };
    if d.velocity.is_active(cell) {
        for c in 0..2 {
            let (val, g) = d.velocity.evaluate(&state.u, cell, l, c);
            v.u[c] = val;
            v.grad_u[c] = g;
        }
    }
    if d.fluid_pressure.is_active(cell) {
        v.pi = d.fluid_pressure.evaluate(&state.pi, cell, l, 0).0;
    }
    if d.darcy.is_active(cell) {
        let (val, g) = d.darcy.evaluate(&state.p, cell, l, 0);
        v.p = val;
        v.grad_p = g;
    }
    v
}

/// `(u_tot, p_tot) = (uΦ + qΨ, πΦ + pΨ)` with the Darcy velocity `q = −κ∇p`; for the
/// unweighted divergence the multiplier is θ = πΦ and `p_tot = θ + pΨ`.
pub fn total_fields(model: &CoupledModel, v: &PointValues) -> ([f64; 2], f64) {
    let psi = 1.0 - v.phi;
    let q = kappa_times(&model.params.kappa, v.grad_p);
    let u = [v.u[0] * v.phi - q[0] * psi, v.u[1] * v.phi - q[1] * psi];
    let p_fluid = if model.options.weighted_divergence {
        v.pi * v.phi
    } else {
        v.pi
    };
    (u, p_fluid + v.p * psi)
}

/// Exact total fields blended with the model's phase indicator at `x` in `cell`.
pub fn exact_total_fields(
    model: &CoupledModel,
    exact: &dyn ExactSolution,
    cell: usize,
    x: Point,
    t: f64,
) -> ([f64; 2], f64) {
    let phi = model.phi_at(cell, x);
    let psi = 1.0 - phi;
    let u = exact.velocity(x, t);
    let q = kappa_times(&model.params.kappa, exact.darcy_gradient(x, t));
    (
        [u[0] * phi - q[0] * psi, u[1] * phi - q[1] * psi],
        exact.fluid_pressure(x, t) * phi + exact.darcy_pressure(x, t) * psi,
    )
}

/// Quadrature degree used by the norm routines.
pub const NORM_QUADRATURE_DEGREE: usize = 8;

/// Sums `f(cell, barycentric point, physical point, weight)` over `cells` at the given
/// quadrature degree.
pub fn integrate(
    model: &CoupledModel,
    cells: impl Iterator<Item = usize>,
    degree: usize,
    mut f: impl FnMut(usize, [f64; 3], Point, f64),
) -> Result<()> {
    let rule = make_quadrature(degree)?;
    let mesh = model.mesh();
    for t in cells {
        let geo = CellGeometry::new(mesh.triangle_points(t));
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            f(t, *l, geo.map(*l), w * geo.area);
        }
    }
    Ok(())
}

/// Relative L² errors of the total velocity and pressure at time `t`.
pub fn relative_errors(
    model: &CoupledModel,
    state: &SolutionState,
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<(f64, f64)> {
    let degree = model.options.quadrature_degree.max(NORM_QUADRATURE_DEGREE);
    let (mut du, mut nu, mut dp, mut np) = (0.0, 0.0, 0.0, 0.0);
    let n = model.mesh().n_triangles();
    integrate(model, 0..n, degree, |cell, l, x, w| {
        let (u, p) = total_fields(model, &point_values(model, state, cell, l));
        let (ue, pe) = exact_total_fields(model, exact, cell, x, t);
        du += w * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
        nu += w * (ue[0].powi(2) + ue[1].powi(2));
        dp += w * (p - pe).powi(2);
        np += w * pe.powi(2);
    })?;
    if nu == 0.0 || np == 0.0 {
        return Err(Error::Parameter(format!(
            "exact total fields vanish at t = {t}; relative errors are undefined"
        )));
    }
    Ok(((du / nu).sqrt(), (dp / np).sqrt()))
}

/// Weighted norms of the difference between discrete and exact solutions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightedNorms {
    /// `‖u_h − u‖_{L²(Φ)}`
    pub velocity_l2: f64,
    /// `‖D(u_h − u)‖_{L²(Φ)}`
    pub velocity_strain: f64,
    /// `‖p_h − p‖_{L²(Ψ)}`
    pub darcy_l2: f64,
    /// `‖∇(p_h − p)‖_{L²(Ψ)}`
    pub darcy_gradient: f64,
}

pub fn weighted_norms(
    model: &CoupledModel,
    state: &SolutionState,
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<WeightedNorms> {
    let degree = model.options.quadrature_degree.max(NORM_QUADRATURE_DEGREE);
    let mut s = [0.0; 4];
    let n = model.mesh().n_triangles();
    integrate(model, 0..n, degree, |cell, l, x, w| {
        let v = point_values(model, state, cell, l);
        let (phi, psi) = (v.phi, 1.0 - v.phi);
        let ue = exact.velocity(x, t);
        let ge = exact.velocity_gradient(x, t);
        let e = [v.u[0] - ue[0], v.u[1] - ue[1]];
        let g = [
            [v.grad_u[0][0] - ge[0][0], v.grad_u[0][1] - ge[0][1]],
            [v.grad_u[1][0] - ge[1][0], v.grad_u[1][1] - ge[1][1]],
        ];
        let off = 0.5 * (g[0][1] + g[1][0]);
        let strain = g[0][0].powi(2) + g[1][1].powi(2) + 2.0 * off * off;
        let ep = v.p - exact.darcy_pressure(x, t);
        let gp = exact.darcy_gradient(x, t);
        let eg = [v.grad_p[0] - gp[0], v.grad_p[1] - gp[1]];
        s[0] += w * phi * (e[0] * e[0] + e[1] * e[1]);
        s[1] += w * phi * strain;
        s[2] += w * psi * ep * ep;
        s[3] += w * psi * (eg[0] * eg[0] + eg[1] * eg[1]);
    })?;
    Ok(WeightedNorms {
        velocity_l2: s[0].sqrt(),
        velocity_strain: s[1].sqrt(),
        darcy_l2: s[2].sqrt(),
        darcy_gradient: s[3].sqrt(),
    })
}

/// Relative L² differences `(velocity, pressure)` of two states on the same mesh over
/// `cells`; `a` is the reference. With `total = false` the Stokes unknowns (u, π) are
/// compared, otherwise the total fields.
pub fn relative_differences(
    a: (&CoupledModel, &SolutionState),
    b: (&CoupledModel, &SolutionState),
    cells: &[usize],
    total: bool,
) -> Result<(f64, f64)> {
    let (ma, mb) = (a.0.mesh(), b.0.mesh());
    if !std::sync::Arc::ptr_eq(ma, mb)
        && (ma.vertices() != mb.vertices() || ma.triangles() != mb.triangles())
    {
        return Err(Error::Parameter("states live on different meshes".into()));
    }
    let degree = a.0.options.quadrature_degree.max(NORM_QUADRATURE_DEGREE);
    let mut s = [0.0; 4];
    integrate(a.0, cells.iter().copied(), degree, |cell, l, _, w| {
        let va = point_values(a.0, a.1, cell, l);
        let vb = point_values(b.0, b.1, cell, l);
        let ((ua, pa), (ub, pb)) = if total {
            (total_fields(a.0, &va), total_fields(b.0, &vb))
        } else {
            ((va.u, va.pi), (vb.u, vb.pi))
        };
        s[0] += w * ((ua[0] - ub[0]).powi(2) + (ua[1] - ub[1]).powi(2));
        s[1] += w * (ua[0].powi(2) + ua[1].powi(2));
        s[2] += w * (pa - pb).powi(2);
        s[3] += w * pa * pa;
    })?;
    if s[1] == 0.0 || s[3] == 0.0 {
        return Err(Error::Parameter("reference fields vanish".into()));
    }
    Ok(((s[0] / s[1]).sqrt(), (s[2] / s[3]).sqrt()))
}
