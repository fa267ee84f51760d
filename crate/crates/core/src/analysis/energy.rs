//! Terms of the discrete energy identity, evaluated by quadrature directly from the fields
//! (independently of the assembled matrices).

use crate::error::Result;
use crate::fem::basis::eval_barycentric;
use crate::fem::CellGeometry;
use crate::forms::{edge_quadrature, ProblemData};
use crate::model::{CoupledModel, Formulation};
use crate::phasefield::DiffuseFrame;
use crate::sparse::dot;
use crate::stepper::SolutionState;

use super::{integrate, point_values};

/// One implicit substep `x⁰ → x¹` of length τ with data at time `t`:
/// `(kinetic + storage)/τ + viscous + bjs + darcy = volume_work + boundary_work`
/// for homogeneous Dirichlet data.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    /// `(ρ/2)(‖u¹‖² − ‖u⁰‖² + ‖u¹ − u⁰‖²)_Φ`
    pub kinetic: f64,
    /// `(c₀/2)(‖p¹‖² − ‖p⁰‖² + ‖p¹ − p⁰‖²)_Ψ`
    pub storage: f64,
    /// `2μ‖D(u¹)‖²_Φ`
    pub viscous: f64,
    /// `α‖u¹·τ̃‖²_{|∇Φ|}` (or over Γ for the sharp formulation)
    pub bjs: f64,
    /// `‖κ^½∇p¹‖²_Ψ`
    pub darcy: f64,
    /// `ρ(F, u¹)_Φ + (g, p¹)_Ψ`
    pub volume_work: f64,
    /// Neumann work `(σn, u¹)_{Φ,∂Ω} + (κ∇p·n, p¹)_{Ψ,∂Ω}`
    pub boundary_work: f64,
    pub tau: f64,
}

impl EnergyTerms {
    pub fn lhs(&self) -> f64 {
        (self.kinetic + self.storage) / self.tau + self.viscous + self.bjs + self.darcy
    }

    pub fn rhs(&self) -> f64 {
        self.volume_work + self.boundary_work
    }

    /// `|lhs − rhs|` relative to the largest of the seven terms.
    pub fn relative_residual(&self) -> f64 {
        let scale = [
            self.kinetic / self.tau,
            self.storage / self.tau,
            self.viscous,
            self.bjs,
            self.darcy,
            self.volume_work,
            self.boundary_work,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs() - self.rhs()).abs() / scale
        }
    }
}

/// `½(ρ‖u‖²_Φ + c₀‖p‖²_Ψ)` by quadrature.
pub fn energy(model: &CoupledModel, state: &SolutionState) -> Result<f64> {
    let degree = model.options.quadrature_degree;
    let (rho, c0) = (model.params.rho, model.params.c0);
    let mut e = 0.0;
    let n = model.mesh().n_triangles();
    integrate(model, 0..n, degree, |cell, l, x, w| {
        let v = point_values(model, state, cell, l);
        let (phi, psi) = weights(model, cell, x);
        e += 0.5 * w * (rho * phi * (v.u[0] * v.u[0] + v.u[1] * v.u[1]) + c0 * psi * v.p * v.p);
    })?;
    Ok(e)
}

/// Φ and Ψ exactly as the model's forms see them.
fn weights(model: &CoupledModel, cell: usize, x: [f64; 2]) -> (f64, f64) {
    match model.formulation {
        Formulation::Diffuse => (model.weight_u().eval(x).phi, model.weight_p().eval(x).psi()),
        Formulation::Sharp { .. } => {
            let f = model.phi_at(cell, x);
            (f, 1.0 - f)
        }
    }
}

pub fn energy_terms(
    model: &CoupledModel,
    s0: &SolutionState,
    s1: &SolutionState,
    tau: f64,
    data: &dyn ProblemData,
    t: f64,
) -> Result<EnergyTerms> {
    let degree = model.options.quadrature_degree;
    let p = &model.params;
    let k = p.kappa;
    let mut e = EnergyTerms {
        tau,
        ..Default::default()
    };
    let n = model.mesh().n_triangles();
    let diffuse = matches!(model.formulation, Formulation::Diffuse);
    integrate(model, 0..n, degree, |cell, l, x, w| {
        let a = point_values(model, s0, cell, l);
        let b = point_values(model, s1, cell, l);
        let (phi, psi) = weights(model, cell, x);
        let sq = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
        let du = [b.u[0] - a.u[0], b.u[1] - a.u[1]];
        e.kinetic += 0.5 * p.rho * phi * w * (sq(b.u) - sq(a.u) + sq(du));
        let dp = b.p - a.p;
        e.storage += 0.5 * p.c0 * psi * w * (b.p * b.p - a.p * a.p + dp * dp);
        let g = b.grad_u;
        let off = 0.5 * (g[0][1] + g[1][0]);
        e.viscous += 2.0 * p.mu * phi * w * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off);
        let gp = b.grad_p;
        let kg = [k[0][0] * gp[0] + k[0][1] * gp[1], k[1][0] * gp[0] + k[1][1] * gp[1]];
        e.darcy += psi * w * (kg[0] * gp[0] + kg[1] * gp[1]);
        let f = data.forcing(x, t);
        e.volume_work += w * (p.rho * phi * (f[0] * b.u[0] + f[1] * b.u[1]) + psi * data.source(x, t) * b.p);
        if diffuse {
            let wu = model.weight_u();
            let value = wu.eval(x);
            let frame = DiffuseFrame::from_gradient(wu.interface_vector(x, &value), wu.g_min());
            if frame.valid {
                let ut = b.u[0] * frame.tangent[0] + b.u[1] * frame.tangent[1];
                e.bjs += p.alpha_bjs * frame.norm * w * ut * ut;
            }
        }
    })?;
    if let Formulation::Sharp { interface, .. } = &model.formulation {
        let space = &model.disc.velocity;
        for ie in interface {
            let geo = CellGeometry::new(model.mesh().triangle_points(ie.fluid_cell));
            let (bary, w, n) = edge_quadrature(&geo, ie.fluid_local, degree);
            let tau_v = [-n[1], n[0]];
            let dofs = space.cell_dofs(ie.fluid_cell);
            for (l, w) in bary.iter().zip(&w) {
                let (vals, _) = eval_barycentric(space.kind(), *l);
                let mut ut = 0.0;
                for (i, &d) in dofs.iter().enumerate() {
                    ut += vals[i] * (s1.u[2 * d] * tau_v[0] + s1.u[2 * d + 1] * tau_v[1]);
                }
                e.bjs += p.alpha_bjs * w * ut * ut;
            }
        }
    }
    let (bu, bp) = model.boundary_loads(data, t)?;
    e.boundary_work = dot(&bu, &s1.u) + dot(&bp, &s1.p);
    Ok(e)
}
