//! Bilinear and linear forms of the phase-field weighted Stokes–Darcy system.
//!
//! Unknowns are ordered `[u | π | p]`: vector velocity, fluid-pressure multiplier, Darcy
//! pressure. With the velocity mass `M_u = ρ∫u·vΦ` and Darcy mass `M_p = c₀∫pψΨ`, one
//! implicit step of length τ reads
//!
//! ```text
//! [ M_u/τ + A + J   Bᵀ   C_up      ] [u]   [f_u + M_u u⁰/τ]
//! [ −B              0    0         ] [π] = [0             ]
//! [ C_pu            0    M_p/τ + K ] [p]   [f_p + M_p p⁰/τ]
//! ```
//!
//! with `A = 2μ∫D(u):D(v)Φ`, `J = α∫(u·τ̃)(v·τ̃)|∇Φ|`, `B[q,v] = −∫q∇·v Φ`,
//! `C_up[v,p] = −∫p v·∇Φ`, `C_pu = −C_upᵀ`, `K = ∫κ∇p·∇ψ Ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_cells, assemble_scalar_mass, cell_quadrature, line_rule, make_quadrature,
    FunctionSpace, Tabulation,
};
use crate::mesh::{BoundaryTag, Point};
use crate::phasefield::{DiffuseFrame, PhaseField, PhaseValue, PhaseWeight, Profile};
use crate::sparse::{Coo, CsrMatrix};

pub type Tensor2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub rho: f64,
    pub mu: f64,
    pub c0: f64,
    pub kappa: Tensor2,
    pub alpha_bjs: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            mu: 1.0,
            c0: 1.0,
            kappa: [[1.0, 0.0], [0.0, 1.0]],
            alpha_bjs: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("mu", self.mu), ("c0", self.c0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.alpha_bjs >= 0.0 && self.alpha_bjs.is_finite()) {
            return Err(Error::config(
                "alpha_bjs",
                format!("must be nonnegative, got {}", self.alpha_bjs),
            ));
        }
        check_spd(&self.kappa)
    }

    pub fn kappa_eigenvalues(&self) -> (f64, f64) {
        eigenvalues(&self.kappa)
    }
}

fn eigenvalues(k: &Tensor2) -> (f64, f64) {
    let mean = 0.5 * (k[0][0] + k[1][1]);
    let diff = 0.5 * (k[0][0] - k[1][1]);
    let r = diff.hypot(k[0][1]);
    (mean - r, mean + r)
}

pub fn check_spd(k: &Tensor2) -> Result<()> {
    let scale = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let finite = k.iter().flatten().all(|v| v.is_finite());
    if !finite || scale == 0.0 || (k[0][1] - k[1][0]).abs() > 1e-14 * scale {
        return Err(Error::NotSpd(*k));
    }
    let (lo, _) = eigenvalues(k);
    if lo <= 0.0 {
        return Err(Error::NotSpd(*k));
    }
    Ok(())
}

/// How the interface coupling and slip terms obtain their interface vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfaceForm {
    /// ∇Φ^{ε,δ} (the computational form).
    #[default]
    PhaseGradient,
    /// (1/2ε)∇ls on the layer {|ls| < ε}; only meaningful for the clamp profile.
    LevelSet,
}

/// Phase weight whose interface vector is `(1/2ε)∇ls` on `{|ls| < ε}` instead of ∇Φ.
/// Volume weights are those of the wrapped phase field.
#[derive(Clone, Debug)]
pub struct LevelSetInterface(PhaseField);

impl LevelSetInterface {
    pub fn new(pf: PhaseField) -> Result<Self> {
        if pf.profile != Profile::Clamp {
            return Err(Error::config(
                "interface_form",
                format!("the level-set interface form requires the clamp profile, not {}", pf.profile),
            ));
        }
        Ok(Self(pf))
    }
}

/// A phase weight together with the interface vector used by coupling and slip terms.
pub trait InterfaceWeight: PhaseWeight {
    fn interface_vector(&self, p: Point, value: &PhaseValue) -> [f64; 2] {
        let _ = p;
        value.grad
    }
}

impl InterfaceWeight for PhaseField {}
impl InterfaceWeight for crate::phasefield::UniformPhase {}

impl PhaseWeight for LevelSetInterface {
    fn eval(&self, p: Point) -> PhaseValue {
        self.0.eval(p)
    }

    fn g_min(&self) -> f64 {
        self.0.g_min
    }
}

impl InterfaceWeight for LevelSetInterface {
    fn interface_vector(&self, p: Point, _: &PhaseValue) -> [f64; 2] {
        let (ls, g) = self.0.levelset.eval_with_gradient(p);
        if ls.abs() < self.0.epsilon {
            let s = 0.5 / self.0.epsilon;
            [s * g[0], s * g[1]]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Physical gradients of every local basis function at quadrature point `q`.
fn gradients(geo: &crate::fem::CellGeometry, tab: &Tabulation, q: usize, out: &mut Vec<[f64; 2]>) {
    out.clear();
    out.extend(tab.dlam[q].iter().map(|d| geo.gradient(d)));
}

fn check_same_mesh(a: &FunctionSpace, b: &FunctionSpace) -> Result<()> {
    if !std::sync::Arc::ptr_eq(a.mesh(), b.mesh()) {
        return Err(Error::Parameter("spaces live on different meshes".into()));
    }
    Ok(())
}

fn require_components(space: &FunctionSpace, n: usize, what: &str) -> Result<()> {
    if space.components() != n {
        return Err(Error::Parameter(format!(
            "{what} space must have {n} component(s), has {}",
            space.components()
        )));
    }
    Ok(())
}

/// `ρ∫u·v Φ`.
pub fn assemble_velocity_mass(
    space_u: &FunctionSpace,
    pf: &dyn PhaseWeight,
    rho: f64,
    degree: usize,
) -> Result<CsrMatrix> {
    require_components(space_u, 2, "velocity")?;
    assemble_scalar_mass(space_u, |p| rho * pf.eval(p).phi, degree)
}

/// `2μ∫D(u):D(v) Φ`.
pub fn assemble_stokes_viscous(
    space_u: &FunctionSpace,
    pf: &dyn PhaseWeight,
    mu: f64,
    degree: usize,
) -> Result<CsrMatrix> {
    require_components(space_u, 2, "velocity")?;
    let rule = make_quadrature(degree)?;
    let tab = Tabulation::new(space_u.kind(), &rule.points);
    let cells: Vec<usize> = space_u.active_cells().collect();
    let n = space_u.dof_count();
    assemble_cells(&cells, n, n, |t, out| {
        let geo = space_u.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space_u.cell_dofs(t);
        let nl = dofs.len();
        let mut local = vec![0.0; 4 * nl * nl];
        let mut g = Vec::with_capacity(nl);
        for q in 0..rule.len() {
            let w = mu * pf.eval(xq[q]).phi * wq[q];
            if w == 0.0 {
                continue;
            }
            gradients(&geo, &tab, q, &mut g);
            // (φ_i e_a, φ_j e_b) ↦ μ[δ_ab ∇φ_i·∇φ_j + ∂_b φ_i ∂_a φ_j]
            for i in 0..nl {
                for j in 0..nl {
                    let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut v = g[i][b] * g[j][a];
                            if a == b {
                                v += dot;
                            }
                            local[((2 * i + a) * nl + j) * 2 + b] += w * v;
                        }
                    }
                }
            }
        }
        for i in 0..nl {
            for a in 0..2 {
                for j in 0..nl {
                    for b in 0..2 {
                        out.push((2 * dofs[i] + a, 2 * dofs[j] + b, local[((2 * i + a) * nl + j) * 2 + b]));
                    }
                }
            }
        }
        Ok(())
    })
}

/// `(∫κ∇p·∇ψ Ψ, c₀∫pψ Ψ)`.
pub fn assemble_darcy(
    space_p: &FunctionSpace,
    pf: &dyn PhaseWeight,
    kappa: &Tensor2,
    c0: f64,
    degree: usize,
) -> Result<(CsrMatrix, CsrMatrix)> {
    require_components(space_p, 1, "Darcy pressure")?;
    check_spd(kappa)?;
    let rule = make_quadrature(degree)?;
    let tab = Tabulation::new(space_p.kind(), &rule.points);
    let cells: Vec<usize> = space_p.active_cells().collect();
    let n = space_p.dof_count();
    let stiffness = assemble_cells(&cells, n, n, |t, out| {
        let geo = space_p.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space_p.cell_dofs(t);
        let nl = dofs.len();
        let mut local = vec![0.0; nl * nl];
        let mut g = Vec::with_capacity(nl);
        for q in 0..rule.len() {
            let w = pf.eval(xq[q]).psi() * wq[q];
            if w == 0.0 {
                continue;
            }
            gradients(&geo, &tab, q, &mut g);
            for i in 0..nl {
                for j in 0..nl {
                    let kg = [
                        kappa[0][0] * g[j][0] + kappa[0][1] * g[j][1],
                        kappa[1][0] * g[j][0] + kappa[1][1] * g[j][1],
                    ];
                    local[i * nl + j] += w * (kg[0] * g[i][0] + kg[1] * g[i][1]);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                out.push((dofs[i], dofs[j], local[i * nl + j]));
            }
        }
        Ok(())
    })?;
    let mass = assemble_scalar_mass(space_p, |p| c0 * pf.eval(p).psi(), degree)?;
    Ok((stiffness, mass))
}

/// `(C_pu, C_up)` with `C_pu[ψ,u] = ∫ψ u·∇Φ` and `C_up[v,p] = −∫p v·∇Φ`, filled from the
/// same quadrature values so that `C_pu = −C_upᵀ` holds exactly.
pub fn assemble_interface_coupling(
    space_u: &FunctionSpace,
    space_p: &FunctionSpace,
    pf: &dyn InterfaceWeight,
    degree: usize,
) -> Result<(CsrMatrix, CsrMatrix)> {
    require_components(space_u, 2, "velocity")?;
    require_components(space_p, 1, "Darcy pressure")?;
    check_same_mesh(space_u, space_p)?;
    let rule = make_quadrature(degree)?;
    let tab_u = Tabulation::new(space_u.kind(), &rule.points);
    let tab_p = Tabulation::new(space_p.kind(), &rule.points);
    let cells: Vec<usize> = space_u
        .active_cells()
        .filter(|&t| space_p.is_active(t))
        .collect();
    let (nu, np) = (space_u.dof_count(), space_p.dof_count());
    let c_pu = assemble_cells(&cells, np, nu, |t, out| {
        let geo = space_u.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let du = space_u.cell_dofs(t);
        let dp = space_p.cell_dofs(t);
        let (nlu, nlp) = (du.len(), dp.len());
        let mut local = vec![0.0; nlp * nlu * 2];
        let mut any = false;
        for q in 0..rule.len() {
            let value = pf.eval(xq[q]);
            let g = pf.interface_vector(xq[q], &value);
            if g == [0.0, 0.0] {
                continue;
            }
            any = true;
            for i in 0..nlp {
                let psi = tab_p.values[q][i] * wq[q];
                for j in 0..nlu {
                    let phi = tab_u.values[q][j];
                    local[(i * nlu + j) * 2] += psi * phi * g[0];
                    local[(i * nlu + j) * 2 + 1] += psi * phi * g[1];
                }
            }
        }
        if any {
            for i in 0..nlp {
                for j in 0..nlu {
                    for c in 0..2 {
                        out.push((dp[i], 2 * du[j] + c, local[(i * nlu + j) * 2 + c]));
                    }
                }
            }
        }
        Ok(())
    })?;
    let c_up = c_pu.transpose().scaled(-1.0);
    Ok((c_pu, c_up))
}

/// `α∫(u·τ̃)(v·τ̃)|∇Φ|`; points with an invalid frame contribute nothing.
pub fn assemble_bjs(
    space_u: &FunctionSpace,
    pf: &dyn InterfaceWeight,
    alpha_bjs: f64,
    degree: usize,
) -> Result<CsrMatrix> {
    require_components(space_u, 2, "velocity")?;
    let rule = make_quadrature(degree)?;
    let tab = Tabulation::new(space_u.kind(), &rule.points);
    let cells: Vec<usize> = space_u.active_cells().collect();
    let n = space_u.dof_count();
    if alpha_bjs == 0.0 {
        return Ok(CsrMatrix::zeros(n, n));
    }
    assemble_cells(&cells, n, n, |t, out| {
        let geo = space_u.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space_u.cell_dofs(t);
        let nl = dofs.len();
        let mut local = vec![0.0; 4 * nl * nl];
        let mut any = false;
        for q in 0..rule.len() {
            let value = pf.eval(xq[q]);
            let frame = DiffuseFrame::from_gradient(pf.interface_vector(xq[q], &value), pf.g_min());
            if !frame.valid {
                continue;
            }
            any = true;
            let w = alpha_bjs * frame.norm * wq[q];
            let tau = frame.tangent;
            for i in 0..nl {
                for j in 0..nl {
                    let s = w * tab.values[q][i] * tab.values[q][j];
                    for a in 0..2 {
                        for b in 0..2 {
                            local[((2 * i + a) * nl + j) * 2 + b] += s * tau[a] * tau[b];
                        }
                    }
                }
            }
        }
        if any {
            for i in 0..nl {
                for a in 0..2 {
                    for j in 0..nl {
                        for b in 0..2 {
                            out.push((2 * dofs[i] + a, 2 * dofs[j] + b, local[((2 * i + a) * nl + j) * 2 + b]));
                        }
                    }
                }
            }
        }
        Ok(())
    })
}

/// `B[q,v] = −∫q ∇·v Φ` (weighted) or `−∫q ∇·v` (unweighted); rows are multiplier dofs.
pub fn assemble_divergence(
    space_u: &FunctionSpace,
    space_q: &FunctionSpace,
    pf: &dyn PhaseWeight,
    weighted: bool,
    degree: usize,
) -> Result<CsrMatrix> {
    require_components(space_u, 2, "velocity")?;
    require_components(space_q, 1, "pressure")?;
    check_same_mesh(space_u, space_q)?;
    let rule = make_quadrature(degree)?;
    let tab_u = Tabulation::new(space_u.kind(), &rule.points);
    let tab_q = Tabulation::new(space_q.kind(), &rule.points);
    let cells: Vec<usize> = space_u
        .active_cells()
        .filter(|&t| space_q.is_active(t))
        .collect();
    assemble_cells(&cells, space_q.dof_count(), space_u.dof_count(), |t, out| {
        let geo = space_u.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let du = space_u.cell_dofs(t);
        let dq = space_q.cell_dofs(t);
        let (nlu, nlq) = (du.len(), dq.len());
        let mut local = vec![0.0; nlq * nlu * 2];
        let mut g = Vec::with_capacity(nlu);
        for q in 0..rule.len() {
            let phi = if weighted { pf.eval(xq[q]).phi } else { 1.0 };
            let w = -phi * wq[q];
            gradients(&geo, &tab_u, q, &mut g);
            for i in 0..nlq {
                let s = w * tab_q.values[q][i];
                for j in 0..nlu {
                    local[(i * nlu + j) * 2] += s * g[j][0];
                    local[(i * nlu + j) * 2 + 1] += s * g[j][1];
                }
            }
        }
        for i in 0..nlq {
            for j in 0..nlu {
                for c in 0..2 {
                    out.push((dq[i], 2 * du[j] + c, local[(i * nlu + j) * 2 + c]));
                }
            }
        }
        Ok(())
    })
}

/// Boundary-condition assignment by edge tag.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySetup {
    pub velocity_dirichlet: Vec<BoundaryTag>,
    pub darcy_dirichlet: Vec<BoundaryTag>,
    /// Traction `σn` prescribed, weighted by Φ.
    pub stokes_neumann: Vec<BoundaryTag>,
    /// Flux `κ∇p·n` prescribed, weighted by Ψ.
    pub darcy_neumann: Vec<BoundaryTag>,
}

/// Data of a time-dependent problem. Forcing is per unit mass: the load is `ρ∫F·vΦ`.
pub trait ProblemData: Sync + Send {
    fn forcing(&self, p: Point, t: f64) -> [f64; 2];
    fn source(&self, p: Point, t: f64) -> f64;
    /// Velocity values used on Dirichlet boundaries.
    fn velocity_boundary(&self, p: Point, t: f64) -> [f64; 2];
    /// Darcy pressure values used on Dirichlet boundaries.
    fn darcy_boundary(&self, p: Point, t: f64) -> f64;
    /// Traction `σn` on Stokes Neumann boundaries (`n` is the outward unit normal).
    fn traction(&self, p: Point, t: f64, n: [f64; 2]) -> [f64; 2];
    /// Flux `κ∇p·n` on Darcy Neumann boundaries.
    fn darcy_flux(&self, p: Point, t: f64, n: [f64; 2]) -> f64;
    fn initial_velocity(&self, p: Point) -> [f64; 2];
    fn initial_darcy_pressure(&self, p: Point) -> f64;
    /// Initial fluid pressure when known; otherwise the multiplier starts at zero.
    fn initial_fluid_pressure(&self, _p: Point) -> Option<f64> {
        None
    }
    fn boundary(&self) -> BoundarySetup;
}

/// Zero data with the given boundary assignment.
#[derive(Clone, Debug, Default)]
pub struct ZeroData(pub BoundarySetup);

impl ProblemData for ZeroData {
    fn forcing(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn source(&self, _: Point, _: f64) -> f64 {
        0.0
    }
    fn velocity_boundary(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn darcy_boundary(&self, _: Point, _: f64) -> f64 {
        0.0
    }
    fn traction(&self, _: Point, _: f64, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn darcy_flux(&self, _: Point, _: f64, _: [f64; 2]) -> f64 {
        0.0
    }
    fn initial_velocity(&self, _: Point) -> [f64; 2] {
        [0.0; 2]
    }
    fn initial_darcy_pressure(&self, _: Point) -> f64 {
        0.0
    }
    fn boundary(&self) -> BoundarySetup {
        self.0.clone()
    }
}

/// Boundary edges of `space` carrying any of `tags`, with their triangle and local index.
fn tagged_boundary_edges<'a>(
    space: &'a FunctionSpace,
    tags: &'a [BoundaryTag],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let mesh = space.mesh();
    space.active_cells().flat_map(move |t| {
        mesh.triangle_edges(t)
            .into_iter()
            .enumerate()
            .filter(move |&(_, e)| {
                mesh.edge_tag(e).is_some_and(|tag| tags.contains(tag))
            })
            .map(move |(k, _)| (t, k))
    })
}

/// Load vectors `(f_u, f_p)`: `ρ∫F·vΦ + ∫_{Γ_N} σn·v Φ` and `∫gψΨ + ∫_{Γ_N} κ∇p·n ψΨ`.
/// `weight_u` supplies Φ for the velocity block and `weight_p` supplies Ψ = 1 − Φ for the
/// Darcy block (they coincide for the diffuse system).
#[allow(clippy::too_many_arguments)]
pub fn assemble_rhs(
    space_u: &FunctionSpace,
    space_p: &FunctionSpace,
    weight_u: &dyn PhaseWeight,
    weight_p: &dyn PhaseWeight,
    rho: f64,
    data: &dyn ProblemData,
    t: f64,
    degree: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut fu, mut fp) =
        assemble_volume_load(space_u, space_p, weight_u, weight_p, rho, data, t, degree)?;
    let (bu, bp) = assemble_boundary_load(space_u, space_p, weight_u, weight_p, data, t, degree)?;
    fu.iter_mut().zip(&bu).for_each(|(a, b)| *a += b);
    fp.iter_mut().zip(&bp).for_each(|(a, b)| *a += b);
    Ok((fu, fp))
}

/// Volume part of [`assemble_rhs`]: `ρ∫F·vΦ` and `∫gψΨ`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_volume_load(
    space_u: &FunctionSpace,
    space_p: &FunctionSpace,
    weight_u: &dyn PhaseWeight,
    weight_p: &dyn PhaseWeight,
    rho: f64,
    data: &dyn ProblemData,
    t: f64,
    degree: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_components(space_u, 2, "velocity")?;
    require_components(space_p, 1, "Darcy pressure")?;
    let rule = make_quadrature(degree)?;
    let tab_u = Tabulation::new(space_u.kind(), &rule.points);
    let tab_p = Tabulation::new(space_p.kind(), &rule.points);
    let mut fu = vec![0.0; space_u.dof_count()];
    let mut fp = vec![0.0; space_p.dof_count()];

    for cell in space_u.active_cells() {
        let geo = space_u.cell_geometry(cell);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space_u.cell_dofs(cell);
        for q in 0..rule.len() {
            let f = data.forcing(xq[q], t);
            let w = rho * weight_u.eval(xq[q]).phi * wq[q];
            for (i, &d) in dofs.iter().enumerate() {
                let s = w * tab_u.values[q][i];
                fu[2 * d] += s * f[0];
                fu[2 * d + 1] += s * f[1];
            }
        }
    }
    for cell in space_p.active_cells() {
        let geo = space_p.cell_geometry(cell);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space_p.cell_dofs(cell);
        for q in 0..rule.len() {
            let g = data.source(xq[q], t);
            let w = weight_p.eval(xq[q]).psi() * wq[q];
            for (i, &d) in dofs.iter().enumerate() {
                fp[d] += w * g * tab_p.values[q][i];
            }
        }
    }
    Ok((fu, fp))
}

/// Points, weights (including edge length), outward normals, and barycentric coordinates
/// of a Gauss rule on local edge `k` of a counter-clockwise triangle.
pub(crate) fn edge_quadrature(
    geo: &crate::fem::CellGeometry,
    k: usize,
    degree: usize,
) -> (Vec<[f64; 3]>, Vec<f64>, [f64; 2]) {
    let (a, b) = (geo.vertices[k], geo.vertices[(k + 1) % 3]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    // the interior lies to the left of a → b, so the outward normal is the edge rotated by −90°
    let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
    let line = line_rule(degree);
    let bary = line
        .points
        .iter()
        .map(|&s| {
            let mut l = [0.0; 3];
            l[k] = 1.0 - s;
            l[(k + 1) % 3] = s;
            l
        })
        .collect();
    let weights = line.weights.iter().map(|w| w * len).collect();
    (bary, weights, n)
}

/// Boundary part of [`assemble_rhs`]: weighted traction and flux integrals.
pub fn assemble_boundary_load(
    space_u: &FunctionSpace,
    space_p: &FunctionSpace,
    weight_u: &dyn PhaseWeight,
    weight_p: &dyn PhaseWeight,
    data: &dyn ProblemData,
    t: f64,
    degree: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut fu = vec![0.0; space_u.dof_count()];
    let mut fp = vec![0.0; space_p.dof_count()];
    let bc = data.boundary();
    for (cell, k) in tagged_boundary_edges(space_u, &bc.stokes_neumann) {
        let geo = space_u.cell_geometry(cell);
        let (bary, w, n) = edge_quadrature(&geo, k, degree);
        let dofs = space_u.cell_dofs(cell);
        for (l, w) in bary.iter().zip(&w) {
            let x = geo.map(*l);
            let tr = data.traction(x, t, n);
            let weight = weight_u.eval(x).phi * w;
            let (vals, _) = crate::fem::basis::eval_barycentric(space_u.kind(), *l);
            for (i, &d) in dofs.iter().enumerate() {
                fu[2 * d] += weight * vals[i] * tr[0];
                fu[2 * d + 1] += weight * vals[i] * tr[1];
            }
        }
    }
    for (cell, k) in tagged_boundary_edges(space_p, &bc.darcy_neumann) {
        let geo = space_p.cell_geometry(cell);
        let (bary, w, n) = edge_quadrature(&geo, k, degree);
        let dofs = space_p.cell_dofs(cell);
        for (l, w) in bary.iter().zip(&w) {
            let x = geo.map(*l);
            let flux = data.darcy_flux(x, t, n);
            let weight = weight_p.eval(x).psi() * w;
            let (vals, _) = crate::fem::basis::eval_barycentric(space_p.kind(), *l);
            for (i, &d) in dofs.iter().enumerate() {
                fp[d] += weight * vals[i] * flux;
            }
        }
    }
    Ok((fu, fp))
}

/// The three discrete spaces of the coupled problem, sharing one mesh.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub velocity: FunctionSpace,
    pub fluid_pressure: FunctionSpace,
    pub darcy: FunctionSpace,
}

impl Discretization {
    pub fn layout(&self) -> Layout {
        Layout {
            n_u: self.velocity.dof_count(),
            n_pi: self.fluid_pressure.dof_count(),
            n_p: self.darcy.dof_count(),
        }
    }
}

/// Block sizes of the `[u | π | p]` unknown vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_u: usize,
    pub n_pi: usize,
    pub n_p: usize,
}

impl Layout {
    pub fn total(&self) -> usize {
        self.n_u + self.n_pi + self.n_p
    }

    pub fn pi_offset(&self) -> usize {
        self.n_u
    }

    pub fn p_offset(&self) -> usize {
        self.n_u + self.n_pi
    }

    pub fn u<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n_u]
    }

    pub fn pi<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.n_u..self.n_u + self.n_pi]
    }

    pub fn p<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.n_u + self.n_pi..]
    }

    pub fn join(&self, u: &[f64], pi: &[f64], p: &[f64]) -> Vec<f64> {
        assert_eq!((u.len(), pi.len(), p.len()), (self.n_u, self.n_pi, self.n_p));
        [u, pi, p].concat()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub quadrature_degree: usize,
    /// Φ-weighted divergence (solve for π) or unweighted (solve for θ = πΦ).
    pub weighted_divergence: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            quadrature_degree: crate::fem::DEFAULT_QUADRATURE_DEGREE,
            weighted_divergence: true,
        }
    }
}

/// Time-independent operator blocks; see the module documentation for the block system.
#[derive(Clone, Debug)]
pub struct Operators {
    pub layout: Layout,
    pub velocity_mass: CsrMatrix,
    pub viscous: CsrMatrix,
    pub bjs: CsrMatrix,
    pub divergence: CsrMatrix,
    pub coupling_up: CsrMatrix,
    pub coupling_pu: CsrMatrix,
    pub darcy_stiffness: CsrMatrix,
    pub darcy_mass: CsrMatrix,
}

impl Operators {
    /// Diffuse-interface operators: every block weighted by the same phase field.
    pub fn assemble(
        disc: &Discretization,
        pf: &dyn InterfaceWeight,
        params: &PhysicalParams,
        options: &AssemblyOptions,
    ) -> Result<Self> {
        params.validate()?;
        let d = options.quadrature_degree;
        let velocity_mass = assemble_velocity_mass(&disc.velocity, pf, params.rho, d)?;
        let viscous = assemble_stokes_viscous(&disc.velocity, pf, params.mu, d)?;
        let bjs = assemble_bjs(&disc.velocity, pf, params.alpha_bjs, d)?;
        let divergence = assemble_divergence(
            &disc.velocity,
            &disc.fluid_pressure,
            pf,
            options.weighted_divergence,
            d,
        )?;
        let (coupling_pu, coupling_up) =
            assemble_interface_coupling(&disc.velocity, &disc.darcy, pf, d)?;
        let (darcy_stiffness, darcy_mass) =
            assemble_darcy(&disc.darcy, pf, &params.kappa, params.c0, d)?;
        Ok(Self {
            layout: disc.layout(),
            velocity_mass,
            viscous,
            bjs,
            divergence,
            coupling_up,
            coupling_pu,
            darcy_stiffness,
            darcy_mass,
        })
    }

    /// The full system matrix for an implicit step of length `tau`, before constraints.
    pub fn system_matrix(&self, tau: f64) -> CsrMatrix {
        let l = self.layout;
        let (o_pi, o_p) = (l.pi_offset(), l.p_offset());
        let mut coo = Coo::new(l.total(), l.total());
        coo.add_block(0, 0, &self.velocity_mass, 1.0 / tau);
        coo.add_block(0, 0, &self.viscous, 1.0);
        coo.add_block(0, 0, &self.bjs, 1.0);
        coo.add_block_transposed(0, o_pi, &self.divergence, 1.0);
        coo.add_block(0, o_p, &self.coupling_up, 1.0);
        coo.add_block(o_pi, 0, &self.divergence, -1.0);
        coo.add_block(o_p, 0, &self.coupling_pu, 1.0);
        coo.add_block(o_p, o_p, &self.darcy_mass, 1.0 / tau);
        coo.add_block(o_p, o_p, &self.darcy_stiffness, 1.0);
        coo.to_csr()
    }

    /// Right-hand side of an implicit step from `x_old` with loads `(fu, fp)`.
    pub fn step_rhs(&self, tau: f64, x_old: &[f64], fu: &[f64], fp: &[f64]) -> Vec<f64> {
        let l = self.layout;
        let mu = self.velocity_mass.matvec(l.u(x_old));
        let mp = self.darcy_mass.matvec(l.p(x_old));
        let mut b = vec![0.0; l.total()];
        for i in 0..l.n_u {
            b[i] = fu[i] + mu[i] / tau;
        }
        for i in 0..l.n_p {
            b[l.p_offset() + i] = fp[i] + mp[i] / tau;
        }
        b
    }
}

/// Assembled linear system with its Dirichlet constraints.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub layout: Layout,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Sorted constrained unknowns and their values.
    pub constraints: Vec<(usize, f64)>,
}

impl BlockSystem {
    /// Symmetric elimination: returns the free-free block, the lifted right-hand side, and
    /// the list of free unknowns.
    pub fn eliminate(&self) -> (CsrMatrix, Vec<f64>, Vec<usize>) {
        let n = self.layout.total();
        let mut fixed = vec![false; n];
        let mut xd = vec![0.0; n];
        for &(i, v) in &self.constraints {
            fixed[i] = true;
            xd[i] = v;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let lift = self.matrix.matvec(&xd);
        let rhs = free.iter().map(|&i| self.rhs[i] - lift[i]).collect();
        (self.matrix.select(&free, &free), rhs, free)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::ElementKind;
    use crate::levelset::LevelSet;
    use crate::mesh::{build_uniform, RectangleSpec, TriMesh};
    use crate::phasefield::UniformPhase;
    use std::sync::Arc;

    fn mesh(nx: usize, ny: usize) -> Arc<TriMesh> {
        Arc::new(build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), nx, ny)).unwrap())
    }

    fn vspace(m: &Arc<TriMesh>) -> FunctionSpace {
        FunctionSpace::new(m.clone(), ElementKind::P2, 2).unwrap()
    }

    fn sspace(m: &Arc<TriMesh>, kind: ElementKind) -> FunctionSpace {
        FunctionSpace::new(m.clone(), kind, 1).unwrap()
    }

    fn flat_field(eps: f64, delta: f64, profile: Profile) -> PhaseField {
        PhaseField::new(eps, delta, profile, LevelSet::Flat { y0: 1.0 }).unwrap()
    }

    #[test]
    fn rigid_rotation_is_in_viscous_kernel() {
        let m = mesh(3, 6);
        let v = vspace(&m);
        let a = assemble_stokes_viscous(&v, &UniformPhase(1.0), 1.0, 6).unwrap();
        let u = v.interpolate_vector(|p| [-p[1] + 0.3, p[0] - 2.0]);
        let r = a.matvec(&u);
        assert!(r.iter().all(|x| x.abs() < 1e-10));
        let c = assemble_stokes_viscous(&v, &UniformPhase(0.4), 1.0, 6).unwrap();
        assert!(c.add_scaled(&a, -0.4).max_abs() <= 1e-13 * a.max_abs());
        assert!(a.asymmetry() <= 1e-13 * a.max_abs());
    }

    #[test]
    fn darcy_energy_of_linear_field() {
        let m = mesh(3, 6);
        let s = sspace(&m, ElementKind::P2);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let (k, _) = assemble_darcy(&s, &UniformPhase(0.0), &id, 1.0, 6).unwrap();
        let p = s.interpolate_scalar(|x| 2.0 * x[0] - 3.0 * x[1]);
        let energy = k.bilinear(&p, &p);
        assert!((energy - 13.0 * 2.0).abs() < 1e-12 * 26.0);
        let small = [[1e-5, 0.0], [0.0, 1e-5]];
        let (k5, _) = assemble_darcy(&s, &UniformPhase(0.0), &small, 1.0, 6).unwrap();
        assert!((k5.bilinear(&p, &p) - 1e-5 * energy).abs() < 1e-12 * 1e-5 * energy);
        let (k0, m0) = assemble_darcy(&s, &UniformPhase(1.0), &id, 1.0, 6).unwrap();
        assert_eq!(k0.max_abs(), 0.0);
        assert_eq!(m0.max_abs(), 0.0);
        assert!(matches!(
            assemble_darcy(&s, &UniformPhase(0.0), &[[1.0, 2.0], [2.0, 1.0]], 1.0, 6),
            Err(Error::NotSpd(_))
        ));
    }

    #[test]
    fn coupling_is_exactly_skew() {
        let m = mesh(4, 8);
        let pf = flat_field(0.25, 1e-3, Profile::Tanh);
        let (cpu, cup) = assemble_interface_coupling(&vspace(&m), &sspace(&m, ElementKind::P2), &pf, 6).unwrap();
        assert_eq!(cpu.add_scaled(&cup.transpose(), 1.0).max_abs(), 0.0);
    }

    #[test]
    fn divergence_of_linear_fields() {
        let m = mesh(2, 4);
        let v = vspace(&m);
        let q = sspace(&m, ElementKind::P1);
        let b = assemble_divergence(&v, &q, &UniformPhase(1.0), true, 6).unwrap();
        let bu = assemble_divergence(&v, &q, &UniformPhase(1.0), false, 6).unwrap();
        assert_eq!(b, bu);
        let ones = vec![1.0; q.dof_count()];
        let u = v.interpolate_vector(|p| [p[0] / 2.0, p[1] / 2.0]);
        assert!((b.bilinear(&ones, &u) + 2.0).abs() < 1e-12 * 2.0);
        let shear = v.interpolate_vector(|p| [p[1], 0.0]);
        let qf = q.interpolate_scalar(|p| 1.0 + p[0] * p[1]);
        assert!(b.bilinear(&qf, &shear).abs() < 1e-12);
    }

    #[test]
    fn bjs_sees_only_tangential_motion() {
        let m = mesh(4, 8);
        let v = vspace(&m);
        let pf = flat_field(0.25, 1e-3, Profile::Clamp);
        let j = assemble_bjs(&v, &pf, 1.0, 6).unwrap();
        let normal = v.interpolate_vector(|_| [0.0, 1.0]);
        assert!(j.bilinear(&normal, &normal).abs() < 1e-12);
        let tangential = v.interpolate_vector(|_| [1.0, 0.0]);
        assert!((j.bilinear(&tangential, &tangential) - (1.0 - 2e-3)).abs() < 1e-12);
        assert_eq!(assemble_bjs(&v, &pf, 0.0, 6).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn level_set_form_requires_clamp() {
        assert!(LevelSetInterface::new(flat_field(0.1, 0.0, Profile::Tanh)).is_err());
        assert!(LevelSetInterface::new(flat_field(0.1, 0.0, Profile::Clamp)).is_ok());
    }

    #[test]
    fn kappa_validation() {
        assert!(check_spd(&[[1.0, 0.5], [0.5, 1.0]]).is_ok());
        assert!(check_spd(&[[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(check_spd(&[[-1.0, 0.0], [0.0, 1.0]]).is_err());
        let p = PhysicalParams { mu: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
