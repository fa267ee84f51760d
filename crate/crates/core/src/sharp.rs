//! Sharp-interface reference formulation on an interface-aligned mesh: Stokes on the fluid
//! triangles, Darcy on the porous ones, coupled by edge integrals over Γ
//! (`∫_Γ p v·n`, `−∫_Γ ψ u·n`, `α∫_Γ (u·τ)(v·τ)`), with `n` pointing into the porous region.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::basis::eval_barycentric;
use crate::fem::{FunctionSpace, Tabulation};
use crate::forms::{
    assemble_darcy, assemble_divergence, assemble_stokes_viscous, assemble_velocity_mass,
    edge_quadrature, AssemblyOptions, BoundarySetup, Discretization, Operators, PhysicalParams,
};
use crate::levelset::LevelSet;
use crate::mesh::{BoundaryTag, TriMesh};
use crate::model::{CoupledModel, Elements, Formulation, InterfaceEdge};
use crate::phasefield::UniformPhase;
use crate::sparse::{Coo, CsrMatrix};

/// Fluid indicator per triangle from the sign of the level set at the centroid. Fails if a
/// triangle has vertices strictly on both sides (the mesh does not resolve Γ).
pub fn fluid_mask(mesh: &TriMesh, levelset: &LevelSet) -> Result<Vec<bool>> {
    let tol = 1e-8 * mesh.h_max();
    (0..mesh.n_triangles())
        .map(|t| {
            let fluid = levelset.eval(mesh.centroid(t)) > 0.0;
            let straddles = mesh.triangle_points(t).iter().any(|&p| {
                let v = levelset.eval(p);
                if fluid {
                    v < -tol
                } else {
                    v > tol
                }
            });
            if straddles {
                Err(Error::Interface(format!(
                    "triangle {t} is cut by the interface; the mesh must be aligned with it"
                )))
            } else {
                Ok(fluid)
            }
        })
        .collect()
}

/// Edges separating fluid and porous triangles. If the mesh tags interior edges as
/// `interface`, they must coincide exactly with this set.
pub fn interface_edges(mesh: &TriMesh, fluid: &[bool]) -> Result<Vec<InterfaceEdge>> {
    if fluid.len() != mesh.n_triangles() {
        return Err(Error::Interface(format!(
            "fluid mask has {} entries for {} triangles",
            fluid.len(),
            mesh.n_triangles()
        )));
    }
    let mut out = Vec::new();
    for e in 0..mesh.n_edges() {
        let [Some(a), Some(b)] = mesh.edge_triangles(e) else {
            continue;
        };
        if fluid[a] == fluid[b] {
            continue;
        }
        let (f, d) = if fluid[a] { (a, b) } else { (b, a) };
        let k = mesh
            .triangle_edges(f)
            .iter()
            .position(|&x| x == e)
            .expect("edge belongs to its triangle");
        let geo = crate::fem::CellGeometry::new(mesh.triangle_points(f));
        let (_, _, normal) = edge_quadrature(&geo, k, 1);
        out.push(InterfaceEdge {
            edge: e,
            fluid_cell: f,
            fluid_local: k,
            darcy_cell: d,
            normal,
        });
    }
    if out.is_empty() {
        return Err(Error::Interface("no edge separates fluid and porous triangles".into()));
    }
    let tag = BoundaryTag::interface();
    let tagged: Vec<usize> = mesh.edges_with_tag(&tag).collect();
    if !tagged.is_empty() {
        let mut found: Vec<usize> = out.iter().map(|ie| ie.edge).collect();
        found.sort_unstable();
        let mut tagged = tagged;
        tagged.sort_unstable();
        if found != tagged {
            return Err(Error::Interface(format!(
                "{} edges tagged `interface` but {} edges separate the subdomains",
                tagged.len(),
                found.len()
            )));
        }
    }
    Ok(out)
}

/// `(C_pu, C_up)` over Γ: `C_pu[ψ,u] = −∫_Γ ψ u·n`, `C_up = −C_puᵀ`.
pub fn assemble_interface_coupling_sharp(
    space_u: &FunctionSpace,
    space_p: &FunctionSpace,
    edges: &[InterfaceEdge],
    degree: usize,
) -> Result<(CsrMatrix, CsrMatrix)> {
    let mut coo = Coo::new(space_p.dof_count(), space_u.dof_count());
    for ie in edges {
        let geo_f = space_u.cell_geometry(ie.fluid_cell);
        let geo_d = space_p.cell_geometry(ie.darcy_cell);
        let du = space_u.cell_dofs(ie.fluid_cell);
        let dp = space_p.cell_dofs(ie.darcy_cell);
        let (bary, w, n) = edge_quadrature(&geo_f, ie.fluid_local, degree);
        let mut local = vec![0.0; dp.len() * du.len() * 2];
        for (l, w) in bary.iter().zip(&w) {
            let x = geo_f.map(*l);
            let (vu, _) = eval_barycentric(space_u.kind(), *l);
            let (vp, _) = eval_barycentric(space_p.kind(), geo_d.barycentric(x));
            for i in 0..dp.len() {
                for j in 0..du.len() {
                    let s = -w * vp[i] * vu[j];
                    local[(i * du.len() + j) * 2] += s * n[0];
                    local[(i * du.len() + j) * 2 + 1] += s * n[1];
                }
            }
        }
        for i in 0..dp.len() {
            for j in 0..du.len() {
                for c in 0..2 {
                    coo.push(dp[i], 2 * du[j] + c, local[(i * du.len() + j) * 2 + c]);
                }
            }
        }
    }
    let c_pu = coo.to_csr();
    let c_up = c_pu.transpose().scaled(-1.0);
    Ok((c_pu, c_up))
}

/// `α∫_Γ (u·τ)(v·τ)` with the edge tangent τ = rot90(n).
pub fn assemble_bjs_sharp(
    space_u: &FunctionSpace,
    edges: &[InterfaceEdge],
    alpha_bjs: f64,
    degree: usize,
) -> Result<CsrMatrix> {
    let n = space_u.dof_count();
    let mut coo = Coo::new(n, n);
    if alpha_bjs == 0.0 {
        return Ok(coo.to_csr());
    }
    for ie in edges {
        let geo = space_u.cell_geometry(ie.fluid_cell);
        let dofs = space_u.cell_dofs(ie.fluid_cell);
        let nl = dofs.len();
        let (bary, w, nrm) = edge_quadrature(&geo, ie.fluid_local, degree);
        let tau = [-nrm[1], nrm[0]];
        let tab = Tabulation::new(space_u.kind(), &bary);
        let mut local = vec![0.0; 4 * nl * nl];
        for (q, w) in w.iter().enumerate() {
            for i in 0..nl {
                for j in 0..nl {
                    let s = alpha_bjs * w * tab.values[q][i] * tab.values[q][j];
                    for a in 0..2 {
                        for b in 0..2 {
                            local[((2 * i + a) * nl + j) * 2 + b] += s * tau[a] * tau[b];
                        }
                    }
                }
            }
        }
        for i in 0..nl {
            for a in 0..2 {
                for j in 0..nl {
                    for b in 0..2 {
                        coo.push(2 * dofs[i] + a, 2 * dofs[j] + b, local[((2 * i + a) * nl + j) * 2 + b]);
                    }
                }
            }
        }
    }
    Ok(coo.to_csr())
}

/// Builds the sharp-interface model for the given fluid indicator.
pub fn assemble_sharp(
    mesh: Arc<TriMesh>,
    elements: Elements,
    fluid: Vec<bool>,
    params: PhysicalParams,
    options: AssemblyOptions,
    boundary: BoundarySetup,
) -> Result<CoupledModel> {
    elements.validate()?;
    params.validate()?;
    let edges = interface_edges(&mesh, &fluid)?;
    let porous: Vec<bool> = fluid.iter().map(|f| !f).collect();
    let disc = Discretization {
        velocity: FunctionSpace::restricted(mesh.clone(), elements.velocity, 2, fluid.clone())?,
        fluid_pressure: FunctionSpace::restricted(
            mesh.clone(),
            elements.fluid_pressure,
            1,
            fluid.clone(),
        )?,
        darcy: FunctionSpace::restricted(mesh, elements.darcy, 1, porous)?,
    };
    let d = options.quadrature_degree;
    let one = UniformPhase(1.0);
    let zero = UniformPhase(0.0);
    let (coupling_pu, coupling_up) =
        assemble_interface_coupling_sharp(&disc.velocity, &disc.darcy, &edges, d)?;
    let (darcy_stiffness, darcy_mass) = assemble_darcy(&disc.darcy, &zero, &params.kappa, params.c0, d)?;
    let ops = Operators {
        layout: disc.layout(),
        velocity_mass: assemble_velocity_mass(&disc.velocity, &one, params.rho, d)?,
        viscous: assemble_stokes_viscous(&disc.velocity, &one, params.mu, d)?,
        bjs: assemble_bjs_sharp(&disc.velocity, &edges, params.alpha_bjs, d)?,
        divergence: assemble_divergence(&disc.velocity, &disc.fluid_pressure, &one, true, d)?,
        coupling_up,
        coupling_pu,
        darcy_stiffness,
        darcy_mass,
    };
    Ok(CoupledModel::from_parts(
        disc,
        params,
        options,
        Formulation::Sharp {
            fluid,
            interface: edges,
        },
        ops,
        boundary,
        Arc::new(one),
        Arc::new(zero),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform, RectangleSpec};

    fn setup() -> (Arc<TriMesh>, Vec<bool>) {
        let mesh = Arc::new(build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), 3, 6)).unwrap());
        let fluid = fluid_mask(&mesh, &LevelSet::Flat { y0: 1.0 }).unwrap();
        (mesh, fluid)
    }

    #[test]
    fn flat_interface_edges_point_down() {
        let (mesh, fluid) = setup();
        let edges = interface_edges(&mesh, &fluid).unwrap();
        assert_eq!(edges.len(), 3);
        for e in &edges {
            assert!((e.normal[0]).abs() < 1e-15 && (e.normal[1] + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cut_triangles_are_rejected() {
        let (mesh, _) = setup();
        assert!(matches!(
            fluid_mask(&mesh, &LevelSet::Flat { y0: 1.1 }),
            Err(Error::Interface(_))
        ));
    }

    #[test]
    fn coupling_is_skew_and_blind_to_tangential_flow() {
        let (mesh, fluid) = setup();
        let model = assemble_sharp(
            mesh,
            Elements::default(),
            fluid,
            PhysicalParams::default(),
            AssemblyOptions::default(),
            BoundarySetup::default(),
        )
        .unwrap();
        let ops = &model.ops;
        assert_eq!(ops.coupling_pu.add_scaled(&ops.coupling_up.transpose(), 1.0).max_abs(), 0.0);
        let u = model.disc.velocity.interpolate_vector(|p| [1.0 + p[0], 0.0]);
        assert!(ops.coupling_pu.matvec(&u).iter().all(|v| v.abs() < 1e-12));
        // ∫_Γ ψ u·n for ψ ≡ 1, u = (0, 1), n = (0, −1): −(−1)·|Γ| = 1
        let up = model.disc.velocity.interpolate_vector(|_| [0.0, 1.0]);
        let ones = vec![1.0; model.disc.darcy.dof_count()];
        assert!((ops.coupling_pu.bilinear(&ones, &up) - 1.0).abs() < 1e-12);
        let t = model.disc.velocity.interpolate_vector(|_| [1.0, 0.0]);
        assert!((ops.bjs.bilinear(&t, &t) - 1.0).abs() < 1e-12);
        assert!(ops.bjs.bilinear(&up, &up).abs() < 1e-12);
    }
}
