//! A fully assembled coupled problem: spaces, weights, and operator blocks, for either the
//! diffuse-interface or the sharp-interface formulation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ElementKind, FunctionSpace};
use crate::forms::{
    assemble_boundary_load, assemble_rhs, AssemblyOptions, BoundarySetup, Discretization,
    InterfaceWeight, Layout, Operators, PhysicalParams, ProblemData,
};
use crate::mesh::{Point, TriMesh};
use crate::phasefield::{PhaseField, PhaseWeight};

/// Element choice for the three unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elements {
    pub velocity: ElementKind,
    pub fluid_pressure: ElementKind,
    pub darcy: ElementKind,
}

impl Elements {
    /// P2–P1 Taylor–Hood for the fluid with the given Darcy element.
    pub fn taylor_hood(darcy: ElementKind) -> Self {
        Self {
            velocity: ElementKind::P2,
            fluid_pressure: ElementKind::P1,
            darcy,
        }
    }

    /// MINI (P1 + bubble / P1) for the fluid with P1 Darcy pressure.
    pub fn mini() -> Self {
        Self {
            velocity: ElementKind::P1Bubble,
            fluid_pressure: ElementKind::P1,
            darcy: ElementKind::P1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fluid_pressure != ElementKind::P1 {
            return Err(Error::config(
                "pressure_element",
                format!("fluid pressure must be P1, got {}", self.fluid_pressure.name()),
            ));
        }
        if self.darcy == ElementKind::P1Bubble {
            return Err(Error::config("darcy_element", "Darcy pressure must be P1 or P2"));
        }
        Ok(())
    }
}

impl Default for Elements {
    fn default() -> Self {
        Self::taylor_hood(ElementKind::P2)
    }
}

/// An edge of the sharp interface, seen from its fluid triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceEdge {
    pub edge: usize,
    pub fluid_cell: usize,
    /// Local edge index within the fluid triangle.
    pub fluid_local: usize,
    pub darcy_cell: usize,
    /// Unit normal pointing from the fluid into the porous region.
    pub normal: [f64; 2],
}

#[derive(Clone, Debug)]
pub enum Formulation {
    Diffuse,
    Sharp {
        /// Per-triangle fluid indicator.
        fluid: Vec<bool>,
        interface: Vec<InterfaceEdge>,
    },
}

/// Assembled coupled model. Operators are time-independent; loads and Dirichlet values are
/// evaluated on demand.
#[derive(Clone)]
pub struct CoupledModel {
    pub disc: Discretization,
    pub params: PhysicalParams,
    pub options: AssemblyOptions,
    pub formulation: Formulation,
    pub ops: Operators,
    pub boundary: BoundarySetup,
    weight_u: Arc<dyn InterfaceWeight>,
    weight_p: Arc<dyn PhaseWeight>,
}

impl std::fmt::Debug for CoupledModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoupledModel")
            .field("layout", &self.ops.layout)
            .field("params", &self.params)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

impl CoupledModel {
    /// Diffuse-interface model weighted by a phase field on the whole mesh.
    pub fn diffuse(
        mesh: Arc<TriMesh>,
        elements: Elements,
        pf: PhaseField,
        params: PhysicalParams,
        options: AssemblyOptions,
        boundary: BoundarySetup,
    ) -> Result<Self> {
        pf.validate()?;
        Self::with_weight(mesh, elements, Arc::new(pf), params, options, boundary)
    }

    /// Diffuse-type model with an arbitrary weight (constant phases, the level-set
    /// interface form, ...).
    pub fn with_weight(
        mesh: Arc<TriMesh>,
        elements: Elements,
        weight: Arc<dyn InterfaceWeight>,
        params: PhysicalParams,
        options: AssemblyOptions,
        boundary: BoundarySetup,
    ) -> Result<Self> {
        elements.validate()?;
        let disc = Discretization {
            velocity: FunctionSpace::new(mesh.clone(), elements.velocity, 2)?,
            fluid_pressure: FunctionSpace::new(mesh.clone(), elements.fluid_pressure, 1)?,
            darcy: FunctionSpace::new(mesh, elements.darcy, 1)?,
        };
        let ops = Operators::assemble(&disc, weight.as_ref(), &params, &options)?;
        let weight_p: Arc<dyn PhaseWeight> = Arc::new(InterfaceAsPhase(weight.clone()));
        Ok(Self {
            disc,
            params,
            options,
            formulation: Formulation::Diffuse,
            ops,
            boundary,
            weight_u: weight,
            weight_p,
        })
    }

    /// Assembles a model from pre-built pieces (used by the sharp-interface assembler).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        disc: Discretization,
        params: PhysicalParams,
        options: AssemblyOptions,
        formulation: Formulation,
        ops: Operators,
        boundary: BoundarySetup,
        weight_u: Arc<dyn InterfaceWeight>,
        weight_p: Arc<dyn PhaseWeight>,
    ) -> Self {
        Self {
            disc,
            params,
            options,
            formulation,
            ops,
            boundary,
            weight_u,
            weight_p,
        }
    }

    pub fn layout(&self) -> Layout {
        self.ops.layout
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        self.disc.velocity.mesh()
    }

    /// Weight used for the Stokes blocks and loads.
    pub fn weight_u(&self) -> &dyn InterfaceWeight {
        self.weight_u.as_ref()
    }

    /// Weight whose complement Ψ = 1 − Φ is used for the Darcy blocks and loads.
    pub fn weight_p(&self) -> &dyn PhaseWeight {
        self.weight_p.as_ref()
    }

    pub fn is_sharp(&self) -> bool {
        matches!(self.formulation, Formulation::Sharp { .. })
    }

    /// Φ at point `x` of triangle `cell` for blending total fields.
    pub fn phi_at(&self, cell: usize, x: Point) -> f64 {
        match &self.formulation {
            Formulation::Diffuse => self.weight_u.eval(x).phi,
            Formulation::Sharp { fluid, .. } => {
                if fluid[cell] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Sorted global indices of Dirichlet-constrained unknowns.
    pub fn fixed_dofs(&self) -> Vec<usize> {
        let l = self.layout();
        let mut fixed = self
            .disc
            .velocity
            .expand_components(&self.disc.velocity.boundary_dofs(&self.boundary.velocity_dirichlet));
        fixed.extend(
            self.disc
                .darcy
                .boundary_dofs(&self.boundary.darcy_dirichlet)
                .into_iter()
                .map(|s| l.p_offset() + s),
        );
        fixed
    }

    /// Dirichlet values at time `t`, in the order of [`Self::fixed_dofs`].
    pub fn dirichlet_values(&self, fixed: &[usize], data: &dyn ProblemData, t: f64) -> Vec<f64> {
        let l = self.layout();
        fixed
            .iter()
            .map(|&i| {
                if i < l.n_u {
                    let p = self.disc.velocity.dof_point(i / 2);
                    data.velocity_boundary(p, t)[i % 2]
                } else {
                    let p = self.disc.darcy.dof_point(i - l.p_offset());
                    data.darcy_boundary(p, t)
                }
            })
            .collect()
    }

    /// Load vectors `(f_u, f_p)` at time `t`, including Neumann terms.
    pub fn loads(&self, data: &dyn ProblemData, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        assemble_rhs(
            &self.disc.velocity,
            &self.disc.darcy,
            self.weight_u.as_ref(),
            self.weight_p.as_ref(),
            self.params.rho,
            data,
            t,
            self.options.quadrature_degree,
        )
    }

    /// Neumann part of [`Self::loads`].
    pub fn boundary_loads(&self, data: &dyn ProblemData, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        assemble_boundary_load(
            &self.disc.velocity,
            &self.disc.darcy,
            self.weight_u.as_ref(),
            self.weight_p.as_ref(),
            data,
            t,
            self.options.quadrature_degree,
        )
    }
}

/// Adapter exposing an interface weight through the plain phase-weight interface.
struct InterfaceAsPhase(Arc<dyn InterfaceWeight>);

impl PhaseWeight for InterfaceAsPhase {
    fn eval(&self, p: Point) -> crate::phasefield::PhaseValue {
        self.0.eval(p)
    }

    fn g_min(&self) -> f64 {
        self.0.g_min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::LevelSet;
    use crate::mesh::{build_uniform, BoundaryTag, RectangleSpec};
    use crate::phasefield::Profile;

    #[test]
    fn fixed_dofs_are_sorted_and_cover_both_blocks() {
        let mesh = Arc::new(build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), 2, 4)).unwrap());
        let pf = PhaseField::new(0.5, 1e-3, Profile::Tanh, LevelSet::Flat { y0: 1.0 }).unwrap();
        let bc = BoundarySetup {
            velocity_dirichlet: vec![BoundaryTag::Top],
            darcy_dirichlet: vec![BoundaryTag::Bottom],
            ..Default::default()
        };
        let model = CoupledModel::diffuse(mesh, Elements::default(), pf, Default::default(), Default::default(), bc).unwrap();
        let fixed = model.fixed_dofs();
        assert!(fixed.windows(2).all(|w| w[0] < w[1]));
        let l = model.layout();
        // P2 on a 2-cell edge row: 5 nodes, two components; 5 Darcy nodes
        assert_eq!(fixed.iter().filter(|&&i| i < l.n_u).count(), 10);
        assert_eq!(fixed.iter().filter(|&&i| i >= l.p_offset()).count(), 5);
    }

    #[test]
    fn rejects_unsupported_element_pairs() {
        let e = Elements { fluid_pressure: ElementKind::P2, ..Default::default() };
        assert!(e.validate().is_err());
        assert!(Elements::mini().validate().is_ok());
    }
}
