//! Runners for the manufactured-solution convergence and modeling-error studies.

use std::sync::Arc;

use crate::error::Result;
use crate::forms::{AssemblyOptions, PhysicalParams};
use crate::mesh::TriMesh;
use crate::model::{CoupledModel, Elements};
use crate::phasefield::{PhaseField, Profile};
use crate::problem::manufactured_mesh;
use crate::sharp::{assemble_sharp, fluid_mask};
use crate::stepper::{init_state, Scheme, SolutionState, Stepper, TimeGrid};

use super::sweep::{run_sweep, ConvergenceReport, SweepFailure, SweepLevel};
use super::{relative_differences, relative_errors, ManufacturedCase};

/// Configuration shared by every level of a manufactured-solution study.
#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedStudy {
    pub elements: Elements,
    pub profile: Profile,
    pub scheme: Scheme,
    pub t_final: f64,
    pub params: PhysicalParams,
    pub options: AssemblyOptions,
}

impl Default for ManufacturedStudy {
    fn default() -> Self {
        Self {
            elements: Elements::default(),
            profile: Profile::Tanh,
            scheme: Scheme::BackwardEuler,
            t_final: 1.0,
            params: PhysicalParams::default(),
            options: AssemblyOptions::default(),
        }
    }
}

impl ManufacturedStudy {
    pub fn case(&self) -> ManufacturedCase {
        ManufacturedCase::new(self.params)
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("problem".into(), "manufactured".into()),
            ("scheme".into(), self.scheme.name().into()),
            ("velocity_element".into(), self.elements.velocity.name().into()),
            ("pressure_element".into(), self.elements.fluid_pressure.name().into()),
            ("darcy_element".into(), self.elements.darcy.name().into()),
            ("profile".into(), self.profile.to_string()),
            ("weighted_divergence".into(), self.options.weighted_divergence.to_string()),
        ]
    }

    pub fn diffuse_model(&self, mesh: Arc<TriMesh>, level: &SweepLevel) -> Result<CoupledModel> {
        let pf = PhaseField::new(level.epsilon, level.delta, self.profile, ManufacturedCase::levelset())?;
        CoupledModel::diffuse(
            mesh,
            self.elements,
            pf,
            self.params,
            self.options,
            ManufacturedCase::boundary_setup(),
        )
    }

    pub fn sharp_model(&self, mesh: Arc<TriMesh>) -> Result<CoupledModel> {
        let fluid = fluid_mask(&mesh, &ManufacturedCase::levelset())?;
        let options = AssemblyOptions {
            weighted_divergence: true,
            ..self.options
        };
        assemble_sharp(
            mesh,
            self.elements,
            fluid,
            self.params,
            options,
            ManufacturedCase::boundary_setup(),
        )
    }

    /// Runs `model` to the final time from the interpolated initial data.
    pub fn solve(&self, model: &CoupledModel, dt: f64) -> Result<SolutionState> {
        let case = self.case();
        let grid = TimeGrid::with_step(self.t_final, dt, self.scheme)?;
        let stepper = Stepper::new(model, &case, grid)?;
        let (state, _) = stepper.run(init_state(model, &case))?;
        Ok(state)
    }

    /// Relative total errors `(e_u, e_p)` at the final time for one diffuse level.
    pub fn run_level(&self, level: &SweepLevel) -> Result<(f64, f64)> {
        let mesh = manufactured_mesh(level.h)?;
        let model = self.diffuse_model(mesh, level)?;
        let state = self.solve(&model, level.dt)?;
        relative_errors(&model, &state, &self.case(), self.t_final)
    }

    /// Relative total errors of the sharp-interface solver at spacing `h`.
    pub fn run_sharp(&self, h: f64, dt: f64) -> Result<(f64, f64)> {
        let model = self.sharp_model(manufactured_mesh(h)?)?;
        let state = self.solve(&model, dt)?;
        relative_errors(&model, &state, &self.case(), self.t_final)
    }

    pub fn sweep(&self, levels: &[SweepLevel], parallel: bool) -> std::result::Result<ConvergenceReport, SweepFailure> {
        run_sweep(levels, self.metadata(), parallel, |l| self.run_level(l))
    }

    /// Sharp-versus-diffuse differences over the fluid region for each level (all levels
    /// must share h and Δt): `e_u = ‖u_sharp − u‖/‖u_sharp‖`, `e_p` likewise for π.
    pub fn modeling_sweep(
        &self,
        levels: &[SweepLevel],
        parallel: bool,
    ) -> std::result::Result<ConvergenceReport, SweepFailure> {
        let first = levels.first().copied();
        let reference = first
            .map(|l| -> Result<_> {
                let mesh = manufactured_mesh(l.h)?;
                let model = self.sharp_model(mesh.clone())?;
                let state = self.solve(&model, l.dt)?;
                Ok((mesh, model, state))
            })
            .transpose();
        let reference = match reference {
            Ok(r) => r,
            Err(source) => {
                return Err(SweepFailure {
                    level: 0,
                    report: ConvergenceReport::new(self.metadata(), vec![]),
                    source,
                })
            }
        };
        let mut metadata = self.metadata();
        metadata.push(("reference".into(), "sharp_interface".into()));
        run_sweep(levels, metadata, parallel, |l| {
            let (mesh, sharp, s_state) = reference.as_ref().expect("levels are non-empty");
            let first = first.expect("levels are non-empty");
            if l.h != first.h || l.dt != first.dt {
                return Err(crate::Error::Parameter(
                    "modeling-error levels must share h and dt".into(),
                ));
            }
            let model = self.diffuse_model(mesh.clone(), l)?;
            let state = self.solve(&model, l.dt)?;
            let fluid: Vec<usize> = match &sharp.formulation {
                crate::model::Formulation::Sharp { fluid, .. } => {
                    (0..fluid.len()).filter(|&t| fluid[t]).collect()
                }
                crate::model::Formulation::Diffuse => unreachable!("reference is sharp"),
            };
            relative_differences((sharp, s_state), (&model, &state), &fluid, false)
        })
    }
}
