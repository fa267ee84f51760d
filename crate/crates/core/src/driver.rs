//! Turns a [`RunConfig`] into meshes, models, and runs; writes reports and snapshots.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{
    relative_differences, relative_errors, ConvergenceReport, ManufacturedCase, ReportRow, SweepFailure,
    SweepLevel,
};
use crate::config::{Comparison, FormulationKind, MeshSource, ProblemKind, Reference, RunConfig};
use crate::error::{Error, Result};
use crate::forms::{AssemblyOptions, ProblemData};
use crate::levelset::Expression;
use crate::mesh::{build_uniform, import_mesh, RectangleSpec, TriMesh};
use crate::model::{CoupledModel, Formulation};
use crate::output::{write_vtk_file, Manifest};
use crate::phasefield::PhaseField;
use crate::problem::{manufactured_mesh, ChannelProblem, ExpressionProblem};
use crate::sharp::{assemble_sharp, fluid_mask};
use crate::stepper::{init_state, write_diagnostics_csv, SolutionState, StepDiagnostics, Stepper, TimeGrid};

/// Problem data of the configured problem.
pub fn problem_data(cfg: &RunConfig) -> Result<Box<dyn ProblemData>> {
    Ok(match cfg.problem {
        ProblemKind::Manufactured => Box::new(ManufacturedCase::new(cfg.params)),
        ProblemKind::SineInterface => Box::new(ChannelProblem {
            u_in: cfg.inflow_velocity,
            ..Default::default()
        }),
        ProblemKind::Custom => {
            let cs = cfg.custom.as_ref().expect("custom problems carry their data");
            let e = |key: &str, s: &str| Expression::parse(s).map_err(|err| Error::config(key, err.to_string()));
            Box::new(ExpressionProblem {
                boundary: cs.boundary.clone(),
                forcing: [e("forcing", &cs.forcing[0])?, e("forcing", &cs.forcing[1])?],
                source: e("source", &cs.source)?,
                velocity_bc: [e("velocity_bc", &cs.velocity_bc[0])?, e("velocity_bc", &cs.velocity_bc[1])?],
                darcy_bc: e("darcy_bc", &cs.darcy_bc)?,
                traction: [e("traction", &cs.traction[0])?, e("traction", &cs.traction[1])?],
                darcy_flux: e("darcy_flux", &cs.darcy_flux)?,
                initial_velocity: [
                    e("initial_velocity", &cs.initial_velocity[0])?,
                    e("initial_velocity", &cs.initial_velocity[1])?,
                ],
                initial_darcy_pressure: e("initial_darcy_pressure", &cs.initial_darcy_pressure)?,
            })
        }
    })
}

/// Mesh of one level: imported, or built from the problem's rectangle with spacing `h`.
pub fn build_mesh(cfg: &RunConfig, h: f64) -> Result<Arc<TriMesh>> {
    if let MeshSource::Import(path) = &cfg.mesh {
        return Ok(Arc::new(import_mesh(path)?));
    }
    match cfg.problem {
        ProblemKind::Manufactured => manufactured_mesh(h),
        ProblemKind::SineInterface => {
            let (x, y) = (ChannelProblem::X_RANGE, ChannelProblem::Y_RANGE);
            let nx = ((x.1 - x.0) / h).round().max(1.0) as usize;
            let ny = ((y.1 - y.0) / h).round().max(2.0) as usize;
            let ny = ny + ny % 2;
            Ok(Arc::new(ChannelProblem::default().aligned_mesh(nx, ny)?))
        }
        ProblemKind::Custom => {
            let cs = cfg.custom.as_ref().expect("custom problems carry their data");
            let spec = RectangleSpec::with_spacing(cs.x_range, cs.y_range, h);
            Ok(Arc::new(build_uniform(&spec)?))
        }
    }
}

fn options(cfg: &RunConfig) -> AssemblyOptions {
    AssemblyOptions {
        quadrature_degree: cfg.quadrature_degree,
        weighted_divergence: cfg.weighted_divergence,
    }
}

pub fn diffuse_model(cfg: &RunConfig, mesh: Arc<TriMesh>, level: &SweepLevel, data: &dyn ProblemData) -> Result<CoupledModel> {
    let pf = PhaseField::new(level.epsilon, level.delta, cfg.profile, cfg.levelset.clone())?;
    CoupledModel::diffuse(mesh, cfg.elements, pf, cfg.params, options(cfg), data.boundary())
}

pub fn sharp_model(cfg: &RunConfig, mesh: Arc<TriMesh>, data: &dyn ProblemData) -> Result<CoupledModel> {
    let fluid = fluid_mask(&mesh, &cfg.levelset)?;
    let options = AssemblyOptions {
        weighted_divergence: true,
        ..options(cfg)
    };
    assemble_sharp(mesh, cfg.elements, fluid, cfg.params, options, data.boundary())
}

/// Outcome of one level.
#[derive(Clone, Debug)]
pub struct LevelRun {
    pub level: SweepLevel,
    pub model: CoupledModel,
    pub state: SolutionState,
    pub diagnostics: Vec<StepDiagnostics>,
    pub reference: Option<Arc<(CoupledModel, SolutionState)>>,
    /// `(e_u, e_p)`, NaN without a reference.
    pub errors: (f64, f64),
    pub runtime_s: f64,
}

/// Runs `model` from its initial data to the final time.
pub fn solve(
    model: &CoupledModel,
    data: &dyn ProblemData,
    cfg: &RunConfig,
    dt: f64,
) -> Result<(SolutionState, Vec<StepDiagnostics>)> {
    let grid = TimeGrid::with_step(cfg.t_final, dt, cfg.scheme)?;
    let stepper = Stepper::new(model, data, grid)?;
    stepper.run(init_state(model, data))
}

fn solve_sharp(cfg: &RunConfig, data: &dyn ProblemData, h: f64, dt: f64) -> Result<(CoupledModel, SolutionState)> {
    let model = sharp_model(cfg, build_mesh(cfg, h)?, data)?;
    let (state, _) = solve(&model, data, cfg, dt)?;
    Ok((model, state))
}

fn fluid_cells(model: &CoupledModel) -> Vec<usize> {
    match &model.formulation {
        Formulation::Sharp { fluid, .. } => (0..fluid.len()).filter(|&t| fluid[t]).collect(),
        Formulation::Diffuse => (0..model.mesh().n_triangles()).collect(),
    }
}

/// Runs one level; `reference` is the sharp solution on the same mesh when required.
pub fn run_level(
    cfg: &RunConfig,
    data: &dyn ProblemData,
    level: &SweepLevel,
    reference: Option<Arc<(CoupledModel, SolutionState)>>,
) -> Result<LevelRun> {
    let start = Instant::now();
    let mesh = match &reference {
        Some(r) => r.0.mesh().clone(),
        None => build_mesh(cfg, level.h)?,
    };
    let model = match cfg.formulation {
        FormulationKind::Diffuse => diffuse_model(cfg, mesh, level, data)?,
        FormulationKind::Sharp => sharp_model(cfg, mesh, data)?,
    };
    let (state, diagnostics) = solve(&model, data, cfg, level.dt)?;
    let errors = match cfg.reference {
        Reference::Exact => relative_errors(&model, &state, &ManufacturedCase::new(cfg.params), cfg.t_final)?,
        Reference::Sharp => {
            let r = reference.as_ref().expect("sharp reference computed before the level");
            match cfg.compare {
                Comparison::Fluid => relative_differences((&r.0, &r.1), (&model, &state), &fluid_cells(&r.0), false)?,
                Comparison::Total => {
                    let all: Vec<usize> = (0..model.mesh().n_triangles()).collect();
                    relative_differences((&r.0, &r.1), (&model, &state), &all, true)?
                }
            }
        }
        Reference::None => (f64::NAN, f64::NAN),
    };
    log::info!(
        "level {} (h = {}, dt = {}, eps = {}, delta = {}): e_u = {:e}, e_p = {:e}",
        level.level,
        level.h,
        level.dt,
        level.epsilon,
        level.delta,
        errors.0,
        errors.1
    );
    Ok(LevelRun {
        level: *level,
        model,
        state,
        diagnostics,
        reference,
        errors,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

pub fn metadata(cfg: &RunConfig) -> Vec<(String, String)> {
    let reference = match cfg.reference {
        Reference::Exact => "exact",
        Reference::Sharp => "sharp_interface",
        Reference::None => "none",
    };
    vec![
        ("problem".into(), cfg.problem.name().into()),
        ("scheme".into(), cfg.scheme.name().into()),
        ("velocity_element".into(), cfg.elements.velocity.name().into()),
        ("pressure_element".into(), cfg.elements.fluid_pressure.name().into()),
        ("darcy_element".into(), cfg.elements.darcy.name().into()),
        ("profile".into(), cfg.profile.to_string()),
        ("weighted_divergence".into(), cfg.weighted_divergence.to_string()),
        ("reference".into(), reference.into()),
    ]
}

/// All levels of the config, concurrently when `parallel`. Sharp references are computed
/// once per distinct (h, Δt).
pub fn run_levels(cfg: &RunConfig, parallel: bool) -> std::result::Result<Vec<LevelRun>, SweepFailure> {
    let data = problem_data(cfg).map_err(|source| failure(cfg, 0, &[], source))?;
    let data = data.as_ref();
    let levels = cfg.levels();
    let mut references: Vec<((f64, f64), Arc<(CoupledModel, SolutionState)>)> = Vec::new();
    if cfg.reference == Reference::Sharp {
        let mut keys: Vec<(usize, (f64, f64))> = Vec::new();
        for l in &levels {
            if !keys.iter().any(|(_, k)| *k == (l.h, l.dt)) {
                keys.push((l.level, (l.h, l.dt)));
            }
        }
        let solved: Vec<_> = if parallel {
            keys.par_iter().map(|(lvl, (h, dt))| (*lvl, solve_sharp(cfg, data, *h, *dt))).collect()
        } else {
            keys.iter().map(|(lvl, (h, dt))| (*lvl, solve_sharp(cfg, data, *h, *dt))).collect()
        };
        for ((_, key), (lvl, r)) in keys.iter().zip(solved) {
            let r = r.map_err(|source| failure(cfg, lvl, &[], source))?;
            references.push((*key, Arc::new(r)));
        }
    }
    let reference_of = |l: &SweepLevel| {
        references.iter().find(|(k, _)| *k == (l.h, l.dt)).map(|(_, r)| r.clone())
    };
    let run = |l: &SweepLevel| run_level(cfg, data, l, reference_of(l));
    let results: Vec<Result<LevelRun>> = if parallel {
        levels.par_iter().map(run).collect()
    } else {
        let mut out = Vec::new();
        for l in &levels {
            let r = run(l);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let mut runs = Vec::new();
    for (l, r) in levels.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(source) => return Err(failure(cfg, l.level, &runs, source)),
        }
    }
    Ok(runs)
}

fn failure(cfg: &RunConfig, level: usize, runs: &[LevelRun], source: Error) -> SweepFailure {
    SweepFailure {
        level,
        report: report(cfg, runs),
        source,
    }
}

pub fn report(cfg: &RunConfig, runs: &[LevelRun]) -> ConvergenceReport {
    let rows = runs
        .iter()
        .map(|r| ReportRow {
            level: r.level.level,
            h: r.level.h,
            dt: r.level.dt,
            epsilon: r.level.epsilon,
            delta: r.level.delta,
            e_u: r.errors.0,
            rate_u: None,
            e_p: r.errors.1,
            rate_p: None,
            runtime_s: r.runtime_s,
        })
        .collect();
    ConvergenceReport::new(metadata(cfg), rows)
}

/// Files written by [`execute`], relative to the output directory.
#[derive(Clone, Debug)]
pub struct Execution {
    pub report: ConvergenceReport,
    pub artifacts: Vec<String>,
}

/// Fails unless `dir` exists (or can be created) and accepts files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Runs the configured levels and writes `report.csv`, optional diagnostics and snapshots,
/// and `manifest.json` into `out`. On failure the partial report is still written.
pub fn execute(cfg: &RunConfig, out: &Path, parallel: bool) -> std::result::Result<Execution, SweepFailure> {
    let mut manifest = Manifest::new("solve", cfg.echo());
    let result = run_levels(cfg, parallel);
    let (runs, failure) = match result {
        Ok(runs) => (runs, None),
        Err(f) => (Vec::new(), Some(f)),
    };
    let report = match &failure {
        Some(f) => f.report.clone(),
        None => report(cfg, &runs),
    };
    let write = |manifest: &mut Manifest| -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(out.join("report.csv"))?);
        report.write_csv(&mut f, cfg.timing)?;
        manifest.artifacts.push("report.csv".into());
        let single = runs.len() == 1;
        let name = |stem: &str, ext: &str, level: usize| {
            if single {
                format!("{stem}.{ext}")
            } else {
                format!("{stem}_level{level}.{ext}")
            }
        };
        for r in &runs {
            if cfg.diagnostics {
                let file = name("diagnostics", "csv", r.level.level);
                write_diagnostics_csv(&r.diagnostics, BufWriter::new(fs::File::create(out.join(&file))?))?;
                let worst = r.diagnostics.iter().fold(0.0f64, |m, d| m.max(d.bc_residual));
                log::info!("level {}: largest boundary-data residual {worst:e}", r.level.level);
                manifest.artifacts.push(file);
            }
            if cfg.snapshots {
                let file = name("fields", "vtk", r.level.level);
                let title = format!("{} level {} t = {}", cfg.problem.name(), r.level.level, r.state.time);
                write_vtk_file(&r.model, &r.state, &title, &out.join(&file))?;
                manifest.artifacts.push(file);
                if let Some(reference) = &r.reference {
                    let file = name("reference", "vtk", r.level.level);
                    write_vtk_file(&reference.0, &reference.1, &format!("sharp reference {title}"), &out.join(&file))?;
                    manifest.artifacts.push(file);
                }
            }
        }
        manifest.artifacts.push("manifest.json".into());
        manifest.write(out)
    };
    let written = write(&mut manifest);
    match (failure, written) {
        (Some(f), _) => Err(f),
        (None, Err(source)) => Err(SweepFailure {
            level: 0,
            report,
            source,
        }),
        (None, Ok(())) => Ok(Execution {
            report,
            artifacts: manifest.artifacts,
        }),
    }
}

/// One invariant of the audit suite.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckItem {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Audits the first level's mesh and operators without time stepping: block symmetry,
/// exact skewness of the coupling pair, the rigid-motion kernel of the viscous form, and
/// the range of the phase field.
pub fn check(cfg: &RunConfig) -> Result<Vec<CheckItem>> {
    let data = problem_data(cfg)?;
    let level = cfg.base_level();
    let mesh = build_mesh(cfg, level.h)?;
    let mut items = Vec::new();
    let mut push = |name: &str, value: f64, tolerance: f64| {
        items.push(CheckItem {
            name: name.to_string(),
            value,
            tolerance,
        })
    };
    push("mesh_audit", if mesh.audit().is_ok() { 0.0 } else { 1.0 }, 0.0);
    let model = match cfg.formulation {
        FormulationKind::Diffuse => diffuse_model(cfg, mesh.clone(), &level, data.as_ref())?,
        FormulationKind::Sharp => sharp_model(cfg, mesh.clone(), data.as_ref())?,
    };
    let ops = &model.ops;
    for (name, m) in [
        ("symmetry_velocity_mass", &ops.velocity_mass),
        ("symmetry_viscous", &ops.viscous),
        ("symmetry_bjs", &ops.bjs),
        ("symmetry_darcy_stiffness", &ops.darcy_stiffness),
        ("symmetry_darcy_mass", &ops.darcy_mass),
    ] {
        let scale = m.max_abs();
        push(name, if scale > 0.0 { m.asymmetry() / scale } else { 0.0 }, 1e-13);
    }
    let skew = ops.coupling_pu.add_scaled(&ops.coupling_up.transpose(), 1.0).max_abs();
    push("coupling_skewness", skew, 0.0);
    let space = &model.disc.velocity;
    let scale = ops.viscous.max_abs();
    let mut kernel = 0.0f64;
    for f in [
        (|_: [f64; 2]| [1.0, 0.0]) as fn([f64; 2]) -> [f64; 2],
        |_| [0.0, 1.0],
        |p| [-p[1], p[0]],
    ] {
        let r = space.interpolate_vector(f);
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ar = ops.viscous.matvec(&r);
        let res = ar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        kernel = kernel.max(res / (scale * norm.max(1.0)));
    }
    push("rigid_motion_kernel", kernel, 1e-10);
    if !model.is_sharp() {
        let (lo, hi) = mesh.vertices().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let phi = model.weight_p().eval(*p).phi;
            (lo.min(phi), hi.max(phi))
        });
        let excess = (level.delta - lo).max(hi - (1.0 - level.delta)).max(0.0);
        push("phase_field_range", excess, 1e-14);
    }
    Ok(items)
}

pub fn write_check_csv(items: &[CheckItem], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "check,value,tolerance,passed")?;
    for i in items {
        writeln!(w, "{},{:e},{:e},{}", i.name, i.value, i.tolerance, i.passed())?;
    }
    Ok(())
}
