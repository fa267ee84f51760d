//! Run configuration: a flat TOML table of documented keys. Unknown keys are rejected;
//! missing keys take per-problem defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{DeltaSchedule, SweepKind, SweepLevel};
use crate::error::{Error, Result};
use crate::fem::ElementKind;
use crate::forms::{BoundarySetup, PhysicalParams};
use crate::levelset::LevelSet;
use crate::mesh::BoundaryTag;
use crate::model::Elements;
use crate::phasefield::Profile;
use crate::stepper::Scheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// Manufactured solution on (0,1)×(0,2), fluid above y = 1.
    Manufactured,
    /// Channel over a porous bed with the interface y = 0.1 sin(4πx).
    SineInterface,
    /// Rectangle, level set, and data given as expressions.
    Custom,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "manufactured_6_1" | "manufactured" => Ok(Self::Manufactured),
            "sine_interface_6_2" | "sine_interface" => Ok(Self::SineInterface),
            "custom" => Ok(Self::Custom),
            _ => Err(Error::config(
                "problem",
                format!("unknown problem `{s}` (expected manufactured_6_1, sine_interface_6_2, custom)"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Manufactured => "manufactured_6_1",
            Self::SineInterface => "sine_interface_6_2",
            Self::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulationKind {
    Diffuse,
    Sharp,
}

/// What the reported errors are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// The closed-form solution (manufactured problem only).
    Exact,
    /// The sharp-interface solution on the same mesh.
    Sharp,
    /// No comparison; error columns stay empty.
    None,
}

/// Fields compared against a sharp reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    /// Stokes velocity and pressure over the sharp fluid region.
    Fluid,
    /// Total velocity and pressure over the whole domain.
    Total,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    /// Built from the problem's rectangle with spacing `h` (interface-aligned for the sine
    /// problem).
    Structured,
    Import(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub levels: usize,
    pub delta_schedule: DeltaSchedule,
}

/// Expression data of a custom problem (functions of x and y, constant in time).
#[derive(Clone, Debug, PartialEq)]
pub struct CustomSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub boundary: BoundarySetup,
    pub forcing: [String; 2],
    pub source: String,
    pub velocity_bc: [String; 2],
    pub darcy_bc: String,
    pub traction: [String; 2],
    pub darcy_flux: String,
    pub initial_velocity: [String; 2],
    pub initial_darcy_pressure: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub formulation: FormulationKind,
    pub mesh: MeshSource,
    pub h: f64,
    pub elements: Elements,
    pub params: PhysicalParams,
    pub profile: Profile,
    pub epsilon: f64,
    pub delta: f64,
    pub levelset: LevelSet,
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub weighted_divergence: bool,
    pub quadrature_degree: usize,
    pub sweep: Option<SweepSpec>,
    pub reference: Reference,
    pub compare: Comparison,
    pub diagnostics: bool,
    pub snapshots: bool,
    pub timing: bool,
    pub inflow_velocity: f64,
    pub custom: Option<CustomSpec>,
    pub output: Option<PathBuf>,
}

/// The file as written; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<String>,
    formulation: Option<String>,
    mesh: Option<String>,
    h: Option<f64>,
    velocity_element: Option<String>,
    darcy_element: Option<String>,
    rho: Option<f64>,
    mu: Option<f64>,
    c0: Option<f64>,
    kappa: Option<Kappa>,
    alpha_bj: Option<f64>,
    profile: Option<String>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    levelset: Option<String>,
    t_final: Option<f64>,
    dt: Option<f64>,
    scheme: Option<String>,
    divergence: Option<String>,
    quadrature_degree: Option<usize>,
    sweep: Option<String>,
    levels: Option<usize>,
    delta_schedule: Option<String>,
    reference: Option<String>,
    compare: Option<String>,
    diagnostics: Option<bool>,
    snapshots: Option<bool>,
    timing: Option<bool>,
    inflow_velocity: Option<f64>,
    output: Option<String>,
    x_range: Option<[f64; 2]>,
    y_range: Option<[f64; 2]>,
    velocity_dirichlet: Option<Vec<String>>,
    darcy_dirichlet: Option<Vec<String>>,
    stokes_neumann: Option<Vec<String>>,
    darcy_neumann: Option<Vec<String>>,
    forcing: Option<[String; 2]>,
    source: Option<String>,
    velocity_bc: Option<[String; 2]>,
    darcy_bc: Option<String>,
    traction: Option<[String; 2]>,
    darcy_flux: Option<String>,
    initial_velocity: Option<[String; 2]>,
    initial_darcy_pressure: Option<String>,
}

/// κ as a scalar multiple of I or a full 2×2 matrix.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Kappa {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

impl RunConfig {
    /// Reads and resolves a config file. Relative import paths are taken relative to the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        if let MeshSource::Import(p) = &cfg.mesh {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.mesh = MeshSource::Import(base.join(p));
            }
        }
        if let MeshSource::Import(p) = &cfg.mesh {
            if !p.is_file() {
                return Err(Error::config("mesh", format!("file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let key = unknown_key(e.message()).unwrap_or_else(|| "config".into());
            Error::config(&key, e.message().trim().to_string())
        })?;
        let cfg = Self::resolve(raw)?;
        cfg.validate()?;
        for (k, v) in cfg.echo() {
            log::info!("config {k} = {v}");
        }
        Ok(cfg)
    }

    /// Defaults of `problem`.
    pub fn defaults(problem: ProblemKind) -> Self {
        let mut cfg = Self {
            problem,
            formulation: FormulationKind::Diffuse,
            mesh: MeshSource::Structured,
            h: 0.2,
            elements: Elements::default(),
            params: PhysicalParams::default(),
            profile: Profile::Tanh,
            epsilon: 0.2,
            delta: 1e-3,
            levelset: LevelSet::Flat { y0: 1.0 },
            t_final: 1.0,
            dt: 0.2,
            scheme: Scheme::BackwardEuler,
            weighted_divergence: true,
            quadrature_degree: crate::fem::DEFAULT_QUADRATURE_DEGREE,
            sweep: None,
            reference: Reference::Exact,
            compare: Comparison::Fluid,
            diagnostics: false,
            snapshots: false,
            timing: true,
            inflow_velocity: 10.0,
            custom: None,
            output: None,
        };
        match problem {
            ProblemKind::Manufactured => {}
            ProblemKind::SineInterface => {
                let channel = crate::problem::ChannelProblem::default();
                cfg.params = crate::problem::ChannelProblem::params();
                cfg.levelset = channel.levelset();
                cfg.h = 1.0 / 32.0;
                cfg.epsilon = 1.0 / 32.0;
                cfg.t_final = 3.0;
                cfg.dt = 1e-2;
                cfg.reference = Reference::Sharp;
                cfg.compare = Comparison::Total;
            }
            ProblemKind::Custom => {
                cfg.levelset = LevelSet::Flat { y0: 0.5 };
                cfg.reference = Reference::None;
                cfg.custom = Some(CustomSpec {
                    x_range: (0.0, 1.0),
                    y_range: (0.0, 1.0),
                    boundary: BoundarySetup {
                        velocity_dirichlet: vec![BoundaryTag::Top],
                        darcy_dirichlet: vec![BoundaryTag::Bottom],
                        stokes_neumann: vec![],
                        darcy_neumann: vec![],
                    },
                    forcing: ["0".into(), "0".into()],
                    source: "0".into(),
                    velocity_bc: ["0".into(), "0".into()],
                    darcy_bc: "0".into(),
                    traction: ["0".into(), "0".into()],
                    darcy_flux: "0".into(),
                    initial_velocity: ["0".into(), "0".into()],
                    initial_darcy_pressure: "0".into(),
                });
            }
        }
        cfg
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let problem = ProblemKind::parse(
            raw.problem
                .as_deref()
                .ok_or_else(|| Error::config("problem", "is required"))?,
        )?;
        let mut c = Self::defaults(problem);
        if let Some(f) = raw.formulation {
            c.formulation = match f.as_str() {
                "diffuse" => FormulationKind::Diffuse,
                "sharp" => FormulationKind::Sharp,
                _ => return Err(Error::config("formulation", format!("expected diffuse or sharp, got `{f}`"))),
            };
        }
        if let Some(m) = raw.mesh {
            c.mesh = match m.as_str() {
                "structured" => MeshSource::Structured,
                path => MeshSource::Import(PathBuf::from(path)),
            };
        }
        if let Some(h) = raw.h {
            c.h = h;
            if raw.epsilon.is_none() && problem != ProblemKind::Custom {
                c.epsilon = h;
            }
            if raw.dt.is_none() && problem == ProblemKind::Manufactured {
                c.dt = h;
            }
        }
        let velocity = match raw.velocity_element.as_deref() {
            None | Some("p2") => ElementKind::P2,
            Some("mini") => ElementKind::P1Bubble,
            Some(v) => return Err(Error::config("velocity_element", format!("expected p2 or mini, got `{v}`"))),
        };
        let darcy = match raw.darcy_element.as_deref() {
            None if velocity == ElementKind::P1Bubble => ElementKind::P1,
            None | Some("p2") => ElementKind::P2,
            Some("p1") => ElementKind::P1,
            Some(v) => return Err(Error::config("darcy_element", format!("expected p1 or p2, got `{v}`"))),
        };
        c.elements = Elements {
            velocity,
            fluid_pressure: ElementKind::P1,
            darcy,
        };
        if let Some(v) = raw.rho {
            c.params.rho = v;
        }
        if let Some(v) = raw.mu {
            c.params.mu = v;
        }
        if let Some(v) = raw.c0 {
            c.params.c0 = v;
        }
        if let Some(v) = raw.alpha_bj {
            c.params.alpha_bjs = v;
        }
        if let Some(k) = raw.kappa {
            c.params.kappa = match k {
                Kappa::Scalar(s) => [[s, 0.0], [0.0, s]],
                Kappa::Matrix(m) => m,
            };
        }
        if let Some(p) = raw.profile {
            c.profile = Profile::parse(&p)?;
        }
        if let Some(v) = raw.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = raw.delta {
            c.delta = v;
        }
        if let Some(ls) = raw.levelset {
            let parsed = LevelSet::parse(&ls).map_err(|e| Error::config("levelset", e.to_string()))?;
            if problem != ProblemKind::Custom && parsed != c.levelset {
                return Err(Error::config("levelset", "is fixed by the benchmark problems; use problem = \"custom\""));
            }
            c.levelset = parsed;
        }
        if let Some(v) = raw.t_final {
            c.t_final = v;
        }
        if let Some(v) = raw.dt {
            c.dt = v;
        }
        if let Some(s) = raw.scheme {
            c.scheme = match s.as_str() {
                "backward_euler" => Scheme::BackwardEuler,
                "midpoint" => Scheme::Midpoint,
                _ => return Err(Error::config("scheme", format!("expected backward_euler or midpoint, got `{s}`"))),
            };
        }
        if let Some(d) = raw.divergence {
            c.weighted_divergence = match d.as_str() {
                "weighted" => true,
                "unweighted" => false,
                _ => return Err(Error::config("divergence", format!("expected weighted or unweighted, got `{d}`"))),
            };
        }
        if let Some(q) = raw.quadrature_degree {
            c.quadrature_degree = q;
        }
        let levels = raw.levels;
        let schedule = match raw.delta_schedule.as_deref() {
            None => DeltaSchedule::Halving,
            Some(s) => DeltaSchedule::parse(s).ok_or_else(|| {
                Error::config("delta_schedule", format!("expected fixed, halving, or epsilon^q, got `{s}`"))
            })?,
        };
        c.sweep = match raw.sweep.as_deref() {
            None | Some("none") => {
                if levels.is_some_and(|l| l != 1) {
                    return Err(Error::config("levels", "requires a sweep"));
                }
                None
            }
            Some(s) => Some(SweepSpec {
                kind: SweepKind::parse(s).ok_or_else(|| {
                    Error::config("sweep", format!("expected none, h, epsilon, or delta, got `{s}`"))
                })?,
                levels: levels.unwrap_or(5),
                delta_schedule: schedule,
            }),
        };
        if let Some(r) = raw.reference {
            c.reference = match r.as_str() {
                "exact" => Reference::Exact,
                "sharp" => Reference::Sharp,
                "none" => Reference::None,
                _ => return Err(Error::config("reference", format!("expected exact, sharp, or none, got `{r}`"))),
            };
        }
        if let Some(v) = raw.compare {
            c.compare = match v.as_str() {
                "fluid" => Comparison::Fluid,
                "total" => Comparison::Total,
                _ => return Err(Error::config("compare", format!("expected fluid or total, got `{v}`"))),
            };
        }
        if let Some(v) = raw.diagnostics {
            c.diagnostics = v;
        }
        if let Some(v) = raw.snapshots {
            c.snapshots = v;
        }
        if let Some(v) = raw.timing {
            c.timing = v;
        }
        if let Some(v) = raw.inflow_velocity {
            if problem != ProblemKind::SineInterface {
                return Err(Error::config("inflow_velocity", "only applies to sine_interface_6_2"));
            }
            c.inflow_velocity = v;
        }
        c.output = raw.output.map(PathBuf::from);

        let custom_keys = [
            ("x_range", raw.x_range.is_some()),
            ("y_range", raw.y_range.is_some()),
            ("velocity_dirichlet", raw.velocity_dirichlet.is_some()),
            ("darcy_dirichlet", raw.darcy_dirichlet.is_some()),
            ("stokes_neumann", raw.stokes_neumann.is_some()),
            ("darcy_neumann", raw.darcy_neumann.is_some()),
            ("forcing", raw.forcing.is_some()),
            ("source", raw.source.is_some()),
            ("velocity_bc", raw.velocity_bc.is_some()),
            ("darcy_bc", raw.darcy_bc.is_some()),
            ("traction", raw.traction.is_some()),
            ("darcy_flux", raw.darcy_flux.is_some()),
            ("initial_velocity", raw.initial_velocity.is_some()),
            ("initial_darcy_pressure", raw.initial_darcy_pressure.is_some()),
        ];
        match c.custom.as_mut() {
            None => {
                if let Some((key, _)) = custom_keys.iter().find(|(_, set)| *set) {
                    return Err(Error::config(key, "only applies to the custom problem"));
                }
            }
            Some(cs) => {
                if let Some(r) = raw.x_range {
                    cs.x_range = (r[0], r[1]);
                }
                if let Some(r) = raw.y_range {
                    cs.y_range = (r[0], r[1]);
                }
                let tags = |v: Vec<String>| v.into_iter().map(BoundaryTag::from).collect::<Vec<_>>();
                if let Some(v) = raw.velocity_dirichlet {
                    cs.boundary.velocity_dirichlet = tags(v);
                }
                if let Some(v) = raw.darcy_dirichlet {
                    cs.boundary.darcy_dirichlet = tags(v);
                }
                if let Some(v) = raw.stokes_neumann {
                    cs.boundary.stokes_neumann = tags(v);
                }
                if let Some(v) = raw.darcy_neumann {
                    cs.boundary.darcy_neumann = tags(v);
                }
                macro_rules! set {
                    ($($f:ident),*) => {$(if let Some(v) = raw.$f { cs.$f = v; })*};
                }
                set!(forcing, source, velocity_bc, darcy_bc, traction, darcy_flux, initial_velocity, initial_darcy_pressure);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        positive("h", self.h)?;
        positive("epsilon", self.epsilon)?;
        positive("t_final", self.t_final)?;
        positive("dt", self.dt)?;
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::config("delta", format!("must lie in (0, 1/2), got {}", self.delta)));
        }
        self.params.validate().map_err(|e| match e {
            Error::NotSpd(_) => Error::config("kappa", e.to_string()),
            Error::Config { key, message } if key == "alpha_bjs" => Error::config("alpha_bj", message),
            e => e,
        })?;
        self.elements.validate()?;
        crate::fem::make_quadrature(self.quadrature_degree)
            .map_err(|e| Error::config("quadrature_degree", e.to_string()))?;
        crate::stepper::TimeGrid::with_step(self.t_final, self.dt, self.scheme)?;
        if let Some(s) = &self.sweep {
            if s.levels == 0 {
                return Err(Error::config("levels", "must be at least 1"));
            }
            if s.kind == SweepKind::HRefinement && matches!(self.mesh, MeshSource::Import(_)) && s.levels > 1 {
                return Err(Error::config("sweep", "h-refinement needs a structured mesh"));
            }
        }
        match self.reference {
            Reference::Exact if self.problem != ProblemKind::Manufactured => {
                return Err(Error::config("reference", "exact errors need the manufactured problem"));
            }
            Reference::Sharp if self.formulation == FormulationKind::Sharp => {
                return Err(Error::config("reference", "a sharp run cannot use a sharp reference"));
            }
            _ => {}
        }
        if let Some(cs) = &self.custom {
            if !(cs.x_range.0 < cs.x_range.1 && cs.y_range.0 < cs.y_range.1) {
                return Err(Error::config("x_range", "ranges must be increasing"));
            }
            for (key, e) in cs.expressions() {
                crate::levelset::Expression::parse(e).map_err(|err| Error::config(key, err.to_string()))?;
            }
        }
        Ok(())
    }

    /// The first sweep level described by the config.
    pub fn base_level(&self) -> SweepLevel {
        SweepLevel {
            level: 0,
            h: self.h,
            dt: self.dt,
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }

    /// All levels to run (a single level without a sweep).
    pub fn levels(&self) -> Vec<SweepLevel> {
        match &self.sweep {
            None => vec![self.base_level()],
            Some(s) => SweepLevel::schedule(s.kind, self.base_level(), s.levels, s.delta_schedule),
        }
    }

    /// Resolved configuration as key/value strings, in the config's own syntax.
    pub fn echo(&self) -> Vec<(String, String)> {
        let q = |s: &str| format!("{s:?}");
        let mut out: Vec<(&str, String)> = vec![
            ("problem", q(self.problem.name())),
            (
                "formulation",
                q(match self.formulation {
                    FormulationKind::Diffuse => "diffuse",
                    FormulationKind::Sharp => "sharp",
                }),
            ),
            (
                "mesh",
                match &self.mesh {
                    MeshSource::Structured => q("structured"),
                    MeshSource::Import(p) => q(&p.display().to_string()),
                },
            ),
            ("h", fmt_f64(self.h)),
            (
                "velocity_element",
                q(if self.elements.velocity == ElementKind::P1Bubble { "mini" } else { "p2" }),
            ),
            ("darcy_element", q(&self.elements.darcy.name().to_lowercase())),
            ("rho", fmt_f64(self.params.rho)),
            ("mu", fmt_f64(self.params.mu)),
            ("c0", fmt_f64(self.params.c0)),
            (
                "kappa",
                format!(
                    "[[{}, {}], [{}, {}]]",
                    fmt_f64(self.params.kappa[0][0]),
                    fmt_f64(self.params.kappa[0][1]),
                    fmt_f64(self.params.kappa[1][0]),
                    fmt_f64(self.params.kappa[1][1])
                ),
            ),
            ("alpha_bj", fmt_f64(self.params.alpha_bjs)),
            ("profile", q(&self.profile.to_string())),
            ("epsilon", fmt_f64(self.epsilon)),
            ("delta", fmt_f64(self.delta)),
            ("levelset", q(&self.levelset.to_string())),
            ("t_final", fmt_f64(self.t_final)),
            ("dt", fmt_f64(self.dt)),
            ("scheme", q(self.scheme.name())),
            ("divergence", q(if self.weighted_divergence { "weighted" } else { "unweighted" })),
            ("quadrature_degree", self.quadrature_degree.to_string()),
        ];
        match &self.sweep {
            None => out.push(("sweep", q("none"))),
            Some(s) => {
                let kind = match s.kind {
                    SweepKind::HRefinement => "h",
                    SweepKind::Epsilon => "epsilon",
                    SweepKind::Delta => "delta",
                };
                out.push(("sweep", q(kind)));
                out.push(("levels", s.levels.to_string()));
                out.push(("delta_schedule", q(&s.delta_schedule.to_string())));
            }
        }
        out.push((
            "reference",
            q(match self.reference {
                Reference::Exact => "exact",
                Reference::Sharp => "sharp",
                Reference::None => "none",
            }),
        ));
        out.push((
            "compare",
            q(match self.compare {
                Comparison::Fluid => "fluid",
                Comparison::Total => "total",
            }),
        ));
        out.push(("diagnostics", self.diagnostics.to_string()));
        out.push(("snapshots", self.snapshots.to_string()));
        out.push(("timing", self.timing.to_string()));
        if self.problem == ProblemKind::SineInterface {
            out.push(("inflow_velocity", fmt_f64(self.inflow_velocity)));
        }
        if let Some(cs) = &self.custom {
            out.push(("x_range", format!("[{}, {}]", fmt_f64(cs.x_range.0), fmt_f64(cs.x_range.1))));
            out.push(("y_range", format!("[{}, {}]", fmt_f64(cs.y_range.0), fmt_f64(cs.y_range.1))));
            let tags = |v: &[BoundaryTag]| {
                let inner: Vec<String> = v.iter().map(|t| q(t.name())).collect();
                format!("[{}]", inner.join(", "))
            };
            out.push(("velocity_dirichlet", tags(&cs.boundary.velocity_dirichlet)));
            out.push(("darcy_dirichlet", tags(&cs.boundary.darcy_dirichlet)));
            out.push(("stokes_neumann", tags(&cs.boundary.stokes_neumann)));
            out.push(("darcy_neumann", tags(&cs.boundary.darcy_neumann)));
            let pair = |v: &[String; 2]| format!("[{}, {}]", q(&v[0]), q(&v[1]));
            out.push(("forcing", pair(&cs.forcing)));
            out.push(("source", q(&cs.source)));
            out.push(("velocity_bc", pair(&cs.velocity_bc)));
            out.push(("darcy_bc", q(&cs.darcy_bc)));
            out.push(("traction", pair(&cs.traction)));
            out.push(("darcy_flux", q(&cs.darcy_flux)));
            out.push(("initial_velocity", pair(&cs.initial_velocity)));
            out.push(("initial_darcy_pressure", q(&cs.initial_darcy_pressure)));
        }
        if let Some(o) = &self.output {
            out.push(("output", q(&o.display().to_string())));
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl CustomSpec {
    fn expressions(&self) -> Vec<(&'static str, &str)> {
        vec![
            ("forcing", &self.forcing[0]),
            ("forcing", &self.forcing[1]),
            ("source", &self.source),
            ("velocity_bc", &self.velocity_bc[0]),
            ("velocity_bc", &self.velocity_bc[1]),
            ("darcy_bc", &self.darcy_bc),
            ("traction", &self.traction[0]),
            ("traction", &self.traction[1]),
            ("darcy_flux", &self.darcy_flux),
            ("initial_velocity", &self.initial_velocity[0]),
            ("initial_velocity", &self.initial_velocity[1]),
            ("initial_darcy_pressure", &self.initial_darcy_pressure),
        ]
    }
}

impl fmt::Display for RunConfig {
    /// The resolved config in re-parseable form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.echo() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Shortest round-trip float that TOML reads back as a float.
fn fmt_f64(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// Extracts the key from serde's "unknown field `x`" message.
fn unknown_key(msg: &str) -> Option<String> {
    let rest = msg.split("unknown field `").nth(1)?;
    rest.split('`').next().map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_manufactured_config_takes_defaults() {
        let c = RunConfig::parse("problem = \"manufactured_6_1\"").unwrap();
        assert_eq!(c.params, PhysicalParams::default());
        assert_eq!((c.h, c.dt, c.epsilon, c.delta, c.t_final), (0.2, 0.2, 0.2, 1e-3, 1.0));
        assert_eq!(c.levels().len(), 1);
    }

    #[test]
    fn sine_defaults() {
        let c = RunConfig::parse("problem = \"sine_interface_6_2\"").unwrap();
        assert_eq!(c.params.mu, 0.035);
        assert_eq!(c.params.c0, 1e-3);
        assert_eq!(c.params.kappa, [[1e-5, 0.0], [0.0, 1e-5]]);
        assert_eq!(c.params.alpha_bjs, 1e3);
        assert_eq!((c.inflow_velocity, c.t_final, c.dt), (10.0, 3.0, 1e-2));
    }

    #[test]
    fn range_and_unknown_key_errors_name_the_key() {
        let e = RunConfig::parse("problem = \"manufactured_6_1\"\ndelta = 0.7").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "delta"), "{e}");
        let e = RunConfig::parse("problem = \"manufactured_6_1\"\nviscosity = 2.0").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "viscosity"), "{e}");
        let e = RunConfig::parse("problem = \"manufactured_6_1\"\nsource = \"x\"").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "source"), "{e}");
    }

    #[test]
    fn h_couples_dt_and_epsilon_for_the_manufactured_problem() {
        let c = RunConfig::parse("problem = \"manufactured_6_1\"\nh = 0.1\nsweep = \"h\"\nlevels = 3").unwrap();
        let l = c.levels();
        assert_eq!(l.len(), 3);
        assert_eq!((l[0].dt, l[0].epsilon), (0.1, 0.1));
        assert_eq!(l[2].delta, 2.5e-4);
    }

    #[test]
    fn echo_round_trips() {
        let text = "problem = \"custom\"\nkappa = 0.5\nforcing = [\"x\", \"y*y\"]\nvelocity_dirichlet = [\"top\", \"left\"]\nlevelset = \"flat(0.25)\"";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_string()).unwrap();
        assert_eq!(c, again);
        let m = RunConfig::parse("problem = \"manufactured_6_1\"\nsweep = \"epsilon\"\nprofile = \"power(0.5)\"").unwrap();
        assert_eq!(m, RunConfig::parse(&m.to_string()).unwrap());
    }
}
