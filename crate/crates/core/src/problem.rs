//! Benchmark problem definitions: domains, level sets, boundary assignments, and data.

use std::sync::Arc;

use crate::error::Result;
use crate::forms::{BoundarySetup, PhysicalParams, ProblemData};
use crate::levelset::{Expression, LevelSet};
use crate::mesh::{build_interface_aligned, build_uniform, BoundaryTag, Point, RectangleSpec, TriMesh};

/// Structured mesh of the manufactured-solution domain (0,1)×(0,2) with spacing `h`.
pub fn manufactured_mesh(h: f64) -> Result<Arc<TriMesh>> {
    let spec = RectangleSpec::with_spacing((0.0, 1.0), (0.0, 2.0), h);
    Ok(Arc::new(build_uniform(&spec)?))
}

/// Channel over a porous bed on (0,1)×(−1,1): fluid below the sine interface
/// `y = 0.1 sin(4πx)`, parabolic inflow through the fluid part of the left side.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProblem {
    pub u_in: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
}

impl Default for ChannelProblem {
    fn default() -> Self {
        Self {
            u_in: 10.0,
            amplitude: 0.1,
            wavenumber: 4.0,
        }
    }
}

impl ChannelProblem {
    pub const X_RANGE: (f64, f64) = (0.0, 1.0);
    pub const Y_RANGE: (f64, f64) = (-1.0, 1.0);

    /// Physical parameters of the channel benchmark.
    pub fn params() -> PhysicalParams {
        PhysicalParams {
            rho: 1.0,
            mu: 0.035,
            c0: 1e-3,
            kappa: [[1e-5, 0.0], [0.0, 1e-5]],
            alpha_bjs: 1e3,
        }
    }

    /// `−y + a sin(kπx)`, positive in the fluid.
    pub fn levelset(&self) -> LevelSet {
        LevelSet::Sine {
            a: self.amplitude,
            k: self.wavenumber,
            y0: 0.0,
        }
    }

    pub fn boundary_setup() -> BoundarySetup {
        BoundarySetup {
            velocity_dirichlet: vec![BoundaryTag::Left, BoundaryTag::Bottom],
            darcy_dirichlet: vec![BoundaryTag::Top],
            stokes_neumann: vec![],
            darcy_neumann: vec![],
        }
    }

    /// Structured `nx × ny` mesh (ny even) whose middle grid row follows the interface.
    pub fn aligned_mesh(&self, nx: usize, ny: usize) -> Result<TriMesh> {
        let spec = RectangleSpec::new(Self::X_RANGE, Self::Y_RANGE, nx, ny);
        let (a, k) = (self.amplitude, self.wavenumber);
        build_interface_aligned(&spec, ny / 2, move |x| a * (k * std::f64::consts::PI * x).sin())
    }

    fn inflow(&self, p: Point) -> [f64; 2] {
        let y = p[1];
        if y < 0.0 {
            [-self.u_in * y * (1.0 + y) / 0.25, 0.0]
        } else {
            [0.0, 0.0]
        }
    }
}

impl ProblemData for ChannelProblem {
    fn forcing(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn source(&self, _: Point, _: f64) -> f64 {
        0.0
    }

    /// Parabolic profile on the left side, no-slip elsewhere.
    fn velocity_boundary(&self, p: Point, _: f64) -> [f64; 2] {
        if p[0] <= Self::X_RANGE.0 + 1e-12 {
            self.inflow(p)
        } else {
            [0.0; 2]
        }
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
        Self::boundary_setup()
    }
}

/// Time-independent data given as expressions in x and y.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionProblem {
    pub boundary: BoundarySetup,
    pub forcing: [Expression; 2],
    pub source: Expression,
    pub velocity_bc: [Expression; 2],
    pub darcy_bc: Expression,
    /// Traction vector σn on Stokes Neumann sides.
    pub traction: [Expression; 2],
    pub darcy_flux: Expression,
    pub initial_velocity: [Expression; 2],
    pub initial_darcy_pressure: Expression,
}

impl ProblemData for ExpressionProblem {
    fn forcing(&self, p: Point, _: f64) -> [f64; 2] {
        [self.forcing[0].eval(p), self.forcing[1].eval(p)]
    }

    fn source(&self, p: Point, _: f64) -> f64 {
        self.source.eval(p)
    }

    fn velocity_boundary(&self, p: Point, _: f64) -> [f64; 2] {
        [self.velocity_bc[0].eval(p), self.velocity_bc[1].eval(p)]
    }

    fn darcy_boundary(&self, p: Point, _: f64) -> f64 {
        self.darcy_bc.eval(p)
    }

    fn traction(&self, p: Point, _: f64, _: [f64; 2]) -> [f64; 2] {
        [self.traction[0].eval(p), self.traction[1].eval(p)]
    }

    fn darcy_flux(&self, p: Point, _: f64, _: [f64; 2]) -> f64 {
        self.darcy_flux.eval(p)
    }

    fn initial_velocity(&self, p: Point) -> [f64; 2] {
        [self.initial_velocity[0].eval(p), self.initial_velocity[1].eval(p)]
    }

    fn initial_darcy_pressure(&self, p: Point) -> f64 {
        self.initial_darcy_pressure.eval(p)
    }

    fn boundary(&self) -> BoundarySetup {
        self.boundary.clone()
    }
}
