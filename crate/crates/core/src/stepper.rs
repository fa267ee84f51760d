//! Time stepping: backward Euler, and the extrapolated midpoint scheme (a backward-Euler
//! half step followed by `x^{n+1} = 2x^{n+½} − x^n`). The operator is factored once.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Layout, ProblemData};
use crate::model::CoupledModel;
use crate::sparse::{dot, norm2, ConstrainedSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    Midpoint,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "backward_euler" | "be" => Some(Scheme::BackwardEuler),
            "midpoint" => Some(Scheme::Midpoint),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::BackwardEuler => "backward_euler",
            Scheme::Midpoint => "midpoint",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniform grid `t_n = n T / N`, `n = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize, scheme: Scheme) -> Result<Self> {
        let g = Self {
            t_final,
            n_steps,
            scheme,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with `N = round(T / dt)`; `dt` must divide `T` to within 1e-9 relative.
    pub fn with_step(t_final: f64, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", format!("must be positive, got {dt}")));
        }
        let n = (t_final / dt).round();
        if n < 1.0 || ((n * dt - t_final) / t_final).abs() > 1e-9 {
            return Err(Error::config(
                "dt",
                format!("{dt} does not divide the final time {t_final}"),
            ));
        }
        Self::new(t_final, n as usize, scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// `t_n`, computed from the index so restarted runs see identical times.
    pub fn time(&self, n: usize) -> f64 {
        (n as f64 / self.n_steps as f64) * self.t_final
    }

    /// Length of the implicit substep.
    pub fn tau(&self) -> f64 {
        match self.scheme {
            Scheme::BackwardEuler => self.dt(),
            Scheme::Midpoint => 0.5 * self.dt(),
        }
    }

    /// Time at which data of step `n → n+1` are evaluated.
    pub fn data_time(&self, n: usize) -> f64 {
        match self.scheme {
            Scheme::BackwardEuler => self.time(n + 1),
            Scheme::Midpoint => 0.5 * (self.time(n) + self.time(n + 1)),
        }
    }
}

/// Coefficients of `u`, `π` (or `θ = πΦ` for the unweighted divergence), and `p` at `t_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub step: usize,
    pub time: f64,
    pub u: Vec<f64>,
    pub pi: Vec<f64>,
    pub p: Vec<f64>,
}

impl SolutionState {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            step: 0,
            time: 0.0,
            u: vec![0.0; layout.n_u],
            pi: vec![0.0; layout.n_pi],
            p: vec![0.0; layout.n_p],
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        [&self.u[..], &self.pi, &self.p].concat()
    }

    pub fn from_vector(layout: Layout, x: &[f64], step: usize, time: f64) -> Self {
        Self {
            step,
            time,
            u: layout.u(x).to_vec(),
            pi: layout.pi(x).to_vec(),
            p: layout.p(x).to_vec(),
        }
    }

    pub fn check(&self, layout: Layout) -> Result<()> {
        if (self.u.len(), self.pi.len(), self.p.len()) != (layout.n_u, layout.n_pi, layout.n_p) {
            return Err(Error::Parameter(format!(
                "state sizes ({}, {}, {}) do not match the spaces ({}, {}, {})",
                self.u.len(),
                self.pi.len(),
                self.p.len(),
                layout.n_u,
                layout.n_pi,
                layout.n_p
            )));
        }
        if !self.to_vector().iter().all(|v| v.is_finite()) {
            return Err(Error::Solver(format!("non-finite values in state at step {}", self.step)));
        }
        Ok(())
    }

    /// Writes the state as JSON; floats round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(f))
            .map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Nodal interpolation of the initial data; π starts from the known initial pressure when
/// the problem supplies one and from zero otherwise.
pub fn init_state(model: &CoupledModel, data: &dyn ProblemData) -> SolutionState {
    let d = &model.disc;
    let u = d.velocity.interpolate_vector(|x| data.initial_velocity(x));
    let p = d.darcy.interpolate_scalar(|x| data.initial_darcy_pressure(x));
    let weighted = model.options.weighted_divergence;
    let pi = d.fluid_pressure.interpolate_scalar(|x| match data.initial_fluid_pressure(x) {
        Some(v) if weighted => v,
        Some(v) => v * model.weight_u().eval(x).phi,
        None => 0.0,
    });
    SolutionState {
        step: 0,
        time: 0.0,
        u,
        pi,
        p,
    }
}

/// Per-step diagnostics. The energy identity is that of the implicit (sub)step:
/// `[½(‖u¹‖² − ‖u⁰‖² + ‖u¹ − u⁰‖²)_ρΦ + ½(same for p)_c₀Ψ]/τ + 2μ‖Du¹‖²_Φ + α‖u¹·τ̃‖²_|∇Φ|
/// + ‖κ^½∇p¹‖²_Ψ = ρ(F, u¹)_Φ + (g, p¹)_Ψ + boundary work`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `½(ρ‖u‖²_Φ + c₀‖p‖²_Ψ)` at the new time level.
    pub energy: f64,
    pub viscous_dissipation: f64,
    pub darcy_dissipation: f64,
    pub bjs_dissipation: f64,
    pub energy_identity_residual: f64,
    /// `max_q |(B u)_q| / ‖u‖`.
    pub div_residual: f64,
    pub solver_residual: f64,
    /// Largest deviation of constrained unknowns from their Dirichlet data at `t`.
    pub bc_residual: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "step,t,energy,viscous_dissipation,darcy_dissipation,bjs_dissipation,energy_identity_residual,div_residual";

pub fn write_diagnostics_csv(rows: &[StepDiagnostics], mut w: impl Write) -> Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.step,
            r.t,
            r.energy,
            r.viscous_dissipation,
            r.darcy_dissipation,
            r.bjs_dissipation,
            r.energy_identity_residual,
            r.div_residual
        )?;
    }
    Ok(())
}

/// Factored stepper for one model, data set, and time grid.
pub struct Stepper<'a> {
    model: &'a CoupledModel,
    data: &'a dyn ProblemData,
    grid: TimeGrid,
    tau: f64,
    matrix: crate::sparse::CsrMatrix,
    solver: ConstrainedSolver,
}

impl fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper")
            .field("grid", &self.grid)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

/// Result of one implicit substep.
#[derive(Clone, Debug)]
pub struct Substep {
    pub x: Vec<f64>,
    pub rhs: Vec<f64>,
    pub loads: (Vec<f64>, Vec<f64>),
    pub solver_residual: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a CoupledModel, data: &'a dyn ProblemData, grid: TimeGrid) -> Result<Self> {
        grid.validate()?;
        let tau = grid.tau();
        let matrix = model.ops.system_matrix(tau);
        let solver = ConstrainedSolver::new(&matrix, model.fixed_dofs())?;
        log::debug!(
            "factored {} unknowns ({} constrained), tau = {tau}",
            matrix.nrows,
            solver.fixed().len()
        );
        Ok(Self {
            model,
            data,
            grid,
            tau,
            matrix,
            solver,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The implicit system matrix `M/τ + 𝒜` before constraints.
    pub fn matrix(&self) -> &crate::sparse::CsrMatrix {
        &self.matrix
    }

    /// Dirichlet values imposed by the substep of step `n → n+1`. For the midpoint scheme this
    /// is `½(g(tₙ) + g(tₙ₊₁))`, so that extrapolation lands exactly on `g(tₙ₊₁)`.
    pub fn dirichlet_values(&self, n: usize) -> Vec<f64> {
        let fixed = self.solver.fixed();
        match self.grid.scheme {
            Scheme::BackwardEuler => self.model.dirichlet_values(fixed, self.data, self.grid.time(n + 1)),
            Scheme::Midpoint => {
                let a = self.model.dirichlet_values(fixed, self.data, self.grid.time(n));
                let b = self.model.dirichlet_values(fixed, self.data, self.grid.time(n + 1));
                a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    /// The backward-Euler substep of step `n → n+1` (length τ, loads at the grid's data time).
    pub fn substep(&self, x_old: &[f64], n: usize) -> Result<Substep> {
        let (fu, fp) = self.model.loads(self.data, self.grid.data_time(n))?;
        let rhs = self.model.ops.step_rhs(self.tau, x_old, &fu, &fp);
        let g = self.dirichlet_values(n);
        let (x, solver_residual) = self.solver.solve(&rhs, &g)?;
        Ok(Substep {
            x,
            rhs,
            loads: (fu, fp),
            solver_residual,
        })
    }

    /// Advances `state` by one step of the grid.
    pub fn step(&self, state: &SolutionState) -> Result<(SolutionState, StepDiagnostics)> {
        let layout = self.model.layout();
        state.check(layout)?;
        let n = state.step;
        if n >= self.grid.n_steps {
            return Err(Error::Parameter(format!(
                "state is at step {n}, the grid has {} steps",
                self.grid.n_steps
            )));
        }
        let x0 = state.to_vector();
        let sub = self.substep(&x0, n)?;
        let identity = self.energy_identity(&x0, &sub);
        let x_new: Vec<f64> = match self.grid.scheme {
            Scheme::BackwardEuler => sub.x.clone(),
            Scheme::Midpoint => sub.x.iter().zip(&x0).map(|(h, o)| 2.0 * h - o).collect(),
        };

        let t_new = self.grid.time(n + 1);
        let new_state = SolutionState::from_vector(layout, &x_new, n + 1, t_new);
        new_state.check(layout)?;

        let ops = &self.model.ops;
        let u = layout.u(&x_new);
        let p = layout.p(&x_new);
        let energy = 0.5 * (ops.velocity_mass.bilinear(u, u) + ops.darcy_mass.bilinear(p, p));
        let bu = ops.divergence.matvec(u);
        let u_norm = norm2(u);
        let div_residual = if u_norm > 0.0 {
            bu.iter().fold(0.0f64, |m, v| m.max(v.abs())) / u_norm
        } else {
            0.0
        };
        let g = self.model.dirichlet_values(self.solver.fixed(), self.data, t_new);
        let bc_residual = self
            .solver
            .fixed()
            .iter()
            .zip(&g)
            .fold(0.0f64, |m, (&i, v)| m.max((x_new[i] - v).abs()));
        let diag = StepDiagnostics {
            step: n + 1,
            t: t_new,
            energy,
            viscous_dissipation: identity.viscous,
            darcy_dissipation: identity.darcy,
            bjs_dissipation: identity.bjs,
            energy_identity_residual: identity.relative_residual(),
            div_residual,
            solver_residual: sub.solver_residual,
            bc_residual,
        };
        log::trace!("{diag:?}");
        Ok((new_state, diag))
    }

    /// Runs `n` steps from `state`, calling `observe` after each.
    pub fn advance(
        &self,
        state: SolutionState,
        n: usize,
        mut observe: impl FnMut(&SolutionState, &StepDiagnostics),
    ) -> Result<(SolutionState, Vec<StepDiagnostics>)> {
        let mut state = state;
        let mut diags = Vec::with_capacity(n);
        for _ in 0..n {
            let (next, d) = self.step(&state)?;
            observe(&next, &d);
            diags.push(d);
            state = next;
        }
        Ok((state, diags))
    }

    /// Runs to the end of the grid.
    pub fn run(&self, state: SolutionState) -> Result<(SolutionState, Vec<StepDiagnostics>)> {
        let remaining = self.grid.n_steps.saturating_sub(state.step);
        self.advance(state, remaining, |_, _| {})
    }

    /// Evaluates every term of the substep energy identity from the operator blocks.
    pub fn energy_identity(&self, x0: &[f64], sub: &Substep) -> EnergyBalance {
        let l = self.model.layout();
        let ops = &self.model.ops;
        let x1 = &sub.x;
        let (u0, u1) = (l.u(x0), l.u(x1));
        let (p0, p1) = (l.p(x0), l.p(x1));
        let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| a - b).collect();
        let m = &ops.velocity_mass;
        let mp = &ops.darcy_mass;
        let (e0u, e1u) = (m.bilinear(u0, u0), m.bilinear(u1, u1));
        let (e0p, e1p) = (mp.bilinear(p0, p0), mp.bilinear(p1, p1));
        let kinetic = 0.5 * (e1u - e0u + m.bilinear(&du, &du));
        let storage = 0.5 * (e1p - e0p + mp.bilinear(&dp, &dp));
        let ax = self.matrix.matvec(x1);
        let reaction: f64 = self
            .solver
            .fixed()
            .iter()
            .map(|&i| x1[i] * (ax[i] - sub.rhs[i]))
            .sum();
        EnergyBalance {
            tau: self.tau,
            kinetic,
            storage,
            viscous: ops.viscous.bilinear(u1, u1),
            bjs: ops.bjs.bilinear(u1, u1),
            darcy: ops.darcy_stiffness.bilinear(p1, p1),
            work: dot(&sub.loads.0, u1) + dot(&sub.loads.1, p1),
            boundary_reaction: reaction,
            energy_scale: 0.5 * (e0u + e1u + e0p + e1p),
        }
    }
}

/// Terms of the per-substep energy identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBalance {
    pub tau: f64,
    pub kinetic: f64,
    pub storage: f64,
    pub viscous: f64,
    pub bjs: f64,
    pub darcy: f64,
    /// Load work, including Neumann terms.
    pub work: f64,
    /// Work of the reactions at constrained unknowns (zero for homogeneous Dirichlet data).
    pub boundary_reaction: f64,
    energy_scale: f64,
}

impl EnergyBalance {
    pub fn lhs(&self) -> f64 {
        (self.kinetic + self.storage) / self.tau + self.viscous + self.bjs + self.darcy
    }

    pub fn rhs(&self) -> f64 {
        self.work + self.boundary_reaction
    }

    /// `|lhs − rhs|` relative to the largest term.
    pub fn relative_residual(&self) -> f64 {
        let scale = [
            self.kinetic / self.tau,
            self.storage / self.tau,
            self.energy_scale / self.tau,
            self.viscous,
            self.bjs,
            self.darcy,
            self.work,
            self.boundary_reaction,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_times_are_exact_at_the_ends() {
        let g = TimeGrid::new(1.0, 80, Scheme::Midpoint).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(80), 1.0);
        assert_eq!(g.tau(), 0.5 / 80.0);
        assert!(TimeGrid::with_step(3.0, 1e-2, Scheme::BackwardEuler).unwrap().n_steps == 300);
        assert!(TimeGrid::with_step(1.0, 0.3, Scheme::BackwardEuler).is_err());
        assert!(TimeGrid::new(1.0, 0, Scheme::BackwardEuler).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::BackwardEuler, Scheme::Midpoint] {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
    }
}
