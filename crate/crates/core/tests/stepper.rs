use std::sync::Arc;

use stokes_darcy::analysis::{ManufacturedCase, RandomData};
use stokes_darcy::forms::{AssemblyOptions, BoundarySetup, PhysicalParams, ProblemData};
use stokes_darcy::mesh::{BoundaryTag, Point};
use stokes_darcy::model::{CoupledModel, Elements};
use stokes_darcy::phasefield::{PhaseField, Profile, UniformPhase};
use stokes_darcy::problem::manufactured_mesh;
use stokes_darcy::stepper::{init_state, Scheme, SolutionState, Stepper, TimeGrid};

fn manufactured_model(h: f64) -> CoupledModel {
    let pf = PhaseField::new(0.2, 1e-3, Profile::Tanh, ManufacturedCase::levelset()).unwrap();
    CoupledModel::diffuse(
        manufactured_mesh(h).unwrap(),
        Elements::default(),
        pf,
        PhysicalParams::default(),
        AssemblyOptions::default(),
        ManufacturedCase::boundary_setup(),
    )
    .unwrap()
}

#[test]
fn restart_from_saved_state_is_bitwise_identical() {
    let model = manufactured_model(0.25);
    let data = RandomData::new(11, ManufacturedCase::boundary_setup());
    for scheme in [Scheme::BackwardEuler, Scheme::Midpoint] {
        let grid = TimeGrid::new(0.6, 6, scheme).unwrap();
        let stepper = Stepper::new(&model, &data, grid).unwrap();
        let (full, _) = stepper.run(init_state(&model, &data)).unwrap();

        let (half, _) = stepper.advance(init_state(&model, &data), 3, |_, _| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        half.save(&path).unwrap();
        let resumed = SolutionState::load(&path).unwrap();
        assert_eq!(resumed, half);
        let (rest, _) = stepper.run(resumed).unwrap();

        assert_eq!(rest.step, 6);
        assert_eq!(rest.time.to_bits(), full.time.to_bits());
        let bits = |s: &SolutionState| s.to_vector().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&rest), bits(&full), "{scheme}");
    }
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

#[test]
fn one_step_run_matches_a_direct_dense_solve() {
    let model = manufactured_model(0.5);
    let case = ManufacturedCase::new(PhysicalParams::default());
    let dt = 0.3;
    let grid = TimeGrid::new(dt, 1, Scheme::BackwardEuler).unwrap();
    let stepper = Stepper::new(&model, &case, grid).unwrap();
    let x0 = init_state(&model, &case);
    let (x1, diags) = stepper.run(x0.clone()).unwrap();
    assert_eq!(diags.len(), 1);
    assert_eq!(x1.step, 1);

    let ops = &model.ops;
    let mut a = ops.system_matrix(dt).to_dense();
    let (fu, fp) = model.loads(&case, dt).unwrap();
    let mut b = ops.step_rhs(dt, &x0.to_vector(), &fu, &fp);
    let fixed = model.fixed_dofs();
    let g = model.dirichlet_values(&fixed, &case, dt);
    for (&i, v) in fixed.iter().zip(&g) {
        a[i] = vec![0.0; b.len()];
        a[i][i] = 1.0;
        b[i] = *v;
    }
    let expected = dense_solve(a, b);
    let got = x1.to_vector();
    let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (e, g) in expected.iter().zip(&got) {
        assert!((e - g).abs() <= 1e-9 * scale, "{e} vs {g}");
    }
}

/// u = tU, π = tΠ, p = tP with U = (y², x²), Π = x + y, P = x² − y² + xy, all in the discrete
/// spaces, on constant phases Φ = 0.6, Ψ = 0.4 with unit parameters. Then
/// F = U − tΔU + t∇Π = (y² − t, x² − t) and g = P (P is harmonic).
struct LinearInTime;

impl ProblemData for LinearInTime {
    fn forcing(&self, p: Point, t: f64) -> [f64; 2] {
        [p[1] * p[1] - t, p[0] * p[0] - t]
    }
    fn source(&self, p: Point, _: f64) -> f64 {
        p[0] * p[0] - p[1] * p[1] + p[0] * p[1]
    }
    fn velocity_boundary(&self, p: Point, t: f64) -> [f64; 2] {
        [t * p[1] * p[1], t * p[0] * p[0]]
    }
    fn darcy_boundary(&self, p: Point, t: f64) -> f64 {
        t * self.source(p, t)
    }
    fn traction(&self, p: Point, t: f64, n: [f64; 2]) -> [f64; 2] {
        // σ = 2D(u) − πI with D(U) = [[0, x + y], [x + y, 0]].
        let s = p[0] + p[1];
        let sigma = [[-t * s, 2.0 * t * s], [2.0 * t * s, -t * s]];
        [sigma[0][0] * n[0] + sigma[0][1] * n[1], sigma[1][0] * n[0] + sigma[1][1] * n[1]]
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
    fn initial_fluid_pressure(&self, _: Point) -> Option<f64> {
        Some(0.0)
    }
    fn boundary(&self) -> BoundarySetup {
        BoundarySetup {
            velocity_dirichlet: vec![BoundaryTag::Bottom, BoundaryTag::Left, BoundaryTag::Right],
            darcy_dirichlet: vec![BoundaryTag::Bottom, BoundaryTag::Top, BoundaryTag::Left, BoundaryTag::Right],
            stokes_neumann: vec![BoundaryTag::Top],
            darcy_neumann: vec![],
        }
    }
}

#[test]
fn fields_linear_in_time_are_reproduced_exactly() {
    let data = LinearInTime;
    let model = CoupledModel::with_weight(
        manufactured_mesh(0.25).unwrap(),
        Elements::default(),
        Arc::new(UniformPhase(0.6)),
        PhysicalParams::default(),
        AssemblyOptions::default(),
        data.boundary(),
    )
    .unwrap();
    let t_final = 0.8;
    let d = &model.disc;
    let u = d.velocity.interpolate_vector(|p| [t_final * p[1] * p[1], t_final * p[0] * p[0]]);
    let pi = d.fluid_pressure.interpolate_scalar(|p| t_final * (p[0] + p[1]));
    let p = d.darcy.interpolate_scalar(|p| t_final * data.source(p, 0.0));
    for scheme in [Scheme::Midpoint, Scheme::BackwardEuler] {
        let grid = TimeGrid::new(t_final, 4, scheme).unwrap();
        let stepper = Stepper::new(&model, &data, grid).unwrap();
        let (state, _) = stepper.run(init_state(&model, &data)).unwrap();
        let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(dev(&state.u, &u) < 1e-10, "{scheme}: u off by {:e}", dev(&state.u, &u));
        assert!(dev(&state.pi, &pi) < 1e-10, "{scheme}: pi off by {:e}", dev(&state.pi, &pi));
        assert!(dev(&state.p, &p) < 1e-10, "{scheme}: p off by {:e}", dev(&state.p, &p));
    }
}
