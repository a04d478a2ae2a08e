use detumble_core::dynamics::{euler_rates, single_axis_torque, InertiaTensor};
use detumble_core::nmpc::continuation::{initialization_tolerance, residual_jacobian, seed_solution};
use detumble_core::nmpc::horizon::norm;
use detumble_core::nmpc::*;
use nalgebra::{DMatrix, DVector, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const M_MAX: f64 = 10.0;
const FIELD: Vector3<f64> = Vector3::new(1.2e-5, -2.1e-5, 1.7e-5);

fn problem(w: &Vector3<f64>, horizon: f64, steps: usize) -> HorizonProblem {
    HorizonProblem::with_constant_field(
        InertiaTensor::QLI,
        M_MAX,
        select_weights(w, &WeightSchedule::default()),
        HorizonConfig { horizon, steps },
        FIELD,
    )
}

fn params(zeta: f64, dt: f64, dim: usize) -> ContinuationParams {
    ContinuationParams {
        zeta,
        fd_step: 1e-6,
        sampling_period: dt,
        gmres_max_iters: dim,
        gmres_tol: 1e-12,
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

#[test]
fn gmres_agrees_with_lu_on_random_systems() {
    let mut rng = StdRng::seed_from_u64(51);
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        // Diagonally dominant, hence well conditioned.
        let a = DMatrix::from_fn(n, n, |i, j| {
            let off = rng.random_range(-1.0..1.0);
            if i == j {
                n as f64 + 1.0 + off
            } else {
                off
            }
        });
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let direct = a.clone().lu().solve(&b).unwrap();
        let out = gmres_solve(
            |x| (&a * DVector::from_column_slice(x)).as_slice().to_vec(),
            b.as_slice(),
            n,
            0.0,
        );
        assert!(!out.breakdown);
        assert!(rel_diff(&out.x, direct.as_slice()) < 1e-8, "n={n}");
        let true_res = (&b - &a * DVector::from_column_slice(&out.x)).norm();
        assert!((out.residual_norm - true_res).abs() < 1e-10);
    }
}

#[test]
fn gmres_warm_start_reaches_the_same_solution() {
    let mut rng = StdRng::seed_from_u64(52);
    let n = 12;
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 5.0 } else { rng.random_range(-0.5..0.5) });
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let direct = a.clone().lu().solve(&b).unwrap();
    let guess: Vec<f64> = direct.iter().map(|x| x + 0.01).collect();
    let out = gmres_solve_from(
        |x| (&a * DVector::from_column_slice(x)).as_slice().to_vec(),
        b.as_slice(),
        &guess,
        n,
        0.0,
    );
    assert!(rel_diff(&out.x, direct.as_slice()) < 1e-10);
}

/// `dU/dt` from a dense central-difference Jacobian of the residual.
fn dense_rate(u: &SolutionVector, w: &Vector3<f64>, w_rate: &Vector3<f64>, zeta: f64, p: &HorizonProblem) -> Vec<f64> {
    let f = DVector::from_vec(kkt_residual(u, w, p));
    let jac = residual_jacobian(u, w, p);
    let mut f_w = DMatrix::zeros(p.dim(), 3);
    for k in 0..3 {
        let h = 1e-6;
        let mut wp = *w;
        let mut wm = *w;
        wp[k] += h;
        wm[k] -= h;
        let col = (DVector::from_vec(kkt_residual(u, &wp, p)) - DVector::from_vec(kkt_residual(u, &wm, p))) / (2.0 * h);
        f_w.set_column(k, &col);
    }
    let rhs = -f * zeta - f_w * DVector::from_column_slice(w_rate.as_slice());
    jac.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

#[test]
fn continuation_rate_matches_dense_solve() {
    let mut rng = StdRng::seed_from_u64(53);
    for _ in 0..20 {
        let w = Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        let p = problem(&w, 2.0, 2);
        let solved = initialize_solution(&w, &p).unwrap();
        // Move off the solution so both terms of the right-hand side matter.
        let u = solved.offset(
            1.0,
            &(0..p.dim()).map(|_| rng.random_range(-1e-3..1e-3)).collect::<Vec<_>>(),
        );
        let mx = u.stage(0).mx;
        let w_rate = euler_rates(&w, &single_axis_torque(mx, &FIELD), &p.inertia);
        let want = dense_rate(&u, &w, &w_rate, 10.0, &p);
        let run = |h: f64| {
            let prm = ContinuationParams {
                fd_step: h,
                ..params(10.0, 0.1, p.dim())
            };
            continuation_step(&u, &w, &w_rate, &prm, &p, None)
        };
        // The operator is a forward difference, so the mismatch shrinks
        // linearly with the step until rounding takes over.
        let coarse = rel_diff(&run(1e-5).rate, &want);
        let medium = rel_diff(&run(1e-6).rate, &want);
        assert!((7.0..13.0).contains(&(coarse / medium)), "{coarse} / {medium}");
        let out = run(1e-7);
        let rel = rel_diff(&out.rate, &want);
        assert!(rel < 1e-6, "relative difference {rel}");
        let expected: Vec<f64> = u.as_slice().iter().zip(&out.rate).map(|(u, r)| u + 0.1 * r).collect();
        assert_eq!(out.solution.as_slice(), expected.as_slice());
    }
}

#[test]
fn rest_is_an_equilibrium_of_the_continuation() {
    let w = Vector3::zeros();
    let p = problem(&w, 12.0, 24);
    let u = seed_solution(&p);
    assert!(norm(&kkt_residual(&u, &w, &p)) < 1e-20);
    let out = continuation_step(&u, &w, &Vector3::zeros(), &params(10.0, 0.1, p.dim()), &p, None);
    assert!(out.rate.iter().all(|r| r.abs() < 1e-12));
    assert!(!out.breakdown);
}

/// `‖F‖` over repeated continuation steps with the state frozen.
fn frozen_history(zeta: f64, dt: f64, steps: usize) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(54);
    let w = Vector3::new(0.1, 0.1, 0.1);
    let p = problem(&w, 12.0, 24);
    let solved = initialize_solution(&w, &p).unwrap();
    let mut u = solved.offset(
        1.0,
        &(0..p.dim()).map(|_| rng.random_range(-1e-3..1e-3)).collect::<Vec<_>>(),
    );
    let prm = params(zeta, dt, p.dim());
    let mut history = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    for _ in 0..steps {
        let out = continuation_step(&u, &w, &Vector3::zeros(), &prm, &p, warm.as_deref());
        history.push(out.residual_norm);
        u = out.solution;
        warm = Some(out.rate);
    }
    history
}

#[test]
fn frozen_state_residual_contracts_exponentially() {
    let dt = 0.1;
    for zeta in [0.5, 1.0, 2.0, 5.0] {
        let hist = frozen_history(zeta, dt, 25);
        let f0 = hist[0];
        for (k, f) in hist.iter().enumerate() {
            let bound = f0 * (-0.9 * zeta * k as f64 * dt).exp();
            if bound < 1e-9 * f0 {
                break;
            }
            assert!(*f <= bound, "zeta={zeta} k={k}: {f} > {bound}");
        }
        // Each explicit step scales the residual by 1 − ζΔt.
        let ratio = hist[3] / hist[2];
        assert!(
            (ratio - (1.0 - zeta * dt)).abs() < 0.05 * (1.0 - zeta * dt).max(0.1),
            "zeta={zeta} ratio {ratio}"
        );
    }
}

#[test]
fn newton_initialization_on_the_deployment_state() {
    let w0 = Vector3::new(0.1, 0.1, 0.1);
    let settings = NmpcSettings::default();
    let mut ctrl = NmpcController::new(InertiaTensor::QLI, M_MAX, &settings, WeightSchedule::default(), 0.1).unwrap();
    let p = ctrl.problem(&w0, &FIELD);
    let step = ctrl.initialize(&w0, &FIELD).unwrap();
    assert!(
        step.residual_norm < initialization_tolerance(&p),
        "{}",
        step.residual_norm
    );
    assert!(step.stage0.v > 0.0);
    assert!(step.constraint_violation < 1e-6 * M_MAX * M_MAX);
    assert_eq!(step.condition, WeightCondition::Tumbling);
}

#[test]
fn command_is_clamped_to_the_actuator_limit() {
    let over = SolutionVector::uniform(
        ControlStage {
            mx: 12.5,
            v: 0.1,
            rho: 0.0,
        },
        3,
    );
    let (cmd, clamped) = mpc_command(&over, M_MAX);
    assert!(clamped);
    assert_eq!(cmd, Vector3::new(M_MAX, 0.0, 0.0));
    let under = SolutionVector::uniform(
        ControlStage {
            mx: -12.5,
            v: 0.1,
            rho: 0.0,
        },
        3,
    );
    assert_eq!(mpc_command(&under, M_MAX).0, Vector3::new(-M_MAX, 0.0, 0.0));
    let inside = SolutionVector::uniform(
        ControlStage {
            mx: 6.0,
            v: 8.0,
            rho: 0.0,
        },
        3,
    );
    assert_eq!(mpc_command(&inside, M_MAX), (Vector3::new(6.0, 0.0, 0.0), false));
}
