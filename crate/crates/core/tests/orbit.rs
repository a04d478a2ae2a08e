use std::f64::consts::PI;

use approx::assert_relative_eq;
use detumble_core::dynamics::{euler_rates, AttitudeQuaternion, InertiaTensor};
use detumble_core::orbit::*;
use detumble_core::sim::{rk4_step, BodyState};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Kepler's equation by bisection; `E − e sin E − M` is increasing in `E`.
fn kepler_bisection(m: f64, e: f64) -> f64 {
    let f = |x: f64| x - e * x.sin() - m;
    let (mut lo, mut hi) = (m - 1.0, m + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Classical element-to-position conversion through the true anomaly.
fn position_oracle(el: &OrbitalElements, t: f64) -> Vector3<f64> {
    let a = el.semi_major_axis;
    let e = el.eccentricity;
    let n = (MU_EARTH / (a * a * a)).sqrt();
    let m = (el.mean_anomaly_epoch.to_radians() + n * t).rem_euclid(2.0 * PI);
    let ea = kepler_bisection(m, e);
    let nu = 2.0 * ((1.0 + e).sqrt() * (ea / 2.0).sin()).atan2((1.0 - e).sqrt() * (ea / 2.0).cos());
    let r = a * (1.0 - e * ea.cos());
    let (raan, inc, argp) = (
        el.raan.to_radians(),
        el.inclination.to_radians(),
        el.arg_perigee.to_radians(),
    );
    let u = argp + nu;
    r * Vector3::new(
        raan.cos() * u.cos() - raan.sin() * u.sin() * inc.cos(),
        raan.sin() * u.cos() + raan.cos() * u.sin() * inc.cos(),
        u.sin() * inc.sin(),
    )
}

#[test]
fn kepler_table_orbit_matches_bisection() {
    let el = OrbitalElements::QLI;
    let m = el.mean_anomaly_epoch.to_radians();
    let e = solve_kepler(m, el.eccentricity).unwrap();
    assert!((e - el.eccentricity * e.sin() - m).abs() < 1e-12);
    assert!((e - kepler_bisection(m, el.eccentricity)).abs() < 1e-12);
}

#[test]
fn kepler_residual_over_a_grid() {
    for ei in 0..10 {
        let ecc = 0.095 * ei as f64;
        for mi in 0..64 {
            let m = 2.0 * PI * mi as f64 / 64.0;
            let ea = solve_kepler(m, ecc).unwrap();
            assert!((ea - ecc * ea.sin() - m).abs() < 1e-12, "e={ecc} M={m}");
            assert!((ea - kepler_bisection(m, ecc)).abs() < 1e-11);
        }
    }
}

#[test]
fn period_from_third_law() {
    let a: f64 = 6691.6;
    let period = 2.0 * PI * (a.powi(3) / 398_600.441_8).sqrt();
    assert!((period - 5447.0).abs() < 1.0, "{period}");
    assert_relative_eq!(OrbitalElements::QLI.period(), period, max_relative = 1e-13);
}

#[test]
fn epoch_position_matches_classical_conversion() {
    let el = OrbitalElements::QLI;
    for t in [0.0, 600.0, 2000.0, 4321.0] {
        let r = propagate_position(&el, t).unwrap();
        assert!((r - position_oracle(&el, t)).norm() < 1e-6, "t={t}");
    }
}

#[test]
fn position_is_periodic() {
    let el = OrbitalElements::QLI;
    let p = el.period();
    let r0 = propagate_position(&el, 0.0).unwrap();
    for k in 1..=3 {
        let rk = propagate_position(&el, k as f64 * p).unwrap();
        assert!((rk - r0).norm() < 1e-6, "after {k} periods: {}", (rk - r0).norm());
    }
}

#[test]
fn radius_stays_between_apsides() {
    let el = OrbitalElements {
        eccentricity: 0.05,
        ..OrbitalElements::QLI
    };
    let (rp, ra) = (
        el.semi_major_axis * (1.0 - el.eccentricity),
        el.semi_major_axis * (1.0 + el.eccentricity),
    );
    for k in 0..500 {
        let r = propagate_position(&el, k as f64 * 23.7).unwrap().norm();
        assert!(r >= rp * (1.0 - 1e-12) && r <= ra * (1.0 + 1e-12));
    }
}

#[test]
fn aligned_dipole_magnitudes() {
    let cfg = DipoleModelConfig::aligned(3.12e-5);
    let equator = dipole_field_inertial(&Vector3::new(R_EARTH, 0.0, 0.0), 0.0, &cfg);
    assert_relative_eq!(equator.norm(), 3.12e-5, max_relative = 1e-12);
    // The equatorial field points north, against the dipole moment.
    assert!(equator.z > 0.0);
    let pole = dipole_field_inertial(&Vector3::new(0.0, 0.0, R_EARTH), 0.0, &cfg);
    assert_relative_eq!(pole.norm(), 2.0 * 3.12e-5, max_relative = 1e-12);
}

#[test]
fn field_falls_off_with_inverse_cube() {
    let cfg = DipoleModelConfig::default();
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..100 {
        let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let t = rng.random_range(0.0..20_000.0);
        let r = dir * rng.random_range(6600.0..9000.0);
        let near = dipole_field_inertial(&r, t, &cfg).norm();
        let far = dipole_field_inertial(&(r * 2.0), t, &cfg).norm();
        assert_relative_eq!(near / far, 8.0, max_relative = 1e-12);
    }
}

#[test]
fn dipole_field_is_divergence_and_curl_free() {
    let cfg = DipoleModelConfig::default();
    let h = 1.0;
    for (r, t) in [
        (Vector3::new(6700.0, 100.0, -300.0), 0.0),
        (Vector3::new(-2000.0, 5000.0, 4000.0), 1234.0),
        (Vector3::new(300.0, -200.0, 6900.0), 8000.0),
    ] {
        let field = |p: Vector3<f64>| dipole_field_inertial(&p, t, &cfg);
        let mut jac = nalgebra::Matrix3::zeros();
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let col = (field(r + e) - field(r - e)) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let bound = 1e-6 * field(r).norm() / h;
        assert!(jac.trace().abs() < bound, "divergence {}", jac.trace());
        assert!((jac - jac.transpose()).amax() < bound, "curl");
    }
}

#[test]
fn field_rotation_preserves_norm() {
    let mut rng = StdRng::seed_from_u64(22);
    for _ in 0..1000 {
        let q = AttitudeQuaternion::from_scalar_first([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let b = Vector3::from_fn(|_, _| rng.random_range(-5e-5..5e-5));
        assert_relative_eq!(field_in_body(&q, &b).norm(), b.norm(), max_relative = 1e-12);
    }
    let b = Vector3::new(1e-5, -2e-5, 3e-5);
    assert_eq!(field_in_body(&AttitudeQuaternion::identity(), &b), b);
}

#[test]
fn bdot_estimate_is_exact_for_linear_fields() {
    let b0 = Vector3::new(1e-5, -2e-5, 3e-5);
    let slope = Vector3::new(3e-8, 1e-8, -2e-8);
    let dt = 0.1;
    let est = bdot_estimate(&b0, &(b0 + slope * dt), dt);
    assert_relative_eq!(est, slope, max_relative = 1e-9);
    assert_eq!(bdot_estimate(&b0, &b0, dt), Vector3::zeros());
}

/// Spin a body through a frozen inertial field for one step of `dt` and
/// return the estimate error against `−ω × B` at the new sample.
fn spinning_body_error(dt: f64) -> (f64, f64) {
    let j = InertiaTensor::QLI;
    let b_inertial = Vector3::new(2e-5, -1e-5, 3e-5);
    let start = BodyState {
        omega: Vector3::new(0.05, 0.1, -0.08),
        attitude: AttitudeQuaternion::from_scalar_first([0.8, 0.2, -0.1, 0.3]),
    };
    // Resolve the rotation finely so only the finite difference contributes error.
    let mut s = start;
    let sub = 64;
    for _ in 0..sub {
        s = rk4_step(&s, &Vector3::zeros(), &j, dt / sub as f64);
    }
    let b_prev = field_in_body(&start.attitude, &b_inertial);
    let b_curr = field_in_body(&s.attitude, &b_inertial);
    let exact = -s.omega.cross(&b_curr);
    let err = (bdot_estimate(&b_prev, &b_curr, dt) - exact).norm();
    let w = start
        .omega
        .norm()
        .max(euler_rates(&start.omega, &Vector3::zeros(), &j).norm().sqrt());
    (err, dt * w * w * b_inertial.norm())
}

#[test]
fn bdot_estimate_converges_at_first_order() {
    let steps = [0.1, 0.05, 0.025];
    let errs: Vec<(f64, f64)> = steps.iter().map(|dt| spinning_body_error(*dt)).collect();
    for (err, bound) in &errs {
        assert!(err <= bound, "{err} > {bound}");
    }
    for pair in errs.windows(2) {
        let ratio = pair[0].0 / pair[1].0;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }
}
