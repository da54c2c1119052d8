use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use smallbody::contour::{blasius_force, blasius_real, BoundaryCurve, TangentField};
use smallbody::kernels::{
    biot_savart_exterior, green_dirichlet, green_hydrodynamic, harmonic_field,
};
use smallbody::limit_dynamics::{
    hamiltonian, poisson_bracket, run, Functional, LimitParams, LimitState,
};
use smallbody::potentials::{boundary_frame, KirchhoffPotentials};
use smallbody::{BodyGeometry, Vec2, VortexBlob, VorticityField};

fn geometry(a: Option<f64>, eps: f64) -> BodyGeometry {
    match a {
        None => BodyGeometry::disk(eps).unwrap(),
        Some(a) => BodyGeometry::joukowski(a, eps).unwrap(),
    }
}

fn shape() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (0.05f64..0.9).prop_map(Some)]
}

/// Point of the fluid domain given in mapped polar coordinates.
fn exterior(geom: &BodyGeometry, radius: f64, angle: f64) -> Vec2 {
    let z = geom.inverse(Complex64::from_polar(radius, angle));
    Vec2::new(z.re, z.im)
}

fn polar() -> impl Strategy<Value = (f64, f64)> {
    (1.05f64..8.0, 0.0..2.0 * PI)
}

fn coeffs() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)),
        1..5,
    )
}

/// Blobs on separated mapped radii around the origin.
fn blob_field(max: usize) -> impl Strategy<Value = VorticityField> {
    prop::collection::vec((0.0..2.0 * PI, -1.0f64..1.0), 1..=max).prop_map(|draws| {
        VorticityField::new(
            draws
                .iter()
                .enumerate()
                .map(|(k, &(angle, g))| {
                    let r = 1.5 + 0.9 * k as f64;
                    VortexBlob::point(Vec2::new(r * angle.cos(), r * angle.sin()), g)
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_inverse_round_trip(a in shape(), eps in 0.05f64..2.0, (r, th) in polar()) {
        let geom = geometry(a, eps);
        let w = Complex64::from_polar(r, th);
        let back = geom.forward(geom.inverse(w));
        prop_assert!((back - w).norm() < 1e-12 * r);
    }

    #[test]
    fn green_symmetric(a in shape(), p in polar(), q in polar()) {
        let geom = geometry(a, 1.0);
        let (x, y) = (exterior(&geom, p.0, p.1), exterior(&geom, q.0, q.1));
        prop_assume!((x - y).norm() > 1e-3);
        let (gxy, gyx) = (green_dirichlet(&geom, x, y).unwrap(), green_dirichlet(&geom, y, x).unwrap());
        assert_relative_eq!(gxy, gyx, epsilon = 1e-13, max_relative = 1e-12);
        let (hxy, hyx) = (green_hydrodynamic(&geom, x, y).unwrap(), green_hydrodynamic(&geom, y, x).unwrap());
        assert_relative_eq!(hxy, hyx, epsilon = 1e-13, max_relative = 1e-12);
    }

    #[test]
    fn green_vanishes_on_boundary(a in shape(), t in 0.0f64..1.0, q in polar()) {
        let geom = geometry(a, 1.0);
        let (x, _) = boundary_frame(&geom, t);
        let y = exterior(&geom, q.0, q.1);
        prop_assert!(green_dirichlet(&geom, x, y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exterior_velocity_tangent(a in shape(), field in blob_field(4), t in 0.0f64..1.0) {
        let geom = geometry(a, 1.0);
        let field = VorticityField::new(
            field.blobs.iter().map(|b| VortexBlob { position: {
                let r = b.position.norm();
                exterior(&geom, r, b.position.y.atan2(b.position.x))
            }, ..*b }).collect(),
        );
        let (x, n) = boundary_frame(&geom, t);
        let u = biot_savart_exterior(&geom, &field, x).unwrap();
        prop_assert!(u.dot(&n).abs() < 1e-10 * (1.0 + u.norm()));
        let (h, _) = harmonic_field(&geom, x).unwrap();
        prop_assert!(h.dot(&n).abs() < 1e-12 * (1.0 + h.norm()));
    }

    #[test]
    fn blasius_complex_matches_real(a in shape(), f in coeffs(), g in coeffs()) {
        let geom = geometry(a, 1.0);
        let curve = BoundaryCurve::new(geom.clone(), 512).unwrap();
        let (tf, tg) = (TangentField::new(geom.clone(), f), TangentField::new(geom, g));
        let (fv, gv) = (|x: Vec2| tf.value(x), |x: Vec2| tg.value(x));
        let complex = blasius_force(&curve, &fv, &gv).unwrap();
        let real = blasius_real(&curve, &fv, &gv);
        let scale = 1.0 + curve.line_integral(|n| fv(n.position()).norm() * gv(n.position()).norm());
        prop_assert!((complex.force - real.force).norm() < 1e-10 * scale);
        prop_assert!((complex.torque - real.torque).abs() < 1e-10 * scale);
    }

    #[test]
    fn straight_line_without_circulation(h0 in (-5.0f64..5.0, -5.0f64..5.0), xi in (-3.0f64..3.0, -3.0f64..3.0), m in 0.1f64..10.0) {
        let (h0, xi) = (Vec2::new(h0.0, h0.1), Vec2::new(xi.0, xi.1));
        let params = LimitParams::new(m, 0.0, 0.0, 1e-2).unwrap();
        let traj = run(&LimitState::new(h0, xi, VorticityField::empty()), &params, 1.0, usize::MAX).unwrap();
        prop_assert!((traj.final_state.h - (h0 + xi / m)).norm() < 1e-12);
        prop_assert_eq!(traj.final_state.xi, xi);
    }

    #[test]
    fn blob_strengths_constant(field in blob_field(3), gamma in -2.0f64..2.0) {
        let params = LimitParams::new(1.0, gamma, 0.0, 1e-2).unwrap();
        let state = LimitState::new(Vec2::zeros(), Vec2::new(0.1, 0.0), field.clone());
        let end = run(&state, &params, 0.5, usize::MAX).unwrap().final_state;
        for (a, b) in end.field.blobs.iter().zip(&field.blobs) {
            prop_assert_eq!(a.strength, b.strength);
            prop_assert_eq!(a.core, b.core);
        }
    }

    #[test]
    fn state_serde_round_trip(field in blob_field(3), t in 0.0f64..10.0) {
        let state = LimitState { t, ..LimitState::new(Vec2::new(0.1, -0.2), Vec2::new(1.0, 2.0), field) };
        let text = serde_json::to_string(&state).unwrap();
        prop_assert_eq!(serde_json::from_str::<LimitState>(&text).unwrap(), state);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn neumann_conditions(a in 0.05f64..0.8, eps in 0.1f64..1.5) {
        let phi = KirchhoffPotentials::new(&geometry(Some(a), eps)).unwrap();
        for i in 1..=3 {
            prop_assert!(phi.neumann_residual(i, 300) < 1e-8 * (1.0 + eps * eps));
        }
    }

    #[test]
    fn hamiltonian_conserved_short_run(field in blob_field(3), gamma in -1.5f64..1.5, m in 0.5f64..3.0, xi in (-0.5f64..0.5, -0.5f64..0.5)) {
        let params = LimitParams::new(m, gamma, 0.0, 1e-3).unwrap();
        let state = LimitState::new(Vec2::zeros(), Vec2::new(xi.0, xi.1), field);
        let traj = run(&state, &params, 0.5, usize::MAX).unwrap();
        prop_assert!(traj.hamiltonian_drift < 1e-8, "drift {}", traj.hamiltonian_drift);
        prop_assert!(traj.support.passed);
    }

    #[test]
    fn hamiltonian_bracket_with_itself_vanishes(field in blob_field(3), gamma in -1.5f64..1.5, xi in (-0.5f64..0.5, -0.5f64..0.5)) {
        let params = LimitParams::new(1.0, gamma, 0.0, 1e-3).unwrap();
        let state = LimitState::new(Vec2::new(0.05, 0.0), Vec2::new(xi.0, xi.1), field);
        let scale = 1.0 + hamiltonian(&state, &params).unwrap().value.abs();
        prop_assert!(poisson_bracket(&state, &params, Functional::Hamiltonian).unwrap().abs() < 1e-6 * scale);
    }
}
