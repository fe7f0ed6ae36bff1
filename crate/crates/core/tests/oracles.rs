//! Reference values for each operation, checked against frozen oracles.

mod common;

use approx::assert_relative_eq;
use common::*;
use rieszlab_core::geometry::{diameter, lambda_min, region_membership, CapZone, Domain, Hyperplane};
use rieszlab_core::kernels::{
    eval_bessel, eval_log, eval_log_riesz, fundamental_solution, gamma, monotonicity_threshold,
    sphere_surface_measure,
};
use rieszlab_core::movingplane::{
    difference_quotient_probe, reflection_difference, sweep, EventKind, SweepConfig,
};
use rieszlab_core::potentials::{eval_gradient, eval_potential, eval_potential_mc, PotentialSpec};
use rieszlab_core::quadrature::{integrate, mc_integrate, QuadratureConfig};
use rieszlab_core::KernelSpec;
use std::f64::consts::{E, FRAC_1_SQRT_2, PI};

fn potential(domain: &str, kernel: &str, rel: f64) -> PotentialSpec<f64> {
    PotentialSpec::new(
        KernelSpec::parse(kernel).unwrap(),
        Domain::parse(domain).unwrap(),
        QuadratureConfig::default().with_rel_tol(rel),
    )
    .unwrap()
}

#[test]
fn kernel_values() {
    assert_relative_eq!(eval_log(0.1f64).unwrap(), 10f64.ln(), max_relative = 1e-15);
    assert_relative_eq!(eval_log_riesz((-0.5f64).exp(), 4.0, 2).unwrap(), 1.0 / (2.0 * E), max_relative = 1e-14);
    assert_relative_eq!(eval_log_riesz(2.0f64, 4.0, 2).unwrap(), -4.0 * 2f64.ln(), max_relative = 1e-15);
    assert_relative_eq!(monotonicity_threshold(4.0f64, 2).unwrap(), (-0.5f64).exp(), max_relative = 1e-15);
    assert_relative_eq!(monotonicity_threshold(3.0f64, 2).unwrap(), (-1f64).exp(), max_relative = 1e-15);
    assert_relative_eq!(monotonicity_threshold(102.0f64, 2).unwrap(), (-0.01f64).exp(), max_relative = 1e-15);
    assert_relative_eq!(fundamental_solution(1.0f64, 2.0, 3).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-13);
    assert_relative_eq!(
        fundamental_solution((-0.5f64).exp(), 4.0, 2).unwrap(),
        -1.0 / (16.0 * PI * E),
        max_relative = 1e-13
    );
    assert_relative_eq!(gamma(0.5f64).unwrap(), PI.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(sphere_surface_measure::<f64>(1).unwrap(), 2.0, max_relative = 1e-14);
    assert_relative_eq!(sphere_surface_measure::<f64>(2).unwrap(), 2.0 * PI, max_relative = 1e-14);
    assert_relative_eq!(sphere_surface_measure::<f64>(3).unwrap(), 4.0 * PI, max_relative = 1e-14);
}

#[test]
fn bessel_kernel_matches_trapezoid_oracle() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-10);
    for (s, a, n, want) in BESSEL_TRAPEZOID {
        let got = eval_bessel(s, a, n, &cfg).unwrap();
        assert_relative_eq!(got.value, want, max_relative = 1e-6);
        assert!(got.covers(want), "{got:?} vs {want}");
    }
    let g = |s: f64| eval_bessel(s, 2.0, 3, &cfg).unwrap().value;
    assert!(g(0.5) > g(1.0) && g(1.0) > g(2.0));
}

#[test]
fn geometry_examples() {
    let plane = Hyperplane::new(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 0.0).unwrap();
    let r = plane.reflect(&[1.0, 0.0]);
    assert!((r[0] - 0.0).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15);

    let small = Domain::<f64>::parse("ball:0,0:0.25").unwrap();
    assert_relative_eq!(diameter(&small, 200, 1).unwrap().upper, 0.5, max_relative = 1e-12);
    assert!(small.diameter_upper() < monotonicity_threshold(4.0, 2).unwrap());
    let union = Domain::<f64>::parse("union:ball:-1.2,0:1;ball:1.2,0:1").unwrap();
    assert_relative_eq!(union.diameter_upper(), 4.4, max_relative = 1e-12);

    let disk = Domain::<f64>::parse("ball:0,0:1").unwrap();
    let plane = Hyperplane::new(&[1.0, 0.0], -0.5).unwrap();
    assert_eq!(region_membership(&disk, &plane, &[0.7, 0.0]), CapZone::OmegaLambda);

    let ellipse = Domain::<f64>::parse("ellipsoid:0,0:1,0.5").unwrap();
    let n = ellipse.normal(&[1.0, 0.0]);
    assert!((n[0] - 1.0).abs() < 1e-6 && n[1].abs() < 1e-6);
}

#[test]
fn quadrature_examples() {
    let ball = Domain::<f64>::parse("ball:0,0,0:1").unwrap();
    let cfg = QuadratureConfig::default().with_rel_tol(1e-6);
    let inv = |y: &[f64]| 1.0 / (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    let v = integrate(&inv, &ball, &cfg, Some(&[0.0, 0.0, 0.0])).unwrap();
    assert_relative_eq!(v.value, 2.0 * PI, max_relative = 1e-4);

    let union = Domain::<f64>::parse("union:ball:-1.2,0:1;ball:1.2,0:1").unwrap();
    let a = integrate(&|_: &[f64]| 1.0, &union, &cfg, None).unwrap();
    assert!((a.value - 2.0 * PI).abs() <= 1e-6 * 2.0 * PI);

    let disk = Domain::<f64>::parse("ball:0,0:1").unwrap();
    let log = |y: &[f64]| {
        let r = y[0].hypot(y[1]);
        if r > 0.0 {
            -r.ln()
        } else {
            0.0
        }
    };
    let m = mc_integrate(&log, &disk, &cfg.clone().with_seed(11).with_mc_samples(1_000_000), Some(&[0.0, 0.0])).unwrap();
    assert!((m.value - PI / 2.0).abs() <= m.error_bound, "{m:?}");
}

#[test]
fn potential_examples() {
    let p = potential("ball:0,0,0:1", "riesz:alpha=2,dim=3", 1e-6);
    assert_relative_eq!(eval_potential(&p, &[0.0, 0.0, 0.0]).unwrap().value, 2.0 * PI, max_relative = 1e-4);
    let g = eval_gradient(&p, &[2.0, 0.0, 0.0]).unwrap();
    assert_relative_eq!(g[0].value, -PI / 3.0, max_relative = 1e-3);
    assert!(g[1].value.abs() < 1e-6 && g[2].value.abs() < 1e-6);

    let log = potential("ball:0,0:1", "log:dim=2", 1e-6);
    let cfg = log.quad().clone().with_abs_tol(1e-6);
    let log = log.with_quad(cfg).unwrap();
    let b = eval_potential(&log, &[1.0, 0.0]).unwrap();
    assert!(b.value.abs() <= 5e-3, "{b:?}");
    let mc = eval_potential_mc(&log.with_quad(log.quad().clone().with_mc_samples(1_000_000)).unwrap(), &[1.0, 0.0]).unwrap();
    assert!(mc.value.abs() <= mc.error_bound + 5e-3);
    assert_relative_eq!(eval_potential(&log, &[0.0, 0.0]).unwrap().value, PI / 2.0, max_relative = 1e-6);

    let quad = potential("ball:0,0:1", "riesz:alpha=4,dim=2", 1e-8);
    let t = 0.7f64;
    let v = eval_potential(&quad, &[t.cos(), t.sin()]).unwrap();
    assert_relative_eq!(v.value, 1.5 * PI, max_relative = 1e-4);
}

#[test]
fn reflection_difference_examples() {
    let p = potential("ball:0,0:1", "log:dim=2", 1e-7);
    let plane = Hyperplane::new(&[1.0, 0.0], -0.5).unwrap();
    let x = [-0.75, 0.0];
    let d = reflection_difference(&p, &plane, &x).unwrap();
    assert!(d.value > d.error_bound);
    assert!((d.value - DISK_LOG_DIFFERENCE).abs() <= d.error_bound + 1e-9, "{d:?}");
    let (ux, uxl) = (eval_potential(&p, &x).unwrap(), eval_potential(&p, &[-0.25, 0.0]).unwrap());
    assert!((d.value - (uxl.value - ux.value)).abs() <= d.error_bound + ux.error_bound + uxl.error_bound);

    let p = potential("ball:0,0:0.25", "logriesz:alpha=4,dim=2", 1e-7);
    let plane = Hyperplane::new(&[1.0, 0.0], -0.1).unwrap();
    let d = reflection_difference(&p, &plane, &[-0.15, 0.0]).unwrap();
    assert!(d.value < -d.error_bound);
    assert_relative_eq!(d.value, SMALL_DISK_LOG_RIESZ_DIFFERENCE, max_relative = 1e-5);
}

#[test]
fn sweep_examples() {
    let cfg = SweepConfig::default();
    let disk = Domain::<f64>::parse("ball:0,0:1").unwrap();
    let s = sweep(&disk, &[1.0, 0.0], &cfg).unwrap();
    assert_relative_eq!(s.lambda0, -1.0, epsilon = 1e-9);
    assert!(s.event.lambda_bar.abs() <= 1e-6 * 2.0);
    assert_eq!(s.event.kind, EventKind::Both);

    let ellipse = Domain::<f64>::parse("ellipsoid:0,0:1,0.5").unwrap();
    let s = sweep(&ellipse, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &cfg).unwrap();
    assert!((s.event.lambda_bar - ELLIPSE_DIAGONAL_LAMBDA_BAR).abs() <= 1e-6 * 2.0);
    assert!((s.event.lambda_bar - ellipse_diagonal_lambda_exact()).abs() <= 1e-6 * 2.0);
    assert!(!s.cap_is_empty());
    assert!(s.event.lambda_bar > lambda_min(&ellipse, &s.direction).unwrap());
    assert!(ellipse.sdf(&s.event.witness).abs() <= ellipse.boundary_tol() * 10.0);

    let ellipsoid = Domain::<f64>::parse("ellipsoid:0,0,0:1,0.7,0.7").unwrap();
    let s = sweep(&ellipsoid, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0], &cfg).unwrap();
    assert!((s.event.lambda_bar - ELLIPSOID_LAMBDA_BAR).abs() <= 1e-6 * 2.0, "{}", s.event.lambda_bar);
    assert_eq!(s.event.kind, EventKind::Orthogonality);

    let star = Domain::<f64>::parse("star:0,0:0.2:0.1,0.05").unwrap();
    let s = sweep(&star, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &cfg).unwrap();
    assert!((s.event.lambda_bar - STAR_LAMBDA_BAR).abs() <= 1e-6 * star.diameter_upper());
}

#[test]
fn probe_on_ball_is_not_applicable() {
    let p = potential("ball:0,0:1", "riesz:alpha=3,dim=2", 1e-6);
    let s = sweep(p.domain(), &[0.6, 0.8], &SweepConfig::default()).unwrap();
    let r = difference_quotient_probe(&p, &s, 4).unwrap();
    assert!(!r.applicable);
    assert!(r.samples.is_empty());
}

#[test]
fn star_probe_matches_polar_oracle() {
    let p = potential("star:0,0:0.2:0.1,0.05", "logriesz:alpha=4,dim=2", 1e-8);
    let s = sweep(p.domain(), &[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &SweepConfig::default()).unwrap();
    let r = difference_quotient_probe(&p, &s, 6).unwrap();
    assert!(r.applicable, "{:?}", r.reason);
    assert_eq!(r.samples.len(), 6);
    for (q, want) in r.samples.iter().zip(STAR_QUOTIENTS) {
        assert_relative_eq!(q.quotient, want, max_relative = 1e-4);
    }
    assert!(r.signs_ok && r.min_abs_quotient >= STAR_PROBE_C);
}
