mod common;

use common::tanh_sinh;
use num_complex::Complex64;
use proptest::prelude::*;
use sphere_equilibrium::sphere::{
    cap_area, caps_pairwise_disjoint, geodesic_distance, sample_uniform, stereographic,
    stereographic_inverse, Cap, SpherePoint,
};
use std::f64::consts::PI;

fn p(x: f64, y: f64, z: f64) -> SpherePoint {
    SpherePoint::xyz(x, y, z).unwrap()
}

#[test]
fn points_are_normalized_on_construction() {
    let x = SpherePoint::new(vec![3.0, 4.0, 0.0]).unwrap();
    assert!((x.coords()[0] - 0.6).abs() < 1e-15);
    assert!(SpherePoint::new(vec![0.0, 0.0, 0.0]).is_err());
    assert!(SpherePoint::new(vec![1.0]).is_err());
    let json = serde_json::to_string(&x).unwrap();
    let back: SpherePoint = serde_json::from_str(&json).unwrap();
    assert_eq!(back, x);
}

#[test]
fn cap_area_on_s2_is_linear_in_height() {
    for &t in &[-0.9, -0.3, 0.0, 0.4, 0.95] {
        assert!((cap_area(2, t).unwrap() - 0.5 * (1.0 - t)).abs() < 1e-15);
        let gamma = (2.0 * (1.0 - t)).sqrt();
        assert!((cap_area(2, t).unwrap() - gamma * gamma / 4.0).abs() < 1e-15);
    }
}

#[test]
fn cap_area_on_s3_matches_quadrature() {
    let t = 0.7;
    let oracle = 2.0 / PI * tanh_sinh(|u, _, _| (1.0 - u * u).sqrt(), t, 1.0);
    assert!((cap_area(3, t).unwrap() - oracle).abs() < 1e-12);
    assert!((oracle - 0.094060202187093683594).abs() < 1e-13);
}

#[test]
fn cap_area_matches_zonal_integral_in_higher_dimensions() {
    for d in 3..8 {
        let norm = tanh_sinh(
            |u, _, _| (1.0 - u * u).powf(0.5 * d as f64 - 1.0),
            -1.0,
            1.0,
        );
        for &t in &[-0.6, 0.1, 0.8] {
            let part = tanh_sinh(|u, _, _| (1.0 - u * u).powf(0.5 * d as f64 - 1.0), t, 1.0);
            assert!(
                (cap_area(d, t).unwrap() - part / norm).abs() < 1e-12,
                "d = {d}, t = {t}"
            );
        }
    }
}

proptest! {
    #[test]
    fn cap_area_complementarity(d in 2usize..10, t in -1.0f64..1.0) {
        let s = cap_area(d, t).unwrap() + cap_area(d, -t).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cap_area_strictly_decreasing(d in 2usize..10, t in -0.99f64..0.98) {
        prop_assert!(cap_area(d, t + 0.01).unwrap() < cap_area(d, t).unwrap());
    }
}

#[test]
fn disjointness_examples() {
    let north = p(0.0, 0.0, 1.0);
    let south = p(0.0, 0.0, -1.0);
    let caps = [
        Cap::from_geodesic(north.clone(), PI / 4.0).unwrap(),
        Cap::from_geodesic(south, PI / 4.0).unwrap(),
    ];
    assert!(caps_pairwise_disjoint(&caps).unwrap().disjoint);

    // Tangent configuration: two caps of chordal radius 2/√6 at distance arccos(−1/9).
    let eps = 2.0 / 6f64.sqrt();
    let a2 = p(4.0 * 5f64.sqrt() / 9.0, 0.0, -1.0 / 9.0);
    let tangent = [
        Cap::from_chordal(north.clone(), eps).unwrap(),
        Cap::from_chordal(a2, eps).unwrap(),
    ];
    let report = caps_pairwise_disjoint(&tangent).unwrap();
    assert!(report.disjoint);
    assert!(report.margins[0].margin.abs() <= 1e-10, "{:?}", report);
    assert!(((-1.0f64 / 9.0).acos() - 4.0 * (1.0 / 6f64.sqrt()).asin()).abs() < 1e-15);

    // Overlapping configuration with a₂ = (√91/10, 0, 3/10).
    let a2 = p(91f64.sqrt() / 10.0, 0.0, 0.3);
    let overlap = [
        Cap::from_chordal(north, eps).unwrap(),
        Cap::from_chordal(a2, eps).unwrap(),
    ];
    let report = caps_pairwise_disjoint(&overlap).unwrap();
    assert!(!report.disjoint);
    let v = report.violations();
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].i, v[0].j), (0, 1));
    assert!(v[0].margin < -0.4);
}

#[test]
fn geodesic_distance_examples() {
    let x = p(0.2, -0.4, 0.7);
    assert_eq!(geodesic_distance(&x, &x).unwrap(), 0.0);
    let minus = SpherePoint::new(x.coords().iter().map(|c| -c).collect()).unwrap();
    assert!((geodesic_distance(&x, &minus).unwrap() - PI).abs() < 1e-15);
    let a = p(0.0, 0.0, 1.0);
    let b = p(91f64.sqrt() / 10.0, 0.0, -0.3);
    let dist = geodesic_distance(&a, &b).unwrap();
    assert!((dist - (-0.3f64).acos()).abs() < 1e-14);
    assert!((dist - 1.87548898081).abs() < 1e-10);
    let other = SpherePoint::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(geodesic_distance(&a, &other).is_err());
}

#[test]
fn uniform_sampling_is_deterministic_and_balanced() {
    let n = 1000;
    let a = sample_uniform(2, n, 42);
    let b = sample_uniform(2, n, 42);
    assert_eq!(a, b);
    assert_ne!(a, sample_uniform(2, n, 43));
    let mut mean = [0.0; 3];
    let mut upper = 0usize;
    for x in &a {
        assert!((x.coords().iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..3 {
            mean[k] += x.coords()[k] / n as f64;
        }
        if x.coords()[2] > 0.0 {
            upper += 1;
        }
    }
    let norm = mean.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!(norm <= 4.0 / (n as f64).sqrt(), "mean norm {norm}");
    let frac = upper as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 5.0 / (n as f64).sqrt());
    // Higher dimension.
    let c = sample_uniform(4, 10, 1);
    assert!(c.iter().all(|x| x.dim() == 4));
}

#[test]
fn stereographic_identities() {
    let pole = p(0.3, 0.5, -0.2);
    let antipode = SpherePoint::new(pole.coords().iter().map(|c| -c).collect()).unwrap();
    let z = stereographic(&antipode, &pole).unwrap();
    assert!(z.norm() < 1e-15);
    assert!((antipode.chord(&pole).unwrap() - 2.0).abs() < 1e-15);

    // Equator relative to the pole maps to the unit circle.
    let frame_vec = p(0.5, -0.3, 0.0);
    let proj = frame_vec.dot(&pole).unwrap();
    let eq: Vec<f64> = frame_vec
        .coords()
        .iter()
        .zip(pole.coords())
        .map(|(x, q)| x - proj * q)
        .collect();
    let eq = SpherePoint::new(eq).unwrap();
    assert!((stereographic(&eq, &pole).unwrap().norm() - 1.0).abs() < 1e-14);
}

#[test]
fn stereographic_round_trip_and_chord_formulas() {
    let pole = p(0.1, -0.2, 0.9);
    let points = sample_uniform(2, 10_000, 7);
    let a = p(-0.4, 0.8, 0.1);
    let w = stereographic(&a, &pole).unwrap();
    for x in &points {
        let z = stereographic(x, &pole).unwrap();
        let back = stereographic_inverse(z, &pole).unwrap();
        assert!(back.chord(x).unwrap() <= 1e-12, "{x:?}");
        let s = 1.0 + z.norm_sqr();
        let to_pole = 2.0 / s.sqrt();
        assert!((to_pole - x.chord(&pole).unwrap()).abs() <= 1e-12);
        let to_a = 2.0 * (z - w).norm() / (s.sqrt() * (1.0 + w.norm_sqr()).sqrt());
        assert!((to_a - x.chord(&a).unwrap()).abs() <= 1e-12);
    }
    assert!(stereographic_inverse(Complex64::new(1e3, -2e3), &pole).is_ok());
}
