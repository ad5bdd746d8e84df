mod common;

use common::tanh_sinh;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_equilibrium::potential::{
    signed_cap_equilibrium_dm2_with_phi, sphere_energy, KernelSpec,
};
use sphere_equilibrium::sphere::{random_point, sample_uniform, stereographic, SpherePoint};
use sphere_equilibrium::support::{
    coulomb_alpha_residual, coulomb_alpha_root, coulomb_consistency_residual, dm2_g,
    influence_radii, kelvin_planar, reduced_charge, solve, solve_log, solve_riesz_dm2, ProblemSpec,
    Source,
};
use std::f64::consts::PI;

fn p(x: f64, y: f64, z: f64) -> SpherePoint {
    SpherePoint::xyz(x, y, z).unwrap()
}

fn two_charges(a2: SpherePoint, s: f64) -> ProblemSpec {
    ProblemSpec::new(
        2,
        s,
        vec![Source::new(p(0.0, 0.0, 1.0), 0.25), Source::new(a2, 0.25)],
    )
    .unwrap()
}

fn fig1_left() -> ProblemSpec {
    two_charges(p(91f64.sqrt() / 10.0, 0.0, -0.3), 0.0)
}

fn fig1_right() -> ProblemSpec {
    two_charges(p(4.0 * 5f64.sqrt() / 9.0, 0.0, -1.0 / 9.0), 0.0)
}

fn fig2() -> ProblemSpec {
    ProblemSpec::new(
        2,
        0.0,
        vec![
            Source::new(p(0.0, 0.0, 1.0), 0.25),
            Source::new(p(91f64.sqrt() / 10.0, 0.0, -0.3), 0.125),
            Source::new(p(0.0, 3f64.sqrt() / 2.0, -0.5), 0.05),
        ],
    )
    .unwrap()
}

fn fig4() -> ProblemSpec {
    two_charges(p(91f64.sqrt() / 10.0, 0.0, 0.3), 0.0)
}

// ---------------------------------------------------------------------------
// Logarithmic solver
// ---------------------------------------------------------------------------

#[test]
fn log_radii_for_equal_quarter_charges() {
    let sol = solve_log(&fig1_left()).unwrap();
    for cap in sol.caps() {
        assert!((cap.chordal_radius - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((cap.chordal_radius - 0.81650).abs() < 1e-5);
    }
    assert_eq!(sol.normalization, 1.5);
    assert!(sol.feasible);
    assert!(sol.diagnostics.mass_residual < 1e-14);
}

#[test]
fn log_feasibility_of_preset_configurations() {
    assert!(solve_log(&fig1_left()).unwrap().feasible);
    let right = solve_log(&fig1_right()).unwrap();
    assert!(right.feasible);
    assert!(right.diagnostics.disjointness.min_margin().abs() <= 1e-10);
    assert!(solve_log(&fig2()).unwrap().feasible);
    let overlap = solve_log(&fig4()).unwrap();
    assert!(!overlap.feasible);
    let v = overlap.diagnostics.disjointness.violations();
    assert_eq!((v[0].i, v[0].j), (0, 1));
}

#[test]
fn log_mass_identity_on_random_feasible_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    while feasible < 200 {
        let m = rng.random_range(1..5);
        let sources = (0..m)
            .map(|_| Source::new(random_point(2, &mut rng), rng.random_range(0.001..0.3)))
            .collect();
        let sol = solve_log(&ProblemSpec::new(2, 0.0, sources).unwrap()).unwrap();
        if sol.feasible {
            feasible += 1;
            assert!(
                sol.diagnostics.mass_residual <= 1e-14,
                "{}",
                sol.diagnostics.mass_residual
            );
        }
    }
}

/// Log potential of σ₂ restricted to the cap {u ≥ t} at height ξ, by
/// quadrature of the azimuthal mean −½ log((A + √(A² − B²))/2).
fn cap_log_potential_oracle(t: f64, xi: f64) -> f64 {
    let ring = |u: f64| {
        let a = 2.0 - 2.0 * xi * u;
        let b = 2.0 * ((1.0 - xi * xi) * (1.0 - u * u)).max(0.0).sqrt();
        -0.5 * (0.5 * (a + (a * a - b * b).max(0.0).sqrt())).ln()
    };
    if xi > t && xi < 1.0 {
        0.5 * (tanh_sinh(|u, _, _| ring(u), t, xi) + tanh_sinh(|u, _, _| ring(u), xi, 1.0))
    } else {
        0.5 * tanh_sinh(|u, _, _| ring(u), t, 1.0)
    }
}

#[test]
fn log_weighted_potential_is_the_reported_constant_on_the_support() {
    for spec in [fig1_left(), fig1_right(), fig2()] {
        let sol = solve_log(&spec).unwrap();
        let closed = sol.diagnostics.equilibrium_constant_closed_form;
        assert!((sol.equilibrium_constant - closed).abs() < 1e-12);
        let w0 = 0.5 - 2f64.ln();
        let mut checked = 0;
        for x in sample_uniform(2, 60, 3) {
            if !sol.region.contains(&x).unwrap() {
                continue;
            }
            let removed: f64 = sol
                .caps()
                .iter()
                .map(|c| cap_log_potential_oracle(c.height, c.center.dot(&x).unwrap()))
                .sum();
            let u = sol.normalization * (w0 - removed) + spec.field(&x).unwrap();
            assert!((u - closed).abs() < 1e-10, "{u} vs {closed}");
            checked += 1;
        }
        assert!(checked > 20);
    }
}

#[test]
fn log_feasibility_is_monotone_under_charge_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let sources = (0..3)
            .map(|_| Source::new(random_point(2, &mut rng), rng.random_range(0.01..0.5)))
            .collect();
        let spec = ProblemSpec::new(2, 0.0, sources).unwrap();
        let mut was_feasible = false;
        for k in (1..=20).rev() {
            let scaled = spec.scaled_charges(k as f64 / 20.0).unwrap();
            let feasible = solve_log(&scaled).unwrap().feasible;
            assert!(
                !was_feasible || feasible,
                "feasibility lost when charges decrease"
            );
            was_feasible |= feasible;
        }
    }
}

// ---------------------------------------------------------------------------
// Riesz s = d − 2
// ---------------------------------------------------------------------------

/// Cap area on S³ from the closed antiderivative of (2/π)√(1−u²).
fn cap_area_s3(t: f64) -> f64 {
    (t.acos() - t * (1.0 - t * t).sqrt()) / PI
}

/// Independent bisection oracle for the single-cap d = 3 system.
fn dm2_oracle_s3(q: f64) -> (f64, f64) {
    let w = 8.0 / (3.0 * PI);
    let gamma = |c: f64| (4.0 * q / (c * w)).powf(1.0 / 3.0);
    let g = |c: f64| {
        let gm = gamma(c);
        c * (1.0 - cap_area_s3(1.0 - 0.5 * gm * gm))
    };
    let (mut lo, mut hi) = (1.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 1.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    (lo, gamma(lo))
}

fn single_dm2(d: usize, q: f64) -> ProblemSpec {
    ProblemSpec::new(
        d,
        d as f64 - 2.0,
        vec![Source::new(SpherePoint::north_pole(d), q)],
    )
    .unwrap()
}

#[test]
fn dm2_single_cap_on_s3() {
    let sol = solve_riesz_dm2(&single_dm2(3, 0.1), 1e-12).unwrap();
    let (c, gamma) = dm2_oracle_s3(0.1);
    assert!((sol.normalization - c).abs() < 1e-12);
    assert!((sol.caps()[0].chordal_radius - gamma).abs() < 1e-12);
    // Regression constants pinned by the oracle above.
    assert!((sol.normalization - 1.0956112845809802586).abs() < 1e-12);
    assert!((sol.caps()[0].chordal_radius - 0.7548515392930310907).abs() < 1e-12);
    assert!(
        (sol.normalization - 1.094).abs() < 5e-3
            && (sol.caps()[0].chordal_radius - 0.754).abs() < 5e-3
    );
    assert!(sol.diagnostics.solver_residual <= 1e-10);
    assert!((sol.equilibrium_constant - c * 8.0 / (3.0 * PI)).abs() < 1e-12);
    assert!(sol.feasible && sol.positive);
}

#[test]
fn dm2_g_is_increasing() {
    for spec in [single_dm2(3, 0.1), single_dm2(4, 0.3), single_dm2(5, 0.05)] {
        let mut last = f64::NEG_INFINITY;
        for k in 0..100 {
            let c = 1.0 + 2.0 * k as f64 / 99.0;
            let g = dm2_g(&spec, c).unwrap();
            assert!(g > last, "g not increasing at C = {c}");
            last = g;
        }
    }
}

#[test]
fn dm2_boundary_component_vanishes_at_the_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for &d in &[3usize, 4, 6] {
        for m in 1..4 {
            let sources = (0..m)
                .map(|_| Source::new(random_point(d, &mut rng), rng.random_range(0.001..0.05)))
                .collect();
            let spec = ProblemSpec::new(d, d as f64 - 2.0, sources).unwrap();
            let sol = solve_riesz_dm2(&spec, 1e-10).unwrap();
            assert!((dm2_g(&spec, sol.normalization).unwrap() - 1.0).abs() <= 1e-10);
            let w = sphere_energy(&KernelSpec::new(d, d as f64 - 2.0).unwrap()).unwrap();
            for (cap, &q) in sol.caps().iter().zip(&sol.charges) {
                let eq =
                    signed_cap_equilibrium_dm2_with_phi(cap, q, d, sol.normalization * w).unwrap();
                assert!(
                    eq.boundary_coefficient.abs() <= 1e-9,
                    "{}",
                    eq.boundary_coefficient
                );
                assert!((eq.uniform_coefficient - sol.normalization).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dm2_vanishing_field_limit() {
    let mut last_gamma = f64::INFINITY;
    for k in 1..8 {
        let q = 10f64.powi(-k);
        let sol = solve_riesz_dm2(&single_dm2(4, q), 1e-12).unwrap();
        let gamma = sol.caps()[0].chordal_radius;
        let w = sphere_energy(&KernelSpec::new(4, 2.0).unwrap()).unwrap();
        assert!((gamma - (4.0 * q / (sol.normalization * w)).powf(0.25)).abs() < 1e-14);
        assert!(gamma < last_gamma && sol.normalization > 1.0);
        last_gamma = gamma;
        if k == 7 {
            assert!(sol.normalization - 1.0 < 1e-3);
        }
    }
}

#[test]
fn dm2_overlap_is_reported_not_raised() {
    let spec = ProblemSpec::new(
        3,
        1.0,
        vec![
            Source::new(SpherePoint::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap(), 0.3),
            Source::new(SpherePoint::new(vec![0.0, 0.0, 0.3, 1.0]).unwrap(), 0.3),
        ],
    )
    .unwrap();
    let sol = solve_riesz_dm2(&spec, 1e-10).unwrap();
    assert!(!sol.feasible);
    assert!(!sol.diagnostics.disjointness.violations().is_empty());
}

#[test]
fn dispatch_by_kernel() {
    assert!(solve(&fig1_left()).is_ok());
    assert!(solve(&single_dm2(3, 0.1)).is_ok());
    assert!(solve(&two_charges(p(0.0, 0.0, -1.0), 1.0)).is_err());
}

// ---------------------------------------------------------------------------
// Regions of influence
// ---------------------------------------------------------------------------

#[test]
fn log_influence_radii_equal_support_radii() {
    for spec in [fig1_left(), fig2(), fig4()] {
        let caps = influence_radii(&spec).unwrap();
        let sol = solve_log(&spec).unwrap();
        for (a, b) in caps.iter().zip(sol.caps()) {
            assert!((a.chordal_radius - b.chordal_radius).abs() <= 1e-14);
        }
    }
    let q_bar = reduced_charge(0.25, 0.5);
    assert!((q_bar - 0.2).abs() < 1e-16);
    assert!((4.0 * q_bar / (1.0 + q_bar) - 2.0 / 3.0).abs() < 1e-15);
}

/// Coulomb influence radius for q̄ = 1/5; the pinned digits come from a
/// 30-digit root of the geodesic-radius equation.
#[test]
fn coulomb_root_for_reduced_charge_one_fifth() {
    let alpha = coulomb_alpha_root(0.2, 1e-12).unwrap();
    assert!(coulomb_alpha_residual(0.2, alpha).abs() <= 1e-12);
    assert!((alpha - 0.592064633635590231834888169755).abs() < 1e-14);
    assert!((2.0 * (0.5 * alpha).sin() - 0.583454835947023351305309325983).abs() < 1e-14);
    assert!(coulomb_consistency_residual(0.2, alpha).unwrap().abs() <= 1e-9);
    // Independent check: the consistency residual changes sign at α*.
    let below = coulomb_consistency_residual(0.2, alpha - 1e-3).unwrap();
    let above = coulomb_consistency_residual(0.2, alpha + 1e-3).unwrap();
    assert!(below * above < 0.0);
}

#[test]
fn coulomb_root_shrinks_with_charge() {
    let mut last = PI;
    for &q in &[3.0, 1.0, 0.3, 0.1, 1e-2, 1e-4, 1e-8] {
        let a = coulomb_alpha_root(q, 1e-12).unwrap();
        assert!(a < last);
        if q >= 1e-4 {
            // For tiny α the functional is evaluated at t = cos α ≈ 1 and
            // loses digits; the root itself stays accurate.
            assert!(coulomb_consistency_residual(q, a).unwrap().abs() <= 1e-9);
        }
        assert!((a - (2.0 * q).sqrt()).abs() <= 2.0 * q + 1e-12 || q > 1e-2);
        last = a;
    }
    assert!(last < 1e-2);
}

#[test]
fn coulomb_influence_caps_for_two_quarter_charges() {
    let spec = two_charges(p(0.0, 91f64.sqrt() / 10.0, -0.3), 1.0);
    let caps = influence_radii(&spec).unwrap();
    for cap in &caps {
        assert!((cap.geodesic_radius - 0.592064633635590231834888169755).abs() < 1e-14);
    }
    assert!(influence_radii(&single_dm2(3, 0.1)).is_err());
}

// ---------------------------------------------------------------------------
// Planar image
// ---------------------------------------------------------------------------

#[test]
fn planar_outer_radius() {
    let spec = ProblemSpec::new(2, 0.0, vec![Source::new(p(0.3, -0.1, 0.8), 1.0)]).unwrap();
    let planar = kelvin_planar(&spec).unwrap();
    assert_eq!(planar.outer_radius, 1.0);
    assert!(planar.excluded_discs.is_empty());
    assert_eq!(planar.density(Complex64::new(0.0, 0.0)), 2.0 / PI);
    let sol = kelvin_planar(&fig2()).unwrap();
    assert_eq!(sol.outer_radius, ((1.0 + 0.425 - 0.05) / 0.05f64).sqrt());
    assert!(kelvin_planar(&fig4()).is_err());
}

#[test]
fn planar_discs_are_images_of_the_caps() {
    for spec in [fig1_left(), fig1_right(), fig2()] {
        let planar = kelvin_planar(&spec).unwrap();
        let sol = solve_log(&spec).unwrap();
        let pole = spec.sources().last().unwrap().position.clone();
        for (disc, cap) in planar.excluded_discs.iter().zip(sol.caps()) {
            assert!(disc.contains(stereographic(&cap.center, &pole).unwrap()));
        }
        // Membership agrees with the sphere away from the boundaries.
        for x in sample_uniform(2, 2000, 4) {
            if x.chord(&pole).unwrap() < 1e-6 {
                continue;
            }
            let margin = sol
                .caps()
                .iter()
                .map(|c| (c.center.chord(&x).unwrap() - c.chordal_radius).abs())
                .fold(f64::INFINITY, f64::min);
            if margin < 1e-9 {
                continue;
            }
            let z = stereographic(&x, &pole).unwrap();
            assert_eq!(planar.contains(z), sol.region.contains(&x).unwrap());
        }
    }
}

/// Polar quadrature about the origin with the disc boundaries as angular
/// breakpoints: ∫ ρ over the outer disc minus the discs.
fn planar_mass_oracle(planar: &sphere_equilibrium::support::PlanarEquilibrium) -> f64 {
    let excluded = |r: f64| -> f64 {
        // Angular measure of {θ : r e^{iθ} ∈ ∪ D_i} (discs are disjoint).
        planar
            .excluded_discs
            .iter()
            .map(|d| {
                let c = d.center.norm();
                if r + c <= d.radius {
                    2.0 * PI
                } else if r <= (c - d.radius).abs() || r >= c + d.radius {
                    0.0
                } else {
                    2.0 * ((r * r + c * c - d.radius * d.radius) / (2.0 * r * c))
                        .clamp(-1.0, 1.0)
                        .acos()
                }
            })
            .sum()
    };
    let mut breaks = vec![0.0, planar.outer_radius];
    for d in &planar.excluded_discs {
        for b in [d.center.norm() - d.radius, d.center.norm() + d.radius] {
            if b > 0.0 && b < planar.outer_radius {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += tanh_sinh(
            |r, _, _| planar.density(Complex64::new(r, 0.0)) * r * (2.0 * PI - excluded(r)),
            w[0],
            w[1],
        );
    }
    total
}

#[test]
fn planar_density_has_unit_mass() {
    for spec in [fig1_left(), fig1_right(), fig2()] {
        let planar = kelvin_planar(&spec).unwrap();
        let mass = planar_mass_oracle(&planar);
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    }
    let single =
        kelvin_planar(&ProblemSpec::new(2, 0.0, vec![Source::new(p(0.0, 0.0, 1.0), 1.0)]).unwrap())
            .unwrap();
    // 2/π ∫₀¹ 2πr/(1+r²)² dr = 1.
    assert!((planar_mass_oracle(&single) - 1.0).abs() < 1e-12);
}

#[test]
fn planar_density_is_the_laplacian_of_the_field() {
    let planar = kelvin_planar(&fig2()).unwrap();
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 200 {
        let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let ok = [(0.0, 0.0), (h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
            .iter()
            .all(|&(a, b)| planar.contains(z + Complex64::new(a, b)));
        if !ok {
            continue;
        }
        let f = |dz: (f64, f64)| planar.field(z + Complex64::new(dz.0, dz.1)).unwrap();
        let lap = (f((h, 0.0)) + f((-h, 0.0)) + f((0.0, h)) + f((0.0, -h)) - 4.0 * f((0.0, 0.0)))
            / (h * h);
        assert!((lap / (2.0 * PI) - planar.density(z)).abs() <= 1e-5);
        checked += 1;
    }
}

#[test]
fn planar_field_is_admissible() {
    let planar = kelvin_planar(&fig2()).unwrap();
    assert!((planar.excess_growth() - 0.05).abs() < 1e-15);
    let mut last = f64::NEG_INFINITY;
    for k in 1..8 {
        let r = 10f64.powi(k);
        let z = Complex64::new(r, 0.5 * r);
        let v = planar.field(z).unwrap() - z.norm().ln();
        assert!(v > last);
        last = v;
    }
}
