use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_equilibrium::discrete::{
    angles, energy, gradient, minimize, multistart, perturb, source_distances, OptimizerSettings,
    Termination,
};
use sphere_equilibrium::sphere::{sample_uniform, SpherePoint};
use sphere_equilibrium::support::{ProblemSpec, Source};

fn p(x: f64, y: f64, z: f64) -> SpherePoint {
    SpherePoint::xyz(x, y, z).unwrap()
}

fn north() -> SpherePoint {
    p(0.0, 0.0, 1.0)
}

/// Two charges 1/4 at the north pole and at height −3/10.
fn two_charges(s: f64) -> ProblemSpec {
    ProblemSpec::new(
        2,
        s,
        vec![
            Source::new(north(), 0.25),
            Source::new(p(91f64.sqrt() / 10.0, 0.0, -0.3), 0.25),
        ],
    )
    .unwrap()
}

fn no_field(s: f64) -> ProblemSpec {
    ProblemSpec::new(2, s, vec![]).unwrap()
}

fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn kernel(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        -r.ln()
    } else {
        r.powf(-s)
    }
}

/// The energy written as a sum over ordered pairs of the pair interaction
/// plus the field at both ends, evaluated point by point.
fn energy_oracle(points: &[Vec<f64>], spec: &ProblemSpec) -> f64 {
    let s = spec.s();
    let field = |x: &[f64]| -> f64 {
        spec.sources()
            .iter()
            .map(|src| src.charge * kernel(s, chord(x, src.position.coords())))
            .sum()
    };
    let mut e = 0.0;
    for (i, xi) in points.iter().enumerate() {
        for (j, xj) in points.iter().enumerate() {
            if i != j {
                e += kernel(s, chord(xi, xj)) + field(xi) + field(xj);
            }
        }
    }
    e
}

fn coords(points: &[SpherePoint]) -> Vec<Vec<f64>> {
    points.iter().map(|x| x.coords().to_vec()).collect()
}

fn regular_tetrahedron() -> Vec<SpherePoint> {
    // Rotated off the axes so that no vertex sits at a pole.
    let raw = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    raw.iter()
        .map(|v| p(c * v[0] - s * v[2], v[1], s * v[0] + c * v[2]))
        .collect()
}

fn icosahedron() -> Vec<SpherePoint> {
    let g = 0.5 * (1.0 + 5f64.sqrt());
    let mut v = Vec::new();
    for &a in &[-1.0, 1.0] {
        for &b in &[-g, g] {
            v.push(p(0.0, a, b));
            v.push(p(a, b, 0.0));
            v.push(p(b, 0.0, a));
        }
    }
    v
}

/// Riesz-1 energy (ordered pairs) of the icosahedron from its three distinct
/// chord lengths: every vertex has five neighbours at each of the two short
/// distances and its antipode at distance 2.
fn icosahedron_energy() -> f64 {
    let r5 = 5f64.sqrt();
    12.0 * (5.0 / (2.0 - 2.0 / r5).sqrt() + 5.0 / (2.0 + 2.0 / r5).sqrt() + 0.5)
}

fn quick(restarts: usize, seed: u64) -> OptimizerSettings {
    OptimizerSettings {
        restart_count: restarts,
        seed,
        ..Default::default()
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // Random unit quaternion.
    let mut q = [0.0f64; 4];
    for c in &mut q {
        *c = rng.random::<f64>() - 0.5;
    }
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn rotate(r: &[[f64; 3]; 3], x: &SpherePoint) -> SpherePoint {
    let c = x.coords();
    let v: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|k| r[i][k] * c[k]).sum())
        .collect();
    SpherePoint::new(v).unwrap()
}

#[test]
fn antipodal_pair_energy() {
    let e = energy(&[north(), p(0.0, 0.0, -1.0)], &no_field(0.0)).unwrap();
    assert!((e + 2.0 * 2f64.ln()).abs() < 1e-15, "{e}");
}

#[test]
fn energy_matches_the_symmetric_pair_form() {
    for (k, s) in [(0u64, 0.0), (1, 1.0), (2, 0.5)] {
        let spec = two_charges(s);
        for seed in 0..20 {
            let pts = sample_uniform(2, 7 + seed as usize, 100 * k + seed);
            let e = energy(&pts, &spec).unwrap();
            let oracle = energy_oracle(&coords(&pts), &spec);
            assert!(
                (e - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                "s = {s}: {e} vs {oracle}"
            );
        }
    }
}

#[test]
fn energy_reports_coincidences() {
    let spec = two_charges(1.0);
    let x = p(0.3, 0.2, 0.5);
    assert!(energy(&[x.clone(), x.clone()], &spec).is_err());
    assert!(energy(&[north(), x], &spec).is_err());
    assert!(energy(&[p(1.0, 0.0, 0.0)], &spec).is_err());
}

#[test]
fn tetrahedron_is_a_critical_point_and_the_minimum() {
    let spec = no_field(1.0);
    let tet = regular_tetrahedron();
    let exact = 6.0 * 1.5f64.sqrt();
    assert!((energy(&tet, &spec).unwrap() - exact).abs() < 1e-13);
    assert!((energy_oracle(&coords(&tet), &spec) - exact).abs() < 1e-13);
    let g = gradient(&tet, &spec).unwrap();
    assert!(g.iter().flatten().all(|v| v.abs() <= 1e-8), "{g:?}");

    let best = multistart(&spec, 4, &quick(3, 11)).unwrap();
    assert!(best.converged());
    assert!((best.energy - exact).abs() <= 1e-8, "{}", best.energy);
    for (i, a) in best.points.iter().enumerate() {
        for b in &best.points[i + 1..] {
            assert!((a.chord(b).unwrap() - (8.0f64 / 3.0).sqrt()).abs() < 1e-4);
        }
    }
}

#[test]
fn icosahedron_energy_closed_form_and_optimum() {
    let spec = no_field(1.0);
    let exact = icosahedron_energy();
    // Sum over unordered pairs.
    assert!((0.5 * exact - 49.165_253_058).abs() < 1e-8, "{exact}");
    let ico = icosahedron();
    assert!((energy_oracle(&coords(&ico), &spec) - exact).abs() < 1e-11);
    assert!((energy(&ico, &spec).unwrap() - exact).abs() < 1e-11);

    let best = multistart(&spec, 12, &quick(5, 3)).unwrap();
    assert!(best.converged());
    assert!((best.energy - exact).abs() <= 1e-8, "{}", best.energy);
}

#[test]
fn angle_gradient_matches_central_differences() {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (s, spec) in [(0.0, two_charges(0.0)), (1.0, two_charges(1.0))] {
        for trial in 0..100 {
            let n = 10;
            let ang: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.2..2.9), rng.random_range(-3.0..3.0)))
                .collect();
            let pts: Vec<SpherePoint> = ang
                .iter()
                .map(|&(t, f)| SpherePoint::from_angles(t, f))
                .collect();
            if source_distances(&pts, &spec)
                .unwrap()
                .iter()
                .flatten()
                .any(|&r| r < 0.05)
            {
                continue;
            }
            let g = gradient(&pts, &spec).unwrap();
            let at = |k: usize, which: usize, delta: f64| -> f64 {
                let v: Vec<Vec<f64>> = ang
                    .iter()
                    .enumerate()
                    .map(|(j, &(t, f))| {
                        let (mut t, mut f) = (t, f);
                        if j == k {
                            if which == 0 {
                                t += delta;
                            } else {
                                f += delta;
                            }
                        }
                        vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()]
                    })
                    .collect();
                energy_oracle(&v, &spec)
            };
            let fd: Vec<[f64; 2]> = (0..n)
                .map(|k| [0, 1].map(|w| (at(k, w, h) - at(k, w, -h)) / (2.0 * h)))
                .collect();
            let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = g
                .iter()
                .flatten()
                .zip(fd.iter().flatten())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(
                err <= 1e-5 * scale,
                "s = {s}, trial {trial}: {err} vs scale {scale}"
            );
        }
    }
}

#[test]
fn azimuthal_gradient_sums_to_zero_for_a_polar_field() {
    let spec = ProblemSpec::new(2, 0.0, vec![Source::new(north(), 0.5)]).unwrap();
    for seed in 0..5 {
        let pts = sample_uniform(2, 10, seed);
        let g = gradient(&pts, &spec).unwrap();
        let sum: f64 = g.iter().map(|v| v[1]).sum();
        assert!(sum.abs() <= 1e-10, "{sum}");
    }
}

#[test]
fn gradient_is_singular_at_the_poles() {
    let spec = no_field(1.0);
    assert!(gradient(&[north(), p(1.0, 0.0, 0.0)], &spec).is_err());
    assert!(gradient(&[p(0.0, 0.0, -1.0), p(1.0, 0.0, 0.0)], &spec).is_err());
    let (t, f) = angles(&p(0.0, 1.0, 0.0)).unwrap();
    assert!(
        (t - std::f64::consts::FRAC_PI_2).abs() < 1e-15
            && (f - std::f64::consts::FRAC_PI_2).abs() < 1e-15
    );
}

#[test]
fn energy_is_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [0.0, 1.0] {
        let spec = two_charges(s);
        for seed in 0..10 {
            let r = random_rotation(&mut rng);
            let pts = sample_uniform(2, 40, seed);
            let moved: Vec<SpherePoint> = pts.iter().map(|x| rotate(&r, x)).collect();
            let sources: Vec<Source> = spec
                .sources()
                .iter()
                .map(|src| Source::new(rotate(&r, &src.position), src.charge))
                .collect();
            let spec_r = ProblemSpec::new(2, s, sources).unwrap();
            let a = energy(&pts, &spec).unwrap();
            let b = energy(&moved, &spec_r).unwrap();
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn antipodal_pair_from_a_random_start() {
    let spec = no_field(0.0);
    for seed in 0..5 {
        let start = sample_uniform(2, 2, seed);
        let out = minimize(&start, &spec, &OptimizerSettings::default()).unwrap();
        assert!(out.converged());
        assert!((out.points[0].chord(&out.points[1]).unwrap() - 2.0).abs() <= 1e-6);
        assert!(
            (out.energy + 2.0 * 2f64.ln()).abs() <= 1e-10,
            "{}",
            out.energy
        );
    }
}

#[test]
fn descent_is_monotone_and_reaches_the_tolerance() {
    for s in [0.0, 1.0] {
        let spec = two_charges(s);
        let start = sample_uniform(2, 60, 9);
        let settings = OptimizerSettings::default();
        let out = minimize(&start, &spec, &settings).unwrap();
        assert_eq!(out.termination, Termination::Converged);
        assert!(out.grad_inf_norm <= settings.tolerance_for(60));
        assert_eq!(out.energy_trace.len(), out.iterations + 1);
        assert!(out.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*out.energy_trace.last().unwrap(), out.energy);
        assert!(
            (energy(&out.points, &spec).unwrap() - out.energy).abs() <= 1e-9 * out.energy.abs()
        );
        assert!(out
            .points
            .iter()
            .all(|x| (x.coords().iter().map(|c| c * c).sum::<f64>() - 1.0).abs() <= 1e-12));
    }
}

#[test]
fn minimize_handles_a_start_at_the_antipode_of_the_first_source() {
    let spec = ProblemSpec::new(2, 0.0, vec![Source::new(p(0.0, 0.6, 0.8), 0.5)]).unwrap();
    let mut start = sample_uniform(2, 20, 1);
    start[0] = p(0.0, -0.6, -0.8);
    let out = minimize(&start, &spec, &OptimizerSettings::default()).unwrap();
    assert!(out.converged(), "{:?}", out.termination);
    // Single charge q = 1/2: the support is the complement of the cap of
    // chordal radius 2√(q/(1+q)) about the source.
    let eps = 2.0 * (0.5f64 / 1.5).sqrt();
    let d = source_distances(&out.points, &spec).unwrap();
    assert!(d.iter().flatten().all(|&r| r >= eps - 1e-6));
}

#[test]
fn single_restart_is_minimize_from_uniform_points() {
    let spec = two_charges(0.0);
    let settings = quick(1, 77);
    let a = multistart(&spec, 30, &settings).unwrap();
    let b = minimize(&sample_uniform(2, 30, 77), &spec, &settings).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.restarts_used, 1);
}

#[test]
fn restarts_are_deterministic_and_never_worse() {
    let spec = two_charges(1.0);
    let mut last = f64::INFINITY;
    for restarts in [1, 2, 4, 6] {
        let out = multistart(&spec, 40, &quick(restarts, 5)).unwrap();
        assert!(out.energy <= last, "{restarts}: {} > {last}", out.energy);
        last = out.energy;
        assert_eq!(out.restarts_used, restarts);
    }
    let a = multistart(&spec, 40, &quick(3, 8)).unwrap();
    let b = multistart(&spec, 40, &quick(3, 8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn energy_is_stable_across_seeds() {
    let spec = two_charges(0.0);
    let energies: Vec<f64> = (0..5)
        .map(|seed| multistart(&spec, 100, &quick(3, seed)).unwrap().energy)
        .collect();
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((hi - lo) <= 1e-3 * lo.abs(), "{energies:?}");
}

#[test]
fn optimal_points_avoid_the_influence_caps() {
    let spec = two_charges(0.0);
    let eps = 2.0 / 6f64.sqrt();
    let out = multistart(&spec, 150, &quick(2, 1)).unwrap();
    assert!(out.converged());
    let d = source_distances(&out.points, &spec).unwrap();
    let min = d.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= eps - 1e-6, "{min} < {eps}");
    // Well separated.
    let mut sep = f64::INFINITY;
    for (i, a) in out.points.iter().enumerate() {
        for b in &out.points[i + 1..] {
            sep = sep.min(a.chord(b).unwrap());
        }
    }
    assert!(sep >= 0.5 / 150f64.sqrt());
}

#[test]
fn parallel_evaluation_gives_the_same_minimum() {
    let spec = two_charges(1.0);
    let start = sample_uniform(2, 50, 4);
    let seq = minimize(&start, &spec, &OptimizerSettings::default()).unwrap();
    let par = minimize(
        &start,
        &spec,
        &OptimizerSettings {
            parallel: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(par.converged());
    assert!((seq.energy - par.energy).abs() <= 1e-9 * seq.energy.abs());
}

#[test]
fn perturbation_is_tangent_and_deterministic() {
    let pts = sample_uniform(2, 100, 0);
    let kick = |seed| perturb(&pts, 0.05, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(kick(1), kick(1));
    assert_ne!(kick(1), kick(2));
    let moved = kick(1);
    let mean: f64 = pts
        .iter()
        .zip(&moved)
        .map(|(a, b)| a.chord(b).unwrap())
        .sum::<f64>()
        / 100.0;
    // Mean norm of a 2D Gaussian with σ = 0.05 is 0.05·√(π/2).
    assert!(
        (mean - 0.05 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 0.01,
        "{mean}"
    );
}

#[test]
fn settings_validation_and_serde() {
    let ok = OptimizerSettings::default();
    assert!(ok.validate().is_ok());
    assert_eq!(ok.tolerance_for(500), 5e-6);
    for bad in [
        OptimizerSettings {
            restart_count: 0,
            ..Default::default()
        },
        OptimizerSettings {
            perturbation_scale: 1.0,
            ..Default::default()
        },
        OptimizerSettings {
            gradient_tolerance: Some(0.0),
            ..Default::default()
        },
        OptimizerSettings {
            history_size: 0,
            ..Default::default()
        },
    ] {
        assert!(bad.validate().is_err());
        assert!(multistart(&no_field(1.0), 4, &bad).is_err());
    }
    let parsed: OptimizerSettings =
        serde_json::from_str(r#"{"seed": 3, "restart_count": 2}"#).unwrap();
    assert_eq!(parsed.seed, 3);
    assert_eq!(parsed.max_iterations, 10_000);
    assert!(serde_json::from_str::<OptimizerSettings>(r#"{"seeds": 3}"#).is_err());
}
