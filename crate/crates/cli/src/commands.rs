//! The five subcommands. Each writes its artifacts before reporting a
//! failure, so diagnostics are available even when the exit code is not 0.

use serde::{Deserialize, Serialize};
use sphere_equilibrium::discrete::{multistart, source_distances, PointConfiguration, Termination};
use sphere_equilibrium::potential::log_uniform_support_potential;
use sphere_equilibrium::sphere::{Cap, SpherePoint};
use sphere_equilibrium::support::{
    coulomb_alpha_residual, influence_radii, kelvin_planar, reduced_charge, solve, solve_log,
    PlanarEquilibrium, ProblemSpec, SupportSolution,
};
use sphere_equilibrium::verify::{
    check_cap_exclusion, check_empirical_density, check_planar_density, check_variational,
    potential_oracle, random_windows, Measure, VerificationReport, Window,
};
use sphere_equilibrium::Error;

use crate::config::{ProblemConfig, RunConfig};
use crate::error::CliError;
use crate::output::{float, OutputDir, POINTS_HEADER, PROFILE_HEADER};

/// Shared command environment.
pub struct Context {
    pub out: OutputDir,
    /// Row-parallel energy evaluation (more than one thread requested).
    pub parallel: bool,
}

fn unsupported(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

/// 1-based index pairs of overlapping caps.
fn overlaps(solution: &SupportSolution) -> Vec<[usize; 2]> {
    solution
        .diagnostics
        .disjointness
        .violations()
        .iter()
        .map(|v| [v.i + 1, v.j + 1])
        .collect()
}

fn describe_overlaps(pairs: &[[usize; 2]]) -> String {
    let list: Vec<String> = pairs.iter().map(|[i, j]| format!("({i}, {j})")).collect();
    format!("caps overlap: {}", list.join(", "))
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapSummary {
    /// 1-based source index.
    pub source: usize,
    pub charge: f64,
    pub center: SpherePoint,
    pub gamma: f64,
    pub t: f64,
    pub alpha: f64,
}

fn cap_summaries(caps: &[Cap], charges: &[f64]) -> Vec<CapSummary> {
    caps.iter()
        .zip(charges)
        .enumerate()
        .map(|(i, (c, &q))| CapSummary {
            source: i + 1,
            charge: q,
            center: c.center.clone(),
            gamma: c.chordal_radius,
            t: c.height,
            alpha: c.geodesic_radius,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub mass: f64,
    pub solver: f64,
    pub iterations: usize,
}

/// Contents of `result.json` written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub format: String,
    pub problem: ProblemConfig,
    pub feasible: bool,
    pub positive: bool,
    pub overlaps: Vec<[usize; 2]>,
    /// Density of the equilibrium measure with respect to `σ_d`.
    #[serde(rename = "C")]
    pub normalization: f64,
    /// Value of the weighted potential on the support.
    #[serde(rename = "F_Q")]
    pub equilibrium_constant: f64,
    pub caps: Vec<CapSummary>,
    pub residuals: Residuals,
    pub solution: SupportSolution,
    pub planar: Option<PlanarEquilibrium>,
}

pub const SOLVE_FORMAT: &str = "speq-solve-v1";

fn solve_output(
    problem: ProblemConfig,
    solution: SupportSolution,
    planar: Option<PlanarEquilibrium>,
) -> SolveOutput {
    SolveOutput {
        format: SOLVE_FORMAT.into(),
        problem,
        feasible: solution.feasible,
        positive: solution.positive,
        overlaps: overlaps(&solution),
        normalization: solution.normalization,
        equilibrium_constant: solution.equilibrium_constant,
        caps: cap_summaries(solution.caps(), &solution.charges),
        residuals: Residuals {
            mass: solution.diagnostics.mass_residual,
            solver: solution.diagnostics.solver_residual,
            iterations: solution.diagnostics.iterations,
        },
        solution,
        planar,
    }
}

/// A unit tangent vector at `a`, pointing towards `toward` when possible.
fn tangent(a: &SpherePoint, toward: Option<&SpherePoint>) -> Vec<f64> {
    let ac = a.coords();
    let project = |v: &[f64]| -> Option<Vec<f64>> {
        let dot: f64 = v.iter().zip(ac).map(|(x, y)| x * y).sum();
        let w: Vec<f64> = v.iter().zip(ac).map(|(x, y)| x - dot * y).collect();
        let n = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        (n > 1e-8).then(|| w.iter().map(|c| c / n).collect())
    };
    if let Some(w) = toward.and_then(|b| project(b.coords())) {
        return w;
    }
    let k = (0..ac.len())
        .min_by(|&i, &j| ac[i].abs().total_cmp(&ac[j].abs()))
        .expect("points have coordinates");
    let mut e = vec![0.0; ac.len()];
    e[k] = 1.0;
    project(&e).expect("least aligned axis is not parallel")
}

/// Weighted potential `U^μ + Q` along a great circle through each cap
/// center, towards the next source.
fn density_profile(
    spec: &ProblemSpec,
    solution: &SupportSolution,
    cfg: &RunConfig,
) -> Result<Vec<Vec<String>>, CliError> {
    let caps = solution.caps();
    let n = cfg.output.profile_points.max(2);
    let closed_form = solution.d == 2 && solution.s == 0.0;
    let measure = Measure::UniformOnSupport {
        region: solution.region.clone(),
        density: solution.normalization,
    };
    let kernel = solution.kernel();
    let mut rows = Vec::new();
    for (i, cap) in caps.iter().enumerate() {
        let next = caps
            .get((i + 1) % caps.len())
            .filter(|_| caps.len() > 1)
            .map(|c| &c.center);
        let e = tangent(&cap.center, next);
        for k in 0..n {
            let xi = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
            let rho = (1.0 - xi * xi).sqrt();
            let x = SpherePoint::new(
                cap.center
                    .coords()
                    .iter()
                    .zip(&e)
                    .map(|(a, b)| xi * a + rho * b)
                    .collect(),
            )?;
            let field = match spec.field(&x) {
                Ok(v) => v,
                Err(Error::Singularity(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let (u, se) = if closed_form {
                (
                    log_uniform_support_potential(caps, solution.normalization, &x)?,
                    0.0,
                )
            } else {
                let seed = ((i as u64) << 32) | k as u64;
                let est = potential_oracle(
                    &measure,
                    &kernel,
                    &x,
                    cfg.output.profile_samples.max(2),
                    seed,
                )?;
                (est.value, est.std_error)
            };
            rows.push(vec![
                (i + 1).to_string(),
                float(xi),
                float(x.chord(&cap.center)?),
                float(u + field),
                float(se),
                solution.region.contains(&x)?.to_string(),
            ]);
        }
    }
    Ok(rows)
}

pub fn solve_cmd(cfg: &RunConfig, with_planar: bool, ctx: &Context) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let solution = solve(&spec).map_err(unsupported)?;
    let planar = if with_planar && solution.feasible && solution.d == 2 && solution.s == 0.0 {
        Some(kelvin_planar(&spec)?)
    } else {
        None
    };
    let out = solve_output(cfg.problem(), solution.clone(), planar);
    let path = ctx.out.write_json("result.json", &out)?;
    println!("wrote {}", path.display());
    println!(
        "C = {:.17e}, F_Q = {:.17e}",
        out.normalization, out.equilibrium_constant
    );
    for c in &out.caps {
        println!(
            "cap {}: gamma = {:.17e}, t = {:.17e}, alpha = {:.17e}",
            c.source, c.gamma, c.t, c.alpha
        );
    }
    if !out.feasible {
        return Err(CliError::Infeasible(describe_overlaps(&out.overlaps)));
    }
    let rows = density_profile(&spec, &solution, cfg)?;
    let header: Vec<String> = [
        "cap",
        "xi",
        "chord",
        "weighted_potential",
        "std_error",
        "in_support",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let path = ctx
        .out
        .write_csv("density_profile.csv", PROFILE_HEADER, &header, rows)?;
    println!("wrote {}", path.display());
    println!("feasible: caps pairwise disjoint");
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

/// Caps that optimal points avoid, when the problem has them.
fn exclusion_caps(spec: &ProblemSpec) -> Option<Vec<Cap>> {
    if spec.m() == 0 {
        return None;
    }
    influence_radii(spec).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub format: String,
    pub problem: ProblemConfig,
    pub settings: sphere_equilibrium::discrete::OptimizerSettings,
    pub n: usize,
    pub energy: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub termination: Termination,
    pub min_source_distance: Option<f64>,
    pub min_pair_distance: f64,
    pub influence_caps: Option<Vec<CapSummary>>,
    pub cap_exclusion: Option<VerificationReport>,
}

fn min_pair_distance(points: &[SpherePoint]) -> Result<f64, CliError> {
    let mut m = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            m = m.min(a.chord(b)?);
        }
    }
    Ok(m)
}

pub fn optimize_cmd(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let settings = cfg.optimize.settings(ctx.parallel);
    let n = cfg.optimize.n;
    let result: PointConfiguration = multistart(&spec, n, &settings).map_err(unsupported)?;
    let distances = source_distances(&result.points, &spec)?;
    let m = spec.m();
    let mut header: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=m).map(|i| format!("dist_{i}")));
    if m > 0 {
        header.push("nearest".into());
    }
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .zip(&distances)
        .map(|(x, d)| {
            let mut row: Vec<String> = x.coords().iter().map(|&c| float(c)).collect();
            row.extend(d.iter().map(|&v| float(v)));
            if m > 0 {
                row.push(float(d.iter().cloned().fold(f64::INFINITY, f64::min)));
            }
            row
        })
        .collect();
    let csv_path = ctx
        .out
        .write_csv("points.csv", POINTS_HEADER, &header, rows)?;

    let caps = exclusion_caps(&spec);
    let cap_exclusion = caps
        .as_ref()
        .map(|c| check_cap_exclusion(&result.points, c))
        .transpose()?;
    let charges: Vec<f64> = spec.sources().iter().map(|s| s.charge).collect();
    let out = OptimizeOutput {
        format: "speq-optimize-v1".into(),
        problem: cfg.problem(),
        settings,
        n,
        energy: result.energy,
        grad_inf_norm: result.grad_inf_norm,
        iterations: result.iterations,
        restarts_used: result.restarts_used,
        termination: result.termination,
        min_source_distance: (m > 0).then(|| {
            distances
                .iter()
                .flatten()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        }),
        min_pair_distance: min_pair_distance(&result.points)?,
        influence_caps: caps.as_ref().map(|c| cap_summaries(c, &charges)),
        cap_exclusion,
    };
    let json_path = ctx.out.write_json("result.json", &out)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    println!(
        "N = {n}: energy = {:.17e}, |grad|_inf = {:.3e}, {:?} after {} iterations",
        out.energy, out.grad_inf_norm, out.termination, out.iterations
    );
    if let Some(r) = &out.cap_exclusion {
        println!(
            "cap exclusion: {} points inside influence caps",
            r.statistic
        );
    }
    match out.termination {
        Termination::LineSearchFailed => Err(CliError::Optimizer(
            "line search failed; best configuration written".into(),
        )),
        Termination::MaxIterations => {
            eprintln!("warning: iteration limit reached before the gradient tolerance");
            Ok(())
        }
        Termination::Converged => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub format: String,
    pub problem: ProblemConfig,
    pub feasible: bool,
    /// Whether the recomputed feasibility agrees with a supplied solve result.
    pub feasibility_matches: Option<bool>,
    pub passed: bool,
    pub reports: Vec<VerificationReport>,
}

pub fn verify_cmd(
    cfg: &RunConfig,
    stored: Option<&SolveOutput>,
    points: Option<&[SpherePoint]>,
    ctx: &Context,
) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let solution = solve(&spec).map_err(unsupported)?;
    let feasibility_matches =
        stored.map(|s| s.feasible == solution.feasible && s.solution.feasible == solution.feasible);
    let mut reports = Vec::new();
    if solution.feasible {
        reports.push(check_variational(
            &solution,
            &spec,
            &cfg.verify.variational(),
        )?);
        if solution.d == 2 && solution.s == 0.0 && spec.m() > 0 {
            let planar = kelvin_planar(&spec)?;
            reports.push(check_planar_density(&planar, cfg.verify.planar_grid)?);
        }
        if let Some(points) = points {
            let caps = exclusion_caps(&spec).unwrap_or_else(|| solution.caps().to_vec());
            reports.push(check_cap_exclusion(points, &caps)?);
            let mut windows: Vec<Window> = random_windows(
                &solution.region,
                cfg.verify.windows,
                cfg.verify.window_radius,
                cfg.verify.seed,
            )?
            .into_iter()
            .map(Window::Cap)
            .collect();
            windows.push(Window::WholeSupport);
            reports.push(check_empirical_density(
                points,
                &solution,
                &windows,
                cfg.verify.density_tolerance,
            )?);
        }
    }
    let passed =
        solution.feasible && reports.iter().all(|r| r.passed) && feasibility_matches != Some(false);
    let out = VerifyOutput {
        format: "speq-verify-v1".into(),
        problem: cfg.problem(),
        feasible: solution.feasible,
        feasibility_matches,
        passed,
        reports,
    };
    let path = ctx.out.write_json("result.json", &out)?;
    println!("wrote {}", path.display());
    for r in &out.reports {
        println!(
            "{}: {} (statistic {:.6e}, tolerance {:.6e})",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.statistic,
            r.tolerance
        );
    }
    if !solution.feasible {
        return Err(CliError::Infeasible(describe_overlaps(&overlaps(
            &solution,
        ))));
    }
    if feasibility_matches == Some(false) {
        return Err(CliError::Verification(
            "stored feasibility differs from the recomputed one".into(),
        ));
    }
    if !passed {
        let failed: Vec<&str> = out
            .reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// kelvin
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KelvinOutput {
    pub format: String,
    pub problem: ProblemConfig,
    pub feasible: bool,
    pub overlaps: Vec<[usize; 2]>,
    pub planar: Option<PlanarEquilibrium>,
    pub check: Option<VerificationReport>,
}

pub fn kelvin_cmd(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let solution = solve_log(&spec).map_err(unsupported)?;
    if spec.m() == 0 {
        return Err(CliError::Config(
            "the planar image needs at least one source".into(),
        ));
    }
    let (planar, check) = if solution.feasible {
        let planar = kelvin_planar(&spec)?;
        let check = check_planar_density(&planar, cfg.verify.planar_grid)?;
        (Some(planar), Some(check))
    } else {
        (None, None)
    };
    let out = KelvinOutput {
        format: "speq-kelvin-v1".into(),
        problem: cfg.problem(),
        feasible: solution.feasible,
        overlaps: overlaps(&solution),
        planar,
        check,
    };
    let path = ctx.out.write_json("result.json", &out)?;
    println!("wrote {}", path.display());
    let Some(planar) = &out.planar else {
        return Err(CliError::Infeasible(describe_overlaps(&out.overlaps)));
    };
    println!("outer radius = {:.17e}", planar.outer_radius);
    for (i, d) in planar.excluded_discs.iter().enumerate() {
        println!(
            "disc {}: center = ({:.17e}, {:.17e}), radius = {:.17e}",
            i + 1,
            d.center.re,
            d.center.im,
            d.radius
        );
    }
    let check = out.check.as_ref().expect("computed with the planar image");
    if !check.passed {
        return Err(CliError::Verification(check.name.clone()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// influence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceCap {
    #[serde(flatten)]
    pub cap: CapSummary,
    pub reduced_charge: f64,
    /// Residual of the Coulomb equation for `α` (`s = 1` only).
    pub coulomb_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceOutput {
    pub format: String,
    pub problem: ProblemConfig,
    pub caps: Vec<InfluenceCap>,
    pub disjoint: bool,
    pub overlaps: Vec<[usize; 2]>,
}

pub fn influence_cmd(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let caps = influence_radii(&spec).map_err(unsupported)?;
    let q = spec.total_charge();
    let charges: Vec<f64> = spec.sources().iter().map(|s| s.charge).collect();
    let report = sphere_equilibrium::sphere::caps_pairwise_disjoint(&caps)?;
    let out = InfluenceOutput {
        format: "speq-influence-v1".into(),
        problem: cfg.problem(),
        caps: cap_summaries(&caps, &charges)
            .into_iter()
            .map(|c| {
                let q_bar = reduced_charge(c.charge, q);
                InfluenceCap {
                    coulomb_residual: (spec.s() == 1.0)
                        .then(|| coulomb_alpha_residual(q_bar, c.alpha)),
                    reduced_charge: q_bar,
                    cap: c,
                }
            })
            .collect(),
        disjoint: report.disjoint,
        overlaps: report
            .violations()
            .iter()
            .map(|v| [v.i + 1, v.j + 1])
            .collect(),
    };
    let path = ctx.out.write_json("result.json", &out)?;
    println!("wrote {}", path.display());
    for c in &out.caps {
        println!(
            "cap {}: reduced charge = {:.17e}, gamma = {:.17e}, alpha = {:.17e}",
            c.cap.source, c.reduced_charge, c.cap.gamma, c.cap.alpha
        );
    }
    Ok(())
}
