//! Independent oracles and checkers.
//!
//! The oracles evaluate potentials without the closed forms of
//! [`crate::potential`]: by Monte Carlo or, for zonal pieces on `S²` with
//! the logarithmic kernel, by one-dimensional quadrature after averaging
//! over the azimuth,
//!
//! ```text
//! (1/2π) ∫ log(A − B cos φ) dφ = log((A + √(A² − B²))/2).
//! ```
//!
//! The checkers test the variational characterization of the equilibrium
//! measure, the exclusion of optimal points from the influence caps, the
//! agreement of empirical point densities with the equilibrium density and
//! the planar image of the logarithmic solution. Every checker returns a
//! [`VerificationReport`] rather than an error when the check fails.
//!
//! Monte-Carlo streams are derived from one seed with one ChaCha8 stream per
//! evaluation point, so reports are identical whatever the number of
//! threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{zonal_weight, KernelSpec, SignedCapDensity};
use crate::quadrature::{gauss_legendre, integrate};
use crate::sphere::{geodesic_distance, random_point, Cap, Frame, SpherePoint, SupportRegion};
use crate::support::{PlanarEquilibrium, ProblemSpec, SupportSolution};

/// Points closer than this to a cap boundary (inside) count as violations
/// only if they are deeper than the margin.
pub const CAP_EXCLUSION_MARGIN: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One pass/fail test: `passed ⇔ statistic ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, statistic: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: statistic <= tolerance,
            statistic,
            tolerance,
        }
    }
}

/// Outcome of a checker. `statistic`/`tolerance` are those of the first
/// failing sub-check, or of the first sub-check when all pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub tolerance: f64,
    /// Number of evaluation points, windows or Monte-Carlo samples used.
    pub samples: usize,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn from_checks(
        name: impl Into<String>,
        checks: Vec<Check>,
        samples: usize,
        seed: Option<u64>,
    ) -> Self {
        let lead = checks.iter().find(|c| !c.passed).or(checks.first());
        let (statistic, tolerance) = lead.map_or((0.0, 0.0), |c| (c.statistic, c.tolerance));
        Self {
            name: name.into(),
            passed: checks.iter().all(|c| c.passed),
            statistic,
            tolerance,
            samples,
            seed,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

// ---------------------------------------------------------------------------
// Potential oracles
// ---------------------------------------------------------------------------

/// A measure whose potential the oracles can evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Measure {
    /// `density · σ_d` restricted to the region.
    UniformOnSupport {
        region: SupportRegion,
        density: f64,
    },
    /// Normalized surface measure on the cap (total mass one).
    UniformOnCap {
        cap: Cap,
    },
    PointMass {
        at: SpherePoint,
        mass: f64,
    },
}

impl Measure {
    fn dim(&self) -> usize {
        match self {
            Measure::UniformOnSupport { region, .. } => region.dimension,
            Measure::UniformOnCap { cap } => cap.dim(),
            Measure::PointMass { at, .. } => at.dim(),
        }
    }

    /// Density with respect to `σ_d` at `y` (absolutely continuous measures).
    fn density_at(&self, y: &SpherePoint) -> Result<f64> {
        Ok(match self {
            Measure::UniformOnSupport { region, density } => {
                if region.contains(y)? {
                    *density
                } else {
                    0.0
                }
            }
            Measure::UniformOnCap { cap } => {
                if cap.contains(y)? {
                    1.0 / cap.area()
                } else {
                    0.0
                }
            }
            Measure::PointMass { .. } => unreachable!("point masses have no density"),
        })
    }
}

/// Estimate with its standard error (quadrature error bound for the
/// deterministic path, zero for exact evaluations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample mean and standard error of the mean.
fn mean_and_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Draws `y ∈ S^d` and the product `w(y) k(x, y)` of the importance weight
/// and the kernel, for a `σ_d`-distributed target.
///
/// On `S²` the distance `v = 1 − ⟨x, y⟩` is drawn with density `∝ v^{−s/2}`
/// and the azimuth uniformly, so `w·k` is constant for the Riesz kernel and
/// the estimator has bounded variance even though `k²` is not integrable.
/// In higher dimensions `y ~ σ_d` directly.
struct PolarSampler {
    x: SpherePoint,
    kernel: KernelSpec,
    frame: Option<Frame>,
}

impl PolarSampler {
    fn new(x: &SpherePoint, kernel: &KernelSpec) -> Result<Self> {
        let frame = if x.dim() == 2 {
            Some(Frame::with_pole(x)?)
        } else {
            None
        };
        Ok(Self {
            x: x.clone(),
            kernel: *kernel,
            frame,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<(SpherePoint, f64)> {
        let Some(frame) = &self.frame else {
            let y = random_point(self.kernel.d, rng);
            let r = self.x.chord(&y)?;
            return Ok((
                y,
                if r > 0.0 {
                    self.kernel.of_chord(r)
                } else {
                    0.0
                },
            ));
        };
        let unit: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let phi = 2.0 * PI * rng.random::<f64>();
        let s = self.kernel.s;
        let (v, wk) = if self.kernel.is_log() {
            let v = 2.0 * unit;
            (v, -0.5 * (2.0 * v).ln())
        } else {
            let a = 1.0 - 0.5 * s;
            (2.0 * unit.powf(1.0 / a), 2f64.powf(2.0 * a - 2.0) / a)
        };
        let u = 1.0 - v;
        let rho = (v * (2.0 - v)).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        let local = [rho * cp, rho * sp, u];
        let y = SpherePoint::new(frame.to_global(&local).to_vec())?;
        Ok((y, wk))
    }
}

/// Monte-Carlo potential `∫ k_s(x, y) dμ(y)` with `samples` draws from the
/// ChaCha8 stream `seed`. Point masses are evaluated exactly.
pub fn potential_oracle(
    measure: &Measure,
    kernel: &KernelSpec,
    x: &SpherePoint,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    potential_oracle_with(measure, kernel, x, samples, &mut rng)
}

fn potential_oracle_with(
    measure: &Measure,
    kernel: &KernelSpec,
    x: &SpherePoint,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Estimate> {
    if measure.dim() != kernel.d || x.dim() != kernel.d {
        return Err(Error::DimensionMismatch {
            expected: kernel.d,
            found: if x.dim() != kernel.d {
                x.dim()
            } else {
                measure.dim()
            },
        });
    }
    if let Measure::PointMass { at, mass } = measure {
        let r = x.chord(at)?;
        if r == 0.0 {
            return Err(Error::Singularity(
                "potential of a point mass at its atom".into(),
            ));
        }
        return Ok(Estimate {
            value: mass * kernel.of_chord(r),
            std_error: 0.0,
            samples: 0,
        });
    }
    if samples < 2 {
        return Err(Error::InvalidProblem(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    let sampler = PolarSampler::new(x, kernel)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (y, wk) = sampler.draw(rng)?;
        let f = measure.density_at(&y)? * wk;
        sum += f;
        sum_sq += f * f;
    }
    let (value, std_error) = mean_and_se(sum, sum_sq, samples);
    Ok(Estimate {
        value,
        std_error,
        samples,
    })
}

/// Logarithmic potential of `σ₂` restricted to the cap `{⟨y, a⟩ > t}` at a
/// point with `⟨x, a⟩ = ξ`, by quadrature in `u = ⟨y, a⟩` of the azimuthal
/// mean `−½ log((A + √(A² − B²))/2)`, `A = 2 − 2ξu`, `B = 2√((1−ξ²)(1−u²))`.
fn log_cap_quadrature(t: f64, xi: f64) -> (f64, f64) {
    let mean = |u: f64| {
        let a = 2.0 - 2.0 * xi * u;
        let b = 2.0 * ((1.0 - xi * xi) * (1.0 - u * u)).max(0.0).sqrt();
        let root = (a * a - b * b).max(0.0).sqrt();
        -0.5 * (0.5 * (a + root)).ln()
    };
    let mut value = 0.0;
    let mut error = 0.0;
    let mut pieces = vec![t];
    if xi > t && xi < 1.0 {
        pieces.push(xi);
    }
    pieces.push(1.0);
    for w in pieces.windows(2) {
        let r = integrate(|u| 0.5 * mean(u), w[0], w[1], 1e-15, 1e-14, 2000);
        value += r.value;
        error += r.error;
    }
    (value, error)
}

/// Deterministic potential oracle for the logarithmic kernel on `S²`:
/// every supported measure is a signed sum of zonal pieces (the sphere and
/// caps about their own centers), each integrated by 1D quadrature.
pub fn potential_oracle_zonal(
    measure: &Measure,
    kernel: &KernelSpec,
    x: &SpherePoint,
) -> Result<Estimate> {
    if !(kernel.d == 2 && kernel.is_log()) {
        return Err(Error::Unsupported(
            "the zonal quadrature oracle covers the logarithmic kernel on S² only".into(),
        ));
    }
    let est = |value: f64, error: f64| Estimate {
        value,
        std_error: error,
        samples: 0,
    };
    match measure {
        Measure::PointMass { .. } => potential_oracle(measure, kernel, x, 0, 0),
        Measure::UniformOnCap { cap } => {
            let (v, e) = log_cap_quadrature(cap.height, cap.zonal(x)?.clamp(-1.0, 1.0));
            let area = cap.area();
            Ok(est(v / area, e / area))
        }
        Measure::UniformOnSupport { region, density } => {
            // Whole sphere: a cap of height −1 about x itself.
            let (mut v, mut e) = log_cap_quadrature(-1.0, 1.0);
            for cap in &region.caps {
                let (vc, ec) = log_cap_quadrature(cap.height, cap.zonal(x)?.clamp(-1.0, 1.0));
                v -= vc;
                e += ec;
            }
            Ok(est(density * v, density * e))
        }
    }
}

/// Monte-Carlo potential of the signed measure `η'(u) dσ_d` on the cap
/// complement `{⟨y, a⟩ ≤ t}`, `a` the cap center. The zonal coordinate is
/// drawn through `t − u = (1 + t) y^{1/(1+α)}` (`α` the edge exponent), which
/// makes the weight `η'(u) w_d(u) du/dy` bounded; the direction orthogonal
/// to `a` is uniform.
pub fn signed_cap_potential_mc(
    density: &SignedCapDensity,
    center: &SpherePoint,
    x: &SpherePoint,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let d = density.d;
    if center.dim() != d || x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if center.dim() != d {
                center.dim()
            } else {
                x.dim()
            },
        });
    }
    if samples < 2 {
        return Err(Error::InvalidProblem(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    let kernel = KernelSpec::new(d, density.s)?;
    let t = density.height;
    let k = 1.0 / (1.0 + density.edge_exponent());
    let a = center.coords();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let y: f64 = 1.0 - rng.random::<f64>();
        let h = (1.0 + t) * y.powf(k);
        let u = t - h;
        let jac = (1.0 + t) * k * y.powf(k - 1.0);
        let weight = density.density_at_gap(h)? * jac * zonal_weight(d, u);
        // Uniform unit vector orthogonal to a.
        let mut g: Vec<f64> = (0..=d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ga: f64 = g.iter().zip(a).map(|(p, q)| p * q).sum();
        g.iter_mut().zip(a).for_each(|(p, q)| *p -= ga * q);
        let gn = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        let rho = (1.0 - u * u).max(0.0).sqrt();
        let point: Vec<f64> = a
            .iter()
            .zip(&g)
            .map(|(p, q)| u * p + rho * q / gn)
            .collect();
        let r = x
            .coords()
            .iter()
            .zip(&point)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        let f = weight * kernel.of_chord(r);
        sum += f;
        sum_sq += f * f;
    }
    let (value, std_error) = mean_and_se(sum, sum_sq, samples);
    Ok(Estimate {
        value,
        std_error,
        samples,
    })
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

/// `n` points of `σ_d` conditioned on lying in the region (`inside = true`)
/// or in one of its removed caps (`inside = false`), by rejection.
pub fn sample_region(
    region: &SupportRegion,
    n: usize,
    inside: bool,
    seed: u64,
) -> Result<Vec<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 100) {
            return Err(Error::Precondition(format!(
                "rejection sampling of the {} found too few points",
                if inside { "support" } else { "excluded caps" }
            )));
        }
        let y = random_point(region.dimension, &mut rng);
        if region.contains(&y)? == inside {
            out.push(y);
        }
    }
    Ok(out)
}

/// Whether a window cap lies in the closure of the region.
fn window_inside(region: &SupportRegion, window: &Cap) -> Result<bool> {
    for cap in &region.caps {
        let dist = geodesic_distance(&window.center, &cap.center)?;
        if dist < window.geodesic_radius + cap.geodesic_radius - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `count` windows of the given geodesic radius with uniformly distributed
/// centers, conditioned on lying inside the support.
pub fn random_windows(
    region: &SupportRegion,
    count: usize,
    geodesic_radius: f64,
    seed: u64,
) -> Result<Vec<Cap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Precondition(format!(
                "no room for windows of geodesic radius {geodesic_radius} in the support"
            )));
        }
        let w = Cap::from_geodesic(random_point(region.dimension, &mut rng), geodesic_radius)?;
        if window_inside(region, &w)? {
            out.push(w);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Variational inequalities
// ---------------------------------------------------------------------------

/// Parameters of [`check_variational`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalSettings {
    /// Number of support points and, separately, of exterior points.
    pub grid: usize,
    /// Monte-Carlo samples per evaluation point.
    pub samples: usize,
    pub seed: u64,
    /// Added to `3·SE` in the constancy test.
    pub interior_slack: f64,
    /// Added to `3·SE` in the exterior test.
    pub exterior_slack: f64,
}

impl Default for VariationalSettings {
    fn default() -> Self {
        Self {
            grid: 30,
            samples: 1_000_000,
            seed: 0,
            interior_slack: 0.0,
            exterior_slack: 1e-3,
        }
    }
}

/// Weighted potential `U^μ(x) + Q(x)` estimated at each point, with one
/// ChaCha8 stream per point.
fn weighted_potentials(
    measure: &Measure,
    kernel: &KernelSpec,
    spec: &ProblemSpec,
    points: &[SpherePoint],
    samples: usize,
    seed: u64,
    stream_offset: u64,
) -> Result<Vec<Estimate>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_offset + i as u64);
            let mut e = potential_oracle_with(measure, kernel, x, samples, &mut rng)?;
            e.value += spec.field(x)?;
            Ok(e)
        })
        .collect()
}

/// Tests the variational characterization of `μ_Q = C σ_d|support` with
/// the Monte-Carlo oracle:
///
/// * `interior constancy`: the standard deviation of `U^μ + Q` over `grid`
///   support points is at most `3·SE_rms + interior_slack`;
/// * `exterior inequality`: at `grid` points of the removed caps,
///   `U^μ + Q ≥ mean − (3·SE + exterior_slack)`.
pub fn check_variational(
    solution: &SupportSolution,
    spec: &ProblemSpec,
    settings: &VariationalSettings,
) -> Result<VerificationReport> {
    if settings.grid < 2 || settings.samples < 2 {
        return Err(Error::InvalidProblem(
            "check_variational needs grid ≥ 2 and samples ≥ 2".into(),
        ));
    }
    let kernel = solution.kernel();
    let measure = Measure::UniformOnSupport {
        region: solution.region.clone(),
        density: solution.normalization,
    };
    let interior_points = sample_region(&solution.region, settings.grid, true, settings.seed)?;
    let interior = weighted_potentials(
        &measure,
        &kernel,
        spec,
        &interior_points,
        settings.samples,
        settings.seed,
        0,
    )?;
    let n = interior.len() as f64;
    let mean = interior.iter().map(|e| e.value).sum::<f64>() / n;
    let std = (interior
        .iter()
        .map(|e| (e.value - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    let se_rms = (interior
        .iter()
        .map(|e| e.std_error * e.std_error)
        .sum::<f64>()
        / n)
        .sqrt();
    let mut checks = vec![Check::new(
        "interior constancy",
        std,
        3.0 * se_rms + settings.interior_slack,
    )];
    if !solution.region.caps.is_empty() {
        let exterior_points = sample_region(
            &solution.region,
            settings.grid,
            false,
            settings.seed.wrapping_add(1),
        )?;
        let exterior = weighted_potentials(
            &measure,
            &kernel,
            spec,
            &exterior_points,
            settings.samples,
            settings.seed,
            settings.grid as u64,
        )?;
        // Largest shortfall below the interior mean beyond the noise allowance.
        let shortfall = exterior
            .iter()
            .map(|e| mean - e.value - 3.0 * e.std_error)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new(
            "exterior inequality",
            shortfall,
            settings.exterior_slack,
        ));
    }
    Ok(VerificationReport::from_checks(
        "variational inequalities",
        checks,
        settings.samples,
        Some(settings.seed),
    ))
}

// ---------------------------------------------------------------------------
// Discrete checks
// ---------------------------------------------------------------------------

/// Counts points strictly inside a cap, i.e. closer to its center than the
/// chordal radius minus [`CAP_EXCLUSION_MARGIN`]. Passes iff none is.
pub fn check_cap_exclusion(points: &[SpherePoint], caps: &[Cap]) -> Result<VerificationReport> {
    let mut violations = 0usize;
    for x in points {
        for cap in caps {
            if x.chord(&cap.center)? < cap.chordal_radius - CAP_EXCLUSION_MARGIN {
                violations += 1;
                break;
            }
        }
    }
    Ok(VerificationReport::from_checks(
        "cap exclusion",
        vec![Check::new("points inside caps", violations as f64, 0.0)],
        points.len(),
        None,
    ))
}

/// Fraction of points strictly inside some cap.
pub fn violation_fraction(points: &[SpherePoint], caps: &[Cap]) -> Result<f64> {
    let report = check_cap_exclusion(points, caps)?;
    Ok(report.checks[0].statistic / points.len().max(1) as f64)
}

/// A counting window for [`check_empirical_density`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Cap(Cap),
    WholeSupport,
}

/// Compares window counts with the equilibrium measure: for every window,
/// `|count/N − C σ_d(W)| ≤ tol + 3 √(C σ_d(W)/N)`. The statistic is the
/// largest excess `|count/N − C σ_d(W)| − 3 √(C σ_d(W)/N)`.
pub fn check_empirical_density(
    points: &[SpherePoint],
    solution: &SupportSolution,
    windows: &[Window],
    tol: f64,
) -> Result<VerificationReport> {
    if points.is_empty() {
        return Err(Error::InvalidProblem("no points to count".into()));
    }
    let n = points.len() as f64;
    let mut worst = f64::NEG_INFINITY;
    for w in windows {
        let (count, expected) = match w {
            Window::WholeSupport => {
                let mut c = 0usize;
                for x in points {
                    if solution.region.contains(x)? {
                        c += 1;
                    }
                }
                (c, solution.normalization * solution.region.measure())
            }
            Window::Cap(cap) => {
                if !window_inside(&solution.region, cap)? {
                    return Err(Error::Precondition(
                        "window is not contained in the support".into(),
                    ));
                }
                let mut c = 0usize;
                for x in points {
                    if x.chord(&cap.center)? < cap.chordal_radius {
                        c += 1;
                    }
                }
                (c, solution.normalization * cap.area())
            }
        };
        let excess = (count as f64 / n - expected).abs() - 3.0 * (expected / n).sqrt();
        worst = worst.max(excess);
    }
    Ok(VerificationReport::from_checks(
        "empirical density",
        vec![Check::new("window count excess", worst, tol)],
        windows.len(),
        None,
    ))
}

// ---------------------------------------------------------------------------
// Planar image
// ---------------------------------------------------------------------------

/// Mesh size of the finite-difference Laplacian.
pub const PLANAR_FD_STEP: f64 = 1e-3;

/// Fraction of the circle `|z| = r` that lies inside the disc `|z − c| < ρ`.
fn arc_fraction(r: f64, c: Complex64, rho: f64) -> f64 {
    let a = c.norm();
    if r <= rho - a {
        return 1.0;
    }
    if r >= a + rho || r <= a - rho || a == 0.0 {
        return 0.0;
    }
    let cos = ((r * r + a * a - rho * rho) / (2.0 * r * a)).clamp(-1.0, 1.0);
    cos.acos() / PI
}

/// Mass of the planar equilibrium measure by radial Gauss–Legendre
/// quadrature (`nodes` per panel, panels split where circles meet disc
/// boundaries) of the density times the exact non-excluded arc length.
pub fn planar_mass(planar: &PlanarEquilibrium, nodes: usize) -> f64 {
    let big_r = planar.outer_radius;
    let mut breaks = vec![0.0, big_r];
    for disc in &planar.excluded_discs {
        for b in [
            disc.center.norm() - disc.radius,
            disc.center.norm() + disc.radius,
        ] {
            if b > 0.0 && b < big_r {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let (x, w) = gauss_legendre(nodes.max(2));
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            let r = a + half * (xi + 1.0);
            let free = 1.0
                - planar
                    .excluded_discs
                    .iter()
                    .map(|d| arc_fraction(r, d.center, d.radius))
                    .sum::<f64>();
            total +=
                half * wi * planar.density(Complex64::new(r, 0.0)) * 2.0 * PI * r * free.max(0.0);
        }
    }
    total
}

/// Checks the planar measure: unit mass to `1e-3` by [`planar_mass`],
/// positivity of the density and `ΔQ̃/(2π)` = density at `grid` support
/// points by the five-point Laplacian, to relative `1e-5`.
pub fn check_planar_density(planar: &PlanarEquilibrium, grid: usize) -> Result<VerificationReport> {
    if grid == 0 {
        return Err(Error::InvalidProblem(
            "check_planar_density needs grid ≥ 1".into(),
        ));
    }
    let mass = planar_mass(planar, grid.clamp(16, 256));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = PLANAR_FD_STEP;
    let mut worst_laplacian = 0.0f64;
    let mut min_density = f64::INFINITY;
    let mut found = 0usize;
    let mut attempts = 0usize;
    while found < grid && attempts < 1000 * grid {
        attempts += 1;
        let r = planar.outer_radius * rng.random::<f64>().sqrt();
        let z = Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>());
        if !planar.contains(z) {
            continue;
        }
        found += 1;
        let q = |w: Complex64| planar.field(w);
        let lap = (q(z + h)?
            + q(z - h)?
            + q(z + Complex64::new(0.0, h))?
            + q(z - Complex64::new(0.0, h))?
            - 4.0 * q(z)?)
            / (h * h);
        let rho = planar.density(z);
        min_density = min_density.min(rho);
        worst_laplacian = worst_laplacian.max((lap / (2.0 * PI) - rho).abs() / rho);
    }
    let checks = vec![
        Check::new("unit mass", (mass - 1.0).abs(), 1e-3),
        Check::new("laplacian of the field", worst_laplacian, 1e-5),
        Check::new("negative density", -min_density, 0.0),
    ];
    Ok(VerificationReport::from_checks(
        "planar density",
        checks,
        found,
        Some(0),
    ))
}
