//! Discrete minimal-energy problem on `S²` in the presence of the field:
//!
//! ```text
//! E(x₁, …, x_N) = Σ_{i≠j} k_s(x_i, x_j) + 2(N−1) Σ_i q_i Σ_j k_s(a_i, x_j)
//! ```
//!
//! minimized over the spherical angles `(θ_j, φ_j)` with a limited-memory
//! BFGS method: the polar angle is kept in the box `[δ, π − δ]`, the azimuth
//! is unbounded (periodic). Before optimizing, the configuration is rotated
//! so that the first source sits at the north pole, where the polar
//! parametrization is singular but no optimal point can be.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::KernelSpec;
use crate::sphere::{random_point, Frame, SpherePoint};
use crate::support::ProblemSpec;

/// Steps whose minimal pairwise chord falls below this value are rejected.
pub const MIN_CHORD: f64 = 1e-12;

/// Algorithmic parameters of [`minimize`] and [`multistart`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Bound on the ∞-norm of the projected angle gradient; `None` means
    /// `1e-8 · N`.
    pub gradient_tolerance: Option<f64>,
    pub restart_count: usize,
    /// Standard deviation (radians) of the tangent kicks between restarts.
    pub perturbation_scale: f64,
    pub seed: u64,
    /// Number of stored correction pairs of the quasi-Newton update.
    pub history_size: usize,
    /// Distance `δ` of the polar-angle box from the poles.
    pub pole_guard: f64,
    /// Evaluate energy and gradient row-parallel on the rayon pool. Row
    /// sums are reduced in a fixed order, so results do not depend on the
    /// number of threads, but they differ in the last bits from the
    /// sequential evaluation.
    pub parallel: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            gradient_tolerance: None,
            restart_count: 20,
            perturbation_scale: 0.05,
            seed: 0,
            history_size: 10,
            pole_guard: 1e-9,
            parallel: false,
        }
    }
}

impl OptimizerSettings {
    pub fn tolerance_for(&self, n: usize) -> f64 {
        self.gradient_tolerance.unwrap_or(1e-8 * n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidProblem(format!("optimizer settings: {what}")));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if let Some(t) = self.gradient_tolerance {
            if !(t > 0.0) {
                return bad("gradient_tolerance must be positive");
            }
        }
        if self.restart_count == 0 {
            return bad("restart_count must be at least 1");
        }
        if !(self.perturbation_scale > 0.0 && self.perturbation_scale < PI / 4.0) {
            return bad("perturbation_scale must lie in (0, π/4)");
        }
        if self.history_size == 0 {
            return bad("history_size must be positive");
        }
        if !(self.pole_guard > 0.0 && self.pole_guard < 0.1) {
            return bad("pole_guard must lie in (0, 0.1)");
        }
        Ok(())
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient below the tolerance.
    Converged,
    MaxIterations,
    /// The line search found no step that lowers the energy, even along
    /// steepest descent.
    LineSearchFailed,
}

/// Result of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub points: Vec<SpherePoint>,
    pub energy: f64,
    /// ∞-norm of the projected gradient with respect to the angles.
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub termination: Termination,
    /// Energies of the accepted iterates of the run that produced `points`.
    pub energy_trace: Vec<f64>,
}

impl PointConfiguration {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

type Vec3 = [f64; 3];

struct Objective {
    kernel: KernelSpec,
    sources: Vec<(Vec3, f64)>,
    parallel: bool,
}

/// Compensated (Neumaier) summation: energy differences near a minimum
/// are far below the rounding error of a naive sum of `N²` terms.
#[derive(Clone, Copy, Default)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Sum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Sum::default();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

#[inline]
fn diff2(a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d, d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

impl Objective {
    fn new(spec: &ProblemSpec, frame: Option<&Frame>, parallel: bool) -> Result<Self> {
        if spec.d() != 2 {
            return Err(Error::Unsupported(format!(
                "discrete optimization is implemented on S² only, got d = {}",
                spec.d()
            )));
        }
        let sources = spec
            .sources()
            .iter()
            .map(|src| {
                let a = src.position.as_xyz()?;
                Ok((frame.map_or(a, |f| f.to_local(&a)), src.charge))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel: spec.kernel(),
            sources,
            parallel,
        })
    }

    /// Kernel value and its derivative with respect to `r²`.
    #[inline]
    fn k_and_dk(&self, r2: f64) -> (f64, f64) {
        let s = self.kernel.s;
        if s == 0.0 {
            (-0.5 * r2.ln(), -0.5 / r2)
        } else if s == 1.0 {
            let k = 1.0 / r2.sqrt();
            (k, -0.5 * k / r2)
        } else {
            let k = r2.powf(-0.5 * s);
            (k, -0.5 * s * k / r2)
        }
    }

    #[inline]
    fn dk(&self, r2: f64) -> f64 {
        let s = self.kernel.s;
        if s == 0.0 {
            -0.5 / r2
        } else if s == 1.0 {
            -0.5 / (r2 * r2.sqrt())
        } else {
            -0.5 * s * r2.powf(-0.5 * s - 1.0)
        }
    }

    fn singular(what: &str) -> Error {
        Error::Singularity(format!("{what} closer than {MIN_CHORD:e}"))
    }

    /// Sum over `j > i` of `k(x_i, x_j)`; the logarithmic case multiplies
    /// squared chords in groups of eight before taking one logarithm.
    fn row_energy(&self, xs: &[Vec3], i: usize) -> Result<f64> {
        let xi = &xs[i];
        let mut sum = Sum::default();
        if self.kernel.is_log() {
            let mut prod = 1.0;
            let mut count = 0;
            for xj in &xs[i + 1..] {
                let (_, r2) = diff2(xi, xj);
                if !(r2 >= MIN_CHORD * MIN_CHORD) {
                    return Err(Self::singular("two points"));
                }
                prod *= r2;
                count += 1;
                if count == 8 {
                    sum.add(prod.ln());
                    prod = 1.0;
                    count = 0;
                }
            }
            sum.add(prod.ln());
            Ok(-0.5 * sum.value())
        } else {
            for xj in &xs[i + 1..] {
                let (_, r2) = diff2(xi, xj);
                if !(r2 >= MIN_CHORD * MIN_CHORD) {
                    return Err(Self::singular("two points"));
                }
                sum.add(self.kernel.of_chord_sq(r2));
            }
            Ok(sum.value())
        }
    }

    /// `Σ_i q_i k(a_i, x)` and its Euclidean gradient.
    fn field_at(&self, x: &Vec3, grad: bool) -> Result<(f64, Vec3)> {
        let mut v = Sum::default();
        let mut g = [0.0; 3];
        for (a, q) in &self.sources {
            let (d, r2) = diff2(x, a);
            if !(r2 >= MIN_CHORD * MIN_CHORD) {
                return Err(Self::singular("a point and a source"));
            }
            if grad {
                let (k, dk) = self.k_and_dk(r2);
                v.add(q * k);
                for c in 0..3 {
                    g[c] += 2.0 * q * dk * d[c];
                }
            } else {
                v.add(q * self.kernel.of_chord_sq(r2));
            }
        }
        Ok((v.value(), g))
    }

    fn energy(&self, xs: &[Vec3]) -> Result<f64> {
        let n = xs.len();
        let rows: Vec<f64> = if self.parallel {
            (0..n)
                .into_par_iter()
                .map(|i| self.row_energy(xs, i))
                .collect::<Result<_>>()?
        } else {
            (0..n)
                .map(|i| self.row_energy(xs, i))
                .collect::<Result<_>>()?
        };
        let pairs: Sum = rows.into_iter().collect();
        let field: Sum = xs
            .iter()
            .map(|x| self.field_at(x, false).map(|v| v.0))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        Ok(combine(pairs, field, 2.0 * (n as f64 - 1.0)))
    }

    /// Energy and Euclidean gradient with respect to the point positions.
    fn energy_and_gradient(&self, xs: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
        let n = xs.len();
        let w = 2.0 * (n as f64 - 1.0);
        if self.parallel {
            // Full rows: each row owns its gradient entry, so the result is
            // independent of the scheduling.
            let rows: Vec<(f64, Vec3)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut g = [0.0; 3];
                    for (j, xj) in xs.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let (d, r2) = diff2(&xs[i], xj);
                        if !(r2 >= MIN_CHORD * MIN_CHORD) {
                            return Err(Self::singular("two points"));
                        }
                        let dk = self.dk(r2);
                        for c in 0..3 {
                            g[c] += 4.0 * dk * d[c];
                        }
                    }
                    let (_, gf) = self.field_at(&xs[i], true)?;
                    for c in 0..3 {
                        g[c] += w * gf[c];
                    }
                    Ok((self.row_energy(xs, i)?, g))
                })
                .collect::<Result<_>>()?;
            let pairs: Sum = rows.iter().map(|r| r.0).collect();
            let mut field = Sum::default();
            for x in xs {
                field.add(self.field_at(x, false)?.0);
            }
            return Ok((
                combine(pairs, field, w),
                rows.into_iter().map(|r| r.1).collect(),
            ));
        }
        let mut grad = vec![[0.0; 3]; n];
        let mut pairs = Sum::default();
        let log = self.kernel.is_log();
        for i in 0..n {
            let xi = xs[i];
            let mut gi = [0.0; 3];
            let mut row = Sum::default();
            let mut prod = 1.0;
            let mut count = 0;
            for j in i + 1..n {
                let (d, r2) = diff2(&xi, &xs[j]);
                if !(r2 >= MIN_CHORD * MIN_CHORD) {
                    return Err(Self::singular("two points"));
                }
                let dk = if log {
                    prod *= r2;
                    count += 1;
                    if count == 8 {
                        row.add(prod.ln());
                        prod = 1.0;
                        count = 0;
                    }
                    -0.5 / r2
                } else {
                    let (k, dk) = self.k_and_dk(r2);
                    row.add(k);
                    dk
                };
                let gj = &mut grad[j];
                for c in 0..3 {
                    let t = 4.0 * dk * d[c];
                    gi[c] += t;
                    gj[c] -= t;
                }
            }
            if log {
                row.add(prod.ln());
                pairs.add(-0.5 * row.value());
            } else {
                pairs.add(row.value());
            }
            for c in 0..3 {
                grad[i][c] += gi[c];
            }
        }
        let mut field = Sum::default();
        for (x, g) in xs.iter().zip(grad.iter_mut()) {
            let (v, gf) = self.field_at(x, true)?;
            field.add(v);
            for c in 0..3 {
                g[c] += w * gf[c];
            }
        }
        Ok((combine(pairs, field, w), grad))
    }
}

/// `2·pairs + w·field` with the compensation terms carried through.
fn combine(pairs: Sum, field: Sum, w: f64) -> f64 {
    let mut total = Sum::default();
    total.add(2.0 * pairs.sum);
    total.add(w * field.sum);
    total.add(2.0 * pairs.comp);
    total.add(w * field.comp);
    total.value()
}

fn check_points(points: &[SpherePoint]) -> Result<Vec<Vec3>> {
    if points.len() < 2 {
        return Err(Error::InvalidProblem(format!(
            "need N ≥ 2 points, got {}",
            points.len()
        )));
    }
    points.iter().map(SpherePoint::as_xyz).collect()
}

/// The discrete energy `E_{Q,N}` of a configuration on `S²`.
pub fn energy(points: &[SpherePoint], spec: &ProblemSpec) -> Result<f64> {
    let xs = check_points(points)?;
    Objective::new(spec, None, false)?.energy(&xs)
}

/// Gradient of the energy with respect to the position vectors in `R³`
/// (before projection onto the tangent planes).
pub fn euclidean_gradient(points: &[SpherePoint], spec: &ProblemSpec) -> Result<Vec<[f64; 3]>> {
    let xs = check_points(points)?;
    Ok(Objective::new(spec, None, false)?
        .energy_and_gradient(&xs)?
        .1)
}

/// Spherical angles `(θ, φ)` of a point of `S²`.
pub fn angles(x: &SpherePoint) -> Result<(f64, f64)> {
    let [a, b, c] = x.as_xyz()?;
    Ok(((a * a + b * b).sqrt().atan2(c), b.atan2(a)))
}

#[inline]
fn angle_partials(theta: f64, phi: f64) -> (Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    ([ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0])
}

/// Gradient `(∂E/∂θ_j, ∂E/∂φ_j)` in the standard spherical parametrization.
/// Points at a pole (`θ ∈ {0, π}`) are rejected.
pub fn gradient(points: &[SpherePoint], spec: &ProblemSpec) -> Result<Vec<[f64; 2]>> {
    let g = euclidean_gradient(points, spec)?;
    points
        .iter()
        .zip(&g)
        .map(|(x, gx)| {
            let [a, b, _] = x.as_xyz()?;
            if a == 0.0 && b == 0.0 {
                return Err(Error::Singularity(
                    "spherical angles are singular at the poles".into(),
                ));
            }
            let (theta, phi) = angles(x)?;
            let (dt, dp) = angle_partials(theta, phi);
            Ok([dot3(gx, &dt), dot3(gx, &dp)])
        })
        .collect()
}

#[inline]
fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Chordal distances from each point to each source.
pub fn source_distances(points: &[SpherePoint], spec: &ProblemSpec) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|x| {
            spec.sources()
                .iter()
                .map(|s| x.chord(&s.position))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Bounded L-BFGS in angle space
// ---------------------------------------------------------------------------

/// Energy as a function of the angle vector `z = (θ₁, φ₁, …, θ_N, φ_N)`.
struct AngleProblem<'a> {
    objective: &'a Objective,
    lower: f64,
    upper: f64,
}

impl AngleProblem<'_> {
    fn positions(z: &[f64]) -> Vec<Vec3> {
        z.chunks_exact(2)
            .map(|tp| {
                let (st, ct) = tp[0].sin_cos();
                let (sp, cp) = tp[1].sin_cos();
                [st * cp, st * sp, ct]
            })
            .collect()
    }

    /// Energy and angle gradient; `None` when a step brings two points
    /// (or a point and a source) closer than [`MIN_CHORD`].
    fn eval(&self, z: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let xs = Self::positions(z);
        match self.objective.energy_and_gradient(&xs) {
            Ok((e, g)) => {
                let mut out = vec![0.0; z.len()];
                for (j, gj) in g.iter().enumerate() {
                    let (dt, dp) = angle_partials(z[2 * j], z[2 * j + 1]);
                    out[2 * j] = dot3(gj, &dt);
                    out[2 * j + 1] = dot3(gj, &dp);
                }
                if e.is_finite() {
                    Ok(Some((e, out)))
                } else {
                    Ok(None)
                }
            }
            Err(Error::Singularity(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Zeroes the gradient components of polar angles sitting on the box
    /// with the gradient pointing outwards.
    fn project(&self, z: &[f64], g: &[f64]) -> Vec<f64> {
        let mut pg = g.to_vec();
        for k in (0..z.len()).step_by(2) {
            if (z[k] <= self.lower && g[k] > 0.0) || (z[k] >= self.upper && g[k] < 0.0) {
                pg[k] = 0.0;
            }
        }
        pg
    }

    /// Largest step along `d` that keeps every polar angle inside the box.
    fn max_step(&self, z: &[f64], d: &[f64]) -> f64 {
        let mut a = f64::INFINITY;
        for k in (0..z.len()).step_by(2) {
            if d[k] < 0.0 {
                a = a.min((z[k] - self.lower) / -d[k]);
            } else if d[k] > 0.0 {
                a = a.min((self.upper - z[k]) / d[k]);
            }
        }
        a.max(0.0)
    }

    /// Zeroes the components of a search direction that would push a polar
    /// angle out of the box.
    fn project_direction(&self, z: &[f64], d: &mut [f64]) {
        for k in (0..z.len()).step_by(2) {
            if (z[k] <= self.lower && d[k] < 0.0) || (z[k] >= self.upper && d[k] > 0.0) {
                d[k] = 0.0;
            }
        }
    }

    /// Carries every point that sits on a polar bound with the gradient
    /// pointing out of the box across the pole by rotating its azimuth by π.
    /// The point moves by at most twice the pole guard, in the descent
    /// direction. Returns `None` if no point qualifies.
    fn cross_poles(&self, z: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let mut out = z.to_vec();
        let mut moved = false;
        for k in (0..z.len()).step_by(2) {
            if (z[k] <= self.lower && g[k] > 0.0) || (z[k] >= self.upper && g[k] < 0.0) {
                let phi = z[k + 1] + PI;
                out[k + 1] = if phi > PI { phi - 2.0 * PI } else { phi };
                moved = true;
            }
        }
        moved.then_some(out)
    }

    fn clamp(&self, z: &mut [f64]) {
        for k in (0..z.len()).step_by(2) {
            z[k] = z[k].clamp(self.lower, self.upper);
        }
    }
}

#[derive(Clone)]
struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
    z: Vec<f64>,
    g: Vec<f64>,
}

impl Trial {
    /// A trial step at which the energy is infinite.
    fn singular(alpha: f64) -> Self {
        Self {
            alpha,
            f: f64::INFINITY,
            slope: f64::NAN,
            z: Vec::new(),
            g: Vec::new(),
        }
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
/// Relative energy change below which function values are treated as
/// rounding noise and the line search falls back to slope information.
const NOISE: f64 = 1e-12;

/// Line-search acceptance tests relative to the origin `(f0, slope0)`.
struct Conditions {
    f0: f64,
    slope0: f64,
}

impl Conditions {
    fn noisy(&self, t: &Trial) -> bool {
        (t.f - self.f0).abs() <= NOISE * self.f0.abs().max(1.0)
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + C1 * t.alpha * self.slope0 || (self.noisy(t) && t.slope < 0.0)
    }

    /// Strong Wolfe, or its approximate form when energy differences are
    /// at the rounding level (never accepting an energy increase).
    fn accept(&self, t: &Trial) -> bool {
        let strong =
            t.f <= self.f0 + C1 * t.alpha * self.slope0 && t.slope.abs() <= -C2 * self.slope0;
        let approximate = self.noisy(t)
            && t.f <= self.f0
            && t.slope >= C2 * self.slope0
            && t.slope <= -(1.0 - 2.0 * C1) * self.slope0;
        strong || approximate
    }
}

/// Strong-Wolfe line search on `[0, alpha_max]`; returns the accepted trial
/// or `None` if no point with lower energy was found.
fn line_search(
    problem: &AngleProblem,
    z0: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    alpha_init: f64,
    alpha_max: f64,
) -> Result<Option<Trial>> {
    let eval = |alpha: f64| -> Result<Option<Trial>> {
        let mut z: Vec<f64> = z0.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        if alpha >= alpha_max {
            problem.clamp(&mut z);
        }
        Ok(problem.eval(&z)?.map(|(f, g)| Trial {
            alpha,
            f,
            slope: dot(&g, d),
            z,
            g,
        }))
    };
    if !(alpha_max > 0.0) {
        return Ok(None);
    }
    let cond = Conditions { f0, slope0 };

    let origin = Trial {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        z: Vec::new(),
        g: Vec::new(),
    };
    let mut prev = origin;
    let mut alpha = alpha_init.min(alpha_max);
    let mut evaluations = 0;
    let (lo, hi) = loop {
        evaluations += 1;
        let Some(t) = eval(alpha)? else {
            // Infinite energy: treat as a failed sufficient-decrease test.
            break (prev, Some(Trial::singular(alpha)));
        };
        if cond.accept(&t) {
            return Ok(Some(t));
        }
        if !cond.armijo(&t) || (prev.alpha > 0.0 && t.f >= prev.f && !cond.noisy(&t)) {
            break (prev, Some(t));
        }
        if t.slope >= 0.0 {
            break (t, Some(prev));
        }
        if (t.alpha >= alpha_max || evaluations >= 30) && t.f <= f0 {
            // Sufficient decrease at the box (or after long extrapolation): accept.
            return Ok(Some(t));
        }
        alpha = (4.0 * t.alpha).min(alpha_max);
        prev = t;
    };
    zoom(&cond, lo, hi, &eval, evaluations)
}

fn zoom(
    cond: &Conditions,
    mut lo: Trial,
    mut hi: Option<Trial>,
    eval: &dyn Fn(f64) -> Result<Option<Trial>>,
    mut evaluations: usize,
) -> Result<Option<Trial>> {
    while evaluations < 40 {
        let h = hi.as_ref().expect("zoom needs an upper trial");
        let delta = h.alpha - lo.alpha;
        if delta.abs() <= 1e-16 * lo.alpha.abs().max(h.alpha.abs()) {
            break;
        }
        // Quadratic interpolation from (f_lo, slope_lo, f_hi), safeguarded.
        let mut alpha = lo.alpha + 0.5 * delta;
        if h.f.is_finite() {
            let denom = 2.0 * (h.f - lo.f - lo.slope * delta);
            if denom > 0.0 {
                let cand = lo.alpha - lo.slope * delta * delta / denom;
                let (a, b) = if delta > 0.0 {
                    (lo.alpha + 0.1 * delta, h.alpha - 0.1 * delta)
                } else {
                    (h.alpha - 0.1 * delta, lo.alpha + 0.1 * delta)
                };
                if cand.is_finite() {
                    alpha = cand.clamp(a.min(b), a.max(b));
                }
            }
        }
        evaluations += 1;
        match eval(alpha)? {
            None => hi = Some(Trial::singular(alpha)),
            Some(t) => {
                if cond.accept(&t) {
                    return Ok(Some(t));
                }
                if !cond.armijo(&t) || (t.f >= lo.f && !cond.noisy(&t)) {
                    hi = Some(t);
                } else {
                    if t.slope * (h.alpha - lo.alpha) >= 0.0 {
                        hi = Some(lo);
                    }
                    lo = t;
                }
            }
        }
    }
    // Fall back to the best point with sufficient decrease, if any.
    Ok(if lo.alpha > 0.0 && lo.f < cond.f0 {
        Some(lo)
    } else {
        None
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct LbfgsOutcome {
    z: Vec<f64>,
    f: f64,
    pg_norm: f64,
    iterations: usize,
    termination: Termination,
    trace: Vec<f64>,
}

fn lbfgs(
    problem: &AngleProblem,
    mut z: Vec<f64>,
    settings: &OptimizerSettings,
    tol: f64,
) -> Result<LbfgsOutcome> {
    problem.clamp(&mut z);
    let (mut f, mut g) = problem
        .eval(&z)?
        .ok_or_else(|| Error::Singularity("initial configuration has coincident points".into()))?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> =
        VecDeque::with_capacity(settings.history_size);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut pg = problem.project(&z, &g);
    while iterations < settings.max_iterations {
        if inf_norm(&pg) <= tol {
            termination = Termination::Converged;
            break;
        }
        if let Some(crossed) = problem.cross_poles(&z, &g) {
            // A point pinned at a polar bound wants to pass over the pole.
            if let Some((fc, gc)) = problem.eval(&crossed)? {
                if fc <= f {
                    z = crossed;
                    f = fc;
                    g = gc;
                    pg = problem.project(&z, &g);
                    history.clear();
                    trace.push(f);
                    iterations += 1;
                    continue;
                }
            }
        }
        let mut d = two_loop(&history, &pg);
        problem.project_direction(&z, &mut d);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha_max = problem.max_step(&z, &d);
        let first = if history.is_empty() {
            (0.1 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = line_search(problem, &z, f, &d, slope, first, alpha_max)?;
        if accepted.is_none() && !history.is_empty() {
            // Retry along steepest descent with a fresh memory.
            history.clear();
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            let alpha_max = problem.max_step(&z, &d);
            accepted = line_search(
                problem,
                &z,
                f,
                &d,
                slope,
                (0.1 / inf_norm(&d)).min(1.0),
                alpha_max,
            )?;
        }
        let Some(t) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = t.z.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == settings.history_size {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        z = t.z;
        f = t.f;
        g = t.g;
        pg = problem.project(&z, &g);
        trace.push(f);
        iterations += 1;
    }
    Ok(LbfgsOutcome {
        pg_norm: inf_norm(&pg),
        z,
        f,
        iterations,
        termination,
        trace,
    })
}

/// `−H g` by the two-loop recursion with the initial scaling `sᵀy / yᵀy`.
fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// The frame with the first source at the north pole (identity without sources).
fn working_frame(spec: &ProblemSpec) -> Result<Frame> {
    match spec.sources().first() {
        Some(src) => Frame::with_pole(&src.position),
        None => Ok(Frame {
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 1.0, 0.0],
            pole: [0.0, 0.0, 1.0],
        }),
    }
}

/// Local minimization from `initial`.
pub fn minimize(
    initial: &[SpherePoint],
    spec: &ProblemSpec,
    settings: &OptimizerSettings,
) -> Result<PointConfiguration> {
    settings.validate()?;
    let xs = check_points(initial)?;
    let frame = working_frame(spec)?;
    let objective = Objective::new(spec, Some(&frame), settings.parallel)?;
    let problem = AngleProblem {
        objective: &objective,
        lower: settings.pole_guard,
        upper: PI - settings.pole_guard,
    };
    let mut z = Vec::with_capacity(2 * xs.len());
    for x in &xs {
        let [a, b, c] = frame.to_local(x);
        z.push((a * a + b * b).sqrt().atan2(c));
        z.push(b.atan2(a));
    }
    let out = lbfgs(&problem, z, settings, settings.tolerance_for(xs.len()))?;
    let points = AngleProblem::positions(&out.z)
        .iter()
        .map(|v| SpherePoint::new(frame.to_global(v).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointConfiguration {
        points,
        energy: out.f,
        grad_inf_norm: out.pg_norm,
        iterations: out.iterations,
        restarts_used: 1,
        termination: out.termination,
        energy_trace: out.trace,
    })
}

/// Moves every point by an independent Gaussian tangent vector of standard
/// deviation `scale` per component and re-normalizes.
pub fn perturb<R: rand::Rng + ?Sized>(
    points: &[SpherePoint],
    scale: f64,
    rng: &mut R,
) -> Result<Vec<SpherePoint>> {
    points
        .iter()
        .map(|x| {
            let c = x.coords();
            let v: Vec<f64> = (0..c.len()).map(|_| StandardNormal.sample(rng)).collect();
            let radial: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            SpherePoint::new(
                c.iter()
                    .zip(&v)
                    .map(|(ci, vi)| ci + scale * (vi - radial * ci))
                    .collect(),
            )
        })
        .collect()
}

/// Best of `restart_count` local minimizations: the first starts from `N`
/// uniform random points, every further one from the current best
/// configuration perturbed by [`perturb`]. A restart replaces the incumbent
/// only if it reaches a strictly lower energy. All randomness comes from one
/// ChaCha8 stream seeded with `settings.seed`, so the result is
/// deterministic and its energy is non-increasing in `restart_count`.
pub fn multistart(
    spec: &ProblemSpec,
    n: usize,
    settings: &OptimizerSettings,
) -> Result<PointConfiguration> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let start: Vec<SpherePoint> = (0..n).map(|_| random_point(2, &mut rng)).collect();
    let mut best = minimize(&start, spec, settings)?;
    for _ in 1..settings.restart_count {
        let kicked = perturb(&best.points, settings.perturbation_scale, &mut rng)?;
        let candidate = minimize(&kicked, spec, settings)?;
        if candidate.energy < best.energy {
            best = candidate;
        }
    }
    best.restarts_used = settings.restart_count;
    Ok(best)
}
