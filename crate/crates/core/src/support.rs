//! Solvers for the support of the weighted equilibrium measure when the
//! external field is generated by finitely many positive point charges.
//!
//! * [`solve_log`] — logarithmic kernel on `S²`: the support is the sphere
//!   minus caps of chordal radii `ε_i = 2√(q_i/(1+q))` and the measure is
//!   `(1+q)σ₂` there, provided the caps are disjoint.
//! * [`solve_riesz_dm2`] — Riesz `s = d − 2` on `S^d`, `d ≥ 3`: the measure
//!   is `C σ_d` on the sphere minus caps of radii `γ_i(C)`, where `C` solves
//!   the scalar equation `g(C) = C σ_d(Σ_γ(C)) = 1`.
//! * [`influence_radii`] — caps that optimal points provably avoid, also when
//!   the support caps overlap (reduced charges).
//! * [`kelvin_planar`] — the logarithmic problem transported to the plane
//!   by the stereographic projection from the last source.
//!
//! Feasibility (disjointness of the caps) is always checked after the fact
//! and reported in the solution, never raised as an error.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potential::{
    cap_functional_coulomb, kernel, log_cap_complement_energy, log_uniform_support_potential,
    sphere_energy, KernelSpec,
};
use crate::sphere::{
    cap_area, caps_pairwise_disjoint, sample_uniform, stereographic, Cap, DisjointnessReport,
    SpherePoint, SupportRegion,
};

/// A point charge `q > 0` located at `position` on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub position: SpherePoint,
    pub charge: f64,
}

impl Source {
    pub fn new(position: SpherePoint, charge: f64) -> Self {
        Self { position, charge }
    }
}

/// Kernel parameters together with the point sources of the field
/// `Q(x) = Σ q_i k_s(a_i, x)`.
///
/// A specification without sources is accepted (field-free problems for the
/// discrete optimizer); the support solvers require at least one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblemSpec", into = "RawProblemSpec")]
pub struct ProblemSpec {
    d: usize,
    s: f64,
    sources: Vec<Source>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblemSpec {
    d: usize,
    s: f64,
    #[serde(default)]
    sources: Vec<Source>,
}

impl TryFrom<RawProblemSpec> for ProblemSpec {
    type Error = Error;
    fn try_from(raw: RawProblemSpec) -> Result<Self> {
        Self::new(raw.d, raw.s, raw.sources)
    }
}

impl From<ProblemSpec> for RawProblemSpec {
    fn from(p: ProblemSpec) -> Self {
        Self {
            d: p.d,
            s: p.s,
            sources: p.sources,
        }
    }
}

impl ProblemSpec {
    /// Validates the kernel scope, positivity and finiteness of the charges,
    /// matching dimensions and pairwise distinct source positions.
    pub fn new(d: usize, s: f64, sources: Vec<Source>) -> Result<Self> {
        KernelSpec::new(d, s).map_err(|e| Error::InvalidProblem(e.to_string()))?;
        for (i, src) in sources.iter().enumerate() {
            if src.position.dim() != d {
                return Err(Error::InvalidProblem(format!(
                    "source {} lives on S^{}, expected S^{d}",
                    i + 1,
                    src.position.dim()
                )));
            }
            if !(src.charge > 0.0 && src.charge.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "source {} has charge {}, charges must be positive",
                    i + 1,
                    src.charge
                )));
            }
        }
        for i in 0..sources.len() {
            for j in i + 1..sources.len() {
                if sources[i].position.chord(&sources[j].position)? == 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "sources {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { d, s, sources })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    /// Number of sources `m`.
    pub fn m(&self) -> usize {
        self.sources.len()
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::new(self.d, self.s).expect("validated on construction")
    }

    /// Total charge `q = Σ q_i`.
    pub fn total_charge(&self) -> f64 {
        self.sources.iter().map(|s| s.charge).sum()
    }

    /// External field `Q(x) = Σ q_i k_s(a_i, x)`; errors at a source.
    pub fn field(&self, x: &SpherePoint) -> Result<f64> {
        let k = self.kernel();
        let mut q = 0.0;
        for src in &self.sources {
            q += src.charge * kernel(&k, &src.position, x)?;
        }
        Ok(q)
    }

    /// The same problem with every charge multiplied by `factor > 0`.
    pub fn scaled_charges(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.d,
            self.s,
            self.sources
                .iter()
                .map(|s| Source::new(s.position.clone(), s.charge * factor))
                .collect(),
        )
    }

    fn require_sources(&self, function: &str) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::InvalidProblem(format!(
                "{function} requires at least one source"
            )));
        }
        Ok(())
    }
}

/// Which closed form or system produced a [`SupportSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Logarithmic,
    RieszDMinus2,
}

/// Numerical diagnostics of a support solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDiagnostics {
    /// Pairwise margins of the caps.
    pub disjointness: DisjointnessReport,
    /// `|C σ_d(region) − 1|`.
    pub mass_residual: f64,
    /// Residual of the scalar equation solved for `C` (zero for closed forms).
    pub solver_residual: f64,
    /// Root-finder iterations (zero for closed forms).
    pub iterations: usize,
    /// Closed-form value of the equilibrium constant, for comparison with
    /// the sampled value in the logarithmic case.
    pub equilibrium_constant_closed_form: f64,
    /// Support point at which the weighted potential was sampled.
    pub sample_point: Option<SpherePoint>,
}

/// Support and density of the weighted equilibrium measure `μ_Q = C σ_d|region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSolution {
    pub solver: SolverKind,
    pub d: usize,
    pub s: f64,
    /// Charges in the order of the caps of `region`.
    pub charges: Vec<f64>,
    pub region: SupportRegion,
    /// Density `C` of the measure with respect to `σ_d`.
    pub normalization: f64,
    /// Value `F_Q` of the weighted potential on the support.
    pub equilibrium_constant: f64,
    /// Caps pairwise disjoint, so the theorem applies and the measure is
    /// the equilibrium measure.
    pub feasible: bool,
    /// The measure is non-negative (no negative boundary component).
    pub positive: bool,
    pub diagnostics: SolutionDiagnostics,
}

impl SupportSolution {
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::new(self.d, self.s).expect("validated by the solver")
    }

    pub fn caps(&self) -> &[Cap] {
        &self.region.caps
    }

    /// A copy whose caps have their chordal radii multiplied by `factor`,
    /// with `C` renormalized to unit mass and the feasibility flags
    /// recomputed. Used to build negative controls for the checkers.
    pub fn with_scaled_caps(&self, factor: f64) -> Result<Self> {
        let caps = self
            .region
            .caps
            .iter()
            .map(|c| c.scaled(factor))
            .collect::<Result<Vec<_>>>()?;
        let region = SupportRegion::new(self.d, caps)?;
        let disjointness = caps_pairwise_disjoint(&region.caps)?;
        let normalization = 1.0 / region.measure();
        let mut out = self.clone();
        out.feasible = disjointness.disjoint;
        out.diagnostics.disjointness = disjointness;
        out.diagnostics.mass_residual = 0.0;
        out.normalization = normalization;
        out.region = region;
        Ok(out)
    }
}

/// Logarithmic equilibrium on `S²` for point charges.
///
/// ```text
/// ε_i = 2 √(q_i/(1+q)),   μ_Q = (1+q) σ₂ on Σ_ε = S² \ ∪ {|x − a_i| < ε_i}
/// F_Q = (1+q) W₀(S²) + Σ ((1+q) C_i + (q_i/2) log((1+t_i)/2)),   C_i = W₀(Σ_i) − W₀(S²)
/// ```
///
/// The reported `equilibrium_constant` is the weighted potential sampled at
/// one support point; the closed form is kept in the diagnostics.
pub fn solve_log(spec: &ProblemSpec) -> Result<SupportSolution> {
    if !(spec.d == 2 && spec.s == 0.0) {
        return Err(Error::Unsupported(format!(
            "solve_log needs d = 2, s = 0, got d = {}, s = {}",
            spec.d, spec.s
        )));
    }
    spec.require_sources("solve_log")?;
    let q = spec.total_charge();
    let caps = spec
        .sources
        .iter()
        .map(|src| Cap::from_chordal(src.position.clone(), 2.0 * (src.charge / (1.0 + q)).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let region = SupportRegion::new(2, caps)?;
    let disjointness = caps_pairwise_disjoint(&region.caps)?;
    let feasible = disjointness.disjoint;
    let normalization = 1.0 + q;

    let w0 = sphere_energy(&KernelSpec::logarithmic())?;
    let mut closed = normalization * w0;
    for (cap, src) in region.caps.iter().zip(&spec.sources) {
        let c_i = log_cap_complement_energy(cap.height)? - w0;
        closed += normalization * c_i + 0.5 * src.charge * (0.5 * (1.0 + cap.height)).ln();
    }

    let sample_point = if feasible {
        find_support_point(&region)?
    } else {
        None
    };
    let sampled = match &sample_point {
        Some(x) => {
            log_uniform_support_potential(&region.caps, normalization, x)? + spec.field(x)?
        }
        None => closed,
    };

    Ok(SupportSolution {
        solver: SolverKind::Logarithmic,
        d: 2,
        s: 0.0,
        charges: spec.sources.iter().map(|s| s.charge).collect(),
        diagnostics: SolutionDiagnostics {
            mass_residual: (normalization * region.measure() - 1.0).abs(),
            disjointness,
            solver_residual: 0.0,
            iterations: 0,
            equilibrium_constant_closed_form: closed,
            sample_point,
        },
        region,
        normalization,
        equilibrium_constant: sampled,
        feasible,
        positive: true,
    })
}

/// A deterministic point of the region away from the cap boundaries: the
/// antipodes of the cap centers first, then a fixed pseudo-random sequence.
fn find_support_point(region: &SupportRegion) -> Result<Option<SpherePoint>> {
    let margin = |x: &SpherePoint| -> Result<f64> {
        let mut m = f64::INFINITY;
        for cap in &region.caps {
            m = m.min(cap.center.chord(x)? - cap.chordal_radius);
        }
        Ok(m)
    };
    let mut best: Option<(f64, SpherePoint)> = None;
    let antipodes = region
        .caps
        .iter()
        .map(|c| SpherePoint::new(c.center.coords().iter().map(|v| -v).collect()))
        .collect::<Result<Vec<_>>>()?;
    for x in antipodes
        .into_iter()
        .chain(sample_uniform(region.dimension, 256, 0x5eed))
    {
        let m = margin(&x)?;
        if m > 0.0 && best.as_ref().map_or(true, |(b, _)| m > *b) {
            best = Some((m, x));
        }
    }
    Ok(best.map(|(_, x)| x))
}

/// Default tolerance of [`solve_riesz_dm2`] on `|g(C*) − 1|`.
pub const DM2_TOLERANCE: f64 = 1e-12;

/// The map `g(C) = C σ_d(Σ_γ(C))` with `γ_i(C) = (4q_i/(C W_{d−2}))^{1/d}`,
/// `σ_d(Σ_γ) = 1 − Σ σ_d(cap_i)` (caps covering the sphere count as area 1).
pub fn dm2_g(spec: &ProblemSpec, c: f64) -> Result<f64> {
    let w = dm2_setup(spec)?;
    Ok(dm2_g_with(spec, w, c))
}

fn dm2_setup(spec: &ProblemSpec) -> Result<f64> {
    if !(spec.d >= 3 && spec.s == spec.d as f64 - 2.0) {
        return Err(Error::Unsupported(format!(
            "solve_riesz_dm2 needs d ≥ 3 and s = d − 2, got d = {}, s = {}",
            spec.d, spec.s
        )));
    }
    spec.require_sources("solve_riesz_dm2")?;
    sphere_energy(&spec.kernel())
}

fn dm2_gammas(spec: &ProblemSpec, w: f64, c: f64) -> Vec<f64> {
    spec.sources
        .iter()
        .map(|src| (4.0 * src.charge / (c * w)).powf(1.0 / spec.d as f64))
        .collect()
}

fn dm2_g_with(spec: &ProblemSpec, w: f64, c: f64) -> f64 {
    let removed: f64 = dm2_gammas(spec, w, c)
        .iter()
        .map(|&g| {
            if g >= 2.0 {
                1.0
            } else {
                cap_area(spec.d, 1.0 - 0.5 * g * g).unwrap()
            }
        })
        .sum();
    c * (1.0 - removed)
}

/// Riesz `s = d − 2` equilibrium on `S^d`, `d ≥ 3`: bisection for the root
/// `C*` of `g(C) = 1` on a bracket `[1, C_max]`, with `C_max` doubled from
/// `2` until `g(C_max) ≥ 1`. The measure is `C* σ_d` on `Σ_γ(C*)` and its
/// weighted potential there equals `F_Q = C* W_{d−2}(S^d)`.
pub fn solve_riesz_dm2(spec: &ProblemSpec, tol: f64) -> Result<SupportSolution> {
    let w = dm2_setup(spec)?;
    if !(tol > 0.0) {
        return Err(domain(
            "solve_riesz_dm2",
            format!("tolerance {tol} must be positive"),
        ));
    }
    let g = |c: f64| dm2_g_with(spec, w, c);
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut expansions = 0;
    while g(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoBracket("g(C) stays below 1".into()));
        }
    }
    if g(lo) > 1.0 {
        // Only possible for lo = 1 with g(1) > 1, which cannot happen as σ_d ≤ 1.
        return Err(Error::NoBracket(format!("g({lo}) > 1")));
    }
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let c = if (g(lo) - 1.0).abs() <= (g(hi) - 1.0).abs() {
        lo
    } else {
        hi
    };
    let residual = (g(c) - 1.0).abs();
    if residual > tol {
        return Err(Error::NoBracket(format!(
            "bisection stalled with |g(C) − 1| = {residual:e}"
        )));
    }
    let gammas = dm2_gammas(spec, w, c);
    if let Some(i) = gammas.iter().position(|&g| g >= 2.0) {
        return Err(Error::InvalidProblem(format!(
            "cap {} covers the whole sphere",
            i + 1
        )));
    }
    let caps = spec
        .sources
        .iter()
        .zip(&gammas)
        .map(|(src, &g)| Cap::from_chordal(src.position.clone(), g))
        .collect::<Result<Vec<_>>>()?;
    let region = SupportRegion::new(spec.d, caps)?;
    let disjointness = caps_pairwise_disjoint(&region.caps)?;
    let f = c * w;
    Ok(SupportSolution {
        solver: SolverKind::RieszDMinus2,
        d: spec.d,
        s: spec.s,
        charges: spec.sources.iter().map(|s| s.charge).collect(),
        diagnostics: SolutionDiagnostics {
            mass_residual: (c * region.measure() - 1.0).abs(),
            disjointness: disjointness.clone(),
            solver_residual: residual,
            iterations,
            equilibrium_constant_closed_form: f,
            sample_point: None,
        },
        feasible: disjointness.disjoint,
        positive: c > 0.0,
        region,
        normalization: c,
        equilibrium_constant: f,
    })
}

/// Dispatches on `(d, s)`: logarithmic on `S²` or Riesz `s = d − 2`.
pub fn solve(spec: &ProblemSpec) -> Result<SupportSolution> {
    if spec.d == 2 && spec.s == 0.0 {
        solve_log(spec)
    } else if spec.d >= 3 && spec.s == spec.d as f64 - 2.0 {
        solve_riesz_dm2(spec, DM2_TOLERANCE)
    } else {
        Err(Error::Unsupported(format!(
            "no support solver for d = {}, s = {}",
            spec.d, spec.s
        )))
    }
}

/// Reduced charge `q̄_i = q_i/(1 + q − q_i)`.
pub fn reduced_charge(q_i: f64, q: f64) -> f64 {
    q_i / (1.0 + q - q_i)
}

/// Residual of the Coulomb influence-radius equation in the geodesic radius
/// `α`: `(q̄+1)π cos α − q̄ α cos α + q̄ sin α − π`.
pub fn coulomb_alpha_residual(q_bar: f64, alpha: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    (q_bar + 1.0) * PI * c - q_bar * alpha * c + q_bar * s - PI
}

/// Root in `(0, π)` of [`coulomb_alpha_residual`] by bisection; the
/// residual is positive (`q̄π`) at `0` and negative (`−2π`) at `π`.
pub fn coulomb_alpha_root(q_bar: f64, tol: f64) -> Result<f64> {
    if !(q_bar > 0.0 && q_bar.is_finite()) {
        return Err(domain(
            "coulomb_alpha_root",
            format!("reduced charge {q_bar} must be positive"),
        ));
    }
    let f = |a: f64| coulomb_alpha_residual(q_bar, a);
    let (mut lo, mut hi) = (0.0, PI);
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::NoBracket(format!(
            "no sign change on (0, π) for q̄ = {q_bar}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    if f(alpha).abs() > tol {
        return Err(Error::NoBracket(format!(
            "residual {:e} above tolerance {tol:e}",
            f(alpha).abs()
        )));
    }
    Ok(alpha)
}

/// Caps of electrostatic influence around each source, which optimal
/// `N`-point configurations avoid even when the support caps overlap.
///
/// * `s = 0`: `γ̄_i² = 4q̄_i/(1+q̄_i)` (identical to `ε_i²`);
/// * `s = 1`: geodesic radius from [`coulomb_alpha_root`] with `q̄_i`.
pub fn influence_radii(spec: &ProblemSpec) -> Result<Vec<Cap>> {
    if spec.d != 2 || !(spec.s == 0.0 || spec.s == 1.0) {
        return Err(Error::Unsupported(format!(
            "influence radii are implemented for d = 2, s ∈ {{0, 1}}, got d = {}, s = {}",
            spec.d, spec.s
        )));
    }
    spec.require_sources("influence_radii")?;
    let q = spec.total_charge();
    spec.sources
        .iter()
        .map(|src| {
            let q_bar = reduced_charge(src.charge, q);
            if spec.s == 0.0 {
                Cap::from_chordal(src.position.clone(), (4.0 * q_bar / (1.0 + q_bar)).sqrt())
            } else {
                Cap::from_geodesic(src.position.clone(), coulomb_alpha_root(q_bar, 1e-13)?)
            }
        })
        .collect()
}

/// `Φ̄₁(cos α) − 2q̄/γ²` at a Coulomb influence radius, which vanishes at
/// the root of [`coulomb_alpha_residual`].
pub fn coulomb_consistency_residual(q_bar: f64, alpha: f64) -> Result<f64> {
    let t = alpha.cos();
    let gamma2 = 4.0 * (0.5 * alpha).sin().powi(2);
    Ok(cap_functional_coulomb(t, q_bar)? - 2.0 * q_bar / gamma2)
}

/// Image in the plane of a removed cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedDisc {
    pub center: Complex64,
    pub radius: f64,
    /// Image `w_i` of the cap center (the source).
    pub source: Complex64,
    pub charge: f64,
}

impl ExcludedDisc {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// Logarithmic equilibrium transported to the plane by the stereographic
/// projection from the last source `a_m`:
///
/// ```text
/// S = {|z| ≤ √((1+q−q_m)/q_m)} \ ∪_{i<m} D_i
/// dμ(z) = (1+q)/(π(1+|z|²)²) dA(z)
/// Q̃(z) = ((1+q)/2) log(1+|z|²) − Σ_{i<m} q_i log|z − w_i|
/// ```
///
/// `Q̃` is the transported field up to an additive constant; it grows like
/// `(1 + q_m) log|z|`, so `Q̃(z) − log|z| → ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarEquilibrium {
    pub pole: SpherePoint,
    pub total_charge: f64,
    pub pole_charge: f64,
    pub outer_radius: f64,
    pub excluded_discs: Vec<ExcludedDisc>,
    /// `(1+q)/π`, the density at `z = 0`.
    pub density_scale: f64,
}

impl PlanarEquilibrium {
    /// `(1+q)/(π(1+|z|²)²)` (the density formula, irrespective of support).
    pub fn density(&self, z: Complex64) -> f64 {
        let s = 1.0 + z.norm_sqr();
        self.density_scale / (s * s)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() <= self.outer_radius && !self.excluded_discs.iter().any(|d| d.contains(z))
    }

    /// Density of the equilibrium measure: [`Self::density`] on the support, `0` off it.
    pub fn density_on_support(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            self.density(z)
        } else {
            0.0
        }
    }

    /// Planar external field `Q̃(z)`; errors at a source image.
    pub fn field(&self, z: Complex64) -> Result<f64> {
        let mut v = 0.5 * (1.0 + self.total_charge) * z.norm_sqr().ln_1p();
        for disc in &self.excluded_discs {
            let r = (z - disc.source).norm();
            if r == 0.0 {
                return Err(Error::Singularity("planar field at a source image".into()));
            }
            v -= disc.charge * r.ln();
        }
        Ok(v)
    }

    /// Coefficient of `log|z|` in the growth of `Q̃(z) − log|z|`, i.e. `q_m`.
    pub fn excess_growth(&self) -> f64 {
        let inner: f64 = self.excluded_discs.iter().map(|d| d.charge).sum();
        (1.0 + self.total_charge) - inner - 1.0
    }
}

/// The stereographic image of the logarithmic solution, projected from the
/// last source. The image of each other cap is the disc whose diameter joins
/// the images of the two cap-boundary points on the great circle through
/// the pole and the cap center.
pub fn kelvin_planar(spec: &ProblemSpec) -> Result<PlanarEquilibrium> {
    let solution = solve_log(spec)?;
    if !solution.feasible {
        let pairs: Vec<String> = solution
            .diagnostics
            .disjointness
            .violations()
            .iter()
            .map(|v| format!("({}, {})", v.i + 1, v.j + 1))
            .collect();
        return Err(Error::Precondition(format!(
            "caps overlap ({}); the planar image needs the feasible regime",
            pairs.join(", ")
        )));
    }
    let m = spec.m();
    let q = spec.total_charge();
    let pole = spec.sources[m - 1].position.clone();
    let q_m = spec.sources[m - 1].charge;
    let p = pole.as_xyz()?;
    let mut discs = Vec::with_capacity(m - 1);
    for (cap, src) in solution.region.caps.iter().zip(&spec.sources).take(m - 1) {
        let a = cap.center.as_xyz()?;
        // Unit tangent at a in the plane of a and the pole.
        let pa = p[0] * a[0] + p[1] * a[1] + p[2] * a[2];
        let mut e = [p[0] - pa * a[0], p[1] - pa * a[1], p[2] - pa * a[2]];
        let mut n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        if n < 1e-12 {
            // a = −p: every great circle through a passes through the pole.
            let alt = if a[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let aa = alt[0] * a[0] + alt[1] * a[1] + alt[2] * a[2];
            e = [alt[0] - aa * a[0], alt[1] - aa * a[1], alt[2] - aa * a[2]];
            n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        }
        e.iter_mut().for_each(|v| *v /= n);
        let (sa, ca) = cap.geodesic_radius.sin_cos();
        let b1 = SpherePoint::xyz(
            ca * a[0] + sa * e[0],
            ca * a[1] + sa * e[1],
            ca * a[2] + sa * e[2],
        )?;
        let b2 = SpherePoint::xyz(
            ca * a[0] - sa * e[0],
            ca * a[1] - sa * e[1],
            ca * a[2] - sa * e[2],
        )?;
        let z1 = stereographic(&b1, &pole)?;
        let z2 = stereographic(&b2, &pole)?;
        discs.push(ExcludedDisc {
            center: 0.5 * (z1 + z2),
            radius: 0.5 * (z1 - z2).norm(),
            source: stereographic(&cap.center, &pole)?,
            charge: src.charge,
        });
    }
    Ok(PlanarEquilibrium {
        pole,
        total_charge: q,
        pole_charge: q_m,
        outer_radius: ((1.0 + q - q_m) / q_m).sqrt(),
        excluded_discs: discs,
        density_scale: (1.0 + q) / PI,
    })
}
