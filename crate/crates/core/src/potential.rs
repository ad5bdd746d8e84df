//! Kernels, sphere energies and closed-form potentials of the measures that
//! arise for point-charge external fields on spheres: balayage of `σ₂` and
//! of point masses onto cap complements (logarithmic case), signed
//! equilibria on a single cap complement (Riesz case), their densities and
//! weighted potentials, and the weighted-energy functional values `Φ_s(t)`.
//!
//! Single-cap formulas are written in the zonal coordinate `ξ = ⟨x, a⟩`
//! relative to the cap center `a`; the cap itself is `{ξ > t}` and its
//! complement `Σ = {ξ ≤ t}`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::integrate;
use crate::specfun::{digamma, gamma_ratio, ln_gamma, reg_hyp2f1, reg_inc_beta, rgamma};
use crate::sphere::{Cap, SpherePoint};

/// Interaction kernel on `S^d`: `log(1/r)` for `s = 0`, `r^{-s}` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub s: f64,
}

impl KernelSpec {
    /// Validates the scope: the logarithmic kernel on `S²`, or a Riesz kernel
    /// with `d − 2 ≤ s < d`, `s > 0`.
    pub fn new(d: usize, s: f64) -> Result<Self> {
        if d < 2 {
            return Err(domain("KernelSpec::new", format!("dimension {d} < 2")));
        }
        if !s.is_finite() {
            return Err(domain("KernelSpec::new", "non-finite s"));
        }
        if s == 0.0 {
            if d != 2 {
                return Err(domain(
                    "KernelSpec::new",
                    format!("logarithmic kernel is only supported on S², got d = {d}"),
                ));
            }
        } else if !(s > 0.0 && s >= d as f64 - 2.0 && s < d as f64) {
            return Err(domain(
                "KernelSpec::new",
                format!("Riesz exponent s = {s} outside [d-2, d) ∩ (0, d) for d = {d}"),
            ));
        }
        Ok(Self { d, s })
    }

    /// The logarithmic kernel on `S²`.
    pub fn logarithmic() -> Self {
        Self { d: 2, s: 0.0 }
    }

    pub fn is_log(&self) -> bool {
        self.s == 0.0
    }

    /// Kernel value as a function of the chordal distance `r > 0`.
    #[inline]
    pub fn of_chord(&self, r: f64) -> f64 {
        if self.s == 0.0 {
            -r.ln()
        } else if self.s == 1.0 {
            1.0 / r
        } else {
            r.powf(-self.s)
        }
    }

    /// Kernel value as a function of the squared chord `r² > 0`.
    #[inline]
    pub fn of_chord_sq(&self, r2: f64) -> f64 {
        if self.s == 0.0 {
            -0.5 * r2.ln()
        } else if self.s == 1.0 {
            1.0 / r2.sqrt()
        } else if self.s == 2.0 {
            1.0 / r2
        } else {
            r2.powf(-0.5 * self.s)
        }
    }
}

/// `k_s(x, y)`; errors at `x = y`.
pub fn kernel(spec: &KernelSpec, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    if x.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: x.dim(),
        });
    }
    let r = x.chord(y)?;
    if r == 0.0 {
        return Err(Error::Singularity(
            "kernel evaluated at coincident points".into(),
        ));
    }
    Ok(spec.of_chord(r))
}

/// Energy `W_s(S^d)` of the normalized surface measure:
///
/// ```text
/// W_s = Γ(d) Γ((d−s)/2) / (2^s Γ(d/2) Γ(d − s/2)),   0 < s < d,
/// W_0 = −log 2 + (ψ(d) − ψ(d/2))/2.
/// ```
pub fn sphere_energy(spec: &KernelSpec) -> Result<f64> {
    let d = spec.d as f64;
    let s = spec.s;
    if !(0.0..d).contains(&s) {
        return Err(domain("sphere_energy", format!("s = {s} outside [0, d)")));
    }
    if s == 0.0 {
        return Ok(-LN_2 + 0.5 * (digamma(d)? - digamma(0.5 * d)?));
    }
    Ok(gamma_ratio(d, 0.5 * d)? * gamma_ratio(0.5 * (d - s), d - 0.5 * s)? / 2f64.powf(s))
}

/// `ω_{d−1}/ω_d`, the density of the zonal coordinate `u` under `σ_d` is
/// this ratio times `(1 − u²)^{d/2−1}`.
pub fn zonal_weight_constant(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d).unwrap() - 2.0 * ln_gamma(0.5 * d).unwrap() - (d - 1.0) * LN_2).exp()
}

/// Density of the zonal coordinate `u = ⟨x, a⟩` for `x ~ σ_d`.
pub fn zonal_weight(d: usize, u: f64) -> f64 {
    if d == 2 {
        return 0.5;
    }
    zonal_weight_constant(d) * (1.0 - u * u).max(0.0).powf(0.5 * d as f64 - 1.0)
}

// ---------------------------------------------------------------------------
// Logarithmic kernel on S²
// ---------------------------------------------------------------------------

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `∫_t^1 log(1+u) du`.
fn int_log_one_plus(t: f64) -> f64 {
    (2.0 * LN_2 - 2.0) - (xlogx(1.0 + t) - (1.0 + t))
}

fn check_height(function: &'static str, t: f64) -> Result<()> {
    if !(t > -1.0 && t < 1.0) {
        return Err(domain(function, format!("cap height {t} outside (-1, 1)")));
    }
    Ok(())
}

fn check_zonal(function: &'static str, xi: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&xi) {
        return Err(domain(
            function,
            format!("zonal coordinate {xi} outside [-1, 1]"),
        ));
    }
    Ok(())
}

/// Logarithmic potential at zonal height `ξ` of `σ₂` restricted to the cap
/// `{u ≥ t}` (a measure of mass `(1 − t)/2`).
///
/// Uses the azimuthal mean of `log|x − y|²`, which equals
/// `log((1+u)(1−ξ))` for `u ≥ ξ` and `log((1−u)(1+ξ))` for `u ≤ ξ`.
pub fn log_cap_potential(t: f64, xi: f64) -> Result<f64> {
    check_height("log_cap_potential", t)?;
    check_zonal("log_cap_potential", xi)?;
    if xi <= t {
        return Ok(-0.25 * (int_log_one_plus(t) + (1.0 - t) * (-xi).ln_1p()));
    }
    // ∫ log(1−u) du has antiderivative −(1−u)log(1−u) + (1−u).
    let a = |u: f64| -xlogx(1.0 - u) + (1.0 - u);
    let lower = a(xi) - a(t) + (xi - t) * xi.ln_1p();
    let upper = int_log_one_plus(xi) + xlogx(1.0 - xi);
    Ok(-0.25 * (lower + upper))
}

/// Logarithmic energy constant `W₀(Σ)` of the cap complement `Σ = {u ≤ t}`,
/// i.e. the constant value on `Σ` of the potential of `bal₀(σ₂, Σ)`.
pub fn log_cap_complement_energy(t: f64) -> Result<f64> {
    check_height("log_cap_complement_energy", t)?;
    let w0 = 0.5 - LN_2;
    Ok(w0 + 0.25 * int_log_one_plus(t) - 0.25 * (1.0 - t) * t.ln_1p())
}

/// Potentials of the two logarithmic balayage measures onto `Σ_γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBalayagePotentials {
    /// Potential of `bal₀(σ₂, Σ_γ)`.
    pub u_sigma: f64,
    /// Potential of `bal₀(δ_a, Σ_γ)`, which is the uniform probability
    /// measure on the boundary circle of the cap.
    pub u_delta: f64,
}

/// Potentials at `x` of `bal₀(σ₂, Σ_γ)` and `bal₀(δ_a, Σ_γ)` for the cap
/// `Σ_γ^c` (log kernel on `S²`).
///
/// ```text
///            ⎧ W₀(Σ_γ)                          ξ ≤ t
/// u_sigma =  ⎨
///            ⎩ W₀(Σ_γ) + ½ log((1+t)/(1+ξ))     ξ > t
///
///            ⎧ −½ log((1+t)(1−ξ))               ξ ≤ t
/// u_delta =  ⎨
///            ⎩ −½ log((1−t)(1+ξ))               ξ > t
/// ```
///
/// On `Σ_γ` the second expression differs from the point potential
/// `−½ log(2(1−ξ))` by the constant `−½ log((1+t)/2)`.
pub fn log_weighted_balayage_potentials(
    cap: &Cap,
    x: &SpherePoint,
) -> Result<LogBalayagePotentials> {
    if cap.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cap.dim(),
        });
    }
    let xi = cap.zonal(x)?.clamp(-1.0, 1.0);
    log_balayage_potentials_zonal(cap.height, xi)
}

/// Zonal form of [`log_weighted_balayage_potentials`].
pub fn log_balayage_potentials_zonal(t: f64, xi: f64) -> Result<LogBalayagePotentials> {
    check_height("log_balayage_potentials", t)?;
    check_zonal("log_balayage_potentials", xi)?;
    let w = log_cap_complement_energy(t)?;
    if xi <= t {
        Ok(LogBalayagePotentials {
            u_sigma: w,
            u_delta: -0.5 * (t.ln_1p() + (-xi).ln_1p()),
        })
    } else {
        Ok(LogBalayagePotentials {
            u_sigma: w + 0.5 * (t.ln_1p() - xi.ln_1p()),
            u_delta: -0.5 * ((-t).ln_1p() + xi.ln_1p()),
        })
    }
}

/// The function `f(u) = ((1+q−q_i)/2) log(1+u) + (q_i/2) log(1−u)` that
/// governs the weighted potential inside the `i`-th cap for the
/// logarithmic solution: there the weighted potential equals `F + f(t) − f(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogInfluenceProfile {
    pub charge: f64,
    pub total_charge: f64,
}

impl LogInfluenceProfile {
    pub fn new(charge: f64, total_charge: f64) -> Result<Self> {
        if !(charge > 0.0 && total_charge >= charge) {
            return Err(domain(
                "LogInfluenceProfile::new",
                format!("need 0 < q_i ≤ q, got q_i = {charge}, q = {total_charge}"),
            ));
        }
        Ok(Self {
            charge,
            total_charge,
        })
    }

    pub fn value(&self, u: f64) -> f64 {
        let rest = 1.0 + self.total_charge - self.charge;
        0.5 * rest * u.ln_1p() + 0.5 * self.charge * (-u).ln_1p()
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let rest = 1.0 + self.total_charge - self.charge;
        0.5 * rest / (1.0 + u) - 0.5 * self.charge / (1.0 - u)
    }

    /// Unique maximizer `u* = 1 − 2q_i/(1+q)` of `f` on `(−1, 1)`.
    pub fn stationary_point(&self) -> f64 {
        1.0 - 2.0 * self.charge / (1.0 + self.total_charge)
    }

    /// Weighted potential minus the support constant at zonal height `ξ`
    /// relative to a cap of height `t`: `f(t) − f(ξ)` inside the cap, `0` outside.
    pub fn exterior_increment(&self, t: f64, xi: f64) -> Result<f64> {
        check_zonal("LogInfluenceProfile::exterior_increment", xi)?;
        if xi <= t {
            return Ok(0.0);
        }
        if xi == 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.value(t) - self.value(xi))
    }
}

/// Logarithmic potential at `x` of `density · σ₂` restricted to `S²` minus
/// the union of the given pairwise disjoint caps.
pub fn log_uniform_support_potential(caps: &[Cap], density: f64, x: &SpherePoint) -> Result<f64> {
    let mut removed = 0.0;
    for cap in caps {
        let xi = cap.zonal(x)?.clamp(-1.0, 1.0);
        removed += log_cap_potential(cap.height, xi)?;
    }
    Ok(density * ((0.5 - LN_2) - removed))
}

// ---------------------------------------------------------------------------
// Riesz kernel: signed equilibria on a cap complement
// ---------------------------------------------------------------------------

/// Signed `(d−2)`-equilibrium on the complement of one cap: a multiple of
/// `σ_d` restricted to `Σ = {u ≤ t}` plus a multiple of the normalized
/// uniform measure `β` on the boundary circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedCapEquilibrium {
    pub cap: Cap,
    pub charge: f64,
    pub d: usize,
    pub s: f64,
    pub uniform_coefficient: f64,
    pub boundary_coefficient: f64,
    pub phi_value: f64,
}

impl SignedCapEquilibrium {
    /// `uniform_coefficient · σ_d(Σ) + boundary_coefficient`.
    pub fn total_mass(&self) -> f64 {
        self.uniform_coefficient * (1.0 - self.cap.area()) + self.boundary_coefficient
    }

    /// Whether the measure has a negative boundary component.
    pub fn has_negative_part(&self) -> bool {
        self.boundary_coefficient < 0.0
    }
}

fn dm2_boundary_factor(d: usize, t: f64) -> f64 {
    0.5 * (1.0 - t) * (1.0 - t * t).powf(0.5 * d as f64 - 1.0)
}

fn dm2_check(function: &'static str, cap: &Cap, q: f64, d: usize) -> Result<()> {
    if d < 3 {
        return Err(domain(function, format!("requires d ≥ 3, got {d}")));
    }
    if cap.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cap.dim(),
        });
    }
    if !(q >= 0.0) {
        return Err(domain(function, format!("charge {q} must be non-negative")));
    }
    Ok(())
}

/// Signed `(d−2)`-equilibrium of the cap complement with a prescribed value
/// `Φ` of the functional:
///
/// ```text
/// η = (Φ/W) σ_d|Σ + ((1−t)/2)(1−t²)^{d/2−1} [Φ − 4q/γ^d] β.
/// ```
pub fn signed_cap_equilibrium_dm2_with_phi(
    cap: &Cap,
    q: f64,
    d: usize,
    phi: f64,
) -> Result<SignedCapEquilibrium> {
    dm2_check("signed_cap_equilibrium_dm2", cap, q, d)?;
    let s = d as f64 - 2.0;
    let w = sphere_energy(&KernelSpec::new(d, s)?)?;
    let t = cap.height;
    let gamma = cap.chordal_radius;
    Ok(SignedCapEquilibrium {
        cap: cap.clone(),
        charge: q,
        d,
        s,
        uniform_coefficient: phi / w,
        boundary_coefficient: dm2_boundary_factor(d, t) * (phi - 4.0 * q / gamma.powi(d as i32)),
        phi_value: phi,
    })
}

/// Value `Φ_{d−2}(t)` fixed by requiring the signed equilibrium to have
/// unit mass: `Φ [(1 − A)/W + B] = 1 + 4qB/γ^d` with `A` the cap area and
/// `B = ((1−t)/2)(1−t²)^{d/2−1}`.
pub fn phi_dm2(cap: &Cap, q: f64, d: usize) -> Result<f64> {
    dm2_check("phi_dm2", cap, q, d)?;
    let w = sphere_energy(&KernelSpec::new(d, d as f64 - 2.0)?)?;
    let b = dm2_boundary_factor(d, cap.height);
    let a = cap.area();
    Ok((1.0 + 4.0 * q * b / cap.chordal_radius.powi(d as i32)) / ((1.0 - a) / w + b))
}

/// Signed `(d−2)`-equilibrium of the cap complement for the field of a
/// single charge `q` at the cap center, normalized to unit mass.
pub fn signed_cap_equilibrium_dm2(cap: &Cap, q: f64, d: usize) -> Result<SignedCapEquilibrium> {
    let phi = phi_dm2(cap, q, d)?;
    signed_cap_equilibrium_dm2_with_phi(cap, q, d, phi)
}

/// Weighted `(d−2)`-potential `U^η + q k(a, ·)` of the signed equilibrium
/// at zonal height `ξ`:
///
/// ```text
/// ξ ≤ t:  Φ
/// ξ > t:  Φ ((1+t)/(1+ξ))^{d/2−1} + q/(2(1−ξ))^{d/2−1} − (q/γ^{d−2}) ((1+t)/(1+ξ))^{d/2−1}
/// ```
pub fn weighted_potential_dm2(cap: &Cap, q: f64, phi: f64, d: usize, xi: f64) -> Result<f64> {
    dm2_check("weighted_potential_dm2", cap, q, d)?;
    check_zonal("weighted_potential_dm2", xi)?;
    let t = cap.height;
    if xi <= t {
        return Ok(phi);
    }
    if xi >= 1.0 {
        return Err(Error::Singularity(
            "weighted potential at the source".into(),
        ));
    }
    let p = 0.5 * d as f64 - 1.0;
    let ratio = ((1.0 + t) / (1.0 + xi)).powf(p);
    let gamma = cap.chordal_radius;
    Ok(phi * ratio + q / (2.0 * (1.0 - xi)).powf(p) - q / gamma.powf(d as f64 - 2.0) * ratio)
}

/// Weighted `s`-potential of the signed equilibrium for `d − 2 < s < d`:
///
/// ```text
/// ξ ≤ t:  Φ
/// ξ > t:  Φ + q/(2(1−ξ))^{s/2} · I((2/(1−t))(ξ−t)/(1+ξ); (d−s)/2, s/2)
///           − Φ · I((ξ−t)/(1+ξ); (d−s)/2, s/2)
/// ```
pub fn weighted_potential_general_s(
    cap: &Cap,
    q: f64,
    phi: f64,
    d: usize,
    s: f64,
    xi: f64,
) -> Result<f64> {
    check_zonal("weighted_potential_general_s", xi)?;
    if xi <= cap.height {
        general_s_exponents(d, s)?;
        return Ok(phi);
    }
    exterior_weighted_potential_general_s(cap, q, phi, d, s, xi)
}

/// The exterior branch of [`weighted_potential_general_s`], valid on
/// `t ≤ ξ < 1`; at `ξ = t` both incomplete beta terms vanish.
pub fn exterior_weighted_potential_general_s(
    cap: &Cap,
    q: f64,
    phi: f64,
    d: usize,
    s: f64,
    xi: f64,
) -> Result<f64> {
    let (a, b) = general_s_exponents(d, s)?;
    let t = cap.height;
    if !(xi >= t && xi <= 1.0) {
        return Err(domain(
            "weighted_potential_general_s",
            format!("ξ = {xi} outside [t, 1)"),
        ));
    }
    if xi == 1.0 {
        return Err(Error::Singularity(
            "weighted potential at the source".into(),
        ));
    }
    let x1 = (2.0 / (1.0 - t) * (xi - t) / (1.0 + xi)).min(1.0);
    let x2 = (xi - t) / (1.0 + xi);
    Ok(
        phi + q / (2.0 * (1.0 - xi)).powf(b) * reg_inc_beta(x1, a, b)?
            - phi * reg_inc_beta(x2, a, b)?,
    )
}

/// Beta parameters `((d − s)/2, s/2)` after checking `d − 2 < s < d`.
fn general_s_exponents(d: usize, s: f64) -> Result<(f64, f64)> {
    let kernel = KernelSpec::new(d, s)?;
    if s <= d as f64 - 2.0 || kernel.is_log() {
        return Err(domain(
            "weighted_potential_general_s",
            format!("requires d−2 < s < d, got s = {s}"),
        ));
    }
    Ok((0.5 * (d as f64 - s), 0.5 * s))
}

/// Density (with respect to `σ_d`) of the signed `s`-equilibrium on the
/// complement `Σ = {u ≤ t}` of one cap, for `d − 2 < s < d`:
///
/// ```text
/// η'(u) = (1/W) (Γ(d/2)/Γ(d−s/2)) ((1−t)/(1−u))^{d/2} ((t−u)/(1−t))^{(s−d)/2}
///         × { Φ ₂F̃₁(1, d/2; 1−(d−s)/2; (t−u)/(1−u)) − q 2^{d−s} / (γ^d Γ(1−(d−s)/2)) }
/// ```
///
/// The factor `1/Γ(1−(d−s)/2)` on the point-charge term is what makes the
/// density integrate to one and reproduce the closed-form weighted potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedCapDensity {
    pub d: usize,
    pub s: f64,
    pub height: f64,
    pub chordal_radius: f64,
    pub charge: f64,
    pub phi: f64,
    prefactor: f64,
    point_term: f64,
}

impl SignedCapDensity {
    /// Builds the density with a prescribed `Φ`.
    pub fn with_phi(cap: &Cap, q: f64, d: usize, s: f64, phi: f64) -> Result<Self> {
        let kernel = KernelSpec::new(d, s)?;
        if kernel.is_log() || s <= d as f64 - 2.0 {
            return Err(domain(
                "SignedCapDensity",
                format!("requires d−2 < s < d, got d = {d}, s = {s}"),
            ));
        }
        if cap.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cap.dim(),
            });
        }
        if !(q >= 0.0) {
            return Err(domain(
                "SignedCapDensity",
                format!("charge {q} must be non-negative"),
            ));
        }
        let df = d as f64;
        let w = sphere_energy(&kernel)?;
        let prefactor = gamma_ratio(0.5 * df, df - 0.5 * s)? / w;
        let c = 1.0 - 0.5 * (df - s);
        let point_term = q * 2f64.powf(df - s) / cap.chordal_radius.powi(d as i32) * rgamma(c);
        Ok(Self {
            d,
            s,
            height: cap.height,
            chordal_radius: cap.chordal_radius,
            charge: q,
            phi,
            prefactor,
            point_term,
        })
    }

    /// Builds the density with `Φ` from [`cap_functional`].
    pub fn new(cap: &Cap, q: f64, d: usize, s: f64) -> Result<Self> {
        let phi = cap_functional(&KernelSpec::new(d, s)?, cap, q)?;
        Self::with_phi(cap, q, d, s, phi)
    }

    /// Exponent `(s − d)/2 ∈ (−1, 0)` of the edge singularity at `u = t`.
    pub fn edge_exponent(&self) -> f64 {
        0.5 * (self.s - self.d as f64)
    }

    /// `η'(u)` for `u ∈ [−1, t)`.
    pub fn density(&self, u: f64) -> Result<f64> {
        if !(-1.0..=self.height).contains(&u) {
            return Err(domain("signed_density", format!("u = {u} outside [-1, t]")));
        }
        self.density_at_gap(self.height - u)
    }

    /// `η'(t − h)` for a gap `h ∈ (0, 1 + t]` below the cap boundary.
    ///
    /// Passing the gap directly keeps the edge factor `h^{(s−d)/2}` exact
    /// when `u` is too close to `t` to be represented separately.
    pub fn density_at_gap(&self, h: f64) -> Result<f64> {
        let t = self.height;
        if !(h >= 0.0 && h <= 1.0 + t + 1e-15) {
            return Err(domain(
                "signed_density",
                format!("gap {h} outside (0, 1 + t]"),
            ));
        }
        if h == 0.0 {
            return Err(Error::Singularity(
                "density has an integrable edge singularity at u = t".into(),
            ));
        }
        let df = self.d as f64;
        let c = 1.0 - 0.5 * (df - self.s);
        let one_minus_u = (1.0 - t) + h;
        let geometric =
            ((1.0 - t) / one_minus_u).powf(0.5 * df) * (h / (1.0 - t)).powf(self.edge_exponent());
        let hyper = reg_hyp2f1(1.0, 0.5 * df, c, h / one_minus_u)?;
        Ok(self.prefactor * geometric * (self.phi * hyper - self.point_term))
    }

    /// `∫ f(u) η'(u) w_d(u) du` over `[−1, t]` with the edge singularity
    /// removed by the substitution `t − u = (1 + t) y^{1/(1+α)}`, `α` the edge exponent.
    pub fn integrate_against(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let t = self.height;
        let k = 1.0 / (1.0 + self.edge_exponent());
        let mut failure = None;
        let r = integrate(
            |y| {
                let h = (1.0 + t) * y.powf(k);
                let u = t - h;
                let jac = (1.0 + t) * k * y.powf(k - 1.0);
                match self.density_at_gap(h) {
                    Ok(v) => v * jac * zonal_weight(self.d, u) * f(u),
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            0.0,
            1.0,
            1e-14,
            1e-13,
            4000,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }

    /// Total mass (should be one).
    pub fn total_mass(&self) -> Result<f64> {
        self.integrate_against(|_| 1.0)
    }
}

/// Coulomb (`d = 2`, `s = 1`) weighted-energy functional of the cap complement
/// `{u ≤ t}` for a reduced charge `q̄` at the cap center:
///
/// ```text
/// Φ̄₁(t) = (1 + q̄ (arcsin(t)/π + ½)) / ((√(1−t²) + arcsin(t))/π + ½)
/// ```
pub fn cap_functional_coulomb(t: f64, q_bar: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(domain(
            "cap_functional_coulomb",
            format!("t = {t} outside [-1, 1]"),
        ));
    }
    if !(q_bar >= 0.0) {
        return Err(domain(
            "cap_functional_coulomb",
            format!("charge {q_bar} must be non-negative"),
        ));
    }
    let asin = t.asin();
    let numerator = 1.0 + q_bar * (asin / PI + 0.5);
    let denominator = ((1.0 - t * t).sqrt() + asin) / PI + 0.5;
    Ok(numerator / denominator)
}

/// Value `Φ_s(t)` of the functional for the complement of `cap` and a single
/// charge `q` at its center:
///
/// * `(d, s) = (2, 0)`: `1 + q` (logarithmic balayage preserves mass);
/// * `(d, s) = (2, 1)`: [`cap_functional_coulomb`];
/// * `s = d − 2`, `d ≥ 3`: [`phi_dm2`];
/// * otherwise: the unit-mass normalization of [`SignedCapDensity`],
///   evaluated by quadrature.
pub fn cap_functional(kernel: &KernelSpec, cap: &Cap, q: f64) -> Result<f64> {
    let d = kernel.d;
    let s = kernel.s;
    if kernel.is_log() {
        return Ok(1.0 + q);
    }
    if d == 2 && s == 1.0 {
        return cap_functional_coulomb(cap.height, q);
    }
    if s == d as f64 - 2.0 {
        return phi_dm2(cap, q, d);
    }
    // η' is affine in Φ: mass(Φ) = Φ·M₁ − M₀ with M₁ = mass(Φ=1, q=0)…
    let field_free = SignedCapDensity::with_phi(cap, 0.0, d, s, 1.0)?;
    let m_phi = field_free.total_mass()?;
    let with_charge = SignedCapDensity::with_phi(cap, q, d, s, 0.0)?;
    let m_point = with_charge.total_mass()?;
    Ok((1.0 - m_point) / m_phi)
}
