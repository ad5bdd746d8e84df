//! Geometry of the unit sphere `S^d ⊂ R^{d+1}`: points, spherical caps,
//! cap areas, geodesic distances, uniform sampling and the stereographic
//! projection of `S²` onto the complex plane.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::reg_inc_beta;

/// Default tolerance (radians) for the closed-cap disjointness test.
pub const DISJOINT_TOL: f64 = 1e-12;

/// A point on the unit sphere `S^d`, stored as a unit vector of length `d + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Builds a point by normalizing `coords`; at least two coordinates are
    /// required and the vector must be finite and non-zero.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(domain("SpherePoint::new", "need at least 2 coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(domain("SpherePoint::new", "non-finite coordinate"));
        }
        let norm = norm(&coords);
        if norm == 0.0 {
            return Err(domain("SpherePoint::new", "zero vector has no direction"));
        }
        Ok(Self {
            coords: coords.iter().map(|c| c / norm).collect(),
        })
    }

    /// A point of `S²` from Cartesian coordinates.
    pub fn xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(vec![x, y, z])
    }

    /// North pole `(0, …, 0, 1)` of `S^d`.
    pub fn north_pole(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[d] = 1.0;
        Self { coords }
    }

    /// Point of `S²` from polar angle `theta` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            coords: vec![st * cp, st * sp, ct],
        }
    }

    /// Sphere dimension `d` (the ambient space is `R^{d+1}`).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Cartesian coordinates of a point of `S²`.
    pub fn as_xyz(&self) -> Result<[f64; 3]> {
        match self.coords.as_slice() {
            [x, y, z] => Ok([*x, *y, *z]),
            _ => Err(Error::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            }),
        }
    }

    /// Euclidean inner product with another point of the same sphere.
    pub fn dot(&self, other: &SpherePoint) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dot(&self.coords, &other.coords))
    }

    /// Chordal (Euclidean) distance `|x − y|`, computed from the difference
    /// vector so that nearby points keep full relative accuracy.
    pub fn chord(&self, other: &SpherePoint) -> Result<f64> {
        self.check_dim(other)?;
        Ok(chord(&self.coords, &other.coords))
    }

    pub(crate) fn check_dim(&self, other: &SpherePoint) -> Result<()> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Wraps an already normalized vector without re-normalizing.
    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;
    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Vec<f64> {
        p.coords
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// An open spherical cap `{x : |x − a| < γ}` around `center = a`.
///
/// The three equivalent size parameters are kept together: chordal radius
/// `γ`, height `t = 1 − γ²/2` (so the cap is `{⟨x, a⟩ > t}`) and geodesic
/// radius `α = 2 arcsin(γ/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: SpherePoint,
    #[serde(rename = "gamma")]
    pub chordal_radius: f64,
    #[serde(rename = "t")]
    pub height: f64,
    #[serde(rename = "alpha")]
    pub geodesic_radius: f64,
}

impl Cap {
    /// Cap from its chordal radius `γ ∈ (0, 2)`.
    pub fn from_chordal(center: SpherePoint, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(domain(
                "Cap::from_chordal",
                format!("chordal radius {gamma} outside (0, 2)"),
            ));
        }
        Ok(Self {
            center,
            chordal_radius: gamma,
            height: 1.0 - 0.5 * gamma * gamma,
            geodesic_radius: 2.0 * (0.5 * gamma).asin(),
        })
    }

    /// Cap from its height `t ∈ (−1, 1)`.
    pub fn from_height(center: SpherePoint, t: f64) -> Result<Self> {
        if !(t > -1.0 && t < 1.0) {
            return Err(domain(
                "Cap::from_height",
                format!("height {t} outside (-1, 1)"),
            ));
        }
        let gamma = (2.0 * (1.0 - t)).sqrt();
        Ok(Self {
            center,
            chordal_radius: gamma,
            height: t,
            geodesic_radius: 2.0 * (0.5 * gamma).asin(),
        })
    }

    /// Cap from its geodesic radius `α ∈ (0, π)`.
    pub fn from_geodesic(center: SpherePoint, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
            return Err(domain(
                "Cap::from_geodesic",
                format!("geodesic radius {alpha} outside (0, π)"),
            ));
        }
        let gamma = 2.0 * (0.5 * alpha).sin();
        Ok(Self {
            center,
            chordal_radius: gamma,
            height: alpha.cos(),
            geodesic_radius: alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Zonal coordinate `ξ = ⟨x, a⟩` of `x` relative to the cap center.
    pub fn zonal(&self, x: &SpherePoint) -> Result<f64> {
        x.dot(&self.center)
    }

    /// Whether `x` lies in the open cap (`|x − a| < γ`).
    pub fn contains(&self, x: &SpherePoint) -> Result<bool> {
        Ok(self.center.chord(x)? < self.chordal_radius)
    }

    /// Normalized surface measure of the cap.
    pub fn area(&self) -> f64 {
        cap_area(self.dim(), self.height).expect("cap height lies in (-1, 1)")
    }

    /// The same cap with its chordal radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_chordal(self.center.clone(), self.chordal_radius * factor)
    }
}

/// `S^d` with a family of open caps removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRegion {
    pub dimension: usize,
    pub caps: Vec<Cap>,
}

impl SupportRegion {
    pub fn new(dimension: usize, caps: Vec<Cap>) -> Result<Self> {
        if dimension < 2 {
            return Err(domain("SupportRegion::new", "dimension must be at least 2"));
        }
        for cap in &caps {
            if cap.dim() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: cap.dim(),
                });
            }
        }
        for i in 0..caps.len() {
            for j in i + 1..caps.len() {
                if caps[i].center.chord(&caps[j].center)? == 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "caps {} and {} share the same center",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { dimension, caps })
    }

    /// Whether `x` belongs to the region (lies in no open cap).
    pub fn contains(&self, x: &SpherePoint) -> Result<bool> {
        for cap in &self.caps {
            if cap.contains(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `σ_d` of the region, `1 − Σ cap areas`; valid when the caps are disjoint.
    pub fn measure(&self) -> f64 {
        1.0 - self.caps.iter().map(Cap::area).sum::<f64>()
    }
}

/// Normalized surface measure of the cap `{x ∈ S^d : ⟨x, a⟩ ≥ t}`:
/// `I_{(1−t)/2}(d/2, d/2)`.
pub fn cap_area(d: usize, t: f64) -> Result<f64> {
    if d < 1 {
        return Err(domain("cap_area", "dimension must be at least 1"));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(domain("cap_area", format!("height {t} outside [-1, 1]")));
    }
    if d == 2 {
        return Ok(0.5 * (1.0 - t));
    }
    let h = 0.5 * d as f64;
    reg_inc_beta(0.5 * (1.0 - t), h, h)
}

/// Geodesic (great-circle) distance `arccos⟨x, y⟩` with a clamped inner product.
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_dim(y)?;
    // 2·asin(chord/2) is better conditioned near 0 and π than acos alone.
    let c = chord(x.coords(), y.coords());
    if c < 1.0 {
        Ok(2.0 * (0.5 * c).asin())
    } else {
        Ok(x.dot(y)?.clamp(-1.0, 1.0).acos())
    }
}

/// Separation margin of one pair of caps:
/// `dist(a_i, a_j) − (α_i + α_j)` (radians). Negative means overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    /// Zero-based cap indices, `i < j`.
    pub i: usize,
    pub j: usize,
    pub margin: f64,
}

/// Outcome of the closed-cap disjointness test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub disjoint: bool,
    pub tolerance: f64,
    pub margins: Vec<PairMargin>,
}

impl DisjointnessReport {
    /// Pairs whose margin is below `−tolerance`.
    pub fn violations(&self) -> Vec<PairMargin> {
        self.margins
            .iter()
            .copied()
            .filter(|m| m.margin < -self.tolerance)
            .collect()
    }

    /// Smallest pair margin, or `+∞` for fewer than two caps.
    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .map(|m| m.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tests whether the closed caps are pairwise disjoint up to `tol`
/// (tangent caps count as disjoint).
pub fn caps_pairwise_disjoint_with_tol(caps: &[Cap], tol: f64) -> Result<DisjointnessReport> {
    let mut margins = Vec::new();
    for i in 0..caps.len() {
        for j in i + 1..caps.len() {
            let dist = geodesic_distance(&caps[i].center, &caps[j].center)?;
            margins.push(PairMargin {
                i,
                j,
                margin: dist - (caps[i].geodesic_radius + caps[j].geodesic_radius),
            });
        }
    }
    let disjoint = margins.iter().all(|m| m.margin >= -tol);
    Ok(DisjointnessReport {
        disjoint,
        tolerance: tol,
        margins,
    })
}

/// [`caps_pairwise_disjoint_with_tol`] with the default tolerance.
pub fn caps_pairwise_disjoint(caps: &[Cap]) -> Result<DisjointnessReport> {
    caps_pairwise_disjoint_with_tol(caps, DISJOINT_TOL)
}

/// `n` points distributed according to `σ_d`, by normalizing standard
/// Gaussian vectors drawn from a ChaCha8 stream seeded with `seed`.
pub fn sample_uniform(d: usize, n: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_point(d, &mut rng)).collect()
}

/// One `σ_d`-distributed point from an arbitrary random source.
pub fn random_point<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..=d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-150 {
            return SpherePoint::from_unit_unchecked(v.iter().map(|c| c / n).collect());
        }
    }
}

/// A right-handed orthonormal frame `(e1, e2, p)` of `R³` whose third axis
/// is a given point `p ∈ S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub pole: [f64; 3],
}

impl Frame {
    pub fn with_pole(p: &SpherePoint) -> Result<Self> {
        let pole = p.as_xyz()?;
        // Pick the coordinate axis least aligned with the pole.
        let axis = if pole[0].abs() <= pole[1].abs() && pole[0].abs() <= pole[2].abs() {
            [1.0, 0.0, 0.0]
        } else if pole[1].abs() <= pole[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let proj = dot(&axis, &pole);
        let mut e1 = [
            axis[0] - proj * pole[0],
            axis[1] - proj * pole[1],
            axis[2] - proj * pole[2],
        ];
        let n = norm(&e1);
        e1.iter_mut().for_each(|c| *c /= n);
        let e2 = cross(&pole, &e1);
        Ok(Self { e1, e2, pole })
    }

    /// Coordinates of `x` in this frame.
    pub fn to_local(&self, x: &[f64; 3]) -> [f64; 3] {
        [dot(x, &self.e1), dot(x, &self.e2), dot(x, &self.pole)]
    }

    /// Ambient coordinates of a vector given in this frame.
    pub fn to_global(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = v[0] * self.e1[k] + v[1] * self.e2[k] + v[2] * self.pole[k];
        }
        out
    }
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Stereographic projection of `x ∈ S²` from the pole `p` onto the plane
/// through the origin orthogonal to `p`, expressed as a complex number in
/// the frame [`Frame::with_pole`]. The antipode `−p` maps to `0`.
///
/// Chords transform as `|x − p| = 2/√(1+|z|²)` and
/// `|x − y| = 2|z − w| / (√(1+|z|²) √(1+|w|²))`.
pub fn stereographic(x: &SpherePoint, pole: &SpherePoint) -> Result<Complex64> {
    let frame = Frame::with_pole(pole)?;
    let local = frame.to_local(&x.as_xyz()?);
    let planar2 = local[0] * local[0] + local[1] * local[1];
    // 1 − x₃ computed without cancellation near the pole.
    let denom = if local[2] > 0.0 {
        planar2 / (1.0 + local[2])
    } else {
        1.0 - local[2]
    };
    if denom == 0.0 || x.chord(pole)? == 0.0 {
        return Err(Error::Singularity(
            "stereographic projection of the pole is the point at infinity".into(),
        ));
    }
    Ok(Complex64::new(local[0] / denom, local[1] / denom))
}

/// Inverse of [`stereographic`].
pub fn stereographic_inverse(z: Complex64, pole: &SpherePoint) -> Result<SpherePoint> {
    let frame = Frame::with_pole(pole)?;
    let r2 = z.norm_sqr();
    let s = 1.0 + r2;
    let local = [2.0 * z.re / s, 2.0 * z.im / s, (r2 - 1.0) / s];
    let g = frame.to_global(&local);
    SpherePoint::new(g.to_vec())
}
