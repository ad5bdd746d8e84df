//! Run configuration: one JSON document with the problem (`d`, `s`,
//! `sources`) and optional command blocks. Unknown fields are rejected.

use serde::{Deserialize, Serialize};
use sphere_equilibrium::discrete::OptimizerSettings;
use sphere_equilibrium::sphere::SpherePoint;
use sphere_equilibrium::support::{ProblemSpec, Source};
use sphere_equilibrium::verify::VariationalSettings;

use crate::error::CliError;

/// Positions whose norm deviates from one by more than this are reported
/// when they are renormalized.
pub const RENORMALIZATION_WARNING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Ambient coordinates in `R^{d+1}`; renormalized to the unit sphere.
    pub position: Vec<f64>,
    pub charge: f64,
}

/// The problem part of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub d: usize,
    pub s: f64,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Number of points.
    pub n: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub gradient_tolerance: Option<f64>,
    pub perturbation_scale: f64,
    pub history_size: usize,
    pub pole_guard: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let s = OptimizerSettings::default();
        Self {
            n: 500,
            restarts: s.restart_count,
            seed: s.seed,
            max_iterations: s.max_iterations,
            gradient_tolerance: s.gradient_tolerance,
            perturbation_scale: s.perturbation_scale,
            history_size: s.history_size,
            pole_guard: s.pole_guard,
        }
    }
}

impl OptimizeConfig {
    pub fn settings(&self, parallel: bool) -> OptimizerSettings {
        OptimizerSettings {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            restart_count: self.restarts,
            perturbation_scale: self.perturbation_scale,
            seed: self.seed,
            history_size: self.history_size,
            pole_guard: self.pole_guard,
            parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Support points and exterior points of the variational check.
    pub grid: usize,
    /// Monte-Carlo samples per evaluation point.
    pub samples: usize,
    pub seed: u64,
    pub interior_slack: f64,
    pub exterior_slack: f64,
    /// Number of random counting windows for the empirical density check.
    pub windows: usize,
    /// Geodesic radius of the counting windows.
    pub window_radius: f64,
    pub density_tolerance: f64,
    /// Evaluation points of the planar Laplacian check.
    pub planar_grid: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let v = VariationalSettings::default();
        Self {
            grid: v.grid,
            samples: v.samples,
            seed: v.seed,
            interior_slack: v.interior_slack,
            exterior_slack: v.exterior_slack,
            windows: 20,
            window_radius: 0.4,
            density_tolerance: 0.02,
            planar_grid: 200,
        }
    }
}

impl VerifyConfig {
    pub fn variational(&self) -> VariationalSettings {
        VariationalSettings {
            grid: self.grid,
            samples: self.samples,
            seed: self.seed,
            interior_slack: self.interior_slack,
            exterior_slack: self.exterior_slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Points per cap in `density_profile.csv`.
    pub profile_points: usize,
    /// Monte-Carlo samples per profile point when no closed form exists.
    pub profile_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            profile_points: 201,
            profile_samples: 100_000,
        }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub s: f64,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_problem(problem: ProblemConfig) -> Self {
        Self {
            d: problem.d,
            s: problem.s,
            sources: problem.sources,
            optimize: OptimizeConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("cannot parse configuration: {e}")))
    }

    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig {
            d: self.d,
            s: self.s,
            sources: self.sources.clone(),
        }
    }

    /// Validated problem; positions are renormalized, with a warning on
    /// stderr when a norm is off by more than [`RENORMALIZATION_WARNING`].
    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        self.problem().spec()
    }

    /// Applies `RE_SEED` (when set) to the optimizer and verifier seeds.
    pub fn apply_seed_override(&mut self, value: Option<String>) -> Result<(), CliError> {
        if let Some(v) = value {
            let seed: u64 = v.trim().parse().map_err(|_| {
                CliError::Config(format!("RE_SEED must be an unsigned integer, got {v:?}"))
            })?;
            self.optimize.seed = seed;
            self.verify.seed = seed;
        }
        Ok(())
    }
}

impl ProblemConfig {
    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let mut sources = Vec::with_capacity(self.sources.len());
        for (i, src) in self.sources.iter().enumerate() {
            let norm = src.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > RENORMALIZATION_WARNING && norm > 0.0 {
                eprintln!(
                    "warning: source {} has |position| = {norm:.17e}; renormalized",
                    i + 1
                );
            }
            let position = SpherePoint::new(src.position.clone())
                .map_err(|e| CliError::Config(format!("source {}: {e}", i + 1)))?;
            sources.push(Source::new(position, src.charge));
        }
        ProblemSpec::new(self.d, self.s, sources).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Built-in parameter presets 1–4. `variant` selects the alternative
/// position of `a₂` offered by presets 1 and 3.
pub fn figure_preset(figure: u8, variant: bool) -> Result<RunConfig, CliError> {
    let r91 = 91f64.sqrt() / 10.0;
    let north = vec![0.0, 0.0, 1.0];
    let src = |position: Vec<f64>, charge: f64| SourceConfig { position, charge };
    let (s, sources) = match (figure, variant) {
        (1, false) => (0.0, vec![src(north, 0.25), src(vec![r91, 0.0, -0.3], 0.25)]),
        (1, true) => (
            0.0,
            vec![
                src(north, 0.25),
                src(vec![4.0 * 5f64.sqrt() / 9.0, 0.0, -1.0 / 9.0], 0.25),
            ],
        ),
        (2, false) => (
            0.0,
            vec![
                src(north, 0.25),
                src(vec![r91, 0.0, -0.3], 0.125),
                src(vec![0.0, 3f64.sqrt() / 2.0, -0.5], 0.05),
            ],
        ),
        (3, v) => (
            1.0,
            vec![
                src(north, 0.25),
                src(vec![0.0, r91, if v { 0.3 } else { -0.3 }], 0.25),
            ],
        ),
        (4, false) => (0.0, vec![src(north, 0.25), src(vec![r91, 0.0, 0.3], 0.25)]),
        (f @ (1..=4), true) => return Err(CliError::Config(format!("preset {f} has no variant"))),
        (f, _) => return Err(CliError::Config(format!("no preset {f}; choose 1–4"))),
    };
    Ok(RunConfig::from_problem(ProblemConfig { d: 2, s, sources }))
}
