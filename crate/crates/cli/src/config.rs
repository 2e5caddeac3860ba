//! Experiment configuration files.

use std::path::{Path, PathBuf};

use nonauto::hyperbolicity::{CertifyConfig, SampleConfig};
use nonauto::motion::ShadowConfig;
use nonauto::rays::RayConfig;
use nonauto::{Complex64, ExternalAngle, Rule, SequenceSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Render,
    Green,
    Bottcher,
    TraceRay,
    Certify,
    Rigidity,
    Motion,
    Hausdorff,
    ConjugateMonic,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Render => "render",
            Task::Green => "green",
            Task::Bottcher => "bottcher",
            Task::TraceRay => "trace-ray",
            Task::Certify => "certify",
            Task::Rigidity => "rigidity",
            Task::Motion => "motion",
            Task::Hausdorff => "hausdorff",
            Task::ConjugateMonic => "conjugate-monic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub spec: SequenceSpec,
    /// Time index of the Julia set under study.
    #[serde(default)]
    pub m: u64,
    /// Replaces the seed of a seeded perturbation rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub render: RenderParams,
    #[serde(default)]
    pub points: PointParams,
    #[serde(default)]
    pub rays: RayParams,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub rigidity: RigidityParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hausdorff: Option<HausdorffParams>,
    #[serde(default)]
    pub conjugate: ConjugateParams,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub center: Complex64,
    pub width: f64,
    pub pixels: (usize, usize),
    pub horizon: u64,
    /// Escape radius; `R_0` of the sequence when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Rays drawn over the image.
    pub overlay: Vec<ExternalAngle>,
    pub stem: String,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            center: Complex64::new(0.0, 0.0),
            width: 4.0,
            pixels: (512, 512),
            horizon: nonauto::render::DEFAULT_HORIZON,
            radius: None,
            overlay: Vec::new(),
            stem: "render".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointParams {
    pub points: Vec<Complex64>,
    pub horizon: u64,
}

impl Default for PointParams {
    fn default() -> Self {
        PointParams { points: Vec::new(), horizon: nonauto::potential::DEFAULT_HORIZON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RayParams {
    pub angles: Vec<ExternalAngle>,
    pub config: RayConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidityParams {
    /// Seeds substituted into the perturbation rule; empty means the sequence as given.
    pub seeds: Vec<u64>,
    pub angles: Vec<ExternalAngle>,
    /// Denominators q whose angles k/q are probed for membership in the group.
    pub probe_denominators: Vec<u64>,
    pub tol: f64,
    pub ray: RayConfig,
}

impl Default for RigidityParams {
    fn default() -> Self {
        RigidityParams {
            seeds: Vec::new(),
            angles: vec![ExternalAngle::new(1, 7), ExternalAngle::new(2, 7), ExternalAngle::new(4, 7)],
            probe_denominators: vec![7, 63],
            tol: 1e-5,
            ray: RayConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionParams {
    pub target: SequenceSpec,
    /// Number of leading maps that vary; required unless both specs are Constant or Periodic with one period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    pub angle_sets: Vec<Vec<ExternalAngle>>,
    #[serde(default = "default_motion_tol")]
    pub tol: f64,
    #[serde(default)]
    pub shadow: ShadowConfig,
    #[serde(default = "default_bisections")]
    pub max_bisections: u32,
    #[serde(default)]
    pub ray: RayConfig,
}

fn default_max_step() -> f64 {
    0.1
}

fn default_motion_tol() -> f64 {
    1e-6
}

fn default_bisections() -> u32 {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HausdorffParams {
    pub other: SequenceSpec,
    #[serde(default)]
    pub sample: SampleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConjugateParams {
    pub m_max: u64,
    pub horizon: u64,
    pub tol: f64,
    /// Test points for the conjugacy residual.
    pub samples: usize,
}

impl Default for ConjugateParams {
    fn default() -> Self {
        ConjugateParams { m_max: 8, horizon: 64, tol: 1e-12, samples: 100 }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cfg = if path.extension().map_or(false, |e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        } else {
            Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?
        };
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies the seed override and checks everything that can be checked without numerics.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if let Some(seed) = self.seed {
            let mut any = set_seed(&mut self.spec.rule, seed);
            if let Some(p) = self.motion.as_mut() {
                any |= set_seed(&mut p.target.rule, seed);
            }
            if let Some(p) = self.hausdorff.as_mut() {
                any |= set_seed(&mut p.other.rule, seed);
            }
            if !any {
                return Err(ConfigError("seed given but no sequence has a seeded perturbation".into()));
            }
        }
        check_spec(&self.spec, "spec")?;
        match self.task {
            Task::Render => {
                let r = &self.render;
                nonauto::render::Viewport::new(r.center, r.width, r.pixels).map_err(|e| ConfigError(e.to_string()))?;
            }
            Task::Green | Task::Bottcher => {
                if self.points.points.is_empty() {
                    return Err(ConfigError("points.points must not be empty".into()));
                }
            }
            Task::TraceRay => {
                if self.rays.angles.is_empty() {
                    return Err(ConfigError("rays.angles must not be empty".into()));
                }
            }
            Task::Rigidity => {
                if self.rigidity.angles.is_empty() || !(self.rigidity.tol > 0.0) {
                    return Err(ConfigError("rigidity needs angles and a positive tol".into()));
                }
                if !self.rigidity.seeds.is_empty() && !has_seed(&self.spec.rule) {
                    return Err(ConfigError("rigidity.seeds given but the sequence has no seeded perturbation".into()));
                }
            }
            Task::Motion => {
                let p = self.motion.as_ref().ok_or_else(|| ConfigError("motion task needs a [motion] table".into()))?;
                check_spec(&p.target, "motion.target")?;
                if p.angle_sets.is_empty() || p.angle_sets.iter().any(|s| s.is_empty()) {
                    return Err(ConfigError("motion.angle_sets must hold nonempty sets".into()));
                }
            }
            Task::Hausdorff => {
                let p = self.hausdorff.as_ref().ok_or_else(|| ConfigError("hausdorff task needs a [hausdorff] table".into()))?;
                check_spec(&p.other, "hausdorff.other")?;
            }
            Task::Certify | Task::ConjugateMonic => {}
        }
        Ok(self)
    }
}

fn check_spec(spec: &SequenceSpec, what: &str) -> Result<(), ConfigError> {
    spec.bounds.validate().map_err(|e| ConfigError(format!("{what}: {e}")))?;
    for m in 1..=4 {
        if let Err(e) = spec.polynomial_at(m) {
            if !matches!(e, nonauto::DynError::IndexBeyondHorizon { .. }) {
                return Err(ConfigError(format!("{what}: {e}")));
            }
        }
    }
    Ok(())
}

pub fn set_seed(rule: &mut Rule, new: u64) -> bool {
    match rule {
        Rule::SeededPerturbation { seed, .. } => {
            *seed = new;
            true
        }
        Rule::PrefixThenTail { tail, .. } => set_seed(tail, new),
        _ => false,
    }
}

fn has_seed(rule: &Rule) -> bool {
    match rule {
        Rule::SeededPerturbation { .. } => true,
        Rule::PrefixThenTail { tail, .. } => has_seed(tail),
        _ => false,
    }
}

/// Sets the perturbation radius of every coefficient that is already perturbed.
pub fn set_radius(rule: &mut Rule, r: f64) -> bool {
    match rule {
        Rule::SeededPerturbation { radii, .. } => {
            for x in radii.iter_mut().filter(|x| **x != 0.0) {
                *x = r;
            }
            if radii.iter().all(|x| *x == 0.0) && !radii.is_empty() {
                radii[0] = r;
            }
            true
        }
        Rule::PrefixThenTail { tail, .. } => set_radius(tail, r),
        _ => false,
    }
}
