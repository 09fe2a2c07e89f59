//! TOML run configuration.
//!
//! Every section and key is optional; missing values take the library
//! defaults and unknown keys are rejected. Angles are given in degrees.
//!
//! ```toml
//! seed = 42
//! out_dir = "out"
//! plots = true
//!
//! [links]            # meters
//! d1 = 0.0635
//! d2 = 0.0889
//! d3 = 0.6985
//!
//! [limits]
//! phi_deg = [-25.0, 25.0]
//! theta_deg = [-25.0, 25.0]
//! d_prismatic_m = [0.0, 0.61]
//!
//! [gains]
//! k1 = 5.0
//! k2 = 5.0
//! singularity_guard_deg = 80.0
//!
//! [plant]
//! preset = "perturbed"   # ideal | nominal | perturbed; other keys override it
//! depth_noise_sigma = 0.005
//!
//! [timing]           # seconds
//! localize = 0.3
//! approach = 2.0
//! detach = 1.0
//!
//! [camera]
//! fx = 920.0
//! rotation = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]
//! translation = [-0.3, 0.0889, 0.0635]
//!
//! [sim]
//! dt = 0.001
//! home_deg = [0.0, 0.0]
//! home_d = 0.0
//! log_decimation = 1
//!
//! [batch]
//! n = 60
//! limit_scale = 0.9
//!
//! [compare]
//! repetitions = 5
//! ```

use crate::control::ControllerGains;
use crate::kinematics::{Interval, JointLimits, JointState, LinkParams, DEFAULT_LIMIT_MARGIN};
use crate::perception::{CameraIntrinsics, RigidTransform};
use crate::simulation::{
    PlantModel, PlantPreset, SceneConfig, SimConfig, SimError, SimSettings, TimingBudget,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub phi_deg: [f64; 2],
    pub theta_deg: [f64; 2],
    pub d_prismatic_m: [f64; 2],
    pub margin: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            phi_deg: [-25.0, 25.0],
            theta_deg: [-25.0, 25.0],
            d_prismatic_m: [0.0, 0.61],
            margin: DEFAULT_LIMIT_MARGIN,
        }
    }
}

impl LimitsSection {
    pub fn to_limits(&self) -> JointLimits {
        let deg = |v: [f64; 2]| Interval::new(v[0].to_radians(), v[1].to_radians());
        JointLimits {
            phi: deg(self.phi_deg),
            theta: deg(self.theta_deg),
            d_prismatic: Interval::new(self.d_prismatic_m[0], self.d_prismatic_m[1]),
            margin: self.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsSection {
    pub k1: f64,
    pub k2: f64,
    pub kp_prismatic: f64,
    pub ki_prismatic: f64,
    pub singularity_guard_deg: f64,
    pub prismatic_output_limit: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self {
            k1: g.k1,
            k2: g.k2,
            kp_prismatic: g.kp_prismatic,
            ki_prismatic: g.ki_prismatic,
            singularity_guard_deg: g.singularity_guard.to_degrees(),
            prismatic_output_limit: g.prismatic_output_limit,
        }
    }
}

impl GainsSection {
    pub fn to_gains(&self) -> ControllerGains {
        ControllerGains {
            k1: self.k1,
            k2: self.k2,
            kp_prismatic: self.kp_prismatic,
            ki_prismatic: self.ki_prismatic,
            singularity_guard: self.singularity_guard_deg.to_radians(),
            prismatic_output_limit: self.prismatic_output_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera-to-base rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    /// Camera origin in the base frame, m.
    pub translation: [f64; 3],
}

impl Default for CameraSection {
    fn default() -> Self {
        let k = CameraIntrinsics::default();
        let t = RigidTransform::default();
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            rotation: t.rows(),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl CameraSection {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub settle_max: f64,
    pub settle_tolerance: f64,
    pub success_threshold: f64,
    pub home_deg: [f64; 2],
    pub home_d: f64,
    pub log_decimation: usize,
    pub use_perception: bool,
    pub range_samples: usize,
    pub fruit_radius: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimSettings::default();
        Self {
            dt: s.dt,
            settle_max: s.settle_max,
            settle_tolerance: s.settle_tolerance,
            success_threshold: s.success_threshold,
            home_deg: [s.home.phi.to_degrees(), s.home.theta.to_degrees()],
            home_d: s.home.d_prismatic,
            log_decimation: s.log_decimation,
            use_perception: s.use_perception,
            range_samples: s.range_samples,
            fruit_radius: s.fruit_radius,
        }
    }
}

impl SimSection {
    pub fn to_settings(&self) -> SimSettings {
        SimSettings {
            dt: self.dt,
            settle_max: self.settle_max,
            settle_tolerance: self.settle_tolerance,
            success_threshold: self.success_threshold,
            home: JointState::from_degrees(self.home_deg[0], self.home_deg[1], self.home_d),
            log_decimation: self.log_decimation,
            use_perception: self.use_perception,
            range_samples: self.range_samples,
            fruit_radius: self.fruit_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchSection {
    pub n: usize,
    pub limit_scale: f64,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            n: 60,
            limit_scale: SceneConfig::default().limit_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub repetitions: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { repetitions: 5 }
    }
}

/// Parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub links: LinkParams,
    pub limits: JointLimits,
    pub gains: ControllerGains,
    pub plant_preset: PlantPreset,
    pub plant: PlantModel,
    pub budget: TimingBudget,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: RigidTransform,
    pub settings: SimSettings,
    pub scene: SceneConfig,
    pub batch_n: usize,
    pub repetitions: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    plots: Option<bool>,
    links: Option<LinkParams>,
    limits: LimitsSection,
    gains: GainsSection,
    plant: Option<toml::Table>,
    timing: TimingBudget,
    camera: CameraSection,
    sim: SimSection,
    batch: BatchSection,
    compare: CompareSection,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_toml_str("").expect("defaults are valid")
    }
}

fn preset_from_str(s: &str) -> Result<PlantPreset, ConfigError> {
    match s {
        "ideal" => Ok(PlantPreset::Ideal),
        "nominal" => Ok(PlantPreset::Nominal),
        "perturbed" => Ok(PlantPreset::Perturbed),
        other => Err(ConfigError::Invalid(format!(
            "plant.preset {other:?} is not one of ideal, nominal, perturbed"
        ))),
    }
}

/// Resolve a `[plant]` table: start from the named preset and override it
/// key by key.
fn resolve_plant(table: Option<toml::Table>) -> Result<(PlantPreset, PlantModel), ConfigError> {
    let mut table = table.unwrap_or_default();
    let preset = match table.remove("preset") {
        None => PlantPreset::Perturbed,
        Some(toml::Value::String(s)) => preset_from_str(&s)?,
        Some(v) => {
            return Err(ConfigError::Parse(format!(
                "plant.preset must be a string, got {v}"
            )))
        }
    };
    let base = PlantModel::preset(preset);
    let mut merged = toml::Table::try_from(base).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for (k, v) in table {
        if !merged.contains_key(&k) {
            return Err(ConfigError::Parse(format!("unknown key plant.{k}")));
        }
        merged.insert(k, v);
    }
    let plant: PlantModel = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(format!("[plant]: {}", e.message())))?;
    Ok((preset, plant))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let (plant_preset, plant) = resolve_plant(raw.plant)?;
        let camera = raw.camera;
        let extrinsics = RigidTransform::from_rows(camera.rotation, camera.translation)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = RunConfig {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            plots: raw.plots.unwrap_or(false),
            links: raw.links.unwrap_or_default(),
            limits: raw.limits.to_limits(),
            gains: raw.gains.to_gains(),
            plant_preset,
            plant,
            budget: raw.timing,
            intrinsics: camera.intrinsics(),
            extrinsics,
            settings: raw.sim.to_settings(),
            scene: SceneConfig {
                limit_scale: raw.batch.limit_scale,
            },
            batch_n: raw.batch.n,
            repetitions: raw.compare.repetitions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim_config().validate()?;
        self.scene.validate()?;
        if self.batch_n == 0 {
            return Err(ConfigError::Invalid("batch.n must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(ConfigError::Invalid("compare.repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// Swap in a plant preset, discarding any per-key plant overrides.
    pub fn set_plant_preset(&mut self, preset: PlantPreset) {
        self.plant_preset = preset;
        self.plant = PlantModel::preset(preset);
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            links: self.links,
            limits: self.limits,
            gains: self.gains,
            plant: self.plant,
            budget: self.budget,
            intrinsics: self.intrinsics,
            extrinsics: self.extrinsics,
            settings: self.settings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.links, LinkParams::default());
        assert_eq!(c.limits, JointLimits::default());
        assert_eq!(c.plant, PlantModel::perturbed());
        assert_eq!(c.extrinsics, RigidTransform::default());
        assert_eq!(c.batch_n, 60);
        assert_eq!(c.repetitions, 5);
    }

    #[test]
    fn degrees_are_converted() {
        let c = RunConfig::from_toml_str(
            "[limits]\nphi_deg = [-30.0, 30.0]\n[gains]\nsingularity_guard_deg = 60.0\n",
        )
        .unwrap();
        assert!((c.limits.phi.upper - 30f64.to_radians()).abs() < 1e-15);
        assert!((c.gains.singularity_guard - 60f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn plant_overrides_apply_on_preset() {
        let c = RunConfig::from_toml_str("[plant]\npreset = \"ideal\"\ndepth_noise_sigma = 0.002\n")
            .unwrap();
        assert_eq!(c.plant.encoder_counts_per_rev, 0);
        assert_eq!(c.plant.depth_noise_sigma, 0.002);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "bogus = 1\n",
            "[gains]\nk3 = 1.0\n",
            "[plant]\nwobble = 1.0\n",
            "[camera]\nfx = 900.0\nrotation = [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]\ntranslation = [0.0,0.0,0.0]\nskew = 0.1\n",
        ] {
            assert!(
                matches!(RunConfig::from_toml_str(text), Err(ConfigError::Parse(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "[gains]\nk1 = -1.0\n",
            "[timing]\ndetach = 0.0\n",
            "[plant]\npreset = \"wild\"\n",
            "[sim]\ndt = 0.0\n",
            "[batch]\nn = 0\n",
            "[camera]\nrotation = [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,2.0]]\ntranslation = [0.0,0.0,0.0]\n",
        ] {
            assert!(
                matches!(RunConfig::from_toml_str(text), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
    }
}
