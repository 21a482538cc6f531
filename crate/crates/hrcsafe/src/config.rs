//! Run configuration, read from TOML.
//!
//! Lengths are meters, speeds m/s, angles radians. Every latency is a string
//! with a unit suffix (see [`crate::units`]). `configs/hrcsafe.toml` is a
//! complete annotated example.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::Deserialize;

use hrcsafe_core::attentive::{AttentiveConfig, EnsembleSpec, RegionMode};
use hrcsafe_core::collision::PerceptionProfile;
use hrcsafe_core::geometry::SafetyMargins;
use hrcsafe_core::metrics::{IntegrationConfig, Interval, ParamSpaceC, ParamSpaceD};
use hrcsafe_core::simkit::{
    to_profile, EvalSummary, ScenarioSpec, SyntheticDetectorSpec, TpMode, TrackKind,
};

use crate::units::Duration;
use crate::Error;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub margins: MarginsConfig,
    /// Response latency used by every profile that does not set its own.
    #[serde(default = "default_response")]
    pub response_latency: Duration,
    #[serde(default)]
    pub tp_mode: TpModeConfig,
    #[serde(default)]
    pub profiles: Vec<ProfileConfig>,
    #[serde(default)]
    pub comparisons: Vec<ComparisonConfig>,
    #[serde(default)]
    pub spaces: SpacesConfig,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub heatmap: HeatmapConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub attentive: AttentiveSection,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    pub calibration: Option<CalibrationConfig>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_response() -> Duration {
    Duration(0.1)
}

/// Either both radii or their sum, which is then split evenly.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsConfig {
    pub s_a: Option<f64>,
    pub s_b: Option<f64>,
    pub sum: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpModeConfig {
    #[default]
    Total,
    Inference,
}

impl From<TpModeConfig> for TpMode {
    fn from(m: TpModeConfig) -> Self {
        match m {
            TpModeConfig::Total => TpMode::Total,
            TpModeConfig::Inference => TpMode::Inference,
        }
    }
}

/// A detector described by its reported metrics.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub name: String,
    pub inference: Duration,
    pub total: Duration,
    /// Average recall in percent.
    pub ar: f64,
    pub iou: f64,
    pub response_latency: Option<Duration>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    pub baseline: String,
    pub candidate: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesConfig {
    #[serde(default)]
    pub applicable: ApplicableSpace,
    #[serde(default)]
    pub critical: CriticalSpace,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicableSpace {
    pub alpha: [f64; 2],
    pub r: [f64; 2],
    pub u: [f64; 2],
}

impl Default for ApplicableSpace {
    fn default() -> Self {
        let d = ParamSpaceD::standard();
        Self {
            alpha: [d.alpha.lo, d.alpha.hi],
            r: [d.r.lo, d.r.hi],
            u: [d.u.lo, d.u.hi],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSpace {
    pub u: [f64; 2],
    pub r_lower: f64,
    /// Distance band upper edge is `horizon * u`.
    pub horizon: Duration,
}

impl Default for CriticalSpace {
    fn default() -> Self {
        let c = ParamSpaceC::standard();
        Self {
            u: [c.u.lo, c.u.hi],
            r_lower: c.r_lower,
            horizon: Duration(c.horizon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub method: MethodConfig,
    pub grid: usize,
    pub mc_samples: usize,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            method: MethodConfig::MonteCarlo,
            grid: hrcsafe_core::metrics::DEFAULT_GRID,
            mc_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        hrcsafe_core::metrics::linspace(self.from, self.to, self.points)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub baseline: Option<String>,
    pub candidate: Option<String>,
    pub r: Axis,
    pub u: Axis,
    pub alpha: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            baseline: None,
            candidate: None,
            r: Axis { from: 0.25, to: 1.5, points: 100 },
            u: Axis { from: 0.02, to: 1.0, points: 100 },
            alpha: 0.0,
        }
    }
}

/// Synthetic detector ensemble. Latency grows with the square of the input size.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub sizes: Vec<u32>,
    pub full_latency: Duration,
    /// Recall lost per step down in size.
    pub recall_step: f64,
    /// IoU lost per step down in size.
    pub iou_step: f64,
    pub recall: f64,
    pub iou_mean: f64,
    pub iou_spread: f64,
    pub latency_jitter: Duration,
    pub confidence_noise: f64,
    pub confidence_threshold: f64,
    pub overhead: Duration,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = SyntheticDetectorSpec::e6_like();
        Self {
            sizes: d.ensemble.members().iter().map(|m| m.size).collect(),
            full_latency: Duration(d.ensemble.full().latency),
            recall_step: 0.005,
            iou_step: 0.005,
            recall: d.recall,
            iou_mean: d.iou_mean,
            iou_spread: d.iou_spread,
            latency_jitter: Duration(d.latency_jitter),
            confidence_noise: d.confidence_noise,
            confidence_threshold: d.confidence_threshold,
            overhead: Duration(d.overhead),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionModeConfig {
    Prediction,
    Expansion,
    Hybrid,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentiveSection {
    pub mode: RegionModeConfig,
    pub expansion_rate: f64,
    pub fallback_threshold: u32,
}

impl Default for AttentiveSection {
    fn default() -> Self {
        Self {
            mode: RegionModeConfig::Expansion,
            expansion_rate: 2.0,
            fallback_threshold: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionConfig {
    RandomWalk,
    ConstantVelocity,
    Sinusoidal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub motion: MotionConfig,
    #[serde(default)]
    pub velocity: Option<[f64; 2]>,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    pub frames: usize,
    pub area_ratio: [f64; 2],
    #[serde(default = "default_aspect")]
    pub aspect: [f64; 2],
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Defaults to a value derived from the global seed and the scenario's position.
    pub seed: Option<u64>,
}

fn default_width() -> u32 {
    1280
}
fn default_height() -> u32 {
    720
}
fn default_aspect() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_max_step() -> f64 {
    0.1
}
fn default_fps() -> f64 {
    30.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub search: [f64; 2],
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub targets: Vec<TargetConfig>,
}

fn default_steps() -> usize {
    40
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub profile: String,
    pub ccp: Option<f64>,
    pub acp: Option<f64>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub mc_samples: Option<usize>,
    pub grid: Option<usize>,
    pub tp_mode: Option<TpModeConfig>,
}

impl Overrides {
    /// Canonical text of the overrides that change results. The seed is
    /// reported on its own and the output directory does not affect content.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        if let Some(n) = self.mc_samples {
            s.push_str(&format!("mc_samples={n}\n"));
        }
        if let Some(n) = self.grid {
            s.push_str(&format!("grid={n}\n"));
        }
        if let Some(m) = self.tp_mode {
            s.push_str(&format!("tp_mode={m:?}\n"));
        }
        s
    }
}

fn field(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn interval(name: &str, v: [f64; 2]) -> Result<Interval, Error> {
    Interval::new(v[0], v[1]).map_err(|e| field(name, e.to_string()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(n) = o.mc_samples {
            self.integration.method = MethodConfig::MonteCarlo;
            self.integration.mc_samples = n;
        }
        if let Some(n) = o.grid {
            self.integration.method = MethodConfig::Grid;
            self.integration.grid = n;
        }
        if let Some(m) = o.tp_mode {
            self.tp_mode = m;
        }
    }

    /// Checks everything that does not depend on running a command.
    pub fn validate(&self) -> Result<(), Error> {
        self.margins()?;
        let mut names = BTreeSet::new();
        for (i, p) in self.profiles.iter().enumerate() {
            if !names.insert(p.name.as_str()) {
                return Err(field(format!("profiles[{i}].name"), format!("duplicate profile `{}`", p.name)));
            }
            self.profile(&p.name)?;
        }
        for (i, c) in self.comparisons.iter().enumerate() {
            for (which, name) in [("baseline", &c.baseline), ("candidate", &c.candidate)] {
                if !names.contains(name.as_str()) {
                    return Err(field(format!("comparisons[{i}].{which}"), format!("unknown profile `{name}`")));
                }
            }
        }
        for (which, name) in [("baseline", &self.heatmap.baseline), ("candidate", &self.heatmap.candidate)] {
            if let Some(name) = name {
                if !names.contains(name.as_str()) {
                    return Err(field(format!("heatmap.{which}"), format!("unknown profile `{name}`")));
                }
            }
        }
        for (axis, a) in [("heatmap.r", self.heatmap.r), ("heatmap.u", self.heatmap.u)] {
            if a.points == 0 || !(a.from <= a.to) || a.from < 0.0 {
                return Err(field(axis, "axis needs 0 <= from <= to and at least one point"));
            }
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&self.heatmap.alpha) {
            return Err(field("heatmap.alpha", "heading must lie within [-pi, pi]"));
        }
        self.space_c()?;
        self.space_d()?;
        self.integration()?;
        self.detector()?;
        self.attentive()?;
        let mut scenario_names = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            if !scenario_names.insert(s.name.as_str()) {
                return Err(field(format!("scenarios[{i}].name"), format!("duplicate scenario `{}`", s.name)));
            }
            self.scenario(i)?;
        }
        if let Some(cal) = &self.calibration {
            interval("calibration.search", cal.search)?;
            if cal.targets.is_empty() {
                return Err(field("calibration.targets", "at least one target is required"));
            }
            for (i, t) in cal.targets.iter().enumerate() {
                if !names.contains(t.profile.as_str()) {
                    return Err(field(format!("calibration.targets[{i}].profile"), format!("unknown profile `{}`", t.profile)));
                }
                if t.ccp.is_none() && t.acp.is_none() {
                    return Err(field(format!("calibration.targets[{i}]"), "set ccp, acp or both"));
                }
            }
        }
        Ok(())
    }

    pub fn margins(&self) -> Result<SafetyMargins, Error> {
        let m = self.margins;
        let r = match (m.s_a, m.s_b, m.sum) {
            (Some(a), Some(b), None) => SafetyMargins::new(a, b),
            (None, None, Some(s)) => SafetyMargins::split_even(s),
            _ => return Err(field("margins", "set either `s_a` and `s_b`, or `sum`")),
        };
        r.map_err(|e| field("margins", e.to_string()))
    }

    pub fn profile_config(&self, name: &str) -> Result<&ProfileConfig, Error> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| field("profiles", format!("unknown profile `{name}`")))
    }

    /// Perception profile built from the reported metrics of `name`.
    pub fn profile(&self, name: &str) -> Result<PerceptionProfile, Error> {
        let (i, p) = self
            .profiles
            .iter()
            .enumerate()
            .find(|(_, p)| p.name == name)
            .ok_or_else(|| field("profiles", format!("unknown profile `{name}`")))?;
        if p.total < p.inference {
            return Err(field(format!("profiles[{i}].total"), "total time is shorter than inference time"));
        }
        let summary = EvalSummary::from_reported(p.inference.millis(), p.total.millis(), p.ar, p.iou);
        let t_r = p.response_latency.unwrap_or(self.response_latency).secs();
        to_profile(&summary, t_r, self.tp_mode.into()).map_err(|e| field(format!("profiles[{i}]"), e.to_string()))
    }

    pub fn space_c(&self) -> Result<ParamSpaceC, Error> {
        let c = self.spaces.critical;
        let space = ParamSpaceC {
            u: interval("spaces.critical.u", c.u)?,
            r_lower: c.r_lower,
            horizon: c.horizon.secs(),
            t_r: None,
        };
        space.validate().map_err(|e| field("spaces.critical", e.to_string()))?;
        Ok(space)
    }

    pub fn space_d(&self) -> Result<ParamSpaceD, Error> {
        let d = self.spaces.applicable;
        let space = ParamSpaceD {
            alpha: interval("spaces.applicable.alpha", d.alpha)?,
            r: interval("spaces.applicable.r", d.r)?,
            u: interval("spaces.applicable.u", d.u)?,
            t_r: None,
        };
        space.validate().map_err(|e| field("spaces.applicable", e.to_string()))?;
        Ok(space)
    }

    pub fn integration(&self) -> Result<IntegrationConfig, Error> {
        let s = self.integration;
        let cfg = match s.method {
            MethodConfig::Grid => IntegrationConfig::grid(s.grid),
            MethodConfig::MonteCarlo => IntegrationConfig::monte_carlo(s.mc_samples, self.seed),
        };
        cfg.validate().map_err(|e| field("integration", e.to_string()))?;
        Ok(cfg)
    }

    pub fn detector(&self) -> Result<SyntheticDetectorSpec, Error> {
        let d = &self.detector;
        let ensemble = EnsembleSpec::quadratic(&d.sizes, d.full_latency.secs(), d.recall_step, d.iou_step)
            .map_err(|e| field("detector.sizes", e.to_string()))?;
        let spec = SyntheticDetectorSpec {
            ensemble,
            recall: d.recall,
            iou_mean: d.iou_mean,
            iou_spread: d.iou_spread,
            latency_jitter: d.latency_jitter.secs(),
            confidence_noise: d.confidence_noise,
            confidence_threshold: d.confidence_threshold,
            overhead: d.overhead.secs(),
        };
        spec.validate().map_err(|e| field("detector", e.to_string()))?;
        Ok(spec)
    }

    pub fn attentive(&self) -> Result<AttentiveConfig, Error> {
        let a = self.attentive;
        let cfg = AttentiveConfig {
            mode: match a.mode {
                RegionModeConfig::Prediction => RegionMode::Prediction,
                RegionModeConfig::Expansion => RegionMode::Expansion,
                RegionModeConfig::Hybrid => RegionMode::Hybrid,
            },
            expansion_rate: a.expansion_rate,
            fallback_threshold: a.fallback_threshold,
            overhead: 0.0,
        };
        cfg.validate().map_err(|e| field("attentive", e.to_string()))?;
        Ok(cfg)
    }

    pub fn scenario(&self, i: usize) -> Result<ScenarioSpec, Error> {
        let s = &self.scenarios[i];
        let path = |f: &str| format!("scenarios[{i}].{f}");
        let kind = match s.motion {
            MotionConfig::RandomWalk => TrackKind::RandomWalk,
            MotionConfig::ConstantVelocity => {
                let [vx, vy] = s
                    .velocity
                    .ok_or_else(|| field(path("velocity"), "constant-velocity motion needs `velocity`"))?;
                TrackKind::ConstantVelocity { vx, vy }
            }
            MotionConfig::Sinusoidal => TrackKind::Sinusoidal {
                period: s
                    .period
                    .ok_or_else(|| field(path("period"), "sinusoidal motion needs `period`"))?,
            },
        };
        if s.frames == 0 {
            return Err(field(path("frames"), "a scenario needs at least one frame"));
        }
        let ratio_ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1];
        if !ratio_ok(s.area_ratio) || s.area_ratio[1] > 1.0 {
            return Err(field(path("area_ratio"), "need 0 < lo <= hi <= 1"));
        }
        if !ratio_ok(s.aspect) {
            return Err(field(path("aspect"), "need 0 < lo <= hi"));
        }
        Ok(ScenarioSpec {
            kind,
            width: s.width,
            height: s.height,
            length: s.frames,
            area_ratio: (s.area_ratio[0], s.area_ratio[1]),
            aspect: (s.aspect[0], s.aspect[1]),
            max_step: s.max_step,
            fps: s.fps,
            seed: s.seed.unwrap_or_else(|| crate::derive_seed(self.seed, i as u64, 0)),
        })
    }
}
