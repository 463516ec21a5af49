//! Run configuration: one TOML file drives simulation, modeling, and
//! evaluation. Unknown keys are rejected so typos fail loudly instead of
//! silently falling back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::forest::ForestParams;
use crate::injector::DEFAULT_LAMBDA_PER_MIN;
use crate::pipeline::PipelineConfig;
use crate::sim::{FaultEffects, SimConfig, Topology, TrafficProfile};
use crate::{Error, Result};

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub duration_s: u64,
    /// Number of CU/DU/UE pairs.
    pub pairs: usize,
    pub platform_metrics_per_container: usize,
    pub infra_metrics: usize,
    pub noise_scale: f64,
    /// Episode-duration rate for the injection schedule, per minute.
    pub lambda_per_min: f64,
    pub effects: EffectsSection,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            // Ten hours: long enough that the default seed's schedule visits
            // all four classes, which a four-hour run does not guarantee.
            duration_s: 36_000,
            pairs: 4,
            platform_metrics_per_container: 24,
            infra_metrics: 40,
            noise_scale: 0.35,
            lambda_per_min: DEFAULT_LAMBDA_PER_MIN,
            effects: EffectsSection::default(),
        }
    }
}

/// Mirror of [`FaultEffects`] so every coefficient is TOML-tunable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectsSection {
    pub cpu_gain: f64,
    pub throttle_threshold: f64,
    pub throttle_bitrate_penalty: f64,
    pub throttle_mcs_drop: f64,
    pub throttle_retrans_gain: f64,
    pub mem_cap: f64,
    pub pressure_threshold: f64,
    pub pressure_bitrate_penalty: f64,
    pub pressure_mcs_drop: f64,
    pub loss_cqi_drop: f64,
    pub loss_sinr_drop: f64,
    pub loss_mcs_drop: f64,
    pub loss_retrans_gain: f64,
    pub loss_container_net_penalty: f64,
    pub loss_jitter: f64,
}

impl Default for EffectsSection {
    fn default() -> Self {
        let e = FaultEffects::default();
        EffectsSection {
            cpu_gain: e.cpu_gain,
            throttle_threshold: e.throttle_threshold,
            throttle_bitrate_penalty: e.throttle_bitrate_penalty,
            throttle_mcs_drop: e.throttle_mcs_drop,
            throttle_retrans_gain: e.throttle_retrans_gain,
            mem_cap: e.mem_cap,
            pressure_threshold: e.pressure_threshold,
            pressure_bitrate_penalty: e.pressure_bitrate_penalty,
            pressure_mcs_drop: e.pressure_mcs_drop,
            loss_cqi_drop: e.loss_cqi_drop,
            loss_sinr_drop: e.loss_sinr_drop,
            loss_mcs_drop: e.loss_mcs_drop,
            loss_retrans_gain: e.loss_retrans_gain,
            loss_container_net_penalty: e.loss_container_net_penalty,
            loss_jitter: e.loss_jitter,
        }
    }
}

impl EffectsSection {
    fn to_effects(&self) -> FaultEffects {
        FaultEffects {
            cpu_gain: self.cpu_gain,
            throttle_threshold: self.throttle_threshold,
            throttle_bitrate_penalty: self.throttle_bitrate_penalty,
            throttle_mcs_drop: self.throttle_mcs_drop,
            throttle_retrans_gain: self.throttle_retrans_gain,
            mem_cap: self.mem_cap,
            pressure_threshold: self.pressure_threshold,
            pressure_bitrate_penalty: self.pressure_bitrate_penalty,
            pressure_mcs_drop: self.pressure_mcs_drop,
            loss_cqi_drop: self.loss_cqi_drop,
            loss_sinr_drop: self.loss_sinr_drop,
            loss_mcs_drop: self.loss_mcs_drop,
            loss_retrans_gain: self.loss_retrans_gain,
            loss_container_net_penalty: self.loss_container_net_penalty,
            loss_jitter: self.loss_jitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    /// Window length in seconds; inputs span k+1 rows.
    pub k: usize,
    /// Forecast horizon in seconds.
    pub m: usize,
    pub stride: usize,
    pub pca_r: usize,
    pub lstm_hidden: usize,
    pub lstm_epochs: usize,
    pub lstm_batch_size: usize,
    pub lstm_learning_rate: f64,
    pub lstm_clip_norm: f64,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_min_samples_split: usize,
    pub adaboost_rounds: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        PipelineSection {
            k: p.k,
            m: p.m,
            stride: p.stride,
            pca_r: p.pca_r,
            lstm_hidden: p.lstm_hidden,
            lstm_epochs: p.lstm_epochs,
            lstm_batch_size: p.lstm_batch_size,
            lstm_learning_rate: p.lstm_learning_rate,
            lstm_clip_norm: p.lstm_clip_norm,
            forest_trees: p.forest.n_trees,
            forest_max_depth: p.forest.max_depth,
            forest_min_samples_split: p.forest.min_samples_split,
            adaboost_rounds: p.adaboost_rounds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    Stratified,
    TimeBlocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub k_folds: usize,
    pub split: SplitKind,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            k_folds: 5,
            split: SplitKind::Stratified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub workdir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            workdir: PathBuf::from("runs"),
        }
    }
}

/// The whole run configuration. Every field has a default, so an empty file
/// is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub simulation: SimulationSection,
    pub pipeline: PipelineSection,
    pub evaluation: EvaluationSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: default_seed(),
            simulation: SimulationSection::default(),
            pipeline: PipelineSection::default(),
            evaluation: EvaluationSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        // An unreadable config file is a configuration error, not a runtime
        // failure; the distinction decides the process exit code.
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.simulation;
        if s.duration_s == 0 {
            return Err(Error::Config("simulation.duration_s must be at least 1".into()));
        }
        if s.pairs == 0 {
            return Err(Error::Config("simulation.pairs must be at least 1".into()));
        }
        if s.platform_metrics_per_container == 0 || s.infra_metrics == 0 {
            return Err(Error::Config(
                "simulation metric counts must be at least 1".into(),
            ));
        }
        if !(s.noise_scale >= 0.0) {
            return Err(Error::Config("simulation.noise_scale must be non-negative".into()));
        }
        if !(s.lambda_per_min > 0.0) {
            return Err(Error::Config("simulation.lambda_per_min must be positive".into()));
        }
        let p = &self.pipeline;
        if p.k == 0 || p.m == 0 || p.stride == 0 {
            return Err(Error::Config("pipeline.k, m, and stride must be positive".into()));
        }
        if p.pca_r == 0 || p.lstm_hidden == 0 {
            return Err(Error::Config(
                "pipeline.pca_r and lstm_hidden must be positive".into(),
            ));
        }
        if p.lstm_epochs == 0 || p.lstm_batch_size == 0 {
            return Err(Error::Config(
                "pipeline.lstm_epochs and lstm_batch_size must be positive".into(),
            ));
        }
        if !(p.lstm_learning_rate > 0.0) || !(p.lstm_clip_norm > 0.0) {
            return Err(Error::Config(
                "pipeline learning rate and clip norm must be positive".into(),
            ));
        }
        if p.forest_trees == 0 || p.forest_max_depth == 0 || p.forest_min_samples_split < 2 {
            return Err(Error::Config(
                "pipeline forest parameters out of range (trees >= 1, depth >= 1, min split >= 2)"
                    .into(),
            ));
        }
        if p.adaboost_rounds == 0 {
            return Err(Error::Config("pipeline.adaboost_rounds must be positive".into()));
        }
        if self.evaluation.k_folds < 2 {
            return Err(Error::Config("evaluation.k_folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.simulation;
        Ok(SimConfig {
            seed: self.seed,
            duration_s: s.duration_s,
            topology: Topology::with_pairs(s.pairs)?,
            platform_metrics_per_container: s.platform_metrics_per_container,
            infra_metrics: s.infra_metrics,
            noise_scale: s.noise_scale,
            effects: s.effects.to_effects(),
        })
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        PipelineConfig {
            k: p.k,
            m: p.m,
            stride: p.stride,
            pca_r: p.pca_r,
            lstm_hidden: p.lstm_hidden,
            lstm_epochs: p.lstm_epochs,
            lstm_batch_size: p.lstm_batch_size,
            lstm_learning_rate: p.lstm_learning_rate,
            lstm_clip_norm: p.lstm_clip_norm,
            forest: ForestParams {
                n_trees: p.forest_trees,
                max_depth: p.forest_max_depth,
                min_samples_split: p.forest_min_samples_split,
                bootstrap: true,
            },
            adaboost_rounds: p.adaboost_rounds,
        }
    }

    pub fn traffic_profile(&self) -> TrafficProfile {
        TrafficProfile::diurnal()
    }

    /// FNV-1a over the canonical TOML rendering; stable across runs of the
    /// same configuration, seed included.
    pub fn hash(&self) -> u64 {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_stock_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.pipeline.k, 60);
        assert_eq!(cfg.pipeline.m, 5);
        assert_eq!(cfg.pipeline.pca_r, 10);
        assert_eq!(cfg.pipeline.lstm_hidden, 32);
        assert_eq!(cfg.evaluation.k_folds, 5);
        assert_eq!(cfg.simulation.pairs, 4);
        assert!((cfg.simulation.lambda_per_min - 1.0 / 45.0).abs() < 1e-15);
        assert!(cfg.simulation.duration_s >= 4 * 3600);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("sead = 7\n").unwrap_err();
        assert!(format!("{err}").contains("sead"), "{err}");
        let err = RunConfig::from_toml_str("[pipeline]\nkk = 60\n").unwrap_err();
        assert!(format!("{err}").contains("kk"), "{err}");
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::from_toml_str(
            "seed = 7\n[simulation]\nduration_s = 600\npairs = 2\n[pipeline]\nlstm_epochs = 3\n[evaluation]\nk_folds = 3\nsplit = \"time-blocked\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.simulation.duration_s, 600);
        assert_eq!(cfg.simulation.pairs, 2);
        assert_eq!(cfg.pipeline.lstm_epochs, 3);
        assert_eq!(cfg.evaluation.split, SplitKind::TimeBlocked);
        // Untouched fields keep defaults.
        assert_eq!(cfg.pipeline.k, 60);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = RunConfig::from_toml_str("[simulation]\nduration_s = 0\n").unwrap_err();
        assert!(format!("{err}").contains("duration_s"));
        let err = RunConfig::from_toml_str("[evaluation]\nk_folds = 1\n").unwrap_err();
        assert!(format!("{err}").contains("k_folds"));
    }

    #[test]
    fn hash_is_stable_and_seed_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::default();
        c.seed = 43;
        assert_ne!(a.hash(), c.hash());
        let mut d = RunConfig::default();
        d.pipeline.k = 61;
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn effects_section_round_trips_to_sim_effects() {
        let cfg = RunConfig::from_toml_str(
            "[simulation.effects]\ncpu_gain = 0.5\nloss_jitter = 1.0\n",
        )
        .unwrap();
        let eff = cfg.sim_config().unwrap().effects;
        assert_eq!(eff.cpu_gain, 0.5);
        assert_eq!(eff.loss_jitter, 1.0);
        // Unset coefficients keep their defaults.
        assert_eq!(eff.throttle_threshold, FaultEffects::default().throttle_threshold);
    }
}
