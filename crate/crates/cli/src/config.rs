//! Run configuration, stored as TOML.

use std::path::Path;

use hinf_core::model::{DEFAULT_D0, DEFAULT_D1, DEFAULT_DR, DEFAULT_ROAD_DECAY};
use hinf_core::simulator::{DEFAULT_Q_W, DEFAULT_R_DIAG, DEFAULT_SIGMA_W};
use hinf_core::{
    augment, build_plant, kalman_baseline, AugmentParams, AugmentedDelaySystem, DelayProfile,
    KalmanBaseline, RoadProfile, SimConfig, SimMode, SuspensionParams, SynthesisOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub suspension: SuspensionParams,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub kalman: KalmanSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            suspension: SuspensionParams::REFERENCE,
            augment: AugmentSection::default(),
            synthesis: SynthesisSection::default(),
            simulation: SimulationSection::default(),
            kalman: KalmanSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub d_r: f64,
    pub d_0: [f64; 3],
    pub d_1: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub road_decay: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            d_r: DEFAULT_DR,
            d_0: DEFAULT_D0,
            d_1: DEFAULT_D1,
            tau_min: 0.0,
            tau_max: 0.5,
            road_decay: DEFAULT_ROAD_DECAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub gamma: f64,
    /// Strictness margin; the size-scaled default when absent.
    pub epsilon: Option<f64>,
    pub q1_min: f64,
    pub q1_max: f64,
    pub q1_count: usize,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let o = SynthesisOptions::default();
        Self {
            gamma: 0.5,
            epsilon: None,
            q1_min: o.q1_min,
            q1_max: o.q1_max,
            q1_count: o.q1_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadKind {
    /// Bump on [1, 3] s and swell on [4, 8] s.
    BumpAndSwell,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub sigma_w: f64,
    pub mode: SimMode,
    pub road: RoadKind,
    pub delay: DelayProfile,
    pub x0: [f64; 5],
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 10.0,
            seed: 0,
            sigma_w: DEFAULT_SIGMA_W,
            mode: SimMode::Scenario,
            road: RoadKind::BumpAndSwell,
            delay: DelayProfile::Constant { tau: 0.2 },
            x0: [0.0; 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanSection {
    pub q_w: f64,
    pub r_diag: [f64; 3],
}

impl Default for KalmanSection {
    fn default() -> Self {
        Self {
            q_w: DEFAULT_Q_W,
            r_diag: DEFAULT_R_DIAG,
        }
    }
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::parse(origin, e))?;
        cfg.validate().map_err(|e| CliError::parse(origin, e))?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Returns the raw bytes as well,
    /// for hashing.
    pub fn load(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::parse(path, e))?;
        Ok((Self::parse(text, path)?, bytes))
    }

    /// Re-checks every derived object so bad values fail at load time.
    pub fn validate(&self) -> hinf_core::Result<()> {
        let sys = self.system()?;
        self.synthesis_options().q1_grid()?;
        if !(self.synthesis.gamma > 0.0 && self.synthesis.gamma.is_finite()) {
            return Err(hinf_core::Error::ParameterDomain("gamma must be > 0".into()));
        }
        if let Some(eps) = self.synthesis.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(hinf_core::Error::ParameterDomain("epsilon must be > 0".into()));
            }
        }
        self.sim_config(None).validate()?;
        if sys.tau_min > 0.0 && self.simulation.dt > sys.tau_min {
            return Err(hinf_core::Error::ParameterDomain("dt must not exceed tau_min".into()));
        }
        self.kalman()?;
        Ok(())
    }

    pub fn augment_params(&self) -> AugmentParams {
        AugmentParams {
            d_r: self.augment.d_r,
            d_1: self.augment.d_1,
            tau_min: self.augment.tau_min,
            tau_max: self.augment.tau_max,
            road_decay: self.augment.road_decay,
        }
    }

    pub fn system(&self) -> hinf_core::Result<AugmentedDelaySystem> {
        if self.augment.d_0.iter().any(|v| !v.is_finite()) {
            return Err(hinf_core::Error::ParameterDomain("d_0 must be finite".into()));
        }
        let plant = build_plant(&self.suspension)?.with_d0(self.augment.d_0);
        augment(&plant, &self.augment_params())
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            q1_min: self.synthesis.q1_min,
            q1_max: self.synthesis.q1_max,
            q1_count: self.synthesis.q1_count,
            epsilon: self.synthesis.epsilon,
            ..SynthesisOptions::default()
        }
    }

    pub fn sim_config(&self, seed: Option<u64>) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            dt: s.dt,
            horizon: s.horizon,
            seed: seed.unwrap_or(s.seed),
            sigma_w: s.sigma_w,
            mode: s.mode,
            x0: s.x0,
        }
    }

    pub fn road(&self) -> RoadProfile {
        match self.simulation.road {
            RoadKind::BumpAndSwell => RoadProfile::bump_and_swell(),
            RoadKind::Zero => RoadProfile::zero(),
        }
    }

    pub fn kalman(&self) -> hinf_core::Result<KalmanBaseline> {
        let plant = build_plant(&self.suspension)?.with_d0(self.augment.d_0);
        kalman_baseline(&plant, self.kalman.q_w, self.kalman.r_diag)
    }
}
