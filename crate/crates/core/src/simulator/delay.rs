use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-varying delay of the auxiliary channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayProfile {
    Constant {
        tau: f64,
    },
    /// `mean + amplitude * sin(2 pi t / period)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// Gaussian random walk sampled once per step, starting at the middle
    /// of the admissible interval and clipped to it.
    RandomWalk {
        seed: u64,
        step_std: f64,
    },
}

/// A delay profile resolved on a simulation grid.
#[derive(Debug, Clone)]
pub(crate) struct DelaySchedule {
    profile: DelayProfile,
    dt: f64,
    walk: Vec<f64>,
    tau_min: f64,
    tau_max: f64,
}

impl DelaySchedule {
    pub(crate) fn new(
        profile: DelayProfile,
        tau_min: f64,
        tau_max: f64,
        dt: f64,
        steps: usize,
    ) -> Result<Self> {
        let mut walk = Vec::new();
        match profile {
            DelayProfile::Constant { tau } if !tau.is_finite() => {
                return Err(Error::ParameterDomain("constant delay must be finite".into()));
            }
            DelayProfile::Sinusoid { period, .. } if !(period > 0.0) => {
                return Err(Error::ParameterDomain("delay period must be > 0".into()));
            }
            DelayProfile::RandomWalk { seed, step_std } => {
                if !(step_std >= 0.0) {
                    return Err(Error::ParameterDomain("random-walk step_std must be >= 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, step_std)
                    .map_err(|e| Error::ParameterDomain(e.to_string()))?;
                let mut tau = 0.5 * (tau_min + tau_max);
                walk.reserve(steps + 1);
                for _ in 0..=steps {
                    walk.push(tau);
                    tau = (tau + normal.sample(&mut rng)).clamp(tau_min, tau_max);
                }
            }
            _ => {}
        }
        Ok(Self {
            profile,
            dt,
            walk,
            tau_min,
            tau_max,
        })
    }

    /// `tau(t)`, checked against the admissible interval.
    pub(crate) fn at(&self, t: f64) -> Result<f64> {
        let tau = match self.profile {
            DelayProfile::Constant { tau } => tau,
            DelayProfile::Sinusoid {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            DelayProfile::RandomWalk { .. } => {
                let k = ((t / self.dt + 1e-9).floor() as usize).min(self.walk.len() - 1);
                self.walk[k]
            }
        };
        let slack = 1e-12 * self.tau_max.abs().max(1.0);
        if !(tau >= self.tau_min - slack && tau <= self.tau_max + slack) {
            return Err(Error::DelayContract {
                t,
                tau,
                tau_min: self.tau_min,
                tau_max: self.tau_max,
            });
        }
        Ok(tau.clamp(self.tau_min, self.tau_max))
    }
}
