use serde::{Deserialize, Serialize};

use super::SimTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: [f64; 4],
    pub peak: [f64; 4],
    pub error_energy: f64,
    pub disturbance_energy: f64,
    /// `None` when the disturbance energy is zero.
    pub energy_ratio: Option<f64>,
    pub gamma_bound: Option<f64>,
}

impl Metrics {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma_bound = Some(gamma);
        self
    }

    /// Whether the empirical ratio respects `gamma^2`. Undefined ratios
    /// and missing bounds give `None`.
    pub fn within_bound(&self) -> Option<bool> {
        Some(self.energy_ratio? < self.gamma_bound?.powi(2))
    }
}

fn trapezoid(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    t.windows(2)
        .enumerate()
        .map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(k) + f(k + 1)))
        .sum()
}

pub fn metrics(trace: &SimTrace) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(Error::ParameterDomain("empty trace".into()));
    }
    let n = trace.len() as f64;
    let mut rmse = [0.0; 4];
    let mut peak = [0.0f64; 4];
    for e in &trace.e {
        for i in 0..4 {
            rmse[i] += e[i] * e[i];
            peak[i] = peak[i].max(e[i].abs());
        }
    }
    for r in &mut rmse {
        *r = (*r / n).sqrt();
    }
    let error_energy = trapezoid(&trace.t, |k| trace.e[k].iter().map(|v| v * v).sum());
    let disturbance_energy = trapezoid(&trace.t, |k| trace.w[k] * trace.w[k]);
    let energy_ratio = (disturbance_energy > 0.0).then(|| error_energy / disturbance_energy);
    Ok(Metrics {
        rmse,
        peak,
        error_energy,
        disturbance_energy,
        energy_ratio,
        gamma_bound: None,
    })
}
