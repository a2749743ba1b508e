//! Quarter-car plant, delay-augmented system and road-profile signals.
//!
//! State ordering is `x = [tire deflection, unsprung velocity, suspension
//! deflection, sprung velocity]`; the augmented state appends the road
//! vertical velocity `rdot`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical quarter-car constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuspensionParams {
    /// Sprung (body) mass [kg].
    pub m_s: f64,
    /// Unsprung (wheel assembly) mass [kg].
    pub m_us: f64,
    /// Suspension stiffness [N/m].
    pub k_s: f64,
    /// Tire stiffness [N/m].
    pub k_us: f64,
    /// Passive damping [N s/m].
    pub c_s: f64,
    /// Scaling of the unknown road disturbance.
    pub alpha: f64,
}

impl SuspensionParams {
    /// Reference passenger-car corner used throughout the examples.
    pub const REFERENCE: SuspensionParams = SuspensionParams {
        m_s: 290.0,
        m_us: 60.0,
        k_s: 16800.0,
        k_us: 19000.0,
        c_s: 200.0,
        alpha: 0.1,
    };

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_s", self.m_s),
            ("m_us", self.m_us),
            ("k_s", self.k_s),
            ("k_us", self.k_us),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ParameterDomain(format!("{name} must be > 0, got {v}")));
            }
        }
        // Zero damping is the undamped limit and stays admissible.
        if !(self.c_s.is_finite() && self.c_s >= 0.0) {
            return Err(Error::ParameterDomain(format!("c_s must be >= 0, got {}", self.c_s)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

impl Default for SuspensionParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Default coupling of `w` into each on-board measurement.
pub const DEFAULT_D0: [f64; 3] = [0.01, 0.01, 0.01];
/// Default coupling of `w` into the delayed road channel.
pub const DEFAULT_D1: f64 = 0.01;
/// Default road-acceleration intensity.
pub const DEFAULT_DR: f64 = 1.0;
/// Default road-velocity pole [rad/s].
pub const DEFAULT_ROAD_DECAY: f64 = 1.0;

/// Linear quarter-car plant `xdot = A x + B u + B_r rdot + B_w w`,
/// `y0 = C0 x + D0 w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub params: SuspensionParams,
    pub a: DMatrix<f64>,
    /// Damper force input. Kept for completeness; the filter assumes `u = 0`.
    pub b: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    pub d0: DMatrix<f64>,
}

impl Plant {
    /// Replaces the measurement-noise coupling `D0`.
    pub fn with_d0(mut self, d0: [f64; 3]) -> Self {
        self.d0 = DMatrix::from_column_slice(3, 1, &d0);
        self
    }
}

pub fn build_plant(params: &SuspensionParams) -> Result<Plant> {
    params.validate()?;
    let SuspensionParams {
        m_s,
        m_us,
        k_s,
        k_us,
        c_s,
        alpha,
    } = *params;

    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0,          1.0,         0.0,         0.0,
        -k_us / m_us, -c_s / m_us, k_s / m_us,  c_s / m_us,
        0.0,          -1.0,        0.0,         1.0,
        0.0,          c_s / m_s,   -k_s / m_s,  -c_s / m_s,
    ]);
    let b = DMatrix::from_column_slice(4, 1, &[0.0, 1.0 / m_us, 0.0, -1.0 / m_s]);
    let b_r = DMatrix::from_column_slice(4, 1, &[-1.0, 0.0, 0.0, 0.0]);
    let b_w = DMatrix::from_column_slice(4, 1, &[-alpha, 0.0, 0.0, 0.0]);
    let mut c0 = DMatrix::zeros(3, 4);
    c0.view_mut((0, 1), (3, 3)).fill_with_identity();
    let d0 = DMatrix::from_column_slice(3, 1, &DEFAULT_D0);

    Ok(Plant {
        params: *params,
        a,
        b,
        b_r,
        b_w,
        c0,
        d0,
    })
}

/// Scalars of the augmentation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Road-acceleration intensity in `rddot = -road_decay rdot + d_r w`.
    pub d_r: f64,
    /// Coupling of `w` into the delayed road measurement.
    pub d_1: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Pole of the road-velocity model [rad/s]. Zero gives a pure
    /// integrator, which leaves the augmented plant marginally stable and
    /// the design inequalities infeasible.
    pub road_decay: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            d_r: DEFAULT_DR,
            d_1: DEFAULT_D1,
            tau_min: 0.0,
            tau_max: 0.5,
            road_decay: DEFAULT_ROAD_DECAY,
        }
    }
}

/// Delay-augmented system
///
/// ```text
/// xa'  = A_a xa + B_a w
/// ya   = C_a0 xa(t) + C_a1 xa(t - tau(t)) + D_a w
/// z    = E_a xa
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDelaySystem {
    pub a_a: DMatrix<f64>,
    pub b_a: DMatrix<f64>,
    pub c_a0: DMatrix<f64>,
    pub c_a1: DMatrix<f64>,
    pub d_a: DMatrix<f64>,
    pub e_a: DMatrix<f64>,
    pub d_r: f64,
    pub d_1: f64,
    pub road_decay: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl AugmentedDelaySystem {
    pub const STATES: usize = 5;
    pub const OUTPUTS: usize = 4;
    pub const OBJECTIVES: usize = 4;
    pub const DISTURBANCES: usize = 1;

    pub fn n(&self) -> usize {
        self.a_a.nrows()
    }

    /// `C_a0 + C_a1`, the measurement map with the delay collapsed.
    pub fn c_sum(&self) -> DMatrix<f64> {
        &self.c_a0 + &self.c_a1
    }

    /// The 4x4 suspension block of `A_a`.
    pub fn plant_a(&self) -> DMatrix<f64> {
        self.a_a.view((0, 0), (4, 4)).into_owned()
    }

    /// Returns a copy with different delay bounds.
    pub fn with_tau_bounds(&self, tau_min: f64, tau_max: f64) -> Result<Self> {
        check_tau(tau_min, tau_max)?;
        let mut out = self.clone();
        out.tau_min = tau_min;
        out.tau_max = tau_max;
        Ok(out)
    }
}

fn check_tau(tau_min: f64, tau_max: f64) -> Result<()> {
    if !(tau_min.is_finite() && tau_max.is_finite()) || tau_min < 0.0 || tau_min > tau_max {
        return Err(Error::ParameterDomain(format!(
            "delay bounds must satisfy 0 <= tau_min <= tau_max, got [{tau_min}, {tau_max}]"
        )));
    }
    Ok(())
}

pub fn augment(plant: &Plant, p: &AugmentParams) -> Result<AugmentedDelaySystem> {
    check_tau(p.tau_min, p.tau_max)?;
    if !(p.d_r.is_finite() && p.d_r >= 0.0) {
        return Err(Error::ParameterDomain(format!("d_r must be >= 0, got {}", p.d_r)));
    }
    if !(p.road_decay.is_finite() && p.road_decay >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "road_decay must be >= 0, got {}",
            p.road_decay
        )));
    }
    if !p.d_1.is_finite() {
        return Err(Error::ParameterDomain("d_1 must be finite".into()));
    }

    let mut a_a = DMatrix::zeros(5, 5);
    a_a.view_mut((0, 0), (4, 4)).copy_from(&plant.a);
    a_a.view_mut((0, 4), (4, 1)).copy_from(&plant.b_r);
    a_a[(4, 4)] = -p.road_decay;

    let mut b_a = DMatrix::zeros(5, 1);
    b_a.view_mut((0, 0), (4, 1)).copy_from(&plant.b_w);
    b_a[(4, 0)] = p.d_r;

    let mut c_a0 = DMatrix::zeros(4, 5);
    c_a0.view_mut((0, 0), (3, 4)).copy_from(&plant.c0);
    let mut c_a1 = DMatrix::zeros(4, 5);
    c_a1[(3, 4)] = 1.0;

    let mut d_a = DMatrix::zeros(4, 1);
    d_a.view_mut((0, 0), (3, 1)).copy_from(&plant.d0);
    d_a[(3, 0)] = p.d_1;

    let mut e_a = DMatrix::zeros(4, 5);
    e_a.view_mut((0, 0), (4, 4)).fill_with_identity();

    Ok(AugmentedDelaySystem {
        a_a,
        b_a,
        c_a0,
        c_a1,
        d_a,
        e_a,
        d_r: p.d_r,
        d_1: p.d_1,
        road_decay: p.road_decay,
        tau_min: p.tau_min,
        tau_max: p.tau_max,
    })
}

/// Reference system: default parameters, default couplings, `tau in [0, 0.5]`.
pub fn reference_system() -> AugmentedDelaySystem {
    let plant = build_plant(&SuspensionParams::REFERENCE).expect("reference parameters are valid");
    augment(&plant, &AugmentParams::default()).expect("reference augmentation is valid")
}

/// Shape of one road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Zero,
    /// `amplitude * sin(omega * t + phase)`, with `t` absolute time.
    Sine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub waveform: Waveform,
}

/// Piecewise closed-form road vertical velocity `rdot_o(t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoadProfile {
    segments: Vec<RoadSegment>,
}

impl RoadProfile {
    pub fn new(mut segments: Vec<RoadSegment>) -> Result<Self> {
        segments.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for s in &segments {
            if !(s.t_start.is_finite() && s.t_end.is_finite()) || s.t_end < s.t_start {
                return Err(Error::ParameterDomain(format!(
                    "road segment [{}, {}] is not a valid interval",
                    s.t_start, s.t_end
                )));
            }
        }
        for w in segments.windows(2) {
            if w[1].t_start < w[0].t_end {
                return Err(Error::ParameterDomain(format!(
                    "road segments [{}, {}] and [{}, {}] overlap",
                    w[0].t_start, w[0].t_end, w[1].t_start, w[1].t_end
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Flat road.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Ten-second test segment: a 0.15 m/s half-period bump on [1, 3] s and
    /// a 0.2 m/s swell on [4, 8] s.
    pub fn bump_and_swell() -> Self {
        use std::f64::consts::PI;
        Self::new(vec![
            RoadSegment {
                t_start: 1.0,
                t_end: 3.0,
                waveform: Waveform::Sine {
                    amplitude: 0.15,
                    omega: PI,
                    phase: -PI,
                },
            },
            RoadSegment {
                t_start: 4.0,
                t_end: 8.0,
                waveform: Waveform::Sine {
                    amplitude: 0.2,
                    omega: PI / 2.0,
                    phase: 0.0,
                },
            },
        ])
        .expect("built-in profile is well formed")
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.segments
    }

    pub fn eval(&self, t: f64) -> f64 {
        for s in &self.segments {
            if t < s.t_start {
                break;
            }
            if t <= s.t_end {
                return match s.waveform {
                    Waveform::Zero => 0.0,
                    Waveform::Sine {
                        amplitude,
                        omega,
                        phase,
                    } => amplitude * (omega * t + phase).sin(),
                };
            }
        }
        0.0
    }
}

/// Evaluates `rdot_o(t)`.
pub fn eval_road(profile: &RoadProfile, t: f64) -> f64 {
    profile.eval(t)
}
