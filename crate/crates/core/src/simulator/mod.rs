//! Fixed-step simulation of the augmented plant, the delayed road channel
//! and a filter, plus the Kalman baseline and trace statistics.

mod delay;
mod kalman;
mod metrics;

use std::collections::VecDeque;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AugmentedDelaySystem, RoadProfile};
use crate::synthesis::FilterGains;

pub use delay::DelayProfile;
pub use kalman::{care, kalman_baseline, KalmanBaseline, DEFAULT_Q_W, DEFAULT_R_DIAG};
pub use metrics::{metrics, Metrics};

use delay::DelaySchedule;

type V4 = SVector<f64, 4>;
type V5 = SVector<f64, 5>;

/// How the road velocity state is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// The road obeys the filter's own model `rddot = -decay * rdot + D_r w`.
    ModelConsistent,
    /// The road velocity is the prescribed profile.
    Scenario,
}

pub const DEFAULT_SIGMA_W: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Intensity of the shared white disturbance.
    pub sigma_w: f64,
    pub mode: SimMode,
    /// Initial augmented state. In scenario mode the road entry is replaced
    /// by the profile value at `t = 0`.
    pub x0: [f64; 5],
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 10.0,
            seed: 0,
            sigma_w: DEFAULT_SIGMA_W,
            mode: SimMode::Scenario,
            x0: [0.0; 5],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterDomain(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "horizon must be >= dt, got {}",
                self.horizon
            )));
        }
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "sigma_w must be >= 0, got {}",
                self.sigma_w
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("initial state must be finite".into()));
        }
        Ok(())
    }

    /// Number of integration steps; the grid has one more point.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil() as usize
    }
}

/// Gridded simulation output. Row `k` holds the values at `t[k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub x_a: Vec<[f64; 5]>,
    pub x_hat: Vec<[f64; 5]>,
    pub y_a: Vec<[f64; 4]>,
    pub e: Vec<[f64; 4]>,
    pub w: Vec<f64>,
    pub tau: Vec<f64>,
    pub rdot: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

trait Estimator {
    fn rate(&self, x_hat: &V5, y: &V4) -> V5;
    fn estimate(&self, x_hat: &V5) -> V4;
    fn initial(&self, x_a0: &V5) -> V5;
}

struct HinfFilter {
    k_a: SMatrix<f64, 5, 5>,
    k_b: SMatrix<f64, 5, 4>,
    k_c: SMatrix<f64, 4, 5>,
}

impl Estimator for HinfFilter {
    fn rate(&self, x_hat: &V5, y: &V4) -> V5 {
        self.k_a * x_hat + self.k_b * y
    }

    fn estimate(&self, x_hat: &V5) -> V4 {
        self.k_c * x_hat
    }

    fn initial(&self, x_a0: &V5) -> V5 {
        *x_a0
    }
}

struct KalmanObserver {
    a: SMatrix<f64, 4, 4>,
    l: SMatrix<f64, 4, 3>,
    c0: SMatrix<f64, 3, 4>,
}

impl Estimator for KalmanObserver {
    fn rate(&self, x_hat: &V5, y: &V4) -> V5 {
        let xh: V4 = x_hat.fixed_rows::<4>(0).into_owned();
        let y0 = y.fixed_rows::<3>(0).into_owned();
        let d = self.a * xh + self.l * (y0 - self.c0 * xh);
        V5::new(d[0], d[1], d[2], d[3], 0.0)
    }

    fn estimate(&self, x_hat: &V5) -> V4 {
        x_hat.fixed_rows::<4>(0).into_owned()
    }

    fn initial(&self, x_a0: &V5) -> V5 {
        V5::new(x_a0[0], x_a0[1], x_a0[2], x_a0[3], 0.0)
    }
}

fn fixed<const R: usize, const C: usize>(m: &nalgebra::DMatrix<f64>, what: &str) -> Result<SMatrix<f64, R, C>> {
    if m.shape() != (R, C) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {R}x{C}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(SMatrix::<f64, R, C>::from_iterator(m.iter().copied()))
}

/// Simulates the plant together with the H-infinity filter.
pub fn simulate(
    sys: &AugmentedDelaySystem,
    gains: &FilterGains,
    road: &RoadProfile,
    delay: DelayProfile,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    gains.check_dims(5, 4, 4)?;
    let filter = HinfFilter {
        k_a: fixed(&gains.k_a, "K_A")?,
        k_b: fixed(&gains.k_b, "K_B")?,
        k_c: fixed(&gains.k_c, "K_C")?,
    };
    run(sys, &filter, road, delay, cfg)
}

/// Simulates the same plant, noise and delay channel with the Kalman
/// observer, which uses only the on-board measurements.
pub fn simulate_kalman(
    sys: &AugmentedDelaySystem,
    baseline: &KalmanBaseline,
    road: &RoadProfile,
    delay: DelayProfile,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    let observer = KalmanObserver {
        a: fixed(&baseline.a, "A")?,
        l: fixed(&baseline.l, "L")?,
        c0: fixed(&baseline.c0, "C0")?,
    };
    run(sys, &observer, road, delay, cfg)
}

/// Sliding history of the road-velocity state on the grid.
struct DelayLine {
    dt: f64,
    first: usize,
    buf: VecDeque<f64>,
    capacity: usize,
}

impl DelayLine {
    fn new(dt: f64, tau_max: f64) -> Self {
        let capacity = (tau_max / dt).ceil() as usize + 3;
        Self {
            dt,
            first: 0,
            buf: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    fn push(&mut self, r: f64) {
        self.buf.push_back(r);
        if self.buf.len() > self.capacity {
            self.buf.pop_front();
            self.first += 1;
        }
    }

    fn sample(&self, k: usize) -> Result<f64> {
        k.checked_sub(self.first)
            .and_then(|i| self.buf.get(i).copied())
            .ok_or_else(|| Error::InternalConsistency(format!("history sample {k} not retained")))
    }

    /// Value at `q`, where the newest stored sample is grid point `n` and
    /// `(s, r_s)` is the in-step stage value with `s >= t_n`.
    fn read(&self, q: f64, n: usize, s: f64, r_s: f64) -> Result<f64> {
        let mut idx = q / self.dt;
        let nearest = idx.round();
        if (idx - nearest).abs() < 1e-9 {
            idx = nearest;
        }
        if idx < 0.0 {
            return Ok(0.0);
        }
        let r_n = self.sample(n)?;
        let t_n = n as f64 * self.dt;
        if idx >= n as f64 {
            if idx == n as f64 || s <= t_n {
                return Ok(r_n);
            }
            let theta = ((q - t_n) / (s - t_n)).clamp(0.0, 1.0);
            return Ok(r_n + theta * (r_s - r_n));
        }
        let k = idx.floor() as usize;
        let theta = idx - k as f64;
        let r_k = self.sample(k)?;
        if theta == 0.0 {
            return Ok(r_k);
        }
        Ok(r_k + theta * (self.sample(k + 1)? - r_k))
    }
}

struct Channel<'a> {
    road: &'a RoadProfile,
    mode: SimMode,
    schedule: DelaySchedule,
    history: DelayLine,
    a_a: SMatrix<f64, 5, 5>,
    b_a: V5,
    c_a0: SMatrix<f64, 4, 5>,
    c_a1: V4,
    d_a: V4,
    e_a: SMatrix<f64, 4, 5>,
}

impl Channel<'_> {
    fn road_at(&self, s: f64, x_a: &V5) -> f64 {
        match self.mode {
            SimMode::Scenario => self.road.eval(s),
            SimMode::ModelConsistent => x_a[4],
        }
    }

    fn measure(&self, s: f64, n: usize, x_a: &V5, w: f64) -> Result<(V4, f64)> {
        let tau = self.schedule.at(s)?;
        let q = s - tau;
        let delayed = match self.mode {
            SimMode::Scenario => {
                if q < 0.0 {
                    0.0
                } else {
                    self.road.eval(q)
                }
            }
            SimMode::ModelConsistent => self.history.read(q, n, s, x_a[4])?,
        };
        Ok((self.c_a0 * x_a + self.c_a1 * delayed + self.d_a * w, tau))
    }

    fn plant_rate(&self, x_a: &V5, w: f64) -> V5 {
        let mut d = self.a_a * x_a + self.b_a * w;
        if self.mode == SimMode::Scenario {
            d[4] = 0.0;
        }
        d
    }
}

fn run(
    sys: &AugmentedDelaySystem,
    est: &dyn Estimator,
    road: &RoadProfile,
    delay: DelayProfile,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate()?;
    if sys.tau_min > 0.0 && cfg.dt > sys.tau_min {
        return Err(Error::ParameterDomain(format!(
            "dt {} exceeds tau_min {}",
            cfg.dt, sys.tau_min
        )));
    }
    // The delayed channel reads only the road column of C_a1.
    let c_a1 = fixed::<4, 5>(&sys.c_a1, "C_a1")?;
    if c_a1.fixed_columns::<4>(0).iter().any(|v| *v != 0.0) {
        return Err(Error::Dimension("C_a1 may only act on the road state".into()));
    }
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut ch = Channel {
        road,
        mode: cfg.mode,
        schedule: DelaySchedule::new(delay, sys.tau_min, sys.tau_max, dt, steps)?,
        history: DelayLine::new(dt, sys.tau_max),
        a_a: fixed(&sys.a_a, "A_a")?,
        b_a: fixed::<5, 1>(&sys.b_a, "B_a")?,
        c_a0: fixed(&sys.c_a0, "C_a0")?,
        c_a1: c_a1.column(4).into_owned(),
        d_a: fixed::<4, 1>(&sys.d_a, "D_a")?,
        e_a: fixed(&sys.e_a, "E_a")?,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = cfg.sigma_w / dt.sqrt();
    let w: Vec<f64> = (0..=steps)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if cfg.sigma_w == 0.0 {
                0.0
            } else {
                scale * z
            }
        })
        .collect();

    let mut x_a = V5::from_row_slice(&cfg.x0);
    if cfg.mode == SimMode::Scenario {
        x_a[4] = road.eval(0.0);
    }
    let mut x_h = est.initial(&x_a);

    let mut trace = SimTrace::default();
    let cap = steps + 1;
    trace.t.reserve(cap);
    trace.x_a.reserve(cap);
    trace.x_hat.reserve(cap);
    trace.y_a.reserve(cap);
    trace.e.reserve(cap);
    trace.w.reserve(cap);
    trace.tau.reserve(cap);
    trace.rdot.reserve(cap);

    ch.history.push(x_a[4]);
    for n in 0..=steps {
        let t_n = n as f64 * dt;
        let w_n = w[n];
        let (y_n, tau_n) = ch.measure(t_n, n, &x_a, w_n)?;
        let z_hat = est.estimate(&x_h);
        let e_n = ch.e_a * x_a - z_hat;
        trace.t.push(t_n);
        trace.x_a.push(x_a.into());
        trace.x_hat.push(x_h.into());
        trace.y_a.push(y_n.into());
        trace.e.push(e_n.into());
        trace.w.push(w_n);
        trace.tau.push(tau_n);
        trace.rdot.push(x_a[4]);
        if n == steps {
            break;
        }

        // Classical RK4 on the joint plant/filter state, w held over the step.
        let stage = |s: f64, xa: &V5, xh: &V5, ch: &Channel| -> Result<(V5, V5)> {
            let mut xa = *xa;
            if ch.mode == SimMode::Scenario {
                xa[4] = ch.road_at(s, &xa);
            }
            let (y, _) = ch.measure(s, n, &xa, w_n)?;
            Ok((ch.plant_rate(&xa, w_n), est.rate(xh, &y)))
        };
        let h = dt;
        let (k1a, k1h) = (ch.plant_rate(&x_a, w_n), est.rate(&x_h, &y_n));
        let (k2a, k2h) = stage(t_n + 0.5 * h, &(x_a + k1a * (0.5 * h)), &(x_h + k1h * (0.5 * h)), &ch)?;
        let (k3a, k3h) = stage(t_n + 0.5 * h, &(x_a + k2a * (0.5 * h)), &(x_h + k2h * (0.5 * h)), &ch)?;
        let (k4a, k4h) = stage(t_n + h, &(x_a + k3a * h), &(x_h + k3h * h), &ch)?;
        x_a += (k1a + (k2a + k3a) * 2.0 + k4a) * (h / 6.0);
        x_h += (k1h + (k2h + k3h) * 2.0 + k4h) * (h / 6.0);
        if ch.mode == SimMode::Scenario {
            x_a[4] = road.eval((n + 1) as f64 * dt);
        }
        ch.history.push(x_a[4]);
    }
    Ok(trace)
}
