//! Filter synthesis: solve the linearized inequalities, factor `I - XY`,
//! recover the gains and the analysis certificate, then re-certify the
//! recovered gains against the full analysis inequality.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lmi::{self, LmiProblem, VariableValues};
use crate::model::AugmentedDelaySystem;
use crate::solver::{self, SdpCertificate, SolverOptions};

/// Full-order LTI filter `xhat' = K_A xhat + K_B ya`, `zhat = K_C xhat`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterGains {
    pub k_a: DMatrix<f64>,
    pub k_b: DMatrix<f64>,
    pub k_c: DMatrix<f64>,
}

impl FilterGains {
    pub fn zeros(n: usize, ny: usize, nz: usize) -> Self {
        Self {
            k_a: DMatrix::zeros(n, n),
            k_b: DMatrix::zeros(n, ny),
            k_c: DMatrix::zeros(nz, n),
        }
    }

    pub fn check_dims(&self, n: usize, ny: usize, nz: usize) -> Result<()> {
        if self.k_a.shape() != (n, n) || self.k_b.shape() != (n, ny) || self.k_c.shape() != (nz, n)
        {
            return Err(Error::Dimension(format!(
                "gains must be K_A {n}x{n}, K_B {n}x{ny}, K_C {nz}x{n}; got {:?}, {:?}, {:?}",
                self.k_a.shape(),
                self.k_b.shape(),
                self.k_c.shape()
            )));
        }
        if self
            .k_a
            .iter()
            .chain(self.k_b.iter())
            .chain(self.k_c.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::ParameterDomain("gains contain non-finite entries".into()));
        }
        Ok(())
    }
}

/// Output of [`recover_gains`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub gains: FilterGains,
    /// Lyapunov matrix with `P Phi1 = Phi2`, symmetrized.
    pub p: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

/// Relative singular-value floor below which `I - XY` counts as singular.
pub const DEGENERACY_RATIO: f64 = 1e-10;

/// `Phi1 = [[X, I], [M^T, 0]]`.
pub fn phi1(x: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.nrows();
    linalg::block(&[
        &[x, &DMatrix::identity(k, k)],
        &[&m.transpose(), &DMatrix::zeros(k, k)],
    ])
}

/// `Phi2 = [[I, Y], [0, N^T]]`.
pub fn phi2(y: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let k = y.nrows();
    linalg::block(&[
        &[&DMatrix::identity(k, k), y],
        &[&DMatrix::zeros(k, k), &n.transpose()],
    ])
}

/// Recovers `(K_A, K_B, K_C)` and `P` from a solution of the linearized
/// inequalities.
///
/// `I - XY = U S V^T` is split symmetrically, `M = U S^1/2`, `N = V S^1/2`,
/// so that `M N^T = I - XY`. A singular `I - XY` is reported, never
/// regularized; re-solving with `X + 1e-6 I` is the usual remedy.
pub fn recover_gains(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a_s: &DMatrix<f64>,
    b_s: &DMatrix<f64>,
    c_s: &DMatrix<f64>,
    sys: &AugmentedDelaySystem,
) -> Result<Recovery> {
    let k = sys.n();
    if x.shape() != (k, k) || y.shape() != (k, k) || a_s.shape() != (k, k) {
        return Err(Error::Dimension("X, Y and A_s must be n x n".into()));
    }
    if b_s.shape() != (k, sys.c_a0.nrows()) || c_s.shape() != (sys.e_a.nrows(), k) {
        return Err(Error::Dimension("B_s or C_s has the wrong shape".into()));
    }

    let ixy = DMatrix::identity(k, k) - x * y;
    let svd = ixy.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::NumericalFailure("SVD without U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD without V".into()))?;
    let sigma = &svd.singular_values;
    let s_max = sigma.max();
    let s_min = sigma.min();
    if !(s_max > 0.0) || s_min < DEGENERACY_RATIO * s_max {
        return Err(Error::FactorizationDegenerate(format!(
            "I - XY has singular values in [{s_min:e}, {s_max:e}]"
        )));
    }
    let root = DMatrix::from_diagonal(&sigma.map(f64::sqrt));
    let root_inv = DMatrix::from_diagonal(&sigma.map(|s| 1.0 / s.sqrt()));
    let m = &u * &root;
    let n = v_t.transpose() * &root;
    // N^-1 = S^-1/2 V^T and (M^T)^-1 = U S^-1/2.
    let n_inv = &root_inv * &v_t;
    let mt_inv = &u * &root_inv;

    let k_b = &n_inv * b_s;
    let k_c = c_s * &mt_inv;
    let k_a = &n_inv * (a_s - y * &sys.a_a * x - b_s * sys.c_sum() * x) * &mt_inv;

    let f1 = phi1(x, &m);
    let f2 = phi2(y, &n);
    // P Phi1 = Phi2  <=>  Phi1^T P^T = Phi2^T.
    let p_t = f1
        .transpose()
        .lu()
        .solve(&f2.transpose())
        .ok_or_else(|| Error::FactorizationDegenerate("Phi1 is singular".into()))?;
    if p_t.iter().any(|v| !v.is_finite()) {
        return Err(Error::FactorizationDegenerate("Phi1 is singular".into()));
    }
    let p = linalg::symmetrize(&p_t.transpose());

    Ok(Recovery {
        gains: FilterGains { k_a, k_b, k_c },
        p,
        m,
        n,
    })
}

/// Rebuilds `(A_s, B_s, C_s)` from gains and factors:
/// `A_s = Y A_a X + N K_B (C_a0 + C_a1) X + N K_A M^T`, `B_s = N K_B`,
/// `C_s = K_C M^T`.
pub fn change_of_variables(
    gains: &FilterGains,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    sys: &AugmentedDelaySystem,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a_s = y * &sys.a_a * x + n * &gains.k_b * sys.c_sum() * x + n * &gains.k_a * m.transpose();
    let b_s = n * &gains.k_b;
    let c_s = &gains.k_c * m.transpose();
    (a_s, b_s, c_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub solver: SolverOptions,
    pub q1_min: f64,
    pub q1_max: f64,
    pub q1_count: usize,
    /// Overrides the default strictness margin of every assembled problem.
    pub epsilon: Option<f64>,
    /// Upper limit for the doubling search in [`minimize_gamma`].
    pub gamma_cap: f64,
    /// Relative bracket width at which [`minimize_gamma`] stops.
    pub gamma_rel_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            q1_min: 1e-3,
            q1_max: 1e3,
            q1_count: 13,
            epsilon: None,
            gamma_cap: 1048576.0,
            gamma_rel_tol: 1e-2,
        }
    }
}

impl SynthesisOptions {
    /// Log-spaced `q1` values ordered by distance from 1 in log scale;
    /// ties go to the smaller value.
    pub fn q1_grid(&self) -> Result<Vec<f64>> {
        if !(self.q1_min > 0.0 && self.q1_max >= self.q1_min) || self.q1_count == 0 {
            return Err(Error::ParameterDomain(format!(
                "invalid q1 grid [{}, {}] x {}",
                self.q1_min, self.q1_max, self.q1_count
            )));
        }
        let (lo, hi) = (self.q1_min.log10(), self.q1_max.log10());
        let mut exps: Vec<f64> = (0..self.q1_count)
            .map(|i| {
                if self.q1_count == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (self.q1_count - 1) as f64
                }
            })
            .collect();
        exps.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        Ok(exps.into_iter().map(|e| 10f64.powf(e)).collect())
    }

    fn apply_epsilon(&self, problem: &mut LmiProblem) {
        if let Some(eps) = self.epsilon {
            problem.epsilon = eps;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub gains: FilterGains,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub script_a: DMatrix<f64>,
    pub script_b: DMatrix<f64>,
    pub script_c: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// Lyapunov matrix recovered from `P Phi1 = Phi2`.
    pub p: DMatrix<f64>,
    /// `Q2` from the linearized problem.
    pub q2_synthesis: DMatrix<f64>,
    pub q1_selected: f64,
    pub gamma: f64,
    pub tau_max: f64,
    pub synthesis_margin: f64,
    /// Analysis certificate `(P, Q1, Q2)` found for the recovered gains.
    pub certificate: VariableValues,
    pub certification_margin: f64,
    /// Newton steps spent on the selected synthesis and certification solves.
    pub iterations: usize,
}

impl SynthesisResult {
    /// The analysis problem that `certificate` satisfies.
    pub fn analysis_problem(&self, sys: &AugmentedDelaySystem) -> Result<LmiProblem> {
        lmi::assemble_verification_lmi(sys, &self.gains, self.gamma, self.tau_max)
    }
}

/// Outcome of the analysis inequality for fixed gains.
pub fn verify_gains(
    sys: &AugmentedDelaySystem,
    gains: &FilterGains,
    gamma: f64,
    tau_max: f64,
    opts: &SynthesisOptions,
) -> Result<(LmiProblem, SdpCertificate)> {
    let mut problem = lmi::assemble_verification_lmi(sys, gains, gamma, tau_max)?;
    opts.apply_epsilon(&mut problem);
    let cert = solver::solve_feasibility(&problem, &opts.solver)?;
    Ok((problem, cert))
}

/// Designs a filter achieving attenuation `gamma` for delays up to
/// `sys.tau_max`.
pub fn synthesize(
    sys: &AugmentedDelaySystem,
    gamma: f64,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::ParameterDomain(format!("gamma must be > 0, got {gamma}")));
    }
    let tau_max = sys.tau_max;
    let mut margins = Vec::new();
    let mut best_certification: Option<f64> = None;

    for q1 in opts.q1_grid()? {
        let mut problem = lmi::assemble_synthesis_lmi(sys, gamma, tau_max, q1)?;
        opts.apply_epsilon(&mut problem);
        let cert = solver::solve_feasibility(&problem, &opts.solver)?;
        margins.push((q1, cert.margin));
        if !cert.is_feasible() {
            continue;
        }
        let v = &cert.values;
        let rec = recover_gains(&v["X"], &v["Y"], &v["A_s"], &v["B_s"], &v["C_s"], sys)?;
        let (_, analysis) = verify_gains(sys, &rec.gains, gamma, tau_max, opts)?;
        if !analysis.is_feasible() {
            best_certification = Some(
                best_certification.map_or(analysis.margin, |m: f64| m.min(analysis.margin)),
            );
            continue;
        }
        return Ok(SynthesisResult {
            gains: rec.gains,
            x: v["X"].clone(),
            y: v["Y"].clone(),
            script_a: v["A_s"].clone(),
            script_b: v["B_s"].clone(),
            script_c: v["C_s"].clone(),
            m: rec.m,
            n: rec.n,
            p: rec.p,
            q2_synthesis: v["Q2"].clone(),
            q1_selected: q1,
            gamma,
            tau_max,
            synthesis_margin: cert.margin,
            certification_margin: analysis.margin,
            iterations: cert.iterations + analysis.iterations,
            certificate: analysis.values,
        });
    }

    match best_certification {
        Some(margin) => Err(Error::CertificationFailure { margin }),
        None => Err(Error::SynthesisInfeasible { gamma, margins }),
    }
}

/// Smallest certified attenuation level for delays up to `tau_max`, to
/// relative bracket width `opts.gamma_rel_tol`.
///
/// Feasibility is first bracketed by doubling (or halving) from 1, then
/// bisected geometrically.
pub fn minimize_gamma(
    sys: &AugmentedDelaySystem,
    tau_max: f64,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let sys = sys.with_tau_bounds(sys.tau_min.min(tau_max), tau_max)?;
    let attempt = |gamma: f64| -> Result<Option<SynthesisResult>> {
        match synthesize(&sys, gamma, opts) {
            Ok(r) => Ok(Some(r)),
            Err(Error::SynthesisInfeasible { .. }) | Err(Error::CertificationFailure { .. }) => {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let floor = 1.0 / opts.gamma_cap.max(1.0);
    let (mut lo, mut hi, mut best) = match attempt(1.0)? {
        Some(r) => {
            let mut best = r;
            let mut hi = 1.0;
            loop {
                let next = hi / 2.0;
                if next < floor {
                    return Ok(best);
                }
                match attempt(next)? {
                    Some(r) => {
                        best = r;
                        hi = next;
                    }
                    None => break (next, hi, best),
                }
            }
        }
        None => {
            let mut lo = 1.0;
            loop {
                let next = lo * 2.0;
                if next > opts.gamma_cap {
                    return Err(Error::SynthesisInfeasible {
                        gamma: opts.gamma_cap,
                        margins: Vec::new(),
                    });
                }
                if let Some(r) = attempt(next)? {
                    break (lo, next, r);
                }
                lo = next;
            }
        }
    };

    while (hi - lo) > opts.gamma_rel_tol * hi {
        let mid = (lo * hi).sqrt();
        match attempt(mid)? {
            Some(r) => {
                hi = mid;
                best = r;
            }
            None => lo = mid,
        }
    }
    Ok(best)
}
