//! Dense barrier solver for LMI feasibility.
//!
//! The feasibility question `exists v: F_k(v) < 0 for all k` is posed as
//!
//! ```text
//! minimize t  subject to  F_k(v) <= t I,  |v_i| <= R
//! ```
//!
//! and solved by a log-det barrier path-following method with damped
//! Newton centering. Positive-definite variables contribute the implicit
//! constraints `-V <= t I`. The problem is declared feasible when the final
//! iterate has `max_k lambda_max(F_k(v)) < -epsilon`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lmi::{CoefficientForm, LmiProblem, VariableKind, VariableValues};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Cap on Newton steps across the whole barrier path.
    pub max_iterations: usize,
    /// Target relative duality gap.
    pub kkt_tolerance: f64,
    /// Box radius on every scalar unknown.
    pub bound_radius: f64,
    /// Initial weight on the objective `t` relative to the barrier.
    pub initial_centering: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            kkt_tolerance: 1e-9,
            bound_radius: 1e6,
            initial_centering: 1.0,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.kkt_tolerance > 0.0)
            || !(self.bound_radius > 0.0)
            || !(self.initial_centering > 0.0)
        {
            return Err(Error::ParameterDomain("solver options must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Feasible,
    InfeasibleWithinBounds,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpCertificate {
    pub status: SolveStatus,
    pub values: VariableValues,
    /// `max_k lambda_max(F_k(values))` over all constraints, positivity included.
    pub margin: f64,
    /// Final barrier epigraph variable (`margin <= t`).
    pub t: f64,
    /// Lower bound on the optimal `t` from the last centered point.
    pub lower_bound: f64,
    pub iterations: usize,
    /// Some unknown ended within 1% of the box boundary.
    pub box_active: bool,
}

impl SdpCertificate {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

const STEP_GROWTH: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-7;
const STALL_STEPS: usize = 6;

struct Barrier<'a> {
    forms: &'a [CoefficientForm],
    n: usize,
    radius: f64,
}

impl Barrier<'_> {
    fn slack(&self, form: &CoefficientForm, x: &[f64], t: f64) -> DMatrix<f64> {
        let dim = form.constant.nrows();
        let mut s = DMatrix::identity(dim, dim) * t - &form.constant;
        for (i, a) in &form.coefficients {
            let xi = x[*i];
            if xi != 0.0 {
                s.zip_apply(a, |sv, av| *sv -= xi * av);
            }
        }
        s
    }

    fn in_box(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() < self.radius)
    }

    /// Barrier objective, or `None` outside the domain.
    fn value(&self, x: &[f64], t: f64, weight: f64) -> Option<f64> {
        if !self.in_box(x) {
            return None;
        }
        let mut f = weight * t;
        for form in self.forms {
            let chol = Cholesky::new(self.slack(form, x, t))?;
            f -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        let r2 = self.radius * self.radius;
        f -= x.iter().map(|v| (r2 - v * v).ln()).sum::<f64>();
        Some(f)
    }

    fn feasible(&self, x: &[f64], t: f64) -> bool {
        self.in_box(x) && self.forms.iter().all(|f| Cholesky::new(self.slack(f, x, t)).is_some())
    }

    /// Gradient and Hessian in `(x, t)`; `t` is the last coordinate.
    fn newton_system(
        &self,
        x: &[f64],
        t: f64,
        weight: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let m = self.n + 1;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        g[self.n] = weight;

        for form in self.forms {
            let chol = Cholesky::new(self.slack(form, x, t))?;
            let l = chol.l();
            let dim = l.nrows();
            // G_j = L^-1 D_j L^-T with D_t = I and D_i = -A_i.
            let whiten = |d: &DMatrix<f64>| -> Option<DMatrix<f64>> {
                let half = l.solve_lower_triangular(d)?;
                l.solve_lower_triangular(&half.transpose())
            };
            let mut idx = Vec::with_capacity(form.coefficients.len() + 1);
            let mut gs = Vec::with_capacity(form.coefficients.len() + 1);
            for (i, a) in &form.coefficients {
                idx.push(*i);
                gs.push(whiten(&(-a))?);
            }
            idx.push(self.n);
            gs.push(whiten(&DMatrix::identity(dim, dim))?);

            for (p, gp) in gs.iter().enumerate() {
                g[idx[p]] -= gp.trace();
                for q in p..gs.len() {
                    let v = gp.dot(&gs[q]);
                    h[(idx[p], idx[q])] += v;
                    if p != q {
                        h[(idx[q], idx[p])] += v;
                    }
                }
            }
        }

        let r2 = self.radius * self.radius;
        for (i, v) in x.iter().enumerate() {
            let d = r2 - v * v;
            g[i] += 2.0 * v / d;
            h[(i, i)] += 2.0 * (r2 + v * v) / (d * d);
        }
        Some((g, h))
    }
}

/// Solves `H d = -g` with Jacobi scaling and one refinement pass.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let m = g.len();
    let d = DVector::from_iterator(m, h.diagonal().iter().map(|v| 1.0 / v.abs().max(1e-300).sqrt()));
    let mut hs = h.clone();
    for i in 0..m {
        for j in 0..m {
            hs[(i, j)] *= d[i] * d[j];
        }
    }
    let rhs = -g.component_mul(&d);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = hs.clone();
        for i in 0..m {
            hr[(i, i)] += reg;
        }
        if let Some(chol) = Cholesky::<f64, Dyn>::new(hr) {
            let mut y = chol.solve(&rhs);
            let residual = &rhs - &hs * &y;
            y += chol.solve(&residual);
            return Some(y.component_mul(&d));
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

/// Searches for a strictly feasible point of `problem`.
pub fn solve_feasibility(problem: &LmiProblem, opts: &SolverOptions) -> Result<SdpCertificate> {
    opts.validate()?;
    problem.validate()?;
    let forms = problem.coefficient_forms();
    for form in &forms {
        for (_, a) in &form.coefficients {
            if *a != a.transpose() {
                return Err(Error::InternalConsistency(format!(
                    "constraint `{}` has a non-symmetric coefficient",
                    form.label
                )));
            }
        }
    }

    let n = problem.scalar_count();
    let barrier = Barrier {
        forms: &forms,
        n,
        radius: opts.bound_radius,
    };
    let degree: f64 = forms.iter().map(|f| f.constant.nrows() as f64).sum::<f64>() + 2.0 * n as f64;
    let eps = problem.epsilon;

    let mut x = vec![0.0; n];
    let start = forms
        .iter()
        .map(|f| linalg::max_eigenvalue(&f.constant))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut t = start + 1.0_f64.max(0.1 * start.abs());
    // Balance the objective against the barrier's pull on t at the start.
    let pull: f64 = forms
        .iter()
        .map(|f| {
            Cholesky::new(barrier.slack(f, &x, t)).map_or(0.0, |c| c.inverse().trace())
        })
        .sum();
    let mut weight = opts.initial_centering * pull.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut exhausted = false;

    'path: loop {
        // Centering. Stops early once the decrement no longer improves,
        // which is where rounding dominates the Newton direction.
        let mut best_decrement = f64::INFINITY;
        let mut since_best = 0;
        let mut stalled = false;
        loop {
            if iterations >= opts.max_iterations {
                exhausted = true;
                break 'path;
            }
            let (g, h) = barrier
                .newton_system(&x, t, weight)
                .ok_or_else(|| Error::NumericalFailure("iterate left the barrier domain".into()))?;
            let dir = newton_direction(&g, &h)
                .ok_or_else(|| Error::NumericalFailure("singular Newton system".into()))?;
            iterations += 1;
            let decrement2 = -g.dot(&dir);
            if !decrement2.is_finite() {
                return Err(Error::NumericalFailure("non-finite Newton decrement".into()));
            }
            if decrement2 * 0.5 <= CENTERING_TOL {
                break;
            }
            if decrement2 < 0.5 * best_decrement {
                best_decrement = decrement2;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL_STEPS && decrement2 < 1.0 {
                    stalled = true;
                    break;
                }
            }
            let lambda = decrement2.max(0.0).sqrt();
            let mut step = if lambda < 0.25 { 1.0 } else { 1.0 / (1.0 + lambda) };
            // Inside the quadratic-convergence region only the domain is checked;
            // elsewhere the damped step must not increase the barrier value.
            let f0 = if lambda < 0.25 { None } else { barrier.value(&x, t, weight) };
            let mut moved = false;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                let tn = t + step * dir[n];
                let accept = match f0 {
                    None => barrier.feasible(&xn, tn),
                    Some(f0) => barrier
                        .value(&xn, tn, weight)
                        .is_some_and(|f| f <= f0 + 1e-12 * f0.abs().max(1.0)),
                };
                if accept {
                    x = xn;
                    t = tn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }

        let gap = degree / weight;
        if !stalled {
            lower_bound = lower_bound.max(t - gap);
        }
        // Only a centered point yields a trustworthy bound on the optimum.
        if !stalled && t - 2.0 * gap >= -eps {
            break;
        }
        if gap <= opts.kkt_tolerance * t.abs().max(1.0) {
            break;
        }
        weight *= STEP_GROWTH;
    }

    let values = problem.unpack(&x);
    let margin = max_violation(problem, &values)?;
    let status = if margin < -eps {
        SolveStatus::Feasible
    } else if exhausted {
        SolveStatus::MaxIterations
    } else {
        SolveStatus::InfeasibleWithinBounds
    };
    let box_active = x.iter().any(|v| v.abs() > 0.99 * opts.bound_radius);
    Ok(SdpCertificate {
        status,
        values,
        margin,
        t,
        lower_bound,
        iterations,
        box_active,
    })
}

fn max_violation(problem: &LmiProblem, values: &VariableValues) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for c in problem.all_constraints() {
        let f = c.evaluate(values)?;
        worst = worst.max(linalg::max_eigenvalue(&f));
    }
    Ok(worst)
}

/// Largest eigenvalue over every constraint evaluated at `values`,
/// including `-V` for each positive-definite variable. A negative result
/// certifies strict feasibility.
pub fn certify(problem: &LmiProblem, values: &VariableValues) -> Result<f64> {
    for v in &problem.variables {
        let m = values
            .get(&v.id)
            .ok_or_else(|| Error::MissingVariable(v.id.clone()))?;
        if m.shape() != (v.rows, v.cols) {
            return Err(Error::Dimension(format!("value of {} has wrong shape", v.id)));
        }
        if v.kind == VariableKind::SymmetricPositiveDefinite && *m != m.transpose() {
            return Err(Error::ParameterDomain(format!("value of {} is not symmetric", v.id)));
        }
    }
    max_violation(problem, values)
}
