//! Steady-state Kalman baseline that sees only the on-board measurements.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Plant;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBaseline {
    /// Steady-state gain `L = P C0^T R^-1` (4x3).
    pub l: DMatrix<f64>,
    /// Stabilizing solution of the filter Riccati equation.
    pub p_care: DMatrix<f64>,
    pub q_w: f64,
    pub r_diag: [f64; 3],
    pub a: DMatrix<f64>,
    pub c0: DMatrix<f64>,
}

pub const DEFAULT_Q_W: f64 = 1.0;
pub const DEFAULT_R_DIAG: [f64; 3] = [1e-4, 1e-4, 1e-4];

/// Solves `A P + P A^T - P C0^T R^-1 C0 P + B_w q_w B_w^T = 0` and returns
/// the stationary observer gain. The road input is absorbed into the
/// white disturbance.
pub fn kalman_baseline(plant: &Plant, q_w: f64, r_diag: [f64; 3]) -> Result<KalmanBaseline> {
    if !(q_w >= 0.0 && q_w.is_finite()) {
        return Err(Error::ParameterDomain(format!("q_w must be >= 0, got {q_w}")));
    }
    if r_diag.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::ParameterDomain("measurement covariance must be > 0".into()));
    }
    let r_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        3,
        r_diag.iter().map(|r| 1.0 / r),
    ));
    let g = plant.c0.transpose() * &r_inv * &plant.c0;
    let q = &plant.b_w * q_w * plant.b_w.transpose();
    let p = care(&plant.a.transpose(), &g, &q)?;
    let l = &p * plant.c0.transpose() * &r_inv;
    Ok(KalmanBaseline {
        l,
        p_care: p,
        q_w,
        r_diag,
        a: plant.a.clone(),
        c0: plant.c0.clone(),
    })
}

const SIGN_MAX_ITERS: usize = 100;
const SIGN_TOL: f64 = 1e-13;

/// Stabilizing solution of `F^T X + X F - X G X + H = 0` by the matrix
/// sign function of the Hamiltonian `[[F, -G], [-H, -F^T]]`.
pub fn care(f: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let mut z = linalg::block(&[&[f, &(-g)], &[&(-h), &(-f.transpose())]]);
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITERS {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("Hamiltonian has imaginary-axis eigenvalues".into()))?;
        // Determinant scaling accelerates the early iterations.
        let c = if det.is_finite() && det != 0.0 {
            det.abs().powf(-1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let delta = (&next - &z).abs().sum();
        let scale = z.abs().sum();
        z = next;
        if delta <= SIGN_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure("matrix sign iteration did not converge".into()));
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let lhs = linalg::block(&[&[&w12], &[&(w22 + &eye)]]);
    let rhs = -linalg::block(&[&[&(w11 + &eye)], &[&w21]]);
    let x = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let x = linalg::symmetrize(&x);

    let residual = f.transpose() * &x + &x * f - &x * g * &x + h;
    let scale = 1.0 + h.abs().max() + (f.transpose() * &x).abs().max() + (&x * g * &x).abs().max();
    if residual.abs().max() > 1e-8 * scale {
        return Err(Error::NumericalFailure(format!(
            "Riccati residual {:e} too large",
            residual.abs().max()
        )));
    }
    Ok(x)
}
