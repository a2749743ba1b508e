//! Dense reference constructions, written directly from the block formulas
//! and sharing no code with the assembler.
#![allow(dead_code)]

use hinf_core::{AugmentedDelaySystem, FilterGains};
use nalgebra::DMatrix;

pub fn eye(k: usize) -> DMatrix<f64> {
    DMatrix::identity(k, k)
}

pub fn zeros(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::zeros(r, c)
}

/// Stacks blocks given as (row offset, col offset, block) into a symmetric
/// matrix; each off-diagonal block is supplied once, in the upper triangle.
pub fn assemble(dim: usize, blocks: &[(usize, usize, DMatrix<f64>)]) -> DMatrix<f64> {
    let mut m = zeros(dim, dim);
    for (r, c, b) in blocks {
        m.view_mut((*r, *c), b.shape()).copy_from(b);
        if r != c {
            m.view_mut((*c, *r), (b.ncols(), b.nrows())).copy_from(&b.transpose());
        }
    }
    m
}

pub struct Extended {
    pub a: DMatrix<f64>,
    pub a_d: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub i0: DMatrix<f64>,
}

pub fn extended(sys: &AugmentedDelaySystem, g: &FilterGains) -> Extended {
    let n = 5;
    let mut a = zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.a_a);
    a.view_mut((n, 0), (n, n)).copy_from(&(&g.k_b * &sys.c_a0));
    a.view_mut((n, n), (n, n)).copy_from(&g.k_a);
    let mut a_d = zeros(2 * n, n);
    a_d.view_mut((n, 0), (n, n)).copy_from(&(&g.k_b * &sys.c_a1));
    let mut b = zeros(2 * n, 1);
    b.view_mut((0, 0), (n, 1)).copy_from(&sys.b_a);
    b.view_mut((n, 0), (n, 1)).copy_from(&(&g.k_b * &sys.d_a));
    let mut c = zeros(4, 2 * n);
    c.view_mut((0, 0), (4, n)).copy_from(&sys.e_a);
    c.view_mut((0, n), (4, n)).copy_from(&(-&g.k_c));
    let mut i0 = zeros(n, 2 * n);
    i0.view_mut((0, 0), (n, n)).copy_from(&eye(n));
    Extended { a, a_d, b, c, i0 }
}

/// The analysis matrix for fixed gains (21 x 21).
#[allow(clippy::too_many_arguments)]
pub fn dense_analysis(
    sys: &AugmentedDelaySystem,
    g: &FilterGains,
    gamma: f64,
    tau: f64,
    p: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> DMatrix<f64> {
    let e = extended(sys, g);
    let acl = &e.a + &e.a_d * &e.i0;
    let psi = p * &acl + acl.transpose() * p + e.i0.transpose() * q1 * &e.i0 * tau;
    let gamma_blk = {
        let mut m = zeros(10, 6);
        m.view_mut((0, 0), (10, 5)).copy_from(&(p * &e.a_d * &sys.a_a));
        m.view_mut((0, 5), (10, 1)).copy_from(&(p * &e.a_d * &sys.b_a));
        m
    };
    let mut q = zeros(6, 6);
    q.view_mut((0, 0), (5, 5)).copy_from(q1);
    q.view_mut((5, 5), (1, 1)).copy_from(q2);
    assemble(
        21,
        &[
            (0, 0, psi),
            (0, 10, p * &e.b),
            (0, 11, e.c.transpose()),
            (0, 15, gamma_blk),
            (10, 10, eye(1) * (-gamma * gamma) + q2 * tau),
            (11, 11, -eye(4)),
            (15, 15, q * (-1.0 / tau)),
        ],
    )
}

/// The Schur-expanded analysis matrix with `Q1 = q1 I` (26 x 26).
pub fn dense_expanded(
    sys: &AugmentedDelaySystem,
    g: &FilterGains,
    gamma: f64,
    tau: f64,
    q1: f64,
    p: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> DMatrix<f64> {
    let e = extended(sys, g);
    let acl = &e.a + &e.a_d * &e.i0;
    let psi1 = p * &acl + acl.transpose() * p;
    let mut gamma1 = zeros(10, 11);
    gamma1.view_mut((0, 0), (10, 5)).copy_from(&(p * &e.a_d * &sys.a_a));
    gamma1.view_mut((0, 5), (10, 1)).copy_from(&(p * &e.a_d * &sys.b_a));
    gamma1.view_mut((0, 6), (10, 5)).copy_from(&e.i0.transpose());
    let mut q = zeros(11, 11);
    q.view_mut((0, 0), (5, 5)).copy_from(&(eye(5) * q1));
    q.view_mut((5, 5), (1, 1)).copy_from(q2);
    q.view_mut((6, 6), (5, 5)).copy_from(&(eye(5) / q1));
    assemble(
        26,
        &[
            (0, 0, psi1),
            (0, 10, p * &e.b),
            (0, 11, e.c.transpose()),
            (0, 15, gamma1),
            (10, 10, eye(1) * (-gamma * gamma) + q2 * tau),
            (11, 11, -eye(4)),
            (15, 15, q * (-1.0 / tau)),
        ],
    )
}

/// The linearized synthesis matrix (26 x 26).
#[allow(clippy::too_many_arguments)]
pub fn dense_synthesis(
    sys: &AugmentedDelaySystem,
    gamma: f64,
    tau: f64,
    q1: f64,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a_s: &DMatrix<f64>,
    b_s: &DMatrix<f64>,
    c_s: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> DMatrix<f64> {
    let a = &sys.a_a;
    let c = &sys.c_a0 + &sys.c_a1;
    let mut t1 = zeros(10, 10);
    t1.view_mut((0, 0), (5, 5)).copy_from(&(a * x + x * a.transpose()));
    t1.view_mut((0, 5), (5, 5)).copy_from(&(a + a_s.transpose()));
    t1.view_mut((5, 0), (5, 5)).copy_from(&(a.transpose() + a_s));
    t1.view_mut((5, 5), (5, 5))
        .copy_from(&(y * a + a.transpose() * y + b_s * &c + c.transpose() * b_s.transpose()));
    let mut t2 = zeros(10, 1);
    t2.view_mut((0, 0), (5, 1)).copy_from(&sys.b_a);
    t2.view_mut((5, 0), (5, 1)).copy_from(&(y * &sys.b_a + b_s * &sys.d_a));
    let mut t3 = zeros(10, 4);
    t3.view_mut((0, 0), (5, 4)).copy_from(&(x * sys.e_a.transpose() - c_s.transpose()));
    t3.view_mut((5, 0), (5, 4)).copy_from(&sys.e_a.transpose());
    let mut t4 = zeros(10, 11);
    t4.view_mut((0, 6), (5, 5)).copy_from(x);
    t4.view_mut((5, 0), (5, 5)).copy_from(&(b_s * &sys.c_a1 * a));
    t4.view_mut((5, 5), (5, 1)).copy_from(&(b_s * &sys.c_a1 * &sys.b_a));
    t4.view_mut((5, 6), (5, 5)).copy_from(&eye(5));
    let mut q = zeros(11, 11);
    q.view_mut((0, 0), (5, 5)).copy_from(&(eye(5) * q1));
    q.view_mut((5, 5), (1, 1)).copy_from(q2);
    q.view_mut((6, 6), (5, 5)).copy_from(&(eye(5) / q1));
    assemble(
        26,
        &[
            (0, 0, t1),
            (0, 10, t2),
            (0, 11, t3),
            (0, 15, t4),
            (10, 10, eye(1) * (-gamma * gamma) + q2 * tau),
            (11, 11, -eye(4)),
            (15, 15, q * (-1.0 / tau)),
        ],
    )
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().max()
}
