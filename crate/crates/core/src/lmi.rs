//! Block-affine matrix inequalities and the two inequality families used
//! by the filter design: the analysis (certification) inequality for fixed
//! gains and the linearized synthesis inequality.
//!
//! Every constraint has the form `F(v) = C + sum_k He(T_k(v)) < 0`, where a
//! term `T_k = L V R` (or `L V^T R`) is placed at a block offset and `He`
//! adds the mirrored transpose. A term placed on a diagonal block therefore
//! contributes `T + T^T`, which is how `P A + A^T P` is expressed; scalar
//! multiples of a symmetric variable on the diagonal use half coefficients.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::AugmentedDelaySystem;
use crate::synthesis::FilterGains;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    /// Symmetric, constrained positive definite; parameterized by its upper triangle.
    SymmetricPositiveDefinite,
    /// Unstructured; parameterized entrywise, row-major.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVariable {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VariableKind,
}

impl MatrixVariable {
    pub fn spd(id: &str, n: usize) -> Self {
        Self {
            id: id.to_string(),
            rows: n,
            cols: n,
            kind: VariableKind::SymmetricPositiveDefinite,
        }
    }

    pub fn general(id: &str, rows: usize, cols: usize) -> Self {
        Self {
            id: id.to_string(),
            rows,
            cols,
            kind: VariableKind::General,
        }
    }

    /// Number of free scalars.
    pub fn scalar_count(&self) -> usize {
        match self.kind {
            VariableKind::SymmetricPositiveDefinite => self.rows * (self.rows + 1) / 2,
            VariableKind::General => self.rows * self.cols,
        }
    }

    /// The `k`-th basis matrix of this variable's parameterization.
    fn basis(&self, k: usize) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.rows, self.cols);
        let (i, j) = self.index(k);
        e[(i, j)] = 1.0;
        if self.kind == VariableKind::SymmetricPositiveDefinite {
            e[(j, i)] = 1.0;
        }
        e
    }

    /// Matrix position of scalar `k`: upper triangle row-major for
    /// symmetric variables, row-major for general ones.
    pub fn index(&self, k: usize) -> (usize, usize) {
        match self.kind {
            VariableKind::General => (k / self.cols, k % self.cols),
            VariableKind::SymmetricPositiveDefinite => {
                let n = self.rows;
                let mut row = 0;
                let mut rem = k;
                while rem >= n - row {
                    rem -= n - row;
                    row += 1;
                }
                (row, row + rem)
            }
        }
    }
}

/// Named variable assignment.
pub type VariableValues = BTreeMap<String, DMatrix<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub row_offset: usize,
    pub col_offset: usize,
    pub left: DMatrix<f64>,
    pub var: String,
    pub right: DMatrix<f64>,
    pub transpose: bool,
}

impl Term {
    fn product(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        if self.transpose {
            &self.left * v.transpose() * &self.right
        } else {
            &self.left * v * &self.right
        }
    }
}

/// `F(v) = constant + sum He(terms)`, required to satisfy `F(v) <= -eps I`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixInequality {
    pub label: String,
    pub dimension: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<Term>,
}

impl AffineMatrixInequality {
    pub fn new(label: &str, dimension: usize) -> Self {
        Self {
            label: label.to_string(),
            dimension,
            constant: DMatrix::zeros(dimension, dimension),
            terms: Vec::new(),
        }
    }

    /// Places `m` at `(r, c)` and its transpose at `(c, r)`. A diagonal
    /// placement must be symmetric and is written once.
    pub fn constant_block(&mut self, r: usize, c: usize, m: &DMatrix<f64>) -> &mut Self {
        if r == c {
            let s = linalg::symmetrize(m);
            let mut view = self.constant.view_mut((r, c), m.shape());
            view += &s;
        } else {
            {
                let mut view = self.constant.view_mut((r, c), m.shape());
                view += m;
            }
            let mut view = self.constant.view_mut((c, r), (m.ncols(), m.nrows()));
            view += m.transpose();
        }
        self
    }

    pub fn term(
        &mut self,
        r: usize,
        c: usize,
        left: DMatrix<f64>,
        var: &str,
        right: DMatrix<f64>,
    ) -> &mut Self {
        self.terms.push(Term {
            row_offset: r,
            col_offset: c,
            left,
            var: var.to_string(),
            right,
            transpose: false,
        });
        self
    }

    pub fn term_transposed(
        &mut self,
        r: usize,
        c: usize,
        left: DMatrix<f64>,
        var: &str,
        right: DMatrix<f64>,
    ) -> &mut Self {
        self.terms.push(Term {
            row_offset: r,
            col_offset: c,
            left,
            var: var.to_string(),
            right,
            transpose: true,
        });
        self
    }

    /// Adds `scale * V` on a diagonal block for a square variable of size `n`.
    pub fn diagonal_scaled(&mut self, r: usize, n: usize, scale: f64, var: &str) -> &mut Self {
        self.term(
            r,
            r,
            DMatrix::identity(n, n) * (0.5 * scale),
            var,
            DMatrix::identity(n, n),
        )
    }

    fn add_placed(&self, out: &mut DMatrix<f64>, term: &Term, contribution: &DMatrix<f64>) {
        let (r, c) = (term.row_offset, term.col_offset);
        if r == c {
            // T + T^T formed first so the result is bitwise symmetric.
            let he = contribution + contribution.transpose();
            let mut view = out.view_mut((r, c), he.shape());
            view += &he;
            return;
        }
        {
            let mut view = out.view_mut((r, c), contribution.shape());
            view += contribution;
        }
        let mut view = out.view_mut((c, r), (contribution.ncols(), contribution.nrows()));
        view += contribution.transpose();
    }

    /// Evaluates `F(values)`.
    pub fn evaluate(&self, values: &VariableValues) -> Result<DMatrix<f64>> {
        let mut out = self.constant.clone();
        for term in &self.terms {
            let v = values
                .get(&term.var)
                .ok_or_else(|| Error::MissingVariable(term.var.clone()))?;
            let contribution = term.product(v);
            self.add_placed(&mut out, term, &contribution);
        }
        Ok(out)
    }

    /// Evaluates only the terms that reference `var`, at value `v`.
    fn evaluate_variable(&self, var: &str, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dimension, self.dimension);
        for term in self.terms.iter().filter(|t| t.var == var) {
            let contribution = term.product(v);
            self.add_placed(&mut out, term, &contribution);
        }
        out
    }

    pub fn references(&self, var: &str) -> bool {
        self.terms.iter().any(|t| t.var == var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub variables: Vec<MatrixVariable>,
    pub constraints: Vec<AffineMatrixInequality>,
    /// Strictness margin: each constraint must satisfy `F(v) <= -epsilon I`.
    pub epsilon: f64,
}

/// Linear map from the stacked scalar vector to one constraint.
#[derive(Debug, Clone)]
pub struct CoefficientForm {
    pub label: String,
    pub constant: DMatrix<f64>,
    /// `(scalar index, dF/dv_i)` for every scalar that enters the constraint.
    pub coefficients: Vec<(usize, DMatrix<f64>)>,
}

impl LmiProblem {
    pub fn new(variables: Vec<MatrixVariable>, constraints: Vec<AffineMatrixInequality>) -> Self {
        let epsilon = default_epsilon(&constraints);
        Self {
            variables,
            constraints,
            epsilon,
        }
    }

    pub fn variable(&self, id: &str) -> Option<&MatrixVariable> {
        self.variables.iter().find(|v| v.id == id)
    }

    pub fn scalar_count(&self) -> usize {
        self.variables.iter().map(|v| v.scalar_count()).sum()
    }

    /// Checks declarations, block shapes and structural symmetry.
    pub fn validate(&self) -> Result<()> {
        for v in &self.variables {
            if v.kind == VariableKind::SymmetricPositiveDefinite && v.rows != v.cols {
                return Err(Error::Dimension(format!("symmetric variable {} is not square", v.id)));
            }
        }
        for c in &self.constraints {
            if c.constant.shape() != (c.dimension, c.dimension) {
                return Err(Error::Dimension(format!("constant of {} has wrong shape", c.label)));
            }
            if c.constant != c.constant.transpose() {
                return Err(Error::InternalConsistency(format!(
                    "constant of {} is not symmetric",
                    c.label
                )));
            }
            for t in &c.terms {
                let var = self
                    .variable(&t.var)
                    .ok_or_else(|| Error::MissingVariable(t.var.clone()))?;
                let (vr, vc) = if t.transpose {
                    (var.cols, var.rows)
                } else {
                    (var.rows, var.cols)
                };
                if t.left.ncols() != vr || t.right.nrows() != vc {
                    return Err(Error::Dimension(format!(
                        "term on {} in {} has incompatible coefficients",
                        t.var, c.label
                    )));
                }
                let (h, w) = (t.left.nrows(), t.right.ncols());
                if t.row_offset + h > c.dimension || t.col_offset + w > c.dimension {
                    return Err(Error::Dimension(format!(
                        "term on {} in {} exceeds the constraint",
                        t.var, c.label
                    )));
                }
                if t.row_offset == t.col_offset && h != w {
                    return Err(Error::Dimension(format!(
                        "diagonal term on {} in {} is not square",
                        t.var, c.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// Explicit constraints followed by `-V < 0` for each positive-definite variable.
    pub fn all_constraints(&self) -> Vec<AffineMatrixInequality> {
        let mut all = self.constraints.clone();
        for v in &self.variables {
            if v.kind == VariableKind::SymmetricPositiveDefinite {
                let mut c = AffineMatrixInequality::new(&format!("{} > 0", v.id), v.rows);
                c.diagonal_scaled(0, v.rows, -1.0, &v.id);
                all.push(c);
            }
        }
        all
    }

    /// Stacks variable values into the scalar vector (documented ordering:
    /// variables in declaration order, each per [`MatrixVariable::index`]).
    pub fn pack(&self, values: &VariableValues) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for v in &self.variables {
            let m = values
                .get(&v.id)
                .ok_or_else(|| Error::MissingVariable(v.id.clone()))?;
            if m.shape() != (v.rows, v.cols) {
                return Err(Error::Dimension(format!("value of {} has wrong shape", v.id)));
            }
            for k in 0..v.scalar_count() {
                out.push(m[v.index(k)]);
            }
        }
        Ok(out)
    }

    pub fn unpack(&self, x: &[f64]) -> VariableValues {
        let mut out = VariableValues::new();
        let mut offset = 0;
        for v in &self.variables {
            let mut m = DMatrix::zeros(v.rows, v.cols);
            for k in 0..v.scalar_count() {
                let (i, j) = v.index(k);
                m[(i, j)] = x[offset + k];
                if v.kind == VariableKind::SymmetricPositiveDefinite {
                    m[(j, i)] = x[offset + k];
                }
            }
            offset += v.scalar_count();
            out.insert(v.id.clone(), m);
        }
        out
    }

    pub fn zero_values(&self) -> VariableValues {
        self.unpack(&vec![0.0; self.scalar_count()])
    }

    /// Coefficient form of every constraint, implicit positivity included.
    pub fn coefficient_forms(&self) -> Vec<CoefficientForm> {
        let constraints = self.all_constraints();
        let mut forms: Vec<CoefficientForm> = constraints
            .iter()
            .map(|c| CoefficientForm {
                label: c.label.clone(),
                constant: c.constant.clone(),
                coefficients: Vec::new(),
            })
            .collect();
        let mut offset = 0;
        for v in &self.variables {
            for (c, form) in constraints.iter().zip(forms.iter_mut()) {
                if !c.references(&v.id) {
                    continue;
                }
                for k in 0..v.scalar_count() {
                    let a = c.evaluate_variable(&v.id, &v.basis(k));
                    if a.iter().any(|x| *x != 0.0) {
                        form.coefficients.push((offset + k, a));
                    }
                }
            }
            offset += v.scalar_count();
        }
        forms
    }
}

/// `1e-7 * (1 + max ||C_k||_inf)` over the constant blocks.
pub fn default_epsilon(constraints: &[AffineMatrixInequality]) -> f64 {
    let norm = constraints
        .iter()
        .map(|c| linalg::inf_norm(&c.constant))
        .fold(0.0, f64::max);
    1e-7 * (1.0 + norm)
}

/// Extended system of plant plus filter, `eta = [xa; xhat]`:
///
/// ```text
/// eta' = Abar eta + Abar_d xa(t - tau) + Bbar w
/// e    = Cbar eta
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystem {
    pub a_bar: DMatrix<f64>,
    pub a_bar_d: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
}

impl ErrorSystem {
    /// `Abar + Abar_d I0`, the dynamics with the delay collapsed.
    pub fn a_collapsed(&self) -> DMatrix<f64> {
        let n = self.a_bar_d.ncols();
        let mut out = self.a_bar.clone();
        let mut view = out.view_mut((0, 0), (self.a_bar.nrows(), n));
        view += &self.a_bar_d;
        out
    }
}

pub fn build_error_system(sys: &AugmentedDelaySystem, gains: &FilterGains) -> Result<ErrorSystem> {
    let n = sys.n();
    let ny = sys.c_a0.nrows();
    let nz = sys.e_a.nrows();
    gains.check_dims(n, ny, nz)?;

    let zero_nn = DMatrix::zeros(n, n);
    let a_bar = linalg::block(&[
        &[&sys.a_a, &zero_nn],
        &[&(&gains.k_b * &sys.c_a0), &gains.k_a],
    ]);
    let a_bar_d = linalg::block(&[&[&zero_nn], &[&(&gains.k_b * &sys.c_a1)]]);
    let b_bar = linalg::block(&[&[&sys.b_a], &[&(&gains.k_b * &sys.d_a)]]);
    let c_bar = linalg::block(&[&[&sys.e_a, &(-&gains.k_c)]]);
    Ok(ErrorSystem {
        a_bar,
        a_bar_d,
        b_bar,
        c_bar,
    })
}

/// `I0 = [I 0]`, selecting `xa` from `eta`.
pub fn selector(n: usize) -> DMatrix<f64> {
    let mut i0 = DMatrix::zeros(n, 2 * n);
    i0.view_mut((0, 0), (n, n)).fill_with_identity();
    i0
}

/// Analysis inequality for fixed gains in `P (2n), Q1 (n), Q2 (m_w)`:
///
/// ```text
/// [ Psi  P Bbar        Cbar^T  Gamma                  ]
/// [  *   -g^2 I + t Q2   0       0                    ]  < 0
/// [  *    *             -I       0                    ]
/// [  *    *              *     -(1/t) diag(Q1, Q2)    ]
/// ```
///
/// with `Psi = He(P (Abar + Abar_d I0)) + t I0^T Q1 I0` and
/// `Gamma = [P Abar_d A_a, P Abar_d B_a]`, `t = tau_max`. For `tau_max = 0`
/// the delay is absent and the last block row and column are dropped.
pub fn assemble_verification_lmi(
    sys: &AugmentedDelaySystem,
    gains: &FilterGains,
    gamma: f64,
    tau_max: f64,
) -> Result<LmiProblem> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::ParameterDomain(format!("gamma must be > 0, got {gamma}")));
    }
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(Error::ParameterDomain(format!("tau_max must be >= 0, got {tau_max}")));
    }
    let es = build_error_system(sys, gains)?;
    let n = sys.n();
    let n2 = 2 * n;
    let nw = sys.b_a.ncols();
    let nz = sys.e_a.nrows();
    let delayed = tau_max > 0.0;

    let (r_w, r_e, r_q1, r_q2) = (n2, n2 + nw, n2 + nw + nz, n2 + nw + nz + n);
    let dim = if delayed { r_q2 + nw } else { r_q1 };
    let i0 = selector(n);
    let eye = |k| DMatrix::<f64>::identity(k, k);

    let mut c = AffineMatrixInequality::new("analysis", dim);
    c.term(0, 0, eye(n2), "P", es.a_collapsed());
    c.term(0, r_w, eye(n2), "P", es.b_bar.clone());
    c.constant_block(0, r_e, &es.c_bar.transpose());
    c.constant_block(r_w, r_w, &(eye(nw) * (-gamma * gamma)));
    c.constant_block(r_e, r_e, &(-eye(nz)));
    if delayed {
        c.term(0, 0, i0.transpose() * (0.5 * tau_max), "Q1", i0.clone());
        c.diagonal_scaled(r_w, nw, tau_max, "Q2");
        c.term(0, r_q1, eye(n2), "P", &es.a_bar_d * &sys.a_a);
        c.term(0, r_q2, eye(n2), "P", &es.a_bar_d * &sys.b_a);
        c.diagonal_scaled(r_q1, n, -1.0 / tau_max, "Q1");
        c.diagonal_scaled(r_q2, nw, -1.0 / tau_max, "Q2");
    }

    let problem = LmiProblem::new(
        vec![
            MatrixVariable::spd("P", n2),
            MatrixVariable::spd("Q1", n),
            MatrixVariable::spd("Q2", nw),
        ],
        vec![c],
    );
    problem.validate()?;
    Ok(problem)
}

/// Linearized synthesis inequalities for fixed `Q1 = q1 I`:
///
/// (a) the congruence-transformed analysis inequality in
///     `X, Y (n), A_s (n x n), B_s (n x ny), C_s (nz x n), Q2`;
/// (b) `-[[X, I], [I, Y]] < 0`.
///
/// Variable ids: `X`, `Y`, `A_s`, `B_s`, `C_s`, `Q2`.
pub fn assemble_synthesis_lmi(
    sys: &AugmentedDelaySystem,
    gamma: f64,
    tau_max: f64,
    q1: f64,
) -> Result<LmiProblem> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::ParameterDomain(format!("gamma must be > 0, got {gamma}")));
    }
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(Error::ParameterDomain(format!("tau_max must be >= 0, got {tau_max}")));
    }
    if !(q1 > 0.0 && q1.is_finite()) {
        return Err(Error::ParameterDomain(format!("q1 must be > 0, got {q1}")));
    }
    let n = sys.n();
    let ny = sys.c_a0.nrows();
    let nz = sys.e_a.nrows();
    let nw = sys.b_a.ncols();
    let delayed = tau_max > 0.0;
    let eye = |k| DMatrix::<f64>::identity(k, k);
    let c_sum = sys.c_sum();

    // Block offsets: [X-part | Y-part | w | e | Q1 | Q2 | Q1^-1].
    let (r_y, r_w, r_e) = (n, 2 * n, 2 * n + nw);
    let r_q1 = r_e + nz;
    let r_q2 = r_q1 + n;
    let r_q1i = r_q2 + nw;
    let dim = if delayed { r_q1i + n } else { r_q1 };

    let mut a = AffineMatrixInequality::new("synthesis", dim);
    // T1
    a.term(0, 0, sys.a_a.clone(), "X", eye(n));
    a.constant_block(0, r_y, &sys.a_a);
    a.term(r_y, 0, eye(n), "A_s", eye(n));
    a.term(r_y, r_y, eye(n), "Y", sys.a_a.clone());
    a.term(r_y, r_y, eye(n), "B_s", c_sum);
    // T2
    a.constant_block(0, r_w, &sys.b_a);
    a.term(r_y, r_w, eye(n), "Y", sys.b_a.clone());
    a.term(r_y, r_w, eye(n), "B_s", sys.d_a.clone());
    // T3
    a.term(0, r_e, eye(n), "X", sys.e_a.transpose());
    a.term_transposed(0, r_e, -eye(n), "C_s", eye(nz));
    a.constant_block(r_y, r_e, &sys.e_a.transpose());
    a.constant_block(r_w, r_w, &(eye(nw) * (-gamma * gamma)));
    a.constant_block(r_e, r_e, &(-eye(nz)));
    if delayed {
        a.diagonal_scaled(r_w, nw, tau_max, "Q2");
        // T4
        a.term(r_y, r_q1, eye(n), "B_s", &sys.c_a1 * &sys.a_a);
        a.term(r_y, r_q2, eye(n), "B_s", &sys.c_a1 * &sys.b_a);
        a.term(0, r_q1i, eye(n), "X", eye(n));
        a.constant_block(r_y, r_q1i, &eye(n));
        a.constant_block(r_q1, r_q1, &(eye(n) * (-q1 / tau_max)));
        a.diagonal_scaled(r_q2, nw, -1.0 / tau_max, "Q2");
        a.constant_block(r_q1i, r_q1i, &(eye(n) * (-1.0 / (q1 * tau_max))));
    }

    let mut b = AffineMatrixInequality::new("coupling", 2 * n);
    b.diagonal_scaled(0, n, -1.0, "X");
    b.diagonal_scaled(n, n, -1.0, "Y");
    b.constant_block(0, n, &(-eye(n)));

    let problem = LmiProblem::new(
        vec![
            MatrixVariable::spd("X", n),
            MatrixVariable::spd("Y", n),
            MatrixVariable::general("A_s", n, n),
            MatrixVariable::general("B_s", n, ny),
            MatrixVariable::general("C_s", nz, n),
            MatrixVariable::spd("Q2", nw),
        ],
        vec![a, b],
    );
    problem.validate()?;
    Ok(problem)
}

/// Decides `[[S11, S12], [S12^T, S22]] < 0` through `S22 < 0` and
/// `S11 - S12 S22^-1 S12^T < 0`.
pub fn schur_check(s11: &DMatrix<f64>, s12: &DMatrix<f64>, s22: &DMatrix<f64>) -> Result<bool> {
    if s11.nrows() != s11.ncols()
        || s22.nrows() != s22.ncols()
        || s12.shape() != (s11.nrows(), s22.nrows())
    {
        return Err(Error::Dimension("schur_check block shapes are inconsistent".into()));
    }
    let lu = s22.clone().lu();
    let scale = s22.amax().max(f64::MIN_POSITIVE);
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= f64::EPSILON.powi(2) * scale.powi(s22.nrows() as i32) {
        return Err(Error::Singular("S22 is singular".into()));
    }
    let s22_inv_s12t = lu
        .solve(&s12.transpose())
        .ok_or_else(|| Error::Singular("S22 is singular".into()))?;
    let complement = linalg::symmetrize(&(s11 - s12 * s22_inv_s12t));
    Ok(linalg::max_eigenvalue(s22) < 0.0 && linalg::max_eigenvalue(&complement) < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_values(problem: &LmiProblem, rng: &mut ChaCha8Rng) -> VariableValues {
        let x: Vec<f64> = (0..problem.scalar_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        problem.unpack(&x)
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn zero_gain_error_system() {
        let sys = reference_system();
        let es = build_error_system(&sys, &FilterGains::zeros(5, 4, 4)).unwrap();
        assert_eq!(es.a_bar, linalg::block_diag(&[&sys.a_a, &DMatrix::zeros(5, 5)]));
        assert_eq!(es.a_bar_d, DMatrix::zeros(10, 5));
        assert_eq!(es.c_bar, linalg::block(&[&[&sys.e_a, &DMatrix::zeros(4, 5)]]));
        assert_eq!(es.b_bar.shape(), (10, 1));
    }

    #[test]
    fn delayed_coupling_has_one_column() {
        let sys = reference_system();
        let mut gains = FilterGains::zeros(5, 4, 4);
        gains.k_b.view_mut((0, 0), (4, 4)).fill_with_identity();
        let es = build_error_system(&sys, &gains).unwrap();
        for j in 0..5 {
            let nonzero = es.a_bar_d.column(j).iter().any(|v| *v != 0.0);
            assert_eq!(nonzero, j == 4, "column {j}");
        }
        assert!(build_error_system(&sys, &FilterGains::zeros(5, 3, 4)).is_err());
    }

    #[test]
    fn verification_dimensions() {
        let sys = reference_system();
        let g = FilterGains::zeros(5, 4, 4);
        let p = assemble_verification_lmi(&sys, &g, 0.5, 0.5).unwrap();
        assert_eq!(p.constraints.len(), 1);
        assert_eq!(p.constraints[0].dimension, 21);
        assert_eq!(p.scalar_count(), 55 + 15 + 1);
        let p0 = assemble_verification_lmi(&sys, &g, 0.5, 0.0).unwrap();
        assert_eq!(p0.constraints[0].dimension, 15);
        assert!(assemble_verification_lmi(&sys, &g, 0.0, 0.5).is_err());
        assert!(assemble_verification_lmi(&sys, &g, 0.5, -1.0).is_err());
    }

    #[test]
    fn zero_gain_psi_block() {
        let sys = reference_system();
        let p = assemble_verification_lmi(&sys, &FilterGains::zeros(5, 4, 4), 0.5, 0.5).unwrap();
        let mut v = VariableValues::new();
        v.insert("P".into(), DMatrix::identity(10, 10));
        v.insert("Q1".into(), DMatrix::identity(5, 5));
        v.insert("Q2".into(), scalar(1.0));
        let f = p.constraints[0].evaluate(&v).unwrap();
        let a_blk = linalg::block_diag(&[&sys.a_a, &DMatrix::zeros(5, 5)]);
        let i0 = selector(5);
        let psi = &a_blk + a_blk.transpose() + i0.transpose() * &i0 * 0.5;
        assert!((f.view((0, 0), (10, 10)) - psi).amax() < 1e-12);
        assert!(f.view((5, 5), (5, 5)).iter().all(|x| *x == 0.0));
        assert_eq!(f[(10, 10)], -0.25 + 0.5);
        assert_eq!(f[(20, 20)], -2.0);
    }

    #[test]
    fn synthesis_dimensions_and_domain() {
        let sys = reference_system();
        let p = assemble_synthesis_lmi(&sys, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(p.constraints[0].dimension, 26);
        assert_eq!(p.constraints[1].dimension, 10);
        assert_eq!(assemble_synthesis_lmi(&sys, 0.5, 0.0, 1.0).unwrap().constraints[0].dimension, 15);
        assert!(assemble_synthesis_lmi(&sys, 0.5, 0.5, 0.0).is_err());
        assert!(assemble_synthesis_lmi(&sys, 0.5, 0.5, -1.0).is_err());
    }

    #[test]
    fn zero_script_variables_structure() {
        let sys = reference_system();
        let p = assemble_synthesis_lmi(&sys, 0.5, 0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = random_values(&p, &mut rng);
        for id in ["A_s", "B_s", "C_s"] {
            let z = DMatrix::zeros(v[id].nrows(), v[id].ncols());
            v.insert(id.into(), z);
        }
        let f = p.constraints[0].evaluate(&v).unwrap();
        let (x, y) = (&v["X"], &v["Y"]);
        let a = &sys.a_a;
        let t1 = linalg::block(&[
            &[&(a * x + x * a.transpose()), a],
            &[&a.transpose(), &(y * a + a.transpose() * y)],
        ]);
        assert!((f.view((0, 0), (10, 10)) - t1).amax() < 1e-12);
        assert!(f.view((0, 15), (10, 6)).iter().all(|e| *e == 0.0));
    }

    #[test]
    fn assembled_constraints_are_exactly_symmetric() {
        let sys = reference_system();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut gains = FilterGains::zeros(5, 4, 4);
        gains.k_a = random(&mut rng, 5, 5);
        gains.k_b = random(&mut rng, 5, 4);
        gains.k_c = random(&mut rng, 4, 5);
        for p in [
            assemble_verification_lmi(&sys, &gains, 0.5, 0.5).unwrap(),
            assemble_synthesis_lmi(&sys, 0.5, 0.5, 0.1).unwrap(),
        ] {
            for _ in 0..20 {
                let v = random_values(&p, &mut rng);
                for c in p.all_constraints() {
                    let f = c.evaluate(&v).unwrap();
                    assert_eq!(f, f.transpose(), "{}", c.label);
                }
            }
        }
    }

    #[test]
    fn pack_unpack_round_trip_and_ordering() {
        let v = MatrixVariable::spd("S", 3);
        let order: Vec<_> = (0..6).map(|k| v.index(k)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        let g = MatrixVariable::general("G", 2, 3);
        assert_eq!(g.index(4), (1, 1));
        let sys = reference_system();
        let p = assemble_synthesis_lmi(&sys, 0.5, 0.5, 1.0).unwrap();
        let x: Vec<f64> = (0..p.scalar_count()).map(|i| i as f64).collect();
        assert_eq!(p.pack(&p.unpack(&x)).unwrap(), x);
        assert_eq!(p.scalar_count(), 15 + 15 + 25 + 20 + 20 + 1);
    }

    #[test]
    fn coefficient_forms_reproduce_evaluation() {
        let sys = reference_system();
        let p = assemble_synthesis_lmi(&sys, 0.7, 0.3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_values(&p, &mut rng);
        let x = p.pack(&v).unwrap();
        for (form, c) in p.coefficient_forms().iter().zip(p.all_constraints()) {
            let mut f = form.constant.clone();
            for (i, a) in &form.coefficients {
                f += a * x[*i];
            }
            assert!((f - c.evaluate(&v).unwrap()).amax() < 1e-10);
        }
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let mut c = AffineMatrixInequality::new("c", 2);
        c.diagonal_scaled(0, 2, 1.0, "Z");
        let p = LmiProblem::new(vec![MatrixVariable::spd("P", 2)], vec![c]);
        assert!(matches!(p.validate(), Err(Error::MissingVariable(_))));
        assert!(p.constraints[0].evaluate(&p.zero_values()).is_err());
    }

    #[test]
    fn schur_scalar_cases() {
        assert!(schur_check(&scalar(-1.0), &scalar(0.5), &scalar(-1.0)).unwrap());
        assert!(!schur_check(&scalar(-1.0), &scalar(2.0), &scalar(-1.0)).unwrap());
        assert!(matches!(
            schur_check(&scalar(-1.0), &scalar(1.0), &scalar(0.0)),
            Err(Error::Singular(_))
        ));
        assert!(schur_check(&scalar(-1.0), &DMatrix::zeros(1, 2), &scalar(-1.0)).is_err());
    }

    #[test]
    fn epsilon_scales_with_constant() {
        let mut c = AffineMatrixInequality::new("c", 2);
        c.constant_block(0, 0, &DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 1.0, -3.0]));
        assert!((default_epsilon(&[c]) - 5e-7).abs() < 1e-20);
    }
}
