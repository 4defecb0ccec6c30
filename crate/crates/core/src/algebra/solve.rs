use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, norm, ComplexMatrix, SparseOperator, VectorizedState, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// A square linear operator in dense or sparse storage.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Dense(ComplexMatrix),
    Sparse(SparseOperator),
}

impl Operator {
    pub fn rows(&self) -> usize {
        match self {
            Operator::Dense(m) => m.rows(),
            Operator::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Operator::Dense(m) => m.cols(),
            Operator::Sparse(s) => s.cols(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Operator::Dense(_))
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Operator::Dense(m) => {
                let out = m.mul_vec(x);
                y.copy_from_slice(&out);
            }
            Operator::Sparse(s) => s.mul_vec_into(x, y),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        match self {
            Operator::Dense(m) => Operator::Dense(m.adjoint()),
            Operator::Sparse(s) => Operator::Sparse(s.adjoint()),
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Sparse(s) => s.to_dense(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Operator::Dense(m) => m.frobenius_norm(),
            Operator::Sparse(s) => s.frobenius_norm(),
        }
    }

    /// `alpha·I + beta·A`, keeping the storage kind.
    pub fn shifted(&self, alpha: C64, beta: C64) -> Self {
        let n = self.rows();
        match self {
            Operator::Dense(m) => {
                let mut out = m.scale(beta);
                for i in 0..n {
                    out[(i, i)] += alpha;
                }
                Operator::Dense(out)
            }
            Operator::Sparse(s) => Operator::Sparse(
                SparseOperator::scaled_identity(n, alpha)
                    .add_scaled(s, beta)
                    .expect("identity has the operator's shape"),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// LU factorization (dense or sparse).
    #[default]
    Direct,
    /// Restarted GMRES without preconditioning.
    Iterative,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub rtol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub initial_guess: Option<Vec<C64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, rtol: 1e-10, max_iterations: 20_000, restart: 80, initial_guess: None }
    }
}

impl SolveOptions {
    pub fn with_method(method: SolveMethod) -> Self {
        Self { method, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: VectorizedState,
    /// `‖A x − b‖₂ / ‖b‖₂`
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solves `a · x = b`.
///
/// Direct solves are accepted when the normwise backward error
/// `‖Ax − b‖ / (‖A‖_F ‖x‖ + ‖b‖)` is below `rtol`; iterative solves when the
/// relative residual `‖Ax − b‖ / ‖b‖` is.
pub fn solve_linear(a: &Operator, b: &VectorizedState, opts: &SolveOptions) -> Result<SolveReport> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("system matrix is {}x{}", n, a.cols())));
    }
    if b.dim() != n {
        return Err(Error::Dimension(format!("right-hand side has length {}, expected {n}", b.dim())));
    }
    match opts.method {
        SolveMethod::Direct => solve_direct(a, b.as_slice(), opts.rtol),
        SolveMethod::Iterative => {
            let (x, iterations, rel) =
                gmres(|x, y| a.mul_vec_into(x, y), b.as_slice(), opts.initial_guess.as_deref(), opts)?;
            Ok(SolveReport { solution: VectorizedState::new(x), relative_residual: rel, iterations })
        }
    }
}

fn solve_direct(a: &Operator, b: &[C64], rtol: f64) -> Result<SolveReport> {
    let n = b.len();
    let rhs = Mat::<C64>::from_fn(n, 1, |i, _| b[i]);
    let sol = match a {
        Operator::Dense(m) => m.as_faer().partial_piv_lu().solve(&rhs),
        Operator::Sparse(s) => {
            let lu = s
                .to_faer()?
                .sp_lu()
                .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
            lu.solve(&rhs)
        }
    };
    let x: Vec<C64> = sol.col(0).iter().copied().collect();
    let residual = residual_norm(a, &x, b);
    let bnorm = norm(b);
    let rel = if bnorm > 0.0 { residual / bnorm } else { residual };
    let backward = residual / (a.frobenius_norm() * norm(&x) + bnorm).max(f64::MIN_POSITIVE);
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || !(backward <= rtol) {
        return Err(Error::Solver { residual: rel, iterations: 1 });
    }
    Ok(SolveReport { solution: VectorizedState::new(x), relative_residual: rel, iterations: 1 })
}

fn residual_norm(a: &Operator, x: &[C64], b: &[C64]) -> f64 {
    let ax = a.mul_vec(x);
    ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with modified Gram–Schmidt (applied twice) and complex
/// Givens rotations. Returns the solution, the number of operator
/// applications and the final relative residual.
pub fn gmres(
    apply: impl Fn(&[C64], &mut [C64]),
    b: &[C64],
    x0: Option<&[C64]>,
    opts: &SolveOptions,
) -> Result<(Vec<C64>, usize, f64)> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![ZERO; n], 0, 0.0));
    }
    let m = opts.restart.clamp(1, n.max(1));
    let target = opts.rtol * bnorm;

    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(Error::Dimension(format!("initial guess has length {}, expected {n}", g.len())))
        }
        None => vec![ZERO; n],
    };
    let mut work = vec![ZERO; n];
    let residual = |x: &[C64], work: &mut Vec<C64>| -> Vec<C64> {
        apply(x, work);
        b.iter().zip(work.iter()).map(|(bi, ai)| bi - ai).collect()
    };

    let mut r = residual(&x, &mut work);
    let mut beta = norm(&r);
    let mut iterations = 0usize;

    while beta > target {
        if iterations >= opts.max_iterations {
            return Err(Error::Solver { residual: beta / bnorm, iterations });
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|z| z / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;

        for j in 0..m {
            let mut w = vec![ZERO; n];
            apply(&basis[j], &mut w);
            iterations += 1;
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let coeff = dot(v, &w);
                    h[i][j] += coeff;
                    axpy(-coeff, v, &mut w);
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = C64::new(hnext, 0.0);

            for i in 0..j {
                let (a, bb) = (h[i][j], h[i + 1][j]);
                h[i][j] = cs[i] * a + sn[i] * bb;
                h[i + 1][j] = -sn[i].conj() * a + cs[i] * bb;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let rho = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = ZERO;
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = ONE;
            } else {
                cs[j] = a.norm() / rho;
                sn[j] = (a / a.norm()) * bb.conj() / rho;
            }
            h[j][j] = cs[j] * a + sn[j] * bb;
            h[j + 1][j] = ZERO;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            k = j + 1;

            let breakdown = hnext <= 1e-14 * bnorm;
            if g[j + 1].norm() <= target || breakdown || iterations >= opts.max_iterations {
                break;
            }
            basis.push(w.iter().map(|z| z / hnext).collect());
        }

        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in (i + 1)..k {
                acc -= h[i][l] * y[l];
            }
            if h[i][i] == ZERO {
                return Err(Error::Solver { residual: beta / bnorm, iterations });
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        let previous = beta;
        r = residual(&x, &mut work);
        beta = norm(&r);
        if beta > target && beta >= previous * (1.0 - 1e-12) && k < m {
            // Krylov space exhausted without progress.
            return Err(Error::Solver { residual: beta / bnorm, iterations });
        }
    }
    Ok((x, iterations, beta / bnorm))
}
