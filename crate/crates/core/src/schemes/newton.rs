use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix, SparseLu};

/// Outcome of a converged Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Residual norms, starting with the residual at the initial guess.
    pub trace: Vec<f64>,
}

/// Newton's method with sparse LU linear solves. The symbolic factorization
/// is kept between calls, so repeated solves on one pattern only refactor
/// numerically.
#[derive(Debug)]
pub struct Newton {
    pub tol: f64,
    pub max_iter: usize,
    lu: SparseLu,
}

impl Newton {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, lu: SparseLu::new() }
    }

    /// Drive `residual(x)` to `‖R‖₂ ≤ tol · max(1, ‖R(guess)‖₂)`.
    ///
    /// `residual` returns `R(x)`; `jacobian` returns `R'(x)`.
    pub fn solve(
        &mut self,
        mut residual: impl FnMut(&[f64]) -> Result<Vec<f64>>,
        mut jacobian: impl FnMut(&[f64]) -> Result<CsrMatrix>,
        guess: Vec<f64>,
    ) -> Result<NewtonResult> {
        let mut x = guess;
        let mut r = residual(&x)?;
        let r0 = norm2(&r);
        let target = self.tol * r0.max(1.0);
        let mut trace = vec![r0];
        let mut iterations = 0;
        let mut rnorm = r0;
        while rnorm > target {
            if iterations == self.max_iter || !rnorm.is_finite() {
                return Err(Error::NewtonFailure { iterations, trace });
            }
            let jac = jacobian(&x)?;
            self.lu.factor(&jac)?;
            let mut delta = r;
            self.lu.solve_in_place(&mut delta)?;
            for (xi, di) in x.iter_mut().zip(&delta) {
                *xi -= di;
            }
            iterations += 1;
            r = residual(&x)?;
            rnorm = norm2(&r);
            trace.push(rnorm);
        }
        Ok(NewtonResult { solution: x, iterations, trace })
    }
}

/// One-shot Newton solve with a fresh factorization cache.
pub fn newton_solve(
    residual: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    jacobian: impl FnMut(&[f64]) -> Result<CsrMatrix>,
    guess: Vec<f64>,
    tol: f64,
    maxit: usize,
) -> Result<NewtonResult> {
    Newton::new(tol, maxit).solve(residual, jacobian, guess)
}
