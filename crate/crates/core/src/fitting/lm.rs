//! Levenberg–Marquardt for small dense problems with analytic Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub initial_damping: f64,
    pub damping_factor: f64,
    pub relative_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { initial_damping: 1e-3, damping_factor: 10.0, relative_tolerance: 1e-10, max_iterations: 200 }
    }
}

/// A least-squares problem: residual vector r(p) and its Jacobian ∂r/∂p.
pub trait Problem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: DVector<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    pub iterations: usize,
    /// (JᵀJ)⁻¹ · SSR/(m − n), evaluated at the solution.
    pub covariance: DMatrix<f64>,
}

fn ssr(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

pub fn solve<P: Problem>(problem: &P, p0: DVector<f64>, opts: &LmOptions) -> Result<LmSolution> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if p0.len() != n {
        return Err(Error::domain(format!("expected {n} parameters, got {}", p0.len())));
    }
    if m < n {
        return Err(Error::domain(format!("{m} residuals cannot constrain {n} parameters")));
    }

    let mut p = p0;
    let mut r = problem.residuals(&p);
    let mut cost = ssr(&r);
    if !cost.is_finite() {
        return Err(Error::domain("initial parameters give non-finite residuals"));
    }
    let mut lambda = opts.initial_damping;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let j = problem.jacobian(&p);
        let jtj = j.tr_mul(&j);
        let g = j.tr_mul(&r);
        let max_diag = jtj.diagonal().max().max(f64::MIN_POSITIVE);

        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * max_diag);
            }
            let step = a.cholesky().map(|c| c.solve(&(-&g)));
            if let Some(step) = step {
                let trial = &p + &step;
                let r_trial = problem.residuals(&trial);
                let c_trial = ssr(&r_trial);
                if c_trial.is_finite() && c_trial < cost {
                    let rel = (cost - c_trial) / cost;
                    p = trial;
                    r = r_trial;
                    cost = c_trial;
                    lambda = (lambda / opts.damping_factor).max(1e-15);
                    converged = rel < opts.relative_tolerance || cost == 0.0;
                    break;
                }
            }
            lambda *= opts.damping_factor;
            if lambda > 1e20 {
                // no descent direction left: at a minimum to machine precision
                converged = true;
                break;
            }
        }
    }

    if !converged {
        return Err(Error::NonConvergence { iterations, cost, best: p.iter().copied().collect() });
    }

    let j = problem.jacobian(&p);
    let jtj = j.tr_mul(&j);
    let inv = match jtj.clone().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
        _ => {
            let tol = 1e-14 * jtj.norm();
            jtj.pseudo_inverse(tol)
        }
        .map_err(|e| Error::Degenerate(e.to_string()))?,
    };
    let dof = (m - n).max(1) as f64;
    let covariance = inv * (cost / dof);
    Ok(LmSolution { params: p, ssr: cost, iterations, covariance })
}
