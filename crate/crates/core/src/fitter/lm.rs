//! Box-constrained Levenberg-Marquardt.
//!
//! Each trial step solves `(JᵀJ + λ·diag(JᵀJ))·δ = -Jᵀr` and is projected
//! onto the bounds before the cost is evaluated. Parameters sitting on a
//! bound whose gradient points outward are held fixed for that step.
//! Accepted steps shrink λ, rejected ones grow it.
use nalgebra::{DMatrix, DVector};

pub trait LeastSquaresProblem {
    fn num_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Jacobian `∂r_i/∂p_j`, shape `num_residuals × params.len()`.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, p: &mut [f64]) {
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn active(&self, p: &[f64]) -> Vec<bool> {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| *v <= *lo || *v >= *hi)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_cost_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Half the residual sum of squares.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub active: Vec<bool>,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-15;
const LAMBDA_MAX: f64 = 1e16;

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn minimize<P: LeastSquaresProblem>(
    problem: &P,
    start: &[f64],
    bounds: &Bounds,
    settings: LmSettings,
) -> LmReport {
    let n = start.len();
    let m = problem.num_residuals();
    let mut x = start.to_vec();
    bounds.project(&mut x);

    let mut r = vec![0.0; m];
    problem.residuals(&x, &mut r);
    let mut cost = half_sq(&r);
    let mut jac = DMatrix::zeros(m, n);
    problem.jacobian(&x, &mut jac);

    let mut lambda = LAMBDA_INIT;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let mut damped = jtj.clone();
        let mut rhs = -grad;
        for i in 0..n {
            let pinned = (x[i] <= bounds.lower[i] && rhs[i] < 0.0)
                || (x[i] >= bounds.upper[i] && rhs[i] > 0.0);
            if pinned {
                damped.row_mut(i).fill(0.0);
                damped.column_mut(i).fill(0.0);
                damped[(i, i)] = 1.0;
                rhs[i] = 0.0;
            } else {
                let d = jtj[(i, i)].max(f64::MIN_POSITIVE);
                damped[(i, i)] += lambda * d;
            }
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&rhs)) else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                converged = true;
            }
            continue;
        };
        for i in 0..n {
            trial[i] = x[i] + step[i];
        }
        bounds.project(&mut trial);
        problem.residuals(&trial, &mut r_trial);
        let trial_cost = half_sq(&r_trial);

        if trial_cost.is_finite() && trial_cost < cost {
            let drop = (cost - trial_cost) / cost;
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut r, &mut r_trial);
            cost = trial_cost;
            problem.jacobian(&x, &mut jac);
            lambda = (lambda / 10.0).max(LAMBDA_MIN);
            if drop < settings.rel_cost_tol || cost == 0.0 {
                converged = true;
            }
        } else {
            lambda *= 10.0;
            // No descent left at any damping: a stationary point of the
            // projected problem.
            if lambda > LAMBDA_MAX {
                converged = true;
            }
        }
    }

    LmReport {
        active: bounds.active(&x),
        params: x,
        cost,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LeastSquaresProblem for Rosenbrock {
        fn num_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        }
        fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
            out[(0, 0)] = -20.0 * p[0];
            out[(0, 1)] = 10.0;
            out[(1, 0)] = -1.0;
            out[(1, 1)] = 0.0;
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let b = Bounds {
            lower: vec![-10.0, -10.0],
            upper: vec![10.0, 10.0],
        };
        let rep = minimize(&Rosenbrock, &[-1.2, 1.0], &b, LmSettings::default());
        assert!(rep.converged);
        assert!((rep.params[0] - 1.0).abs() < 1e-6);
        assert!((rep.params[1] - 1.0).abs() < 1e-6);
        assert!(rep.active.iter().all(|a| !a));
    }

    #[test]
    fn stops_on_active_bound() {
        let b = Bounds {
            lower: vec![-10.0, -10.0],
            upper: vec![0.5, 10.0],
        };
        let rep = minimize(&Rosenbrock, &[-1.2, 1.0], &b, LmSettings::default());
        assert!(rep.converged);
        assert_eq!(rep.params[0], 0.5);
        assert_eq!(rep.active, vec![true, false]);
    }
}
