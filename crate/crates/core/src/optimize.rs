//! BFGS with a backtracking Armijo line search.

use crate::linalg::{dot, Matrix};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone)]
pub struct BfgsOptions<T> {
    /// Converged once the gradient max-norm falls below this.
    pub grad_tol: T,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl<T: Scalar> Default for BfgsOptions<T> {
    fn default() -> Self {
        Self { grad_tol: lit(1e-8), max_iter: 500, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step.
    pub trace: Vec<T>,
}

impl<T: Scalar> Minimum<T> {
    pub fn grad_max_norm(&self) -> T {
        max_norm(&self.grad)
    }
}

fn max_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the objective and writes the gradient.
pub fn minimize<T, F>(mut f: F, x0: &[T], opts: &BfgsOptions<T>) -> Minimum<T>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]) -> T,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g);
    let mut trace = vec![fx];
    let mut h = Matrix::<T>::identity(n);
    let mut first_step = true;

    let mut x_new = vec![T::zero(); n];
    let mut g_new = vec![T::zero(); n];

    for iter in 0..opts.max_iter {
        let gnorm = max_norm(&g);
        if gnorm < opts.grad_tol {
            return Minimum { x, value: fx, grad: g, iterations: iter, converged: true, trace };
        }
        let mut dir: Vec<T> = h.matvec(&g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < T::zero()) {
            h = Matrix::identity(n);
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
            first_step = true;
        }
        let mut step = if first_step {
            // keep the first, unscaled steepest-descent step modest
            T::one().min(T::one() / max_norm(&dir).max(T::min_positive_value()))
        } else {
            T::one()
        };

        let c1 = lit::<T>(1e-4);
        let flat_tol = fx.abs().max(T::one()) * T::epsilon() * lit(16.0);
        let mut accepted = false;
        let mut fnew = fx;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            fnew = f(&x_new, &mut g_new);
            if fnew.is_finite() {
                if fnew <= fx + c1 * step * slope {
                    accepted = true;
                    break;
                }
                // Near the optimum the objective is flat to rounding; accept
                // steps that still shrink the gradient.
                if fnew <= fx + flat_tol && max_norm(&g_new) < gnorm {
                    accepted = true;
                    break;
                }
            }
            step *= lit(0.5);
        }
        if !accepted {
            if first_step {
                return Minimum { x, value: fx, grad: g, iterations: iter, converged: false, trace };
            }
            // Reset curvature and retry as steepest descent.
            h = Matrix::identity(n);
            first_step = true;
            continue;
        }

        let s: Vec<T> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<T> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if first_step {
                // Scale the initial inverse Hessian.
                let yy = dot(&y, &y);
                h = Matrix::identity(n);
                h.scale(sy / yy);
            }
            let rho = T::one() / sy;
            let hy = h.matvec(&y);
            let yhy = dot(&y, &hy);
            // H ← H − ρ(Hy sᵀ + s yᵀH) + (ρ² yᵀHy + ρ) s sᵀ
            h.add_outer(-rho, &hy, &s);
            h.add_outer(-rho, &s, &hy);
            h.add_outer(rho * rho * yhy + rho, &s, &s);
            h.symmetrize();
            first_step = false;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = fnew;
        trace.push(fx);
    }
    let converged = max_norm(&g) < opts.grad_tol;
    Minimum { x, value: fx, grad: g, iterations: opts.max_iter, converged, trace }
}

/// Hessian by central differences of an analytic gradient.
pub fn numerical_hessian<T, G>(mut grad: G, x: &[T], rel_step: T) -> Matrix<T>
where
    T: Scalar,
    G: FnMut(&[T], &mut [T]),
{
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut gp = vec![T::zero(); n];
    let mut gm = vec![T::zero(); n];
    for j in 0..n {
        let h = rel_step * x[j].abs().max(T::one());
        xp[j] = x[j] + h;
        grad(&xp, &mut gp);
        xp[j] = x[j] - h;
        grad(&xp, &mut gm);
        xp[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (h + h);
        }
    }
    hess.symmetrize();
    hess
}
