//! Interval rule `c1 < Xβ + γG + σ_G ε < c2`: the response is positive only
//! for perceived quality between two thresholds, so very strong profiles are
//! turned away as well as weak ones.
//!
//! Parameters are `θ = [c1, s, β…, γ, ω]` with `c2 = c1 + exp(s)`.

use crate::error::{Error, Result};
use crate::estimators::probit::{fit_plain_probit, HetProbitData, HetProbitOptions};
use crate::estimators::{FitResult, SeKind};
use crate::linalg::Matrix;
use crate::optimize::{minimize, numerical_hessian, Minimum};
use crate::scalar::{lit, Scalar};
use crate::special::{norm_cdf, norm_interval, norm_pdf, norm_sf};

/// Upper-tail masses below this everywhere mean the data never reach `c2`.
pub const FLAT_UPPER_TAIL: f64 = 1e-4;

fn bounds<T: Scalar>(data: &HetProbitData<T>, theta: &[T], i: usize) -> (T, T, T) {
    let p = data.x.len();
    let mut mu = theta[p + 2] * data.g[i];
    for (c, &b) in data.x.iter().zip(&theta[2..p + 2]) {
        mu += b * c[i];
    }
    let sigma = (theta[p + 3] * data.g[i]).exp();
    let c2 = theta[0] + theta[1].exp();
    ((theta[0] - mu) / sigma, (c2 - mu) / sigma, sigma)
}

fn row<T: Scalar>(data: &HetProbitData<T>, theta: &[T], i: usize, grad: Option<&mut [T]>) -> T {
    let (l, u, sigma) = bounds(data, theta, i);
    let tiny = T::min_positive_value();
    let one = data.y[i] == T::one();
    let prob = if one { norm_interval(l, u) } else { norm_cdf(l) + norm_sf(u) };
    let prob = prob.max(tiny);
    if let Some(g) = grad {
        let p = data.x.len();
        let (fl, fu) = (norm_pdf(l), norm_pdf(u));
        // ∂ln P/∂u and ∂ln P/∂l for the interval mass; negated for the complement.
        let sign = if one { T::one() } else { -T::one() };
        let du = sign * fu / prob;
        let dl = -sign * fl / prob;
        g[0] = (du + dl) / sigma;
        g[1] = du * theta[1].exp() / sigma;
        let dmu = -(du + dl) / sigma;
        for (k, c) in data.x.iter().enumerate() {
            g[k + 2] = dmu * c[i];
        }
        g[p + 2] = dmu * data.g[i];
        g[p + 3] = -(du * u + dl * l) * data.g[i];
    }
    prob.ln()
}

fn total<T: Scalar>(data: &HetProbitData<T>, theta: &[T], grad: &mut [T]) -> T {
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut gi = vec![T::zero(); theta.len()];
    let mut ll = T::zero();
    for i in 0..data.n() {
        ll += row(data, theta, i, Some(&mut gi));
        for (a, &b) in grad.iter_mut().zip(&gi) {
            *a += b;
        }
    }
    ll
}

/// Log-likelihood `Σ T ln[Φ(u)−Φ(l)] + (1−T) ln[1 − Φ(u) + Φ(l)]`.
pub fn two_threshold_loglik<T: Scalar>(data: &HetProbitData<T>, theta: &[T]) -> Result<T> {
    data.validate()?;
    if theta.len() != data.x.len() + 4 {
        return Err(Error::InvalidInput(format!("expected {} parameters, got {}", data.x.len() + 4, theta.len())));
    }
    Ok((0..data.n()).map(|i| row(data, theta, i, None)).sum())
}

/// Gradient of [`two_threshold_loglik`]; returns the log-likelihood.
pub fn two_threshold_gradient<T: Scalar>(data: &HetProbitData<T>, theta: &[T], grad: &mut [T]) -> Result<T> {
    two_threshold_loglik(data, theta)?;
    Ok(total(data, theta, grad))
}

#[derive(Debug, Clone)]
pub struct TwoThresholdResult<T> {
    pub lower: T,
    pub upper: T,
    pub beta: Vec<T>,
    pub gamma: T,
    pub omega: T,
    /// Set when every fitted upper-tail mass is below [`FLAT_UPPER_TAIL`],
    /// i.e. `c2` is not identified by the data.
    pub flat_upper: bool,
    /// Coefficients `c1, c2, X…, G, omega`.
    pub fit: FitResult<T>,
}

pub fn fit_two_threshold<T: Scalar>(
    data: &HetProbitData<T>,
    opts: &HetProbitOptions<T>,
) -> Result<TwoThresholdResult<T>> {
    data.validate()?;
    let ones = data.y.iter().filter(|&&v| v == T::one()).count();
    if ones == 0 || ones == data.n() {
        return Err(Error::Identification("outcome has a single value".into()));
    }
    let p = data.x.len();
    let k = p + 4;
    let nn = T::from_usize_lossy(data.n());
    let plain = fit_plain_probit(data, opts)?;
    let mut starts = Vec::new();
    // Single-threshold solution at a range of widths, then a centred grid.
    for &width in &[1.0, 3.0, 6.0] {
        for &w in &opts.omega_starts {
            let mut s = vec![T::zero(); k];
            s[0] = -plain.coef[0];
            s[1] = lit::<T>(width).ln();
            s[2..p + 2].copy_from_slice(&plain.coef[1..p + 1]);
            s[p + 2] = plain.coef[p + 1];
            s[p + 3] = w;
            starts.push(s);
        }
    }
    let mut best: Option<Minimum<T>> = None;
    let mut failed: Option<Minimum<T>> = None;
    for s in &starts {
        let m = minimize(
            |t: &[T], g: &mut [T]| {
                let ll = total(data, t, g);
                g.iter_mut().for_each(|v| *v = -*v / nn);
                -ll / nn
            },
            s,
            &opts.bfgs,
        );
        let slot = if m.converged { &mut best } else { &mut failed };
        if slot.as_ref().map_or(true, |b| m.value < b.value) {
            *slot = Some(m);
        }
    }
    let m = match best {
        Some(m) => m,
        None => {
            let f = failed.expect("starts are non-empty");
            return Err(Error::NonConvergence {
                iterations: f.iterations,
                best: -(f.value * nn).as_f64(),
                trace: f.trace.iter().map(|v| -(*v * nn).as_f64()).collect(),
            });
        }
    };
    let theta = m.x.clone();
    let upper = theta[0] + theta[1].exp();
    let flat_upper = (0..data.n()).all(|i| {
        let (_, u, _) = bounds(data, &theta, i);
        norm_sf(u) < lit(FLAT_UPPER_TAIL)
    });
    // With a flat upper tail the width parameter carries no information; its
    // variance is reported as infinite and the rest is estimated with it fixed.
    let free: Vec<usize> = if flat_upper { (0..k).filter(|&j| j != 1).collect() } else { (0..k).collect() };
    let mut full = theta.clone();
    let mut gk = vec![T::zero(); k];
    let h = numerical_hessian(
        |sub: &[T], out: &mut [T]| {
            for (&j, &v) in free.iter().zip(sub) {
                full[j] = v;
            }
            total(data, &full, &mut gk);
            for (o, &j) in out.iter_mut().zip(&free) {
                *o = -gk[j];
            }
        },
        &free.iter().map(|&j| theta[j]).collect::<Vec<_>>(),
        lit(1e-5),
    );
    let inv = h
        .cholesky(lit(1e-12))
        .map(|l| Matrix::spd_inverse_from_cholesky(&l))
        .map_err(|_| Error::Identification("information matrix is singular at the optimum".into()))?;
    let (sub, se_kind) = match &data.cluster {
        None => (inv, SeKind::InverseHessian),
        Some(c) => {
            let nc = c.iter().max().map_or(0, |m| m + 1);
            let f = free.len();
            let mut sums = vec![vec![T::zero(); f]; nc];
            let mut gi = vec![T::zero(); k];
            for i in 0..data.n() {
                row(data, &theta, i, Some(&mut gi));
                for (a, &j) in sums[c[i]].iter_mut().zip(&free) {
                    *a += gi[j];
                }
            }
            let mut used = vec![false; nc];
            c.iter().for_each(|&j| used[j] = true);
            if used.iter().filter(|&&u| u).count() < 2 {
                return Err(Error::InvalidInput("cluster-robust inference needs at least two clusters".into()));
            }
            let mut meat = Matrix::zeros(f, f);
            for (s, _) in sums.iter().zip(&used).filter(|(_, &u)| u) {
                meat.add_outer(T::one(), s, s);
            }
            let mut v = inv.matmul(&meat).matmul(&inv);
            v.symmetrize();
            (v, SeKind::Cluster("cluster".into()))
        }
    };
    let mut raw = Matrix::zeros(k, k);
    for (a, &ja) in free.iter().enumerate() {
        for (b, &jb) in free.iter().enumerate() {
            raw[(ja, jb)] = sub[(a, b)];
        }
    }
    let vcov = if flat_upper {
        // c2 = c1 + e^s with s unidentified.
        raw[(1, 1)] = T::infinity();
        raw
    } else {
        // Delta method from (c1, s) to (c1, c2 = c1 + e^s).
        let mut jac = Matrix::identity(k);
        jac[(1, 0)] = T::one();
        jac[(1, 1)] = theta[1].exp();
        let mut v = jac.sandwich(&raw);
        v.symmetrize();
        v
    };

    let mut coef = theta.clone();
    coef[1] = upper;
    let mut names = vec!["c1".to_string(), "c2".to_string()];
    names.extend(data.x_names.iter().cloned());
    names.push(data.group_name.clone());
    names.push("omega".to_string());
    Ok(TwoThresholdResult {
        lower: theta[0],
        upper,
        beta: theta[2..p + 2].to_vec(),
        gamma: theta[p + 2],
        omega: theta[p + 3],
        flat_upper,
        fit: FitResult {
            names,
            coef,
            vcov,
            se_kind,
            n_obs: data.n(),
            n_groups_absorbed: 0,
            r_squared: None,
            log_likelihood: Some(-m.value * nn),
            converged: Some(true),
            trace: m.trace.iter().map(|&v| -v * nn).collect(),
        },
    })
}
