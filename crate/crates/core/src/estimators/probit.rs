//! Probit with a group-specific error scale.
//!
//! `P(T=1) = Φ(z)`, `z = (a + Xβ + γG) / exp(ωG)`, where `a = −c′` is the
//! negated threshold. Observations with `G = 0` pin down `a` and `β`; the
//! `G = 1` rows then identify `γ` and `ω` separately as long as `X` moves the
//! index within that group.

use crate::error::{Error, Result};
use crate::estimators::{FitResult, SeKind};
use crate::linalg::Matrix;
use crate::optimize::{minimize, numerical_hessian, BfgsOptions, Minimum};
use crate::panel::Panel;
use crate::scalar::{lit, Scalar};
use crate::special::{chi2_1_sf, log_norm_cdf, mills, norm_cdf, norm_pdf};

/// Binary outcome, regressors, group indicator and optional cluster ids.
#[derive(Debug, Clone, PartialEq)]
pub struct HetProbitData<T> {
    pub y: Vec<T>,
    pub x_names: Vec<String>,
    pub x: Vec<Vec<T>>,
    pub group_name: String,
    pub g: Vec<T>,
    pub cluster: Option<Vec<usize>>,
}

fn is_binary<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|&x| x == T::zero() || x == T::one())
}

impl<T: Scalar> HetProbitData<T> {
    /// Splits `group` out of the panel columns; the rest become `X`.
    pub fn from_panel(panel: &Panel<T>, group: &str) -> Result<Self> {
        if panel.fe_group.is_some() {
            return Err(Error::InvalidInput("probit models do not absorb fixed effects".into()));
        }
        let gi = panel.column_index(group)?;
        let data = Self {
            y: panel.outcome.clone(),
            x_names: panel.names.iter().enumerate().filter(|&(i, _)| i != gi).map(|(_, n)| n.clone()).collect(),
            x: panel.columns.iter().enumerate().filter(|&(i, _)| i != gi).map(|(_, c)| c.clone()).collect(),
            group_name: group.to_string(),
            g: panel.columns[gi].clone(),
            cluster: panel.cluster.clone(),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Parameter count `1 + p + 2`.
    pub fn n_params(&self) -> usize {
        self.x.len() + 3
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::EmptyPanel);
        }
        if self.g.len() != n || self.x.iter().any(|c| c.len() != n) || self.x.len() != self.x_names.len() {
            return Err(Error::InvalidInput("probit columns differ in length".into()));
        }
        if !is_binary(&self.y) {
            return Err(Error::InvalidInput("probit outcome must be 0/1".into()));
        }
        if !is_binary(&self.g) {
            return Err(Error::InvalidInput(format!("group column `{}` must be 0/1", self.group_name)));
        }
        Ok(())
    }

    /// Both groups present with both outcomes, and some regressor varies
    /// inside each group.
    fn check_identified(&self) -> Result<()> {
        for grp in [T::zero(), T::one()] {
            let rows: Vec<usize> = (0..self.n()).filter(|&i| self.g[i] == grp).collect();
            let label = if grp == T::one() { "G=1" } else { "G=0" };
            let ones = rows.iter().filter(|&&i| self.y[i] == T::one()).count();
            if rows.is_empty() || ones == 0 || ones == rows.len() {
                return Err(Error::Identification(format!("{label} rows need both outcome values")));
            }
            let varies = self.x.iter().any(|c| rows.iter().any(|&i| c[i] != c[rows[0]]));
            if !varies {
                return Err(Error::Identification(format!(
                    "no regressor varies within {label}; level and scale are not separately identified"
                )));
            }
        }
        Ok(())
    }

    fn index(&self, theta: &[T], i: usize) -> T {
        let p = self.x.len();
        let mut v = theta[0] + theta[p + 1] * self.g[i];
        for (c, &b) in self.x.iter().zip(&theta[1..=p]) {
            v += b * c[i];
        }
        v
    }

    /// `z_i` and `exp(ω g_i)`.
    fn z(&self, theta: &[T], i: usize) -> (T, T) {
        let s = (theta[self.x.len() + 2] * self.g[i]).exp();
        (self.index(theta, i) / s, s)
    }

    /// Log-likelihood of row `i`; writes `∂ℓ_i/∂θ` when `grad` is given.
    fn row(&self, theta: &[T], i: usize, grad: Option<&mut [T]>) -> T {
        let (z, s) = self.z(theta, i);
        let one = self.y[i] == T::one();
        let ll = if one { log_norm_cdf(z) } else { log_norm_cdf(-z) };
        if let Some(g) = grad {
            let lam = if one { mills(z) } else { -mills(-z) };
            let p = self.x.len();
            let w = lam / s;
            g[0] = w;
            for (k, c) in self.x.iter().enumerate() {
                g[k + 1] = w * c[i];
            }
            g[p + 1] = w * self.g[i];
            g[p + 2] = -lam * z * self.g[i];
        }
        ll
    }
}

/// `Σ T ln Φ(z) + (1−T) ln Φ(−z)` with `θ = [a, β…, γ, ω]`.
pub fn het_probit_loglik<T: Scalar>(data: &HetProbitData<T>, theta: &[T]) -> Result<T> {
    data.validate()?;
    check_len(data, theta)?;
    Ok((0..data.n()).map(|i| data.row(theta, i, None)).sum())
}

/// Log-likelihood and its gradient.
pub fn het_probit_gradient<T: Scalar>(data: &HetProbitData<T>, theta: &[T], grad: &mut [T]) -> Result<T> {
    data.validate()?;
    check_len(data, theta)?;
    Ok(total_with_grad(data, theta, grad))
}

fn check_len<T: Scalar>(data: &HetProbitData<T>, theta: &[T]) -> Result<()> {
    if theta.len() != data.n_params() {
        return Err(Error::InvalidInput(format!("expected {} parameters, got {}", data.n_params(), theta.len())));
    }
    Ok(())
}

fn total_with_grad<T: Scalar>(data: &HetProbitData<T>, theta: &[T], grad: &mut [T]) -> T {
    let k = theta.len();
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut gi = vec![T::zero(); k];
    let mut ll = T::zero();
    for i in 0..data.n() {
        ll += data.row(theta, i, Some(&mut gi));
        for (a, &b) in grad.iter_mut().zip(&gi) {
            *a += b;
        }
    }
    ll
}

/// Per-observation scores summed within clusters.
fn cluster_meat<T: Scalar>(data: &HetProbitData<T>, theta: &[T], clusters: &[usize]) -> Result<Matrix<T>> {
    let k = theta.len();
    let nc = clusters.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![T::zero(); k]; nc];
    let mut seen = vec![false; nc];
    let mut gi = vec![T::zero(); k];
    for i in 0..data.n() {
        data.row(theta, i, Some(&mut gi));
        seen[clusters[i]] = true;
        for (a, &b) in sums[clusters[i]].iter_mut().zip(&gi) {
            *a += b;
        }
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::InvalidInput("cluster-robust inference needs at least two clusters".into()));
    }
    let mut meat = Matrix::zeros(k, k);
    for (s, _) in sums.iter().zip(&seen).filter(|(_, &u)| u) {
        meat.add_outer(T::one(), s, s);
    }
    Ok(meat)
}

/// Inverse Hessian of the negative log-likelihood, or the cluster sandwich
/// around it when `clusters` is given. `free` selects the estimated
/// parameters; the others are held at their values in `theta`.
fn mle_vcov<T, G>(mut grad: G, theta: &[T], free: &[usize], meat: Option<Matrix<T>>) -> Result<Matrix<T>>
where
    T: Scalar,
    G: FnMut(&[T], &mut [T]),
{
    let mut full = theta.to_vec();
    let k = theta.len();
    let mut g = vec![T::zero(); k];
    let h = numerical_hessian(
        |sub: &[T], out: &mut [T]| {
            for (&j, &v) in free.iter().zip(sub) {
                full[j] = v;
            }
            grad(&full, &mut g);
            for (o, &j) in out.iter_mut().zip(free) {
                *o = -g[j];
            }
        },
        &free.iter().map(|&j| theta[j]).collect::<Vec<_>>(),
        lit(1e-5),
    );
    let l = h
        .cholesky(lit(1e-12))
        .map_err(|_| Error::Identification("information matrix is singular at the optimum".into()))?;
    let inv = Matrix::spd_inverse_from_cholesky(&l);
    Ok(match meat {
        None => inv,
        Some(m) => {
            let sub = Matrix::from_row_major(
                free.len(),
                free.len(),
                free.iter().flat_map(|&a| free.iter().map(move |&b| (a, b))).map(|(a, b)| m[(a, b)]).collect(),
            );
            let mut v = inv.matmul(&sub).matmul(&inv);
            v.symmetrize();
            v
        }
    })
}

#[derive(Debug, Clone)]
pub struct HetProbitOptions<T> {
    pub bfgs: BfgsOptions<T>,
    /// Starting values of ω tried from the plain-probit solution.
    pub omega_starts: Vec<T>,
}

impl<T: Scalar> Default for HetProbitOptions<T> {
    fn default() -> Self {
        let tol = lit::<T>(1e-8).max(T::epsilon() * lit(100.0));
        Self {
            bfgs: BfgsOptions { grad_tol: tol, ..BfgsOptions::default() },
            omega_starts: vec![lit(-0.5), T::zero(), lit(0.5)],
        }
    }
}

/// Minimizes the mean negative log-likelihood over the `free` parameters.
fn fit_subset<T: Scalar>(
    data: &HetProbitData<T>,
    start: &[T],
    free: &[usize],
    opts: &BfgsOptions<T>,
) -> (Vec<T>, Minimum<T>) {
    let nn = T::from_usize_lossy(data.n());
    let mut full = start.to_vec();
    let mut g = vec![T::zero(); start.len()];
    let x0: Vec<T> = free.iter().map(|&j| start[j]).collect();
    let m = minimize(
        |sub: &[T], out: &mut [T]| {
            for (&j, &v) in free.iter().zip(sub) {
                full[j] = v;
            }
            let ll = total_with_grad(data, &full, &mut g);
            for (o, &j) in out.iter_mut().zip(free) {
                *o = -g[j] / nn;
            }
            -ll / nn
        },
        &x0,
        opts,
    );
    let mut theta = start.to_vec();
    for (&j, &v) in free.iter().zip(&m.x) {
        theta[j] = v;
    }
    (theta, m)
}

fn non_convergence<T: Scalar>(m: &Minimum<T>, n: usize) -> Error {
    let scale = n as f64;
    Error::NonConvergence {
        iterations: m.iterations,
        best: -m.value.as_f64() * scale,
        trace: m.trace.iter().map(|v| -v.as_f64() * scale).collect(),
    }
}

/// Probit of the outcome on `const`, `X` and the group indicator with a
/// common error scale; the naive audit-study regression.
pub fn fit_plain_probit<T: Scalar>(data: &HetProbitData<T>, opts: &HetProbitOptions<T>) -> Result<FitResult<T>> {
    data.validate()?;
    let k = data.n_params();
    let free: Vec<usize> = (0..k - 1).collect();
    let (theta, m) = fit_subset(data, &vec![T::zero(); k], &free, &opts.bfgs);
    if !m.converged {
        return Err(non_convergence(&m, data.n()));
    }
    let meat = match &data.cluster {
        Some(c) => Some(cluster_meat(data, &theta, c)?),
        None => None,
    };
    let se_kind = if meat.is_some() { SeKind::Cluster("cluster".into()) } else { SeKind::InverseHessian };
    let vcov = mle_vcov(
        |t, g| {
            total_with_grad(data, t, g);
        },
        &theta,
        &free,
        meat,
    )?;
    let mut names = vec!["const".to_string()];
    names.extend(data.x_names.iter().cloned());
    names.push(data.group_name.clone());
    let nn = T::from_usize_lossy(data.n());
    Ok(FitResult {
        names,
        coef: theta[..k - 1].to_vec(),
        vcov,
        se_kind,
        n_obs: data.n(),
        n_groups_absorbed: 0,
        r_squared: None,
        log_likelihood: Some(-m.value * nn),
        converged: Some(true),
        trace: m.trace.iter().map(|&v| -v * nn).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest<T> {
    pub stat: T,
    pub p_value: T,
}

/// Effect of moving the group indicator, split into a shift of the mean
/// index and a change of its scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginals<T> {
    pub total: T,
    pub level: T,
    pub variance: T,
}

/// Marginals at regressor means `x_bar` and group share `g_bar`, treating
/// `G` as continuous: `∂Φ(z)/∂G = φ(z)(γ/e^{ωG} − ωz)`.
pub fn het_probit_marginals<T: Scalar>(theta: &[T], x_bar: &[T], g_bar: T) -> Marginals<T> {
    let p = x_bar.len();
    let (a, gamma, omega) = (theta[0], theta[p + 1], theta[p + 2]);
    let mut idx = a + gamma * g_bar;
    for (&b, &x) in theta[1..=p].iter().zip(x_bar) {
        idx += b * x;
    }
    let s = (omega * g_bar).exp();
    let z = idx / s;
    let phi = norm_pdf(z);
    let level = phi * gamma / s;
    let variance = -phi * z * omega;
    Marginals { total: level + variance, level, variance }
}

/// Fitted probability at regressor means as a function of a continuous `G`.
pub fn het_probit_probability<T: Scalar>(theta: &[T], x_bar: &[T], g: T) -> T {
    let p = x_bar.len();
    let mut idx = theta[0] + theta[p + 1] * g;
    for (&b, &x) in theta[1..=p].iter().zip(x_bar) {
        idx += b * x;
    }
    norm_cdf(idx / (theta[p + 2] * g).exp())
}

#[derive(Debug, Clone)]
pub struct HetProbitResult<T> {
    /// `a = −c′`.
    pub intercept: T,
    pub threshold: T,
    pub beta: Vec<T>,
    /// Taste and mean-belief shift together; the two are not separable.
    pub gamma_combined: T,
    pub omega: T,
    pub sigma_ratio: T,
    /// Test of `exp(ω) = 1`.
    pub wald: WaldTest<T>,
    pub marginals: Marginals<T>,
    /// Coefficients `const, X…, G, omega` with their covariance.
    pub fit: FitResult<T>,
    /// Log-likelihood reached from each ω start (`None` when that start did
    /// not converge).
    pub starts: Vec<(T, Option<T>)>,
}

impl<T: Scalar> HetProbitResult<T> {
    pub fn theta(&self) -> &[T] {
        &self.fit.coef
    }
}

pub fn fit_het_probit<T: Scalar>(data: &HetProbitData<T>, opts: &HetProbitOptions<T>) -> Result<HetProbitResult<T>> {
    data.validate()?;
    data.check_identified()?;
    let k = data.n_params();
    let plain: Vec<usize> = (0..k - 1).collect();
    let (theta0, _) = fit_subset(data, &vec![T::zero(); k], &plain, &opts.bfgs);
    let all: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<T>, Minimum<T>)> = None;
    let mut worst_failure: Option<Minimum<T>> = None;
    let mut starts = Vec::new();
    for &w in &opts.omega_starts {
        let mut s = theta0.clone();
        s[k - 1] = w;
        let (theta, m) = fit_subset(data, &s, &all, &opts.bfgs);
        starts.push((w, m.converged.then(|| -m.value * T::from_usize_lossy(data.n()))));
        if m.converged {
            if best.as_ref().map_or(true, |(_, b)| m.value < b.value) {
                best = Some((theta, m));
            }
        } else if worst_failure.as_ref().map_or(true, |b| m.value < b.value) {
            worst_failure = Some(m);
        }
    }
    let (theta, m) = match best {
        Some(b) => b,
        None => return Err(non_convergence(&worst_failure.expect("at least one start"), data.n())),
    };
    let meat = match &data.cluster {
        Some(c) => Some(cluster_meat(data, &theta, c)?),
        None => None,
    };
    let se_kind = if meat.is_some() { SeKind::Cluster("cluster".into()) } else { SeKind::InverseHessian };
    let vcov = mle_vcov(
        |t, g| {
            total_with_grad(data, t, g);
        },
        &theta,
        &all,
        meat,
    )?;

    let omega = theta[k - 1];
    let ratio = omega.exp();
    let se_ratio = ratio * vcov[(k - 1, k - 1)].max(T::zero()).sqrt();
    let stat = ((ratio - T::one()) / se_ratio).powi(2);
    let nn = T::from_usize_lossy(data.n());
    let x_bar: Vec<T> = data.x.iter().map(|c| c.iter().copied().sum::<T>() / nn).collect();
    let g_bar = data.g.iter().copied().sum::<T>() / nn;

    let mut names = vec!["const".to_string()];
    names.extend(data.x_names.iter().cloned());
    names.push(data.group_name.clone());
    names.push("omega".to_string());
    Ok(HetProbitResult {
        intercept: theta[0],
        threshold: -theta[0],
        beta: theta[1..k - 2].to_vec(),
        gamma_combined: theta[k - 2],
        omega,
        sigma_ratio: ratio,
        wald: WaldTest { stat, p_value: chi2_1_sf(stat) },
        marginals: het_probit_marginals(&theta, &x_bar, g_bar),
        fit: FitResult {
            names,
            coef: theta.clone(),
            vcov,
            se_kind,
            n_obs: data.n(),
            n_groups_absorbed: 0,
            r_squared: None,
            log_likelihood: Some(-m.value * nn),
            converged: Some(true),
            trace: m.trace.iter().map(|&v| -v * nn).collect(),
        },
        starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sim::{simulate_latent_panel, LatentDesign};
    use rand::Rng as _;

    fn fixture() -> HetProbitData<f64> {
        HetProbitData {
            y: vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            x_names: vec!["x".into()],
            x: vec![vec![0.3, -1.2, 2.0, 0.1, -0.4, 0.9, 1.5, -2.2, 0.0, 0.6]],
            group_name: "g".into(),
            g: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            cluster: None,
        }
    }

    #[test]
    fn single_observation_at_zero() {
        let d = HetProbitData {
            y: vec![1.0],
            x_names: vec![],
            x: vec![],
            group_name: "g".into(),
            g: vec![1.0],
            cluster: None,
        };
        let ll = het_probit_loglik(&d, &[0.0, 0.0, 0.7]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_summation() {
        let d = fixture();
        let theta = [0.2, 0.8, -0.3, 0.4];
        let mut want = 0.0;
        for i in 0..10 {
            let s = (0.4 * d.g[i]).exp();
            let z = (0.2 + 0.8 * d.x[0][i] - 0.3 * d.g[i]) / s;
            let p = statrs::function::erf::erfc(-z / 2f64.sqrt()) / 2.0;
            want += if d.y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
        }
        assert!((het_probit_loglik(&d, &theta).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn zero_omega_is_plain_probit() {
        let d = fixture();
        let theta = [0.2, 0.8, -0.3, 0.0];
        let plain: f64 = (0..10)
            .map(|i| {
                let z = (0.2 + -0.3 * d.g[i]) + 0.8 * d.x[0][i];
                if d.y[i] == 1.0 {
                    log_norm_cdf(z)
                } else {
                    log_norm_cdf(-z)
                }
            })
            .sum();
        assert_eq!(het_probit_loglik(&d, &theta).unwrap(), plain);
    }

    #[test]
    fn non_binary_group_rejected() {
        let mut d = fixture();
        d.g[0] = 2.0;
        assert!(het_probit_loglik(&d, &[0.0; 4]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = fixture();
        let mut rng = seeded(3);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; 4];
            het_probit_gradient(&d, &theta, &mut g).unwrap();
            for j in 0..4 {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let fd = (het_probit_loglik(&d, &tp).unwrap() - het_probit_loglik(&d, &tm).unwrap()) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * g[j].abs().max(1e-3), "{j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn marginal_decomposition() {
        let theta: [f64; 4] = [0.1, 0.7, 0.25, -0.3];
        let m = het_probit_marginals(&theta, &[0.4], 0.45);
        assert!((m.level + m.variance - m.total).abs() < 1e-15);
        let h: f64 = 1e-5;
        let fd = (het_probit_probability(&theta, &[0.4], 0.45 + h) - het_probit_probability(&theta, &[0.4], 0.45 - h))
            / (2.0 * h);
        assert!((m.total - fd).abs() < 1e-6);
        assert_eq!(het_probit_marginals(&[0.1, 0.7, 0.25, 0.0], &[0.4], 0.45).variance, 0.0);
        assert_eq!(het_probit_marginals(&[0.1, 0.7, 0.0, 0.3], &[0.4], 0.45).level, 0.0);
    }

    #[test]
    fn constant_regressor_not_identified() {
        let mut d = fixture();
        d.x[0] = vec![1.0; 10];
        assert!(matches!(fit_het_probit(&d, &HetProbitOptions::default()), Err(Error::Identification(_))));
    }

    #[test]
    fn recovers_level_and_scale() {
        let design = LatentDesign { n: 20_000, gamma: 0.3, omega: 0.8f64.ln(), ..LatentDesign::default() };
        let panel = simulate_latent_panel(&mut seeded(11), &design).unwrap();
        let d = HetProbitData::from_panel(&panel, "female").unwrap();
        let r = fit_het_probit(&d, &HetProbitOptions::default()).unwrap();
        assert!((r.gamma_combined - 0.3).abs() < 0.08, "{}", r.gamma_combined);
        assert!((r.sigma_ratio - 0.8).abs() < 0.08, "{}", r.sigma_ratio);
        assert!(r.fit.vcov.is_symmetric(1e-12));
        assert!(r.wald.p_value < 0.05);
        let plain = fit_plain_probit(&d, &HetProbitOptions::default()).unwrap();
        assert!(plain.log_likelihood.unwrap() <= r.fit.log_likelihood.unwrap() + 1e-8);
    }
}
