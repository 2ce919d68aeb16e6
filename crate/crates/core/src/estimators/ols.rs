//! Least squares with absorbed fixed effects.

use crate::error::{Error, Result};
use crate::estimators::{FitResult, SeKind};
use crate::linalg::{dot, Matrix};
use crate::panel::Panel;
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcovKind {
    Classical,
    /// HC0 sandwich.
    Robust,
    /// Sums scores within the panel's cluster ids (no small-sample factor).
    Cluster,
}

#[derive(Debug, Clone)]
pub struct OlsFit<T> {
    pub fit: FitResult<T>,
    pub residuals: Vec<T>,
}

fn group_means<T: Scalar>(v: &[T], groups: &[usize], n_groups: usize) -> Vec<T> {
    let mut sum = vec![T::zero(); n_groups];
    let mut cnt = vec![0usize; n_groups];
    for (&x, &g) in v.iter().zip(groups) {
        sum[g] += x;
        cnt[g] += 1;
    }
    sum.iter().zip(&cnt).map(|(&s, &c)| if c == 0 { T::zero() } else { s / T::from_usize_lossy(c) }).collect()
}

fn demean<T: Scalar>(v: &[T], groups: &[usize], n_groups: usize) -> Vec<T> {
    let m = group_means(v, groups, n_groups);
    v.iter().zip(groups).map(|(&x, &g)| x - m[g]).collect()
}

/// `(XᵀX)⁻¹ Xᵀ diag(e²) X (XᵀX)⁻¹`.
pub fn robust_vcov<T: Scalar>(x: &Matrix<T>, residuals: &[T], xtx_inv: &Matrix<T>) -> Matrix<T> {
    let k = x.cols();
    let mut meat = Matrix::zeros(k, k);
    for i in 0..x.rows() {
        let r = x.row(i);
        meat.add_outer(residuals[i] * residuals[i], r, r);
    }
    let mut v = xtx_inv.matmul(&meat).matmul(xtx_inv);
    v.symmetrize();
    v
}

/// Cluster sandwich; errors when fewer than two clusters exist.
pub fn cluster_vcov<T: Scalar>(
    x: &Matrix<T>,
    residuals: &[T],
    xtx_inv: &Matrix<T>,
    clusters: &[usize],
) -> Result<Matrix<T>> {
    let k = x.cols();
    let n_clusters = clusters.iter().max().map_or(0, |m| m + 1);
    let mut scores = vec![vec![T::zero(); k]; n_clusters];
    for i in 0..x.rows() {
        for (s, &xv) in scores[clusters[i]].iter_mut().zip(x.row(i)) {
            *s += xv * residuals[i];
        }
    }
    let occupied: Vec<&Vec<T>> = {
        let mut seen = vec![false; n_clusters];
        for &c in clusters {
            seen[c] = true;
        }
        scores.iter().zip(&seen).filter(|(_, &s)| s).map(|(v, _)| v).collect()
    };
    if occupied.len() < 2 {
        return Err(Error::InvalidInput("cluster-robust inference needs at least two clusters".into()));
    }
    let mut meat = Matrix::zeros(k, k);
    for s in occupied {
        meat.add_outer(T::one(), s, s);
    }
    let mut v = xtx_inv.matmul(&meat).matmul(xtx_inv);
    v.symmetrize();
    Ok(v)
}

/// `σ̂² (XᵀX)⁻¹` with `σ̂² = SSR / (n − k − absorbed)`.
pub fn classical_vcov<T: Scalar>(residuals: &[T], xtx_inv: &Matrix<T>, absorbed: usize) -> Result<Matrix<T>> {
    let df = residuals.len() as isize - xtx_inv.cols() as isize - absorbed as isize;
    if df <= 0 {
        return Err(Error::InvalidInput("no residual degrees of freedom".into()));
    }
    let s2 = dot(residuals, residuals) / T::from_usize_lossy(df as usize);
    let mut v = xtx_inv.clone();
    v.scale(s2);
    Ok(v)
}

/// OLS of the panel outcome on its columns. With `fe_group` set the group
/// means are swept out first (numerically the same as adding one dummy per
/// group); otherwise an intercept named `const` is prepended.
pub fn fit_fe_ols<T: Scalar>(panel: &Panel<T>, vcov: VcovKind) -> Result<OlsFit<T>> {
    let n = panel.n_rows();
    if n == 0 {
        return Err(Error::EmptyPanel);
    }
    let (mut names, y, cols, absorbed) = match &panel.fe_group {
        Some(g) => {
            let ng = g.iter().max().map_or(0, |m| m + 1);
            let used = {
                let mut seen = vec![false; ng];
                g.iter().for_each(|&i| seen[i] = true);
                seen.iter().filter(|&&s| s).count()
            };
            let cols: Vec<Vec<T>> = panel.columns.iter().map(|c| demean(c, g, ng)).collect();
            (panel.names.clone(), demean(&panel.outcome, g, ng), cols, used)
        }
        None => {
            let mut cols = vec![vec![T::one(); n]];
            cols.extend(panel.columns.iter().cloned());
            let mut names = vec!["const".to_string()];
            names.extend(panel.names.iter().cloned());
            (names, panel.outcome.clone(), cols, 0)
        }
    };
    if cols.is_empty() {
        return Err(Error::InvalidInput("no regressors".into()));
    }
    if n <= cols.len() + absorbed {
        return Err(Error::InvalidInput(format!(
            "{n} rows cannot identify {} coefficients and {absorbed} absorbed groups",
            cols.len()
        )));
    }
    let x = Matrix::from_columns(&cols);
    let xt = x.transpose();
    let xtx = xt.matmul(&x);
    let l = xtx
        .cholesky(lit(1e-10))
        .map_err(|bad| Error::RankDeficient(bad.into_iter().map(|i| std::mem::take(&mut names[i])).collect()))?;
    let xty = xt.matvec(&y);
    let coef = Matrix::cholesky_solve(&l, &xty);
    let xtx_inv = Matrix::spd_inverse_from_cholesky(&l);
    let fitted = x.matvec(&coef);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();

    let (v, se_kind) = match vcov {
        VcovKind::Classical => (classical_vcov(&residuals, &xtx_inv, absorbed)?, SeKind::Classical),
        VcovKind::Robust => (robust_vcov(&x, &residuals, &xtx_inv), SeKind::Robust),
        VcovKind::Cluster => {
            let c = panel
                .cluster
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("cluster vcov requested but panel has no cluster ids".into()))?;
            (cluster_vcov(&x, &residuals, &xtx_inv, c)?, SeKind::Cluster("cluster".into()))
        }
    };
    let ybar = panel.outcome.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let tss: T = panel.outcome.iter().map(|&v| (v - ybar) * (v - ybar)).sum();
    let ssr = dot(&residuals, &residuals);
    let r2 = if tss > T::zero() { Some(T::one() - ssr / tss) } else { None };
    Ok(OlsFit {
        fit: FitResult {
            names,
            coef,
            vcov: v,
            se_kind,
            n_obs: n,
            n_groups_absorbed: absorbed,
            r_squared: r2,
            log_likelihood: None,
            converged: None,
            trace: vec![],
        },
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn panel(y: Vec<f64>, cols: Vec<Vec<f64>>) -> Panel<f64> {
        let names = (0..cols.len()).map(|i| format!("x{i}")).collect();
        Panel::new("y", y, names, cols).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let f = fit_fe_ols(&panel(y, vec![x]), VcovKind::Robust).unwrap();
        assert!((f.fit.coef[0] - 1.0).abs() < 1e-12 && (f.fit.coef[1] - 2.0).abs() < 1e-12);
        assert_eq!(f.fit.names, vec!["const", "x0"]);
    }

    #[test]
    fn one_group_equals_demeaned_ols() {
        let mut rng = seeded(4);
        let x: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + rng.random::<f64>()).collect();
        let plain = fit_fe_ols(&panel(y.clone(), vec![x.clone()]), VcovKind::Robust).unwrap();
        let fe = fit_fe_ols(&panel(y, vec![x]).with_fe(vec![0; 30]).unwrap(), VcovKind::Robust).unwrap();
        assert!((plain.fit.coef[1] - fe.fit.coef[0]).abs() < 1e-12);
        assert!((plain.fit.vcov[(1, 1)] - fe.fit.vcov[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_named() {
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let err = fit_fe_ols(&panel(a.clone(), vec![a, b]), VcovKind::Robust).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref v) if v == &vec!["x1".to_string()]));
    }

    #[test]
    fn group_constant_regressor_is_rank_deficient() {
        let g = vec![0, 0, 1, 1, 2, 2];
        let x = vec![1.0, 1.0, 2.0, 2.0, 5.0, 5.0];
        let p = panel(vec![1.0, 2.0, 3.0, 1.0, 0.0, 2.0], vec![x]).with_fe(g).unwrap();
        assert!(matches!(fit_fe_ols(&p, VcovKind::Robust), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn singleton_clusters_equal_robust() {
        let mut rng = seeded(6);
        let x: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        let p = panel(y, vec![x]).with_cluster((0..50).collect()).unwrap();
        let r = fit_fe_ols(&p, VcovKind::Robust).unwrap().fit.vcov;
        let c = fit_fe_ols(&p, VcovKind::Cluster).unwrap().fit.vcov;
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[(i, j)] - c[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_cluster_rejected() {
        let p = panel(vec![1.0, 2.0, 4.0], vec![vec![0.0, 1.0, 2.0]]).with_cluster(vec![0; 3]).unwrap();
        assert!(fit_fe_ols(&p, VcovKind::Cluster).is_err());
    }

    #[test]
    fn duplicated_rows_double_cluster_variance() {
        let mut rng = seeded(8);
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        let base = fit_fe_ols(&panel(y.clone(), vec![x.clone()]), VcovKind::Robust).unwrap();
        let dup = |v: &Vec<f64>| v.iter().flat_map(|&a| [a, a]).collect::<Vec<_>>();
        let p = panel(dup(&y), vec![dup(&x)]).with_cluster((0..2 * n).map(|i| i / 2).collect()).unwrap();
        let c = fit_fe_ols(&p, VcovKind::Cluster).unwrap().fit.se()[1];
        let r = fit_fe_ols(&p, VcovKind::Robust).unwrap().fit.se()[1];
        // Duplication halves (XᵀX)⁻¹ and doubles each cluster score.
        assert!((c / r - 2f64.sqrt()).abs() < 1e-9);
        assert!((c / base.fit.se()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn robust_close_to_classical_when_homoskedastic() {
        let mut rng = seeded(10);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>() - 0.5).collect();
        let p = panel(y, vec![x]);
        let r = fit_fe_ols(&p, VcovKind::Robust).unwrap().fit.se()[1];
        let c = fit_fe_ols(&p, VcovKind::Classical).unwrap().fit.se()[1];
        assert!((r / c - 1.0).abs() < 0.05);
    }
}
