//! Regression and likelihood estimators.

pub mod curve;
pub mod loo;
pub mod ols;
pub mod probit;
pub mod two_threshold;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{lit, Scalar};
use crate::special::two_sided_p;

pub use curve::{cdf_difference_curve, CurvePoint, CurveResult};
pub use loo::{
    loo_pooled_fit, loo_slopes, naive_split_fit, Classifier, LooOptions, LooResult, LooSlope, LooSlopes, OutcomeSplit,
};
pub use ols::{classical_vcov, cluster_vcov, fit_fe_ols, robust_vcov, OlsFit, VcovKind};
pub use probit::{
    fit_het_probit, fit_plain_probit, het_probit_gradient, het_probit_loglik, het_probit_marginals,
    het_probit_probability, HetProbitData, HetProbitOptions, HetProbitResult, Marginals, WaldTest,
};
pub use two_threshold::{fit_two_threshold, two_threshold_loglik, TwoThresholdResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeKind {
    Classical,
    Robust,
    Cluster(String),
    InverseHessian,
    Bootstrap(usize),
}

impl fmt::Display for SeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeKind::Classical => write!(f, "classical"),
            SeKind::Robust => write!(f, "robust"),
            SeKind::Cluster(key) => write!(f, "cluster({key})"),
            SeKind::InverseHessian => write!(f, "inverse_hessian"),
            SeKind::Bootstrap(b) => write!(f, "bootstrap({b})"),
        }
    }
}

/// One column of a regression table.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub names: Vec<String>,
    pub coef: Vec<T>,
    pub vcov: Matrix<T>,
    pub se_kind: SeKind,
    pub n_obs: usize,
    pub n_groups_absorbed: usize,
    pub r_squared: Option<T>,
    pub log_likelihood: Option<T>,
    pub converged: Option<bool>,
    pub trace: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn se(&self) -> Vec<T> {
        self.vcov.diag().into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn coefficient(&self, name: &str) -> Result<T> {
        Ok(self.coef[self.index(name)?])
    }

    pub fn std_error(&self, name: &str) -> Result<T> {
        let i = self.index(name)?;
        Ok(self.vcov[(i, i)].max(T::zero()).sqrt())
    }

    /// `(estimate, se, t, p)` per term, with normal p-values.
    pub fn table(&self) -> Vec<(String, T, T, T, T)> {
        self.names
            .iter()
            .zip(&self.coef)
            .zip(self.se())
            .map(|((n, &b), s)| {
                let t = if s > T::zero() { b / s } else { T::nan() };
                let p = if t.is_nan() { T::nan() } else { two_sided_p(t) };
                (n.clone(), b, s, t, p)
            })
            .collect()
    }

    /// `term,estimate,se,t,p`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "estimate", "se", "t", "p"])?;
        for (n, b, s, t, p) in self.table() {
            w.write_record([n, b.to_string(), s.to_string(), t.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `key=value` lines describing the fit.
    pub fn write_meta<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "se_kind={}", self.se_kind)?;
        writeln!(out, "n={}", self.n_obs)?;
        writeln!(out, "n_groups_absorbed={}", self.n_groups_absorbed)?;
        if let Some(r2) = self.r_squared {
            writeln!(out, "r_squared={r2}")?;
        }
        if let Some(ll) = self.log_likelihood {
            writeln!(out, "loglik={ll}")?;
        }
        if let Some(c) = self.converged {
            writeln!(out, "converged={c}")?;
        }
        if !self.trace.is_empty() {
            let t: Vec<String> = self.trace.iter().map(|v| v.to_string()).collect();
            writeln!(out, "trace={}", t.join(","))?;
        }
        Ok(())
    }
}

/// Sum of the numerator coefficients over the denominator coefficient, e.g.
/// a group effect expressed in units of the elite-school premium.
pub fn ivy_scaled_ratio<T: Scalar>(fit: &FitResult<T>, numerator: &[&str], denominator: &str) -> Result<T> {
    let den = fit.coefficient(denominator)?;
    let mut num = T::zero();
    for n in numerator {
        num += fit.coefficient(n)?;
    }
    if den.abs() < lit(1e-12) {
        return Err(Error::Domain(format!("denominator `{denominator}` is numerically zero")));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(names: &[&str], coef: &[f64]) -> FitResult<f64> {
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            coef: coef.to_vec(),
            vcov: Matrix::identity(coef.len()),
            se_kind: SeKind::Robust,
            n_obs: 10,
            n_groups_absorbed: 0,
            r_squared: None,
            log_likelihood: None,
            converged: None,
            trace: vec![],
        }
    }

    #[test]
    fn ivy_ratio_fixture() {
        let f = fit(&["female", "female_x_ivy", "ivy"], &[2.73, -6.59, 8.78]);
        let r = ivy_scaled_ratio(&f, &["female", "female_x_ivy"], "ivy").unwrap();
        assert_eq!((r * 100.0).round() / 100.0, -0.44);
        assert_eq!(ivy_scaled_ratio(&f, &["ivy"], "ivy").unwrap(), 1.0);
        let z = fit(&["a", "b"], &[0.0, 3.0]);
        assert_eq!(ivy_scaled_ratio(&z, &["a"], "b").unwrap(), 0.0);
        assert!(ivy_scaled_ratio(&z, &["b"], "a").is_err());
        assert!(matches!(ivy_scaled_ratio(&z, &["c"], "b"), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn csv_and_meta() {
        let f = fit(&["x"], &[2.0]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("term,estimate,se,t,p\nx,2,1,2,"));
        let mut meta = Vec::new();
        f.write_meta(&mut meta).unwrap();
        assert_eq!(String::from_utf8(meta).unwrap(), "se_kind=robust\nn=10\nn_groups_absorbed=0\n");
    }
}
