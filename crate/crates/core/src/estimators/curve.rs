//! Group gaps in the survival function of an outcome.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T> {
    pub x: T,
    /// `P̂(Y > x | G=1) − P̂(Y > x | G=0)`.
    pub coef: T,
    /// Pointwise 95% interval; absent when `1(Y > x)` is constant.
    pub ci: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveResult<T> {
    pub points: Vec<CurvePoint<T>>,
    /// Thresholds where `coef` changes sign, by linear interpolation.
    pub crossings: Vec<T>,
}

impl<T: Scalar> CurveResult<T> {
    /// `x,coef,ci_low,ci_high`; missing bounds are left empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "coef", "ci_low", "ci_high"])?;
        for p in &self.points {
            let (lo, hi) = p.ci.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            w.write_record([p.x.to_string(), p.coef.to_string(), lo, hi])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// At each grid point, the OLS regression of `1(Y > x)` on a constant and the
/// binary group. With one binary regressor the slope is the difference in
/// proportions and its HC0 variance is `p₁(1−p₁)/n₁ + p₀(1−p₀)/n₀`, which is
/// what is computed here.
pub fn cdf_difference_curve<T: Scalar>(outcome: &[T], group: &[T], grid: &[T]) -> Result<CurveResult<T>> {
    if outcome.len() != group.len() {
        return Err(Error::InvalidInput("outcome and group lengths differ".into()));
    }
    if group.iter().any(|&g| g != T::zero() && g != T::one()) {
        return Err(Error::InvalidInput("group must be 0/1".into()));
    }
    let mut y1: Vec<T> = outcome.iter().zip(group).filter(|(_, &g)| g == T::one()).map(|(&y, _)| y).collect();
    let mut y0: Vec<T> = outcome.iter().zip(group).filter(|(_, &g)| g == T::zero()).map(|(&y, _)| y).collect();
    if y1.is_empty() || y0.is_empty() {
        return Err(Error::InvalidInput("both groups must be present".into()));
    }
    if outcome.iter().any(|y| y.is_nan()) || grid.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("outcome and grid must not contain NaN".into()));
    }
    y1.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    y0.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    // Share of sorted `v` strictly above `x`.
    let above = |v: &[T], x: T| {
        let k = v.partition_point(|&y| y <= x);
        T::from_usize_lossy(v.len() - k) / T::from_usize_lossy(v.len())
    };
    let (n1, n0) = (T::from_usize_lossy(y1.len()), T::from_usize_lossy(y0.len()));
    let z = lit::<T>(1.959_963_984_540_054);
    let points: Vec<CurvePoint<T>> = grid
        .iter()
        .map(|&x| {
            let (p1, p0) = (above(&y1, x), above(&y0, x));
            let coef = p1 - p0;
            let pooled_constant = (p1 == T::zero() && p0 == T::zero()) || (p1 == T::one() && p0 == T::one());
            let ci = (!pooled_constant).then(|| {
                let se = (p1 * (T::one() - p1) / n1 + p0 * (T::one() - p0) / n0).sqrt();
                (coef - z * se, coef + z * se)
            });
            CurvePoint { x, coef, ci }
        })
        .collect();

    let mut crossings = Vec::new();
    let mut last: Option<&CurvePoint<T>> = None;
    for p in &points {
        if p.coef == T::zero() {
            continue;
        }
        if let Some(q) = last {
            if (q.coef < T::zero()) != (p.coef < T::zero()) {
                crossings.push(q.x + (p.x - q.x) * q.coef / (q.coef - p.coef));
            }
        }
        last = Some(p);
    }
    Ok(CurveResult { points, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols::{fit_fe_ols, VcovKind};
    use crate::panel::Panel;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn identical_groups_give_zero() {
        let y: Vec<f64> = (0..20).map(|i| f64::from(i % 10)).collect();
        let g: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { 0.0 }).collect();
        let grid: Vec<f64> = (0..12).map(f64::from).collect();
        let c = cdf_difference_curve(&y, &g, &grid).unwrap();
        assert!(c.points.iter().all(|p| p.coef == 0.0));
        assert!(c.crossings.is_empty());
    }

    #[test]
    fn below_support_is_zero_without_ci() {
        let c = cdf_difference_curve(&[3.0, 4.0, 5.0, 9.0], &[1.0, 1.0, 0.0, 0.0], &[-1.0, 20.0]).unwrap();
        assert_eq!(c.points[0].coef, 0.0);
        assert_eq!(c.points[0].ci, None);
        assert_eq!(c.points[1].ci, None);
    }

    #[test]
    fn equals_ols_on_indicator() {
        let mut rng = seeded(2);
        let y: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..100.0f64).round()).collect();
        let g: Vec<f64> = (0..300).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let grid: Vec<f64> = (0..100).step_by(7).map(f64::from).collect();
        let c = cdf_difference_curve(&y, &g, &grid).unwrap();
        for p in &c.points {
            let d: Vec<f64> = y.iter().map(|&v| if v > p.x { 1.0 } else { 0.0 }).collect();
            let panel = Panel::new("d", d, vec!["g".into()], vec![g.clone()]).unwrap();
            let f = fit_fe_ols(&panel, VcovKind::Robust).unwrap().fit;
            assert!((f.coef[1] - p.coef).abs() < 1e-12);
            let (lo, hi) = p.ci.unwrap();
            assert!(((hi - lo) / (2.0 * 1.959_963_984_540_054) - f.se()[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_is_interpolated() {
        // Narrow group above the wide one below 25 and under it above 25.
        let y = [0.0, 10.0, 40.0, 50.0, 20.0, 22.0, 28.0, 30.0];
        let g = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let grid: Vec<f64> = (0..=50).map(f64::from).collect();
        let c = cdf_difference_curve(&y, &g, &grid).unwrap();
        assert_eq!(c.crossings, vec![24.5]);
        for p in &c.points {
            assert!((-1.0..=1.0).contains(&p.coef));
        }
    }
}
