//! Classify each evaluation by the evaluator's own slope on a treated
//! characteristic, then pool.
//!
//! A slope estimated from all of an investor's ratings contains the rating
//! being classified, so when noise is correlated across questions the
//! classification picks up the second-stage error. The leave-one-out slope
//! for `(i, j)` uses only the investor's other ratings and avoids that.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::ols::{fit_fe_ols, VcovKind};
use crate::estimators::FitResult;
use crate::panel::{EvaluationRecord, Panel};
use crate::rng::substream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    LeaveOneOut,
    /// Full-sample slope including the classified rating.
    FullSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooSlope<T> {
    pub record: usize,
    pub investor_id: u64,
    /// `None` when fewer than three other ratings remain or the treatment
    /// does not vary among them.
    pub slope: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooSlopes<T> {
    pub slopes: Vec<LooSlope<T>>,
    pub flagged: usize,
}

/// `Σ x̃ỹ / Σ x̃²` after demeaning, or `None` for too few rows / no variation.
fn demeaned_slope<T: Scalar>(pairs: &[(T, T)]) -> Option<T> {
    if pairs.len() < 3 {
        return None;
    }
    let n = T::from_usize_lossy(pairs.len());
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let scale = pairs.iter().fold(T::zero(), |m, p| m.max(p.0.abs())).max(T::one());
    if sxx <= T::epsilon() * scale * scale * n {
        return None;
    }
    Some(sxy / sxx)
}

fn value<T: Scalar>(r: &EvaluationRecord, col: &str) -> Option<T> {
    r.column(col).map(T::lit)
}

fn check_columns(records: &[EvaluationRecord], cols: &[&str]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyPanel);
    }
    for c in cols {
        if !records.iter().any(|r| r.has_column(c)) {
            return Err(Error::UnknownColumn((*c).to_string()));
        }
    }
    Ok(())
}

fn by_investor(records: &[EvaluationRecord]) -> BTreeMap<u64, Vec<usize>> {
    let mut m: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        m.entry(r.investor_id).or_default().push(i);
    }
    m
}

fn slopes_with<T: Scalar>(
    records: &[EvaluationRecord],
    outcome: &str,
    treatment: &str,
    c: Classifier,
) -> Result<LooSlopes<T>> {
    check_columns(records, &[outcome, treatment])?;
    let mut slopes = vec![None; records.len()];
    for rows in by_investor(records).values() {
        let pair = |i: usize| Some((value::<T>(&records[i], treatment)?, value::<T>(&records[i], outcome)?));
        match c {
            Classifier::FullSample => {
                let all: Vec<(T, T)> = rows.iter().filter_map(|&i| pair(i)).collect();
                let b = demeaned_slope(&all);
                rows.iter().for_each(|&j| slopes[j] = b);
            }
            Classifier::LeaveOneOut => {
                for &j in rows {
                    let others: Vec<(T, T)> = rows.iter().filter(|&&i| i != j).filter_map(|&i| pair(i)).collect();
                    slopes[j] = demeaned_slope(&others);
                }
            }
        }
    }
    let flagged = slopes.iter().filter(|s| s.is_none()).count();
    Ok(LooSlopes {
        slopes: slopes
            .into_iter()
            .enumerate()
            .map(|(record, slope)| LooSlope { record, investor_id: records[record].investor_id, slope })
            .collect(),
        flagged,
    })
}

/// Leave-one-out slope of `outcome` on `treatment` for every record.
pub fn loo_slopes<T: Scalar>(records: &[EvaluationRecord], outcome: &str, treatment: &str) -> Result<LooSlopes<T>> {
    slopes_with(records, outcome, treatment, Classifier::LeaveOneOut)
}

#[derive(Debug, Clone)]
pub struct LooOptions {
    pub treatment: String,
    pub classify_on: String,
    pub outcomes: Vec<String>,
    /// Bootstrap replicates; 0 skips the bootstrap.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for LooOptions {
    fn default() -> Self {
        Self {
            treatment: "female".into(),
            classify_on: "q3".into(),
            outcomes: vec!["q1".into(), "q2".into(), "q3".into(), "q4".into()],
            bootstrap: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEstimate<T> {
    pub coef: T,
    /// Investor-clustered standard error.
    pub se: T,
    pub boot_se: Option<T>,
}

#[derive(Debug, Clone)]
pub struct OutcomeSplit<T> {
    pub outcome: String,
    /// Effect among ratings classified anti (negative slope); absent when
    /// that group is empty.
    pub anti: Option<SplitEstimate<T>>,
    pub pro: Option<SplitEstimate<T>>,
    pub fit: FitResult<T>,
}

#[derive(Debug, Clone)]
pub struct LooResult<T> {
    pub classifier: Classifier,
    pub slopes: LooSlopes<T>,
    pub share_anti: T,
    pub share_pro: T,
    pub share_dropped: T,
    /// Bootstrap standard errors of `(share_anti, share_pro)`.
    pub share_boot_se: Option<(T, T)>,
    pub outcomes: Vec<OutcomeSplit<T>>,
    pub bootstrap: usize,
    /// Replicate fits that failed (e.g. an empty group in the resample).
    pub boot_failures: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Anti,
    Pro,
}

fn side<T: Scalar>(s: Option<T>) -> Option<Side> {
    match s {
        Some(b) if b < T::zero() => Some(Side::Anti),
        Some(b) if b > T::zero() => Some(Side::Pro),
        _ => None,
    }
}

/// Pooled FE regression over `draws` (record indices, one investor block per
/// draw). Returns the fit and which of `anti_x`, `pro_x` it contains.
fn pooled<T: Scalar>(
    records: &[EvaluationRecord],
    sides: &[Option<Side>],
    draws: &[&[usize]],
    treatment: &str,
    outcome: &str,
) -> Result<(FitResult<T>, [bool; 2])> {
    let (mut y, mut anti, mut pro, mut fe) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (d, rows) in draws.iter().enumerate() {
        for &r in *rows {
            let (Some(s), Some(x), Some(v)) =
                (sides[r], value::<T>(&records[r], treatment), value::<T>(&records[r], outcome))
            else {
                continue;
            };
            y.push(v);
            anti.push(if s == Side::Anti { x } else { T::zero() });
            pro.push(if s == Side::Pro { x } else { T::zero() });
            fe.push(d);
        }
    }
    let has = [anti.iter().any(|v| *v != T::zero()), pro.iter().any(|v| *v != T::zero())];
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for ((n, c), h) in [("anti_x", anti), ("pro_x", pro)].into_iter().zip(has) {
        if h {
            names.push(n.to_string());
            cols.push(c);
        }
    }
    if cols.is_empty() {
        return Err(Error::Identification("no classified ratings with the treatment".into()));
    }
    let fe = crate::panel::dense_ids(&fe);
    let panel = Panel::new(outcome, y, names, cols)?.with_fe(fe.clone())?.with_cluster(fe)?;
    let f = fit_fe_ols(&panel, VcovKind::Cluster)?;
    Ok((f.fit, has))
}

fn sd<T: Scalar>(v: &[T]) -> Option<T> {
    if v.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(v.len());
    let m = v.iter().copied().sum::<T>() / n;
    Some((v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (n - T::one())).sqrt())
}

fn split_fit<T: Scalar>(
    records: &[EvaluationRecord],
    opts: &LooOptions,
    classifier: Classifier,
) -> Result<LooResult<T>> {
    let mut cols: Vec<&str> = vec![&opts.treatment, &opts.classify_on];
    cols.extend(opts.outcomes.iter().map(String::as_str));
    check_columns(records, &cols)?;
    let slopes = slopes_with::<T>(records, &opts.classify_on, &opts.treatment, classifier)?;
    let sides: Vec<Option<Side>> = slopes.slopes.iter().map(|s| side(s.slope)).collect();
    let investors: Vec<Vec<usize>> = by_investor(records).into_values().collect();
    let all: Vec<&[usize]> = investors.iter().map(Vec::as_slice).collect();

    let shares = |draws: &[&[usize]]| {
        let (mut a, mut p, mut n) = (0usize, 0usize, 0usize);
        for rows in draws {
            for &r in *rows {
                n += 1;
                match sides[r] {
                    Some(Side::Anti) => a += 1,
                    Some(Side::Pro) => p += 1,
                    None => {}
                }
            }
        }
        let n = T::from_usize_lossy(n.max(1));
        (T::from_usize_lossy(a) / n, T::from_usize_lossy(p) / n)
    };
    let (share_anti, share_pro) = shares(&all);

    let mut outcomes = Vec::new();
    for k in &opts.outcomes {
        let (fit, has) = pooled::<T>(records, &sides, &all, &opts.treatment, k)?;
        let est = |name: &str| -> Option<SplitEstimate<T>> {
            Some(SplitEstimate { coef: fit.coefficient(name).ok()?, se: fit.std_error(name).ok()?, boot_se: None })
        };
        let (anti, pro) = (has[0].then(|| est("anti_x")).flatten(), has[1].then(|| est("pro_x")).flatten());
        outcomes.push(OutcomeSplit { outcome: k.clone(), anti, pro, fit });
    }

    let mut share_boot_se = None;
    let mut boot_failures = 0;
    if opts.bootstrap > 0 {
        type Rep<T> = ((T, T), Vec<Option<[Option<T>; 2]>>);
        let reps: Vec<Rep<T>> = (0..opts.bootstrap)
            .into_par_iter()
            .map(|b| {
                use rand::Rng as _;
                let mut rng = substream(opts.seed, b as u64);
                let draws: Vec<&[usize]> = (0..all.len()).map(|_| all[rng.random_range(0..all.len())]).collect();
                let per = opts
                    .outcomes
                    .iter()
                    .map(|k| {
                        pooled::<T>(records, &sides, &draws, &opts.treatment, k)
                            .ok()
                            .map(|(f, _)| [f.coefficient("anti_x").ok(), f.coefficient("pro_x").ok()])
                    })
                    .collect();
                (shares(&draws), per)
            })
            .collect();
        let sa: Vec<T> = reps.iter().map(|r| r.0 .0).collect();
        let sp: Vec<T> = reps.iter().map(|r| r.0 .1).collect();
        share_boot_se = sd(&sa).zip(sd(&sp));
        for (k, o) in outcomes.iter_mut().enumerate() {
            let mut a = Vec::new();
            let mut p = Vec::new();
            for r in &reps {
                match &r.1[k] {
                    None => boot_failures += 1,
                    Some([x, y]) => {
                        a.extend(x.iter().copied());
                        p.extend(y.iter().copied());
                    }
                }
            }
            if let Some(e) = o.anti.as_mut() {
                e.boot_se = sd(&a);
            }
            if let Some(e) = o.pro.as_mut() {
                e.boot_se = sd(&p);
            }
        }
    }
    let total = T::from_usize_lossy(records.len());
    let share_dropped = T::from_usize_lossy(sides.iter().filter(|s| s.is_none()).count()) / total;
    Ok(LooResult {
        classifier,
        slopes,
        share_anti,
        share_pro,
        share_dropped,
        share_boot_se,
        outcomes,
        bootstrap: opts.bootstrap,
        boot_failures,
    })
}

/// Pooled effects among ratings classified by the leave-one-out slope, with
/// investor fixed effects and an investor-level bootstrap.
pub fn loo_pooled_fit<T: Scalar>(records: &[EvaluationRecord], opts: &LooOptions) -> Result<LooResult<T>> {
    split_fit(records, opts, Classifier::LeaveOneOut)
}

/// Same pooled regression, classified on the full-sample slope.
pub fn naive_split_fit<T: Scalar>(records: &[EvaluationRecord], opts: &LooOptions) -> Result<LooResult<T>> {
    split_fit(records, opts, Classifier::FullSample)
}

impl<T: Scalar> LooResult<T> {
    pub fn outcome(&self, name: &str) -> Option<&OutcomeSplit<T>> {
        self.outcomes.iter().find(|o| o.outcome == name)
    }

    /// `outcome,group,estimate,se,boot_se`, then share rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["outcome", "group", "estimate", "se", "boot_se"])?;
        let opt = |v: Option<T>| v.map_or(String::new(), |x| x.to_string());
        for o in &self.outcomes {
            for (g, e) in [("anti", o.anti), ("pro", o.pro)] {
                match e {
                    Some(e) => w.write_record([
                        o.outcome.clone(),
                        g.into(),
                        e.coef.to_string(),
                        e.se.to_string(),
                        opt(e.boot_se),
                    ])?,
                    None => {
                        w.write_record([o.outcome.clone(), g.into(), String::new(), String::new(), String::new()])?
                    }
                }
            }
        }
        let (sa, sp) = self.share_boot_se.unzip();
        w.write_record(["share".into(), "anti".into(), self.share_anti.to_string(), String::new(), opt(sa)])?;
        w.write_record(["share".into(), "pro".into(), self.share_pro.to_string(), String::new(), opt(sp)])?;
        w.write_record([
            "share".into(),
            "dropped".into(),
            self.share_dropped.to_string(),
            String::new(),
            String::new(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(investor: u64, j: u32, x: f64, y3: f64, y1: f64) -> EvaluationRecord {
        EvaluationRecord {
            investor_id: investor,
            profile_id: format!("{investor}-{j}"),
            order_index: j,
            second_half: false,
            responses: [Some(y1), None, Some(y3), None, None],
            response_seconds: 1.0,
            covariates: [("female".to_string(), x)].into_iter().collect(),
            truth: None,
        }
    }

    #[test]
    fn hand_arithmetic() {
        // Rows other than j=0: X=[0,1], Y=[1,3]; too few, so add a third
        // row that sits at the means.
        let recs = vec![
            rec(1, 0, 1.0, 50.0, 0.0),
            rec(1, 1, 0.0, 1.0, 0.0),
            rec(1, 2, 1.0, 3.0, 0.0),
            rec(1, 3, 0.5, 2.0, 0.0),
        ];
        let s = loo_slopes::<f64>(&recs, "q3", "female").unwrap();
        assert!((s.slopes[0].slope.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_gives_zero_and_is_dropped() {
        let recs: Vec<_> = (0..6).map(|j| rec(1, j, f64::from(j % 2), 7.0, 1.0)).collect();
        let s = loo_slopes::<f64>(&recs, "q3", "female").unwrap();
        assert!(s.slopes.iter().all(|v| v.slope == Some(0.0)));
        let opts = LooOptions { outcomes: vec!["q1".into()], bootstrap: 0, ..LooOptions::default() };
        assert!(loo_pooled_fit::<f64>(&recs, &opts).is_err());
    }

    #[test]
    fn noiseless_slope_is_exact() {
        let recs: Vec<_> = (0..10)
            .map(|j| {
                let x = f64::from(j % 2);
                rec(1, j, x, 40.0 + 5.0 * x, 0.0)
            })
            .collect();
        let s = loo_slopes::<f64>(&recs, "q3", "female").unwrap();
        assert!(s.slopes.iter().all(|v| (v.slope.unwrap() - 5.0).abs() < 1e-12));
    }

    #[test]
    fn insufficient_variation_flagged() {
        let recs = vec![
            rec(1, 0, 1.0, 1.0, 0.0),
            rec(1, 1, 0.0, 2.0, 0.0),
            rec(1, 2, 0.0, 3.0, 0.0),
            rec(1, 3, 0.0, 4.0, 0.0),
        ];
        let s = loo_slopes::<f64>(&recs, "q3", "female").unwrap();
        assert_eq!(s.slopes[0].slope, None);
        assert!(s.slopes[1].slope.is_some());
        assert_eq!(s.flagged, 1);
    }

    #[test]
    fn unknown_column() {
        let recs = vec![rec(1, 0, 1.0, 1.0, 0.0)];
        assert!(matches!(loo_slopes::<f64>(&recs, "q3", "nope"), Err(Error::UnknownColumn(_))));
    }

    proptest! {
        #[test]
        fn own_rating_never_moves_own_slope(
            xs in proptest::collection::vec(0u8..2, 6..14),
            ys in proptest::collection::vec(0.0f64..100.0, 14),
            j in 0usize..6,
            nx in 0u8..2,
            ny in 0.0f64..100.0,
        ) {
            let recs: Vec<_> = xs.iter().enumerate().map(|(k, &x)| rec(1, k as u32, f64::from(x), ys[k], 0.0)).collect();
            let mut changed = recs.clone();
            changed[j] = rec(1, j as u32, f64::from(nx), ny, 0.0);
            let a = loo_slopes::<f64>(&recs, "q3", "female").unwrap();
            let b = loo_slopes::<f64>(&changed, "q3", "female").unwrap();
            prop_assert_eq!(a.slopes[j].slope.map(f64::to_bits), b.slopes[j].slope.map(f64::to_bits));
        }

        #[test]
        fn shares_sum_to_one(seed in 0u64..1000) {
            use rand::Rng as _;
            let mut rng = crate::rng::seeded(seed);
            let recs: Vec<_> = (0..40).map(|k| rec(k / 8, k as u32, f64::from(rng.random_range(0u8..2)), rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
            let opts = LooOptions { outcomes: vec!["q1".into()], bootstrap: 0, ..LooOptions::default() };
            if let Ok(r) = loo_pooled_fit::<f64>(&recs, &opts) {
                prop_assert!((r.share_anti + r.share_pro + r.share_dropped - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_slopes_make_naive_equal_loo() {
        let mut recs = Vec::new();
        for i in 0..20u64 {
            let b = if i % 3 == 0 { -4.0 } else { 6.0 };
            for j in 0..8 {
                let x = f64::from(j % 2);
                recs.push(rec(i, j, x, 50.0 + b * x + i as f64, 30.0 + 2.0 * b * x));
            }
        }
        let opts = LooOptions { outcomes: vec!["q1".into()], bootstrap: 0, ..LooOptions::default() };
        let a = loo_pooled_fit::<f64>(&recs, &opts).unwrap();
        let b = naive_split_fit::<f64>(&recs, &opts).unwrap();
        let (oa, ob) = (a.outcome("q1").unwrap(), b.outcome("q1").unwrap());
        assert!((oa.anti.unwrap().coef - ob.anti.unwrap().coef).abs() < 1e-10);
        assert!((oa.pro.unwrap().coef - 12.0).abs() < 1e-10);
        assert!((a.share_anti - 7.0 / 20.0).abs() < 1e-12);
    }
}
