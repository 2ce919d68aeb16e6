//! Monte Carlo demonstrations of the two estimation pitfalls: a naive probit
//! reading variance differences as discrimination, and classification on a
//! slope that contains the classified observation.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ComponentCatalog;
use crate::design::generate_session;
use crate::error::Result;
use crate::estimators::{
    fit_het_probit, fit_plain_probit, loo_pooled_fit, naive_split_fit, HetProbitData, HetProbitOptions, LooOptions,
};
use crate::rng::{child_seed, substream};
use crate::sim::{simulate_evaluations, simulate_latent_panel, EvalDgpParams, EvalSession, LatentDesign, LatentRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeckmanDemoConfig {
    pub reps: usize,
    pub n: usize,
    /// Mean of the quality regressor in each case; the threshold is zero.
    pub x_means: Vec<f64>,
    pub x_sd: f64,
    /// Male over female standard deviation of the unobservable.
    pub sd_ratio_male_female: f64,
}

impl Default for HeckmanDemoConfig {
    fn default() -> Self {
        Self { reps: 100, n: 4000, x_means: vec![-1.0, 1.0], x_sd: 1.0, sd_ratio_male_female: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeckmanCase {
    pub x_mean: f64,
    pub seed: u64,
    pub reps: usize,
    pub failures: usize,
    pub naive_coef_mean: f64,
    /// Share of replications with `|t| > 2` and the sign of `x_mean`.
    pub naive_signed_rejections: f64,
    pub het_gamma_mean: f64,
    /// Share of replications whose 95% interval for γ covers zero.
    pub het_coverage: f64,
    pub het_sigma_ratio_mean: f64,
}

/// No true group effect (γ = 0); only the unobservable's scale differs.
pub fn heckman_demo(cfg: &HeckmanDemoConfig, seed: u64) -> Result<Vec<HeckmanCase>> {
    let opts = HetProbitOptions::<f64>::default();
    cfg.x_means
        .iter()
        .enumerate()
        .map(|(c, &x_mean)| {
            let case_seed = child_seed(seed, c as u64);
            let design = LatentDesign {
                n: cfg.n,
                n_clusters: cfg.n,
                x_mean,
                x_sd: cfg.x_sd,
                beta: 1.0,
                gamma: 0.0,
                omega: -cfg.sd_ratio_male_female.ln(),
                group_share: 0.5,
                rule: LatentRule::Single { intercept: 0.0 },
            };
            let reps: Vec<Option<(f64, f64, f64, f64, f64)>> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| {
                    let panel = simulate_latent_panel(&mut substream(case_seed, r as u64), &design).ok()?;
                    let mut data = HetProbitData::from_panel(&panel, "female").ok()?;
                    data.cluster = None;
                    let naive = fit_plain_probit(&data, &opts).ok()?;
                    let het = fit_het_probit(&data, &opts).ok()?;
                    let (b, s) = (naive.coefficient("female").ok()?, naive.std_error("female").ok()?);
                    let (g, gs) = (het.gamma_combined, het.fit.std_error("female").ok()?);
                    Some((b, b / s, g, gs, het.sigma_ratio))
                })
                .collect();
            let ok: Vec<_> = reps.iter().flatten().collect();
            let m = ok.len().max(1) as f64;
            let sign = x_mean.signum();
            Ok(HeckmanCase {
                x_mean,
                seed: case_seed,
                reps: cfg.reps,
                failures: cfg.reps - ok.len(),
                naive_coef_mean: ok.iter().map(|r| r.0).sum::<f64>() / m,
                naive_signed_rejections: ok.iter().filter(|r| r.1.abs() > 2.0 && r.1.signum() == sign).count() as f64
                    / m,
                het_gamma_mean: ok.iter().map(|r| r.2).sum::<f64>() / m,
                het_coverage: ok.iter().filter(|r| r.2.abs() <= 1.959_963_984_540_054 * r.3).count() as f64 / m,
                het_sigma_ratio_mean: ok.iter().map(|r| r.4).sum::<f64>() / m,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LooDemoConfig {
    pub reps: usize,
    pub investors: usize,
    pub profiles_per_investor: Vec<u32>,
    /// Correlation of the rating noise between the classifying and the
    /// outcome question.
    pub noise_corr: f64,
    pub noise_sd: f64,
}

impl Default for LooDemoConfig {
    fn default() -> Self {
        Self { reps: 100, investors: 200, profiles_per_investor: vec![8, 16, 64], noise_corr: 0.8, noise_sd: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooDemoRow {
    pub profiles_per_investor: u32,
    pub seed: u64,
    pub reps: usize,
    pub failures: usize,
    pub naive_anti_mean: f64,
    pub naive_pro_mean: f64,
    pub loo_anti_mean: f64,
    pub loo_pro_mean: f64,
    /// Mean absolute estimate over both groups and all replications.
    pub naive_mean_abs: f64,
    pub loo_mean_abs: f64,
}

/// No investor has a true effect; the outcome and classifying questions
/// share correlated noise.
pub fn generated_regressor_demo(cfg: &LooDemoConfig, seed: u64) -> Result<Vec<LooDemoRow>> {
    let catalog = ComponentCatalog::default();
    let mut params = EvalDgpParams {
        noise_sd: [cfg.noise_sd, cfg.noise_sd, cfg.noise_sd, cfg.noise_sd / 5.0, cfg.noise_sd],
        top_school: [0.0; 5],
        ..EvalDgpParams::default()
    };
    params.noise_corr[0][2] = cfg.noise_corr;
    params.noise_corr[2][0] = cfg.noise_corr;
    params.validate()?;
    let opts = LooOptions { outcomes: vec!["q1".into()], bootstrap: 0, ..LooOptions::default() };
    cfg.profiles_per_investor
        .iter()
        .enumerate()
        .map(|(c, &j)| {
            let case_seed = child_seed(seed, 100 + c as u64);
            let reps: Vec<Option<[f64; 4]>> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = substream(case_seed, r as u64);
                    let sessions: Vec<EvalSession> = (0..cfg.investors)
                        .map(|i| {
                            Ok(EvalSession {
                                investor_id: i as u64,
                                profiles: generate_session(&mut rng, &catalog, &format!("i{i}"), j)?,
                                covariates: BTreeMap::new(),
                            })
                        })
                        .collect::<Result<_>>()
                        .ok()?;
                    let recs = simulate_evaluations(&mut rng, &sessions, &params).ok()?;
                    let naive = naive_split_fit::<f64>(&recs, &opts).ok()?;
                    let loo = loo_pooled_fit::<f64>(&recs, &opts).ok()?;
                    let (n, l) = (naive.outcome("q1")?, loo.outcome("q1")?);
                    Some([n.anti?.coef, n.pro?.coef, l.anti?.coef, l.pro?.coef])
                })
                .collect();
            let ok: Vec<&[f64; 4]> = reps.iter().flatten().collect();
            let m = ok.len().max(1) as f64;
            let mean = |k: usize| ok.iter().map(|r| r[k]).sum::<f64>() / m;
            let mean_abs = |a: usize, b: usize| ok.iter().map(|r| r[a].abs() + r[b].abs()).sum::<f64>() / (2.0 * m);
            Ok(LooDemoRow {
                profiles_per_investor: j,
                seed: case_seed,
                reps: cfg.reps,
                failures: cfg.reps - ok.len(),
                naive_anti_mean: mean(0),
                naive_pro_mean: mean(1),
                loo_anti_mean: mean(2),
                loo_pro_mean: mean(3),
                naive_mean_abs: mean_abs(0, 1),
                loo_mean_abs: mean_abs(2, 3),
            })
        })
        .collect()
}

/// Plain-text report of both demonstrations.
pub fn write_demo_report<W: Write>(mut out: W, heckman: &[HeckmanCase], loo: &[LooDemoRow]) -> Result<()> {
    writeln!(out, "== Binary outcome with unequal unobservable variance (true group effect 0) ==")?;
    writeln!(
        out,
        "x_mean  seed  reps  failures  naive_coef  naive_|t|>2_signed  het_gamma  het_ci_covers_0  het_sigma_ratio"
    )?;
    for c in heckman {
        writeln!(
            out,
            "{:+.2}  {}  {}  {}  {:+.4}  {:.2}  {:+.4}  {:.2}  {:.4}",
            c.x_mean,
            c.seed,
            c.reps,
            c.failures,
            c.naive_coef_mean,
            c.naive_signed_rejections,
            c.het_gamma_mean,
            c.het_coverage,
            c.het_sigma_ratio_mean
        )?;
    }
    writeln!(out)?;
    writeln!(out, "== Classification on own slope vs leave-one-out (true effects 0) ==")?;
    writeln!(out, "J  seed  reps  failures  naive_anti  naive_pro  loo_anti  loo_pro  naive_mean_abs  loo_mean_abs")?;
    for r in loo {
        writeln!(
            out,
            "{}  {}  {}  {}  {:+.4}  {:+.4}  {:+.4}  {:+.4}  {:.4}  {:.4}",
            r.profiles_per_investor,
            r.seed,
            r.reps,
            r.failures,
            r.naive_anti_mean,
            r.naive_pro_mean,
            r.loo_anti_mean,
            r.loo_pro_mean,
            r.naive_mean_abs,
            r.loo_mean_abs
        )?;
    }
    Ok(())
}
