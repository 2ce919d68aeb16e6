//! Ratings of hypothetical profiles.
//!
//! `Y_ij^(k) = base_k + a_k·α_i + η_i^(k) + X_ij·β_i^(k) + v_ij^(k)`, censored
//! at the question's scale bounds. Each investor's slope on a treated
//! characteristic is drawn from a two-point mixture (anti / pro).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore};
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::StartupProfile;
use crate::error::{Error, Result};
use crate::panel::{profile_covariates, EvaluationRecord, SlopeTruth, QUESTION_MAX};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureDraw {
    /// Each investor is anti independently with probability `share_anti`.
    #[default]
    Bernoulli,
    /// Exactly `round(share_anti · n)` investors, chosen at random, are anti.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeMixture {
    pub share_anti: f64,
    pub draw: MixtureDraw,
    pub effect_anti: [f64; 5],
    pub effect_pro: [f64; 5],
    /// Per-investor normal jitter around the mixture point.
    pub slope_sd: [f64; 5],
}

impl Default for SlopeMixture {
    fn default() -> Self {
        Self {
            share_anti: 0.0,
            draw: MixtureDraw::Bernoulli,
            effect_anti: [0.0; 5],
            effect_pro: [0.0; 5],
            slope_sd: [0.0; 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalDgpParams {
    pub base: [f64; 5],
    /// Loading of the investor effect α_i ~ N(0,1) on each question.
    pub investor_effect_sd: [f64; 5],
    /// Scale of the investor-question effect η_i^(k).
    pub question_effect_sd: [f64; 5],
    pub noise_sd: [f64; 5],
    pub noise_corr: [[f64; 5]; 5],
    pub female: SlopeMixture,
    pub asian: SlopeMixture,
    /// Extra female/asian effect on profiles in the second half of a session.
    pub female_second_half: [f64; 5],
    pub asian_second_half: [f64; 5],
    pub top_school: [f64; 5],
    pub skip_prob: [f64; 5],
    pub response_seconds_median: f64,
    pub response_seconds_sigma: f64,
    pub benchmark_year: i32,
}

impl Default for EvalDgpParams {
    fn default() -> Self {
        let mut corr = [[0.0; 5]; 5];
        for (k, row) in corr.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Self {
            base: [55.0, 50.0, 45.0, 5.0, 50.0],
            investor_effect_sd: [10.0, 10.0, 10.0, 2.0, 10.0],
            question_effect_sd: [5.0, 5.0, 5.0, 1.0, 5.0],
            noise_sd: [15.0, 15.0, 15.0, 3.0, 15.0],
            noise_corr: corr,
            female: SlopeMixture::default(),
            asian: SlopeMixture::default(),
            female_second_half: [0.0; 5],
            asian_second_half: [0.0; 5],
            top_school: [5.0, 5.0, 5.0, 1.0, 5.0],
            skip_prob: [0.0; 5],
            response_seconds_median: 45.0,
            response_seconds_sigma: 0.5,
            benchmark_year: 2020,
        }
    }
}

/// Lower-triangular `L` with `L Lᵀ = R` for a positive semi-definite `R`;
/// zero pivots leave their column empty.
fn psd_factor(r: &[[f64; 5]; 5]) -> Result<[[f64; 5]; 5]> {
    let mut l = [[0.0; 5]; 5];
    for j in 0..5 {
        let d = r[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -1e-10 {
            return Err(Error::InvalidInput("noise correlation matrix is not positive semi-definite".into()));
        }
        let d = d.max(0.0).sqrt();
        l[j][j] = d;
        for i in j + 1..5 {
            let s = r[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if d > 1e-12 {
                l[i][j] = s / d;
            } else if s.abs() > 1e-10 {
                return Err(Error::InvalidInput("noise correlation matrix is not positive semi-definite".into()));
            }
        }
    }
    Ok(l)
}

impl EvalDgpParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: &[f64; 5]| v.iter().all(|x| *x >= 0.0 && x.is_finite());
        if !nonneg(&self.investor_effect_sd) || !nonneg(&self.question_effect_sd) || !nonneg(&self.noise_sd) {
            return Err(Error::InvalidInput("effect and noise scales must be non-negative".into()));
        }
        for m in [&self.female, &self.asian] {
            if !(0.0..=1.0).contains(&m.share_anti) || !nonneg(&m.slope_sd) {
                return Err(Error::InvalidInput("mixture share must lie in [0,1], slope sd non-negative".into()));
            }
        }
        if !self.skip_prob.iter().all(|p| (0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("skip probabilities must lie in [0,1]".into()));
        }
        for i in 0..5 {
            for j in 0..5 {
                let c = self.noise_corr[i][j];
                if c != self.noise_corr[j][i] || !(-1.0..=1.0).contains(&c) || (i == j && c != 1.0) {
                    return Err(Error::InvalidInput("noise correlation must be symmetric with unit diagonal".into()));
                }
            }
        }
        if !(self.response_seconds_median > 0.0 && self.response_seconds_sigma >= 0.0) {
            return Err(Error::InvalidInput("response time needs median > 0 and sigma >= 0".into()));
        }
        psd_factor(&self.noise_corr).map(|_| ())
    }
}

/// One evaluator and the profiles shown to them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSession {
    pub investor_id: u64,
    pub profiles: Vec<StartupProfile>,
    /// Investor-level columns copied onto every record.
    pub covariates: BTreeMap<String, f64>,
}

fn draw_slopes(rng: &mut Rng, m: &SlopeMixture, preset: Option<bool>) -> ([f64; 5], bool) {
    let u: f64 = rng.random();
    let anti = preset.unwrap_or(u < m.share_anti);
    let point = if anti { m.effect_anti } else { m.effect_pro };
    let mut out = [0.0; 5];
    for k in 0..5 {
        let z: f64 = StandardNormal.sample(rng);
        out[k] = point[k] + m.slope_sd[k] * z;
    }
    (out, anti)
}

fn simulate_session(
    rng: &mut Rng,
    s: &EvalSession,
    p: &EvalDgpParams,
    chol: &[[f64; 5]; 5],
    preset: [Option<bool>; 2],
) -> Vec<EvaluationRecord> {
    let alpha: f64 = StandardNormal.sample(rng);
    let mut level = [0.0; 5];
    for k in 0..5 {
        let eta: f64 = StandardNormal.sample(rng);
        level[k] = p.base[k] + p.investor_effect_sd[k] * alpha + p.question_effect_sd[k] * eta;
    }
    let (female_slope, anti_female) = draw_slopes(rng, &p.female, preset[0]);
    let (asian_slope, _) = draw_slopes(rng, &p.asian, preset[1]);
    let seconds = LogNormal::new(p.response_seconds_median.ln(), p.response_seconds_sigma).expect("validated");
    s.profiles
        .iter()
        .map(|prof| {
            let female = if prof.gender.is_female() { 1.0 } else { 0.0 };
            let asian = if prof.race.is_asian() { 1.0 } else { 0.0 };
            let late = if prof.second_half { 1.0 } else { 0.0 };
            let top = if prof.education_tier == crate::design::EducationTier::Top { 1.0 } else { 0.0 };
            let mut z = [0.0; 5];
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let mut responses = [None; 5];
            for k in 0..5 {
                let noise: f64 = (0..=k).map(|m| chol[k][m] * z[m]).sum::<f64>() * p.noise_sd[k];
                let y = level[k]
                    + female * (female_slope[k] + late * p.female_second_half[k])
                    + asian * (asian_slope[k] + late * p.asian_second_half[k])
                    + top * p.top_school[k]
                    + noise;
                let skipped = rng.random::<f64>() < p.skip_prob[k];
                responses[k] = (!skipped).then(|| y.clamp(0.0, QUESTION_MAX[k]));
            }
            let mut covariates = profile_covariates(prof, p.benchmark_year);
            covariates.extend(s.covariates.iter().map(|(k, v)| (k.clone(), *v)));
            EvaluationRecord {
                investor_id: s.investor_id,
                profile_id: prof.profile_id.clone(),
                order_index: prof.order_index,
                second_half: prof.second_half,
                responses,
                response_seconds: seconds.sample(rng),
                covariates,
                truth: Some(SlopeTruth { female_slope, asian_slope, anti_female }),
            }
        })
        .collect()
}

fn exact_assignment(rng: &mut Rng, m: &SlopeMixture, n: usize) -> Option<Vec<bool>> {
    if m.draw != MixtureDraw::Exact {
        return None;
    }
    let k = (m.share_anti * n as f64).round() as usize;
    let mut flags: Vec<bool> = (0..n).map(|i| i < k).collect();
    flags.shuffle(rng);
    Some(flags)
}

/// Simulates every session on its own random substream, so the output does
/// not depend on how sessions are scheduled across threads.
pub fn simulate_evaluations(
    rng: &mut Rng,
    sessions: &[EvalSession],
    params: &EvalDgpParams,
) -> Result<Vec<EvaluationRecord>> {
    params.validate()?;
    let chol = psd_factor(&params.noise_corr)?;
    let seed = rng.next_u64();
    let female = exact_assignment(rng, &params.female, sessions.len());
    let asian = exact_assignment(rng, &params.asian, sessions.len());
    let per: Vec<Vec<EvaluationRecord>> = sessions
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let preset = [female.as_ref().map(|v| v[i]), asian.as_ref().map(|v| v[i])];
            simulate_session(&mut substream(seed, i as u64), s, params, &chol, preset)
        })
        .collect();
    Ok(per.into_iter().flatten().collect())
}
