//! Threshold models of the open/reply decision.
//!
//! An email is opened when perceived quality clears the investor's threshold:
//! `β·X + X_II + γ·G + F > c`, where the unobserved component `X_II` has
//! standard deviation `exp(ω·G)` and `F` is a normal fund effect shared by all
//! emails to the same fund.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{CampaignSchedule, Cell};
use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng::Rng;
use crate::special::{norm_cdf, norm_interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CallbackDgpParams {
    pub threshold: f64,
    /// Upper threshold of the two-threshold rule.
    pub upper_threshold: Option<f64>,
    pub quality_level: f64,
    pub beta_quality: f64,
    pub beta_ivy: f64,
    pub beta_advantage: f64,
    pub gamma_female: f64,
    pub gamma_asian: f64,
    /// Log standard deviation of the unobserved component for female senders.
    pub omega_female: f64,
    pub fund_sd: f64,
}

impl Default for CallbackDgpParams {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            upper_threshold: None,
            quality_level: 1.0,
            beta_quality: 0.5,
            beta_ivy: 0.4,
            beta_advantage: 0.4,
            gamma_female: 0.0,
            gamma_asian: 0.0,
            omega_female: 0.0,
            fund_sd: 0.2,
        }
    }
}

impl CallbackDgpParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.threshold,
            self.quality_level,
            self.beta_quality,
            self.beta_ivy,
            self.beta_advantage,
            self.gamma_female,
            self.gamma_asian,
            self.omega_female,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("callback parameters must be finite".into()));
        }
        if !(self.fund_sd >= 0.0 && self.fund_sd.is_finite()) {
            return Err(Error::InvalidInput("fund effect sd must be non-negative".into()));
        }
        if let Some(c2) = self.upper_threshold {
            if !(c2 > self.threshold) {
                return Err(Error::InvalidInput(format!(
                    "upper threshold {c2} must exceed lower threshold {}",
                    self.threshold
                )));
            }
        }
        Ok(())
    }

    /// Mean perceived quality of a cell, before the threshold.
    pub fn mean(&self, cell: Cell) -> f64 {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        self.beta_quality * self.quality_level
            + self.beta_ivy * b(cell.ivy)
            + self.beta_advantage * b(cell.advantage)
            + self.gamma_female * b(cell.female)
            + self.gamma_asian * b(cell.asian)
    }

    /// Standard deviation of the unobserved component alone.
    pub fn sigma(&self, cell: Cell) -> f64 {
        if cell.female {
            self.omega_female.exp()
        } else {
            1.0
        }
    }

    /// Total latent standard deviation including the fund effect.
    pub fn total_sd(&self, cell: Cell) -> f64 {
        (self.sigma(cell).powi(2) + self.fund_sd * self.fund_sd).sqrt()
    }

    pub fn open_probability(&self, cell: Cell) -> f64 {
        let (mu, sd) = (self.mean(cell), self.total_sd(cell));
        match self.upper_threshold {
            None => norm_cdf((mu - self.threshold) / sd),
            Some(c2) => norm_interval((self.threshold - mu) / sd, (c2 - mu) / sd),
        }
    }
}

fn fund_effects(rng: &mut Rng, schedule: &CampaignSchedule, sd: f64) -> BTreeMap<u64, f64> {
    let mut funds: Vec<u64> = schedule.treatments.iter().map(|t| t.fund_id).collect();
    funds.sort_unstable();
    funds.dedup();
    funds
        .into_iter()
        .map(|f| {
            let z: f64 = StandardNormal.sample(rng);
            (f, sd * z)
        })
        .collect()
}

fn latent_draws(rng: &mut Rng, schedule: &CampaignSchedule, params: &CallbackDgpParams) -> Vec<f64> {
    let funds = fund_effects(rng, schedule, params.fund_sd);
    schedule
        .treatments
        .iter()
        .map(|t| {
            let e: f64 = StandardNormal.sample(rng);
            params.mean(t.cell) + params.sigma(t.cell) * e + funds[&t.fund_id]
        })
        .collect()
}

/// Open indicators under the single-threshold rule, one per scheduled email.
/// Any upper threshold in `params` is ignored.
pub fn simulate_callbacks(rng: &mut Rng, schedule: &CampaignSchedule, params: &CallbackDgpParams) -> Result<Vec<bool>> {
    params.validate()?;
    Ok(latent_draws(rng, schedule, params).into_iter().map(|v| v > params.threshold).collect())
}

/// Open indicators under the rule `c1 < latent < c2`.
pub fn simulate_two_threshold_callbacks(
    rng: &mut Rng,
    schedule: &CampaignSchedule,
    params: &CallbackDgpParams,
) -> Result<Vec<bool>> {
    params.validate()?;
    let c2 = params
        .upper_threshold
        .ok_or_else(|| Error::InvalidInput("two-threshold rule needs an upper threshold".into()))?;
    let c1 = params.threshold;
    Ok(latent_draws(rng, schedule, params).into_iter().map(|v| c1 < v && v < c2).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LatentRule {
    /// `T = 1` iff `intercept + βx + γG + σ_G ε > 0`.
    Single { intercept: f64 },
    /// `T = 1` iff `lower < βx + γG + σ_G ε < upper`.
    Interval { lower: f64, upper: f64 },
}

/// Synthetic binary-choice data with a continuous quality regressor, used to
/// check the heteroskedastic estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDesign {
    pub n: usize,
    pub n_clusters: usize,
    pub x_mean: f64,
    pub x_sd: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub group_share: f64,
    pub rule: LatentRule,
}

impl Default for LatentDesign {
    fn default() -> Self {
        Self {
            n: 10_000,
            n_clusters: 500,
            x_mean: 0.0,
            x_sd: 1.0,
            beta: 1.0,
            gamma: 0.0,
            omega: 0.0,
            group_share: 0.5,
            rule: LatentRule::Single { intercept: 0.0 },
        }
    }
}

/// Draws a panel with outcome `t` and columns `x`, `female`; rows are
/// clustered round-robin into `n_clusters` groups.
pub fn simulate_latent_panel(rng: &mut Rng, d: &LatentDesign) -> Result<Panel<f64>> {
    if d.n == 0 || d.n_clusters == 0 {
        return Err(Error::InvalidInput("latent design needs rows and clusters".into()));
    }
    if !(0.0..=1.0).contains(&d.group_share) || !(d.x_sd >= 0.0) {
        return Err(Error::InvalidInput("group share must lie in [0,1] and x sd be non-negative".into()));
    }
    if let LatentRule::Interval { lower, upper } = d.rule {
        if !(upper > lower) {
            return Err(Error::InvalidInput("upper threshold must exceed lower threshold".into()));
        }
    }
    let mut t = Vec::with_capacity(d.n);
    let mut x = Vec::with_capacity(d.n);
    let mut g = Vec::with_capacity(d.n);
    let sd_g = d.omega.exp();
    for _ in 0..d.n {
        let xi = d.x_mean
            + d.x_sd * {
                let z: f64 = StandardNormal.sample(rng);
                z
            };
        let gi = rng.random::<f64>() < d.group_share;
        let e: f64 = StandardNormal.sample(rng);
        let index = d.beta * xi + if gi { d.gamma + sd_g * e } else { e };
        let ti = match d.rule {
            LatentRule::Single { intercept } => intercept + index > 0.0,
            LatentRule::Interval { lower, upper } => lower < index && index < upper,
        };
        t.push(if ti { 1.0 } else { 0.0 });
        x.push(xi);
        g.push(if gi { 1.0 } else { 0.0 });
    }
    let clusters = (0..d.n).map(|r| r % d.n_clusters).collect();
    Panel::new("t", t, vec!["x".into(), "female".into()], vec![x, g])?.with_cluster(clusters)
}
