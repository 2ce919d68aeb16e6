//! Dictator-game donations, censored to the $0–$15 endowment.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DONATION_CAP: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DonationParams {
    pub base: f64,
    pub female_founder: f64,
    pub asian_founder: f64,
    pub female_investor: f64,
    pub asian_investor: f64,
    pub female_founder_x_female_investor: f64,
    pub asian_founder_x_asian_investor: f64,
    pub noise_sd: f64,
}

impl Default for DonationParams {
    fn default() -> Self {
        Self {
            base: 11.10,
            female_founder: 0.0,
            asian_founder: 0.0,
            female_investor: 0.0,
            asian_investor: 0.0,
            female_founder_x_female_investor: 0.0,
            asian_founder_x_asian_investor: 0.0,
            noise_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DonationInvestor {
    pub investor_id: u64,
    pub female: bool,
    pub asian: bool,
}

/// One donation per investor; `displayed[i]` is the (female, asian) founder
/// shown to investor `i`.
pub fn simulate_donations(
    rng: &mut Rng,
    investors: &[DonationInvestor],
    displayed: &[(bool, bool)],
    p: &DonationParams,
) -> Result<Vec<f64>> {
    if investors.len() != displayed.len() {
        return Err(Error::InvalidInput("one displayed founder per investor required".into()));
    }
    if !(p.noise_sd >= 0.0) {
        return Err(Error::InvalidInput("donation noise sd must be non-negative".into()));
    }
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    Ok(investors
        .iter()
        .zip(displayed)
        .map(|(inv, &(ff, fa))| {
            let e: f64 = StandardNormal.sample(rng);
            let y = p.base
                + p.female_founder * b(ff)
                + p.asian_founder * b(fa)
                + p.female_investor * b(inv.female)
                + p.asian_investor * b(inv.asian)
                + p.female_founder_x_female_investor * b(ff && inv.female)
                + p.asian_founder_x_asian_investor * b(fa && inv.asian)
                + p.noise_sd * e;
            y.clamp(0.0, DONATION_CAP)
        })
        .collect())
}
