//! Name pools, name-indicativeness indices and the profile component catalog.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Race {
    Asian,
    White,
}

impl Gender {
    pub fn is_female(self) -> bool {
        self == Gender::Female
    }
}

impl Race {
    pub fn is_asian(self) -> bool {
        self == Race::Asian
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameKind {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceCounts {
    pub asian: u64,
    pub white: u64,
    pub other: u64,
}

impl RaceCounts {
    pub fn total(&self) -> u64 {
        self.asian + self.white + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameEntry {
    pub text: String,
    pub kind: NameKind,
    pub count_female: u64,
    pub count_male: u64,
    pub count_by_race: RaceCounts,
}

impl NameEntry {
    pub fn first(text: &str, count_female: u64, count_male: u64) -> Self {
        Self {
            text: text.to_string(),
            kind: NameKind::First,
            count_female,
            count_male,
            count_by_race: RaceCounts::default(),
        }
    }

    pub fn last(text: &str, asian: u64, white: u64, other: u64) -> Self {
        Self {
            text: text.to_string(),
            kind: NameKind::Last,
            count_female: 0,
            count_male: 0,
            count_by_race: RaceCounts { asian, white, other },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count_female + self.count_male + self.count_by_race.total() == 0 {
            return Err(Error::InvalidInput(format!("name `{}` has no positive count", self.text)));
        }
        Ok(())
    }
}

/// Two-way indicativeness index `100·p/(p+q)` with `p = count/total`.
fn share_index(count: u64, count_other: u64, total: u64, total_other: u64) -> Result<f64> {
    if total == 0 || total_other == 0 {
        return Err(Error::Domain("population totals must be positive".into()));
    }
    if count == 0 && count_other == 0 {
        return Err(Error::Domain("name unobserved".into()));
    }
    let p = count as f64 / total as f64;
    let q = count_other as f64 / total_other as f64;
    Ok(100.0 * p / (p + q))
}

/// Female name index: `Pr(name|F) / (Pr(name|F) + Pr(name|M)) × 100`.
pub fn gender_index(
    count_female: u64,
    count_male: u64,
    total_female_births: u64,
    total_male_births: u64,
) -> Result<f64> {
    share_index(count_female, count_male, total_female_births, total_male_births)
}

/// Race index of a surname: target race against everyone else.
pub fn race_index(count_race: u64, count_other: u64, total_race: u64, total_other: u64) -> Result<f64> {
    share_index(count_race, count_other, total_race, total_other)
}

/// When the optional name-index cutoffs run relative to the frequency
/// difference rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffOrder {
    #[default]
    FilterThenCutoff,
    CutoffThenFilter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamePool {
    pub entries: Vec<NameEntry>,
    /// Female names need an index above this when cutoffs are active.
    pub gender_cutoff_high: f64,
    /// Male names need an index below this when cutoffs are active.
    pub gender_cutoff_low: f64,
    /// Minimum share of a surname's bearers in the target race.
    pub race_share_cutoff: f64,
    pub ambiguity_count_threshold: u64,
    /// Size of the per-gender "top" lists the ambiguity rule looks at.
    pub top_list_size: usize,
    /// Names kept per gender after filtering.
    pub pool_size: usize,
    pub white_last_pool_size: usize,
    pub asian_last_pool_size: Option<usize>,
    /// `None` disables the name-index cutoffs.
    pub cutoffs: Option<CutoffOrder>,
    /// Birth totals `(female, male)`; column sums of the file when absent.
    pub birth_totals: Option<(u64, u64)>,
}

impl NamePool {
    pub fn new(entries: Vec<NameEntry>) -> Self {
        Self {
            entries,
            gender_cutoff_high: 99.0,
            gender_cutoff_low: 3.0,
            race_share_cutoff: 0.85,
            ambiguity_count_threshold: 200_000,
            top_list_size: 1000,
            pool_size: 100,
            white_last_pool_size: 50,
            asian_last_pool_size: None,
            cutoffs: None,
            birth_totals: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidInput("name pool is empty".into()));
        }
        let in_range = |v: f64| (0.0..=100.0).contains(&v);
        if !in_range(self.gender_cutoff_low)
            || !in_range(self.gender_cutoff_high)
            || self.gender_cutoff_low >= self.gender_cutoff_high
        {
            return Err(Error::InvalidInput(format!(
                "gender cutoffs must satisfy 0 <= low < high <= 100, got {} / {}",
                self.gender_cutoff_low, self.gender_cutoff_high
            )));
        }
        if !(0.0..=1.0).contains(&self.race_share_cutoff) {
            return Err(Error::InvalidInput("race_share_cutoff must lie in [0,1]".into()));
        }
        self.entries.iter().try_for_each(NameEntry::validate)
    }

    fn firsts(&self) -> impl Iterator<Item = &NameEntry> {
        self.entries.iter().filter(|e| e.kind == NameKind::First)
    }

    fn totals(&self) -> (u64, u64) {
        self.birth_totals
            .unwrap_or_else(|| self.firsts().fold((0, 0), |(f, m), e| (f + e.count_female, m + e.count_male)))
    }

    /// Loads entries from `name,kind,count_female,count_male,count_asian,count_white,count_other`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        Self::from_csv_reader(&mut rdr)
    }

    pub fn from_csv_reader<R: std::io::Read>(rdr: &mut csv::Reader<R>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            name: String,
            kind: NameKind,
            count_female: u64,
            count_male: u64,
            count_asian: u64,
            count_white: u64,
            count_other: u64,
        }
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let r: Row = row?;
            entries.push(NameEntry {
                text: r.name,
                kind: r.kind,
                count_female: r.count_female,
                count_male: r.count_male,
                count_by_race: RaceCounts { asian: r.count_asian, white: r.count_white, other: r.count_other },
            });
        }
        let pool = Self::new(entries);
        pool.validate()?;
        Ok(pool)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FirstNameSplit {
    pub female_names: Vec<String>,
    pub male_names: Vec<String>,
    /// Ambiguous under the frequency-difference rule.
    pub rejected: Vec<String>,
    /// Failed the optional name-index cutoffs.
    pub cutoff_dropped: Vec<String>,
}

fn top_list<'a>(entries: &[&'a NameEntry], size: usize, key: fn(&NameEntry) -> u64) -> HashSet<&'a str> {
    let mut ranked: Vec<&&NameEntry> = entries.iter().filter(|e| key(e) > 0).collect();
    ranked.sort_by(|a, b| key(b).cmp(&key(a)).then_with(|| a.text.cmp(&b.text)));
    ranked.into_iter().take(size).map(|e| e.text.as_str()).collect()
}

/// Splits first names into female and male pools, dropping names that sit in
/// both top lists with a count difference below the ambiguity threshold.
pub fn filter_first_names(pool: &NamePool) -> Result<FirstNameSplit> {
    pool.validate()?;
    let (tot_f, tot_m) = pool.totals();
    let fni = |e: &NameEntry| gender_index(e.count_female, e.count_male, tot_f.max(1), tot_m.max(1));
    let passes_cutoff = |e: &NameEntry, g: Gender| -> Result<bool> {
        let v = fni(e)?;
        Ok(match g {
            Gender::Female => v > pool.gender_cutoff_high,
            Gender::Male => v < pool.gender_cutoff_low,
        })
    };

    let mut out = FirstNameSplit::default();
    let mut candidates: Vec<&NameEntry> = pool.firsts().collect();
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no first names in pool".into()));
    }
    if pool.cutoffs == Some(CutoffOrder::CutoffThenFilter) {
        let mut kept = Vec::new();
        for e in candidates {
            if passes_cutoff(e, Gender::Female)? || passes_cutoff(e, Gender::Male)? {
                kept.push(e);
            } else {
                out.cutoff_dropped.push(e.text.clone());
            }
        }
        candidates = kept;
    }

    let top_f = top_list(&candidates, pool.top_list_size, |e| e.count_female);
    let top_m = top_list(&candidates, pool.top_list_size, |e| e.count_male);

    let mut female: Vec<&NameEntry> = Vec::new();
    let mut male: Vec<&NameEntry> = Vec::new();
    for e in candidates {
        let in_f = top_f.contains(e.text.as_str());
        let in_m = top_m.contains(e.text.as_str());
        let gender = match (in_f, in_m) {
            (true, true) => {
                if e.count_female.abs_diff(e.count_male) < pool.ambiguity_count_threshold
                    || e.count_female == e.count_male
                {
                    out.rejected.push(e.text.clone());
                    continue;
                }
                if e.count_female > e.count_male {
                    Gender::Female
                } else {
                    Gender::Male
                }
            }
            (true, false) => Gender::Female,
            (false, true) => Gender::Male,
            (false, false) => continue,
        };
        if pool.cutoffs == Some(CutoffOrder::FilterThenCutoff) && !passes_cutoff(e, gender)? {
            out.cutoff_dropped.push(e.text.clone());
            continue;
        }
        match gender {
            Gender::Female => female.push(e),
            Gender::Male => male.push(e),
        }
    }
    female.sort_by(|a, b| b.count_female.cmp(&a.count_female).then_with(|| a.text.cmp(&b.text)));
    male.sort_by(|a, b| b.count_male.cmp(&a.count_male).then_with(|| a.text.cmp(&b.text)));
    out.female_names = female.into_iter().take(pool.pool_size).map(|e| e.text.clone()).collect();
    out.male_names = male.into_iter().take(pool.pool_size).map(|e| e.text.clone()).collect();
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LastNameSplit {
    pub asian_names: Vec<String>,
    pub white_names: Vec<String>,
}

/// Picks surnames whose bearers are predominantly Asian or white among the
/// most common surnames in the pool.
pub fn filter_last_names(pool: &NamePool) -> Result<LastNameSplit> {
    pool.validate()?;
    let mut lasts: Vec<&NameEntry> =
        pool.entries.iter().filter(|e| e.kind == NameKind::Last && e.count_by_race.total() > 0).collect();
    lasts.sort_by(|a, b| b.count_by_race.total().cmp(&a.count_by_race.total()).then_with(|| a.text.cmp(&b.text)));
    lasts.truncate(pool.top_list_size);
    let share = |c: u64, e: &NameEntry| c as f64 / e.count_by_race.total() as f64;
    let mut out = LastNameSplit::default();
    for e in lasts {
        if share(e.count_by_race.asian, e) > pool.race_share_cutoff {
            out.asian_names.push(e.text.clone());
        } else if share(e.count_by_race.white, e) > pool.race_share_cutoff {
            out.white_names.push(e.text.clone());
        }
    }
    out.white_names.truncate(pool.white_last_pool_size);
    if let Some(n) = pool.asian_last_pool_size {
        out.asian_names.truncate(n);
    }
    Ok(out)
}

/// First names by gender and surnames by race.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameBook {
    pub female_first: Vec<String>,
    pub male_first: Vec<String>,
    pub asian_last: Vec<String>,
    pub white_last: Vec<String>,
}

impl NameBook {
    pub fn from_pool(pool: &NamePool) -> Result<Self> {
        let firsts = filter_first_names(pool)?;
        let lasts = filter_last_names(pool)?;
        Ok(Self {
            female_first: firsts.female_names,
            male_first: firsts.male_names,
            asian_last: lasts.asian_names,
            white_last: lasts.white_names,
        })
    }

    pub fn firsts(&self, gender: Gender) -> &[String] {
        match gender {
            Gender::Female => &self.female_first,
            Gender::Male => &self.male_first,
        }
    }

    pub fn lasts(&self, race: Race) -> &[String] {
        match race {
            Race::Asian => &self.asian_last,
            Race::White => &self.white_last,
        }
    }

    fn validate(&self) -> Result<()> {
        for (label, list) in [
            ("female_first", &self.female_first),
            ("male_first", &self.male_first),
            ("asian_last", &self.asian_last),
            ("white_last", &self.white_last),
        ] {
            if list.is_empty() {
                return Err(Error::Config(format!("name list `{label}` is empty")));
            }
        }
        Ok(())
    }
}

impl Default for NameBook {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            female_first: v(&[
                "Emily",
                "Sarah",
                "Jessica",
                "Ashley",
                "Amanda",
                "Jennifer",
                "Elizabeth",
                "Megan",
                "Lauren",
                "Rachel",
            ]),
            male_first: v(&[
                "Michael",
                "Christopher",
                "Matthew",
                "Joshua",
                "Andrew",
                "Daniel",
                "Ryan",
                "Brian",
                "Kevin",
                "Jason",
            ]),
            asian_last: v(&["Wang", "Li", "Xu", "Chen", "Liu", "Yang", "Huang", "Zhao", "Wu", "Zhou"]),
            white_last: v(&[
                "Miller", "Anderson", "Taylor", "Thomas", "Moore", "Martin", "Thompson", "White", "Clark", "Lewis",
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FullName {
    pub first: String,
    pub last: String,
}

impl std::fmt::Display for FullName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.first, self.last)
    }
}

/// Draws a `(first, last)` pair for the cell uniformly among pairs not yet in
/// `used`, and records it.
pub fn draw_full_name(
    rng: &mut Rng,
    book: &NameBook,
    gender: Gender,
    race: Race,
    used: &mut HashSet<FullName>,
) -> Result<FullName> {
    let firsts = book.firsts(gender);
    let lasts = book.lasts(race);
    let cell = format!("{gender:?}/{race:?}");
    if firsts.is_empty() || lasts.is_empty() {
        return Err(Error::PoolExhausted(cell));
    }
    let make = |i: usize, j: usize| FullName { first: firsts[i].clone(), last: lasts[j].clone() };
    let free: Vec<(usize, usize)> = (0..firsts.len())
        .flat_map(|i| (0..lasts.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| !used.contains(&make(i, j)))
        .collect();
    if free.is_empty() {
        return Err(Error::PoolExhausted(cell));
    }
    let (i, j) = free[rng.random_range(0..free.len())];
    let name = make(i, j);
    used.insert(name.clone());
    Ok(name)
}

/// Sampling specification for every randomized profile component.
///
/// Binary components are given as the probability of the first level; list
/// components as weight vectors in the order documented on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComponentCatalog {
    pub benchmark_year: i32,
    pub female: f64,
    pub asian: f64,
    pub single_founder: f64,
    pub young: f64,
    /// Inclusive graduation-year range for young founders.
    pub young_graduation: (i32, i32),
    pub old_graduation: (i32, i32),
    pub top_school: f64,
    pub serial_founder: f64,
    pub founding_years: Vec<i32>,
    /// Weights for 1, 2, 3, 4 advantages.
    pub n_advantages: Vec<f64>,
    pub positive_traction: f64,
    /// Monthly revenue range in dollars.
    pub revenue: (f64, f64),
    pub growth: (f64, f64),
    pub b2b: f64,
    /// Weights for 0-10, 10-20, 20-50, 50+ employees.
    pub employees: Vec<f64>,
    pub domestic_market: f64,
    /// Weights for profit, profit with IPO plan, profit with ESG.
    pub mission: Vec<f64>,
    pub us_location: f64,
    /// Weights for 0, 1, 2, 3+ existing investors.
    pub existing_investors: Vec<f64>,
    pub top_schools: Vec<String>,
    pub common_schools: Vec<String>,
    pub advantages: Vec<String>,
    pub names: NameBook,
}

impl Default for ComponentCatalog {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            benchmark_year: 2020,
            female: 0.5,
            asian: 0.5,
            single_founder: 0.5,
            young: 0.5,
            young_graduation: (2005, 2019),
            old_graduation: (1980, 2005),
            top_school: 0.5,
            serial_founder: 0.5,
            founding_years: vec![2016, 2017, 2018, 2019],
            n_advantages: vec![0.25; 4],
            positive_traction: 0.5,
            revenue: (5_000.0, 80_000.0),
            growth: (0.05, 0.60),
            b2b: 0.5,
            employees: vec![0.25; 4],
            domestic_market: 0.5,
            mission: vec![0.5, 0.25, 0.25],
            us_location: 0.7,
            existing_investors: vec![0.25; 4],
            top_schools: v(&[
                "Harvard University",
                "Yale University",
                "Princeton University",
                "Columbia University",
                "Brown University",
                "Cornell University",
                "Dartmouth College",
                "University of Pennsylvania",
                "Stanford University",
                "MIT",
            ]),
            common_schools: v(&[
                "University of Arizona",
                "University of Kansas",
                "Ohio University",
                "University of Nebraska",
                "Kent State University",
                "University of Idaho",
                "University of Toledo",
                "Portland State University",
                "University of Memphis",
                "Wichita State University",
            ]),
            advantages: v(&[
                "proprietary technology protected by patents",
                "experienced management team",
                "strong network effects",
                "low customer acquisition cost",
                "exclusive distribution partnerships",
                "high switching costs for customers",
                "first mover in a fast-growing niche",
                "recurring subscription revenue",
            ]),
            names: NameBook::default(),
        }
    }
}

fn check_prob(label: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("`{label}` must be a probability, got {p}")))
    }
}

fn check_weights(label: &str, w: &[f64], len: usize) -> Result<()> {
    if w.len() != len {
        return Err(Error::Config(format!("`{label}` needs {len} weights, got {}", w.len())));
    }
    if w.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Config(format!("`{label}` weights must be non-negative")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("`{label}` weights sum to {s}, not 1")));
    }
    Ok(())
}

impl ComponentCatalog {
    pub fn validate(&self) -> Result<()> {
        for (label, p) in [
            ("female", self.female),
            ("asian", self.asian),
            ("single_founder", self.single_founder),
            ("young", self.young),
            ("top_school", self.top_school),
            ("serial_founder", self.serial_founder),
            ("positive_traction", self.positive_traction),
            ("b2b", self.b2b),
            ("domestic_market", self.domestic_market),
            ("us_location", self.us_location),
        ] {
            check_prob(label, p)?;
        }
        check_weights("n_advantages", &self.n_advantages, 4)?;
        check_weights("employees", &self.employees, 4)?;
        check_weights("mission", &self.mission, 3)?;
        check_weights("existing_investors", &self.existing_investors, 4)?;
        for (label, (lo, hi)) in [("young_graduation", self.young_graduation), ("old_graduation", self.old_graduation)]
        {
            if lo >= hi {
                return Err(Error::Config(format!("`{label}` range is degenerate")));
            }
            if hi > self.benchmark_year {
                return Err(Error::Config(format!("`{label}` extends past benchmark_year")));
            }
        }
        for (label, (lo, hi)) in [("revenue", self.revenue), ("growth", self.growth)] {
            if !(lo < hi) {
                return Err(Error::Config(format!("`{label}` range is degenerate")));
            }
        }
        if self.founding_years.is_empty() {
            return Err(Error::Config("`founding_years` is empty".into()));
        }
        if self.top_schools.is_empty() || self.common_schools.is_empty() {
            return Err(Error::Config("school lists must be non-empty".into()));
        }
        if self.advantages.len() < 4 {
            return Err(Error::Config("need at least 4 comparative advantages".into()));
        }
        self.names.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cat: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read catalog {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    /// Level → weight table for each categorical component, used by balance
    /// checks.
    pub fn marginals(&self) -> BTreeMap<&'static str, Vec<f64>> {
        let bin = |p: f64| vec![p, 1.0 - p];
        let mut m = BTreeMap::new();
        m.insert("female", bin(self.female));
        m.insert("asian", bin(self.asian));
        m.insert("single_founder", bin(self.single_founder));
        m.insert("young", bin(self.young));
        m.insert("top_school", bin(self.top_school));
        m.insert("serial_founder", bin(self.serial_founder));
        m.insert("positive_traction", bin(self.positive_traction));
        m.insert("b2b", bin(self.b2b));
        m.insert("domestic_market", bin(self.domestic_market));
        m.insert("us_location", bin(self.us_location));
        m.insert("n_advantages", self.n_advantages.clone());
        m.insert("employees", self.employees.clone());
        m.insert("mission", self.mission.clone());
        m.insert("existing_investors", self.existing_investors.clone());
        let k = self.founding_years.len();
        m.insert("founding_year", vec![1.0 / k as f64; k]);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn gender_index_examples() {
        assert_eq!(gender_index(100, 0, 1_000_000, 1_000_000).unwrap(), 100.0);
        assert_eq!(gender_index(500, 500, 1_000_000, 1_000_000).unwrap(), 50.0);
        assert!((gender_index(990, 10, 1_000_000, 1_000_000).unwrap() - 99.0).abs() < 1e-12);
        assert!(matches!(gender_index(0, 0, 10, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn race_index_examples() {
        assert_eq!(race_index(50, 0, 100_000, 1_000_000).unwrap(), 100.0);
        assert!((race_index(85, 15, 1_000_000, 1_000_000).unwrap() - 85.0).abs() < 1e-12);
        assert_eq!(race_index(0, 40, 100_000, 1_000_000).unwrap(), 0.0);
    }

    #[test]
    fn ambiguity_rule_examples() {
        let pool = NamePool::new(vec![
            NameEntry::first("Jordan", 300_000, 250_000),
            NameEntry::first("Emma", 1_000_000, 50_000),
        ]);
        let split = filter_first_names(&pool).unwrap();
        assert_eq!(split.female_names, vec!["Emma"]);
        assert!(split.male_names.is_empty());
        assert_eq!(split.rejected, vec!["Jordan"]);
    }

    #[test]
    fn single_male_name() {
        let pool = NamePool::new(vec![NameEntry::first("James", 0, 5_000)]);
        let split = filter_first_names(&pool).unwrap();
        assert_eq!(
            (split.female_names.len(), split.male_names, split.rejected.len()),
            (0, vec!["James".to_string()], 0)
        );
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(filter_first_names(&NamePool::new(vec![])).is_err());
    }

    #[test]
    fn cutoffs_drop_weakly_indicative_names() {
        let mut pool = NamePool::new(vec![
            NameEntry::first("Emma", 1_000_000, 50_000),
            NameEntry::first("Olivia", 1_000_000, 100),
            NameEntry::first("Liam", 10, 900_000),
        ]);
        pool.birth_totals = Some((10_000_000, 10_000_000));
        pool.cutoffs = Some(CutoffOrder::FilterThenCutoff);
        let a = filter_first_names(&pool).unwrap();
        assert_eq!(a.female_names, vec!["Olivia"]);
        assert_eq!(a.male_names, vec!["Liam"]);
        assert_eq!(a.cutoff_dropped, vec!["Emma"]);
        pool.cutoffs = Some(CutoffOrder::CutoffThenFilter);
        let b = filter_first_names(&pool).unwrap();
        assert_eq!((a.female_names, a.male_names), (b.female_names, b.male_names));
    }

    #[test]
    fn pool_truncates_by_frequency() {
        let mut pool = NamePool::new((0..5).map(|i| NameEntry::first(&format!("F{i}"), 1000 + i, 0)).collect());
        pool.pool_size = 2;
        assert_eq!(filter_first_names(&pool).unwrap().female_names, vec!["F4", "F3"]);
    }

    #[test]
    fn last_names_by_share() {
        let pool = NamePool::new(vec![
            NameEntry::last("Chen", 90, 5, 5),
            NameEntry::last("Miller", 1, 95, 4),
            NameEntry::last("Garcia", 1, 20, 79),
        ]);
        let s = filter_last_names(&pool).unwrap();
        assert_eq!(s.asian_names, vec!["Chen"]);
        assert_eq!(s.white_names, vec!["Miller"]);
    }

    #[test]
    fn draws_without_replacement_until_exhausted() {
        let book = NameBook {
            female_first: vec!["Ann".into()],
            male_first: vec!["Bob".into()],
            asian_last: vec!["Li".into(), "Wu".into()],
            white_last: vec!["Hill".into()],
        };
        let mut rng = seeded(3);
        let mut used = HashSet::new();
        let a = draw_full_name(&mut rng, &book, Gender::Female, Race::Asian, &mut used).unwrap();
        let b = draw_full_name(&mut rng, &book, Gender::Female, Race::Asian, &mut used).unwrap();
        assert_ne!(a, b);
        assert!(matches!(
            draw_full_name(&mut rng, &book, Gender::Female, Race::Asian, &mut used),
            Err(Error::PoolExhausted(_))
        ));
        let forced = draw_full_name(&mut rng, &book, Gender::Male, Race::White, &mut used).unwrap();
        assert_eq!(forced.to_string(), "Bob Hill");
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let book = NameBook::default();
        let draw = || {
            let mut used = HashSet::new();
            draw_full_name(&mut seeded(11), &book, Gender::Male, Race::Asian, &mut used).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn default_catalog_is_valid_and_roundtrips() {
        let c = ComponentCatalog::default();
        c.validate().unwrap();
        let back = ComponentCatalog::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let bad = ComponentCatalog::from_toml_str("mission = [0.5, 0.5, 0.5]");
        assert!(matches!(bad, Err(Error::Config(_))));
    }
}
