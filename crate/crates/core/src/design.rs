//! Factorial randomization: survey profiles, 16-cell pitch-email treatments
//! and campaign schedules.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::catalog::{draw_full_name, ComponentCatalog, FullName, Gender, NameBook, Race};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Approximate founder age implied by a graduation year.
pub fn approx_age(graduation_year: i32, benchmark_year: i32) -> Result<i32> {
    if graduation_year > benchmark_year {
        return Err(Error::Domain(format!(
            "graduation year {graduation_year} is after benchmark year {benchmark_year}"
        )));
    }
    Ok(benchmark_year - graduation_year + 23)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationTier {
    Top,
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmployeesBucket {
    #[serde(rename = "0-10")]
    UpTo10,
    #[serde(rename = "10-20")]
    UpTo20,
    #[serde(rename = "20-50")]
    UpTo50,
    #[serde(rename = "50+")]
    Over50,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mission {
    Profit,
    ProfitIpo,
    ProfitEsg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    B2b,
    B2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Traction {
    None,
    Positive { monthly_revenue: f64, growth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartupProfile {
    pub profile_id: String,
    pub founders: Vec<FullName>,
    pub gender: Gender,
    pub race: Race,
    pub graduation_year: i32,
    pub age: i32,
    pub young: bool,
    pub education_tier: EducationTier,
    pub school: String,
    pub serial_founder: bool,
    pub founding_year: i32,
    pub advantages: Vec<String>,
    pub traction: Traction,
    pub category: Category,
    pub employees: EmployeesBucket,
    pub domestic_market: bool,
    pub mission: Mission,
    pub us_location: bool,
    /// 0, 1, 2 or 3 (meaning 3+).
    pub existing_investors: u8,
    pub order_index: u32,
    pub second_half: bool,
}

impl StartupProfile {
    pub fn n_advantages(&self) -> usize {
        self.advantages.len()
    }

    pub fn single_founder(&self) -> bool {
        self.founders.len() == 1
    }
}

fn pick_index(rng: &mut Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn bernoulli(rng: &mut Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn distinct_team_names(rng: &mut Rng, book: &NameBook, gender: Gender, race: Race, n: usize) -> Vec<FullName> {
    let mut used = HashSet::new();
    let mut names = Vec::with_capacity(n);
    for _ in 0..n {
        match draw_full_name(rng, book, gender, race, &mut used) {
            Ok(name) => names.push(name),
            // one-name cells: the co-founder shares the pair
            Err(_) => names.push(names[0].clone()),
        }
    }
    names
}

/// Draws one profile; every component is independent given the catalog.
pub fn generate_profile(
    rng: &mut Rng,
    catalog: &ComponentCatalog,
    profile_id: &str,
    order_index: u32,
    session_len: u32,
) -> Result<StartupProfile> {
    if order_index == 0 || order_index > session_len {
        return Err(Error::InvalidInput(format!("order_index {order_index} outside 1..={session_len}")));
    }
    let gender = if bernoulli(rng, catalog.female) { Gender::Female } else { Gender::Male };
    let race = if bernoulli(rng, catalog.asian) { Race::Asian } else { Race::White };
    let n_founders = if bernoulli(rng, catalog.single_founder) { 1 } else { 2 };
    let founders = distinct_team_names(rng, &catalog.names, gender, race, n_founders);

    let young = bernoulli(rng, catalog.young);
    let (lo, hi) = if young { catalog.young_graduation } else { catalog.old_graduation };
    let graduation_year = rng.random_range(lo..=hi);
    let age = approx_age(graduation_year, catalog.benchmark_year)?;

    let top = bernoulli(rng, catalog.top_school);
    let (education_tier, school) = if top {
        (EducationTier::Top, catalog.top_schools.choose(rng).expect("validated").clone())
    } else {
        (EducationTier::Common, catalog.common_schools.choose(rng).expect("validated").clone())
    };
    let serial_founder = bernoulli(rng, catalog.serial_founder);
    let founding_year = *catalog.founding_years.choose(rng).expect("validated");
    let n_adv = pick_index(rng, &catalog.n_advantages) + 1;
    let advantages = catalog.advantages.choose_multiple(rng, n_adv).cloned().collect();
    let traction = if bernoulli(rng, catalog.positive_traction) {
        Traction::Positive {
            monthly_revenue: rng.random_range(catalog.revenue.0..=catalog.revenue.1),
            growth: rng.random_range(catalog.growth.0..=catalog.growth.1),
        }
    } else {
        Traction::None
    };
    let category = if bernoulli(rng, catalog.b2b) { Category::B2b } else { Category::B2c };
    let employees =
        [EmployeesBucket::UpTo10, EmployeesBucket::UpTo20, EmployeesBucket::UpTo50, EmployeesBucket::Over50]
            [pick_index(rng, &catalog.employees)];
    let domestic_market = bernoulli(rng, catalog.domestic_market);
    let mission = [Mission::Profit, Mission::ProfitIpo, Mission::ProfitEsg][pick_index(rng, &catalog.mission)];
    let us_location = bernoulli(rng, catalog.us_location);
    let existing_investors = pick_index(rng, &catalog.existing_investors) as u8;

    Ok(StartupProfile {
        profile_id: profile_id.to_string(),
        founders,
        gender,
        race,
        graduation_year,
        age,
        young,
        education_tier,
        school,
        serial_founder,
        founding_year,
        advantages,
        traction,
        category,
        employees,
        domestic_market,
        mission,
        us_location,
        existing_investors,
        order_index,
        second_half: order_index > session_len / 2,
    })
}

/// Category index of each randomized component, in the order of
/// [`ComponentCatalog::marginals`] (binary components: 0 = present).
pub fn component_categories(p: &StartupProfile, catalog: &ComponentCatalog) -> BTreeMap<&'static str, usize> {
    let bin = |x: bool| usize::from(!x);
    let mut m = BTreeMap::new();
    m.insert("female", bin(p.gender.is_female()));
    m.insert("asian", bin(p.race.is_asian()));
    m.insert("single_founder", bin(p.single_founder()));
    m.insert("young", bin(p.young));
    m.insert("top_school", bin(p.education_tier == EducationTier::Top));
    m.insert("serial_founder", bin(p.serial_founder));
    m.insert("positive_traction", bin(matches!(p.traction, Traction::Positive { .. })));
    m.insert("b2b", bin(p.category == Category::B2b));
    m.insert("domestic_market", bin(p.domestic_market));
    m.insert("us_location", bin(p.us_location));
    m.insert("n_advantages", p.n_advantages() - 1);
    m.insert("employees", p.employees as usize);
    m.insert("mission", p.mission as usize);
    m.insert("existing_investors", usize::from(p.existing_investors));
    let year = catalog.founding_years.iter().position(|&y| y == p.founding_year).unwrap_or(usize::MAX);
    m.insert("founding_year", year);
    m
}

/// One evaluator's session of `len` profiles with a break after `len / 2`.
pub fn generate_session(
    rng: &mut Rng,
    catalog: &ComponentCatalog,
    session_id: &str,
    len: u32,
) -> Result<Vec<StartupProfile>> {
    if len == 0 || len % 2 != 0 {
        return Err(Error::InvalidInput(format!("session length must be positive and even, got {len}")));
    }
    catalog.validate()?;
    (1..=len).map(|j| generate_profile(rng, catalog, &format!("{session_id}-{j:02}"), j, len)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub female: bool,
    pub asian: bool,
    pub ivy: bool,
    pub advantage: bool,
}

impl Cell {
    pub const COUNT: usize = 16;

    pub fn from_index(i: usize) -> Self {
        assert!(i < Self::COUNT);
        Self { female: i & 8 != 0, asian: i & 4 != 0, ivy: i & 2 != 0, advantage: i & 1 != 0 }
    }

    pub fn index(self) -> usize {
        (self.female as usize) << 3 | (self.asian as usize) << 2 | (self.ivy as usize) << 1 | self.advantage as usize
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (0..Self::COUNT).map(Self::from_index)
    }

    pub fn gender(self) -> Gender {
        if self.female {
            Gender::Female
        } else {
            Gender::Male
        }
    }

    pub fn race(self) -> Race {
        if self.asian {
            Race::Asian
        } else {
            Race::White
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvyVariant {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartupIdea {
    pub idea_id: u64,
    pub ivy_variant: IvyVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Investor {
    pub investor_id: u64,
    pub fund_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailTreatment {
    pub email_id: String,
    pub startup_idea_id: u64,
    pub investor_id: u64,
    pub fund_id: u64,
    pub cell: Cell,
    pub ivy_variant: IvyVariant,
    pub sender: Option<FullName>,
    pub send_day: Option<u32>,
}

/// Assigns one investor per fund to the 16 cells for a single idea, with
/// cell sizes differing by at most one.
pub fn assign_cells(rng: &mut Rng, investors: &[Investor], idea: StartupIdea) -> Result<Vec<EmailTreatment>> {
    let mut by_fund: BTreeMap<u64, Vec<Investor>> = BTreeMap::new();
    for inv in investors {
        by_fund.entry(inv.fund_id).or_default().push(*inv);
    }
    if by_fund.len() < Cell::COUNT {
        return Err(Error::InsufficientFunds { needed: Cell::COUNT, available: by_fund.len() });
    }
    let mut chosen: Vec<Investor> = by_fund
        .into_values()
        .map(|mut members| {
            members.sort();
            members.dedup_by_key(|m| m.investor_id);
            *members.choose(rng).expect("non-empty fund")
        })
        .collect();
    chosen.shuffle(rng);

    let n = chosen.len();
    let mut cells: Vec<usize> = (0..n).map(|k| k % Cell::COUNT).collect();
    // which cells receive the remainder is itself random
    let mut order: Vec<usize> = (0..Cell::COUNT).collect();
    order.shuffle(rng);
    for c in cells.iter_mut() {
        *c = order[*c];
    }
    cells.shuffle(rng);

    Ok(chosen
        .into_iter()
        .zip(cells)
        .map(|(inv, c)| EmailTreatment {
            email_id: format!("{}-{}", idea.idea_id, inv.investor_id),
            startup_idea_id: idea.idea_id,
            investor_id: inv.investor_id,
            fund_id: inv.fund_id,
            cell: Cell::from_index(c),
            ivy_variant: idea.ivy_variant,
            sender: None,
            send_day: None,
        })
        .collect())
}

/// Gives every (idea, cell) one sender name, drawn without replacement across
/// the whole campaign.
pub fn name_senders(
    rng: &mut Rng,
    treatments: &mut [EmailTreatment],
    book: &NameBook,
    used: &mut HashSet<FullName>,
) -> Result<()> {
    let keys: BTreeSet<(u64, Cell)> = treatments.iter().map(|t| (t.startup_idea_id, t.cell)).collect();
    let mut names = BTreeMap::new();
    for (idea, cell) in keys {
        names.insert((idea, cell), draw_full_name(rng, book, cell.gender(), cell.race(), used)?);
    }
    for t in treatments {
        t.sender = Some(names[&(t.startup_idea_id, t.cell)].clone());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSchedule {
    pub treatments: Vec<EmailTreatment>,
    pub min_gap_days: u32,
}

impl CampaignSchedule {
    pub fn sends_per_investor(&self) -> BTreeMap<u64, usize> {
        let mut m = BTreeMap::new();
        for t in &self.treatments {
            *m.entry(t.investor_id).or_insert(0) += 1;
        }
        m
    }

    /// Investors outside the 3–5 emails target.
    pub fn off_target_investors(&self) -> Vec<u64> {
        self.sends_per_investor().into_iter().filter(|&(_, n)| !(3..=5).contains(&n)).map(|(id, _)| id).collect()
    }
}

/// Greedy earliest-feasible scheduling: each investor's emails go out
/// `min_gap_days` apart starting at `start_day`, in idea order.
/// `window_days` bounds the campaign length when given.
pub fn schedule_campaign(
    mut assignments: Vec<EmailTreatment>,
    start_day: u32,
    min_gap_days: u32,
    window_days: Option<u32>,
) -> Result<CampaignSchedule> {
    let mut seen = HashSet::new();
    for t in &assignments {
        if !seen.insert((t.startup_idea_id, t.fund_id)) {
            return Err(Error::InvalidInput(format!(
                "idea {} assigned twice to fund {}",
                t.startup_idea_id, t.fund_id
            )));
        }
    }
    let mut per_investor: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, t) in assignments.iter().enumerate() {
        per_investor.entry(t.investor_id).or_default().push(k);
    }
    let mut infeasible = Vec::new();
    for (&inv, idxs) in per_investor.iter_mut() {
        idxs.sort_by_key(|&k| (assignments[k].startup_idea_id, assignments[k].email_id.clone()));
        for (slot, &k) in idxs.iter().enumerate() {
            let day = start_day + slot as u32 * min_gap_days;
            if let Some(w) = window_days {
                if day >= start_day + w {
                    infeasible.push(inv);
                    break;
                }
            }
            assignments[k].send_day = Some(day);
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::InfeasibleSchedule(infeasible));
    }
    assignments.sort_by(|a, b| a.send_day.cmp(&b.send_day).then_with(|| a.email_id.cmp(&b.email_id)));
    Ok(CampaignSchedule { treatments: assignments, min_gap_days })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    DuplicateFund { idea: u64, fund: u64 },
    GapTooShort { investor: u64, days: (u32, u32) },
    Unscheduled { email_id: String },
    CellImbalance { idea: u64, min: usize, max: usize },
}

/// Re-checks a schedule from scratch without trusting how it was built.
pub fn check_schedule(schedule: &CampaignSchedule) -> std::result::Result<(), Vec<ScheduleViolation>> {
    let mut v = Vec::new();
    let mut funds: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut days: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    let mut cells: BTreeMap<u64, [usize; Cell::COUNT]> = BTreeMap::new();
    for t in &schedule.treatments {
        *funds.entry((t.startup_idea_id, t.fund_id)).or_insert(0) += 1;
        match t.send_day {
            Some(d) => days.entry(t.investor_id).or_default().push(d),
            None => v.push(ScheduleViolation::Unscheduled { email_id: t.email_id.clone() }),
        }
        cells.entry(t.startup_idea_id).or_insert([0; Cell::COUNT])[t.cell.index()] += 1;
    }
    for ((idea, fund), n) in funds {
        if n > 1 {
            v.push(ScheduleViolation::DuplicateFund { idea, fund });
        }
    }
    for (investor, mut ds) in days {
        ds.sort_unstable();
        for w in ds.windows(2) {
            if w[1] - w[0] < schedule.min_gap_days {
                v.push(ScheduleViolation::GapTooShort { investor, days: (w[0], w[1]) });
            }
        }
    }
    for (idea, counts) in cells {
        let (min, max) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        if max - min > 1 {
            v.push(ScheduleViolation::CellImbalance { idea, min, max });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

pub fn write_profiles_csv<W: Write>(out: W, profiles: &[StartupProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "profile_id",
        "order_index",
        "second_half",
        "founders",
        "female",
        "asian",
        "graduation_year",
        "age",
        "young",
        "education_tier",
        "school",
        "serial_founder",
        "founding_year",
        "n_advantages",
        "advantages",
        "positive_traction",
        "monthly_revenue",
        "growth",
        "category",
        "employees",
        "domestic_market",
        "mission",
        "us_location",
        "existing_investors",
    ])?;
    for p in profiles {
        let (pos, rev, gr) = match p.traction {
            Traction::None => ("0", String::new(), String::new()),
            Traction::Positive { monthly_revenue, growth } => {
                ("1", format!("{monthly_revenue:.2}"), format!("{growth:.4}"))
            }
        };
        let b = |x: bool| if x { "1" } else { "0" };
        let founders: Vec<String> = p.founders.iter().map(ToString::to_string).collect();
        w.write_record([
            p.profile_id.as_str(),
            &p.order_index.to_string(),
            b(p.second_half),
            &founders.join("; "),
            b(p.gender.is_female()),
            b(p.race.is_asian()),
            &p.graduation_year.to_string(),
            &p.age.to_string(),
            b(p.young),
            enum_label(&p.education_tier).as_str(),
            &p.school,
            b(p.serial_founder),
            &p.founding_year.to_string(),
            &p.n_advantages().to_string(),
            &p.advantages.join("; "),
            pos,
            &rev,
            &gr,
            enum_label(&p.category).as_str(),
            enum_label(&p.employees).as_str(),
            b(p.domestic_market),
            enum_label(&p.mission).as_str(),
            b(p.us_location),
            &p.existing_investors.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_schedule_csv<W: Write>(out: W, schedule: &CampaignSchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "email_id",
        "investor_id",
        "fund_id",
        "idea",
        "female",
        "asian",
        "ivy",
        "advantage",
        "ivy_variant",
        "sender",
        "send_day",
    ])?;
    let b = |x: bool| if x { "1" } else { "0" };
    for t in &schedule.treatments {
        w.write_record([
            t.email_id.as_str(),
            &t.investor_id.to_string(),
            &t.fund_id.to_string(),
            &t.startup_idea_id.to_string(),
            b(t.cell.female),
            b(t.cell.asian),
            b(t.cell.ivy),
            b(t.cell.advantage),
            enum_label(&t.ivy_variant).as_str(),
            &t.sender.as_ref().map(ToString::to_string).unwrap_or_default(),
            &t.send_day.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn enum_label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn investors(n: u64) -> Vec<Investor> {
        (0..n).map(|i| Investor { investor_id: i, fund_id: i }).collect()
    }

    const IDEA: StartupIdea = StartupIdea { idea_id: 1, ivy_variant: IvyVariant::Pure };

    #[test]
    fn age_formula() {
        assert_eq!(approx_age(2005, 2020).unwrap(), 38);
        assert_eq!(approx_age(2019, 2020).unwrap(), 24);
        assert_eq!(approx_age(1980, 2020).unwrap(), 63);
        assert_eq!(approx_age(2020, 2020).unwrap(), 23);
        assert!(approx_age(2021, 2020).is_err());
    }

    #[test]
    fn profile_invariants() {
        let cat = ComponentCatalog::default();
        let mut rng = seeded(5);
        for _ in 0..500 {
            let p = generate_profile(&mut rng, &cat, "p", 9, 16).unwrap();
            assert!(p.second_half);
            assert_eq!(p.age, 2020 - p.graduation_year + 23);
            assert!((1..=4).contains(&p.n_advantages()));
            let uniq: HashSet<_> = p.advantages.iter().collect();
            assert_eq!(uniq.len(), p.n_advantages());
            if p.young {
                assert!((2005..=2019).contains(&p.graduation_year));
            } else {
                assert!((1980..=2005).contains(&p.graduation_year));
            }
            if let Traction::Positive { monthly_revenue, growth } = p.traction {
                assert!((5_000.0..=80_000.0).contains(&monthly_revenue));
                assert!((0.05..=0.60).contains(&growth));
            }
            assert!(p.founders.len() == 1 || p.founders[0] != p.founders[1]);
        }
    }

    #[test]
    fn single_founder_share() {
        let cat = ComponentCatalog::default();
        let mut rng = seeded(17);
        let n = 10_000;
        let singles = (0..n).filter(|_| generate_profile(&mut rng, &cat, "p", 1, 16).unwrap().single_founder()).count();
        let share = singles as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.015, "{share}");
    }

    #[test]
    fn session_shapes() {
        let cat = ComponentCatalog::default();
        let s = generate_session(&mut seeded(1), &cat, "inv1", 16).unwrap();
        assert_eq!(s.iter().filter(|p| p.second_half).count(), 8);
        assert_eq!(s.iter().map(|p| p.order_index).collect::<Vec<_>>(), (1..=16).collect::<Vec<_>>());
        assert_eq!(generate_session(&mut seeded(1), &cat, "inv1", 32).unwrap().len(), 32);
        assert_eq!(s, generate_session(&mut seeded(1), &cat, "inv1", 16).unwrap());
        assert!(generate_session(&mut seeded(1), &cat, "x", 0).is_err());
        assert!(generate_session(&mut seeded(1), &cat, "x", 15).is_err());
    }

    fn counts(ts: &[EmailTreatment]) -> [usize; 16] {
        let mut c = [0; 16];
        ts.iter().for_each(|t| c[t.cell.index()] += 1);
        c
    }

    #[test]
    fn exact_balance_with_1600() {
        let ts = assign_cells(&mut seeded(2), &investors(1600), IDEA).unwrap();
        assert_eq!(counts(&ts), [100; 16]);
    }

    #[test]
    fn pigeonhole_with_17() {
        let ts = assign_cells(&mut seeded(2), &investors(17), IDEA).unwrap();
        let c = counts(&ts);
        assert!(c.iter().all(|&n| n == 1 || n == 2));
        assert_eq!(c.iter().filter(|&&n| n == 2).count(), 1);
    }

    #[test]
    fn one_investor_per_fund() {
        let mut inv = investors(16);
        inv.push(Investor { investor_id: 99, fund_id: 3 });
        let ts = assign_cells(&mut seeded(2), &inv, IDEA).unwrap();
        assert_eq!(ts.len(), 16);
        assert!(ts.iter().filter(|t| t.fund_id == 3).count() == 1);
    }

    #[test]
    fn too_few_funds() {
        assert!(matches!(
            assign_cells(&mut seeded(2), &investors(15), IDEA),
            Err(Error::InsufficientFunds { needed: 16, available: 15 })
        ));
    }

    #[test]
    fn assignment_ignores_input_order() {
        let a = investors(50);
        let mut b = a.clone();
        b.reverse();
        let ta = assign_cells(&mut seeded(9), &a, IDEA).unwrap();
        let tb = assign_cells(&mut seeded(9), &b, IDEA).unwrap();
        assert_eq!(ta, tb);
        // a different seed moves the remainder between cells but not the sizes
        let mut ca = counts(&ta);
        let mut cb = counts(&assign_cells(&mut seeded(10), &b, IDEA).unwrap());
        ca.sort_unstable();
        cb.sort_unstable();
        assert_eq!(ca, cb);
    }

    fn treatment(idea: u64, investor: u64, fund: u64) -> EmailTreatment {
        EmailTreatment {
            email_id: format!("{idea}-{investor}"),
            startup_idea_id: idea,
            investor_id: investor,
            fund_id: fund,
            cell: Cell::from_index(0),
            ivy_variant: IvyVariant::Pure,
            sender: None,
            send_day: None,
        }
    }

    #[test]
    fn scheduling_examples() {
        let s = schedule_campaign(vec![treatment(1, 7, 7), treatment(2, 7, 7)], 0, 14, None).unwrap();
        let days: Vec<_> = s.treatments.iter().map(|t| t.send_day.unwrap()).collect();
        assert_eq!(days[0], 0);
        assert!(days[1] >= 14);

        let five: Vec<_> = (1..=5).map(|i| treatment(i, 7, 7)).collect();
        let s = schedule_campaign(five.clone(), 0, 14, Some(60)).unwrap();
        let days: Vec<_> = s.treatments.iter().map(|t| t.send_day.unwrap()).collect();
        assert_eq!(days, vec![0, 14, 28, 42, 56]);
        assert!(check_schedule(&s).is_ok());

        assert!(matches!(schedule_campaign(five, 0, 14, Some(50)), Err(Error::InfeasibleSchedule(v)) if v == vec![7]));
        assert!(schedule_campaign(vec![], 0, 14, None).unwrap().treatments.is_empty());
    }

    #[test]
    fn checker_catches_violations() {
        let mut s = schedule_campaign(vec![treatment(1, 1, 1), treatment(2, 1, 1)], 0, 14, None).unwrap();
        s.treatments[1].send_day = Some(5);
        s.treatments.push(treatment(1, 2, 1));
        let errs = check_schedule(&s).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ScheduleViolation::GapTooShort { .. })));
        assert!(errs.iter().any(|e| matches!(e, ScheduleViolation::DuplicateFund { .. })));
        assert!(errs.iter().any(|e| matches!(e, ScheduleViolation::Unscheduled { .. })));
    }

    #[test]
    fn senders_unique_per_idea_cell() {
        let mut ts = assign_cells(&mut seeded(4), &investors(64), IDEA).unwrap();
        let mut used = HashSet::new();
        name_senders(&mut seeded(4), &mut ts, &NameBook::default(), &mut used).unwrap();
        assert_eq!(used.len(), 16);
        for t in &ts {
            let s = t.sender.as_ref().unwrap();
            assert_eq!(NameBook::default().female_first.contains(&s.first), t.cell.female);
        }
    }
}
