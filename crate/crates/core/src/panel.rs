//! Raw evaluation records and event logs turned into rectangular analysis
//! panels.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::StartupProfile;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::events::{EmailEventLog, EventKind};

pub use crate::design::approx_age;

/// Upper bound of each evaluation question's scale (Q4 is in tenths of the
/// relative investment).
pub const QUESTION_MAX: [f64; 5] = [100.0, 100.0, 100.0, 20.0, 100.0];

/// Per-record ground truth kept by the simulator; never coded into panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeTruth {
    pub female_slope: [f64; 5],
    pub asian_slope: [f64; 5],
    pub anti_female: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub investor_id: u64,
    pub profile_id: String,
    pub order_index: u32,
    pub second_half: bool,
    /// Answers to Q1..Q5; `None` when skipped.
    pub responses: [Option<f64>; 5],
    pub response_seconds: f64,
    /// Coded treatment and investor covariates by column name.
    pub covariates: BTreeMap<String, f64>,
    #[serde(skip)]
    pub truth: Option<SlopeTruth>,
}

impl EvaluationRecord {
    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.responses.iter().enumerate() {
            if let Some(v) = r {
                if !(0.0..=QUESTION_MAX[k]).contains(v) {
                    return Err(Error::InvalidInput(format!(
                        "q{} = {v} outside [0, {}] for profile {}",
                        k + 1,
                        QUESTION_MAX[k],
                        self.profile_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value of a named column. `None` means missing for this record;
    /// unknown names are reported by [`EvaluationRecord::has_column`].
    pub fn column(&self, name: &str) -> Option<f64> {
        if let Some(base) = name.strip_suffix("^2") {
            return self.column(base).map(|v| v * v);
        }
        match name {
            "q1" | "q2" | "q3" | "q4" | "q5" => {
                let k = name[1..].parse::<usize>().ok()? - 1;
                self.responses[k]
            }
            "response_seconds" => Some(self.response_seconds),
            "second_half" => Some(if self.second_half { 1.0 } else { 0.0 }),
            "order_index" => Some(f64::from(self.order_index)),
            "investor_id" => Some(self.investor_id as f64),
            _ => self.covariates.get(name).copied(),
        }
    }

    pub fn has_column(&self, name: &str) -> bool {
        let base = name.strip_suffix("^2").unwrap_or(name);
        matches!(
            base,
            "q1" | "q2" | "q3" | "q4" | "q5" | "response_seconds" | "second_half" | "order_index" | "investor_id"
        ) || self.covariates.contains_key(base)
    }
}

/// Coded treatment columns of a profile.
pub fn profile_covariates(p: &StartupProfile, benchmark_year: i32) -> BTreeMap<String, f64> {
    use crate::design::{Category, EducationTier, EmployeesBucket, Mission, Traction};
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let (traction, revenue, growth) = match p.traction {
        Traction::None => (0.0, 0.0, 0.0),
        Traction::Positive { monthly_revenue, growth } => (1.0, monthly_revenue, growth),
    };
    let employees = match p.employees {
        EmployeesBucket::UpTo10 => 0.0,
        EmployeesBucket::UpTo20 => 1.0,
        EmployeesBucket::UpTo50 => 2.0,
        EmployeesBucket::Over50 => 3.0,
    };
    [
        ("female", b(p.gender.is_female())),
        ("asian", b(p.race.is_asian())),
        ("age", f64::from(p.age)),
        ("young", b(p.young)),
        ("top_school", b(p.education_tier == EducationTier::Top)),
        ("serial_founder", b(p.serial_founder)),
        ("single_founder", b(p.single_founder())),
        ("company_age", f64::from(benchmark_year - p.founding_year)),
        ("n_advantages", p.n_advantages() as f64),
        ("positive_traction", traction),
        ("monthly_revenue", revenue),
        ("growth", growth),
        ("b2b", b(p.category == Category::B2b)),
        ("employees_bucket", employees),
        ("domestic_market", b(p.domestic_market)),
        ("mission_ipo", b(p.mission == Mission::ProfitIpo)),
        ("mission_esg", b(p.mission == Mission::ProfitEsg)),
        ("us_location", b(p.us_location)),
        ("existing_investors", f64::from(p.existing_investors)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Filter {
    pub column: String,
    pub op: CmpOp,
    pub value: f64,
}

impl Filter {
    pub fn keeps(&self, v: f64) -> bool {
        match self.op {
            CmpOp::Ge => v >= self.value,
            CmpOp::Gt => v > self.value,
            CmpOp::Le => v <= self.value,
            CmpOp::Lt => v < self.value,
            CmpOp::Eq => v == self.value,
            CmpOp::Ne => v != self.value,
        }
    }
}

impl FromStr for Filter {
    type Err = Error;

    /// Parses `column OP value`, e.g. `q3 >= 50`.
    fn from_str(s: &str) -> Result<Self> {
        let ops = [
            (">=", CmpOp::Ge),
            ("<=", CmpOp::Le),
            ("!=", CmpOp::Ne),
            ("==", CmpOp::Eq),
            (">", CmpOp::Gt),
            ("<", CmpOp::Lt),
            ("=", CmpOp::Eq),
        ];
        for (tok, op) in ops {
            if let Some((lhs, rhs)) = s.split_once(tok) {
                let value =
                    rhs.trim().parse().map_err(|_| Error::InvalidInput(format!("bad filter value in `{s}`")))?;
                return Ok(Self { column: lhs.trim().to_string(), op, value });
            }
        }
        Err(Error::InvalidInput(format!("cannot parse filter `{s}`")))
    }
}

impl TryFrom<String> for Filter {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Filter> for String {
    fn from(f: Filter) -> String {
        let op = match f.op {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        };
        format!("{} {op} {}", f.column, f.value)
    }
}

/// What goes into a panel: outcome, main terms, interactions, absorbed fixed
/// effect, cluster key and a row filter applied before coding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSpec {
    pub outcome: String,
    pub terms: Vec<String>,
    /// Each entry is a list of columns multiplied together, e.g.
    /// `["female", "second_half"]`.
    pub interactions: Vec<Vec<String>>,
    pub fixed_effect: Option<String>,
    pub cluster: Option<String>,
    pub filter: Vec<Filter>,
    /// Winsorize the outcome at this percentile after filtering.
    pub winsorize_outcome: Option<f64>,
}

impl PanelSpec {
    pub fn new(outcome: &str, terms: &[&str]) -> Self {
        Self { outcome: outcome.to_string(), terms: terms.iter().map(|s| s.to_string()).collect(), ..Self::default() }
    }

    pub fn interact(mut self, cols: &[&str]) -> Self {
        self.interactions.push(cols.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn fixed_effect(mut self, key: &str) -> Self {
        self.fixed_effect = Some(key.to_string());
        self
    }

    pub fn cluster(mut self, key: &str) -> Self {
        self.cluster = Some(key.to_string());
        self
    }

    pub fn filter(mut self, f: &str) -> Result<Self> {
        self.filter.push(f.parse()?);
        Ok(self)
    }

    pub fn coded_names(&self) -> Vec<String> {
        self.terms.iter().cloned().chain(self.interactions.iter().map(|cols| cols.join(":"))).collect()
    }

    fn referenced(&self) -> Vec<&str> {
        let mut v: Vec<&str> = vec![self.outcome.as_str()];
        v.extend(self.terms.iter().map(String::as_str));
        v.extend(self.interactions.iter().flatten().map(String::as_str));
        v.extend(self.fixed_effect.as_deref());
        v.extend(self.cluster.as_deref());
        v.extend(self.filter.iter().map(|f| f.column.as_str()));
        v
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub input_rows: usize,
    pub filtered: usize,
    pub missing: usize,
}

/// Rectangular regression data: outcome, named regressors, optional absorbed
/// group ids and cluster ids, all of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<T> {
    pub outcome_name: String,
    pub outcome: Vec<T>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<T>>,
    pub fe_group: Option<Vec<usize>>,
    pub cluster: Option<Vec<usize>>,
    pub drops: DropCounts,
}

impl<T: Scalar> Panel<T> {
    pub fn new(outcome_name: &str, outcome: Vec<T>, names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidInput("column names and columns differ in number".into()));
        }
        let n = outcome.len();
        if let Some((name, _)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidInput(format!("column `{name}` length differs from outcome")));
        }
        Ok(Self {
            outcome_name: outcome_name.to_string(),
            outcome,
            names,
            columns,
            fe_group: None,
            cluster: None,
            drops: DropCounts { input_rows: n, ..DropCounts::default() },
        })
    }

    pub fn with_fe(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.n_rows() {
            return Err(Error::InvalidInput("fixed-effect ids length differs from outcome".into()));
        }
        self.fe_group = Some(groups);
        Ok(self)
    }

    pub fn with_cluster(mut self, clusters: Vec<usize>) -> Result<Self> {
        if clusters.len() != self.n_rows() {
            return Err(Error::InvalidInput("cluster ids length differs from outcome".into()));
        }
        self.cluster = Some(clusters);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.outcome.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[T]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    /// Row subset, keeping ids and names.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let pick = |v: &Vec<T>| rows.iter().map(|&r| v[r]).collect::<Vec<T>>();
        let pick_ids = |v: &Vec<usize>| rows.iter().map(|&r| v[r]).collect::<Vec<usize>>();
        Self {
            outcome_name: self.outcome_name.clone(),
            outcome: pick(&self.outcome),
            names: self.names.clone(),
            columns: self.columns.iter().map(pick).collect(),
            fe_group: self.fe_group.as_ref().map(pick_ids),
            cluster: self.cluster.as_ref().map(pick_ids),
            drops: self.drops,
        }
    }

    /// Writes the panel with `_fe` and `_cluster` trailing columns when set.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.outcome_name.clone()];
        header.extend(self.names.iter().cloned());
        if self.fe_group.is_some() {
            header.push("_fe".into());
        }
        if self.cluster.is_some() {
            header.push("_cluster".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut row = vec![self.outcome[i].to_string()];
            row.extend(self.columns.iter().map(|c| c[i].to_string()));
            if let Some(fe) = &self.fe_group {
                row.push(fe[i].to_string());
            }
            if let Some(cl) = &self.cluster {
                row.push(cl[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() {
            return Err(Error::InvalidInput("panel csv has no columns".into()));
        }
        let fe_at = header.iter().position(|h| h == "_fe");
        let cl_at = header.iter().position(|h| h == "_cluster");
        let data_cols: Vec<usize> = (1..header.len()).filter(|&i| Some(i) != fe_at && Some(i) != cl_at).collect();
        let mut outcome = Vec::new();
        let mut columns = vec![Vec::new(); data_cols.len()];
        let mut fe = Vec::new();
        let mut cl = Vec::new();
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::InvalidInput(format!("bad number `{s}` in panel csv")))
        };
        for rec in rdr.records() {
            let rec = rec?;
            outcome.push(T::lit(parse(&rec[0])?));
            for (slot, &c) in data_cols.iter().enumerate() {
                columns[slot].push(T::lit(parse(&rec[c])?));
            }
            if let Some(i) = fe_at {
                fe.push(parse(&rec[i])? as usize);
            }
            if let Some(i) = cl_at {
                cl.push(parse(&rec[i])? as usize);
            }
        }
        let names = data_cols.iter().map(|&i| header[i].clone()).collect();
        let mut p = Self::new(&header[0], outcome, names, columns)?;
        if fe_at.is_some() {
            p = p.with_fe(fe)?;
        }
        if cl_at.is_some() {
            p = p.with_cluster(cl)?;
        }
        Ok(p)
    }
}

/// Dense `0..k` ids in order of first appearance of the sorted keys.
pub fn dense_ids<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    for k in keys {
        let next = map.len();
        map.entry(k.clone()).or_insert(next);
    }
    // renumber in key order so ids do not depend on row order
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    keys.iter().map(|k| map[k]).collect()
}

/// Codes records into a panel: filter, listwise deletion, interaction
/// products, fixed-effect and cluster ids.
pub fn build_panel<T: Scalar>(records: &[EvaluationRecord], spec: &PanelSpec) -> Result<Panel<T>> {
    if let Some(first) = records.first() {
        for name in spec.referenced() {
            if !first.has_column(name) {
                return Err(Error::UnknownColumn(name.to_string()));
            }
        }
    }
    let mut drops = DropCounts { input_rows: records.len(), ..DropCounts::default() };
    let mut kept: Vec<&EvaluationRecord> = Vec::new();
    for r in records {
        let passes = spec.filter.iter().all(|f| r.column(&f.column).is_some_and(|v| f.keeps(v)));
        if !passes {
            drops.filtered += 1;
            continue;
        }
        let complete = spec.referenced().iter().all(|name| r.column(name).is_some_and(f64::is_finite));
        if !complete {
            drops.missing += 1;
            continue;
        }
        kept.push(r);
    }
    if kept.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let get = |r: &EvaluationRecord, name: &str| r.column(name).expect("checked complete");
    let mut outcome: Vec<f64> = kept.iter().map(|r| get(r, &spec.outcome)).collect();
    if let Some(p) = spec.winsorize_outcome {
        outcome = winsorize(&outcome, p)?;
    }
    let mut columns: Vec<Vec<T>> =
        spec.terms.iter().map(|t| kept.iter().map(|r| T::lit(get(r, t))).collect()).collect();
    for cols in &spec.interactions {
        columns.push(kept.iter().map(|r| T::lit(cols.iter().map(|c| get(r, c)).product())).collect());
    }
    let mut panel = Panel::new(&spec.outcome, outcome.into_iter().map(T::lit).collect(), spec.coded_names(), columns)?;
    let key_ids = |key: &str| -> Vec<usize> {
        let raw: Vec<u64> = kept.iter().map(|r| get(r, key).to_bits()).collect();
        dense_ids(&raw)
    };
    if let Some(fe) = &spec.fixed_effect {
        panel = panel.with_fe(key_ids(fe))?;
    }
    if let Some(cl) = &spec.cluster {
        panel = panel.with_cluster(key_ids(cl))?;
    }
    panel.drops = drops;
    Ok(panel)
}

/// Caps values above the nearest-rank `percentile` at that value.
pub fn winsorize<T: Scalar>(values: &[T], percentile: f64) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot winsorize an empty vector".into()));
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::InvalidInput(format!("percentile {percentile} outside (0,100)")));
    }
    let cap = nearest_rank(values, percentile);
    Ok(values.iter().map(|&v| if v > cap { cap } else { v }).collect())
}

/// Nearest-rank percentile: the ⌈p·n/100⌉-th smallest value.
pub fn nearest_rank<T: Scalar>(values: &[T], percentile: f64) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let rank = ((percentile / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmailSummary {
    pub opened: bool,
    pub staying_seconds: f64,
    pub open_count: u32,
    pub clicked: bool,
    pub replied: bool,
}

/// Per-email outcomes from a tracking log. Staying time is the largest
/// throttled byte count divided by the download rate, and 0 when unopened.
pub fn parse_events(log: &EmailEventLog, download_rate_bytes_per_s: f64) -> Result<BTreeMap<String, EmailSummary>> {
    if !(download_rate_bytes_per_s > 0.0) {
        return Err(Error::InvalidInput("download rate must be positive".into()));
    }
    let mut out: BTreeMap<String, EmailSummary> = BTreeMap::new();
    let mut last_t: BTreeMap<&str, &str> = BTreeMap::new();
    let mut max_bytes: BTreeMap<&str, u64> = BTreeMap::new();
    for ev in &log.events {
        if let Some(prev) = last_t.insert(&ev.email_id, &ev.t) {
            if ev.t.as_str() < prev {
                return Err(Error::MalformedLog(format!("events for {} are not time-ordered", ev.email_id)));
            }
        }
        let s = out.entry(ev.email_id.clone()).or_default();
        match ev.kind {
            EventKind::Sent => {}
            EventKind::PixelFetch => {
                s.opened = true;
                s.open_count += 1;
            }
            EventKind::BytesProgress => {
                if !s.opened {
                    return Err(Error::MalformedLog(format!("bytes_progress before pixel_fetch for {}", ev.email_id)));
                }
                let b = ev.bytes.ok_or_else(|| {
                    Error::MalformedLog(format!("bytes_progress without byte count for {}", ev.email_id))
                })?;
                let m = max_bytes.entry(&ev.email_id).or_insert(0);
                *m = (*m).max(b);
            }
            EventKind::Click | EventKind::Reply => {
                if !s.opened {
                    return Err(Error::MalformedLog(format!("{:?} before pixel_fetch for {}", ev.kind, ev.email_id)));
                }
                if ev.kind == EventKind::Click {
                    s.clicked = true;
                } else {
                    s.replied = true;
                }
            }
        }
    }
    for (id, bytes) in max_bytes {
        out.get_mut(id).expect("seen").staying_seconds = bytes as f64 / download_rate_bytes_per_s;
    }
    Ok(out)
}
