//! Pipeline stages. Each reads its inputs, writes artifacts through
//! [`Outputs`] and never touches the filesystem otherwise.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pitchaudit::catalog::ComponentCatalog;
use pitchaudit::demo::{generated_regressor_demo, heckman_demo, write_demo_report, HeckmanCase, LooDemoRow};
use pitchaudit::design::{
    assign_cells, check_schedule, generate_session, name_senders, schedule_campaign, write_profiles_csv,
    write_schedule_csv, CampaignSchedule, Investor, IvyVariant, StartupIdea, StartupProfile,
};
use pitchaudit::estimators::{
    cdf_difference_curve, fit_fe_ols, fit_het_probit, fit_two_threshold, loo_pooled_fit, naive_split_fit,
    HetProbitData, HetProbitOptions, LooOptions, VcovKind,
};
use pitchaudit::panel::{build_panel, parse_events, EvaluationRecord, Panel};
use pitchaudit::rng::{child_seed, substream};
use pitchaudit::sim::{
    emit_event_log, simulate_callbacks, simulate_evaluations, simulate_two_threshold_callbacks, write_truth_csv,
    EmailEventLog, EvalSession,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::Outputs;

const DESIGN: &str = "design.json";
const EVALUATIONS: &str = "evaluations.jsonl";
const EVENTS: &str = "events.jsonl";
const PANEL_EVAL: &str = "panel_eval.csv";
const PANEL_CALLBACKS: &str = "panel_callbacks.csv";

// Seed tags of the stochastic stages.
const TAG_DESIGN: u64 = 1;
const TAG_SIMULATE: u64 = 2;
const TAG_LOO: u64 = 3;
const TAG_DEMO: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Ols,
    Hetprobit,
    TwoThreshold,
    Loo,
    Curve,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Ols, Model::Hetprobit, Model::TwoThreshold, Model::Loo, Model::Curve];

    pub fn name(self) -> &'static str {
        match self {
            Model::Ols => "ols",
            Model::Hetprobit => "hetprobit",
            Model::TwoThreshold => "two-threshold",
            Model::Loo => "loo",
            Model::Curve => "curve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DemoKind {
    Heckman,
    Loo,
    All,
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: Option<u64>,
    pub input: PathBuf,
}

impl Ctx<'_> {
    pub fn seed(&self, command: &str) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::config_flag("--seed", format!("`{command}` is stochastic and requires --seed")))
    }

    fn read(&self, name: &str) -> Result<Vec<u8>, Failure> {
        let path = self.input.join(name);
        fs::read(&path).map_err(|e| Failure::config_flag("--input", format!("cannot read {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignArtifact {
    pub sessions: Vec<Vec<StartupProfile>>,
    pub schedule: CampaignSchedule,
}

pub fn load_catalog(path: &Path) -> Result<ComponentCatalog, Failure> {
    if !path.exists() {
        return Err(Failure::config_flag("--catalog", format!("catalog {} does not exist", path.display())));
    }
    ComponentCatalog::load(path).map_err(|e| Failure::config_flag("--catalog", e.to_string()))
}

pub fn design(ctx: &Ctx, out: &mut Outputs) -> Result<(), Failure> {
    let seed = child_seed(ctx.seed("design")?, TAG_DESIGN);
    let cfg = ctx.cfg;
    let d = &cfg.design;
    let mut rng = substream(seed, 0);
    let sessions = (0..d.sessions)
        .map(|i| generate_session(&mut rng, &cfg.catalog, &format!("e{i:03}"), d.profiles_per_session))
        .collect::<pitchaudit::Result<Vec<_>>>()?;

    let investors: Vec<Investor> =
        (0..d.investors).map(|k| Investor { investor_id: k, fund_id: k % d.funds }).collect();
    let mut rng = substream(seed, 1);
    let mut emails = Vec::new();
    for idea_id in 1..=d.ideas {
        let ivy_variant = if idea_id % 2 == 1 { IvyVariant::Pure } else { IvyVariant::Mixed };
        emails.extend(assign_cells(&mut rng, &investors, StartupIdea { idea_id, ivy_variant })?);
    }
    name_senders(&mut rng, &mut emails, &cfg.catalog.names, &mut HashSet::new())?;
    let schedule = schedule_campaign(emails, d.start_day, d.min_gap_days, d.window_days)?;
    if let Err(v) = check_schedule(&schedule) {
        return Err(Failure::runtime(format!("schedule failed its own check: {v:?}")));
    }

    let flat: Vec<StartupProfile> = sessions.iter().flatten().cloned().collect();
    out.write_with("profiles.csv", |w| write_profiles_csv(w, &flat))?;
    out.write_with("schedule.csv", |w| write_schedule_csv(w, &schedule))?;
    let art = DesignArtifact { sessions, schedule };
    let mut json = serde_json::to_vec(&art)?;
    json.push(b'\n');
    out.write(DESIGN, &json)
}

fn read_design(ctx: &Ctx) -> Result<DesignArtifact, Failure> {
    serde_json::from_slice(&ctx.read(DESIGN)?).map_err(|e| Failure::runtime(format!("{DESIGN}: {e}")))
}

fn read_records(ctx: &Ctx) -> Result<Vec<EvaluationRecord>, Failure> {
    let bytes = ctx.read(EVALUATIONS)?;
    let text = String::from_utf8(bytes).map_err(|e| Failure::runtime(format!("{EVALUATIONS}: {e}")))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::runtime(format!("{EVALUATIONS} line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn simulate(ctx: &Ctx, out: &mut Outputs) -> Result<(), Failure> {
    let seed = child_seed(ctx.seed("simulate")?, TAG_SIMULATE);
    let cfg = ctx.cfg;
    let design = read_design(ctx)?;
    let sessions: Vec<EvalSession> = design
        .sessions
        .into_iter()
        .enumerate()
        .map(|(i, profiles)| EvalSession { investor_id: i as u64, profiles, covariates: BTreeMap::new() })
        .collect();
    let records = simulate_evaluations(&mut substream(seed, 0), &sessions, &cfg.evaluations)?;
    let opens = match cfg.callbacks.upper_threshold {
        None => simulate_callbacks(&mut substream(seed, 1), &design.schedule, &cfg.callbacks)?,
        Some(_) => simulate_two_threshold_callbacks(&mut substream(seed, 1), &design.schedule, &cfg.callbacks)?,
    };
    let emitted = emit_event_log(&mut substream(seed, 2), &design.schedule, &opens, &cfg.events)?;

    let mut jsonl = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut jsonl, r)?;
        jsonl.push(b'\n');
    }
    out.write(EVALUATIONS, &jsonl)?;
    out.write_with(EVENTS, |w| emitted.log.write_jsonl(w))?;

    let c = &cfg.callbacks;
    let mut truth: Vec<(String, f64)> = vec![
        ("callbacks.threshold".into(), c.threshold),
        ("callbacks.quality_level".into(), c.quality_level),
        ("callbacks.beta_quality".into(), c.beta_quality),
        ("callbacks.beta_ivy".into(), c.beta_ivy),
        ("callbacks.beta_advantage".into(), c.beta_advantage),
        ("callbacks.gamma_female".into(), c.gamma_female),
        ("callbacks.gamma_asian".into(), c.gamma_asian),
        ("callbacks.omega_female".into(), c.omega_female),
        ("callbacks.fund_sd".into(), c.fund_sd),
        ("evaluations.female.share_anti".into(), cfg.evaluations.female.share_anti),
        ("evaluations.asian.share_anti".into(), cfg.evaluations.asian.share_anti),
    ];
    if let Some(u) = c.upper_threshold {
        truth.push(("callbacks.upper_threshold".into(), u));
    }
    let mut seen = HashSet::new();
    for r in &records {
        if let Some(t) = &r.truth {
            if seen.insert(r.investor_id) {
                for k in 0..5 {
                    truth.push((format!("investor.{}.female_slope.q{}", r.investor_id, k + 1), t.female_slope[k]));
                }
                truth.push((format!("investor.{}.anti_female", r.investor_id), f64::from(u8::from(t.anti_female))));
            }
        }
    }
    for (id, s) in &emitted.read_seconds {
        truth.push((format!("email.{id}.read_seconds"), *s));
    }
    out.write_with("truth.csv", |w| write_truth_csv(w, &truth))
}

pub fn ingest(ctx: &Ctx, out: &mut Outputs) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let records = read_records(ctx)?;
    let panel = build_panel::<f64>(&records, &cfg.fit.ols)?;
    out.write_with(PANEL_EVAL, |w| panel.write_csv(w))?;

    let design = read_design(ctx)?;
    let log = EmailEventLog::read_jsonl(BufReader::new(ctx.read(EVENTS)?.as_slice()))?;
    let summaries = parse_events(&log, cfg.events.download_rate_bytes_per_s)?;
    let mut text = String::from("email_id,opened,staying_seconds,open_count,clicked,replied\n");
    for (id, s) in &summaries {
        let b = |x: bool| u8::from(x);
        writeln!(text, "{id},{},{},{},{},{}", b(s.opened), s.staying_seconds, s.open_count, b(s.clicked), b(s.replied))
            .expect("string write");
    }
    out.write("email_summary.csv", text.as_bytes())?;

    let t = &design.schedule.treatments;
    let opened: Vec<f64> =
        t.iter().map(|e| summaries.get(&e.email_id).map_or(0.0, |s| f64::from(u8::from(s.opened)))).collect();
    let col = |f: fn(&pitchaudit::design::Cell) -> bool| t.iter().map(|e| f64::from(u8::from(f(&e.cell)))).collect();
    let funds: Vec<u64> = t.iter().map(|e| e.fund_id).collect();
    let callbacks = Panel::new(
        "opened",
        opened,
        vec!["female".into(), "asian".into(), "ivy".into(), "advantage".into()],
        vec![col(|c| c.female), col(|c| c.asian), col(|c| c.ivy), col(|c| c.advantage)],
    )?
    .with_cluster(pitchaudit::panel::dense_ids(&funds))?;
    out.write_with(PANEL_CALLBACKS, |w| callbacks.write_csv(w))
}

fn read_panel(ctx: &Ctx, name: &str) -> Result<Panel<f64>, Failure> {
    Ok(Panel::read_csv(ctx.read(name)?.as_slice())?)
}

pub fn fit(ctx: &Ctx, model: Model, out: &mut Outputs) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let dir = model.name();
    match model {
        Model::Ols => {
            let panel = read_panel(ctx, PANEL_EVAL)?;
            let kind = if panel.cluster.is_some() { VcovKind::Cluster } else { VcovKind::Robust };
            let f = fit_fe_ols(&panel, kind)?.fit;
            out.write_with(&format!("{dir}/fit.csv"), |w| f.write_csv(w))?;
            out.write_with(&format!("{dir}/fit.meta"), |w| f.write_meta(w))
        }
        Model::Hetprobit => {
            let data = HetProbitData::from_panel(&read_panel(ctx, PANEL_CALLBACKS)?, &cfg.fit.group)?;
            let r = fit_het_probit(&data, &HetProbitOptions::default())?;
            out.write_with(&format!("{dir}/fit.csv"), |w| r.fit.write_csv(w))?;
            out.write_with(&format!("{dir}/fit.meta"), |w| {
                r.fit.write_meta(&mut *w)?;
                use std::io::Write;
                writeln!(w, "threshold={}", r.threshold)?;
                writeln!(w, "sigma_ratio={}", r.sigma_ratio)?;
                writeln!(w, "wald_stat={}", r.wald.stat)?;
                writeln!(w, "wald_p={}", r.wald.p_value)?;
                writeln!(w, "marginal_total={}", r.marginals.total)?;
                writeln!(w, "marginal_level={}", r.marginals.level)?;
                writeln!(w, "marginal_variance={}", r.marginals.variance)?;
                Ok(())
            })
        }
        Model::TwoThreshold => {
            let data = HetProbitData::from_panel(&read_panel(ctx, PANEL_CALLBACKS)?, &cfg.fit.group)?;
            let r = fit_two_threshold(&data, &HetProbitOptions::default())?;
            out.write_with(&format!("{dir}/fit.csv"), |w| r.fit.write_csv(w))?;
            out.write_with(&format!("{dir}/fit.meta"), |w| {
                r.fit.write_meta(&mut *w)?;
                use std::io::Write;
                writeln!(w, "flat_upper={}", r.flat_upper)?;
                Ok(())
            })
        }
        Model::Loo => {
            let seed = child_seed(ctx.seed("fit loo")?, TAG_LOO);
            let records = read_records(ctx)?;
            let l = &cfg.fit.loo;
            let opts = LooOptions {
                treatment: l.treatment.clone(),
                classify_on: l.classify_on.clone(),
                outcomes: l.outcomes.clone(),
                bootstrap: l.bootstrap,
                seed,
            };
            let loo = loo_pooled_fit::<f64>(&records, &opts)?;
            let naive = naive_split_fit::<f64>(&records, &LooOptions { bootstrap: 0, ..opts })?;
            out.write_with(&format!("{dir}/loo.csv"), |w| loo.write_csv(w))?;
            out.write_with(&format!("{dir}/naive.csv"), |w| naive.write_csv(w))
        }
        Model::Curve => {
            let records = read_records(ctx)?;
            let c = &cfg.fit.curve;
            let (mut y, mut g) = (Vec::new(), Vec::new());
            for r in &records {
                if let (Some(a), Some(b)) = (r.column(&c.outcome), r.column(&c.group)) {
                    y.push(a);
                    g.push(b);
                }
            }
            let steps = ((c.grid_max - c.grid_min) / c.grid_step).floor() as usize;
            let grid: Vec<f64> = (0..=steps).map(|k| c.grid_min + k as f64 * c.grid_step).collect();
            let curve = cdf_difference_curve(&y, &g, &grid)?;
            out.write_with(&format!("{dir}/curve.csv"), |w| curve.write_csv(w))?;
            let xs: Vec<String> = curve.crossings.iter().map(f64::to_string).collect();
            out.write(&format!("{dir}/curve.meta"), format!("n={}\ncrossings={}\n", y.len(), xs.join(",")).as_bytes())
        }
    }
}

/// Collects whatever fit outputs exist under the input directory.
pub fn report(ctx: &Ctx, out: &mut Outputs) -> Result<(), Failure> {
    let mut text = String::new();
    let mut found = 0;
    for m in Model::ALL {
        let files: &[&str] = match m {
            Model::Loo => &["loo.csv", "naive.csv"],
            Model::Curve => &["curve.meta"],
            _ => &["fit.csv", "fit.meta"],
        };
        for f in files {
            let path = ctx.input.join(m.name()).join(f);
            if let Ok(body) = fs::read_to_string(&path) {
                found += 1;
                writeln!(text, "== {}/{} ==\n{}", m.name(), f, body.trim_end()).expect("string write");
                text.push('\n');
            }
        }
    }
    if found == 0 {
        return Err(Failure::config_flag("--input", format!("no fit outputs under {}", ctx.input.display())));
    }
    out.write("report.txt", text.as_bytes())
}

fn heckman_csv(cases: &[HeckmanCase]) -> String {
    let mut s = String::from("x_mean,seed,reps,failures,naive_coef_mean,naive_signed_rejections,het_gamma_mean,het_coverage,het_sigma_ratio_mean\n");
    for c in cases {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.x_mean,
            c.seed,
            c.reps,
            c.failures,
            c.naive_coef_mean,
            c.naive_signed_rejections,
            c.het_gamma_mean,
            c.het_coverage,
            c.het_sigma_ratio_mean
        )
        .expect("string write");
    }
    s
}

fn loo_csv(rows: &[LooDemoRow]) -> String {
    let mut s = String::from(
        "profiles_per_investor,seed,reps,failures,naive_anti_mean,naive_pro_mean,loo_anti_mean,loo_pro_mean,naive_mean_abs,loo_mean_abs\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
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
        )
        .expect("string write");
    }
    s
}

pub fn demo(ctx: &Ctx, which: DemoKind, reps: Option<usize>, out: &mut Outputs) -> Result<(), Failure> {
    let seed = child_seed(ctx.seed("demo")?, TAG_DEMO);
    let mut h_cfg = ctx.cfg.demo.heckman.clone();
    let mut l_cfg = ctx.cfg.demo.loo.clone();
    if let Some(r) = reps {
        h_cfg.reps = r;
        l_cfg.reps = r;
    }
    let heckman = if which != DemoKind::Loo { heckman_demo(&h_cfg, seed)? } else { Vec::new() };
    let loo = if which != DemoKind::Heckman { generated_regressor_demo(&l_cfg, seed)? } else { Vec::new() };
    if !heckman.is_empty() {
        out.write("demo/heckman.csv", heckman_csv(&heckman).as_bytes())?;
    }
    if !loo.is_empty() {
        out.write("demo/loo.csv", loo_csv(&loo).as_bytes())?;
    }
    out.write_with("demo/report.txt", |w| write_demo_report(w, &heckman, &loo))
}
