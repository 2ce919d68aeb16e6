//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pitchaudit::catalog::ComponentCatalog;
use pitchaudit::demo::{generated_regressor_demo, heckman_demo, HeckmanDemoConfig, LooDemoConfig};
use pitchaudit::design::{
    assign_cells, check_schedule, component_categories, generate_session, name_senders, schedule_campaign, Cell,
    Investor, IvyVariant, StartupIdea,
};
use pitchaudit::estimators::{
    cdf_difference_curve, fit_fe_ols, fit_het_probit, het_probit_gradient, het_probit_loglik, het_probit_marginals,
    het_probit_probability, ivy_scaled_ratio, loo_pooled_fit, FitResult, HetProbitData, HetProbitOptions, LooOptions,
    SeKind, VcovKind,
};
use pitchaudit::linalg::Matrix;
use pitchaudit::panel::{parse_events, Panel};
use pitchaudit::rng::seeded;
use pitchaudit::sim::{
    simulate_evaluations, simulate_latent_panel, EmailEvent, EmailEventLog, EvalDgpParams, EvalSession, EventKind,
    LatentDesign, MixtureDraw, SlopeMixture,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn het_probit_recovery() -> Outcome {
    let design = LatentDesign { n: 50_000, gamma: 0.3, omega: 0.8f64.ln(), ..LatentDesign::default() };
    let panel = simulate_latent_panel(&mut seeded(1), &design).map_err(|e| e.to_string())?;
    let data = HetProbitData::from_panel(&panel, "female").map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = fit_het_probit(&data, &HetProbitOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        (r.gamma_combined - 0.3).abs() <= 0.05 && (r.sigma_ratio - 0.8).abs() <= 0.05 && secs < 10.0,
        format!("gamma {:.4}, sigma ratio {:.4}, fit {secs:.2}s", r.gamma_combined, r.sigma_ratio),
    )
}

fn heckman_critique() -> Outcome {
    let cases = heckman_demo(&HeckmanDemoConfig::default(), 2).map_err(|e| e.to_string())?;
    let mut ok = cases.len() == 2;
    let mut parts = Vec::new();
    for c in &cases {
        ok &= c.reps == 100 && c.naive_signed_rejections >= 0.8 && c.het_coverage >= 0.9;
        parts.push(format!(
            "x={:+}: naive signed |t|>2 {:.2}, het CI covers 0 {:.2}, failures {}",
            c.x_mean, c.naive_signed_rejections, c.het_coverage, c.failures
        ));
    }
    check(ok, parts.join("; "))
}

fn generated_regressor() -> Outcome {
    let cfg = LooDemoConfig::default();
    let rows = generated_regressor_demo(&cfg, 3).map_err(|e| e.to_string())?;
    let at16 = rows.iter().find(|r| r.profiles_per_investor == 16).ok_or("no J=16 case")?;
    let mut by_j: Vec<_> = rows.iter().map(|r| (r.profiles_per_investor, r.loo_mean_abs)).collect();
    by_j.sort_by_key(|r| r.0);
    let monotone = by_j.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = format!(
        "J=16 naive {:.3} vs LOO {:.3}; LOO by J {:?}",
        at16.naive_mean_abs,
        at16.loo_mean_abs,
        by_j.iter().map(|(j, v)| format!("{j}:{v:.3}")).collect::<Vec<_>>()
    );
    check(cfg.reps == 100 && at16.naive_mean_abs > 5.0 * at16.loo_mean_abs && monotone, detail)
}

fn loo_mixture_recovery() -> Outcome {
    let (anti, pro, share) = (-16.40, 7.93, 0.42);
    let mut params =
        EvalDgpParams { noise_sd: [5.0, 5.0, 5.0, 1.0, 5.0], top_school: [0.0; 5], ..EvalDgpParams::default() };
    params.female = SlopeMixture {
        share_anti: share,
        draw: MixtureDraw::Exact,
        effect_anti: [anti, anti, anti, 0.0, anti],
        effect_pro: [pro, pro, pro, 0.0, pro],
        slope_sd: [0.0; 5],
    };
    let catalog = ComponentCatalog::default();
    let mut rng = seeded(4);
    let sessions: Vec<EvalSession> = (0..200)
        .map(|i| EvalSession {
            investor_id: i,
            profiles: generate_session(&mut rng, &catalog, &format!("i{i}"), 16).unwrap(),
            covariates: BTreeMap::new(),
        })
        .collect();
    let records = simulate_evaluations(&mut rng, &sessions, &params).map_err(|e| e.to_string())?;
    let opts = LooOptions { outcomes: vec!["q1".into()], bootstrap: 1000, seed: 4, ..LooOptions::default() };
    let r = loo_pooled_fit::<f64>(&records, &opts).map_err(|e| e.to_string())?;
    let q1 = r.outcome("q1").ok_or("no q1 fit")?;
    let (a, p) = (q1.anti.as_ref().ok_or("no anti group")?, q1.pro.as_ref().ok_or("no pro group")?);
    let (a_se, p_se) = (a.boot_se.ok_or("no bootstrap")?, p.boot_se.ok_or("no bootstrap")?);
    let (sa_se, sp_se) = r.share_boot_se.ok_or("no share bootstrap")?;
    let covers = |est: f64, se: f64, truth: f64| (est - truth).abs() <= 1.959963984540054 * se;
    let ok = covers(a.coef, a_se, anti)
        && covers(p.coef, p_se, pro)
        && covers(r.share_anti, sa_se, share)
        && covers(r.share_pro, sp_se, 1.0 - share)
        && (r.share_anti - share).abs() <= 0.05
        && (r.share_pro - (1.0 - share)).abs() <= 0.05;
    check(
        ok,
        format!(
            "anti {:.3} (boot se {:.3}), pro {:.3} ({:.3}), shares {:.3}/{:.3} ({:.3}/{:.3})",
            a.coef, a_se, p.coef, p_se, r.share_anti, r.share_pro, sa_se, sp_se
        ),
    )
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn fe_ols_oracle() -> Outcome {
    let mut rng = seeded(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ng = rng.random_range(2..=20usize);
        let p = rng.random_range(1..=5usize);
        let groups: Vec<usize> = (0..ng).flat_map(|g| std::iter::repeat_n(g, rng.random_range(3..=12))).collect();
        let n = groups.len();
        let fe: Vec<f64> = (0..ng).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cols: Vec<Vec<f64>> =
            (0..p).map(|_| groups.iter().map(|&g| 0.3 * fe[g] + rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| fe[groups[i]] + cols.iter().map(|c| c[i]).sum::<f64>() + rng.random_range(-1.0..1.0))
            .collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let panel = Panel::new("y", y.clone(), names, cols.clone())
            .and_then(|pn| pn.with_fe(groups.clone()))
            .map_err(|e| e.to_string())?;
        let fit = fit_fe_ols(&panel, VcovKind::Classical).map_err(|e| e.to_string())?.fit;
        let k = p + ng;
        let row = |i: usize| -> Vec<f64> {
            cols.iter().map(|c| c[i]).chain((0..ng).map(|g| f64::from(u8::from(groups[i] == g)))).collect()
        };
        let mut xtx = vec![vec![0.0; k]; k];
        let mut xty = vec![0.0; k];
        for i in 0..n {
            let r = row(i);
            for a in 0..k {
                xty[a] += r[a] * y[i];
                for b in 0..k {
                    xtx[a][b] += r[a] * r[b];
                }
            }
        }
        let want = solve(xtx, xty);
        for j in 0..p {
            let got = fit.coefficient(&format!("x{j}")).map_err(|e| e.to_string())?;
            worst = worst.max((got - want[j]).abs());
        }
    }
    check(worst < 1e-8, format!("max |difference| {worst:.2e} over 100 instances"))
}

fn gradient_check() -> Outcome {
    let design = LatentDesign { n: 400, gamma: 0.2, omega: -0.3, ..LatentDesign::default() };
    let panel = simulate_latent_panel(&mut seeded(6), &design).map_err(|e| e.to_string())?;
    let data = HetProbitData::from_panel(&panel, "female").map_err(|e| e.to_string())?;
    let k = data.n_params();
    let mut rng = seeded(60);
    let (mut worst_grad, mut worst_marg, mut worst_sum) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; k];
        het_probit_gradient(&data, &theta, &mut grad).map_err(|e| e.to_string())?;
        let mut fd = vec![0.0; k];
        for j in 0..k {
            let h = 1e-6 * theta[j].abs().max(1.0);
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[j] += h;
            tm[j] -= h;
            let lp = het_probit_loglik(&data, &tp).map_err(|e| e.to_string())?;
            let lm = het_probit_loglik(&data, &tm).map_err(|e| e.to_string())?;
            fd[j] = (lp - lm) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst_grad = worst_grad.max(err);

        let x_bar: Vec<f64> = vec![rng.random_range(-1.0..1.0)];
        let g_bar = rng.random_range(0.1..0.9);
        let m = het_probit_marginals(&theta, &x_bar, g_bar);
        let h = 1e-5;
        let total_fd = (het_probit_probability(&theta, &x_bar, g_bar + h)
            - het_probit_probability(&theta, &x_bar, g_bar - h))
            / (2.0 * h);
        worst_marg = worst_marg.max((m.total - total_fd).abs());
        worst_sum = worst_sum.max((m.level + m.variance - total_fd).abs());
    }
    check(
        worst_grad < 1e-5 && worst_marg < 1e-6 && worst_sum < 1e-6,
        format!("gradient rel error {worst_grad:.2e}; marginal total vs FD {worst_marg:.2e}; level+variance vs FD {worst_sum:.2e}"),
    )
}

fn tracking_fixture() -> Outcome {
    let ev = |kind, bytes, t: &str| EmailEvent { email_id: "m1".into(), kind, bytes, t: t.into() };
    let log = EmailEventLog {
        events: vec![
            ev(EventKind::Sent, None, "2020-03-02T09:00:00.000Z"),
            ev(EventKind::PixelFetch, None, "2020-03-02T11:00:00.000Z"),
            ev(EventKind::BytesProgress, Some(102_400), "2020-03-02T11:00:10.000Z"),
            ev(EventKind::BytesProgress, Some(204_800), "2020-03-02T11:00:20.000Z"),
        ],
    };
    let s = parse_events(&log, 10_240.0).map_err(|e| e.to_string())?;
    let stay = s.get("m1").ok_or("email missing")?.staying_seconds;
    check(stay == 20.0, format!("staying time {stay} s"))
}

fn ivy_ratio_fixture() -> Outcome {
    let names: Vec<String> = ["female", "female:second_half", "top_school"].map(String::from).to_vec();
    let fit = FitResult {
        names,
        coef: vec![2.73, -6.59, 8.78],
        vcov: Matrix::zeros(3, 3),
        se_kind: SeKind::Classical,
        n_obs: 0,
        n_groups_absorbed: 0,
        r_squared: None,
        log_likelihood: None,
        converged: None,
        trace: Vec::new(),
    };
    let r = ivy_scaled_ratio(&fit, &["female", "female:second_half"], "top_school").map_err(|e| e.to_string())?;
    let rounded = format!("{r:.2}");
    check(rounded == "-0.44", format!("ratio {r:.5} -> {rounded}"))
}

fn randomization_balance() -> Outcome {
    let mut rng = seeded(9);
    let (funds, ideas) = (2000u64, 8u64);
    let investors: Vec<Investor> = (0..2 * funds).map(|k| Investor { investor_id: k, fund_id: k % funds }).collect();
    let mut emails = Vec::new();
    let mut balanced = true;
    for idea_id in 1..=ideas {
        let ivy_variant = if idea_id % 2 == 1 { IvyVariant::Pure } else { IvyVariant::Mixed };
        let a = assign_cells(&mut rng, &investors, StartupIdea { idea_id, ivy_variant }).map_err(|e| e.to_string())?;
        let mut counts = [0usize; Cell::COUNT];
        a.iter().for_each(|t| counts[t.cell.index()] += 1);
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        balanced &= hi - lo <= 1 && counts.iter().sum::<usize>() == funds as usize;
        emails.extend(a);
    }
    let n_emails = emails.len();
    name_senders(&mut rng, &mut emails, &ComponentCatalog::default().names, &mut HashSet::new())
        .map_err(|e| e.to_string())?;
    let schedule = schedule_campaign(emails, 0, 14, None).map_err(|e| e.to_string())?;
    let schedule_ok = check_schedule(&schedule).is_ok();

    let catalog = ComponentCatalog::default();
    let marginals = catalog.marginals();
    let mut observed: BTreeMap<&str, Vec<usize>> = marginals.iter().map(|(k, p)| (*k, vec![0; p.len()])).collect();
    let mut n = 0usize;
    for s in 0..1000 {
        for p in generate_session(&mut rng, &catalog, &format!("s{s}"), 16).map_err(|e| e.to_string())? {
            n += 1;
            for (k, c) in component_categories(&p, &catalog) {
                observed.get_mut(k).ok_or(format!("unknown component {k}"))?[c] += 1;
            }
        }
    }
    let mut failed = Vec::new();
    for (k, probs) in &marginals {
        let obs = &observed[k];
        let cells: Vec<(f64, f64)> =
            obs.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(&o, &p)| (o as f64, p * n as f64)).collect();
        if cells.len() < 2 {
            continue;
        }
        let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
        let crit = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.999);
        if stat > crit {
            failed.push(format!("{k} ({stat:.1} > {crit:.1})"));
        }
    }
    check(
        balanced && schedule_ok && failed.is_empty() && n_emails == 16_000,
        format!(
            "{n_emails} assignments balanced {balanced}; schedule check {schedule_ok}; {} components, chi-square failures {failed:?}",
            marginals.len()
        ),
    )
}

fn crossing_detection() -> Outcome {
    let mut rng = seeded(10);
    let (narrow, wide) = (Normal::<f64>::new(25.0, 5.0).unwrap(), Normal::<f64>::new(25.0, 15.0).unwrap());
    let mut y = Vec::new();
    let mut g = Vec::new();
    for _ in 0..5000 {
        y.push(narrow.sample(&mut rng).clamp(0.0, 100.0));
        g.push(1.0);
        y.push(wide.sample(&mut rng).clamp(0.0, 100.0));
        g.push(0.0);
    }
    let grid: Vec<f64> = (0..=100).map(f64::from).collect();
    let curve = cdf_difference_curve(&y, &g, &grid).map_err(|e| e.to_string())?;
    let ok = !curve.crossings.is_empty() && curve.crossings.iter().all(|c| (c - 25.0).abs() <= 5.0);
    check(ok, format!("crossings {:?}", curve.crossings))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let dir = tmp.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_pitchaudit"))
            .args(["run", "--seed", "2020", "--threads", threads, "--out", dir.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        trees.push(files(&dir));
    }
    let same = trees[0] == trees[1] && trees[0] == trees[2];
    check(same, format!("{} files compared across 2 runs at 1 thread and 1 run at 8 threads", trees[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("heteroskedastic probit recovery", het_probit_recovery),
        ("binary-outcome variance demo", heckman_critique),
        ("generated-regressor demo", generated_regressor),
        ("LOO mixture recovery", loo_mixture_recovery),
        ("FE-OLS vs dummy-variable OLS", fe_ols_oracle),
        ("het-probit gradient and marginals", gradient_check),
        ("tracking log staying time", tracking_fixture),
        ("ivy-scaled ratio", ivy_ratio_fixture),
        ("randomization balance", randomization_balance),
        ("crossing detection", crossing_detection),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
