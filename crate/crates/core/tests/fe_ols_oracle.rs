//! Within-demeaned OLS against explicit group dummies.

use pitchaudit::estimators::{fit_fe_ols, VcovKind};
use pitchaudit::panel::Panel;
use pitchaudit::rng::seeded;
use rand::Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
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

/// Slopes from OLS on `[X, D]` with one dummy per group.
fn dummy_ols(y: &[f64], cols: &[Vec<f64>], groups: &[usize], ng: usize) -> Vec<f64> {
    let n = y.len();
    let k = cols.len() + ng;
    let row = |i: usize| {
        let mut r: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        r.extend((0..ng).map(|g| f64::from(u8::from(groups[i] == g))));
        r
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
    solve(xtx, xty)[..cols.len()].to_vec()
}

#[test]
fn within_estimator_matches_dummy_variables() {
    let mut rng = seeded(2024);
    for case in 0..100 {
        let ng = rng.random_range(2..=20usize);
        let p = rng.random_range(1..=5usize);
        let mut groups = Vec::new();
        for g in 0..ng {
            for _ in 0..rng.random_range(3..=12) {
                groups.push(g);
            }
        }
        let n = groups.len();
        let effects: Vec<f64> = (0..ng).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cols: Vec<Vec<f64>> =
            (0..p).map(|_| groups.iter().map(|&g| effects[g] * 0.3 + rng.random_range(-2.0..2.0)).collect()).collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                effects[groups[i]] + (0..p).map(|j| beta[j] * cols[j][i]).sum::<f64>() + rng.random_range(-1.0..1.0)
            })
            .collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let panel = Panel::new("y", y.clone(), names, cols.clone()).unwrap().with_fe(groups.clone()).unwrap();
        let fit = fit_fe_ols(&panel, VcovKind::Classical).unwrap().fit;
        let want = dummy_ols(&y, &cols, &groups, ng);
        for j in 0..p {
            let got = fit.coefficient(&format!("x{j}")).unwrap();
            assert!((got - want[j]).abs() < 1e-8, "case {case} x{j}: {got} vs {want:?}");
        }
        assert_eq!(fit.n_groups_absorbed, ng);
    }
}
