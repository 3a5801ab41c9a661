//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria whose input files are missing print `FAIL (blocked: ...)` and do
//! not change the exit status; every other failure exits with status 1.
//! Benchmark datasets are read from `$NEUROFUZZY_DATA_DIR`, defaulting to the
//! workspace `data/` directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurofuzzy::bench::{benchmark_suite, cross_validate, run_benchmark, BenchmarkConfig, EvalReport, SuiteEntry};
use neurofuzzy::bpso::{self, SwarmConfig};
use neurofuzzy::consequent::AnfisModel;
use neurofuzzy::data::{kfold, load_csv, Dataset, MinMaxScaler};
use neurofuzzy::fuzzy::{FuzzyFrontEnd, GBellParams, InputSpec, MfKind, TNorm};
use neurofuzzy::metrics::{classification_metrics, regression_metrics};
use neurofuzzy::model::{train, FitConfig, MfCounts, Mode};
use neurofuzzy::pca::{eig_sym, PcaBasis};
use neurofuzzy::reduction::{FitnessData, MaskFitness};

enum Status {
    Pass,
    Fail,
    Blocked(String),
}

struct Check {
    id: &'static str,
    title: &'static str,
    status: Status,
    detail: String,
}

impl Check {
    fn new(id: &'static str, title: &'static str, ok: bool, detail: String) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Check { id, title, status, detail }
    }

    fn blocked(id: &'static str, title: &'static str, why: String) -> Self {
        Check {
            id,
            title,
            status: Status::Blocked(why),
            detail: String::new(),
        }
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("NEUROFUZZY_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn entry(abbrev: &str) -> SuiteEntry {
    benchmark_suite().into_iter().find(|e| e.abbrev == abbrev).expect("suite entry")
}

fn load(e: &SuiteEntry) -> Result<Dataset, String> {
    let path = e.path(&data_dir());
    if !path.exists() {
        return Err(format!("{} not found", path.display()));
    }
    load_csv(&path, &e.schema()).map_err(|err| err.to_string())
}

/// Settings used for every reduced-model run below: library defaults with
/// mask fitness scored on a held-out part of each training fold.
fn reduced_config(e: &SuiteEntry, seed: u64) -> FitConfig {
    FitConfig {
        mode: Mode::PcaBpso,
        mf_counts: MfCounts::Uniform(e.mf_count),
        seed,
        fitness_data: FitnessData::ValidationSplit,
        ..FitConfig::default()
    }
}

fn baseline_config(e: &SuiteEntry, seed: u64) -> FitConfig {
    FitConfig {
        mode: Mode::BaselineAnfis,
        mf_counts: MfCounts::Uniform(e.mf_count),
        seed,
        ..FitConfig::default()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn column_mean(r: &EvalReport, name: &str) -> f64 {
    r.summary(name).mean.unwrap_or(f64::NAN)
}

/// Reduced-model reports at seed 0, shared between criteria.
#[derive(Default)]
struct Runs {
    reduced: BTreeMap<String, Result<EvalReport, String>>,
}

impl Runs {
    fn reduced(&mut self, abbrev: &str) -> Result<EvalReport, String> {
        self.reduced
            .entry(abbrev.to_string())
            .or_insert_with(|| {
                let e = entry(abbrev);
                let ds = load(&e)?;
                cross_validate(&ds, abbrev, &reduced_config(&e, 0), 5).map_err(|err| err.to_string())
            })
            .clone()
    }
}

fn c1_rule_counts() -> Check {
    let expected = [
        ("IRS", 81),
        ("TAE", 32),
        ("BAN", 9),
        ("HAB", 27),
        ("BAL", 16),
        ("MOK", 64),
        ("SER", 16),
        ("IST", 256),
    ];
    let mut bad = Vec::new();
    for (abbrev, rules) in expected {
        let e = entry(abbrev);
        let specs = vec![InputSpec::new(0.0, 1.0, e.mf_count).unwrap(); e.features];
        let front = FuzzyFrontEnd::new(&specs, MfKind::GBell, TNorm::Product).unwrap();
        if front.rule_count() != rules {
            bad.push(format!("{abbrev}={}", front.rule_count()));
        }
    }
    let detail = if bad.is_empty() {
        "IRS 81, TAE 32, BAN 9, HAB 27, BAL 16, MOK 64, SER 16, IST 256".to_string()
    } else {
        format!("mismatch: {}", bad.join(", "))
    };
    Check::new("C1", "grid rule counts", bad.is_empty(), detail)
}

fn c2_iris(runs: &mut Runs) -> Check {
    const TITLE: &str = "IRS accuracy >= 0.90 with <= 6 selected components";
    let e = entry("IRS");
    let ds = match load(&e) {
        Ok(ds) => ds,
        Err(why) => return Check::blocked("C2", TITLE, why),
    };
    let start = Instant::now();
    let mut acc = Vec::new();
    let mut comps = Vec::new();
    for seed in 0..5 {
        let report = if seed == 0 {
            runs.reduced("IRS")
        } else {
            cross_validate(&ds, "IRS", &reduced_config(&e, seed), 5).map_err(|err| err.to_string())
        };
        match report {
            Ok(r) => {
                acc.push(column_mean(&r, "accuracy"));
                comps.push(column_mean(&r, "rules"));
            }
            Err(why) => return Check::new("C2", TITLE, false, why),
        }
    }
    let (a, k) = (mean(&acc), mean(&comps));
    Check::new(
        "C2",
        TITLE,
        a >= 0.90 && k <= 6.0,
        format!(
            "accuracy {a:.4}, selected {k:.2} over 5 seeds x 5 folds ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn accuracy_check(runs: &mut Runs, id: &'static str, title: &'static str, abbrev: &str, floor: f64) -> Check {
    let start = Instant::now();
    match runs.reduced(abbrev) {
        Ok(r) => {
            let a = column_mean(&r, "accuracy");
            Check::new(
                id,
                title,
                a >= floor,
                format!(
                    "accuracy {a:.4}, selected {:.1} of {} ({:.1}s)",
                    column_mean(&r, "rules"),
                    entry(abbrev).grid_rules(),
                    start.elapsed().as_secs_f64()
                ),
            )
        }
        Err(why) if why.contains("not found") => Check::blocked(id, title, why),
        Err(why) => Check::new(id, title, false, why),
    }
}

fn c5_dominance(runs: &mut Runs) -> Check {
    const TITLE: &str = "reduced rules and fit time below baseline";
    let mut lines = Vec::new();
    let mut missing = Vec::new();
    let mut ok = true;
    for e in benchmark_suite() {
        let ds = match load(&e) {
            Ok(ds) => ds,
            Err(_) => {
                missing.push(e.abbrev.clone());
                continue;
            }
        };
        let reduced = match runs.reduced(&e.abbrev) {
            Ok(r) => r,
            Err(why) => {
                ok = false;
                lines.push(format!("{} reduced failed: {why}", e.abbrev));
                continue;
            }
        };
        let base = match cross_validate(&ds, &e.abbrev, &baseline_config(&e, 0), 5) {
            Ok(r) => r,
            Err(why) => {
                ok = false;
                lines.push(format!("{} baseline failed: {why}", e.abbrev));
                continue;
            }
        };
        let max_selected = reduced.folds.iter().map(|f| f.rule_count).max().unwrap_or(0);
        let base_rules = base.folds.iter().map(|f| f.rule_count).min().unwrap_or(0);
        let (tr, tb) = (column_mean(&reduced, "fit_seconds"), column_mean(&base, "fit_seconds"));
        let pass = max_selected < base_rules && tr < tb;
        ok &= pass;
        lines.push(format!(
            "{} rules {max_selected}<{base_rules} fit {tr:.3}s<{tb:.3}s{}",
            e.abbrev,
            if pass { "" } else { " VIOLATED" }
        ));
    }
    if lines.is_empty() {
        return Check::blocked("C5", TITLE, "no suite dataset found".into());
    }
    let mut detail = lines.join("; ");
    if !missing.is_empty() {
        detail.push_str(&format!("; not evaluated (no data file): {}", missing.join(", ")));
    }
    Check::new("C5", TITLE, ok, detail)
}

fn c6_airfoil(runs: &mut Runs) -> Check {
    const TITLE: &str = "AIR normalized RMSE <= 0.15";
    match runs.reduced("AIR") {
        Ok(r) => {
            let rmse = column_mean(&r, "rmse");
            Check::new("C6", TITLE, rmse <= 0.15, format!("rmse {rmse:.4}"))
        }
        Err(why) if why.contains("not found") => Check::blocked("C6", TITLE, why),
        Err(why) => Check::new("C6", TITLE, false, why),
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(analytic.abs()).max(1e-6)
}

fn c7a_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a);
    let h = 1e-6;
    let mut worst_mf: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, c) = (
            rng.random_range(0.2..2.0),
            rng.random_range(0.5..4.0),
            rng.random_range(-1.0..1.0),
        );
        let x = rng.random_range(-3.0..3.0);
        let g = GBellParams::new(a, b, c).unwrap().grad(x);
        let mu = |a: f64, b: f64, c: f64| GBellParams::new(a, b, c).unwrap().mu(x);
        let fd = [
            (mu(a + h, b, c) - mu(a - h, b, c)) / (2.0 * h),
            (mu(a, b + h, c) - mu(a, b - h, c)) / (2.0 * h),
            (mu(a, b, c + h) - mu(a, b, c - h)) / (2.0 * h),
        ];
        for p in 0..3 {
            worst_mf = worst_mf.max(rel_err(g[p], fd[p]));
        }
    }

    let mut worst_chain: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(2..=3);
        let n = 25;
        let x: Array2<f64> = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
        let y = Array1::from_shape_fn(n, |i| (3.0 * x[[i, 0]]).sin() + rng.random_range(-0.1..0.1));
        let specs = vec![InputSpec::new(0.0, 1.0, m).unwrap(); d];
        let front = FuzzyFrontEnd::new(&specs, MfKind::GBell, TNorm::Product).unwrap();
        let mut model = AnfisModel::new(front);
        model.fit_consequents(x.view(), y.view()).unwrap();
        let (i, k, p) = (rng.random_range(0..d), rng.random_range(0..m), rng.random_range(0..3));
        let analytic = model.premise_gradient(x.view(), y.view()).unwrap()[i][k][p];
        let base = model.front().mfs()[i][k].params();
        let mse_at = |delta: f64| {
            let mut probe = model.clone();
            let mut v = base.clone();
            v[p] += delta;
            probe.front_mut().mfs_mut()[i][k].set_params(&v).unwrap();
            probe.mse(x.view(), y.view()).unwrap()
        };
        let fd = (mse_at(h) - mse_at(-h)) / (2.0 * h);
        worst_chain = worst_chain.max(rel_err(analytic, fd));
    }
    Check::new(
        "7a",
        "gradients match finite differences",
        worst_mf < 1e-3 && worst_chain < 1e-3,
        format!("worst rel. err: gbell {worst_mf:.2e}, premise chain {worst_chain:.2e} (1000 draws each)"),
    )
}

fn c7b_row_sums() -> Check {
    let mut worst: f64 = 0.0;
    let mut rows = 0usize;
    let mut used = Vec::new();
    for e in benchmark_suite() {
        let Ok(ds) = load(&e) else { continue };
        used.push(e.abbrev.clone());
        let labels = ds.labels();
        let plan = kfold(ds.n_samples(), 5, 0, labels.as_deref()).unwrap();
        for f in 0..plan.k() {
            let train_ds = ds.subset(&plan.train_indices(f));
            let test_ds = ds.subset(plan.test_indices(f));
            let scaler = MinMaxScaler::fit(train_ds.features.view()).unwrap();
            for kind in [MfKind::GBell, MfKind::Gaussian] {
                let specs = vec![InputSpec::new(0.0, 1.0, e.mf_count).unwrap(); ds.n_features()];
                let front = FuzzyFrontEnd::new(&specs, kind, TNorm::Product).unwrap();
                for part in [&train_ds, &test_ds] {
                    let x = scaler.transform(part.features.view()).unwrap();
                    let w = front.normalized_firing(x.view()).unwrap();
                    for row in w.values.rows() {
                        worst = worst.max((row.sum() - 1.0).abs());
                        rows += 1;
                    }
                }
            }
        }
    }
    if used.is_empty() {
        return Check::blocked("7b", "normalized firing rows sum to 1", "no suite dataset found".into());
    }
    Check::new(
        "7b",
        "normalized firing rows sum to 1",
        worst <= 1e-9,
        format!("max |sum - 1| = {worst:.2e} over {rows} rows ({})", used.join(", ")),
    )
}

/// Determinant by Gaussian elimination with partial pivoting.
fn lu_det(mut a: Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[[i, k]].abs().total_cmp(&a[[j, k]].abs())).unwrap();
        if a[[p, k]] == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in 0..n {
                a.swap([k, j], [p, j]);
            }
            det = -det;
        }
        det *= a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] / a[[k, k]];
            for j in k..n {
                a[[i, j]] -= f * a[[k, j]];
            }
        }
    }
    det
}

fn c7c_eigen() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7c);
    let mut failures = 0;
    let mut worst_resid: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=20);
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
        }
        let eig = eig_sym(s.view()).unwrap();
        let norm_inf = s.rows().into_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let norm_f = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lambdas = eig.values.to_vec();

        let trace: f64 = (0..n).map(|i| s[[i, i]]).sum();
        let trace_ok = (trace - lambdas.iter().sum::<f64>()).abs() <= 1e-10 * norm_f.max(1.0) * n as f64;

        let det = lu_det(s.clone());
        let prod: f64 = lambdas.iter().product();
        // first-order sensitivity of the product to eigenvalue errors of size ~1e-9 |S|_F
        let sens: f64 = (0..n)
            .map(|i| lambdas.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, l)| l.abs()).product::<f64>())
            .sum();
        let det_ok = (det - prod).abs() <= 1e-9 * norm_f * sens + 1e-300;

        let mut resid: f64 = 0.0;
        for (k, &l) in lambdas.iter().enumerate() {
            let v = eig.vectors.column(k);
            let sv = s.dot(&v);
            for i in 0..n {
                resid = resid.max((sv[i] - l * v[i]).abs());
            }
        }
        worst_resid = worst_resid.max(resid / norm_inf);
        if !(trace_ok && det_ok && resid < 1e-8 * norm_inf) {
            failures += 1;
        }
    }
    Check::new(
        "7c",
        "eigen identities and residuals",
        failures == 0,
        format!("{failures}/500 matrices failed; worst residual {worst_resid:.2e} |S|_inf"),
    )
}

fn c7d_exhaustive_masks() -> Check {
    let mut hits = 0;
    let mut ks = Vec::new();
    for run in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7d00 + run);
        let n = 120;
        let x: Array2<f64> = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..1.0));
        let (p, q): (f64, f64) = (rng.random_range(1.0..4.0), rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| {
            (p * x[[i, 0]]).sin() + q * x[[i, 1]] * x[[i, 1]] + rng.random_range(-0.05..0.05)
        });
        let specs = [InputSpec::new(0.0, 1.0, 3).unwrap(), InputSpec::new(0.0, 1.0, 4).unwrap()];
        let front = FuzzyFrontEnd::new(&specs, MfKind::GBell, TNorm::Product).unwrap();
        let firing = front.normalized_firing(x.view()).unwrap();
        let k = 4 + (run as usize % 7);
        ks.push(k);
        let basis = PcaBasis::fit_with_components(firing.values.view(), k).unwrap();
        let scores = basis.project(firing.values.view()).unwrap();
        let mut objective = MaskFitness::training(scores.view(), x.view(), y.view()).unwrap();

        let mut best = f64::INFINITY;
        for code in 1u32..(1 << k) {
            let bits: Vec<bool> = (0..k).map(|j| code >> j & 1 == 1).collect();
            best = best.min(objective.fitness(&bits).unwrap());
        }
        let swarm = SwarmConfig::new(front.rule_count().min(50), k, 100, run);
        let res = bpso::run(&swarm, &mut objective).unwrap();
        if res.gbest_fitness <= 1.05 * best {
            hits += 1;
        }
    }
    Check::new(
        "7d",
        "BPSO within 5% of exhaustive optimum",
        hits >= 90,
        format!(
            "{hits}/100 runs, K in {}..={}, T = 100",
            ks.iter().min().unwrap(),
            ks.iter().max().unwrap()
        ),
    )
}

fn report_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "timings.csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c7e_determinism() -> Check {
    const TITLE: &str = "seeded runs are bit-identical";
    let suite: Vec<SuiteEntry> = ["HAB", "TAE"]
        .into_iter()
        .map(entry)
        .filter(|e| e.path(&data_dir()).exists())
        .collect();
    if suite.is_empty() {
        return Check::blocked("7e", TITLE, "HAB and TAE data files not found".into());
    }
    let root = std::env::temp_dir().join(format!("nf-acceptance-{}", std::process::id()));
    let run = |tag: &str| {
        let out = root.join(tag);
        let cfg = BenchmarkConfig {
            data_dir: data_dir(),
            out_dir: out.clone(),
            modes: Mode::ALL.to_vec(),
            fit: FitConfig {
                seed: 11,
                ..FitConfig::default()
            },
            mf_counts: None,
            folds: 5,
        };
        run_benchmark(&suite, &cfg).unwrap();
        report_bytes(&out)
    };
    let (first, second) = (run("a"), run("b"));

    let e = &suite[0];
    let ds = load(e).unwrap();
    let models: Vec<String> = (0..2)
        .map(|_| train(&ds, &reduced_config(e, 5)).unwrap().model.to_json().unwrap())
        .collect();
    let _ = std::fs::remove_dir_all(&root);
    let same = first == second && models[0] == models[1];
    Check::new(
        "7e",
        TITLE,
        same,
        format!(
            "{} report files over {} and 4 modes, plus a model file",
            first.len(),
            suite.iter().map(|e| e.abbrev.as_str()).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c7f_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7f);
    let mut rmse_bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let m = regression_metrics(&t, &p).unwrap();
        if (m.rmse * m.rmse - m.mse).abs() > 1e-12 * m.mse.max(1.0) {
            rmse_bad += 1;
        }
    }
    let mut cm_bad = 0;
    for _ in 0..1000 {
        let classes = rng.random_range(2..=5);
        let n = rng.random_range(1..150);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let m = classification_metrics(&t, &p, classes).unwrap();
        let pairs: Vec<(usize, usize)> = t.iter().copied().zip(p.iter().copied()).collect();
        let count = |f: &dyn Fn(&(usize, usize)) -> bool| pairs.iter().filter(|x| f(x)).count() as f64;
        let acc = count(&|&(a, b)| a == b) / n as f64;
        let scored: Vec<usize> = if classes == 2 { vec![1] } else { (0..classes).collect() };
        let (mut ps, mut rs) = (0.0, 0.0);
        for &c in &scored {
            let tp = count(&|&(a, b)| a == c && b == c);
            let predicted = count(&|&(_, b)| b == c);
            let actual = count(&|&(a, _)| a == c);
            ps += if predicted > 0.0 { tp / predicted } else { 0.0 };
            rs += if actual > 0.0 { tp / actual } else { 0.0 };
        }
        let (prec, rec) = (ps / scored.len() as f64, rs / scored.len() as f64);
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        if !(close(m.accuracy, acc) && close(m.precision, prec) && close(m.recall, rec) && close(m.f1, f1)) {
            cm_bad += 1;
        }
    }
    Check::new(
        "7f",
        "metric identities and confusion oracle",
        rmse_bad == 0 && cm_bad == 0,
        format!("RMSE^2 = MSE failures {rmse_bad}/1000, confusion oracle mismatches {cm_bad}/1000"),
    )
}

type CheckFn = dyn FnOnce(&mut Runs) -> Check;

fn main() {
    let mut runs = Runs::default();
    let checks: Vec<Box<CheckFn>> = vec![
        Box::new(|_| c1_rule_counts()),
        Box::new(c2_iris),
        Box::new(|r| accuracy_check(r, "C3", "MOK accuracy >= 0.95", "MOK", 0.95)),
        Box::new(|r| accuracy_check(r, "C4", "HAB accuracy >= 0.70", "HAB", 0.70)),
        Box::new(c5_dominance),
        Box::new(c6_airfoil),
        Box::new(|_| c7a_gradients()),
        Box::new(|_| c7b_row_sums()),
        Box::new(|_| c7c_eigen()),
        Box::new(|_| c7d_exhaustive_masks()),
        Box::new(|_| c7e_determinism()),
        Box::new(|_| c7f_metrics()),
    ];
    let mut failed = 0;
    let mut blocked = 0;
    for check in checks {
        let c = check(&mut runs);
        match &c.status {
            Status::Pass => println!("PASS {} {}: {}", c.id, c.title, c.detail),
            Status::Fail => {
                failed += 1;
                println!("FAIL {} {}: {}", c.id, c.title, c.detail);
            }
            Status::Blocked(why) => {
                blocked += 1;
                println!("FAIL {} {} (blocked: {why})", c.id, c.title);
            }
        }
    }
    println!("{failed} failed, {blocked} blocked by missing data");
    if failed > 0 {
        std::process::exit(1);
    }
}
