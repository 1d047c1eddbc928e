//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use gdf::cli::{self, Command, InputSpec, RunConfig, SimulateSpec};
use gdf::eval::fixtures::IMAGE_BLOBS;
use gdf::eval::{rate_experiment, ModelKind, RateOptions, RateTarget, Schedule, SyntheticModel};
use gdf::ingest::{image_to_sample, load_pgm};
use gdf::ridges::{scms_trajectory, trace_ridge_with, RidgeOptions};
use gdf::{absorb, ascend, build_chain, cluster, connectivity, AscentConfig, GdfModel, WeightedSample};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(v: Verdict, elapsed: Duration, limit: Option<Duration>) -> Verdict {
    match limit {
        Some(l) if elapsed > l => verdict(false, format!("{}; runtime {:.1?} over the {:?} limit", v.detail, elapsed, l)),
        _ => verdict(v.pass, format!("{}; {:.1?}", v.detail, elapsed)),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Analytic derivatives against central finite differences on random instances.
fn derivative_oracles() -> Verdict {
    let mut r = rng(101);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let d = 1 + case % 3;
        let n = r.random_range(5..200);
        let pts = gaussian_points(&mut r, n, &vec![0.0; d], 1.0);
        let w = uniform_weights(&mut r, n, 0.1, 5.0);
        let h = 0.2 + r.random::<f64>();
        let m = GdfModel::new(WeightedSample::new(pts, w).unwrap(), h).unwrap();
        let x: Vec<f64> = (0..d).map(|_| 3.0 * r.random::<f64>() - 1.5).collect();
        let step = 1e-5 * h;
        let g = m.gradient(&x).unwrap();
        let hess = m.hessian(&x).unwrap();
        let mut fd_g = vec![0.0; d];
        let mut fd_h = vec![0.0; d * d];
        let mut an_h = vec![0.0; d * d];
        for k in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += step;
            xm[k] -= step;
            fd_g[k] = (m.value(&xp).unwrap() - m.value(&xm).unwrap()) / (2.0 * step);
            let (gp, gm) = (m.gradient(&xp).unwrap(), m.gradient(&xm).unwrap());
            for a in 0..d {
                fd_h[a * d + k] = (gp[a] - gm[a]) / (2.0 * step);
                an_h[a * d + k] = hess[(a, k)];
            }
        }
        worst_g = worst_g.max(diff_norm(g.as_slice(), &fd_g) / norm(&fd_g));
        worst_h = worst_h.max(diff_norm(&an_h, &fd_h) / norm(&fd_h));
    }
    verdict(
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("max gradient rel err {worst_g:.2e} (<= 1e-5), max Hessian rel err {worst_h:.2e} (<= 1e-4)"),
    )
}

/// Plain mode clustering built only from the oracle mean shift: endpoints
/// visited by decreasing estimate, a new mode whenever an endpoint is further
/// than the merge radius from all earlier modes, labels by nearest mode.
fn oracle_clustering(pts: &[Vec<f64>], h: f64, cfg: &AscentConfig) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, Vec<usize>) {
    let ones = vec![1.0; pts.len()];
    let paths: Vec<Vec<Vec<f64>>> =
        pts.iter().map(|p| plain_mean_shift(pts, h, p, cfg.step_tol, cfg.max_iters)).collect();
    let ends: Vec<&Vec<f64>> = paths.iter().map(|p| p.last().unwrap()).collect();
    let values: Vec<f64> = ends.iter().map(|e| naive_kde(pts, &ones, h, e).value).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut modes: Vec<Vec<f64>> = vec![];
    for i in order {
        if modes.iter().all(|m| diff_norm(m, ends[i]) > cfg.merge_radius * h) {
            modes.push(ends[i].clone());
        }
    }
    let labels: Vec<usize> = ends
        .iter()
        .map(|e| {
            (0..modes.len())
                .min_by(|&a, &b| diff_norm(&modes[a], e).total_cmp(&diff_norm(&modes[b], e)).then(a.cmp(&b)))
                .unwrap()
        })
        .collect();
    // each mode is the mean of the endpoints packed around its leader
    let d = pts[0].len();
    let modes = modes
        .iter()
        .enumerate()
        .map(|(j, leader)| {
            let members: Vec<&Vec<f64>> = ends
                .iter()
                .zip(&labels)
                .filter(|(e, l)| **l == j && diff_norm(e, leader) <= 1e-2 * h)
                .map(|(e, _)| *e)
                .collect();
            (0..d).map(|k| members.iter().map(|m| m[k]).sum::<f64>() / members.len() as f64).collect()
        })
        .collect();
    (paths, modes, labels)
}

fn unweighted_reduction() -> Verdict {
    let mut r = rng(202);
    let cfg = AscentConfig::default();
    let (mut worst_value, mut worst_step, mut worst_mode) = (0.0f64, 0.0f64, 0.0f64);
    let mut mismatches = vec![];
    for case in 0..20 {
        let d = 1 + case % 3;
        let n = r.random_range(50..=500);
        let k = 1 + case % 3;
        let mut pts = vec![];
        for c in 0..k {
            let centre: Vec<f64> = (0..d).map(|a| if a == 0 { 4.0 * c as f64 } else { 0.0 }).collect();
            pts.extend(gaussian_points(&mut r, n / k + if c == 0 { n % k } else { 0 }, &centre, 1.0));
        }
        let h = 0.5 + 0.5 * r.random::<f64>();
        let m = GdfModel::new(WeightedSample::unweighted(pts.clone()).unwrap(), h).unwrap();
        let ones = vec![1.0; n];
        for p in pts.iter().take(25) {
            worst_value = worst_value.max(rel_err(m.value(p).unwrap(), naive_kde(&pts, &ones, h, p).value));
        }
        let (paths, modes, labels) = oracle_clustering(&pts, h, &cfg);
        for (p, oracle) in pts.iter().zip(&paths) {
            let t = ascend(&m, p, &cfg).unwrap();
            if t.points.len() != oracle.len() {
                mismatches.push(format!("case {case}: trajectory lengths {} vs {}", t.points.len(), oracle.len()));
                continue;
            }
            for (a, b) in t.points.iter().zip(oracle) {
                worst_step = worst_step.max(diff_norm(a, b) / (1.0 + norm(b)));
            }
        }
        let a = cluster(&m, &cfg).unwrap();
        if a.modes.len() != modes.len() {
            mismatches.push(format!("case {case}: {} modes vs {}", a.modes.len(), modes.len()));
            continue;
        }
        for (x, y) in a.modes.modes.iter().zip(&modes) {
            worst_mode = worst_mode.max(diff_norm(x, y) / (1.0 + norm(y)));
        }
        if a.labels.iter().zip(&labels).any(|(l, o)| *l != Some(*o)) {
            mismatches.push(format!("case {case}: labels differ"));
        }
    }
    verdict(
        worst_value <= 1e-12 && worst_step <= 1e-12 && worst_mode <= 1e-12 && mismatches.is_empty(),
        format!(
            "max value rel err {worst_value:.1e}, max iterate deviation {worst_step:.1e}, max mode deviation {worst_mode:.1e} (<= 1e-12), structural mismatches {mismatches:?}"
        ),
    )
}

fn mark_scale_invariance() -> Verdict {
    let mut r = rng(303);
    let mut pts = gaussian_points(&mut r, 70, &[0.0, 0.0], 0.6);
    pts.extend(gaussian_points(&mut r, 70, &[2.5, 0.5], 0.6));
    let w = uniform_weights(&mut r, 140, 0.2, 3.0);
    let cfg = AscentConfig::default();
    let base = GdfModel::new(WeightedSample::new(pts.clone(), w).unwrap(), 0.6).unwrap();
    let b_assign = cluster(&base, &cfg).unwrap();
    let (b_chain, b_conn) = connectivity(&base, &b_assign).unwrap();
    let seeds: Vec<Vec<f64>> = pts.iter().step_by(7).cloned().collect();
    // mean shift, SCMS, S, T, A, Omega
    let mut parts = [0.0f64; 6];
    let mut worst_value = 0.0f64;
    let mut labels_equal = true;
    for c in [1e-3, 1.0, 1e3] {
        let m = base.with_scaled_weights(c).unwrap();
        for s in &seeds {
            let (ta, tb) = (ascend(&base, s, &cfg).unwrap(), ascend(&m, s, &cfg).unwrap());
            let (sa, sb) = (scms_trajectory(&base, s, &cfg).unwrap(), scms_trajectory(&m, s, &cfg).unwrap());
            for (idx, (x, y)) in [(ta, tb), (sa, sb)].into_iter().enumerate() {
                if x.points.len() != y.points.len() {
                    parts[idx] = f64::INFINITY;
                }
                for (p, q) in x.points.iter().zip(&y.points) {
                    parts[idx] = parts[idx].max(diff_norm(p, q) / (1.0 + norm(p)));
                }
            }
            worst_value = worst_value.max(rel_err(m.value(s).unwrap(), c * base.value(s).unwrap()));
        }
        let a = cluster(&m, &cfg).unwrap();
        labels_equal &= a.labels == b_assign.labels;
        let (chain, conn) = connectivity(&m, &a).unwrap();
        for (idx, (x, y)) in [
            (&chain.s, &b_chain.s),
            (&chain.t, &b_chain.t),
            (&conn.absorbing, &b_conn.absorbing),
            (&conn.omega, &b_conn.omega),
        ]
        .into_iter()
        .enumerate()
        {
            parts[idx + 2] = parts[idx + 2].max((x - y).amax());
        }
    }
    let worst = parts.iter().copied().fold(0.0f64, f64::max);
    verdict(
        worst <= 1e-12 && worst_value <= 1e-12 && labels_equal,
        format!(
            "max deviation {worst:.1e} (<= 1e-12) [mean shift, SCMS, S, T, A, Omega: {:?}]; value scaling rel err {worst_value:.1e}; labels equal: {labels_equal}",
            parts.map(|v| format!("{v:.1e}"))
        ),
    )
}

fn ascent_property() -> Verdict {
    let model = SyntheticModel::new(ModelKind::Mixture2d);
    let sample = model.sample(1500, &mut rng(404)).unwrap();
    let seeds: Vec<Vec<f64>> = sample.points().map(<[f64]>::to_vec).collect();
    let m = GdfModel::new(sample, 0.4).unwrap();
    let cfg = AscentConfig::default();
    let (mut steps, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for s in &seeds {
        let t = ascend(&m, s, &cfg).unwrap();
        for pair in t.points.windows(2) {
            let (before, after) = (m.value(&pair[0]).unwrap(), m.value(&pair[1]).unwrap());
            let drop = (before - after) / before.abs();
            worst = worst.max(drop);
            if after < before - 1e-12 * before.abs() {
                violations += 1;
            }
            steps += 1;
        }
        if steps >= 10_000 {
            break;
        }
    }
    verdict(
        steps >= 10_000 && violations == 0,
        format!("{steps} steps, {violations} decreases beyond 1e-12 relative (largest relative drop {worst:.1e})"),
    )
}

fn markov_contracts() -> Verdict {
    let cfg = AscentConfig::default();
    let mut notes = vec![];
    let mut pass = true;
    let (mut row_st, mut row_a) = (0.0f64, 0.0f64);
    let mut worst_z = 0.0f64;
    let mut omega_ok = true;
    let mut instances: Vec<(Vec<Vec<f64>>, Vec<f64>, f64)> = vec![
        (vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 2.0], 0.6),
        (vec![vec![0.0], vec![0.3], vec![1.6]], vec![1.0, 0.5, 1.5], 0.4),
        (vec![vec![0.0, 0.0], vec![0.4, 0.1], vec![1.5, 0.0], vec![1.9, 0.2]], vec![1.0, 2.0, 0.7, 1.3], 0.45),
    ];
    let mut r = rng(505);
    let mut big = gaussian_points(&mut r, 150, &[0.0, 0.0], 0.6);
    big.extend(gaussian_points(&mut r, 150, &[2.0, 0.0], 0.6));
    instances.push((big, uniform_weights(&mut r, 300, 0.5, 2.0), 0.5));
    for (idx, (pts, w, h)) in instances.into_iter().enumerate() {
        let n = pts.len();
        let m = GdfModel::new(WeightedSample::new(pts, w).unwrap(), h).unwrap();
        let a = cluster(&m, &cfg).unwrap();
        let blocks = build_chain(&m, &a.modes).unwrap();
        let abs = absorb(&blocks).unwrap();
        for i in 0..n {
            row_st = row_st.max((blocks.s.row(i).sum() + blocks.t.row(i).sum() - 1.0).abs());
            row_a = row_a.max((abs.row(i).sum() - 1.0).abs());
        }
        let (_, res) = connectivity(&m, &a).unwrap();
        let k = res.omega.nrows();
        for i in 0..k {
            for j in 0..k {
                omega_ok &= res.omega[(i, j)] == res.omega[(j, i)] && (0.0..=1.0).contains(&res.omega[(i, j)]);
            }
        }
        if n <= 4 {
            let s: Vec<Vec<f64>> = (0..n).map(|i| blocks.s.row(i).iter().copied().collect()).collect();
            let t: Vec<Vec<f64>> = (0..n).map(|i| blocks.t.row(i).iter().copied().collect()).collect();
            let (freq, _) = simulate_absorption(&s, &t, 1_000_000, 600 + idx as u64);
            for i in 0..n {
                for j in 0..a.modes.len() {
                    let p = abs[(i, j)];
                    let se = (p * (1.0 - p) / 1e6).sqrt();
                    let z = (freq[i][j] - p).abs() / se;
                    worst_z = worst_z.max(z);
                    if z > 3.0 {
                        pass = false;
                        notes.push(format!("chain {idx} A[{i},{j}]={p:.6} vs {:.6}", freq[i][j]));
                    }
                }
            }
        }
    }
    pass &= row_st <= 1e-12 && row_a <= 1e-8 && omega_ok;
    verdict(
        pass,
        format!(
            "[S|T] row error {row_st:.1e} (<= 1e-12), A row error {row_a:.1e} (<= 1e-8), largest Monte-Carlo deviation {worst_z:.2} SE (<= 3), Omega symmetric in [0,1]: {omega_ok} {notes:?}"
        ),
    )
}

fn mise_trend() -> Verdict {
    let model = SyntheticModel::new(ModelKind::Gaussian1d);
    let opts = RateOptions { seed: 6, quadrature_per_axis: 128, ..RateOptions::default() };
    let schedule = Schedule::power_law(&[250, 1000, 4000, 16000], 1.0, 0.2);
    let report = rate_experiment(&model, RateTarget::Mise(0), &schedule, &opts).unwrap();
    let fit = report.fit.unwrap();
    let means: Vec<String> = report.cells.iter().map(|c| format!("{:.3e}", c.stats.mean)).collect();
    verdict(
        (fit.slope - -0.8).abs() <= 0.3 * 0.8,
        format!("fitted slope {:.3} (target -0.8 +/- 30%), means {means:?}", fit.slope),
    )
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

fn mode_trend() -> Verdict {
    let model = SyntheticModel::new(ModelKind::Mixture2d);
    let opts = RateOptions { seed: 7, max_seeds: 150, ..RateOptions::default() };
    let schedule = Schedule::power_law(&[500, 2000, 8000], 1.3, 0.125);
    let report = rate_experiment(&model, RateTarget::ModeHausdorff, &schedule, &opts).unwrap();
    let medians: Vec<f64> = report.cells.iter().map(|c| c.stats.median).collect();
    let density_only: Vec<f64> =
        report.cells.iter().map(|c| median(c.unweighted_truth_errors.as_ref().unwrap())).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let closer = medians.iter().zip(&density_only).all(|(a, b)| a < b);
    let shift = hausdorff_shift(&model);
    verdict(
        decreasing && closer,
        format!(
            "median error vs modes of mu*p {medians:.3?} (strictly decreasing: {decreasing}); vs modes of p {density_only:.3?} (weighted closer: {closer}); true mode shift {shift:.3}"
        ),
    )
}

fn hausdorff_shift(model: &SyntheticModel) -> f64 {
    gdf::eval::hausdorff(&model.true_modes().unwrap(), &model.density_modes().unwrap()).unwrap()
}

fn ridge_trend() -> Verdict {
    let model = SyntheticModel::new(ModelKind::Circle2d);
    let sample = model.sample(1000, &mut rng(808)).unwrap();
    let seeds: Vec<Vec<f64>> = sample.points().map(<[f64]>::to_vec).collect();
    let h = 0.5 * 1000f64.powf(-0.125);
    let m = GdfModel::new(sample, h).unwrap();
    let ridge = trace_ridge_with(&m, &seeds, &RidgeOptions::default()).unwrap().ridge;
    let mean_dev = ridge.points.iter().map(|p| (norm(p) - 2.0).abs()).sum::<f64>() / ridge.len() as f64;

    let opts = RateOptions { seed: 8, ..RateOptions::default() };
    let schedule = Schedule::power_law(&[500, 4000], 0.5, 0.125);
    let report = rate_experiment(&model, RateTarget::RidgeHausdorff, &schedule, &opts).unwrap();
    let (small, large) = (report.cells[0].stats.median, report.cells[1].stats.median);
    verdict(
        mean_dev <= 0.1 && large < small,
        format!(
            "n=1000: {} ridge points, mean |r-2| = {mean_dev:.4} (<= 0.1); median Hausdorff n=500 {small:.4}, n=4000 {large:.4}",
            ridge.len()
        ),
    )
}

fn image_pipeline() -> Verdict {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/four_blobs.pgm");
    let img = load_pgm(&path).unwrap();
    let sample = image_to_sample(&img, cli::DEFAULT_IMAGE_THRESHOLD).unwrap();
    let n = sample.len();
    let m = GdfModel::new(sample, 2.0).unwrap();
    let a = cluster(&m, &AscentConfig::default()).unwrap();
    let (_, res) = connectivity(&m, &a).unwrap();
    let k = a.num_clusters();
    let labelled = a.labels.iter().filter(|l| l.is_some()).count() as f64 / n as f64;
    // clusters owning the two overlapping blobs
    let owner = |c: [f64; 2]| {
        (0..k).min_by(|&i, &j| diff_norm(&a.modes.modes[i], &c).total_cmp(&diff_norm(&a.modes.modes[j], &c))).unwrap()
    };
    let (p, q) = (owner(IMAGE_BLOBS[0].0), owner(IMAGE_BLOBS[1].0));
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..k {
        for j in i + 1..k {
            if res.omega[(i, j)] > best.2 {
                best = (i, j, res.omega[(i, j)]);
            }
        }
    }
    let next = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .filter(|&(i, j)| (i, j) != (best.0, best.1))
        .map(|(i, j)| res.omega[(i, j)])
        .fold(0.0f64, f64::max);
    let maximal = k == 4 && p != q && (best.0, best.1) == (p.min(q), p.max(q));
    verdict(
        k == 4 && labelled >= 0.99 && maximal,
        format!(
            "{k} modes from {n} pixels, {:.2}% labelled; largest Omega {:.3} between clusters {} and {} (overlapping pair {}, {}), next largest {next:.2e}",
            labelled * 100.0,
            best.2,
            best.0,
            best.1,
            p.min(q),
            p.max(q)
        ),
    )
}

fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism() -> Verdict {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let catalog = InputSpec::Catalog {
        path: data.join("two_blobs.csv"),
        coords: vec!["x".into(), "y".into()],
        weight: Some("weight".into()),
        sdss: None,
        header: true,
        rejection_budget: 0,
    };
    let image = InputSpec::Image { path: data.join("four_blobs.pgm"), threshold: 0.15, cartesian: false };
    let mut configs = vec![];
    for (cmd, input, h) in [
        (Command::Estimate, catalog.clone(), 0.5),
        (Command::Modes, catalog.clone(), 0.5),
        (Command::Ridges, catalog.clone(), 0.5),
        (Command::Connectivity, catalog, 0.5),
        (Command::Connectivity, image, 2.0),
    ] {
        let mut cfg = RunConfig::new(cmd, "");
        cfg.input = Some(input);
        cfg.bandwidth = Some(h);
        cfg.grid = (cmd == Command::Estimate).then_some(40);
        configs.push(cfg);
    }
    let mut sim = RunConfig::new(Command::Simulate, "");
    sim.seed = 99;
    sim.simulate = Some(SimulateSpec {
        model: "mixture2d".into(),
        target: "mode".into(),
        sizes: vec![200, 400],
        c: 1.3,
        gamma: 0.125,
        max_seeds: 40,
        ..SimulateSpec::default()
    });
    configs.push(sim);

    let root = tempfile::tempdir().unwrap();
    let mut differing = vec![];
    let mut files = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let mut runs = vec![];
        for (rep, threads) in [1usize, 1, 3].into_iter().enumerate() {
            let mut c = cfg.clone();
            c.out = root.path().join(format!("{i}-{rep}"));
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| cli::run(&c)).unwrap();
            runs.push(snapshot(&c.out));
        }
        files += runs[0].len();
        if runs[0] != runs[1] || runs[0] != runs[2] {
            differing.push(cfg.command.name());
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} configurations, {files} files, each run three times (1, 1 and 3 threads); differing: {differing:?}", configs.len()),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("derivative oracles", derivative_oracles, Some(Duration::from_secs(10))),
        ("unweighted reduction", unweighted_reduction, Some(Duration::from_secs(30))),
        ("mark-scale invariance", mark_scale_invariance, None),
        ("ascent property", ascent_property, None),
        ("Markov-chain contracts", markov_contracts, None),
        ("MISE_0 rate trend", mise_trend, Some(Duration::from_secs(300))),
        ("mode Hausdorff trend", mode_trend, Some(Duration::from_secs(300))),
        ("ridge Hausdorff trend", ridge_trend, Some(Duration::from_secs(300))),
        ("image pipeline", image_pipeline, None),
        ("determinism", determinism, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|a| *a == id || name.contains(a.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = match std::panic::catch_unwind(f) {
            Ok(v) => v,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        let v = within(v, start.elapsed(), *limit);
        println!("criterion {:>2} {:<24} {}  {}", id, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
