//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use sa_inference::critical_values::{two_sided_quantile, simulate_functionals, CriticalValueTable, TABLE_FUNCTIONALS};
use sa_inference::harness::alpha::{high_moment_branch, middle_branch};
use sa_inference::harness::report::report_to_string;
use sa_inference::harness::{run_coverage, CoverageReport, ExperimentConfig};
use sa_inference::inference::{f_statistic, sigma_offline, trapezoid_m2, ProjectedTrajectory};
use sa_inference::mdp::{Mdp, VALUE_ITERATION_TOL};
use sa_inference::rng::derive_rng;
use sa_inference::{Functional, IntegralRule, RandomScalingAccumulator};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    println!(
        "{} {name}: {} [{:.1}s]",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        start.elapsed().as_secs_f64()
    );
    out.pass
}

fn coverage(text: &str) -> CoverageReport {
    run_coverage(&ExperimentConfig::parse(text).expect("valid config")).expect("study runs")
}

fn m2(report: &CoverageReport, steps: usize) -> (f64, f64) {
    let row = report
        .find("random_scaling", Some(Functional::Power(2)), steps)
        .expect("m = 2 row");
    (row.coverage, row.mean_length)
}

fn critical_values() -> Outcome {
    let samples = simulate_functionals(&TABLE_FUNCTIONALS, 1_000, 50_000, 20_240_601).unwrap();
    let table = CriticalValueTable::embedded();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &samples {
        let q = two_sided_quantile(&s.statistic, 0.05).unwrap();
        let want = table.two_sided(s.functional, 0.05).unwrap();
        let dev = q / want - 1.0;
        pass &= dev.abs() <= 0.03;
        parts.push(format!("m={} {q:.3} vs {want:.3} ({:+.2}%)", s.functional, 100.0 * dev));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn linreg() -> Outcome {
    let report = coverage(
        r#"
problem.kind = "linreg_ar"
problem.d = 10
problem.rho_eps = 0.9
schedule.eta_scale = 0.31622776601683794
schedule.alpha = 0.505
run.steps = 10000
run.warmup = 500
run.reps = 200
run.seed = 1
inference.m = [2]
"#,
    );
    let (cov, len) = m2(&report, 10_000);
    let target = 0.2642;
    let cov_ok = (0.88..=0.97).contains(&cov);
    let len_ok = (len / target - 1.0).abs() <= 0.30;
    Outcome {
        pass: cov_ok && len_ok,
        detail: format!(
            "coverage {:.1}% in [88, 97]: {cov_ok}; mean length {len:.4} within 30% of {target}: {len_ok}",
            100.0 * cov
        ),
    }
}

fn bootstrap() -> Outcome {
    let report = coverage(
        r#"
problem.kind = "linreg_ar"
problem.d = 10
problem.rho_eps = 0.9
schedule.eta_scale = 0.75
schedule.alpha = 0.75
run.steps = 5000
run.warmup = 400
run.reps = 200
run.seed = 1
inference.method = "bootstrap"
inference.bootstrap_chains = 100
"#,
    );
    let row = report.find("bootstrap", None, 5_000).expect("bootstrap row");
    let target = 0.1247;
    let cov_ok = (0.90..=0.98).contains(&row.coverage);
    let len_ok = (row.mean_length / target - 1.0).abs() <= 0.30;
    Outcome {
        pass: cov_ok && len_ok && row.failed == 0,
        detail: format!(
            "coverage {:.1}% in [90, 98]: {cov_ok}; mean length {:.4} within 30% of {target}: {len_ok}; failed {}",
            100.0 * row.coverage,
            row.mean_length,
            row.failed
        ),
    }
}

fn qlearning() -> Outcome {
    let report = coverage(
        r#"
problem.kind = "qlearning"
problem.states = 5
problem.actions = 5
problem.gamma = 0.6
schedule.eta_scale = 1.0
schedule.alpha = 0.51
schedule.offset = 1.0
run.steps = 54000
run.warmup = 4000
run.reps = 100
run.seed = 1
inference.m = [2]
"#,
    );
    let (cov, len) = m2(&report, 54_000);
    Outcome {
        pass: cov >= 0.85,
        detail: format!("coverage {:.1}% >= 85 (mean length {len:.4})", 100.0 * cov),
    }
}

fn logistic() -> Outcome {
    let report = coverage(
        r#"
problem.kind = "logistic_ar"
problem.d = 5
schedule.eta_scale = 1.0
schedule.alpha = 0.501
run.steps = 43000
run.warmup = 3000
run.reps = 100
run.seed = 1
run.checkpoints = [7000, 43000]
inference.m = [2]
"#,
    );
    let (short, _) = m2(&report, 7_000);
    let (long, _) = m2(&report, 43_000);
    Outcome {
        pass: long > short && long >= 0.85,
        detail: format!(
            "coverage {:.1}% at T=4000 < {:.1}% at T=40000, and the latter >= 85",
            100.0 * short,
            100.0 * long
        ),
    }
}

/// A random averaged-iterate path `ȳ_n = c + s · (mean of n normals)`.
fn random_path(rng: &mut impl Rng) -> Vec<f64> {
    let n = rng.random_range(1..=2000);
    let c: f64 = rng.random_range(-10.0..10.0);
    let s: f64 = 10f64.powf(rng.random_range(-3.0..2.0));
    let mut sum = 0.0;
    (1..=n)
        .map(|k| {
            sum += rng.sample::<f64, _>(StandardNormal);
            c + s * sum / k as f64
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn properties() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut rng = derive_rng(77, &[]);
    let even = [2u32, 4, 6];
    let mut worst = 0.0f64;
    let mut worst_homog = 0.0f64;
    let mut worst_pivot = 0.0f64;
    for _ in 0..1000 {
        let ys = random_path(&mut rng);
        let traj = ProjectedTrajectory::from_values(ys.clone());
        let last = *ys.last().unwrap();
        let mut sig = Vec::new();
        for &m in &even {
            let mut acc = RandomScalingAccumulator::new(m).unwrap();
            ys.iter().for_each(|&y| acc.update(y));
            let online = acc.sigma(last).unwrap();
            let offline = sigma_offline(&traj, Functional::Power(m), IntegralRule::Rectangle).unwrap();
            if offline > 0.0 {
                worst = worst.max(rel(online, offline));
            }
            sig.push(offline);
        }
        sig.push(sigma_offline(&traj, Functional::Sup, IntegralRule::Rectangle).unwrap());
        if sig.windows(2).any(|w| w[0] > w[1] * (1.0 + 1e-12)) {
            failures.push(format!("monotonicity {sig:?}"));
        }
        let a: f64 = rng.random_range(-5.0..5.0);
        let scaled = ProjectedTrajectory::from_values(ys.iter().map(|y| a * y).collect());
        for f in [Functional::Power(2), Functional::Power(3), Functional::Sup] {
            let s = sigma_offline(&traj, f, IntegralRule::Rectangle).unwrap();
            let sa = sigma_offline(&scaled, f, IntegralRule::Rectangle).unwrap();
            if s > 0.0 {
                worst_homog = worst_homog.max(rel(sa, a.abs() * s));
            }
        }
        if ys.len() > 1 {
            let t = ys.len();
            let target = last + rng.random_range(-1.0..1.0);
            let s = sigma_offline(&traj, Functional::Power(2), IntegralRule::Rectangle).unwrap();
            if s > 0.0 {
                let f = f_statistic(last, target, s, t).unwrap();
                let b = a.abs() + 0.1;
                let sigma_of = |k: f64| {
                    let path = ProjectedTrajectory::from_values(ys.iter().map(|y| k * y).collect());
                    sigma_offline(&path, Functional::Power(2), IntegralRule::Rectangle).unwrap()
                };
                let fs = f_statistic(b * last, b * target, sigma_of(b), t).unwrap();
                let fneg = f_statistic(-last, -target, sigma_of(-1.0), t).unwrap();
                worst_pivot = worst_pivot.max(rel(fs, f)).max(rel(-fneg, f));
            }
        }
    }
    // Centering ȳ_n − ȳ_T cancels digits when the path sits far from zero,
    // so rescaling is exact only to that precision.
    for (what, value) in [
        ("online vs offline", worst),
        ("homogeneity", worst_homog),
        ("pivot invariance", worst_pivot),
    ] {
        if value > 1e-9 {
            failures.push(format!("{what} rel {value:.2e}"));
        }
    }

    // trapezoid rule vs dense midpoint quadrature of the continuized path
    let ys: Vec<f64> = random_path(&mut rng).into_iter().take(50).collect();
    let traj = ProjectedTrajectory::from_values(ys.clone());
    let phi = traj.centered_process().unwrap();
    let t = phi.len();
    let k = 200_000usize;
    let mut quad = 0.0;
    for j in 0..k {
        let r = (j as f64 + 0.5) / k as f64 * t as f64;
        let i = r.floor() as usize;
        let (u, v) = (if i == 0 { 0.0 } else { phi[i - 1] }, phi[i.min(t - 1)]);
        let x = u + (r - i as f64) * (v - u);
        quad += x * x;
    }
    let quad = (quad / k as f64).sqrt();
    let trap = trapezoid_m2(&traj).unwrap();
    if rel(trap, quad) > 1e-6 {
        failures.push(format!("trapezoid {trap} vs quadrature {quad}"));
    }

    let mut bellman = 0.0f64;
    for seed in 0..50 {
        let mdp = Mdp::random(5, 5, 0.6, &mut derive_rng(seed, &[])).unwrap();
        let q = mdp.value_iteration(VALUE_ITERATION_TOL).unwrap();
        bellman = bellman.max(mdp.bellman(&q).sup_distance(&q));
    }
    if bellman >= 1e-10 {
        failures.push(format!("Bellman residual {bellman:.2e}"));
    }

    let gap = (middle_branch(8.0).rate - high_moment_branch().rate).abs();
    if gap > 1e-12 {
        failures.push(format!("alpha-star branch gap {gap:.2e}"));
    }

    let cfg = ExperimentConfig::parse(
        r#"
problem.kind = "linreg_ar"
problem.d = 4
schedule.eta_scale = 0.5
schedule.alpha = 0.505
run.steps = 3000
run.warmup = 150
run.reps = 40
run.seed = 9
inference.m = [1, 2, 4, "inf"]
"#,
    )
    .unwrap();
    let outputs: Vec<String> = [1, 2, 4, 7]
        .into_iter()
        .map(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| report_to_string(&run_coverage(&cfg).unwrap()))
        })
        .collect();
    if outputs.windows(2).any(|w| w[0] != w[1]) {
        failures.push("report differs across thread counts".into());
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "1000 paths, worst rel: online/offline {worst:.1e}, homogeneity {worst_homog:.1e}, pivot {worst_pivot:.1e}; trapezoid rel {:.1e}, Bellman {bellman:.1e}, α* gap {gap:.1e}, threads 1/2/4/7 identical",
                rel(trap, quad)
            )
        } else {
            failures.join("; ")
        },
    }
}

fn main() -> ExitCode {
    let results = [
        check("critical values (1000 steps x 50000 paths, 5% two-sided, ±3%)", critical_values),
        check("linear regression coverage (T=10000, 200 reps, m=2)", linreg),
        check("bootstrap baseline (B=100, T=5000, 200 reps)", bootstrap),
        check("Q-learning coverage (5x5, T=50000 post warm-up, 100 reps, m=2)", qlearning),
        check("logistic coverage trend (T=4000 vs 40000, 100 reps, m=2)", logistic),
        check("property suite", properties),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
