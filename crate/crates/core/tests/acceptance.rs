//! Full-size acceptance run. Prints one PASS/FAIL line per criterion and a
//! tally. Exits with status 0 unless `SOFRI_ACCEPTANCE_STRICT=1`, so a
//! failing criterion does not stop the rest of `cargo test`. Numeric
//! arguments restrict the run to those criteria, e.g. `-- 5 9`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use sofri_core::bayes::{stream_id, stream_rng, StreamRole};
use sofri_core::delta::{default_bandwidth, estimate_delta};
use sofri_core::simulate::{run_replicate, simulate_dataset, EstimatorId, Scenario};
use sofri_core::{run_chains, run_study, McmcConfig, MsieReport};

const BOTH: [EstimatorId; 2] = [EstimatorId::BayesIv, EstimatorId::NaiveW];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn msie(report: &MsieReport, id: EstimatorId) -> (f64, f64) {
    let e = report.get(id).expect("estimator in report");
    (e.msie, e.msie_se)
}

fn study(sc: &Scenario, ests: &[EstimatorId]) -> MsieReport {
    run_study(sc, ests).unwrap_or_else(|e| panic!("study failed: {e}"))
}

/// Base scenario, both estimators; shared by the first two criteria.
fn base_study() -> MsieReport {
    let t = Instant::now();
    let r = study(&Scenario::default(), &BOTH);
    println!("  base study: 100 replicates in {:.0}s", t.elapsed().as_secs_f64());
    for e in &r.estimators {
        println!(
            "  {:<9} bias2 {:.5} var {:.5} msie {:.5} (se {:.5})",
            e.estimator.to_string(),
            e.abias2,
            e.avar,
            e.msie,
            e.msie_se
        );
    }
    r
}

fn c1(base: &MsieReport) -> Outcome {
    let (b, se) = msie(base, EstimatorId::BayesIv);
    outcome(b <= 0.005, format!("bayes_iv MSIE {b:.5} (se {se:.5}), limit 0.005"))
}

fn c2(base: &MsieReport) -> Outcome {
    let (b, _) = msie(base, EstimatorId::BayesIv);
    let (n, _) = msie(base, EstimatorId::NaiveW);
    let ratio = n / b;
    outcome(
        ratio >= 20.0,
        format!("naive_w {n:.5} / bayes_iv {b:.5} = {ratio:.1}x, need >= 20x"),
    )
}

fn c3() -> Outcome {
    let levels = [0.5, 1.0, 16.0];
    let mut parts = Vec::new();
    let mut pass = true;
    let base = Scenario {
        sigma_x: 1.0,
        sigma_u: 1.0,
        sigma_w: 1.0,
        n_reps: 50,
        ..Scenario::default()
    };
    let at_one = study(&base, &[EstimatorId::BayesIv]);
    for (name, increasing) in [("sigma_u", true), ("sigma_w", true), ("sigma_x", false)] {
        let values: Vec<(f64, f64)> = levels
            .iter()
            .map(|&s| {
                if s == 1.0 {
                    return msie(&at_one, EstimatorId::BayesIv);
                }
                let mut sc = base.clone();
                match name {
                    "sigma_u" => sc.sigma_u = s,
                    "sigma_w" => sc.sigma_w = s,
                    _ => sc.sigma_x = s,
                }
                msie(&study(&sc, &[EstimatorId::BayesIv]), EstimatorId::BayesIv)
            })
            .collect();
        let ok = values
            .windows(2)
            .all(|w| if increasing { w[1].0 >= w[0].0 } else { w[1].0 <= w[0].0 });
        pass &= ok;
        let shown: Vec<String> = values.iter().map(|(m, se)| format!("{m:.5}±{se:.5}")).collect();
        println!("  {name} over {levels:?}: {}", shown.join(", "));
        parts.push(format!(
            "{name} {} {}",
            if increasing { "non-decreasing" } else { "non-increasing" },
            if ok { "yes" } else { "NO" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c4() -> Outcome {
    let values: Vec<(f64, f64, f64)> = [0.005, 0.05, 5.0, 20.0]
        .iter()
        .map(|&d| {
            let sc = Scenario {
                delta: d,
                n_reps: 50,
                ..Scenario::default()
            };
            let (m, se) = msie(&study(&sc, &[EstimatorId::BayesIv]), EstimatorId::BayesIv);
            println!("  delta {d}: bayes_iv MSIE {m:.5} (se {se:.5})");
            (d, m, se)
        })
        .collect();
    let hi = values.iter().map(|v| v.1).fold(f64::MIN, f64::max);
    let lo = values.iter().map(|v| v.1).fold(f64::MAX, f64::min);
    outcome(
        hi / lo < 2.0,
        format!("max/min MSIE over delta = {:.2}, need < 2", hi / lo),
    )
}

fn c5() -> Outcome {
    let sc = Scenario {
        n: 2000,
        delta: 2.0,
        ..Scenario::default()
    };
    let mut errs: Vec<f64> = (0..20)
        .map(|rep| {
            let mut r = stream_rng(sc.seed, stream_id(rep, StreamRole::Data));
            let data = simulate_dataset(&sc, &mut r).unwrap();
            let est = estimate_delta(&data.w, &data.m, default_bandwidth(data.w.grid())).unwrap();
            (&est.smoothed - &data.delta_true).abs().max()
        })
        .collect();
    let first = errs[0];
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[9] + errs[10]);
    let below = errs.iter().filter(|&&e| e < 0.15).count();
    println!(
        "  max |delta_hat - delta| over 20 data sets: min {:.3} median {median:.3} max {:.3}; first data set {first:.3}; {below}/20 below 0.15",
        errs[0], errs[19]
    );
    outcome(median < 0.15, format!("median max error {median:.3}, limit 0.15"))
}

fn c6() -> Outcome {
    let reports = step_oracles(100_000, 2024);
    for r in &reports {
        println!("  {}", r.describe().replace('\n', "\n  "));
    }
    let failing: Vec<&str> = reports.iter().filter(|r| !r.passes(3.0)).map(|r| r.name).collect();
    let worst = reports.iter().map(OracleReport::worst_z).fold(0.0, f64::max);
    outcome(
        failing.is_empty(),
        format!(
            "{} step oracles, worst |z| {worst:.2}, failing: {failing:?}",
            reports.len()
        ),
    )
}

fn c7() -> Outcome {
    let reports = [geweke_scalar(10_000, 2025), geweke_mv(10_000, 2026)];
    for r in &reports {
        println!("  {}", r.describe().replace('\n', "\n  "));
    }
    let worst = reports.iter().map(OracleReport::worst_z).fold(0.0, f64::max);
    outcome(
        reports.iter().all(|r| r.passes(3.0)),
        format!("worst |z| {worst:.2}, limit 3"),
    )
}

fn c8() -> Outcome {
    let sc = Scenario {
        sigma_u: 1e-6,
        sigma_w: 1e-6,
        n_reps: 20,
        ..Scenario::default()
    };
    let r = study(&sc, &BOTH);
    let (b, _) = msie(&r, EstimatorId::BayesIv);
    let (n, _) = msie(&r, EstimatorId::NaiveW);
    let rel = (b - n).abs() / n;
    let gap = latent_gap_without_error(500, 2000, 8);
    println!("  bayes_iv {b:.6} naive_w {n:.6}; max |X - W| over snapshots {gap:.2e}");
    let mut known = sc.clone();
    known.fit.known_delta = true;
    let k = study(&known, &BOTH);
    let (kb, kn) = (msie(&k, EstimatorId::BayesIv).0, msie(&k, EstimatorId::NaiveW).0);
    println!(
        "  for reference, with the generating delta: bayes_iv {kb:.6} naive_w {kn:.6}, relative difference {:.3}",
        (kb - kn).abs() / kn
    );
    outcome(
        rel <= 0.2 && gap < 1e-3,
        format!("relative MSIE difference {rel:.3} (limit 0.2), latent gap {gap:.2e} (limit 1e-3)"),
    )
}

fn c9() -> Outcome {
    let sc = two_group_scenario(200, 2000, 77);
    let runs: Vec<ClusterRun> = (0..20).map(|rep| cluster_run(&sc, rep)).collect();
    for (i, r) in runs.iter().enumerate() {
        let c = r.contrast.map_or("none".to_string(), |c| {
            format!("{:.3} ({:.3}, {:.3})", c.mean, c.lower, c.upper)
        });
        println!(
            "  run {i:>2}: {} clusters, agreement {:.3}, contrast {c}, truth {:.3}",
            r.n_clusters, r.agreement, r.truth
        );
    }
    let agreement = runs.iter().map(|r| r.agreement).sum::<f64>() / runs.len() as f64;
    let covered = runs.iter().filter(|r| r.covered()).count();
    outcome(
        agreement >= 0.95 && covered >= 16,
        format!("mean agreement {agreement:.3} (need 0.95), contrast covers truth in {covered}/20 (need 16)"),
    )
}

fn c10() -> Outcome {
    let sc = Scenario {
        n: 200,
        ..Scenario::default()
    };
    let mut r = stream_rng(sc.seed, stream_id(0, StreamRole::Data));
    let data = simulate_dataset(&sc, &mut r).unwrap();
    let prepared = sofri_core::simulate::prepare_data(&data, &sc.fit).unwrap();
    let cfg = McmcConfig {
        n_iter: 600,
        burn_in: 100,
        n_chains: 3,
        ..McmcConfig::default()
    };
    let run = |threads| in_pool(threads, || draws_bytes(&run_chains(&prepared.inputs, &cfg).unwrap()));
    let first = run(4);
    let rerun = run(4);
    let serial = run(1);
    let draws_same = first == rerun && first == serial;

    let st = Scenario {
        n_reps: 6,
        ..Scenario::default()
    };
    let report = study(&st, &BOTH);
    let truth = st.beta_curve();
    let mut order_same = true;
    for rep in (0..st.n_reps).rev() {
        let curves = run_replicate(&st, &BOTH, rep).unwrap();
        for (k, c) in curves.iter().enumerate() {
            let ise = (c - &truth).norm_squared() / truth.len() as f64;
            order_same &= ise.to_bits() == report.estimators[k].per_rep_ise[rep].to_bits();
        }
    }
    outcome(
        draws_same && order_same,
        format!(
            "draws CSV identical across reruns and 1/4 threads: {draws_same} ({} bytes); reversed replicate order identical: {order_same}",
            first.len()
        ),
    )
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: usize| only.is_empty() || only.contains(&c);
    let strict = std::env::var("SOFRI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let started = Instant::now();

    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        println!("criterion {id}: {name}");
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} {id:>2} {name}: {} [{secs:.0}s]\n",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    // The first two criteria share one study; its time is charged to whichever runs first.
    let mut base: Option<MsieReport> = None;
    record(1, "base-scenario MSIE band", &mut || {
        c1(base.get_or_insert_with(base_study))
    });
    record(2, "naive vs corrected ordering", &mut || {
        c2(base.get_or_insert_with(base_study))
    });
    record(3, "MSIE monotone in error scales", &mut c3);
    record(4, "MSIE insensitive to delta", &mut c4);
    record(5, "delta estimate consistency", &mut c5);
    record(6, "conjugate step oracles", &mut c6);
    record(7, "Geweke joint-distribution tests", &mut c7);
    record(8, "no-error recovery", &mut c8);
    record(9, "two-group cluster recovery", &mut c9);
    record(10, "determinism", &mut c10);

    println!("summary ({:.0}s total):", started.elapsed().as_secs_f64());
    for (id, name, o, secs) in &results {
        println!(
            "{} {id:>2} {name}: {} [{secs:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
