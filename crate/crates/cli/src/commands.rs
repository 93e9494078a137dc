use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sofri_core::bayes::{stream_id, stream_rng, StreamRole};
use sofri_core::delta::{default_bandwidth, estimate_delta};
use sofri_core::fda::Grid;
use sofri_core::io::{read_draws, read_json, write_draws, write_functional_csv, write_json, CsvSink};
use sofri_core::simulate::{run_study, simulate_dataset, MsieReport, Scenario};
use sofri_core::{build_bspline_basis, prepare, run_chains};

use crate::args::{DeltaArgs, FitArgs, SimulateArgs, SummarizeArgs};
use crate::config::{load_run_config, load_scenario, require};
use crate::ingest::{ingest, ingest_curves};
use crate::output::{
    write_delta_csv, write_summaries, BasisInfo, DeltaInfo, FitManifest, Timing, DELTA_FILE, MANIFEST_FILE,
    SUMMARIZE_MANIFEST_FILE,
};
use crate::{CliError, BUILD_ID};

fn out_dir(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.ok_or_else(|| CliError::InvalidConfig("missing output directory (--out or `out`)".into()))?;
    fs::create_dir_all(&dir).map_err(|source| sofri_core::io::IoError::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut cfg = load_run_config(args.common.config.as_deref())?;
    args.apply(&mut cfg);
    cfg.check_level()?;
    cfg.mcmc.validate()?;
    let (w, m, s) = (
        require(&cfg.data.w, "W")?,
        require(&cfg.data.m, "M")?,
        require(&cfg.data.scalars, "scalars")?,
    );
    let out = out_dir(cfg.out.clone())?;

    let data = ingest(&w, &m, &s, cfg.data.transform)?;
    let prepared = prepare(&data.w, &data.m, data.y.clone(), data.z.clone(), &cfg.pipeline())?;
    let prepare_secs = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let draws = run_chains(&prepared.inputs, &cfg.mcmc)?;
    let sampling_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    write_draws(&out, &draws)?;
    write_delta_csv(&out.join(DELTA_FILE), &prepared.delta)?;
    write_summaries(&out, &draws, &prepared.basis, &data.z_names, &data.ids, &cfg.summary)?;
    let summary_secs = t.elapsed().as_secs_f64();

    let manifest = FitManifest {
        build: BUILD_ID.into(),
        command: "fit".into(),
        seed: cfg.mcmc.seed,
        delta: DeltaInfo {
            bandwidth: prepared.delta.bandwidth,
            transform: cfg.data.transform,
        },
        basis: BasisInfo {
            grid: prepared.basis.grid().points().to_vec(),
            n_basis: prepared.basis.size(),
            degree: prepared.basis.degree(),
        },
        ids: data.ids,
        covariates: data.z_names,
        n_draws: draws.draw_count(),
        timing: Timing {
            prepare_secs,
            sampling_secs,
            summary_secs,
            total_secs: start.elapsed().as_secs_f64(),
        },
        config: cfg,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(())
}

#[derive(Serialize)]
struct SummarizeManifest<'a> {
    build: &'a str,
    command: &'a str,
    draws: &'a Path,
    level: f64,
    contrast: Option<[usize; 2]>,
}

pub fn summarize(args: SummarizeArgs) -> Result<(), CliError> {
    let mut cfg = load_run_config(args.common.config.as_deref())?;
    args.common.apply(&mut cfg);
    let fitted: FitManifest = read_json(&args.draws.join(MANIFEST_FILE))?;
    let mut summary = fitted.config.summary.clone();
    if args.common.config.is_some() {
        summary = cfg.summary.clone();
    }
    if let Some(l) = args.level {
        summary.level = l;
    }
    if let Some(pair) = &args.contrast {
        let [a, b] = pair[..] else {
            return Err(CliError::InvalidConfig(format!(
                "--contrast needs two cluster labels, got {pair:?}"
            )));
        };
        summary.contrast = Some([a, b]);
    }
    cfg.summary = summary.clone();
    cfg.check_level()?;
    let out = out_dir(cfg.out.clone().or_else(|| Some(args.draws.clone())))?;

    let draws = read_draws(&args.draws)?;
    let grid = Grid::new(fitted.basis.grid.clone())?;
    let basis = build_bspline_basis(&grid, fitted.basis.n_basis, fitted.basis.degree)?;
    write_summaries(&out, &draws, &basis, &fitted.covariates, &fitted.ids, &summary)?;
    write_json(
        &out.join(SUMMARIZE_MANIFEST_FILE),
        &SummarizeManifest {
            build: BUILD_ID,
            command: "summarize",
            draws: &args.draws,
            level: summary.level,
            contrast: summary.contrast,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct DeltaManifest<'a> {
    build: &'a str,
    command: &'a str,
    w: &'a Path,
    m: &'a Path,
    delta: DeltaInfo,
}

pub fn delta(args: DeltaArgs) -> Result<(), CliError> {
    let mut cfg = load_run_config(args.common.config.as_deref())?;
    args.common.apply(&mut cfg);
    args.data.apply(&mut cfg);
    let (w_path, m_path) = (require(&cfg.data.w, "W")?, require(&cfg.data.m, "M")?);
    let out = out_dir(cfg.out.clone())?;
    let (w, m) = ingest_curves(&w_path, &m_path, cfg.data.transform)?;
    let bandwidth = cfg.delta.bandwidth.unwrap_or_else(|| default_bandwidth(w.grid()));
    let est = estimate_delta(&w, &m, bandwidth)?;
    write_delta_csv(&out.join(DELTA_FILE), &est)?;
    write_json(
        &out.join(MANIFEST_FILE),
        &DeltaManifest {
            build: BUILD_ID,
            command: "delta",
            w: &w_path,
            m: &m_path,
            delta: DeltaInfo {
                bandwidth,
                transform: cfg.data.transform,
            },
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct StudyOutput<'a> {
    build: &'a str,
    command: &'a str,
    seconds: f64,
    #[serde(flatten)]
    report: &'a MsieReport,
}

#[derive(Serialize)]
struct DataManifest<'a> {
    build: &'a str,
    command: &'a str,
    rep: usize,
    scenario: &'a Scenario,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut scenario = load_scenario(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        scenario.seed = seed;
    }
    if let Some(r) = args.reps {
        scenario.n_reps = r;
    }
    if let Some(n) = args.n_iter {
        scenario.fit.mcmc.n_iter = n;
    }
    if let Some(b) = args.burn_in {
        scenario.fit.mcmc.burn_in = b;
    }
    scenario.validate()?;
    let out = out_dir(args.common.out.clone())?;

    if args.write_data {
        let mut rng = stream_rng(scenario.seed, stream_id(args.rep as u64, StreamRole::Data));
        let data = simulate_dataset(&scenario, &mut rng)?;
        write_functional_csv(&out.join("w.csv"), &data.w)?;
        write_functional_csv(&out.join("m.csv"), &data.m)?;
        write_functional_csv(&out.join("x.csv"), &data.x)?;
        let mut header = vec!["id".to_string(), "y".into()];
        header.extend((1..=data.z.ncols()).map(|j| format!("z_{j}")));
        let mut sink = CsvSink::create(&out.join("scalars.csv"), &header)?;
        for (i, id) in data.w.curve_ids().iter().enumerate() {
            let z: Vec<String> = data.z.row(i).iter().map(|v| v.to_string()).collect();
            sink.record([id.clone(), data.y[i].to_string()].into_iter().chain(z))?;
        }
        sink.finish()?;
        let mut sink = CsvSink::create(&out.join("truth.csv"), &["s", "beta", "delta"])?;
        for (j, s) in data.w.grid().points().iter().enumerate() {
            sink.record([
                s.to_string(),
                data.beta_true[j].to_string(),
                data.delta_true[j].to_string(),
            ])?;
        }
        sink.finish()?;
        let mut sink = CsvSink::create(&out.join("groups.csv"), &["id", "group"])?;
        for (id, g) in data.w.curve_ids().iter().zip(&data.groups) {
            sink.record([id.clone(), g.to_string()])?;
        }
        sink.finish()?;
        write_json(
            &out.join(MANIFEST_FILE),
            &DataManifest {
                build: BUILD_ID,
                command: "simulate --write-data",
                rep: args.rep,
                scenario: &scenario,
            },
        )?;
        return Ok(());
    }

    let report = run_study(&scenario, &args.estimators)?;
    write_json(
        &out.join("report.json"),
        &StudyOutput {
            build: BUILD_ID,
            command: "simulate",
            seconds: start.elapsed().as_secs_f64(),
            report: &report,
        },
    )?;
    Ok(())
}
