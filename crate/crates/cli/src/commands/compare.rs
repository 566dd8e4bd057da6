use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adagan::config::RunConfig;
use adagan::sched::Strategy;
use adagan::train::{records_from_csv, train};

use super::train::CSV_FILE;
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, read_text, write_atomic};
use crate::manifest::{RunManifest, TOOL_VERSION};
use crate::summary::{self, SummaryRow};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPARE_MANIFEST: &str = "manifest.txt";

pub struct CompareArgs {
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub iters: Option<usize>,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

/// Adaptive `lambda = 1` against the fixed `5:1` schedule, all else default.
pub fn default_pair() -> Vec<RunConfig> {
    let mut adaptive = RunConfig {
        name: "adaptive".into(),
        ..RunConfig::default()
    };
    adaptive.train.strategy = Strategy::adaptive(1.0).expect("valid lambda");
    let mut fixed = RunConfig {
        name: "fixed".into(),
        ..RunConfig::default()
    };
    fixed.train.strategy = Strategy::fixed(5, 1).expect("valid schedule");
    vec![adaptive, fixed]
}

pub fn run_dir(out: &Path, name: &str, seed: u64) -> PathBuf {
    out.join(name).join(format!("seed-{seed}"))
}

/// Rebuilds the summary from the per-run CSVs under `out`.
pub fn summarize_dir(
    out: &Path,
    names: &[String],
    seeds: &[u64],
    thresholds: &[f64],
) -> CliResult<String> {
    let mut rows = Vec::with_capacity(names.len() * seeds.len());
    for name in names {
        for &seed in seeds {
            let path = run_dir(out, name, seed).join(CSV_FILE);
            let text = read_text(&path)?;
            let records = records_from_csv(&text).map_err(|e| CliError::reading(&path, e))?;
            rows.push(SummaryRow::from_records(name, seed, &records, thresholds));
        }
    }
    Ok(summary::to_csv(&rows, thresholds))
}

fn validate(configs: &[RunConfig], args: &CompareArgs) -> CliResult<()> {
    if configs.is_empty() {
        return Err(CliError::Config("compare needs at least one config".into()));
    }
    if args.seeds.is_empty() {
        return Err(CliError::Config("compare needs at least one seed".into()));
    }
    if args.seeds.iter().collect::<BTreeSet<_>>().len() != args.seeds.len() {
        return Err(CliError::Config("duplicate seed in --seeds".into()));
    }
    if args.thresholds.is_empty()
        || args
            .thresholds
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
    {
        return Err(CliError::Config(
            "thresholds must be finite and >= 0".into(),
        ));
    }
    if args.iters == Some(0) || args.jobs == Some(0) {
        return Err(CliError::Config("--iters and --jobs must be >= 1".into()));
    }
    let mut names = BTreeSet::new();
    for c in configs {
        let ok = !c.name.is_empty()
            && c.name
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch))
            && !c.name.starts_with('.');
        if !ok {
            return Err(CliError::Config(format!(
                "run name `{}` must be non-empty and use only [A-Za-z0-9._-]",
                c.name
            )));
        }
        if !names.insert(c.name.as_str()) {
            return Err(CliError::Config(format!("duplicate run name `{}`", c.name)));
        }
        c.validate()?;
    }
    Ok(())
}

pub fn run(mut configs: Vec<RunConfig>, out: &Path, args: &CompareArgs) -> CliResult<String> {
    if let Some(n) = args.iters {
        for c in &mut configs {
            c.train.total_iters = n;
        }
    }
    validate(&configs, args)?;
    ensure_dir(out)?;

    let jobs: Vec<(RunConfig, PathBuf)> = configs
        .iter()
        .flat_map(|c| {
            args.seeds.iter().map(move |&seed| {
                let mut run = c.clone();
                run.train.seed = seed;
                let dir = run_dir(out, &c.name, seed);
                (run, dir)
            })
        })
        .collect();
    let workers = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
        .min(jobs.len());
    let next = AtomicUsize::new(0);
    let first_error: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((run, dir)) = jobs.get(i) else { break };
                if let Err(e) = one_run(run, dir) {
                    first_error
                        .lock()
                        .expect("no poisoned lock")
                        .get_or_insert(e);
                    break;
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("no poisoned lock") {
        return Err(e);
    }

    let names: Vec<String> = configs.iter().map(|c| c.name.clone()).collect();
    let csv = summarize_dir(out, &names, &args.seeds, &args.thresholds)?;
    write_atomic(&out.join(SUMMARY_FILE), &csv)?;
    write_atomic(&out.join(COMPARE_MANIFEST), &compare_manifest(&names, args))?;
    Ok(csv)
}

fn one_run(run: &RunConfig, dir: &Path) -> CliResult<()> {
    ensure_dir(dir)?;
    let manifest = RunManifest::new("train", dir, run.clone());
    match train(run.train.clone()) {
        Ok(history) => {
            write_atomic(&dir.join(CSV_FILE), &history.to_csv())?;
            manifest.note("status", "complete").write()
        }
        Err(failure) => {
            let status = format!("failed: {}", failure.error);
            write_atomic(&dir.join(CSV_FILE), &failure.partial.to_csv())?;
            manifest.note("status", &status).write()?;
            Err(CliError::Runtime(format!(
                "{} seed {}: {status}",
                run.name, run.train.seed
            )))
        }
    }
}

fn compare_manifest(names: &[String], args: &CompareArgs) -> String {
    let join = |v: Vec<String>| v.join(",");
    let mut out = String::new();
    let _ = writeln!(out, "tool = {TOOL_VERSION}");
    let _ = writeln!(out, "command = compare");
    let _ = writeln!(
        out,
        "seeds = {}",
        join(args.seeds.iter().map(u64::to_string).collect())
    );
    let _ = writeln!(
        out,
        "thresholds = {}",
        join(args.thresholds.iter().map(f64::to_string).collect())
    );
    for name in names {
        let _ = writeln!(out, "run = {name} ({name}/seed-*/manifest.cfg)");
    }
    out
}
