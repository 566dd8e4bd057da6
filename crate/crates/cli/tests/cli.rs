use std::fs;
use std::path::Path;
use std::process::Command;

use adagan::config::RunConfig;
use adagan::dirac::simulate;
use adagan_cli::commands::compare::summarize_dir;

const SMALL: &str = "\
batch_m = 16
gen.hidden = 8
disc.hidden = 8
latent_dim = 2
total_iters = 200
eval_interval = 20
n_eval = 64
n_proj = 10
seed = 5
";

fn cli(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("adagan").chain(args.iter().copied());
    let code = adagan_cli::main_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn dirac_csv_matches_library_and_manifest_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let (code, stdout, _) = cli(&["dirac", "--out", s(&out), "--svg"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("distance to (1, 0)"));
    let csv = fs::read_to_string(out.join("dirac.csv")).unwrap();
    assert!(out.join("dirac.svg").exists());
    let r = rows(&csv);
    assert_eq!(r.len(), 5001);

    let manifest = fs::read_to_string(out.join("manifest.cfg")).unwrap();
    let cfg = RunConfig::parse(&manifest).unwrap();
    let traj = simulate(&cfg.dirac, cfg.train.strategy, cfg.dirac_steps).unwrap();
    assert_eq!(traj.to_csv(), csv);

    let again = tmp.path().join("d2");
    let m = out.join("manifest.cfg");
    assert_eq!(cli(&["dirac", "--config", s(&m), "--out", s(&again)]).0, 0);
    assert_eq!(fs::read_to_string(again.join("dirac.csv")).unwrap(), csv);
}

#[test]
fn dirac_fixed_schedule_stays_away_from_equilibrium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.cfg", "strategy = fixed\nn_d = 5\nn_g = 1\n");
    let out = tmp.path().join("f");
    assert_eq!(cli(&["dirac", "--config", &cfg, "--out", s(&out)]).0, 0);
    let r = rows(&fs::read_to_string(out.join("dirac.csv")).unwrap());
    let tail = &r[r.len() - r.len() / 5..];
    for row in tail {
        let theta: f64 = row[2].parse().unwrap();
        let psi: f64 = row[3].parse().unwrap();
        assert!((theta - 1.0).hypot(psi) > 0.1, "{row:?}");
    }
    assert_eq!(r[0][1], "init");
    assert_eq!(r[1][1], "D");
    assert_eq!(r[6][1], "G");
}

#[test]
fn dirac_zero_steps_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("z");
    let (code, _, err) = cli(&["dirac", "--steps", "0", "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("steps"));
    assert!(!out.exists());
}

#[test]
fn train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cli(&["train", "--config", &cfg, "--out", s(&a)]).0, 0);
    assert_eq!(cli(&["train", "--config", &cfg, "--out", s(&b)]).0, 0);
    let ca = fs::read(a.join("train.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("train.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("final.ckpt")).unwrap(),
        fs::read(b.join("final.ckpt")).unwrap()
    );

    let c = tmp.path().join("c");
    assert_eq!(
        cli(&["train", "--config", &cfg, "--seed", "6", "--out", s(&c)]).0,
        0
    );
    assert_ne!(ca, fs::read(c.join("train.csv")).unwrap());
    let m = RunConfig::parse(&fs::read_to_string(c.join("manifest.cfg")).unwrap()).unwrap();
    assert_eq!(m.train.seed, 6);
}

#[test]
fn resumed_runs_match_uninterrupted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", SMALL);
    let full = tmp.path().join("full");
    assert_eq!(cli(&["train", "--config", &cfg, "--out", s(&full)]).0, 0);
    let expected = fs::read_to_string(full.join("train.csv")).unwrap();

    // stop early, then extend the budget from the final checkpoint
    let short = tmp.path().join("short");
    let (code, _, err) = cli(&[
        "train",
        "--config",
        &cfg,
        "--iters",
        "120",
        "--out",
        s(&short),
    ]);
    assert_eq!(code, 0, "{err}");
    let ckpt = short.join("final.ckpt");
    let (code, _, err) = cli(&[
        "train",
        "--resume",
        s(&ckpt),
        "--iters",
        "200",
        "--out",
        s(&short),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        fs::read_to_string(short.join("train.csv")).unwrap(),
        expected
    );

    // periodic checkpoint at 100 while the CSV already holds 120 rows
    let periodic = tmp.path().join("periodic");
    let (code, _, _) = cli(&[
        "train",
        "--config",
        &cfg,
        "--iters",
        "120",
        "--checkpoint-every",
        "50",
        "--out",
        s(&periodic),
    ]);
    assert_eq!(code, 0);
    let ckpt = periodic.join("checkpoint.ckpt");
    let (code, _, err) = cli(&[
        "train",
        "--resume",
        s(&ckpt),
        "--iters",
        "200",
        "--out",
        s(&periodic),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        fs::read_to_string(periodic.join("train.csv")).unwrap(),
        expected
    );

    // resuming into a fresh directory writes only the suffix
    let suffix = tmp.path().join("suffix");
    let (code, _, _) = cli(&[
        "train",
        "--resume",
        s(&ckpt),
        "--iters",
        "200",
        "--out",
        s(&suffix),
    ]);
    assert_eq!(code, 0);
    let got = fs::read_to_string(suffix.join("train.csv")).unwrap();
    let want_rows: Vec<&str> = expected.lines().skip(101).collect();
    let got_rows: Vec<&str> = got.lines().skip(1).collect();
    assert_eq!(got_rows, want_rows);
}

#[test]
fn resume_rejects_config_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = cli(&["train", "--resume", "x.ckpt", "--config", "y.cfg"]);
    assert_eq!(code, 1);
    let missing = tmp.path().join("none.ckpt");
    let out = tmp.path().join("o");
    let (code, _, _) = cli(&["train", "--resume", s(&missing), "--out", s(&out)]);
    assert_eq!(code, 3);
}

#[test]
fn invalid_config_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.cfg", "data = ring\ndata.sigma = -1\n");
    let out = tmp.path().join("bad");
    let (code, _, err) = cli(&["train", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("line 2"), "{err}");
    assert!(!out.join("train.csv").exists());

    let cfg = write(tmp.path(), "neg.cfg", "lambda = -1\n");
    let (code, _, err) = cli(&["train", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("lambda"), "{err}");

    let cfg = write(tmp.path(), "unk.cfg", "lamda = 2\n");
    assert_eq!(cli(&["train", "--config", &cfg, "--out", s(&out)]).0, 1);
    assert!(!out.exists());
}

#[test]
fn divergence_exits_with_runtime_code_and_keeps_partial_log() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}clip_c = 1e12\nlr_d = 1e3\nlr_g = 1e3\nstrategy = fixed\nn_d = 1\nn_g = 1\n"
    )
    .replace("total_iters = 200", "total_iters = 2000");
    let cfg = write(tmp.path(), "div.cfg", &text);
    let out = tmp.path().join("div");
    let (code, _, err) = cli(&["train", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code, 2, "{err}");
    let manifest = fs::read_to_string(out.join("manifest.cfg")).unwrap();
    assert!(manifest.contains("# status: failed at iteration"));
    assert!(fs::read_to_string(out.join("train.csv"))
        .unwrap()
        .starts_with("iter,"));
}

#[test]
fn train_svg_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", SMALL);
    let out = tmp.path().join("svg");
    assert_eq!(
        cli(&["train", "--config", &cfg, "--svg", "--out", s(&out)]).0,
        0
    );
    let svgs = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".svg")
        })
        .count();
    assert_eq!(svgs, 10);
    assert!(out.join("samples-000200.svg").exists());
}

#[test]
fn compare_summary_is_sorted_and_recomputable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(
        tmp.path(),
        "a.cfg",
        &format!("{SMALL}name = zeta-adaptive\nlambda = 1\n"),
    );
    let f = write(
        tmp.path(),
        "f.cfg",
        &format!("{SMALL}name = alpha-fixed\nstrategy = fixed\nn_d = 5\nn_g = 1\n"),
    );
    let out = tmp.path().join("cmp");
    let (code, stdout, err) = cli(&[
        "compare",
        "--config",
        &a,
        "--config",
        &f,
        "--seeds",
        "2,1",
        "--thresholds",
        "10,0",
        "--jobs",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(stdout.trim_end(), summary.trim_end());
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,seed,first_iter_at_10,first_iter_at_0,best_sliced_w,best_iter,u_g,u_d"
    );
    let r = rows(&summary);
    let keys: Vec<(&str, &str)> = r.iter().map(|x| (x[0].as_str(), x[1].as_str())).collect();
    assert_eq!(
        keys,
        [
            ("alpha-fixed", "1"),
            ("alpha-fixed", "2"),
            ("zeta-adaptive", "1"),
            ("zeta-adaptive", "2")
        ]
    );
    for row in &r {
        assert_eq!(row[2], "19", "threshold 10 is met at the first evaluation");
        assert_eq!(row[3], "*", "threshold 0 is never met");
        let (u_g, u_d): (u64, u64) = (row[6].parse().unwrap(), row[7].parse().unwrap());
        assert_eq!(u_g + u_d, 200);
    }
    assert_eq!(r[0][6], "33");

    let names = ["zeta-adaptive".to_string(), "alpha-fixed".to_string()];
    let again = summarize_dir(&out, &names, &[1, 2], &[10.0, 0.0]).unwrap();
    assert_eq!(again, summary);
    assert!(out.join("manifest.txt").exists());
    assert!(out.join("alpha-fixed/seed-2/manifest.cfg").exists());

    // a per-run directory reproduces its own CSV
    let m = out.join("zeta-adaptive/seed-2/manifest.cfg");
    let rerun = tmp.path().join("rerun");
    assert_eq!(cli(&["train", "--config", s(&m), "--out", s(&rerun)]).0, 0);
    assert_eq!(
        fs::read(rerun.join("train.csv")).unwrap(),
        fs::read(out.join("zeta-adaptive/seed-2/train.csv")).unwrap()
    );
}

#[test]
fn compare_rejects_duplicate_names() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.cfg", SMALL);
    let out = tmp.path().join("dup");
    let (code, _, err) = cli(&["compare", "--config", &a, "--config", &a, "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("duplicate run name"), "{err}");
}

#[test]
fn selfcheck_and_negative_control() {
    let (code, out, _) = cli(&["selfcheck"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 12);
    assert!(out.lines().skip(1).all(|l| l.ends_with("pass")));
    assert!(out.contains("grad tanh 4-16-8-2"));

    let (code, _, err) = cli(&["selfcheck", "--perturb-backward"]);
    assert_eq!(code, 2);
    assert!(err.contains("FAIL"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&["bogus"]).0, 1);
    assert_eq!(cli(&["train", "--nope"]).0, 1);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("selfcheck"));
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_adagan");
    let status = Command::new(bin)
        .args(["dirac", "--config", "/no/such/file.cfg"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&status.stderr).contains("I/O error"));
    let status = Command::new(bin)
        .args(["dirac", "--steps", "50", "--out", "o"])
        .current_dir(tmp.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(tmp.path().join("o/dirac.csv").exists());
}
