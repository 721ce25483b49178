use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn densim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn densim")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = densim(args, cwd);
    assert!(
        out.status.success(),
        "densim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Small labeled corpus in `<tmp>/syn`.
fn corpus() -> TempDir {
    let tmp = TempDir::new().unwrap();
    ok(
        &[
            "synth", "--classes", "3", "--docs-per-class", "8", "--words-per-class", "40", "--doc-len", "30",
            "--dim", "10", "--seed", "3", "--out", "syn",
        ],
        tmp.path(),
    );
    tmp
}

const PIPELINE: &[&str] = &[
    "pipeline",
    "--embedding",
    "syn/embedding.txt",
    "--corpus",
    "syn/corpus.tsv",
    "--labels",
    "syn/labels.tsv",
    "--n-points",
    "200",
];

fn pipeline(cwd: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args: Vec<&str> = PIPELINE.to_vec();
    args.extend_from_slice(&["--out", out]);
    args.extend_from_slice(extra);
    densim(&args, cwd)
}

fn read(path: PathBuf) -> String {
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn csv_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn pipeline_is_deterministic() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "a", &[])), 0);
    assert_eq!(code(&pipeline(dir, "b", &["--threads", "1"])), 0);
    assert_eq!(fs::read(dir.join("a/rankings.csv")).unwrap(), fs::read(dir.join("b/rankings.csv")).unwrap());
    assert_eq!(fs::read(dir.join("a/similarity.dsm")).unwrap(), fs::read(dir.join("b/similarity.dsm")).unwrap());
}

#[test]
fn single_corpus_uses_one_density_matrix_and_skips_self() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "p", &[])), 0);
    assert!(dir.join("p/density_queries.dsm").exists());
    assert!(!dir.join("p/density_items.dsm").exists());
    let rankings = read(dir.join("p/rankings.csv"));
    let rows: Vec<Vec<&str>> = rankings.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24 * 23);
    assert!(rows.iter().all(|r| r[0] != r[1]));
}

#[test]
fn invalid_parameter_exits_1_without_output() {
    let tmp = corpus();
    let dir = tmp.path();
    let out = pipeline(dir, "p", &["--n-points", "0"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.join("p").exists());
    assert_eq!(code(&densim(&["synth", "--bogus", "1", "--out", "x"], dir)), 1);
    assert_eq!(code(&densim(&["--threads", "0", "synth", "--out", "x"], dir)), 1);
    assert!(!dir.join("x").exists());
}

#[test]
fn runtime_failure_removes_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    // Every word sits at the same point, so no bandwidth can be estimated.
    fs::write(dir.join("emb.txt"), "3 2\nalpha 1 1\nbravo 1 1\ncharlie 1 1\n").unwrap();
    fs::write(dir.join("docs.tsv"), "d1\talpha bravo\nd2\tbravo charlie\n").unwrap();
    let out = densim(&["pipeline", "--embedding", "emb.txt", "--corpus", "docs.tsv", "--out", "p"], dir);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.join("p").exists());

    fs::create_dir(dir.join("keep")).unwrap();
    fs::write(dir.join("keep/other.txt"), "x").unwrap();
    let out = densim(&["pipeline", "--embedding", "emb.txt", "--corpus", "docs.tsv", "--out", "keep"], dir);
    assert_eq!(code(&out), 2);
    let left: Vec<_> = fs::read_dir(dir.join("keep")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["other.txt"]);
}

#[test]
fn eval_grid_rows() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "ds", &[])), 0);
    assert_eq!(code(&pipeline(dir, "rwmd", &["--method", "rwmd"])), 0);
    ok(
        &[
            "eval", "--rankings", "ds/rankings.csv,rwmd/rankings.csv", "--labels", "syn/labels.tsv", "--k", "5,10",
            "--s", "0,1,2", "--out", "ev",
        ],
        dir,
    );
    let eval = read(dir.join("ev/eval.csv"));
    let mut lines = eval.lines();
    assert_eq!(lines.next(), Some("metric,k,s,mean,se,q1,median,q3"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("accuracy:ds,")).count(), 6);
    assert_eq!(rows.iter().filter(|r| r.starts_with("accuracy:rwmd,")).count(), 6);
    assert_eq!(rows.iter().filter(|r| r.starts_with("soft_jaccard:ds:rwmd,")).count(), 6);
    for r in &rows {
        let mean: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&mean), "{r}");
    }
}

#[test]
fn empty_s_grid_means_zero_and_identical_rankings_agree() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "a", &[])), 0);
    fs::create_dir(dir.join("b")).unwrap();
    fs::copy(dir.join("a/rankings.csv"), dir.join("b/rankings.csv")).unwrap();
    ok(
        &["eval", "--rankings", "a/rankings.csv,b/rankings.csv", "--k", "5", "--s", "", "--per-query", "--out", "ev"],
        dir,
    );
    let eval = read(dir.join("ev/eval.csv"));
    let rows: Vec<&str> = eval.lines().skip(1).collect();
    assert_eq!(rows, vec!["soft_jaccard:a:b,5,0.0,1.0,0.0,1.0,1.0,1.0"]);
    let per_query = read(dir.join("ev/eval_per_query.csv"));
    assert_eq!(per_query.lines().next(), Some("metric,k,s,query_id,value"));
    assert_eq!(per_query.lines().count(), 1 + 24);
}

#[test]
fn manifest_reruns_and_flags_override_config() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "a", &["--seed", "4"])), 0);
    let manifest = read(dir.join("a/manifest.txt"));
    assert!(manifest.contains("command = pipeline"));
    assert!(manifest.contains("seed = 4"));

    ok(&["pipeline", "--config", "a/manifest.txt", "--out", "b"], dir);
    for f in ["rankings.csv", "similarity.dsm", "samples.dsm", "eval.csv"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }

    ok(&["pipeline", "--config", "a/manifest.txt", "--out", "c", "--seed", "5"], dir);
    assert!(read(dir.join("c/manifest.txt")).contains("seed = 5"));
    assert_ne!(fs::read(dir.join("a/samples.dsm")).unwrap(), fs::read(dir.join("c/samples.dsm")).unwrap());

    fs::write(dir.join("bad.conf"), "no-such-option = 1\n").unwrap();
    let out = densim(&["pipeline", "--config", "bad.conf", "--out", "d"], dir);
    assert_eq!(code(&out), 1);
}

#[test]
fn stage_commands_match_pipeline() {
    let tmp = corpus();
    let dir = tmp.path();
    assert_eq!(code(&pipeline(dir, "p", &[])), 0);
    ok(&["dfm", "--embedding", "syn/embedding.txt", "--corpus", "syn/corpus.tsv", "--out", "dfm"], dir);
    ok(&["bandwidth", "--embedding", "dfm/embedding.txt", "--out", "bw"], dir);
    ok(&["sample", "--embedding", "dfm/embedding.txt", "--n-points", "200", "--out", "smp"], dir);
    ok(&["density", "--dfm", "dfm", "--samples", "smp", "--bandwidth", "bw", "--out", "dens"], dir);
    ok(&["similar", "--density", "dens", "--out", "sim"], dir);
    ok(&["rank", "--similarity", "sim", "--out", "rk"], dir);
    assert_eq!(read(dir.join("p/rankings.csv")), read(dir.join("rk/rankings.csv")));
}

#[test]
fn bench_smoke() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("emb.txt"), "4 2\nalpha 0 0\nbravo 1 0\ncharlie 0 1\ndelta 1 1\n").unwrap();
    fs::write(dir.join("docs.tsv"), "d1\talpha bravo charlie\nd2\tbravo delta\n").unwrap();
    let out = ok(
        &["bench", "--embedding", "emb.txt", "--corpus", "docs.tsv", "--n-points", "50", "--out", "b"],
        dir,
    );
    let report = read(dir.join("b/report.csv"));
    assert_eq!(String::from_utf8_lossy(&out.stdout), report);
    for key in ["n_docs", "n_features", "mean_unique_features", "b", "ds_density_s", "ds_similarity_s", "rwmd_total_s"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("{key},"))), "{key} missing");
    }
    assert_eq!(csv_value(&report, "n_docs"), 2.0);
    assert!(csv_value(&report, "ratio") > 0.0);
}

#[test]
fn density_time_grows_with_sample_count() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(
        &[
            "synth", "--classes", "4", "--docs-per-class", "50", "--words-per-class", "200", "--doc-len", "80",
            "--dim", "50", "--out", "syn",
        ],
        dir,
    );
    let time = |n: &str, out: &str| {
        ok(
            &[
                "bench", "--embedding", "syn/embedding.txt", "--corpus", "syn/corpus.tsv", "--methods", "ds",
                "--n-points", n, "--out", out,
            ],
            dir,
        );
        csv_value(&read(dir.join(out).join("report.csv")), "ds_density_s")
    };
    let small = time("1000", "small");
    let large = time("2000", "large");
    let ratio = large / small;
    assert!((1.0..=3.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rwmd_timeout_exits_3_and_keeps_report() {
    let tmp = corpus();
    let dir = tmp.path();
    let out = densim(
        &[
            "bench", "--embedding", "syn/embedding.txt", "--corpus", "syn/corpus.tsv", "--methods", "rwmd",
            "--timeout", "1e-9", "--out", "b",
        ],
        dir,
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(dir.join("b/report.csv"));
    assert!(report.contains("rwmd_timed_out,true"));

    let out = pipeline(dir, "p", &["--method", "rwmd", "--timeout", "1e-9"]);
    assert_eq!(code(&out), 3);
    assert!(!dir.join("p").exists());
}
