use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GEN: &str = env!("CARGO_BIN_EXE_covpath-gen");
const BENCH: &str = env!("CARGO_BIN_EXE_covpath-bench");

fn run(bin: &str, args: &[&str]) -> Output {
    Command::new(bin).args(args).output().expect("binary runs")
}

fn gen_maps(dir: &Path, seed: &str, count: &str) {
    let out = run(GEN, &["--task", "mowing", "--seed", seed, "--count", count, "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn bench(maps: &Path, out: &Path, controller: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--task",
        "mowing",
        "--controller",
        controller,
        "--maps",
        maps.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(BENCH, &args)
}

#[test]
fn generated_maps_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_maps(&a, "7", "2");
    gen_maps(&b, "7", "2");
    for f in ["mowing-0000.map", "mowing-0001.map", "manifest.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = manifest.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["file"], "mowing-0000.map");
    assert_eq!(lines[1]["seed"], 8);
    let map = covpath::worldmodel::load_map(&fs::read_to_string(a.join("mowing-0000.map")).unwrap()).unwrap();
    let side = lines[0]["side"].as_f64().unwrap();
    assert!(((map.width() - 2) as f64 * map.resolution() - side).abs() < 1e-9);
}

#[test]
fn bench_writes_identical_csv_for_any_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    let maps = tmp.path().join("maps");
    gen_maps(&maps, "1", "2");
    let mut files = Vec::new();
    for jobs in ["1", "2"] {
        let out = tmp.path().join(format!("out{jobs}"));
        let o = bench(&maps, &out, "tsp-online", &["--seeds", "2", "--jobs", jobs, "--traces"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push((fs::read(out.join("episodes.csv")).unwrap(), fs::read(out.join("summary.csv")).unwrap()));
        assert!(out.join("traces").join("mowing-0000_0.csv").exists());
    }
    assert_eq!(files[0], files[1]);
    let summary = String::from_utf8(files[0].1.clone()).unwrap();
    // two maps and the total row
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().last().unwrap().starts_with("Total"));
}

#[test]
fn random_controller_misses_the_goal() {
    let tmp = tempfile::tempdir().unwrap();
    let maps = tmp.path().join("maps");
    gen_maps(&maps, "2", "1");
    let out = tmp.path().join("out");
    let o = bench(&maps, &out, "random", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("episodes.csv").exists());
}

#[test]
fn unknown_controller_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let maps = tmp.path().join("maps");
    gen_maps(&maps, "2", "1");
    let o = bench(&maps, &tmp.path().join("out"), "nope", &[]);
    assert!(!o.status.success());
    assert_ne!(o.status.code(), Some(2));
}

#[test]
fn metrics_of_a_trace_match_the_episode_row() {
    let tmp = tempfile::tempdir().unwrap();
    let maps = tmp.path().join("maps");
    gen_maps(&maps, "3", "1");
    let out = tmp.path().join("out");
    let o = bench(&maps, &out, "bsa", &["--traces"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = out.join("traces").join("mowing-0000_0.csv");
    let o = run(BENCH, &["metrics", "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["reached_goal"], true);
    let t99 = m["t99"].as_f64().unwrap();

    let mut rows = csv::Reader::from_path(out.join("episodes.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    let row = rows.records().next().unwrap().unwrap();
    let col = headers.iter().position(|h| h == "t99").unwrap();
    let csv_t99: f64 = row[col].parse().unwrap();
    assert!((csv_t99 - t99).abs() < 1e-9);
}
