use std::path::Path;
use std::process::{Command, Output};

use dna_channel_cli::config::{ChannelConfig, ReferenceSource};
use dna_channel_cli::presets::{names, preset};
use dna_channel_cli::report::Report;

fn dnachannel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnachannel")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn small_config(dir: &Path, name: &str, count: usize, coverage: f64) -> String {
    let mut c: ChannelConfig = preset(name).unwrap();
    if let ReferenceSource::Generate { count: m, .. } = &mut c.references {
        *m = count;
    }
    c.channel.coverage = coverage;
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, c.to_toml().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn load_report(dir: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn presets_lists_every_name_and_prints_toml() {
    let out = dnachannel(&["presets"]);
    assert!(out.status.success());
    let listed: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect();
    assert_eq!(listed, names().iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let out = dnachannel(&["presets", "fig7f"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(ChannelConfig::from_toml(&text).unwrap(), preset("fig7f").unwrap());
}

#[test]
fn exit_codes_separate_config_io_and_success() {
    assert_eq!(dnachannel(&["presets", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(dnachannel(&["report"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 7\n").unwrap();
    assert_eq!(dnachannel(&["--config", bad.to_str().unwrap(), "report"]).status.code(), Some(2));
    let missing = dir.path().join("missing.fastq");
    let missing = missing.to_str().unwrap();
    let out = dnachannel(&["--preset", "fig7a", "analyze", "--r1", missing, "--r2", missing]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.fastq"));
}

#[test]
fn report_writes_every_artifact_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "table1-highpr", 200, 10.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let status =
            dnachannel(&["--config", &config, "--threads", threads, "--out", out.to_str().unwrap(), "run"]).status;
        assert!(status.success());
    }
    for file in [
        "report.json",
        "summary.csv",
        "error_rates.csv",
        "substitution_matrix.csv",
        "coverage_histogram.csv",
        "coverage_histogram.txt",
    ] {
        assert!(a.join(file).exists(), "{file}");
    }
    let (ra, rb) = (load_report(&a), load_report(&b));
    assert_eq!(ra.stable_json().unwrap(), rb.stable_json().unwrap());
    assert_eq!(ra.runtime.threads, 1);
    assert_eq!(ra.reads.pairs, 2000);
    let hist = std::fs::read_to_string(a.join("coverage_histogram.txt")).unwrap();
    assert!(hist.starts_with("reads\tdesigns\n"));
}

#[test]
fn simulate_then_analyze_matches_a_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "table1-lowpr", 150, 8.0);
    let sim = dir.path().join("sim");
    assert!(dnachannel(&["--config", &config, "--out", sim.to_str().unwrap(), "simulate"]).status.success());
    for file in ["references.fasta", "reads_R1.fastq", "reads_R2.fastq", "ground_truth_coverage.txt"] {
        assert!(sim.join(file).exists(), "{file}");
    }
    let r1 = sim.join("reads_R1.fastq");
    let r2 = sim.join("reads_R2.fastq");
    let fasta = sim.join("references.fasta");
    let analyzed = dir.path().join("analyzed");
    let status = dnachannel(&[
        "--config",
        &config,
        "--out",
        analyzed.to_str().unwrap(),
        "analyze",
        "--r1",
        r1.to_str().unwrap(),
        "--r2",
        r2.to_str().unwrap(),
        "--references",
        fasta.to_str().unwrap(),
    ])
    .status;
    assert!(status.success());
    let direct = dir.path().join("direct");
    assert!(dnachannel(&["--config", &config, "--out", direct.to_str().unwrap(), "report"]).status.success());
    let (a, d) = (load_report(&analyzed), load_report(&direct));
    assert_eq!(a.reads, d.reads);
    assert_eq!(a.error_rates, d.error_rates);
    assert_eq!(a.coverage.value().unwrap().histogram, d.coverage.value().unwrap().histogram);
    assert!(a.coverage.value().unwrap().ground_truth_unseen_fraction.is_none());

    let merged = dir.path().join("merged");
    let out = dnachannel(&[
        "--out",
        merged.to_str().unwrap(),
        "merge",
        "--r1",
        r1.to_str().unwrap(),
        "--r2",
        r2.to_str().unwrap(),
        "--length",
        "117",
    ]);
    assert!(out.status.success());
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(merged.join("merge_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["merged"].as_u64(), Some(d.merge.value().unwrap().merged));

    let matched = dir.path().join("matched");
    let merged_fasta = merged.join("merged.fasta");
    let out = dnachannel(&[
        "--out",
        matched.to_str().unwrap(),
        "match",
        "--reads",
        merged_fasta.to_str().unwrap(),
        "--references",
        fasta.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let lines = std::fs::read_to_string(matched.join("matches.jsonl")).unwrap();
    let found = lines.lines().filter(|l| !l.contains("\"match\":null")).count() as u64;
    assert_eq!(found, d.reads.matched);
}

#[test]
fn emit_fastq_and_exact_length_filter_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "table1-highpr", 100, 5.0);
    let out = dir.path().join("out");
    let status = dnachannel(&[
        "--config",
        &config,
        "--emit-fastq",
        "--exact-length-filter",
        "--out",
        out.to_str().unwrap(),
        "report",
    ])
    .status;
    assert!(status.success());
    let fastq = std::fs::read_to_string(out.join("reads_R1.fastq")).unwrap();
    assert_eq!(fastq.lines().count(), 4 * 500);
    let r = load_report(&out);
    assert!(r.config.analysis.exact_length_filter);
    assert!(r.reads.filtered > 0);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "fig7f", 300, 3.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(dnachannel(&["--config", &config, "--seed", "5", "--out", a.to_str().unwrap(), "report"]).status.success());
    assert!(dnachannel(&["--config", &config, "--seed", "6", "--out", b.to_str().unwrap(), "report"]).status.success());
    let (ra, rb) = (load_report(&a), load_report(&b));
    assert_eq!(ra.config.master_seed, 5);
    assert_ne!(ra.coverage, rb.coverage);
}

#[test]
fn selftest_passes() {
    let out = dnachannel(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}
