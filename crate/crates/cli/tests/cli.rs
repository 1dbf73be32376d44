//! End-to-end tests of the `deflect` binary: every subcommand, the exit-code
//! contract, and byte-stable outputs.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("deflect-cli-tests")
        .join(format!("{test}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn deflect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deflect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("not killed by a signal")
}

#[test]
fn validate_accepts_the_bundled_networks() {
    for name in [
        "tri.net",
        "pair2.net",
        "loops4.net",
        "ring5x2.net",
        "tworing.net",
    ] {
        let out = deflect(&["validate", &fixture(name)]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(stdout(&out).starts_with("ok:"), "{name}");
    }
}

#[test]
fn validate_rejects_an_unbalanced_network() {
    let dir = scratch("unbalanced");
    let path = dir.join("bad.net");
    fs::write(&path, "vertices 2\nedge 0 0 1\n").unwrap();
    let out = deflect(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("vertex"));
}

#[test]
fn missing_files_are_input_errors() {
    let out = deflect(&["validate", "/definitely/not/here.net"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn usage_errors_exit_one() {
    let out = deflect(&["simulate", "--no-such-flag"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn identical_seeds_give_byte_identical_artifacts() {
    let dir = scratch("determinism");
    let a = dir.join("a");
    let b = dir.join("b");
    for out_dir in [&a, &b] {
        let out = deflect(&[
            "simulate",
            "--net",
            &fixture("ring5x2.net"),
            "--scheme",
            "random",
            "--inject",
            "rate:0.2",
            "--steps",
            "300",
            "--seed",
            "9",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for file in ["packets.csv", "steps.csv"] {
        let left = fs::read(a.join(file)).unwrap();
        let right = fs::read(b.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
    }
}

#[test]
fn the_bundled_livelock_scenario_delivers_nothing() {
    let out = deflect(&[
        "simulate",
        "--scenario",
        &fixture("figure1.scenario"),
        "--scheme",
        "distance",
        "--steps",
        "400",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("delivered=0"), "{text}");
    assert!(text.contains("rejected="), "{text}");
}

#[test]
fn wrapping_the_livelock_scenario_meets_its_deadline() {
    let out = deflect(&[
        "simulate",
        "--scenario",
        &fixture("figure1.scenario"),
        "--scheme",
        "inverse-distance",
        "--wrapper",
        "auto",
        "--steps",
        "400",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("violations=0"), "{text}");
    assert!(!text.contains("delivered=0"), "{text}");
}

#[test]
fn flush_certificate_and_measurement_agree() {
    let net = fixture("ring5x2.net");
    let out = deflect(&["flush", "--net", &net, "--analytic"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "analytic_bound=20");

    let out = deflect(&["flush", "--net", &net, "--config", "random:10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let worst: u64 = text
        .trim()
        .rsplit_once("worst_flush_time=")
        .unwrap()
        .1
        .parse()
        .unwrap();
    assert!(worst <= 20, "{text}");

    let out = deflect(&["flush", "--net", &net, "--config", "full", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("flushed=true"));
}

#[test]
fn flush_flags_configurations_that_never_drain() {
    let out = deflect(&[
        "flush",
        "--config",
        &format!("file:{}", fixture("figure1.scenario")),
        "--scheme",
        "distance",
        "--budget",
        "150",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stdout(&out).contains("flushed=false"));
}

#[test]
fn scan_finds_far_first_livelock_and_written_file_replays() {
    let dir = scratch("scan");
    let path = dir.join("found.scenario");
    let out = deflect(&[
        "livelock-scan",
        "--max-vertices",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("FOUND scheme=distance"), "{text}");
    assert!(text.contains("deliveries_in_cycle=0"), "{text}");

    // The written scenario must itself simulate to zero deliveries.
    let replay = deflect(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--scheme",
        "distance",
        "--steps",
        "600",
    ]);
    assert_eq!(code(&replay), 0, "{}", stderr(&replay));
    assert!(stdout(&replay).contains("delivered=0"));
}

#[test]
fn scan_reports_not_found_for_the_circuit_follower() {
    let out = deflect(&[
        "livelock-scan",
        "--schemes",
        "eulerian",
        "--max-vertices",
        "4",
        "--configs",
        "6",
        "--budget",
        "600",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "NOT_FOUND");
}

#[test]
fn scan_reports_not_found_once_the_wrapper_is_on() {
    // The same probe that catches far-first priority on these graphs finds
    // nothing when near-first priority runs inside the epoch wrapper.
    let out = deflect(&[
        "livelock-scan",
        "--schemes",
        "inverse-distance",
        "--wrapper",
        "psr3:auto",
        "--max-vertices",
        "4",
        "--configs",
        "6",
        "--budget",
        "600",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "NOT_FOUND");
}

#[test]
fn report_splits_regions_and_buckets() {
    let dir = scratch("report");
    let out = deflect(&[
        "simulate",
        "--net",
        &fixture("tworing.net"),
        "--inject",
        "rate:0.1",
        "--steps",
        "400",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let packets = dir.join("packets.csv");
    let steps = dir.join("steps.csv");
    let out = deflect(&[
        "report",
        packets.to_str().unwrap(),
        "--steps",
        steps.to_str().unwrap(),
        "--regions",
        &fixture("tworing.regions"),
        "--bucket",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("packets="), "{text}");
    assert!(text.contains("confined_packets="), "{text}");
    assert!(text.contains("targeting_packets="), "{text}");
    assert!(text.contains("latency[0..4]="), "{text}");
}

#[test]
fn report_recomputes_the_simulate_summary_from_its_csvs() {
    fn field(text: &str, key: &str) -> String {
        text.split_whitespace()
            .find_map(|w| w.strip_prefix(&format!("{key}=")).map(str::to_string))
            .unwrap_or_else(|| panic!("{key} missing in {text}"))
    }
    let dir = scratch("selfcheck");
    let sim = deflect(&[
        "simulate",
        "--net",
        &fixture("ring5x2.net"),
        "--scheme",
        "inverse-distance",
        "--wrapper",
        "auto",
        "--inject",
        "rate:0.3",
        "--steps",
        "400",
        "--seed",
        "11",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    let sim_text = stdout(&sim);

    let packets = dir.join("packets.csv");
    let steps = dir.join("steps.csv");
    let rep = deflect(&[
        "report",
        packets.to_str().unwrap(),
        "--steps",
        steps.to_str().unwrap(),
        "--deadline",
        &field(&sim_text, "deadline"),
    ]);
    assert_eq!(code(&rep), 0, "{}", stderr(&rep));
    let rep_text = stdout(&rep);

    // Everything the live run printed must be recomputable from its files.
    for key in [
        "delivered",
        "in_flight",
        "mean_latency",
        "max_latency",
        "violations",
    ] {
        assert_eq!(field(&sim_text, key), field(&rep_text, key), "{key} diverges");
    }
    assert_eq!(field(&sim_text, "accepted"), field(&rep_text, "packets"));
}

#[test]
fn scripted_injection_reads_the_script_file() {
    let dir = scratch("script");
    let script = dir.join("arrivals.txt");
    fs::write(&script, "0 0 2\n1 1 3\n").unwrap();
    let out = deflect(&[
        "simulate",
        "--net",
        &fixture("ring5x2.net"),
        "--inject",
        &format!("script:{}", script.display()),
        "--steps",
        "50",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("offered=2 accepted=2"), "{text}");
    assert!(text.contains("delivered=2"), "{text}");
}
