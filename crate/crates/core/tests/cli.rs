use std::path::Path;
use std::process::Command;

use prpca::cli::{run_cli, EXIT_INPUT, EXIT_OK};
use prpca::io::{parse_matrix, parse_results, write_matrix};
use prpca::synthetic::low_rank_plus_sparse;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["prpca"];
    argv.extend_from_slice(args);
    run_cli(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_track_eval_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["synth", "--out", s(&d.join("seq")), "--frames", "4", "--no-occlusion"]), EXIT_OK);
    let cfg = d.join("tracker.toml");
    std::fs::write(&cfg, "particle_count = 12\ntemplate_count = 4\nrng_seed = 3\n").unwrap();
    let gt = d.join("seq/groundtruth.txt");
    let (frames, run1, run2) = (d.join("seq/frames"), d.join("run1"), d.join("run2"));
    let args = [
        "track", "--seq", s(&frames), "--box", "10,54,20,20", "--gt", s(&gt), "--config", s(&cfg), "--out", s(&run1),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let results = std::fs::read_to_string(d.join("run1/results.csv")).unwrap();
    let rows = parse_results(&results).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].bbox.x, 10.0);
    assert!(d.join("run1/config.toml").exists());
    assert_eq!(std::fs::read_to_string(d.join("run1/seed.txt")).unwrap(), "3\n");
    assert!(d.join("run1/summary.txt").exists());

    // Re-running from the snapshot reproduces the file byte for byte.
    let snapshot = run1.join("config.toml");
    let again = [
        "track", "--seq", s(&frames), "--box", "10,54,20,20", "--config", s(&snapshot), "--out", s(&run2),
    ];
    assert_eq!(run(&again), EXIT_OK);
    assert_eq!(std::fs::read(d.join("run2/results.csv")).unwrap(), results.as_bytes());

    assert_eq!(
        run(&["eval", "--results", s(&d.join("run1/results.csv")), "--gt", s(&gt), "--out", s(&d.join("ev"))]),
        EXIT_OK
    );
    let metrics = std::fs::read_to_string(d.join("ev/metrics.csv")).unwrap();
    assert_eq!(metrics, std::fs::read_to_string(d.join("run1/metrics.csv")).unwrap());
    assert_eq!(run(&["plot", "--curves", s(&d.join("ev")), "--out", s(&d.join("plots"))]), EXIT_OK);
    assert!(std::fs::read_to_string(d.join("plots/precision.svg")).unwrap().starts_with("<svg"));
    assert!(d.join("plots/success.svg").exists());
}

#[test]
fn eval_of_perfect_results_reports_full_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let header = "frame,x,y,w,h,likelihood,occlusion_level,template_replaced\n";
    std::fs::write(d.join("r.csv"), format!("{header}1,1,2,3,4,0.3,0,0\n2,5,6,7,8,0.3,0,0\n")).unwrap();
    std::fs::write(d.join("gt.txt"), "1,2,3,4\n5 6 7 8\n").unwrap();
    assert_eq!(run(&["eval", "--results", s(&d.join("r.csv")), "--gt", s(&d.join("gt.txt")), "--out", s(d)]), EXIT_OK);
    let summary = std::fs::read_to_string(d.join("summary.txt")).unwrap();
    assert!(summary.contains("mean_aos = 1\n"), "{summary}");
    assert!(summary.contains("mean_eps0 = 0\n"), "{summary}");
}

#[test]
fn decompose_recovers_planted_parts_at_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let inst = low_rank_plus_sparse(64, 64, 2, 0.05, 0);
    std::fs::write(d.join("m.txt"), write_matrix(&inst.m)).unwrap();
    let matrix = d.join("m.txt");
    let args = [
        "decompose", "--matrix", s(&matrix), "--p", "1", "--lambda", "0.125", "--trace", "--out", s(d),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let l = parse_matrix(&std::fs::read_to_string(d.join("low_rank.txt")).unwrap()).unwrap();
    let sp = parse_matrix(&std::fs::read_to_string(d.join("sparse.txt")).unwrap()).unwrap();
    assert!((&l - &inst.low_rank).norm() / inst.low_rank.norm() <= 1e-2);
    assert!((&sp - &inst.sparse).norm() / inst.sparse.norm() <= 1e-2);
    assert!(std::fs::read_to_string(d.join("trace.csv")).unwrap().starts_with("iteration,mu,residual\n"));
}

#[test]
fn bad_input_exits_with_input_status() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["track", "--bogus"]), EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]), EXIT_INPUT);
    assert_eq!(
        run(&["decompose", "--matrix", s(&d.join("missing.txt")), "--out", s(d)]),
        EXIT_INPUT
    );
    std::fs::write(d.join("bad.toml"), "particles = 3\n").unwrap();
    std::fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(
        run(&["track", "--seq", s(&d.join("empty")), "--box", "1,1,4,4", "--config", s(&d.join("bad.toml")), "--out", s(d)]),
        EXIT_INPUT
    );
    assert_eq!(run(&["eval", "--results", s(&d.join("nope.csv")), "--gt", s(&d.join("nope.txt")), "--out", s(d)]), EXIT_INPUT);
    assert_eq!(run(&["plot", "--curves", s(&d.join("empty")), "--out", s(d)]), EXIT_INPUT);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_prpca"))
        .args(["decompose", "--matrix", "/nonexistent/m.txt", "--out", "/tmp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/m.txt"));
    let help = Command::new(env!("CARGO_BIN_EXE_prpca")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
