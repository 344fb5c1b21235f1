use std::fs;

use bubble_tower_cli::args::{CommandSpec, Format, Scales, Task};
use bubble_tower_cli::{main_with, parse_args, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("bubble-tower").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn parse(args: &[&str]) -> Result<bubble_tower_cli::RunConfig, bubble_tower_cli::CliError> {
    parse_args(std::iter::once("bubble-tower").chain(args.iter().copied()))
}

fn csv_table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn column(text: &str, key: &str) -> Vec<String> {
    let (header, rows) = csv_table(text);
    let i = header.iter().position(|h| h == key).unwrap_or_else(|| panic!("no column {key}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

#[test]
fn constants_json_parses() {
    let cfg = parse(&["constants", "--dim", "7", "--format", "json"]).unwrap();
    assert_eq!(cfg.command, CommandSpec::Constants);
    assert_eq!(cfg.dim, 7);
    assert_eq!(cfg.format, Format::Json);
}

#[test]
fn geometric_sweep_parses_nine_points() {
    let cfg = parse(&["sweep", "--task", "errnorm-r1", "--dim", "7", "--eps-geom", "1e-3:1e-1:9", "--out", "r1.csv"])
        .unwrap();
    assert!(matches!(cfg.command, CommandSpec::Sweep { task: Task::ErrnormR1, .. }));
    assert_eq!(cfg.eps.len(), 9);
    assert_eq!(cfg.eps[0], 1e-3);
    assert_eq!(cfg.eps[8], 1e-1);
    assert!(cfg.eps.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(cfg.out.as_deref(), Some(std::path::Path::new("r1.csv")));
}

#[test]
fn mixed_parameterization_is_a_usage_error() {
    let (code, out, err) = run(&["solve", "--dim", "8", "--eps", "0.1", "--d1", "1", "--delta2", "0.01"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    for args in [
        vec!["constants", "--bogus"],
        vec!["sweep", "--task", "aux", "--eps-geom", "1e-1:1e-3:4"],
        vec!["sweep", "--task", "aux", "--eps-geom", "1e-3:1e-1:1"],
        vec!["expansion", "--eps", "0.1", "--eps-geom", "1e-3:1e-1:3"],
        vec!["solve", "--eps-geom", "1e-3:1e-1:3", "--d1", "1", "--d2", "1"],
        vec!["solve", "--eps", "0.1", "--init", "positive", "--minimize"],
        vec!["constants", "--dim", "6"],
    ] {
        let (code, _, err) = run(&args);
        assert_eq!(code, EXIT_USAGE, "{args:?}: {err}");
    }
}

#[test]
fn help_goes_to_stdout_with_success() {
    let (code, out, _) = run(&["solve", "--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("--nodes-per-decade"));
    assert!(out.contains("default: 60, 480 for solve"));
}

#[test]
fn constants_table_has_exact_rationals() {
    let (code, out, _) = run(&["constants", "--dim", "7"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(column(&out, "theta1"), ["1.6666666666666667"]);
    assert_eq!(column(&out, "alpha2"), ["3.6666666666666665"]);
    assert_eq!(column(&out, "dim"), ["7"]);
}

#[test]
fn expansion_row_shrinks_after_the_first_correction() {
    let (code, out, _) = run(&["expansion", "--dim", "7", "--radius", "1", "--eps", "1e-2", "--d1", "1", "--d2", "1"]);
    assert_eq!(code, EXIT_OK);
    let leading: f64 = column(&out, "scaled_residual_after_leading")[0].parse().unwrap();
    let after: f64 = column(&out, "scaled_residual_after_g1")[0].parse().unwrap();
    assert!(after.abs() < leading.abs(), "{after} vs {leading}");
}

#[test]
fn sweep_rows_are_ordered_by_eps() {
    let (code, out, _) = run(&["sweep", "--task", "errnorm-r1", "--dim", "7", "--eps-geom", "1e-3:1e-1:9"]);
    assert_eq!(code, EXIT_OK);
    let eps: Vec<f64> = column(&out, "eps").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(eps.len(), 9);
    assert!(eps.windows(2).all(|w| w[0] < w[1]));
    assert!(column(&out, "status").iter().all(|s| s == "ok"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let args = ["sweep", "--task", "aux", "--dim", "8", "--eps-geom", "0.05:0.3:4", "--format", "json"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.0, EXIT_OK);
    assert_eq!(first.1, second.1);
    let args = ["check-inequalities", "--dim", "7", "--samples", "5000"];
    assert_eq!(run(&args).1, run(&args).1);
}

#[test]
fn floats_round_trip() {
    let (_, out, _) = run(&["constants", "--dim", "9"]);
    let consts = bubble_tower::constants::compute_constants(9).unwrap();
    let s: f64 = column(&out, "sobolev_s")[0].parse().unwrap();
    assert_eq!(s.to_bits(), consts.sobolev_s.to_bits());
}

#[test]
fn json_keys_match_csv_headers() {
    let args = ["sweep", "--task", "expansion", "--dim", "7", "--eps-geom", "1e-3:1e-1:3", "--d1", "1", "--d2", "1"];
    let (_, csv, _) = run(&args);
    let (_, json, _) = run(&[&args[..], &["--format", "json"]].concat());
    let (header, _) = csv_table(&csv);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = parsed.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let keys: Vec<&String> = row.as_object().unwrap().keys().collect();
        assert_eq!(keys, header.iter().collect::<Vec<_>>());
        assert!(keys.iter().all(|k| k.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')));
    }
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
}

#[test]
fn scalar_commands_emit_one_object() {
    let (_, json, _) = run(&["constants", "--format", "json"]);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(parsed.is_object());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# manifest\ndim = 9\nformat = json\nd1 = 0.5\nd2 = 2\n").unwrap();
    let p = path.to_str().unwrap();
    let cfg = parse(&["expansion", "--config", p, "--eps", "0.01", "--dim", "8"]).unwrap();
    assert_eq!(cfg.dim, 8);
    assert_eq!(cfg.format, Format::Json);
    assert_eq!(cfg.scales, Scales::Params { d1: 0.5, d2: Some(2.0) });
    let (code, _, _) = run(&["constants", "--config", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let (code, out, _) = run(&["constants", "--dim", "8", "--out", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    assert_eq!(column(&fs::read_to_string(&path).unwrap(), "theta1"), ["1.5"]);
}

#[test]
fn numerical_failures_are_flagged_rows() {
    // The inner scale sits far below the smallest node, so the solve cannot resolve it.
    let (code, out, err) = run(&[
        "sweep",
        "--task",
        "solve",
        "--dim",
        "8",
        "--eps-geom",
        "0.1:0.2:2",
        "--delta1",
        "0.1",
        "--delta2",
        "1e-6",
        "--inner-scale",
        "1e-3",
    ]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert_eq!(column(&out, "status"), ["mesh_unresolved", "mesh_unresolved"]);
    assert!(!err.is_empty());
}

#[test]
fn inequality_constants_are_stable() {
    let (code, out, _) = run(&["check-inequalities", "--dim", "8"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(column(&out, "lemma").len(), 7);
    assert!(column(&out, "stable").iter().all(|s| s == "true"));
}

#[test]
fn tower_solve_has_two_nodal_domains() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("u.csv");
    let (code, out, err) = run(&[
        "solve",
        "--dim",
        "8",
        "--eps",
        "0.1",
        "--init",
        "tower",
        "--minimize",
        "--profile",
        profile.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(column(&out, "nodal_domain_count"), ["2"]);
    assert_eq!(column(&out, "inner_negative"), ["true"]);
    assert_eq!(column(&out, "energy_bound"), ["true"]);
    let (header, rows) = csv_table(&fs::read_to_string(&profile).unwrap());
    assert_eq!(header, ["r", "u"]);
    assert!(rows.len() > 100);
}
