//! End-to-end runs of the l1pred binary: artifact shape, determinism, exit
//! codes, and the documented example values.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1pred"))
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
    out.status.code().expect("no signal")
}

/// Splits one CSV line, honoring double-quote escaping.
fn split_line(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '"' if in_quotes && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    cells.push(cur);
    cells
}

/// Parses an artifact into (meta lines, column names, data rows).
fn parse_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let mut meta = Vec::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            meta.push(rest.to_string());
        } else if columns.is_empty() {
            columns = split_line(line);
        } else {
            rows.push(split_line(line));
        }
    }
    (meta, columns, rows)
}

fn col(columns: &[String], name: &str) -> usize {
    columns
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("column {name} in {columns:?}"))
}

fn cell_f64(row: &[String], idx: usize) -> f64 {
    row[idx].parse().unwrap_or_else(|_| panic!("number in {:?}", row[idx]))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn risk_curve_is_deterministic_and_dips_at_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let args = [
        "risk-curve",
        "--p",
        "normal:d=3,var=1",
        "--c-grid",
        "1:1.4:0.02",
    ];
    let out = run(&[&args[..], &["--out", first.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&[&args[..], &["--out", second.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read(&first), read(&second), "same config, same bytes");

    let text = String::from_utf8(read(&first)).unwrap();
    let (meta, columns, rows) = parse_csv(&text);
    assert!(meta.iter().any(|m| m == "seed: 17"), "{meta:?}");
    assert!(meta.iter().any(|m| m == "c_grid: 1:1.4:0.02"), "{meta:?}");
    assert_eq!(columns, ["c", "risk", "std_err", "ratio_to_R1"]);
    assert_eq!(rows.len(), 21);

    let (c_i, r_i, ratio_i) = (col(&columns, "c"), col(&columns, "risk"), 3);
    let best = rows
        .iter()
        .min_by(|a, b| cell_f64(a, r_i).total_cmp(&cell_f64(b, r_i)))
        .unwrap();
    let c_best = cell_f64(best, c_i);
    assert!(
        (1.14..=1.22).contains(&c_best),
        "risk minimum at c = {c_best}"
    );
    assert!(cell_f64(best, ratio_i) < 1.0, "expansion beats the plug-in");
}

#[test]
fn uniball_curve_has_its_minimum_at_no_expansion() {
    let out = run(&[
        "risk-curve",
        "--p",
        "uniball:d=3,m=1",
        "--c-grid",
        "0.2:4:0.01",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, columns, rows) = parse_csv(&stdout(&out));
    assert_eq!(rows.len(), 381);
    let (c_i, r_i, ratio_i) = (col(&columns, "c"), col(&columns, "risk"), 3);
    let best = rows
        .iter()
        .min_by(|a, b| cell_f64(a, r_i).total_cmp(&cell_f64(b, r_i)))
        .unwrap();
    assert!((cell_f64(best, c_i) - 1.0).abs() < 1e-9);
    assert!((cell_f64(best, r_i) - 1.0625).abs() < 1e-6);
    for row in &rows {
        assert!(cell_f64(row, ratio_i) >= 1.0 - 1e-9, "minimum sits at c = 1");
    }
}

#[test]
fn restricted_curve_emits_the_four_labeled_columns() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let args = [
        "restricted-curve",
        "--p",
        "normal:d=3,var=1",
        "--lambda-grid",
        "0:1:0.5",
        "--mc-n",
        "4000",
        "--mc-batch",
        "500",
        "--seed",
        "7",
    ];
    let out = run(&[&args[..], &["--out", first.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&[&args[..], &["--out", second.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read(&first), read(&second), "seeded run is reproducible");

    let text = String::from_utf8(read(&first)).unwrap();
    let (meta, columns, rows) = parse_csv(&text);
    assert_eq!(
        columns,
        [
            "lambda",
            "risk_c1",
            "risk_plugin",
            "risk_rawx_cstar",
            "risk_rawx_c1",
            "se_c1",
            "se_plugin"
        ]
    );
    assert!(meta.iter().any(|m| m.starts_with("estimator: mle-ball")));
    assert!(meta.iter().any(|m| m == "c_expansion: 1.05"));
    assert_eq!(rows.len(), 3);

    let lam_i = col(&columns, "lambda");
    let cstar_i = col(&columns, "risk_rawx_cstar");
    let c1_i = col(&columns, "risk_rawx_c1");
    let wide_i = col(&columns, "risk_c1");
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(cell_f64(row, lam_i), 0.5 * k as f64, "grid order");
        // The unrestricted columns are constant in lambda, with the optimal
        // expansion below the plain plug-in; the restricted estimator sits
        // far below both on this range.
        assert_eq!(row[cstar_i], rows[0][cstar_i]);
        assert_eq!(row[c1_i], rows[0][c1_i]);
        assert!(cell_f64(row, cstar_i) < cell_f64(row, c1_i));
        assert!(cell_f64(row, wide_i) < cell_f64(row, cstar_i) - 0.1);
        for (idx, name) in columns.iter().enumerate().skip(1) {
            let v = cell_f64(row, idx);
            assert!((0.0..2.0).contains(&v), "column {name} = {v}");
        }
    }
}

#[test]
fn uniform_table_covers_both_laws_with_ratio_at_most_one() {
    let out = run(&["uniform", "--dims", "1,3", "--c-grid", "0.5:2:0.25"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, columns, rows) = parse_csv(&stdout(&out));
    assert_eq!(rows.len(), 2 * 2 * 7);
    let d_i = col(&columns, "d");
    let law_i = col(&columns, "x_law");
    let c_i = col(&columns, "c");
    let ratio_i = col(&columns, "ratio_r1_to_rc");
    let route_i = col(&columns, "route");
    for d in ["1", "3"] {
        for law in ["uniball", "normal"] {
            assert!(
                rows.iter()
                    .any(|r| r[d_i] == d && r[law_i].starts_with(law)),
                "{law} rows for d = {d}"
            );
        }
    }
    for row in &rows {
        let ratio = cell_f64(row, ratio_i);
        assert!(ratio <= 1.0 + 1e-9, "no expansion helps: {row:?}");
        if cell_f64(row, c_i) == 1.0 {
            assert_eq!(ratio, 1.0);
        }
        assert_eq!(row[route_i], "closed");
    }
}

#[test]
fn bayes_uniform_matches_the_flat_prior_interval() {
    let out = run(&["bayes-uniform", "--data", "0.3", "--a", "1", "--b", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("predictive: U(-0.7, 1.3)"), "{text}");
    assert!(text.contains("midrange: 0.3"), "{text}");

    // Same computation fed from a file: interval of half-width b around the
    // midrange of the extremes.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("draws.txt");
    std::fs::write(&data, "0.0 1.0\n0.4\n").unwrap();
    let out = run(&[
        "bayes-uniform",
        "--data-file",
        data.to_str().unwrap(),
        "--a",
        "2",
        "--b",
        "1.5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("predictive: U(-1, 2)"), "{text}");
    assert!(text.contains("n = 3"), "{text}");
}

#[test]
fn bayes_uniform_failure_cites_the_condition() {
    let out = run(&[
        "bayes-uniform",
        "--data",
        "0,0.1",
        "--a",
        "2",
        "--b",
        "0.4",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("2a - 4b"), "{}", stderr(&out));
}

#[test]
fn config_errors_use_exit_code_two() {
    let cases: &[&[&str]] = &[
        // No scale grid.
        &["risk-curve", "--p", "normal:d=3,var=1"],
        // Start exceeds end: an empty grid.
        &["risk-curve", "--p", "normal:d=3,var=1", "--c-grid", "2:1:0.1"],
        // Zero step.
        &["risk-curve", "--p", "normal:d=3,var=1", "--c-grid", "1:2:0"],
        // Unknown model kind.
        &["risk-curve", "--p", "gauss:d=3", "--c-grid", "1:2:0.5"],
        // Unknown loss transform.
        &[
            "risk-curve",
            "--p",
            "normal:d=3,var=1",
            "--c-grid",
            "1:2:0.5",
            "--gamma",
            "cube",
        ],
        // Non-positive transform exponent.
        &[
            "risk-curve",
            "--p",
            "normal:d=3,var=1",
            "--c-grid",
            "1:2:0.5",
            "--gamma",
            "power:0",
        ],
        // No lambda grid.
        &["restricted-curve", "--p", "normal:d=3,var=1"],
        // Unknown estimator.
        &[
            "restricted-curve",
            "--p",
            "normal:d=3,var=1",
            "--lambda-grid",
            "0:1:0.5",
            "--estimator",
            "james-stein",
        ],
        // Missing half-width.
        &["bayes-uniform", "--data", "0.3", "--a", "1"],
        // Unknown validation tier.
        &["validate", "--tier", "exhaustive"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(code(&out), 2, "{args:?} -> {}", stderr(&out));
        assert!(!stderr(&out).is_empty(), "{args:?} says what failed");
    }

    // A typo in a config file is rejected, naming the key.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    std::fs::write(&cfg, "p = \"normal:d=3,var=1\"\nfreq = 3\n").unwrap();
    let out = run(&["risk-curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("freq"), "{}", stderr(&out));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    std::fs::write(
        &cfg,
        "p = \"normal:d=2,var=1\"\nc_grid = \"1:1.1:0.05\"\nseed = 99\nquad_nodes = 128\n",
    )
    .unwrap();
    let out = run(&["risk-curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (meta, _, rows) = parse_csv(&stdout(&out));
    assert!(meta.iter().any(|m| m == "seed: 99"), "{meta:?}");
    assert!(meta.iter().any(|m| m == "quad_nodes: 128"), "{meta:?}");
    assert_eq!(rows.len(), 3);

    let out = run(&[
        "risk-curve",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--c-grid",
        "1:1.2:0.1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (meta, _, rows) = parse_csv(&stdout(&out));
    assert!(meta.iter().any(|m| m == "seed: 5"), "flag beats file: {meta:?}");
    assert_eq!(rows.len(), 3);
    assert!(meta.iter().any(|m| m == "c_grid: 1:1.2:0.1"), "{meta:?}");
}

#[test]
fn validate_quick_passes_and_prints_one_line_per_check() {
    let out = run(&["validate", "--tier", "quick"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    let passes = lines.iter().filter(|l| l.starts_with("PASS ")).count();
    assert!(passes >= 11, "{text}");
    assert!(!text.contains("FAIL "), "{text}");
    assert!(text.contains("normal-d2-closed-form"), "{text}");
    assert!(lines.last().unwrap().starts_with("ok: all"), "{text}");
}
