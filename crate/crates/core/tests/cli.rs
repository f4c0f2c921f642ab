use std::f64::consts::FRAC_1_SQRT_2;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mzi-parity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Data rows of the first block, parsed as numbers.
fn numeric_rows(csv: &str) -> Vec<Vec<f64>> {
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    lines.next();
    lines
        .take_while(|l| !l.starts_with("# block") && !l.is_empty())
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn blocks(csv: &str) -> Vec<Vec<Vec<f64>>> {
    csv.split("# block=")
        .skip(1)
        .map(|b| {
            b.lines()
                .skip(2)
                .filter(|l| !l.starts_with('#'))
                .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
                .collect()
        })
        .collect()
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["signal", "--samples", "1"][..],
        &["signal", "--phi-range", "2:1"],
        &["signal", "--epsilon", "2"],
        &["rho-sweep", "--fock-n", "0"],
        &["frobnicate"],
        &[],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn every_output_opens_with_resolved_config() {
    for args in [
        &["signal", "--samples", "3"][..],
        &["sensitivity", "--nbar-max", "2"],
        &["limits"],
        &["rho-sweep", "--samples", "2"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        let first = text.lines().next().unwrap();
        assert!(first.starts_with(&format!("# command={}", args[0])), "{first}");
        assert!(first.contains("epsilon=1e-12"));
    }
}

#[test]
fn two_samples_give_two_rows() {
    let text = stdout(&run(&["signal", "--samples", "2"]));
    assert_eq!(numeric_rows(&text).len(), 2);
}

#[test]
fn output_is_deterministic() {
    let dir = std::env::temp_dir().join(format!("mzi-parity-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let args = ["signal", "--samples", "31", "--engine", "both", "--nbar", "3", "--nbar-coherent", "4"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let path = dir.join("signal.csv");
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    assert_eq!(run(&with_out).status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);

    let r1 = run(&["rho-sweep", "--engine", "both", "--samples", "7"]);
    let r2 = run(&["rho-sweep", "--engine", "both", "--samples", "7"]);
    assert_eq!(r1.stdout, r2.stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn default_signal_peak_widths_agree() {
    let text = stdout(&run(&["signal"]));
    let rows = numeric_rows(&text);
    assert_eq!(rows.len(), 2001);
    // Full width where the readout falls to 1/sqrt(2), from linear
    // interpolation between samples on the positive side of the peak.
    let width = |col: usize| {
        let right: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] >= 0.0).collect();
        let i = right.iter().position(|r| r[col] < FRAC_1_SQRT_2).unwrap();
        let (a, b) = (right[i - 1], right[i]);
        let x = a[0] + (a[col] - FRAC_1_SQRT_2) / (a[col] - b[col]) * (b[0] - a[0]);
        2.0 * x
    };
    let ratio = width(1) / width(2);
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn signal_engines_agree_at_five_photons() {
    let text = stdout(&run(&["signal", "--nbar", "5", "--nbar-coherent", "5", "--samples", "101", "--engine", "both"]));
    let footer = text.lines().last().unwrap();
    let dev: f64 = footer
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("max_abs_deviation="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-8, "{footer}");
}

#[test]
fn sensitivity_sweep_rows() {
    let text = stdout(&run(&["sensitivity", "--phi-sweep"]));
    let rows = numeric_rows(&text);
    assert_eq!(rows.len(), 100);
    for r in &rows {
        let (delta, qcrb, snl, hl, hofmann) = (r[1], r[2], r[3], r[4], r[5]);
        assert!(hofmann <= delta && delta <= hl && hl <= snl, "{r:?}");
        assert!((delta - qcrb).abs() < 1e-12);
    }
    assert!((rows[9][1] - 1.0 / 120f64.sqrt()).abs() < 1e-6);

    // phi, tmsv 5, tmsv 25, coherent 25
    let inset = &blocks(&text)[0];
    assert_eq!(inset.len(), 201);
    let origin = inset.iter().find(|r| r[0] == 0.0).unwrap();
    assert!(origin[2] < origin[3]);
    // Away from the origin the squeezed-vacuum uncertainty overtakes the
    // coherent one; far out the coherent parity fringe dies and it reverses.
    let off_peak = inset.iter().find(|r| (r[0] - 0.2).abs() < 1e-9).unwrap();
    assert!(off_peak[2] > off_peak[3], "{off_peak:?}");
}

#[test]
fn rho_sweep_rows() {
    let text = stdout(&run(&["rho-sweep"]));
    let b = blocks(&text);
    assert_eq!(b.len(), 2);
    for (rows, n) in b.iter().zip([2.0f64, 5.0]) {
        assert_eq!(rows.len(), 146);
        let crossover = ((n + 1.0) / (2.0 * n)).sqrt().acos();
        for r in rows {
            let (theta, delta, qcrb, hl, hofmann) = (r[0], r[1], r[2], r[3], r[4]);
            assert!((qcrb - delta).abs() < 1e-5);
            assert!(delta >= hofmann);
            // Below 1/nbar exactly past cos^2 theta = (n+1)/(2n).
            if (theta - crossover).abs() > 1e-9 {
                assert_eq!(delta < hl, theta > crossover, "n={n} theta={theta}");
            }
        }
    }
    assert!((b[0][0][1] - 1.0 / 12f64.sqrt()).abs() < 1e-15);
}

#[test]
fn limits_engines_agree() {
    let text = stdout(&run(&["limits", "--engine", "both"]));
    let dev: f64 = text
        .lines()
        .last()
        .unwrap()
        .strip_prefix("# max_abs_deviation=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-8);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn validate_passes_at_default_and_loose_truncation() {
    for eps in ["1e-12", "1e-4"] {
        let out = run(&["validate", "--epsilon", eps]);
        let text = stdout(&out);
        assert_eq!(out.status.code(), Some(0), "{text}");
        assert!(!text.contains("FAIL"));
        assert!(text.contains("failed=0"));
    }
}
