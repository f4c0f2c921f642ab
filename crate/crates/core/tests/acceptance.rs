//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use mzi_parity::analytic::{
    limits, parity_coherent, parity_tmsv, parity_twin_fock, peak_full_width, qfi_coherent,
    qfi_tmsv, qfi_twin_fock, second_moment_tmsv, sensitivity_coherent_taylor,
    sensitivity_rho_parity, sensitivity_tmsv, sensitivity_tmsv_taylor, PhaseGrid,
};
use mzi_parity::cli::{self, Cli};
use mzi_parity::fock::{QuantumState, SectorVector, TwoModePureState};
use mzi_parity::metrology::{default_step, error_propagation, error_propagation_sampled, qfi_pure};
use mzi_parity::optics::{
    mzi_apply, parity_expectation, sweep, Readout, SectorBeamSplitter,
};
use mzi_parity::states::{coherent_vacuum, tmsv, twin_fock, vacuum_mixed_twin_fock};

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {id:<4} {}  {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn deviation(&mut self, id: &str, what: &str, dev: f64, tol: f64) {
        self.line(id, dev < tol, format!("{what}: max deviation {dev:.3e} (tolerance {tol:e})"));
    }
}

fn phase_grid() -> Vec<f64> {
    PhaseGrid::new(-PI, PI, 201).unwrap().points()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Error-propagation uncertainty at phi = 0 of a simulated readout, with the
/// stencil evaluated in one sweep.
fn simulated_origin_sensitivity<S: QuantumState + ?Sized>(state: &S, step: f64) -> f64 {
    let retained: f64 = state
        .weighted_components()
        .iter()
        .map(|(w, s)| w * s.norm_squared())
        .sum();
    error_propagation_sampled(
        |pts| Ok(sweep(state, pts, &[Readout::Parity])?.remove(0).into_iter().map(|v| v / retained).collect()),
        0.0,
        step,
    )
    .unwrap()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let phis = phase_grid();
    let mut dev = 0.0f64;
    for nbar in [1.0, 5.0, 10.0] {
        let state = tmsv(nbar, 1e-12).unwrap();
        let sim = sweep(&state, &phis, &[Readout::Parity]).unwrap().remove(0);
        let exact: Vec<f64> = phis.iter().map(|&p| parity_tmsv(nbar, p).unwrap()).collect();
        dev = dev.max(max_dev(&sim, &exact));
    }
    let elapsed = start.elapsed().as_secs_f64();
    r.deviation("1", "squeezed-vacuum parity vs closed form, nbar 1/5/10, 201 phases", dev, 1e-7);
    r.line("1b", elapsed < 10.0, format!("runtime {elapsed:.2} s (limit 10 s)"));
}

fn criterion_2(r: &mut Report) {
    let phis = phase_grid();
    let mut dev = 0.0f64;
    for n in 0..=30 {
        let sim = sweep(&twin_fock(n), &phis, &[Readout::RawParity]).unwrap().remove(0);
        let exact: Vec<f64> = phis.iter().map(|&p| parity_twin_fock(n, p)).collect();
        dev = dev.max(max_dev(&sim, &exact));
    }
    r.deviation("2", "twin Fock parity vs (-1)^n P_n(cos 2phi), n <= 30", dev, 1e-10);
}

fn criterion_3(r: &mut Report) {
    let phis = phase_grid();
    let mut inputs = Vec::new();
    for nbar in [1.0, 5.0, 10.0] {
        inputs.push(tmsv(nbar, 1e-12).unwrap());
        inputs.push(coherent_vacuum(nbar, 1e-12).unwrap());
    }
    inputs.extend((1..=10).map(twin_fock));
    let mut dev = 0.0f64;
    for s in &inputs {
        let v = sweep(s, &phis, &[Readout::Parity, Readout::MuAb]).unwrap();
        dev = dev.max(max_dev(&v[0], &v[1]));
    }
    r.deviation("3", "parity at phi+pi/2 vs mu_AB at phi, all three inputs", dev, 1e-10);
}

fn criterion_4(r: &mut Report) {
    let (mut dc, mut dt) = (0.0f64, 0.0f64);
    for nbar in [1.0, 5.0, 10.0, 25.0] {
        dc = dc.max((qfi_pure(&coherent_vacuum(nbar, 1e-12).unwrap()).unwrap() - qfi_coherent(nbar)).abs());
        dt = dt.max((qfi_pure(&tmsv(nbar, 1e-12).unwrap()).unwrap() - qfi_tmsv(nbar)).abs());
    }
    let mut df = 0.0f64;
    for n in 0..=20 {
        df = df.max((qfi_pure(&twin_fock(n)).unwrap() - qfi_twin_fock(n)).abs());
    }
    r.deviation("4a", "Fisher information of coherent input vs nbar", dc, 1e-6);
    r.deviation("4b", "Fisher information of squeezed vacuum vs nbar(nbar+2)", dt, 1e-5);
    r.deviation("4c", "Fisher information of twin Fock vs 2n(n+1), n <= 20", df, 1e-10);
}

fn criterion_5(r: &mut Report) {
    let mut dev = 0.0f64;
    for k in 1..=25 {
        let nbar = k as f64;
        let got = error_propagation(|p| parity_tmsv(nbar, p).unwrap(), 0.0, default_step(nbar)).unwrap();
        let exact = qfi_tmsv(nbar).sqrt().recip();
        dev = dev.max((got - exact).abs() / exact);
    }
    r.deviation("5", "parity uncertainty at the origin vs 1/sqrt(nbar(nbar+2)), nbar 1..25, relative", dev, 1e-6);
    let mut dev = 0.0f64;
    for nbar in [1.0, 5.0, 10.0] {
        let got = simulated_origin_sensitivity(&tmsv(nbar, 1e-12).unwrap(), default_step(nbar));
        let exact = qfi_tmsv(nbar).sqrt().recip();
        dev = dev.max((got - exact).abs() / exact);
    }
    r.deviation("5b", "same from the simulated signal, nbar 1/5/10, relative", dev, 1e-6);
}

fn criterion_6(r: &mut Report) {
    let mut bad = Vec::new();
    for k in 1..=100 {
        let nbar = k as f64;
        let d = sensitivity_tmsv(nbar, 0.0).unwrap();
        let l = limits(nbar, second_moment_tmsv(nbar)).unwrap();
        if !(l.hofmann < d && d < l.hl) {
            bad.push(k);
        }
    }
    r.line("6", bad.is_empty(), format!("hofmann < delta(0) < 1/nbar for integer nbar 1..100; violations {bad:?}"));
}

fn criterion_7(r: &mut Report) {
    let (mut dt, mut dc) = (0.0f64, 0.0f64);
    for nbar in [1.0, 5.0, 10.0, 25.0, 100.0] {
        for (f, dev, exact_fn) in [
            (qfi_tmsv(nbar), &mut dt, 0),
            (qfi_coherent(nbar), &mut dc, 1),
        ] {
            let edge = 0.1 / f.sqrt();
            for i in 0..=40 {
                let phi = -edge + i as f64 * edge / 20.0;
                let (exact, taylor) = if exact_fn == 0 {
                    (sensitivity_tmsv(nbar, phi).unwrap(), sensitivity_tmsv_taylor(nbar, phi))
                } else {
                    (
                        error_propagation(|p| parity_coherent(nbar, p), phi, default_step(nbar)).unwrap(),
                        sensitivity_coherent_taylor(nbar, phi),
                    )
                };
                *dev = dev.max((taylor - exact).abs() / exact);
            }
        }
    }
    r.deviation("7a", "squeezed-vacuum quadratic form vs exact, |phi| <= 0.1/sqrt(F), relative", dt, 1e-3);
    r.deviation("7b", "coherent quadratic form vs exact, |phi| <= 0.1/sqrt(F), relative", dc, 1e-3);
}

fn criterion_8(r: &mut Report) {
    let thetas = PhaseGrid::new(0.0, 1.45, 146).unwrap().points();
    let mut dev = 0.0f64;
    let mut not_beating_hl = Vec::new();
    let mut beating_hofmann = Vec::new();
    for n in [2usize, 5] {
        for &theta in &thetas {
            let rho = vacuum_mixed_twin_fock(n, theta).unwrap();
            let got = simulated_origin_sensitivity(&rho, default_step(2.0 * n as f64));
            dev = dev.max((got - sensitivity_rho_parity(n, theta).unwrap()).abs());
            let c = theta.cos();
            let hl = 1.0 / (2.0 * n as f64 * c * c);
            let hofmann = 1.0 / (2.0 * n as f64 * c);
            if theta > 0.0 && got >= hl {
                not_beating_hl.push((n, theta));
            }
            if got < hofmann {
                beating_hofmann.push((n, theta));
            }
        }
    }
    r.deviation("8a", "mixed-state parity uncertainty vs 1/sqrt(2n(n+1)cos^2), n 2/5", dev, 1e-5);
    let first = |v: &[(usize, f64)], n: usize| v.iter().filter(|x| x.0 == n).map(|x| x.1).fold(f64::NAN, f64::max);
    r.line(
        "8b",
        not_beating_hl.is_empty(),
        format!(
            "below 1/nbar for every theta > 0: {} grid points are not (largest failing theta: n=2 {:.2}, n=5 {:.2})",
            not_beating_hl.len(),
            first(&not_beating_hl, 2),
            first(&not_beating_hl, 5)
        ),
    );
    r.line(
        "8c",
        beating_hofmann.is_empty(),
        format!("never below 1/(2n cos theta); violations {}", beating_hofmann.len()),
    );
}

fn criterion_9(r: &mut Report) {
    let phis = phase_grid();
    let mut dev = 0.0f64;
    for nbar in [1.0, 5.0, 10.0] {
        let v = sweep(&tmsv(nbar, 1e-12).unwrap(), &phis, &[Readout::IntensityDifference]).unwrap();
        dev = dev.max(v[0].iter().fold(0.0, |a, x| a.max(x.abs())));
    }
    r.deviation("9", "|<n_a - n_b>| for squeezed vacuum, nbar 1/5/10", dev, 1e-10);
}

fn criterion_10(r: &mut Report) {
    // Half maximum of the squared readout, i.e. the readout at 1/sqrt(2).
    let wt = peak_full_width(|p| parity_tmsv(10.0, p).unwrap(), FRAC_1_SQRT_2, 1.0).unwrap();
    let wc = peak_full_width(|p| parity_coherent(100.0, p), FRAC_1_SQRT_2, 1.0).unwrap();
    let ratio = wt / wc;
    r.line(
        "10",
        (ratio - 1.0).abs() < 0.1,
        format!("peak width squeezed vacuum 10 / coherent 100 = {ratio:.4} ({wt:.5} vs {wc:.5})"),
    );
    let wt = peak_full_width(|p| parity_tmsv(10.0, p).unwrap(), 0.5, 1.0).unwrap();
    let wc = peak_full_width(|p| parity_coherent(100.0, p), 0.5, 1.0).unwrap();
    println!("info          width ratio at readout level 1/2 = {:.4}", wt / wc);
}

fn random_state() -> impl Strategy<Value = TwoModePureState> {
    (
        prop::collection::vec(any::<bool>(), 13),
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 91),
    )
        .prop_map(|(mask, raw)| {
            let mut offset = 0;
            let mut sectors = Vec::new();
            for (n, &keep) in mask.iter().enumerate() {
                let amps: Vec<Complex64> = raw[offset..offset + n + 1]
                    .iter()
                    .map(|&(a, b)| Complex64::new(a, b))
                    .collect();
                offset += n + 1;
                if keep {
                    sectors.push(SectorVector::new(n, amps).unwrap());
                }
            }
            if sectors.iter().all(|s| s.norm_squared() < 1e-6) {
                sectors = vec![SectorVector::basis(0, 0).unwrap()];
            }
            TwoModePureState::normalized(sectors).unwrap()
        })
}

fn csv_for(args: &[String]) -> String {
    use clap::Parser;
    let cfg = cli::RunConfig::from_cli(Cli::try_parse_from(args).unwrap()).unwrap();
    cli::run(&cfg).unwrap().csv
}

fn criterion_11(r: &mut Report) {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new(config.clone());
    let outcome = runner.run(&(random_state(), -PI..PI), |(state, phi)| {
        let out = mzi_apply(&state, phi).unwrap();
        // Sector conservation: same sectors, same dimensions, same weights.
        let before = state.sector_weights();
        let after = out.sector_weights();
        prop_assert_eq!(before.len(), after.len());
        for ((n0, w0), (n1, w1)) in before.iter().zip(&after) {
            prop_assert_eq!(n0, n1);
            prop_assert_eq!(state.sector(*n0).unwrap().amplitudes().len(), out.sector(*n1).unwrap().amplitudes().len());
            prop_assert!((w0 - w1).abs() < 1e-12);
        }
        prop_assert!((state.norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!((out.norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!(parity_expectation(&out).unwrap().abs() <= 1.0 + 1e-12);
        Ok(())
    });
    r.line("11a", outcome.is_ok(), format!("sector conservation, normalization, parity bound over 1000 random states {outcome:?}"));

    let mut runner = TestRunner::new(config.clone());
    let outcome = runner.run(&(0usize..=40), |n| {
        let dim = n + 1;
        let u = SectorBeamSplitter::new(n).unwrap().matrix();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let dot: Complex64 = (0..dim).map(|k| u[k * dim + i].conj() * u[k * dim + j]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).norm());
            }
        }
        prop_assert!(worst < 1e-12, "N={} deviation {}", n, worst);
        Ok(())
    });
    r.line("11b", outcome.is_ok(), format!("beam-splitter unitarity, 1000 random sectors {outcome:?}"));

    let mut runner = TestRunner::new(config);
    let outcome = runner.run(
        &(0usize..4, 0.2f64..2.5, 2usize..6, prop::sample::select(vec!["analytic", "simulation", "both"])),
        |(cmd, nbar, samples, engine)| {
            let args: Vec<String> = match cmd {
                0 => vec!["signal".into(), "--nbar".into(), nbar.to_string(), "--nbar-coherent".into(), nbar.to_string()],
                1 => vec!["limits".into(), "--nbar".into(), nbar.to_string()],
                2 => vec!["rho-sweep".into(), "--fock-n".into(), samples.to_string()],
                _ => vec!["sensitivity".into(), "--nbar-max".into(), samples.to_string()],
            };
            let mut full = vec!["mzi-parity".to_string()];
            full.extend(args);
            // The simulated inset runs 25-photon states; keep it to the analytic engine.
            let inset = cmd == 3 && engine == "analytic";
            if cmd != 1 && (cmd != 3 || inset) {
                full.extend(["--samples".to_string(), samples.to_string()]);
            }
            if inset {
                full.insert(2, "--phi-sweep".into());
            }
            full.extend(["--engine".to_string(), engine.to_string()]);
            let a = csv_for(&full);
            let b = csv_for(&full);
            prop_assert!(a.starts_with("# command="));
            prop_assert_eq!(a, b);
            Ok(())
        },
    );
    r.line("11c", outcome.is_ok(), format!("bit-identical CSV across repeated runs, 1000 random configs {outcome:?}"));
}

fn main() {
    let start = Instant::now();
    let mut r = Report { failures: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    criterion_11(&mut r);
    let elapsed = start.elapsed().as_secs_f64();
    r.line("11d", elapsed < 60.0, format!("acceptance suite runtime {elapsed:.1} s (limit 60 s)"));
    println!("{} failing", r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
