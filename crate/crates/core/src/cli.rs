//! Command-line front end: signal curves, sensitivity sweeps, limit tables
//! and the simulation-versus-closed-form validation suite, all as CSV.
//!
//! Every output starts with a `# key=value` line holding the resolved
//! configuration. Output depends only on that configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{
    intensity_difference_coherent, limits, parity_coherent, parity_tmsv, parity_tmsv_series,
    parity_twin_fock, qfi_coherent, qfi_rho, qfi_tmsv, qfi_twin_fock, second_moment_coherent,
    second_moment_rho, second_moment_tmsv, sensitivity_rho_parity, sensitivity_tmsv, PhaseGrid,
};
use crate::error::Error;
use crate::fock::{
    geometric_ratio, mean_total_photons, second_moment_total_photons, QuantumState,
    TwoModePureState,
};
use crate::metrology::{
    default_step, error_propagation, error_propagation_sampled, error_propagation_stencil,
    limits_for_state, qcrb, qfi_pure, qfi_sector_mixture, LimitsReport,
};
use crate::optics::{sweep, Readout};
use crate::states::{coherent_vacuum, tmsv, twin_fock, vacuum_mixed_twin_fock, TmsvParams};

const PI: f64 = std::f64::consts::PI;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Analytic,
    Simulation,
    Both,
}

impl Engine {
    fn analytic(self) -> bool {
        self != Engine::Simulation
    }

    fn simulation(self) -> bool {
        self != Engine::Analytic
    }

    fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Simulation => "simulation",
            Engine::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Signal,
    Sensitivity,
    Limits,
    RhoSweep,
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Signal => "signal",
            Command::Sensitivity => "sensitivity",
            Command::Limits => "limits",
            Command::RhoSweep => "rho-sweep",
            Command::Validate => "validate",
        }
    }
}

/// Closed interval written `A:B`. Endpoints are numbers or `pi`, `-pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span(pub f64, pub f64);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let endpoint = |t: &str| -> Result<f64, String> {
            match t.trim() {
                "pi" => Ok(PI),
                "-pi" => Ok(-PI),
                other => other
                    .parse::<f64>()
                    .map_err(|_| format!("'{other}' is not a number")),
            }
        };
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected A:B, got '{s}'"))?;
        Ok(Span(endpoint(a)?, endpoint(b)?))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mzi-parity",
    version,
    about = "Parity-detection phase estimation in a Mach-Zehnder interferometer"
)]
pub struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Parity and intensity signals against phase
    Signal(SignalArgs),
    /// Phase uncertainty at the origin against mean photon number
    Sensitivity(SensitivityArgs),
    /// Shot-noise, Heisenberg, Hofmann and Cramer-Rao limits per input state
    Limits(LimitsArgs),
    /// Sensitivity of the vacuum-diluted twin Fock state against dilution angle
    RhoSweep(RhoArgs),
    /// Compare the Fock-space simulation with every closed form
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Truncation tolerance: probability mass allowed outside the kept sectors
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Engine::Analytic)]
    engine: Engine,
    /// Output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SignalArgs {
    /// Mean photon number of the squeezed vacuum
    #[arg(long, default_value_t = 10.0)]
    nbar: f64,
    /// Mean photon number of the coherent state
    #[arg(long, default_value_t = 100.0)]
    nbar_coherent: f64,
    /// Phase range A:B [default: -pi:pi]
    #[arg(long, allow_hyphen_values = true)]
    phi_range: Option<Span>,
    /// Number of phase samples [default: 2001]
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    /// Largest integer mean photon number in the sweep
    #[arg(long, default_value_t = 100)]
    nbar_max: usize,
    /// Also emit uncertainty against phase for squeezed vacuum 5 and 25 and coherent 25
    #[arg(long)]
    phi_sweep: bool,
    /// Phase range of the phase sweep [default: -1:1]
    #[arg(long, allow_hyphen_values = true)]
    phi_range: Option<Span>,
    /// Samples in the phase sweep [default: 201]
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct LimitsArgs {
    /// Mean photon number of the squeezed vacuum
    #[arg(long, default_value_t = 10.0)]
    nbar: f64,
    /// Mean photon number of the coherent state [default: --nbar]
    #[arg(long)]
    nbar_coherent: Option<f64>,
    /// Photons per mode of the twin Fock state
    #[arg(long, default_value_t = 2)]
    fock_n: usize,
    /// Dilution angle of the mixed state
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    theta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RhoArgs {
    /// Photons per mode [default: blocks for 2 and 5]
    #[arg(long)]
    fock_n: Option<usize>,
    /// Dilution angle range A:B [default: 0:1.45]
    #[arg(long, allow_hyphen_values = true)]
    theta_range: Option<Span>,
    /// Number of angle samples [default: 146]
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Truncation tolerance; comparisons widen with the truncated mass
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    /// Output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub mean_photons: f64,
    pub mean_photons_coherent: f64,
    pub nbar_max: usize,
    pub fock_n: Vec<usize>,
    pub theta: f64,
    /// Abscissa grid: phase for `signal` and the phase sweep, angle for `rho-sweep`.
    pub grid: Option<PhaseGrid>,
    pub epsilon: f64,
    pub engine: Engine,
    pub output_path: Option<PathBuf>,
    pub phi_sweep: bool,
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn grid(span: Option<Span>, default: Span, samples: Option<usize>, default_samples: usize) -> Result<PhaseGrid, CliError> {
    let Span(a, b) = span.unwrap_or(default);
    PhaseGrid::new(a, b, samples.unwrap_or(default_samples)).map_err(usage)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    fn base(command: Command, epsilon: f64, engine: Engine, out: Option<PathBuf>) -> Result<Self, CliError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(CliError::Usage(format!("--epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self {
            command,
            mean_photons: 10.0,
            mean_photons_coherent: 100.0,
            nbar_max: 100,
            fock_n: vec![2, 5],
            theta: 0.5,
            grid: None,
            epsilon,
            engine,
            output_path: out,
            phi_sweep: false,
        })
    }

    /// Applies defaults and checks every invariant; failures are usage errors.
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        match cli.command {
            CommandArgs::Signal(a) => {
                let c = a.common;
                let mut cfg = Self::base(Command::Signal, c.epsilon, c.engine, c.out)?;
                cfg.mean_photons = positive("nbar", a.nbar)?;
                cfg.mean_photons_coherent = positive("nbar-coherent", a.nbar_coherent)?;
                cfg.grid = Some(grid(a.phi_range, Span(-PI, PI), a.samples, 2001)?);
                Ok(cfg)
            }
            CommandArgs::Sensitivity(a) => {
                let c = a.common;
                let mut cfg = Self::base(Command::Sensitivity, c.epsilon, c.engine, c.out)?;
                if a.nbar_max < 1 {
                    return Err(CliError::Usage("--nbar-max must be at least 1".into()));
                }
                cfg.nbar_max = a.nbar_max;
                cfg.phi_sweep = a.phi_sweep;
                if a.phi_sweep {
                    cfg.grid = Some(grid(a.phi_range, Span(-1.0, 1.0), a.samples, 201)?);
                } else if a.phi_range.is_some() || a.samples.is_some() {
                    return Err(CliError::Usage(
                        "--phi-range and --samples need --phi-sweep".into(),
                    ));
                }
                Ok(cfg)
            }
            CommandArgs::Limits(a) => {
                let c = a.common;
                let mut cfg = Self::base(Command::Limits, c.epsilon, c.engine, c.out)?;
                cfg.mean_photons = positive("nbar", a.nbar)?;
                cfg.mean_photons_coherent =
                    positive("nbar-coherent", a.nbar_coherent.unwrap_or(a.nbar))?;
                if a.fock_n < 1 {
                    return Err(CliError::Usage("--fock-n must be at least 1".into()));
                }
                cfg.fock_n = vec![a.fock_n];
                if !a.theta.is_finite() || a.theta.cos().abs() < 1e-12 {
                    return Err(CliError::Usage(format!(
                        "--theta {} leaves only vacuum",
                        a.theta
                    )));
                }
                cfg.theta = a.theta;
                Ok(cfg)
            }
            CommandArgs::RhoSweep(a) => {
                let c = a.common;
                let mut cfg = Self::base(Command::RhoSweep, c.epsilon, c.engine, c.out)?;
                if let Some(n) = a.fock_n {
                    if n < 1 {
                        return Err(CliError::Usage("--fock-n must be at least 1".into()));
                    }
                    cfg.fock_n = vec![n];
                }
                cfg.grid = Some(grid(a.theta_range, Span(0.0, 1.45), a.samples, 146)?);
                Ok(cfg)
            }
            CommandArgs::Validate(a) => Self::base(Command::Validate, a.epsilon, Engine::Both, a.out),
        }
    }

    /// The `# key=value ...` line that opens every output.
    pub fn header(&self) -> String {
        let mut h = format!("# command={}", self.command.name());
        let mut kv = |k: &str, v: String| {
            let _ = write!(h, " {k}={v}");
        };
        match self.command {
            Command::Signal => {
                kv("nbar", num(self.mean_photons));
                kv("nbar_coherent", num(self.mean_photons_coherent));
            }
            Command::Sensitivity => {
                kv("nbar_min", "1".into());
                kv("nbar_max", self.nbar_max.to_string());
                kv("phi_sweep", self.phi_sweep.to_string());
            }
            Command::Limits => {
                kv("nbar", num(self.mean_photons));
                kv("nbar_coherent", num(self.mean_photons_coherent));
                kv("fock_n", self.fock_n[0].to_string());
                kv("theta", num(self.theta));
            }
            Command::RhoSweep => {
                let ns: Vec<String> = self.fock_n.iter().map(|n| n.to_string()).collect();
                kv("fock_n", ns.join(","));
            }
            Command::Validate => {}
        }
        if let Some(g) = self.grid {
            let var = if self.command == Command::RhoSweep { "theta" } else { "phi" };
            kv(&format!("{var}_start"), num(g.start()));
            kv(&format!("{var}_stop"), num(g.stop()));
            kv("samples", g.count().to_string());
        }
        kv("epsilon", format!("{:e}", self.epsilon));
        if self.command != Command::Validate {
            kv("engine", self.engine.name().into());
        }
        h
    }
}

/// Result of a run: CSV text and whether every check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub passed: bool,
}

/// Round-trip number formatting; exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Default)]
struct Csv {
    text: String,
}

impl Csv {
    fn line(&mut self, s: &str) {
        self.text.push_str(s);
        self.text.push('\n');
    }

    fn comment(&mut self, s: &str) {
        self.line(&format!("# {s}"));
    }

    fn header(&mut self, cols: &[String]) {
        self.line(&cols.join(","));
    }

    fn row(&mut self, cells: &[Option<f64>]) {
        let cells: Vec<String> = cells.iter().map(|c| c.map(num).unwrap_or_default()).collect();
        self.line(&cells.join(","));
    }
}

fn max_abs_deviation(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    pairs.into_iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Runs the configured command.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut csv = Csv::default();
    csv.line(&cfg.header());
    let passed = match cfg.command {
        Command::Signal => cmd_signal(cfg, &mut csv).map(|_| true)?,
        Command::Sensitivity => cmd_sensitivity(cfg, &mut csv).map(|_| true)?,
        Command::Limits => cmd_limits(cfg, &mut csv).map(|_| true)?,
        Command::RhoSweep => cmd_rho_sweep(cfg, &mut csv).map(|_| true)?,
        Command::Validate => cmd_validate(cfg, &mut csv),
    };
    Ok(Report {
        csv: csv.text,
        passed,
    })
}

fn cmd_signal(cfg: &RunConfig, csv: &mut Csv) -> Result<(), Error> {
    let phis = cfg.grid.expect("signal grid").points();
    let (nt, nc) = (cfg.mean_photons, cfg.mean_photons_coherent);
    let names = ["parity_tmsv", "parity_coherent", "intensity_coherent_scaled"];

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut header = vec!["phi".to_string()];
    if cfg.engine.analytic() {
        columns.push(phis.iter().map(|&p| parity_tmsv(nt, p)).collect::<Result<_, _>>()?);
        columns.push(phis.iter().map(|&p| parity_coherent(nc, p)).collect());
        columns.push(phis.iter().map(|&p| intensity_difference_coherent(nc, p) / nc).collect());
        header.extend(names.iter().map(|s| s.to_string()));
    }
    if cfg.engine.simulation() {
        let squeezed = tmsv(nt, cfg.epsilon)?;
        columns.push(sweep(&squeezed, &phis, &[Readout::Parity])?.remove(0));
        let coherent = coherent_vacuum(nc, cfg.epsilon)?;
        let mut c = sweep(&coherent, &phis, &[Readout::RawParity, Readout::IntensityDifference])?;
        let intensity = c.pop().expect("two readouts");
        columns.push(c.pop().expect("two readouts"));
        columns.push(intensity.iter().map(|d| d / nc).collect());
        let suffix = if cfg.engine == Engine::Both { "_sim" } else { "" };
        header.extend(names.iter().map(|s| format!("{s}{suffix}")));
    }
    csv.header(&header);
    for (i, &phi) in phis.iter().enumerate() {
        let mut row = vec![Some(phi)];
        row.extend(columns.iter().map(|c| Some(c[i])));
        csv.row(&row);
    }
    if cfg.engine == Engine::Both {
        let devs: Vec<f64> = (0..3)
            .map(|k| max_abs_deviation(columns[k].iter().copied().zip(columns[k + 3].iter().copied())))
            .collect();
        let overall = devs.iter().copied().fold(0.0, f64::max);
        csv.comment(&format!(
            "max_abs_deviation={} {}={} {}={} {}={}",
            num(overall),
            names[0],
            num(devs[0]),
            names[1],
            num(devs[1]),
            names[2],
            num(devs[2])
        ));
    }
    Ok(())
}

/// Error-propagation uncertainty of a simulated readout at each of `phis`,
/// evaluated in a single pass over the state's sectors.
fn simulated_sensitivities<S: QuantumState + ?Sized>(
    state: &S,
    phis: &[f64],
    step: f64,
    readout: Readout,
) -> Result<Vec<Result<f64, Error>>, Error> {
    let stencils: Vec<Vec<f64>> = phis.iter().map(|&p| error_propagation_stencil(p, step)).collect();
    // Condition on the kept sectors: a truncated state's readout peaks at the
    // retained probability rather than 1, which would make every extremum
    // look like a divergence.
    let retained: f64 = state
        .weighted_components()
        .iter()
        .map(|(w, s)| w * s.norm_squared())
        .sum();
    let values: Vec<f64> = sweep(state, &stencils.concat(), &[readout])?
        .remove(0)
        .into_iter()
        .map(|v| v / retained)
        .collect();
    let mut offset = 0;
    Ok(phis
        .iter()
        .zip(&stencils)
        .map(|(&phi, stencil)| {
            let chunk = values[offset..offset + stencil.len()].to_vec();
            offset += stencil.len();
            error_propagation_sampled(|_| Ok(chunk), phi, step)
        })
        .collect())
}

fn limits_row(l: &LimitsReport) -> [Option<f64>; 4] {
    [l.qcrb, Some(l.snl), Some(l.hl), Some(l.hofmann)]
}

fn cmd_sensitivity(cfg: &RunConfig, csv: &mut Csv) -> Result<(), Error> {
    let mut header: Vec<String> = ["n_bar", "delta_phi_parity", "qcrb", "snl", "hl", "hofmann"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if cfg.engine == Engine::Both {
        header.extend(["delta_phi_parity_sim".to_string(), "qcrb_sim".to_string()]);
    }
    csv.header(&header);
    let mut deviation = 0.0f64;
    for k in 1..=cfg.nbar_max {
        let nbar = k as f64;
        let analytic = || -> Result<Vec<Option<f64>>, Error> {
            let delta = sensitivity_tmsv(nbar, 0.0)?;
            let mut l = limits(nbar, second_moment_tmsv(nbar))?;
            l.qcrb = Some(qcrb(qfi_tmsv(nbar))?);
            let mut row = vec![Some(nbar), Some(delta)];
            row.extend(limits_row(&l));
            Ok(row)
        };
        // The parity readout at phi equals mu_AB between the splitters, which
        // needs one splitter pass per sector instead of one per phase.
        let simulated = || -> Result<Vec<Option<f64>>, Error> {
            let state = tmsv(nbar, cfg.epsilon)?;
            let delta =
                simulated_sensitivities(&state, &[0.0], default_step(nbar), Readout::MuAb)?.remove(0)?;
            let l = limits_for_state(&state, qfi_pure(&state)?)?;
            let mut row = vec![Some(nbar), Some(delta)];
            row.extend(limits_row(&l));
            Ok(row)
        };
        let row = match cfg.engine {
            Engine::Analytic => analytic(),
            Engine::Simulation => simulated(),
            Engine::Both => analytic().and_then(|mut a| {
                let s = simulated()?;
                for (x, y) in [(a[1], s[1]), (a[2], s[2])] {
                    deviation = deviation.max((x.unwrap() - y.unwrap()).abs());
                }
                a.extend([s[1], s[2]]);
                Ok(a)
            }),
        };
        match row {
            Ok(r) => csv.row(&r),
            Err(e) => csv.comment(&format!("warning: n_bar={} skipped: {e}", num(nbar))),
        }
    }
    if cfg.engine == Engine::Both {
        csv.comment(&format!("max_abs_deviation={}", num(deviation)));
    }

    if cfg.phi_sweep {
        let phis = cfg.grid.expect("phase sweep grid").points();
        csv.comment("block=phase_sweep");
        let cases: [(&str, f64); 3] = [("tmsv_5", 5.0), ("tmsv_25", 25.0), ("coherent_25", 25.0)];
        let mut header = vec!["phi".to_string()];
        let mut columns: Vec<Vec<Result<f64, Error>>> = Vec::new();
        if cfg.engine.analytic() {
            header.extend(cases.iter().map(|(n, _)| format!("delta_phi_{n}")));
            columns.push(phis.iter().map(|&p| sensitivity_tmsv(5.0, p)).collect());
            columns.push(phis.iter().map(|&p| sensitivity_tmsv(25.0, p)).collect());
            columns.push(
                phis.iter()
                    .map(|&p| error_propagation(|x| parity_coherent(25.0, x), p, default_step(25.0)))
                    .collect(),
            );
        }
        if cfg.engine.simulation() {
            let suffix = if cfg.engine == Engine::Both { "_sim" } else { "" };
            header.extend(cases.iter().map(|(n, _)| format!("delta_phi_{n}{suffix}")));
            for nbar in [5.0, 25.0] {
                let state = tmsv(nbar, cfg.epsilon)?;
                columns.push(simulated_sensitivities(&state, &phis, default_step(nbar), Readout::MuAb)?);
            }
            let coherent = coherent_vacuum(25.0, cfg.epsilon)?;
            columns.push(simulated_sensitivities(
                &coherent,
                &phis,
                default_step(25.0),
                Readout::RawParity,
            )?);
        }
        csv.header(&header);
        let mut deviation = 0.0f64;
        for (i, &phi) in phis.iter().enumerate() {
            match columns.iter().map(|c| c[i].clone()).collect::<Result<Vec<f64>, Error>>() {
                Ok(values) => {
                    if cfg.engine == Engine::Both {
                        for k in 0..3 {
                            let rel = (values[k] - values[k + 3]).abs() / values[k];
                            deviation = deviation.max(rel);
                        }
                    }
                    let mut row = vec![Some(phi)];
                    row.extend(values.into_iter().map(Some));
                    csv.row(&row);
                }
                Err(e) => csv.comment(&format!("warning: phi={} skipped: {e}", num(phi))),
            }
        }
        if cfg.engine == Engine::Both {
            csv.comment(&format!("max_rel_deviation={}", num(deviation)));
        }
    }
    Ok(())
}

fn cmd_rho_sweep(cfg: &RunConfig, csv: &mut Csv) -> Result<(), Error> {
    let thetas = cfg.grid.expect("angle grid").points();
    for &n in &cfg.fock_n {
        csv.comment(&format!("block=fock_n={n}"));
        let mut header: Vec<String> = ["theta", "delta_phi_parity", "qcrb", "hl", "hofmann"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if cfg.engine == Engine::Both {
            header.extend(["delta_phi_parity_sim".to_string(), "qcrb_sim".to_string()]);
        }
        csv.header(&header);
        let twin_mean = 2.0 * n as f64;
        let mut deviation = 0.0f64;
        for &theta in &thetas {
            let analytic = || -> Result<[f64; 4], Error> {
                let delta = sensitivity_rho_parity(n, theta)?;
                let c2 = theta.cos().powi(2);
                let l = limits(twin_mean * c2, second_moment_rho(n, theta))?;
                Ok([delta, qcrb(qfi_rho(n, theta))?, l.hl, l.hofmann])
            };
            let simulated = || -> Result<[f64; 4], Error> {
                let rho = vacuum_mixed_twin_fock(n, theta)?;
                let delta = simulated_sensitivities(&rho, &[0.0], default_step(twin_mean), Readout::Parity)?
                    .remove(0)?;
                let l = limits_for_state(&rho, qfi_sector_mixture(&rho)?)?;
                Ok([delta, l.qcrb.expect("set by limits_for_state"), l.hl, l.hofmann])
            };
            let row: Result<Vec<f64>, Error> = match cfg.engine {
                Engine::Analytic => analytic().map(Vec::from),
                Engine::Simulation => simulated().map(Vec::from),
                Engine::Both => analytic().and_then(|a| {
                    let s = simulated()?;
                    deviation = deviation.max((a[0] - s[0]).abs()).max((a[1] - s[1]).abs());
                    let mut row = Vec::from(a);
                    row.extend([s[0], s[1]]);
                    Ok(row)
                }),
            };
            match row {
                Ok(r) => {
                    let mut cells = vec![Some(theta)];
                    cells.extend(r.into_iter().map(Some));
                    csv.row(&cells);
                }
                Err(e) => csv.comment(&format!("warning: theta={} skipped: {e}", num(theta))),
            }
        }
        if cfg.engine == Engine::Both {
            csv.comment(&format!("max_abs_deviation={}", num(deviation)));
        }
    }
    Ok(())
}

/// `(state, mean, second moment, report)` for one input and engine.
type LimitsRow = (&'static str, f64, f64, LimitsReport);

fn analytic_limits(cfg: &RunConfig) -> Result<Vec<LimitsRow>, Error> {
    let (nt, nc, n, theta) = (cfg.mean_photons, cfg.mean_photons_coherent, cfg.fock_n[0], cfg.theta);
    let twin_mean = 2.0 * n as f64;
    let c2 = theta.cos().powi(2);
    let entries: [(&'static str, f64, f64, f64, Option<f64>); 4] = [
        ("tmsv", nt, second_moment_tmsv(nt), qfi_tmsv(nt), None),
        ("coherent", nc, second_moment_coherent(nc), qfi_coherent(nc), None),
        ("twin_fock", twin_mean, twin_mean * twin_mean, qfi_twin_fock(n), Some(1.0 / twin_mean)),
        ("rho", twin_mean * c2, second_moment_rho(n, theta), qfi_rho(n, theta), Some(1.0 / twin_mean)),
    ];
    entries
        .into_iter()
        .map(|(name, m1, m2, f, max_photon)| {
            let mut l = limits(m1, m2)?;
            l.qcrb = Some(qcrb(f)?);
            l.max_photon_limit = max_photon;
            Ok((name, m1, m2, l))
        })
        .collect()
}

fn simulated_limits(cfg: &RunConfig) -> Result<Vec<LimitsRow>, Error> {
    fn row<S: QuantumState + ?Sized>(name: &'static str, s: &S, f: f64) -> Result<LimitsRow, Error> {
        Ok((
            name,
            mean_total_photons(s)?,
            second_moment_total_photons(s)?,
            limits_for_state(s, f)?,
        ))
    }
    let squeezed = tmsv(cfg.mean_photons, cfg.epsilon)?;
    let coherent = coherent_vacuum(cfg.mean_photons_coherent, cfg.epsilon)?;
    let twin = twin_fock(cfg.fock_n[0]);
    let rho = vacuum_mixed_twin_fock(cfg.fock_n[0], cfg.theta)?;
    Ok(vec![
        row("tmsv", &squeezed, qfi_pure(&squeezed)?)?,
        row("coherent", &coherent, qfi_pure(&coherent)?)?,
        row("twin_fock", &twin, qfi_pure(&twin)?)?,
        row("rho", &rho, qfi_sector_mixture(&rho)?)?,
    ])
}

fn cmd_limits(cfg: &RunConfig, csv: &mut Csv) -> Result<(), Error> {
    csv.line("state,engine,n_bar,second_moment,snl,hl,hofmann,qcrb,max_photon_limit");
    let analytic = if cfg.engine.analytic() { Some(analytic_limits(cfg)?) } else { None };
    let simulated = if cfg.engine.simulation() { Some(simulated_limits(cfg)?) } else { None };
    let emit = |csv: &mut Csv, engine: &str, (name, m1, m2, l): &LimitsRow| {
        let cells = [Some(*m1), Some(*m2), Some(l.snl), Some(l.hl), Some(l.hofmann), l.qcrb, l.max_photon_limit];
        let cells: Vec<String> = cells.iter().map(|c| c.map(num).unwrap_or_default()).collect();
        csv.line(&format!("{name},{engine},{}", cells.join(",")));
    };
    let mut deviation = 0.0f64;
    for i in 0..4 {
        if let Some(a) = &analytic {
            emit(csv, "analytic", &a[i]);
        }
        if let Some(s) = &simulated {
            emit(csv, "simulation", &s[i]);
        }
        if let (Some(a), Some(s)) = (&analytic, &simulated) {
            let (la, ls) = (&a[i].3, &s[i].3);
            for (x, y) in [(la.snl, ls.snl), (la.hl, ls.hl), (la.hofmann, ls.hofmann)] {
                deviation = deviation.max((x - y).abs());
            }
            if let (Some(x), Some(y)) = (la.qcrb, ls.qcrb) {
                deviation = deviation.max((x - y).abs());
            }
        }
    }
    if cfg.engine == Engine::Both {
        csv.comment(&format!("max_abs_deviation={}", num(deviation)));
    }
    Ok(())
}

/// One comparison of the validation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Set when the comparison could not be carried out.
    pub error: Option<String>,
}

impl Check {
    fn new(name: &'static str, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            max_deviation,
            tolerance,
            error: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.max_deviation <= self.tolerance
    }
}

/// Bound on how far a truncated state's second-order photon-number moments
/// can sit from the untruncated ones, from the weight of the outermost kept
/// sector and the discarded tail.
fn moment_slack(state: &TwoModePureState) -> f64 {
    let top = state.max_occupied_sector().unwrap_or(0);
    let edge = state.sector(top).map_or(0.0, |s| s.norm_squared());
    8.0 * ((top + 1) as f64).powi(2) * (edge + state.tail_mass())
}

type Block<'a> = (&'static str, Box<dyn Fn() -> Result<Vec<Check>, Error> + 'a>);

/// Runs every comparison at truncation tolerance `epsilon`. A comparison that
/// errors is reported as a failed check carrying the error.
pub fn validation_checks(epsilon: f64) -> Vec<Check> {
    let phis = PhaseGrid::new(-PI, PI, 201).expect("valid grid").points();
    let phis = &phis;
    let means = [1.0, 5.0, 10.0];

    let blocks: Vec<Block> = vec![
        ("tmsv_series_vs_closed_form", Box::new(move || {
            let (mut dev, mut tol) = (0.0f64, 0.0f64);
            for &nbar in &means {
                let params = TmsvParams::new(nbar, epsilon)?;
                let tail = geometric_ratio(nbar).powf((params.cutoff() + 1) as f64);
                for &phi in phis {
                    let series = parity_tmsv_series(nbar, phi + PI / 2.0, params.cutoff())?;
                    dev = dev.max((series - parity_tmsv(nbar, phi)?).abs());
                }
                tol = tol.max(1e-8 + 2.0 * tail);
            }
            Ok(vec![Check::new("tmsv_series_vs_closed_form", dev, tol)])
        })),
        ("tmsv_parity_simulation_vs_closed_form", Box::new(move || {
            let (mut dev, mut tol, mut flat) = (0.0f64, 0.0f64, 0.0f64);
            for &nbar in &means {
                let state = tmsv(nbar, epsilon)?;
                let r = sweep(&state, phis, &[Readout::Parity, Readout::IntensityDifference])?;
                for (i, &phi) in phis.iter().enumerate() {
                    dev = dev.max((r[0][i] - parity_tmsv(nbar, phi)?).abs());
                    flat = flat.max(r[1][i].abs());
                }
                tol = tol.max(1e-7 + 2.0 * state.tail_mass());
            }
            Ok(vec![
                Check::new("tmsv_parity_simulation_vs_closed_form", dev, tol),
                Check::new("tmsv_intensity_difference_vanishes", flat, 1e-10),
            ])
        })),
        ("twin_fock_parity_vs_legendre", Box::new(move || {
            let mut dev = 0.0f64;
            for n in 0..=30 {
                let r = sweep(&twin_fock(n), phis, &[Readout::RawParity])?;
                dev = dev.max(max_abs_deviation(
                    phis.iter().zip(&r[0]).map(|(&p, &v)| (v, parity_twin_fock(n, p))),
                ));
            }
            Ok(vec![Check::new("twin_fock_parity_vs_legendre", dev, 1e-10)])
        })),
        ("coherent_simulation_vs_closed_form", Box::new(move || {
            let (mut dev_p, mut tol_p, mut dev_i, mut tol_i) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for &nbar in &means {
                let state = coherent_vacuum(nbar, epsilon)?;
                let r = sweep(&state, phis, &[Readout::RawParity, Readout::IntensityDifference])?;
                for (i, &phi) in phis.iter().enumerate() {
                    dev_p = dev_p.max((r[0][i] - parity_coherent(nbar, phi)).abs());
                    dev_i = dev_i.max((r[1][i] - intensity_difference_coherent(nbar, phi)).abs());
                }
                let top = state.max_occupied_sector().unwrap_or(0);
                let edge = state.sector(top).map_or(0.0, |s| s.norm_squared());
                tol_p = tol_p.max(1e-8 + 2.0 * state.tail_mass());
                // Missing intensity is sum_{n > top} n p_n = nbar P(n >= top).
                tol_i = tol_i.max(1e-8 * nbar + nbar * (edge + state.tail_mass()));
            }
            Ok(vec![
                Check::new("coherent_parity_simulation_vs_closed_form", dev_p, tol_p),
                Check::new("coherent_intensity_simulation_vs_closed_form", dev_i, tol_i),
            ])
        })),
        ("parity_mu_ab_equivalence", Box::new(move || {
            let inputs = [tmsv(5.0, epsilon)?, twin_fock(3), coherent_vacuum(5.0, epsilon)?];
            let mut dev = 0.0f64;
            for s in &inputs {
                let r = sweep(s, phis, &[Readout::Parity, Readout::MuAb])?;
                dev = dev.max(max_abs_deviation(r[0].iter().copied().zip(r[1].iter().copied())));
            }
            Ok(vec![Check::new("parity_mu_ab_equivalence", dev, 1e-10)])
        })),
        ("qfi_pure_states", Box::new(move || {
            let (mut dev_c, mut tol_c, mut dev_t, mut tol_t) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for nbar in [1.0, 5.0, 10.0, 25.0] {
                let c = coherent_vacuum(nbar, epsilon)?;
                dev_c = dev_c.max((qfi_pure(&c)? - qfi_coherent(nbar)).abs());
                tol_c = tol_c.max(1e-6 + moment_slack(&c));
                let t = tmsv(nbar, epsilon)?;
                dev_t = dev_t.max((qfi_pure(&t)? - qfi_tmsv(nbar)).abs());
                tol_t = tol_t.max(1e-5 + moment_slack(&t));
            }
            let mut dev_f = 0.0f64;
            for n in 0..=20 {
                dev_f = dev_f.max((qfi_pure(&twin_fock(n))? - qfi_twin_fock(n)).abs());
            }
            Ok(vec![
                Check::new("qfi_coherent", dev_c, tol_c),
                Check::new("qfi_tmsv", dev_t, tol_t),
                Check::new("qfi_twin_fock", dev_f, 1e-10),
            ])
        })),
        ("rho_checks", Box::new(move || {
            let thetas = PhaseGrid::new(0.0, 1.45, 30)?.points();
            let (mut dev_q, mut dev_s) = (0.0f64, 0.0f64);
            for n in [2usize, 5] {
                for &theta in &thetas {
                    let rho = vacuum_mixed_twin_fock(n, theta)?;
                    dev_q = dev_q.max((qfi_sector_mixture(&rho)? - qfi_rho(n, theta)).abs());
                    let step = default_step(2.0 * n as f64);
                    let sim = simulated_sensitivities(&rho, &[0.0], step, Readout::Parity)?.remove(0)?;
                    dev_s = dev_s.max((sim - sensitivity_rho_parity(n, theta)?).abs());
                }
            }
            Ok(vec![
                Check::new("qfi_rho", dev_q, 1e-10),
                Check::new("rho_parity_sensitivity", dev_s, 1e-5),
            ])
        })),
        ("tmsv_parity_saturates_qcrb", Box::new(move || {
            let (mut dev, mut tol) = (0.0f64, 0.0f64);
            for &nbar in &means {
                let state = tmsv(nbar, epsilon)?;
                let sim = simulated_sensitivities(&state, &[0.0], default_step(nbar), Readout::Parity)?
                    .remove(0)?;
                let exact = qfi_tmsv(nbar).sqrt().recip();
                dev = dev.max((sim - exact).abs() / exact);
                tol = tol.max(1e-6 + moment_slack(&state) / qfi_tmsv(nbar));
            }
            Ok(vec![Check::new("tmsv_parity_saturates_qcrb", dev, tol)])
        })),
        ("photon_number_moments", Box::new(move || {
            let (mut dev, mut tol) = (0.0f64, 0.0f64);
            for &nbar in &means {
                for (s, m2) in [
                    (tmsv(nbar, epsilon)?, second_moment_tmsv(nbar)),
                    (coherent_vacuum(nbar, epsilon)?, second_moment_coherent(nbar)),
                ] {
                    dev = dev
                        .max((mean_total_photons(&s)? - nbar).abs())
                        .max((second_moment_total_photons(&s)? - m2).abs());
                    tol = tol.max(1e-8 + moment_slack(&s));
                }
            }
            Ok(vec![Check::new("photon_number_moments", dev, tol)])
        })),
    ];

    blocks
        .into_iter()
        .flat_map(|(name, block)| match block() {
            Ok(checks) => checks
                .into_iter()
                .map(|mut c| {
                    // NaN deviations must fail.
                    if c.max_deviation.is_nan() {
                        c.max_deviation = f64::INFINITY;
                    }
                    c
                })
                .collect(),
            Err(e) => vec![Check {
                name,
                max_deviation: f64::INFINITY,
                tolerance: 0.0,
                error: Some(e.to_string()),
            }],
        })
        .collect()
}

fn cmd_validate(cfg: &RunConfig, csv: &mut Csv) -> bool {
    csv.line("check,status,max_deviation,tolerance");
    let checks = validation_checks(cfg.epsilon);
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        csv.line(&format!("{},{status},{},{}", c.name, num(c.max_deviation), num(c.tolerance)));
        if let Some(e) = &c.error {
            csv.comment(&format!("error: {}: {e}", c.name));
        }
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    csv.comment(&format!("passed={} failed={failed}", checks.len() - failed));
    failed == 0
}

/// Parses `args`, runs the command, writes the CSV and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let report = run(&cfg)?;
        match &cfg.output_path {
            Some(p) => std::fs::write(p, &report.csv)?,
            None => {
                use std::io::Write;
                std::io::stdout().lock().write_all(report.csv.as_bytes())?;
            }
        }
        Ok(report.passed)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
