//! Phase-estimation machinery: error-propagation sensitivity of a signal,
//! quantum Fisher information of simulated states, and the resulting bounds.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fock::{
    check_normalized, mean_total_photons, second_moment_total_photons, MixtureState,
    QuantumState, TwoModePureState,
};
use crate::optics::SectorBeamSplitter;

/// `1 - S^2` below this is treated as a signal extremum, where the
/// error-propagation ratio is 0/0 and is evaluated as a limit.
const STATIONARY_THRESHOLD: f64 = 1e-8;

/// Offset (in units of the derivative step) of the points used to take the
/// limit at a signal extremum.
const LIMIT_OFFSET_FACTOR: f64 = 1e3;

/// Slopes below this carry no phase information.
const MIN_SLOPE: f64 = 1e-14;

/// Phase-uncertainty benchmarks for one input state, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitsReport {
    /// Shot-noise limit `1/sqrt(<n>)`.
    pub snl: f64,
    /// Heisenberg limit `1/<n>`.
    pub hl: f64,
    /// Hofmann limit `1/sqrt(<n^2>)`.
    pub hofmann: f64,
    /// Quantum Cramer-Rao bound `1/sqrt(F_Q)`, when a Fisher information is known.
    pub qcrb: Option<f64>,
    /// `1/N` for the largest photon number `N` present; only for states with
    /// finite support.
    pub max_photon_limit: Option<f64>,
}

/// Sampled phase signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCurve {
    abscissae: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl SignalCurve {
    pub fn new(label: impl Into<String>, abscissae: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if abscissae.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} phases but {} values",
                abscissae.len(),
                values.len()
            )));
        }
        if abscissae.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("phases must be strictly increasing".into()));
        }
        Ok(Self {
            abscissae,
            values,
            label: label.into(),
        })
    }

    /// Evaluates `signal` at every phase.
    pub fn sample<F>(label: impl Into<String>, phases: &[f64], signal: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let values = phases.iter().map(|&p| signal(p)).collect::<Result<Vec<_>>>()?;
        Self::new(label, phases.to_vec(), values)
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_deviation(&self, other: &SignalCurve) -> Result<f64> {
        if self.abscissae != other.abscissae {
            return Err(Error::Domain("curves sampled on different phases".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Error-propagation sensitivity at each sample from finite differences of
    /// the samples themselves; `None` where the sampled slope vanishes.
    pub fn sensitivities(&self) -> Vec<Option<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n.saturating_sub(1)));
                if hi == lo {
                    return None;
                }
                let slope = (self.values[hi] - self.values[lo])
                    / (self.abscissae[hi] - self.abscissae[lo]);
                let noise = (1.0 - self.values[i].powi(2)).max(0.0).sqrt();
                (slope.abs() >= MIN_SLOPE).then(|| noise / slope.abs())
            })
            .collect()
    }
}

/// Generator variance `4 Var(G)` of `state` after the first beam splitter,
/// with `G = (n_a - n_b)/2`.
pub fn qfi_pure(state: &TwoModePureState) -> Result<f64> {
    check_normalized(state)?;
    let mut mean = 0.0;
    let mut square = 0.0;
    for sector in state.sectors() {
        if sector.norm_squared() == 0.0 {
            continue;
        }
        let n = sector.total_photons();
        let rotated = SectorBeamSplitter::new(n)?.apply(sector.amplitudes());
        for (m, c) in rotated.iter().enumerate() {
            let g = (2.0 * m as f64 - n as f64) / 2.0;
            let p = c.norm_sqr();
            mean += p * g;
            square += p * g * g;
        }
    }
    Ok(4.0 * (square - mean * mean))
}

/// Fisher information of a classical mixture whose components live in
/// pairwise disjoint photon-number sectors: the weighted sum of the
/// component values.
pub fn qfi_sector_mixture(state: &MixtureState) -> Result<f64> {
    let mut seen = BTreeSet::new();
    for (_, component) in state.components() {
        for sector in component.sectors().filter(|s| s.norm_squared() > 0.0) {
            if !seen.insert(sector.total_photons()) {
                return Err(Error::UnsupportedMixture(format!(
                    "components overlap in sector N={}",
                    sector.total_photons()
                )));
            }
        }
    }
    state
        .components()
        .iter()
        .map(|(w, s)| Ok(w * qfi_pure(s)?))
        .sum()
}

/// Quantum Cramer-Rao bound `1/sqrt(F_Q)`.
pub fn qcrb(qfi: f64) -> Result<f64> {
    if !(qfi > 0.0) {
        return Err(Error::Degenerate(format!(
            "Fisher information {qfi} gives no phase information"
        )));
    }
    Ok(qfi.sqrt().recip())
}

/// Derivative step matched to the width `1/sqrt(nbar (nbar + 2))` of the
/// squeezed-vacuum parity peak, capped at `1e-5`.
pub fn default_step(mean_photons: f64) -> f64 {
    let width = (mean_photons * (mean_photons + 2.0)).sqrt().recip();
    1e-5 * width.min(1.0)
}

fn derivative_points(phi: f64, step: f64) -> [f64; 4] {
    [phi + step, phi - step, phi + 2.0 * step, phi - 2.0 * step]
}

fn limit_centers(phi: f64, step: f64) -> [f64; 4] {
    let h = LIMIT_OFFSET_FACTOR * step;
    [phi + h, phi - h, phi + 2.0 * h, phi - 2.0 * h]
}

fn central_derivative<F: Fn(f64) -> f64>(signal: &F, phi: f64, step: f64) -> f64 {
    let [p1, m1, p2, m2] = derivative_points(phi, step);
    let d1 = (signal(p1) - signal(m1)) / (2.0 * step);
    let d2 = (signal(p2) - signal(m2)) / (4.0 * step);
    (4.0 * d1 - d2) / 3.0
}

fn direct_sensitivity<F: Fn(f64) -> f64>(signal: &F, phi: f64, step: f64) -> Result<f64> {
    let value = signal(phi);
    let slope = central_derivative(signal, phi, step);
    if slope.abs() < MIN_SLOPE {
        return Err(Error::Divergence(format!("signal slope vanishes at phi = {phi}")));
    }
    Ok((1.0 - value * value).max(0.0).sqrt() / slope.abs())
}

/// Phase uncertainty `sqrt(1 - S^2) / |dS/dphi|` of a `+-1`-valued readout
/// with mean signal `S`.
///
/// The slope is a central difference of spacing `step`, Richardson-extrapolated
/// once. At an extremum of the signal (`1 - S^2` numerically zero) both
/// numerator and slope vanish; the value there is the limit obtained by
/// Richardson extrapolation of the symmetric average at `phi +- h` and
/// `phi +- 2h`, with `h = 1000 * step`.
pub fn error_propagation<F>(signal: F, phi: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("derivative step must be positive, got {step}")));
    }
    let value = signal(phi);
    if !(value.abs() <= 1.0 + 1e-9) {
        return Err(Error::Domain(format!(
            "signal {value} at phi = {phi} is outside [-1, 1]"
        )));
    }
    if 1.0 - value * value >= STATIONARY_THRESHOLD {
        return direct_sensitivity(&signal, phi, step);
    }
    let [p1, m1, p2, m2] = limit_centers(phi, step);
    let d1 = 0.5 * (direct_sensitivity(&signal, p1, step)? + direct_sensitivity(&signal, m1, step)?);
    let d2 = 0.5 * (direct_sensitivity(&signal, p2, step)? + direct_sensitivity(&signal, m2, step)?);
    Ok((4.0 * d1 - d2) / 3.0)
}

/// Every phase [`error_propagation`] may evaluate for this `phi` and `step`.
pub fn error_propagation_stencil(phi: f64, step: f64) -> Vec<f64> {
    let mut points = vec![phi];
    points.extend(derivative_points(phi, step));
    for c in limit_centers(phi, step) {
        points.push(c);
        points.extend(derivative_points(c, step));
    }
    points
}

/// [`error_propagation`] for signals that are cheaper to evaluate in batches:
/// `evaluate` receives the whole stencil once and returns the signal at each
/// point.
pub fn error_propagation_sampled<F>(evaluate: F, phi: f64, step: f64) -> Result<f64>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let points = error_propagation_stencil(phi, step);
    let values = evaluate(&points)?;
    if values.len() != points.len() {
        return Err(Error::Domain(format!(
            "{} signal values for {} stencil points",
            values.len(),
            points.len()
        )));
    }
    let table: BTreeMap<u64, f64> = points.iter().map(|p| p.to_bits()).zip(values).collect();
    error_propagation(
        |p| *table.get(&p.to_bits()).expect("stencil covers every evaluation point"),
        phi,
        step,
    )
}

/// Limits from the simulated photon-number moments of `state` together with
/// the bound from a supplied Fisher information.
pub fn limits_for_state<S: QuantumState + ?Sized>(state: &S, qfi: f64) -> Result<LimitsReport> {
    let mean = mean_total_photons(state)?;
    if !(mean > 0.0) {
        return Err(Error::Domain(format!("state has mean photon number {mean}")));
    }
    let second = second_moment_total_photons(state)?;
    let components = state.weighted_components();
    let finite_support = components.iter().all(|(_, s)| s.tail_mass() == 0.0);
    let max_photon_limit = if finite_support {
        components
            .iter()
            .filter_map(|(_, s)| s.max_occupied_sector())
            .max()
            .filter(|&n| n > 0)
            .map(|n| 1.0 / n as f64)
    } else {
        None
    };
    Ok(LimitsReport {
        snl: mean.sqrt().recip(),
        hl: mean.recip(),
        hofmann: second.sqrt().recip(),
        qcrb: Some(qcrb(qfi)?),
        max_photon_limit,
    })
}
