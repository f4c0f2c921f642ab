//! Mach-Zehnder interferometer and its detection observables.
//!
//! The 50-50 beam splitter is `U = exp(i pi/4 (a^dag b + a b^dag))`, the phase
//! shifter is `P = exp(-i phi G)` with `G = (n_a - n_b)/2`, and the
//! interferometer is `U P U`. In sector `N` the hopping generator is the real
//! symmetric tridiagonal matrix with `H[m+1, m] = sqrt((m+1)(N-m))`, so each
//! sector's splitter is `V diag(e^{i pi lambda/4}) V^T` from its eigenpairs.
//!
//! Two parity readouts are exposed. The raw readout is the mode-A parity after
//! the interferometer at phase `phi`. The shifted readout evaluates the raw one
//! at `phi + pi/2`; it coincides with the mode-exchange observable `mu_AB` on
//! the state between the splitters at `phi`, and is the one peaked at the
//! origin for twin-Fock-type inputs.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    check_normalized, expectation_diagonal, MixtureState, QuantumState, SectorVector,
    TwoModePureState,
};
use crate::tridiag;

/// Offset between the raw parity readout and the `mu_AB` readout.
pub const PARITY_OFFSET: f64 = FRAC_PI_2;

/// Beam-splitter unitary of one photon-number sector, kept in factored form.
#[derive(Debug, Clone)]
pub struct SectorBeamSplitter {
    total_photons: usize,
    /// Row-major eigenvectors of the hopping generator.
    vectors: Vec<f64>,
    phases: Vec<Complex64>,
}

impl SectorBeamSplitter {
    pub fn new(total_photons: usize) -> Result<Self> {
        let n = total_photons;
        let dim = n + 1;
        let diag = vec![0.0; dim];
        let off: Vec<f64> = (0..n).map(|m| (((m + 1) * (n - m)) as f64).sqrt()).collect();
        // The generator is 2 J_x for spin N/2, so its spectrum is exactly
        // -N, -N+2, ..., N. It only couples m to m +- 1, hence flipping the
        // sign of odd components maps the eigenvector of lambda to that of
        // -lambda, and only the upper half of the spectrum needs solving.
        let mut vectors = vec![0.0; dim * dim];
        for k in dim / 2..dim {
            let lambda = 2.0 * k as f64 - n as f64;
            let v = tridiag::eigenvector(&diag, &off, lambda, k as u64);
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NoConvergence(n));
            }
            let mirror = n - k;
            for (i, &x) in v.iter().enumerate() {
                vectors[i * dim + k] = x;
                vectors[i * dim + mirror] = if i % 2 == 0 { x } else { -x };
            }
        }
        let phases = (0..dim)
            .map(|k| Complex64::from_polar(1.0, FRAC_PI_4 * (2.0 * k as f64 - n as f64)))
            .collect();
        Ok(Self {
            total_photons,
            vectors,
            phases,
        })
    }

    pub fn total_photons(&self) -> usize {
        self.total_photons
    }

    /// Applies the unitary to a sector amplitude vector.
    pub fn apply(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        let dim = self.total_photons + 1;
        assert_eq!(amplitudes.len(), dim, "amplitude vector of wrong sector");
        // w = V^T v, split into real and imaginary parts.
        let mut w_re = vec![0.0; dim];
        let mut w_im = vec![0.0; dim];
        for (i, v) in amplitudes.iter().enumerate() {
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let row = &self.vectors[i * dim..(i + 1) * dim];
            for ((wr, wi), &x) in w_re.iter_mut().zip(w_im.iter_mut()).zip(row) {
                *wr += x * v.re;
                *wi += x * v.im;
            }
        }
        for (k, p) in self.phases.iter().enumerate() {
            let z = Complex64::new(w_re[k], w_im[k]) * p;
            w_re[k] = z.re;
            w_im[k] = z.im;
        }
        // V w
        (0..dim)
            .map(|i| {
                let row = &self.vectors[i * dim..(i + 1) * dim];
                let mut re = 0.0;
                let mut im = 0.0;
                for ((&x, &a), &b) in row.iter().zip(&w_re).zip(&w_im) {
                    re += x * a;
                    im += x * b;
                }
                Complex64::new(re, im)
            })
            .collect()
    }

    /// Dense row-major unitary.
    pub fn matrix(&self) -> Vec<Complex64> {
        let dim = self.total_photons + 1;
        let mut u = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                u[i * dim + j] = (0..dim)
                    .map(|k| self.vectors[i * dim + k] * self.vectors[j * dim + k] * self.phases[k])
                    .sum();
            }
        }
        u
    }
}

/// Per-sector beam splitters up to a maximal sector, built on first use.
///
/// Lookups from several threads are safe; a sector racing to be built twice
/// keeps whichever copy lands first.
#[derive(Debug)]
pub struct BeamSplitterBank {
    sectors: Vec<OnceLock<SectorBeamSplitter>>,
}

impl BeamSplitterBank {
    pub fn new(max_sector: usize) -> Self {
        Self {
            sectors: (0..=max_sector).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Bank covering every sector of `state`.
    pub fn for_state<S: QuantumState + ?Sized>(state: &S) -> Self {
        let max = state
            .weighted_components()
            .iter()
            .filter_map(|(_, s)| s.max_sector())
            .max()
            .unwrap_or(0);
        Self::new(max)
    }

    pub fn max_sector(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn sector(&self, total_photons: usize) -> Result<&SectorBeamSplitter> {
        let cell = self.sectors.get(total_photons).ok_or_else(|| {
            Error::Domain(format!(
                "sector N={total_photons} exceeds bank limit {}",
                self.max_sector()
            ))
        })?;
        if let Some(bs) = cell.get() {
            return Ok(bs);
        }
        let built = SectorBeamSplitter::new(total_photons)?;
        let _ = cell.set(built);
        Ok(cell.get().expect("just set"))
    }

    /// Applies the beam splitter sector by sector.
    pub fn apply(&self, state: &TwoModePureState) -> Result<TwoModePureState> {
        for n in state.sectors().map(SectorVector::total_photons) {
            self.sector(n)?;
        }
        Ok(state.map_sectors(|s| {
            self.sector(s.total_photons())
                .expect("built above")
                .apply(s.amplitudes())
        }))
    }

    /// `U P(phi) U` applied to a pure state.
    pub fn mzi_apply(&self, state: &TwoModePureState, phi: f64) -> Result<TwoModePureState> {
        let inner = phase_shift_apply(&self.apply(state)?, phi);
        self.apply(&inner)
    }

    /// `U P(phi) U` applied to every mixture component.
    pub fn mzi_apply_mixture(&self, state: &MixtureState, phi: f64) -> Result<MixtureState> {
        state.try_map_components(|s| self.mzi_apply(s, phi))
    }

    /// The state between the splitters, `P(phi) U |psi>`.
    pub fn intermediate(&self, state: &TwoModePureState, phi: f64) -> Result<TwoModePureState> {
        Ok(phase_shift_apply(&self.apply(state)?, phi))
    }

    /// Mode-A parity after the interferometer at phase `phi`.
    pub fn raw_parity_signal<S: QuantumState + ?Sized>(&self, state: &S, phi: f64) -> Result<f64> {
        let mut total = 0.0;
        for (w, s) in state.weighted_components() {
            total += w * parity_expectation(&self.mzi_apply(s, phi)?)?;
        }
        Ok(total)
    }

    /// Raw parity readout at `phi + pi/2`.
    pub fn parity_signal<S: QuantumState + ?Sized>(&self, state: &S, phi: f64) -> Result<f64> {
        self.raw_parity_signal(state, phi + PARITY_OFFSET)
    }

    /// `mu_AB` on the intermediate state at phase `phi`.
    pub fn mu_ab_signal<S: QuantumState + ?Sized>(&self, state: &S, phi: f64) -> Result<f64> {
        let mut total = 0.0;
        for (w, s) in state.weighted_components() {
            total += w * mu_ab_expectation(&self.intermediate(s, phi)?)?;
        }
        Ok(total)
    }

    /// `<n_a - n_b>` after the interferometer at phase `phi`.
    pub fn intensity_difference_signal<S: QuantumState + ?Sized>(
        &self,
        state: &S,
        phi: f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for (w, s) in state.weighted_components() {
            total += w * intensity_difference_expectation(&self.mzi_apply(s, phi)?)?;
        }
        Ok(total)
    }
}

/// Beam splitters for sectors `0..=max_sector`.
pub fn beam_splitter_bank(max_sector: usize) -> BeamSplitterBank {
    BeamSplitterBank::new(max_sector)
}

/// Applies one beam splitter without caching the sector unitaries.
pub fn beam_splitter_apply(state: &TwoModePureState) -> Result<TwoModePureState> {
    let mut out = std::collections::BTreeMap::new();
    for s in state.sectors() {
        let bs = SectorBeamSplitter::new(s.total_photons())?;
        out.insert(s.total_photons(), bs.apply(s.amplitudes()));
    }
    Ok(state.map_sectors(|s| out[&s.total_photons()].clone()))
}

/// `exp(-i phi G)`: multiplies `c_{N,m}` by `exp(-i phi (2m - N)/2)`.
pub fn phase_shift_apply(state: &TwoModePureState, phi: f64) -> TwoModePureState {
    state.map_sectors(|s| shift_sector(s.amplitudes(), phi))
}

fn shift_sector(amplitudes: &[Complex64], phi: f64) -> Vec<Complex64> {
    let n = (amplitudes.len() - 1) as f64;
    amplitudes
        .iter()
        .enumerate()
        .map(|(m, c)| c * Complex64::from_polar(1.0, -phi * (2.0 * m as f64 - n) / 2.0))
        .collect()
}

/// `U P(phi) U |psi>`.
pub fn mzi_apply(state: &TwoModePureState, phi: f64) -> Result<TwoModePureState> {
    BeamSplitterBank::for_state(state).mzi_apply(state, phi)
}

/// `<exp(i pi n_a)>`.
pub fn parity_expectation<S: QuantumState + ?Sized>(state: &S) -> Result<f64> {
    expectation_diagonal(state, |a, _| if a % 2 == 0 { 1.0 } else { -1.0 })
}

/// `<sum_N sum_M |N-M, M><M, N-M|>`: the overlap of each sector with its
/// mode-exchanged copy.
pub fn mu_ab_expectation<S: QuantumState + ?Sized>(state: &S) -> Result<f64> {
    let mut total = 0.0;
    for (w, component) in state.weighted_components() {
        check_normalized(component)?;
        let value: f64 = component
            .sectors()
            .map(|s| sector_mu(s.amplitudes()))
            .sum();
        total += w * value;
    }
    Ok(total)
}

/// `<n_a - n_b>`.
pub fn intensity_difference_expectation<S: QuantumState + ?Sized>(state: &S) -> Result<f64> {
    expectation_diagonal(state, |a, b| a as f64 - b as f64)
}

/// Observables available to [`sweep`]. All are sums of per-sector terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Mode-A parity after the interferometer at `phi`.
    RawParity,
    /// Mode-A parity after the interferometer at `phi + pi/2`.
    Parity,
    /// `mu_AB` on the state between the splitters at `phi`.
    MuAb,
    /// `<n_a - n_b>` after the interferometer at `phi`.
    IntensityDifference,
}

fn sector_parity(amplitudes: &[Complex64]) -> f64 {
    amplitudes
        .iter()
        .enumerate()
        .map(|(m, c)| if m % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
        .sum()
}

fn sector_difference(amplitudes: &[Complex64]) -> f64 {
    let n = (amplitudes.len() - 1) as f64;
    amplitudes
        .iter()
        .enumerate()
        .map(|(m, c)| (2.0 * m as f64 - n) * c.norm_sqr())
        .sum()
}

fn sector_mu(amplitudes: &[Complex64]) -> f64 {
    amplitudes
        .iter()
        .zip(amplitudes.iter().rev())
        .map(|(c, reversed)| (reversed.conj() * c).re)
        .sum()
}

/// Evaluates `readouts` at every phase in `phis`; `result[k][i]` is
/// `readouts[k]` at `phis[i]`.
///
/// Sectors are processed one at a time and each sector's splitter is built
/// once and dropped afterwards, so memory stays at one sector's unitary however
/// large the state. Phases within a sector run in parallel; the per-sector
/// contributions are then summed in sector order, which keeps the result
/// independent of scheduling.
pub fn sweep<S: QuantumState + ?Sized>(
    state: &S,
    phis: &[f64],
    readouts: &[Readout],
) -> Result<Vec<Vec<f64>>> {
    let components = state.weighted_components();
    for (_, c) in &components {
        check_normalized(c)?;
    }
    let occupied: BTreeSet<usize> = components
        .iter()
        .flat_map(|(_, c)| c.sectors().filter(|s| s.norm_squared() > 0.0))
        .map(SectorVector::total_photons)
        .collect();
    let mut totals = vec![vec![0.0; phis.len()]; readouts.len()];
    for n in occupied {
        let bs = SectorBeamSplitter::new(n)?;
        for (w, c) in &components {
            let Some(sector) = c.sector(n).filter(|s| s.norm_squared() > 0.0) else {
                continue;
            };
            let rotated = bs.apply(sector.amplitudes());
            let rows: Vec<Vec<f64>> = phis
                .par_iter()
                .map(|&phi| {
                    let mut output: Option<(f64, Vec<Complex64>)> = None;
                    readouts
                        .iter()
                        .map(|r| {
                            let at = match r {
                                Readout::MuAb => return sector_mu(&shift_sector(&rotated, phi)),
                                Readout::Parity => phi + PARITY_OFFSET,
                                Readout::RawParity | Readout::IntensityDifference => phi,
                            };
                            if output.as_ref().map_or(true, |(p, _)| p.to_bits() != at.to_bits()) {
                                output = Some((at, bs.apply(&shift_sector(&rotated, at))));
                            }
                            let out = &output.as_ref().expect("set above").1;
                            match r {
                                Readout::IntensityDifference => sector_difference(out),
                                _ => sector_parity(out),
                            }
                        })
                        .collect()
                })
                .collect();
            for (i, row) in rows.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    totals[k][i] += w * v;
                }
            }
        }
    }
    Ok(totals)
}
