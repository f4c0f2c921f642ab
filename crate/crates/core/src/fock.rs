//! Truncated two-mode photon-number states.
//!
//! A state is stored sector by sector: sector `N` holds the amplitudes of the
//! kets `|m, N-m>` for `m = 0..=N`, where `m` counts photons in mode A. Every
//! optical element in this crate conserves the total photon number, so the
//! sectors never exchange amplitude and each one can be transformed alone.
//!
//! Truncation is explicit. A state records the probability that was cut away
//! as `tail_mass`, and `norm_squared + tail_mass == 1`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `norm^2 + tail == 1` accepted by the checked constructors.
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;

/// Tolerance on `norm^2 + tail == 1` required by the observables.
pub const EXPECTATION_TOLERANCE: f64 = 1e-9;

/// Amplitudes of one fixed-total-photon-number subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorVector {
    total_photons: usize,
    amplitudes: Vec<Complex64>,
}

impl SectorVector {
    pub fn new(total_photons: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != total_photons + 1 {
            return Err(Error::InvalidSector(format!(
                "sector N={} needs {} amplitudes, got {}",
                total_photons,
                total_photons + 1,
                amplitudes.len()
            )));
        }
        Ok(Self {
            total_photons,
            amplitudes,
        })
    }

    /// Sector holding only the zero vector.
    pub fn zeros(total_photons: usize) -> Self {
        Self {
            total_photons,
            amplitudes: vec![Complex64::new(0.0, 0.0); total_photons + 1],
        }
    }

    /// Sector with a single unit amplitude on `|photons_a, N - photons_a>`.
    pub fn basis(total_photons: usize, photons_a: usize) -> Result<Self> {
        if photons_a > total_photons {
            return Err(Error::InvalidSector(format!(
                "mode A count {photons_a} exceeds sector N={total_photons}"
            )));
        }
        let mut sector = Self::zeros(total_photons);
        sector.amplitudes[photons_a] = Complex64::new(1.0, 0.0);
        Ok(sector)
    }

    pub fn total_photons(&self) -> usize {
        self.total_photons
    }

    /// Amplitudes indexed by the photon count in mode A.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub(crate) fn from_raw(total_photons: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), total_photons + 1);
        Self {
            total_photons,
            amplitudes,
        }
    }
}

/// A (possibly truncated) pure state of two optical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModePureState {
    sectors: BTreeMap<usize, SectorVector>,
    tail_mass: f64,
}

impl TwoModePureState {
    /// Checked constructor: sector keys must be unique and
    /// `norm^2 + tail_mass` must equal one within [`CONSTRUCTION_TOLERANCE`].
    pub fn new(sectors: Vec<SectorVector>, tail_mass: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tail_mass) {
            return Err(Error::Domain(format!(
                "tail mass {tail_mass} outside [0, 1]"
            )));
        }
        let mut map = BTreeMap::new();
        for sector in sectors {
            let n = sector.total_photons;
            if map.insert(n, sector).is_some() {
                return Err(Error::InvalidSector(format!("duplicate sector N={n}")));
            }
        }
        let state = Self {
            sectors: map,
            tail_mass,
        };
        let total = state.norm_squared() + tail_mass;
        if (total - 1.0).abs() > CONSTRUCTION_TOLERANCE {
            return Err(Error::NotNormalized { total });
        }
        Ok(state)
    }

    /// Rescales arbitrary sector amplitudes to unit norm, with no tail.
    pub fn normalized(sectors: Vec<SectorVector>) -> Result<Self> {
        let norm: f64 = sectors.iter().map(SectorVector::norm_squared).sum();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero state".into()));
        }
        let scale = norm.sqrt().recip();
        let sectors = sectors
            .into_iter()
            .map(|s| SectorVector {
                total_photons: s.total_photons,
                amplitudes: s.amplitudes.into_iter().map(|c| c * scale).collect(),
            })
            .collect();
        Self::new(sectors, 0.0)
    }

    pub(crate) fn from_parts(sectors: BTreeMap<usize, SectorVector>, tail_mass: f64) -> Self {
        Self { sectors, tail_mass }
    }

    /// Sectors in increasing total photon number.
    pub fn sectors(&self) -> impl Iterator<Item = &SectorVector> {
        self.sectors.values()
    }

    pub fn sector(&self, total_photons: usize) -> Option<&SectorVector> {
        self.sectors.get(&total_photons)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Largest stored sector, or `None` for a state with no sectors.
    pub fn max_sector(&self) -> Option<usize> {
        self.sectors.keys().next_back().copied()
    }

    /// Largest sector carrying nonzero amplitude.
    pub fn max_occupied_sector(&self) -> Option<usize> {
        self.sectors
            .values()
            .rev()
            .find(|s| s.norm_squared() > 0.0)
            .map(|s| s.total_photons)
    }

    /// Sector-resolved probabilities `(N, sum_m |c_{N,m}|^2)`.
    pub fn sector_weights(&self) -> Vec<(usize, f64)> {
        self.sectors
            .values()
            .map(|s| (s.total_photons, s.norm_squared()))
            .collect()
    }

    /// Applies `f` to every sector, keeping the tail mass.
    ///
    /// `f` must return a vector of the same sector; this is what keeps
    /// photon-number conservation structural.
    pub fn map_sectors<F>(&self, f: F) -> Self
    where
        F: Fn(&SectorVector) -> Vec<Complex64>,
    {
        let sectors = self
            .sectors
            .iter()
            .map(|(&n, s)| {
                let amplitudes = f(s);
                assert_eq!(amplitudes.len(), n + 1, "sector map changed dimension");
                (n, SectorVector::from_raw(n, amplitudes))
            })
            .collect();
        Self::from_parts(sectors, self.tail_mass)
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(self)
    }

    pub fn is_normalized(&self, tolerance: f64) -> bool {
        (self.norm_squared() + self.tail_mass - 1.0).abs() <= tolerance
    }
}

/// Classical ensemble of pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    components: Vec<(f64, TwoModePureState)>,
}

impl MixtureState {
    pub fn new(components: Vec<(f64, TwoModePureState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for (weight, state) in &components {
            if !(*weight > 0.0 && *weight <= 1.0) {
                return Err(Error::Domain(format!(
                    "mixture weight {weight} outside (0, 1]"
                )));
            }
            if !state.is_normalized(CONSTRUCTION_TOLERANCE) {
                return Err(Error::NotNormalized {
                    total: state.norm_squared() + state.tail_mass(),
                });
            }
            total += weight;
        }
        if (total - 1.0).abs() > CONSTRUCTION_TOLERANCE {
            return Err(Error::Domain(format!("mixture weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, TwoModePureState)] {
        &self.components
    }

    /// Transforms every component, keeping the weights.
    pub fn map_components<F>(&self, f: F) -> Self
    where
        F: Fn(&TwoModePureState) -> TwoModePureState,
    {
        Self {
            components: self.components.iter().map(|(w, s)| (*w, f(s))).collect(),
        }
    }

    /// Fallible [`MixtureState::map_components`].
    pub fn try_map_components<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&TwoModePureState) -> Result<TwoModePureState>,
    {
        let components = self
            .components
            .iter()
            .map(|(w, s)| Ok((*w, f(s)?)))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }
}

/// Anything that can be read out as a weighted set of pure states.
///
/// Every observable here is linear in the density operator, so mixture
/// expectations are the weighted sums of component expectations.
pub trait QuantumState {
    fn weighted_components(&self) -> Vec<(f64, &TwoModePureState)>;
}

impl QuantumState for TwoModePureState {
    fn weighted_components(&self) -> Vec<(f64, &TwoModePureState)> {
        vec![(1.0, self)]
    }
}

impl QuantumState for MixtureState {
    fn weighted_components(&self) -> Vec<(f64, &TwoModePureState)> {
        self.components.iter().map(|(w, s)| (*w, s)).collect()
    }
}

/// Sum of squared amplitude magnitudes; the tail mass is not included.
pub fn norm_squared(state: &TwoModePureState) -> f64 {
    state.sectors.values().map(SectorVector::norm_squared).sum()
}

pub(crate) fn check_normalized(state: &TwoModePureState) -> Result<()> {
    let total = state.norm_squared() + state.tail_mass;
    if (total - 1.0).abs() > EXPECTATION_TOLERANCE {
        return Err(Error::NotNormalized { total });
    }
    Ok(())
}

/// Expectation of an observable diagonal in the number basis, given by its
/// eigenvalue `weight(n_a, n_b)` on each ket.
pub fn expectation_diagonal<S, W>(state: &S, weight: W) -> Result<f64>
where
    S: QuantumState + ?Sized,
    W: Fn(usize, usize) -> f64,
{
    let mut total = 0.0;
    for (w, component) in state.weighted_components() {
        check_normalized(component)?;
        let value: f64 = component
            .sectors
            .values()
            .map(|s| {
                let n = s.total_photons;
                s.amplitudes
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c.norm_sqr() * weight(m, n - m))
                    .sum::<f64>()
            })
            .sum();
        total += w * value;
    }
    Ok(total)
}

/// `<n>` for the total photon number `n = n_a + n_b`.
pub fn mean_total_photons<S: QuantumState + ?Sized>(state: &S) -> Result<f64> {
    expectation_diagonal(state, |a, b| (a + b) as f64)
}

/// `<n^2>` for the total photon number `n = n_a + n_b`.
pub fn second_moment_total_photons<S: QuantumState + ?Sized>(state: &S) -> Result<f64> {
    expectation_diagonal(state, |a, b| {
        let n = (a + b) as f64;
        n * n
    })
}

/// Geometric ratio `t = 1 / (1 + 2/nbar)` of the twin-Fock weights of a
/// two-mode squeezed vacuum with `nbar` photons on average.
pub fn geometric_ratio(mean_photons: f64) -> f64 {
    mean_photons / (mean_photons + 2.0)
}

/// Smallest `n_max` whose discarded twin-Fock probability
/// `sum_{n > n_max} (1-t) t^n = t^(n_max + 1)` is at most `epsilon`.
pub fn truncation_cutoff(mean_photons: f64, epsilon: f64) -> Result<usize> {
    if !(mean_photons > 0.0 && mean_photons.is_finite()) {
        return Err(Error::Domain(format!(
            "mean photon number must be positive and finite, got {mean_photons}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "truncation tolerance must lie in (0, 1), got {epsilon}"
        )));
    }
    let t = geometric_ratio(mean_photons);
    if t <= epsilon {
        return Ok(0);
    }
    let tail = |k: usize| t.powf((k + 1) as f64);
    // Log estimate, then settle the boundary against the power itself.
    let mut k = ((epsilon.ln() / t.ln()).ceil() as usize).saturating_sub(1);
    while tail(k) > epsilon {
        k += 1;
    }
    while k > 0 && tail(k - 1) <= epsilon {
        k -= 1;
    }
    Ok(k)
}
