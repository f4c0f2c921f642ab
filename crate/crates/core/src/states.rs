//! Input states: two-mode squeezed vacuum, twin Fock, coherent, and the
//! vacuum-diluted twin Fock mixture.
//!
//! All amplitudes are real and nonnegative. A squeezing phase `e^{i n phi_s}`
//! on the twin-Fock terms would only rotate the origin of the phase signal.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    geometric_ratio, truncation_cutoff, MixtureState, SectorVector, TwoModePureState,
};

/// Parameters of a truncated two-mode squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmsvParams {
    mean_photons: f64,
    tolerance: f64,
}

impl TmsvParams {
    pub fn new(mean_photons: f64, tolerance: f64) -> Result<Self> {
        if !(mean_photons > 0.0 && mean_photons.is_finite()) {
            return Err(Error::Domain(format!(
                "mean photon number must be positive and finite, got {mean_photons}"
            )));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::Domain(format!(
                "truncation tolerance must lie in (0, 1), got {tolerance}"
            )));
        }
        Ok(Self {
            mean_photons,
            tolerance,
        })
    }

    pub fn mean_photons(&self) -> f64 {
        self.mean_photons
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Highest twin-Fock index kept.
    pub fn cutoff(&self) -> usize {
        truncation_cutoff(self.mean_photons, self.tolerance).expect("validated parameters")
    }

    pub fn build(&self) -> TwoModePureState {
        let t = geometric_ratio(self.mean_photons);
        let n_max = self.cutoff();
        let mut sectors = BTreeMap::new();
        let mut weight = 1.0 - t;
        for n in 0..=n_max {
            let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
            amps[n] = Complex64::new(weight.sqrt(), 0.0);
            sectors.insert(2 * n, SectorVector::from_raw(2 * n, amps));
            weight *= t;
        }
        let tail = t.powf((n_max + 1) as f64);
        TwoModePureState::from_parts(sectors, tail)
    }
}

/// Two-mode squeezed vacuum `sum_n sqrt((1-t) t^n) |n,n>` with
/// `t = 1/(1 + 2/nbar)`, truncated so at most `epsilon` probability is lost.
pub fn tmsv(mean_photons: f64, epsilon: f64) -> Result<TwoModePureState> {
    Ok(TmsvParams::new(mean_photons, epsilon)?.build())
}

/// Twin Fock state `|n,n>`.
pub fn twin_fock(n: usize) -> TwoModePureState {
    let sector = SectorVector::basis(2 * n, n).expect("n <= 2n");
    TwoModePureState::new(vec![sector], 0.0).expect("unit basis ket")
}

/// Coherent state `|alpha>` in mode A (real `alpha = sqrt(nbar)`) and vacuum
/// in mode B, truncated at the smallest photon number whose Poisson tail is
/// at most `epsilon`.
pub fn coherent_vacuum(mean_photons: f64, epsilon: f64) -> Result<TwoModePureState> {
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
    // Poisson weights far enough out that the remainder is below f64 resolution.
    let horizon = (mean_photons + 40.0 * mean_photons.sqrt() + 60.0).ceil() as usize;
    let ln_nbar = mean_photons.ln();
    let mut ln_factorial = 0.0;
    let probs: Vec<f64> = (0..=horizon)
        .map(|n| {
            if n > 0 {
                ln_factorial += (n as f64).ln();
            }
            (-mean_photons + n as f64 * ln_nbar - ln_factorial).exp()
        })
        .collect();
    // Suffix sums give each tail directly instead of as 1 - (head sum).
    let mut tails = vec![0.0; horizon + 2];
    for n in (0..=horizon).rev() {
        tails[n] = tails[n + 1] + probs[n];
    }
    let n_max = (0..=horizon)
        .find(|&n| tails[n + 1] <= epsilon)
        .unwrap_or(horizon);

    let mut sectors = BTreeMap::new();
    for (n, &p) in probs.iter().enumerate().take(n_max + 1) {
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(p.sqrt(), 0.0);
        sectors.insert(n, SectorVector::from_raw(n, amps));
    }
    Ok(TwoModePureState::from_parts(sectors, tails[n_max + 1]))
}

/// `rho(n, theta) = sin^2(theta) |0,0><0,0| + cos^2(theta) |n,n><n,n|`.
pub fn vacuum_mixed_twin_fock(n: usize, theta: f64) -> Result<MixtureState> {
    if n == 0 {
        return Err(Error::Domain("twin Fock index must be positive".into()));
    }
    let (sin, cos) = theta.sin_cos();
    if cos.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "cos(theta) = 0 at theta = {theta}: the state is pure vacuum"
        )));
    }
    let vacuum_weight = sin * sin;
    let twin_weight = cos * cos;
    let mut components = Vec::with_capacity(2);
    if vacuum_weight > 0.0 {
        components.push((vacuum_weight, twin_fock(0)));
    }
    components.push((twin_weight, twin_fock(n)));
    MixtureState::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mean_total_photons, norm_squared, second_moment_total_photons};
    use std::f64::consts::PI;

    fn amp(s: &TwoModePureState, n: usize, m: usize) -> f64 {
        s.sector(n).unwrap().amplitudes()[m].re
    }

    #[test]
    fn tmsv_weights_at_nbar_two() {
        let s = tmsv(2.0, 1e-12).unwrap();
        assert!((amp(&s, 0, 0).powi(2) - 0.5).abs() < 1e-15);
        assert!((amp(&s, 2, 1).powi(2) - 0.25).abs() < 1e-15);
        assert!(s.is_normalized(1e-12));
    }

    #[test]
    fn tmsv_vacuum_limit() {
        let s = tmsv(1e-15, 1e-12).unwrap();
        assert_eq!(s.max_sector(), Some(0));
        assert!((amp(&s, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tmsv_mean_matches_geometric_sum() {
        // sum_n 2n (1-t) t^n = 2t/(1-t) = nbar
        let t = geometric_ratio(10.0);
        assert!((2.0 * t / (1.0 - t) - 10.0).abs() < 1e-12);
        let s = tmsv(10.0, 1e-12).unwrap();
        assert!((mean_total_photons(&s).unwrap() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn tmsv_rejects_bad_mean() {
        assert!(tmsv(0.0, 1e-6).is_err());
        assert!(tmsv(-2.0, 1e-6).is_err());
        assert!(tmsv(f64::NAN, 1e-6).is_err());
    }

    #[test]
    fn twin_fock_layout() {
        let v = twin_fock(0);
        assert_eq!(v.max_sector(), Some(0));
        let s = twin_fock(3);
        assert_eq!(s.sector(6).unwrap().amplitudes()[3], Complex64::new(1.0, 0.0));
        assert_eq!(mean_total_photons(&twin_fock(5)).unwrap(), 10.0);
    }

    #[test]
    fn coherent_amplitudes() {
        let nbar = 3.0;
        let s = coherent_vacuum(nbar, 1e-12).unwrap();
        assert!((amp(&s, 0, 0).powi(2) - (-nbar).exp()).abs() < 1e-15);
        assert!(s.is_normalized(1e-12));
        let one = coherent_vacuum(1.0, 1e-12).unwrap();
        assert!((amp(&one, 1, 1) / amp(&one, 0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coherent_mean_matches_poisson_sum() {
        for nbar in [0.5f64, 4.0, 25.0, 100.0] {
            let oracle: f64 = {
                let mut p = (-nbar).exp();
                let mut acc = 0.0;
                for n in 1..2000 {
                    p *= nbar / n as f64;
                    acc += n as f64 * p;
                }
                acc
            };
            assert!((oracle - nbar).abs() < 1e-10);
            let s = coherent_vacuum(nbar, 1e-14).unwrap();
            let mean = mean_total_photons(&s).unwrap();
            assert!((mean - nbar).abs() < 1e-9, "nbar={nbar} mean={mean}");
            assert!(s.tail_mass() <= 1e-14);
        }
    }

    #[test]
    fn coherent_only_occupies_mode_a() {
        let s = coherent_vacuum(6.0, 1e-10).unwrap();
        for v in s.sectors() {
            let n = v.total_photons();
            for (m, c) in v.amplitudes().iter().enumerate() {
                if m != n {
                    assert_eq!(c.norm_sqr(), 0.0);
                }
            }
        }
    }

    #[test]
    fn rho_components() {
        let pure = vacuum_mixed_twin_fock(3, 0.0).unwrap();
        assert_eq!(pure.components().len(), 1);
        assert_eq!(pure.components()[0].1, twin_fock(3));

        let rho = vacuum_mixed_twin_fock(2, PI / 3.0).unwrap();
        assert!((mean_total_photons(&rho).unwrap() - 1.0).abs() < 1e-12);

        // 0.5 * 0 + 0.5 * 4^2
        let rho = vacuum_mixed_twin_fock(2, PI / 4.0).unwrap();
        assert!((second_moment_total_photons(&rho).unwrap() - 8.0).abs() < 1e-12);

        assert!(matches!(
            vacuum_mixed_twin_fock(2, PI / 2.0),
            Err(Error::Degenerate(_))
        ));
        assert!(vacuum_mixed_twin_fock(0, 0.3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tmsv_is_even_decreasing_and_normalized(nbar in 0.05f64..40.0, e in 1e-13f64..1e-2) {
                let s = tmsv(nbar, e).unwrap();
                prop_assert!((norm_squared(&s) + s.tail_mass() - 1.0).abs() <= 1e-12);
                let mut previous = f64::INFINITY;
                for v in s.sectors() {
                    prop_assert_eq!(v.total_photons() % 2, 0);
                    let a = v.amplitudes()[v.total_photons() / 2].re;
                    prop_assert!(a < previous);
                    previous = a;
                }
            }

            #[test]
            fn coherent_is_normalized(nbar in 0.01f64..150.0, e in 1e-14f64..1e-2) {
                let s = coherent_vacuum(nbar, e).unwrap();
                prop_assert!((norm_squared(&s) + s.tail_mass() - 1.0).abs() <= 1e-12);
                prop_assert!(s.tail_mass() <= e);
            }
        }
    }
}
