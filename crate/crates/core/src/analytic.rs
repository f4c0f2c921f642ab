//! Closed-form signals, sensitivities and limits.
//!
//! Nothing here calls into the Fock-space simulation, so agreement between
//! these formulas and the simulated values is a genuine cross-check.
//!
//! Readout conventions follow [`crate::optics`]: [`parity_twin_fock`] and
//! [`parity_coherent`] are raw mode-A parities after the interferometer, while
//! [`parity_tmsv`] and [`parity_rho`] are the offset readouts (raw parity at
//! `phi + pi/2`, equal to `mu_AB` at `phi`), which peak at the origin.

use crate::error::{Error, Result};
use crate::metrology::LimitsReport;

/// Uniform grid of phases, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    start: f64,
    stop: f64,
    count: usize,
}

impl PhaseGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 points, got {count}")));
        }
        if !(start < stop) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Domain(format!("grid needs start < stop, got {start}..{stop}")));
        }
        Ok(Self { start, stop, count })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            return self.stop;
        }
        self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence
/// `(k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}`.
pub fn legendre_p(n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(n, x))
}

fn legendre_unchecked(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Raw parity for twin Fock input `|n,n>`: `(-1)^n P_n(cos 2 phi)`.
pub fn parity_twin_fock(n: usize, phi: f64) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * legendre_unchecked(n, (2.0 * phi).cos())
}

/// Raw parity of a two-mode squeezed vacuum from the truncated twin-Fock
/// series `(1-t) sum_{n <= n_max} t^n (-1)^n P_n(cos 2 phi)`.
pub fn parity_tmsv_series(mean_photons: f64, phi: f64, n_max: usize) -> Result<f64> {
    if !(mean_photons >= 0.0) {
        return Err(Error::Domain(format!("negative mean photon number {mean_photons}")));
    }
    let t = mean_photons / (mean_photons + 2.0);
    // Carry the alternating sign inside the argument: (-1)^n P_n(x) = P_n(-x).
    let x = -(2.0 * phi).cos();
    let (mut prev, mut cur) = (1.0, x);
    let mut weight = 1.0 - t;
    let mut sum = weight * prev;
    for k in 0..n_max {
        weight *= t;
        if k > 0 {
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
            prev = cur;
            cur = next;
        }
        sum += weight * cur;
    }
    Ok(sum)
}

/// Offset parity readout for a two-mode squeezed vacuum,
/// `1 / sqrt(1 + nbar (nbar + 2) sin^2 phi)`.
pub fn parity_tmsv(mean_photons: f64, phi: f64) -> Result<f64> {
    if !(mean_photons >= 0.0) {
        return Err(Error::Domain(format!("negative mean photon number {mean_photons}")));
    }
    let f = mean_photons * (mean_photons + 2.0);
    Ok((1.0 + f * phi.sin().powi(2)).sqrt().recip())
}

/// Raw parity for a coherent state in one port, `exp(-2 nbar sin^2(phi/2))`.
pub fn parity_coherent(mean_photons: f64, phi: f64) -> f64 {
    (-2.0 * mean_photons * (phi / 2.0).sin().powi(2)).exp()
}

/// `<n_a - n_b>` for a coherent state in mode A: `-nbar cos phi`.
pub fn intensity_difference_coherent(mean_photons: f64, phi: f64) -> f64 {
    -mean_photons * phi.cos()
}

/// Offset parity readout for `rho(n, theta)`:
/// `sin^2 theta + cos^2 theta P_n(cos 2 phi)`.
pub fn parity_rho(n: usize, theta: f64, phi: f64) -> f64 {
    let c2 = theta.cos().powi(2);
    (1.0 - c2) + c2 * legendre_unchecked(n, (2.0 * phi).cos())
}

/// Phase uncertainty of the squeezed-vacuum parity scheme,
/// `(1 + F sin^2 phi) / (|cos phi| sqrt(F))` with `F = nbar (nbar + 2)`.
pub fn sensitivity_tmsv(mean_photons: f64, phi: f64) -> Result<f64> {
    if !(mean_photons > 0.0) {
        return Err(Error::Domain(format!("mean photon number must be positive, got {mean_photons}")));
    }
    let cos = phi.cos().abs();
    if cos < 1e-12 {
        return Err(Error::Divergence(format!("cos(phi) = 0 at phi = {phi}")));
    }
    let f = mean_photons * (mean_photons + 2.0);
    Ok((1.0 + f * phi.sin().powi(2)) / (cos * f.sqrt()))
}

/// Quadratic expansion of [`sensitivity_tmsv`] about the origin.
pub fn sensitivity_tmsv_taylor(mean_photons: f64, phi: f64) -> f64 {
    let f = mean_photons * (mean_photons + 2.0);
    (1.0 + (2.0 * f + 1.0) * phi * phi / 2.0) / f.sqrt()
}

/// Quadratic expansion of the coherent-state parity sensitivity about the origin.
pub fn sensitivity_coherent_taylor(mean_photons: f64, phi: f64) -> f64 {
    (1.0 + (2.0 * mean_photons + 1.0) * phi * phi / 8.0) / mean_photons.sqrt()
}

/// Parity sensitivity of `rho(n, theta)` at the origin,
/// `1 / sqrt(2 n (n+1) cos^2 theta)`.
pub fn sensitivity_rho_parity(n: usize, theta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("twin Fock index must be positive".into()));
    }
    let cos = theta.cos();
    if cos.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("cos(theta) = 0 at theta = {theta}")));
    }
    let n = n as f64;
    Ok((2.0 * n * (n + 1.0) * cos * cos).sqrt().recip())
}

/// Quantum Fisher information of a coherent state: `nbar`.
pub fn qfi_coherent(mean_photons: f64) -> f64 {
    mean_photons
}

/// Quantum Fisher information of a two-mode squeezed vacuum: `nbar (nbar + 2)`.
pub fn qfi_tmsv(mean_photons: f64) -> f64 {
    mean_photons * (mean_photons + 2.0)
}

/// Quantum Fisher information of `|n,n>`: `2 n (n + 1)`.
pub fn qfi_twin_fock(n: usize) -> f64 {
    let n = n as f64;
    2.0 * n * (n + 1.0)
}

/// Quantum Fisher information of `rho(n, theta)`: `2 n (n + 1) cos^2 theta`.
pub fn qfi_rho(n: usize, theta: f64) -> f64 {
    qfi_twin_fock(n) * theta.cos().powi(2)
}

/// `<n^2>` of a two-mode squeezed vacuum: `2 nbar^2 + 2 nbar`.
pub fn second_moment_tmsv(mean_photons: f64) -> f64 {
    2.0 * mean_photons * mean_photons + 2.0 * mean_photons
}

/// `<n^2>` of a coherent state: `nbar^2 + nbar`.
pub fn second_moment_coherent(mean_photons: f64) -> f64 {
    mean_photons * mean_photons + mean_photons
}

/// `<n^2>` of `rho(n, theta)`: `4 n^2 cos^2 theta`.
pub fn second_moment_rho(n: usize, theta: f64) -> f64 {
    4.0 * (n * n) as f64 * theta.cos().powi(2)
}

/// Shot-noise, Heisenberg and Hofmann limits from the first two moments of
/// the total photon number. `qcrb` is left empty.
pub fn limits(mean_photons: f64, second_moment: f64) -> Result<LimitsReport> {
    if !(mean_photons > 0.0 && mean_photons.is_finite()) {
        return Err(Error::Domain(format!("mean photon number must be positive, got {mean_photons}")));
    }
    let floor = mean_photons * mean_photons;
    if second_moment < floor * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "second moment {second_moment} below mean squared {floor}"
        )));
    }
    Ok(LimitsReport {
        snl: mean_photons.sqrt().recip(),
        hl: mean_photons.recip(),
        hofmann: second_moment.sqrt().recip(),
        qcrb: None,
        max_photon_limit: None,
    })
}

/// Full width of a peak centred at the origin, measured where the even
/// signal crosses `level`. The crossing is bracketed in `(0, upper]` and
/// located by bisection to `1e-9` in phase.
pub fn peak_full_width<F>(signal: F, level: f64, upper: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (0.0, upper);
    if !(signal(lo) > level && signal(hi) < level) {
        return Err(Error::Domain(format!(
            "level {level} not bracketed on [0, {upper}]"
        )));
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if signal(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}
