//! Eigendecomposition of real symmetric tridiagonal matrices.
//!
//! Eigenvalues come from the implicit QL iteration with Wilkinson shifts
//! (no eigenvector accumulation, so O(n^2)); each eigenvector is then found by
//! inverse iteration on the shifted tridiagonal system, O(n) per solve. This
//! keeps a full decomposition at O(n^2), which matters for photon-number
//! sectors of several hundred kets. Inverse iteration yields orthogonal
//! vectors only when eigenvalues are well separated relative to the matrix
//! norm; the beam-splitter generator has eigenvalue spacing 2.
//!
//! Callers that know the spectrum in closed form can skip the QL stage and
//! call [`eigenvector`] directly.

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;
const INVERSE_ITERATIONS: usize = 2;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    /// Row-major `n x n`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples rows `i` and `i + 1`).
pub fn eigenvalues(diag: &[f64], off: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Some(d)
}

/// LU factors of `T - shift I` with partial pivoting (LAPACK `dgttrf`
/// layout). Exactly singular pivots are replaced by `tiny`.
struct ShiftedLu {
    /// Reciprocal pivots.
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    multipliers: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|&a| a - shift).collect();
        let mut du: Vec<f64> = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut multipliers = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let sub = off[i];
            if d[i].abs() >= sub.abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = sub / d[i];
                multipliers[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / sub;
                multipliers[i] = fact;
                swapped[i] = true;
                d[i] = sub;
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
            }
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = tiny;
            }
        }
        d.iter_mut().for_each(|x| *x = x.recip());
        Self {
            d,
            du,
            du2,
            multipliers,
            swapped,
        }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.multipliers[i] * rhs[i];
        }
        let (d, du, du2) = (&self.d, &self.du, &self.du2);
        rhs[n - 1] *= d[n - 1];
        if n > 1 {
            rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) * d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) * d[i];
        }
    }
}

fn normalize(v: &mut [f64]) {
    // Scale by the max first so squaring cannot overflow after a near-singular solve.
    let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if big == 0.0 || !big.is_finite() {
        return;
    }
    v.iter_mut().for_each(|x| *x /= big);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn scale_of(diag: &[f64], off: &[f64]) -> f64 {
    diag.iter()
        .map(|x| x.abs())
        .chain(off.iter().map(|x| 2.0 * x.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0)
}

/// Unit eigenvector for the (already known) eigenvalue `lambda`, by inverse
/// iteration. `seed` picks the start vector; distinct eigenvalues may share it.
pub fn eigenvector(diag: &[f64], off: &[f64], lambda: f64, seed: u64) -> Vec<f64> {
    let tiny = f64::EPSILON * scale_of(diag, off);
    // Deterministic pseudo-random start; a structured start vector can be
    // orthogonal to a whole symmetry class of eigenvectors.
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ seed.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut x: Vec<f64> = (0..diag.len())
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let lu = ShiftedLu::new(diag, off, lambda, tiny);
    for _ in 0..INVERSE_ITERATIONS {
        lu.solve(&mut x);
        normalize(&mut x);
    }
    x
}

/// Full eigendecomposition. `label` is reported on failure.
pub fn decompose(diag: &[f64], off: &[f64], label: usize) -> Result<TridiagonalEigen> {
    let n = diag.len();
    let values = eigenvalues(diag, off).ok_or(Error::NoConvergence(label))?;
    let mut vectors = vec![0.0; n * n];
    for (k, &lambda) in values.iter().enumerate() {
        let x = eigenvector(diag, off, lambda, k as u64);
        for (i, &xi) in x.iter().enumerate() {
            vectors[i * n + k] = xi;
        }
    }
    Ok(TridiagonalEigen { values, vectors })
}
