//! Large-branch asymptotics of the half-problem coefficients.
//!
//! For a long central branch of top `L` the Neumann half problem behaves as
//! the semi-infinite problem plus a wave bouncing off the branch top:
//!
//! `r_asy(L) = r_∞ − t_∞ t°_∞ / (−e^{−2iκL} + r°_∞)`
//!
//! which, as a function of `e^{−2iκL}` on the unit circle, is a Möbius map
//! tracing a circle. The Dirichlet half problem has the same structure when
//! its branch carries a propagating mode and tends to `R_∞` otherwise.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scattering::SMatrix;

/// Scattering data of a semi-infinite branch with one propagating mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchLimit {
    pub r: C,
    pub t: C,
    pub t_circ: C,
    pub r_circ: C,
    /// Axial wavenumber of the branch mode used in the phase `e^{−2iκL}`.
    pub wavenumber: f64,
}

impl BranchLimit {
    /// Amplitude `a(L) = −t/(−e^{−2iκL} + r°)` of the wave returning from the top.
    pub fn amplitude(&self, l: f64) -> Result<C> {
        let den = self.denominator(l)?;
        Ok(-self.t / den)
    }

    fn denominator(&self, l: f64) -> Result<C> {
        let z = C::new(0.0, -2.0 * self.wavenumber * l).exp();
        let den = self.r_circ - z;
        if den.norm() < 1e-14 {
            return Err(Error::Solver(format!("asymptotic denominator vanishes at L = {l}")));
        }
        Ok(den)
    }

    /// `r − t t°/(−e^{−2iκL} + r°)`.
    pub fn reflection(&self, l: f64) -> Result<C> {
        Ok(self.r - self.t * self.t_circ / self.denominator(l)?)
    }

    /// Same map evaluated at an arbitrary `z` standing for `e^{−2iκL}`.
    pub fn reflection_at(&self, z: C) -> C {
        self.r - self.t * self.t_circ / (self.r_circ - z)
    }

    /// Center and radius of the circle traced by `reflection` as `L` varies.
    pub fn circle(&self) -> Result<(C, f64)> {
        let d = 1.0 - self.r_circ.norm_sqr();
        if !(d > 1e-14) {
            return Err(invalid("|r°| ≥ 1: the reflection map degenerates"));
        }
        let tt = self.t * self.t_circ;
        Ok((self.r + tt * self.r_circ.conj() / d, tt.norm() / d))
    }

    /// Period in `L` of the asymptotic reflection.
    pub fn period(&self) -> f64 {
        PI / self.wavenumber
    }

    pub fn from_smatrix(s: &SMatrix, wavenumber: f64) -> Result<BranchLimit> {
        if s.is_scalar() {
            return Err(invalid("scalar limit has no branch channel"));
        }
        Ok(BranchLimit {
            r: s.r(),
            t: s.t().unwrap_or_default(),
            t_circ: s.t_circ().unwrap_or_default(),
            r_circ: s.r_circ().unwrap_or_default(),
            wavenumber,
        })
    }
}

/// Limit data of the Dirichlet half problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MixedLimit {
    /// No propagating branch mode: `R_mix(L) → R_∞`.
    Scalar(C),
    Branch(BranchLimit),
}

/// Both limit problems of a guide at fixed `ℓ` and `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticModel {
    pub k: f64,
    pub neumann: BranchLimit,
    pub mixed: MixedLimit,
}

impl AsymptoticModel {
    /// Builds the model from computed limit matrices; the phases use the
    /// discrete branch wavenumbers of the grid the matrices came from.
    pub fn from_limits(k: f64, neumann: &SMatrix, mixed: &SMatrix) -> Result<AsymptoticModel> {
        let kn = neumann.branch_wavenumber.ok_or_else(|| invalid("Neumann limit has no propagating branch mode"))?;
        let neumann = BranchLimit::from_smatrix(neumann, kn)?;
        let mixed = if mixed.is_scalar() {
            MixedLimit::Scalar(mixed.r())
        } else {
            let a = mixed.branch_wavenumber.ok_or_else(|| invalid("mixed limit lacks a branch wavenumber"))?;
            MixedLimit::Branch(BranchLimit::from_smatrix(mixed, a)?)
        };
        Ok(AsymptoticModel { k, neumann, mixed })
    }

    pub fn r_asy(&self, l: f64) -> Result<C> {
        self.neumann.reflection(l)
    }

    /// `R_mix` asymptote: `R_∞` or the Möbius form with `α`.
    pub fn mixed_asy(&self, l: f64) -> Result<C> {
        match &self.mixed {
            MixedLimit::Scalar(r) => Ok(*r),
            MixedLimit::Branch(b) => b.reflection(l),
        }
    }

    /// `((r_asy + R_asy)/2, (r_asy − R_asy)/2)`.
    pub fn rt_asy(&self, l: f64) -> Result<(C, C)> {
        let r = self.r_asy(l)?;
        let m = self.mixed_asy(l)?;
        Ok((0.5 * (r + m), 0.5 * (r - m)))
    }

    /// Points of the closed curves `S_R` and `S_T` traced by the asymptotic
    /// full coefficients when `e^{−2ikL} = z^m`, `e^{−2iαL} = z^n` and `z`
    /// runs once around the unit circle. The last point repeats the first.
    pub fn curve_samples(&self, m: u32, n: u32, samples: usize) -> Result<Vec<(C, C)>> {
        let MixedLimit::Branch(b) = &self.mixed else {
            return Err(Error::Regime("curves need a propagating mode in the mixed branch".into()));
        };
        if samples < 2 {
            return Err(invalid("need at least two samples"));
        }
        let mut out = Vec::with_capacity(samples + 1);
        for j in 0..=samples {
            let theta = 2.0 * PI * (j % samples) as f64 / samples as f64;
            let z = C::new(0.0, theta).exp();
            let r = self.neumann.reflection_at(z.powu(m));
            let big = b.reflection_at(z.powu(n));
            out.push((0.5 * (r + big), 0.5 * (r - big)));
        }
        Ok(out)
    }
}

/// Decay rate `√((π/ℓ)² − k²)` of `R_mix(L) − R_∞` when the mixed branch
/// has no propagating mode.
pub fn decay_rate(ell: f64, k: f64) -> Result<f64> {
    let c = PI / ell;
    if !(ell > 0.0) || c <= k {
        return Err(Error::Regime(format!("ℓ = {ell} carries a propagating mixed mode at k = {k}")));
    }
    Ok((c * c - k * k).sqrt())
}

/// Width `ℓ` for which `k/α = m/n`, and the common period `mπ/k` in `L`.
pub fn rational_params(k: f64, m: u32, n: u32) -> Result<(f64, f64)> {
    if n == 0 || m <= n {
        return Err(invalid(format!("need m > n ≥ 1, got m = {m}, n = {n}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let ell = PI / k * mf / (mf * mf - nf * nf).sqrt();
    Ok((ell, mf * PI / k))
}

/// Counts `L` in a sampled sequence where `arg(a/b)` passes through `π`,
/// i.e. where `a + b` vanishes when `|a| = |b|`.
pub fn count_antiphase_crossings(pairs: &[(C, C)]) -> usize {
    let phase: Vec<f64> = pairs.iter().map(|(a, b)| (a / b).arg()).collect();
    // arg jumps from +π to −π (or back) exactly when a/b crosses the negative axis
    phase.windows(2).filter(|w| (w[0] - w[1]).abs() > PI).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: f64 = 0.8 * PI;

    fn exact(r: C, t: C, rc: C) -> BranchLimit {
        BranchLimit { r, t, t_circ: t, r_circ: rc, wavenumber: K }
    }

    #[test]
    fn trivial_junction_bounces_back() {
        let b = exact(C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0));
        for l in [1.3, 2.0, 7.7] {
            let want = C::new(0.0, 2.0 * K * l).exp();
            assert!((b.reflection(l).unwrap() - want).norm() < 1e-14);
        }
    }

    #[test]
    fn rational_widths() {
        let (ell, period) = rational_params(K, 2, 1).unwrap();
        assert!((ell - 2.0 * PI / (K * 3f64.sqrt())).abs() < 1e-14);
        assert!((period - 2.5).abs() < 1e-14);
        let alpha = (K * K - (PI / ell).powi(2)).sqrt();
        assert!((K / alpha - 2.0).abs() < 1e-13);
        assert!(rational_params(K, 1, 1).is_err());
    }

    #[test]
    fn decay_at_unit_width() {
        assert!((decay_rate(1.0, K).unwrap() - 0.6 * PI).abs() < 1e-14);
        assert!(decay_rate(1.4, K).is_err());
    }
}
