//! Transverse duct modes, continuous and discrete.
//!
//! A duct of width `w` carries modes `φ_n(t) e^{±iβ_n s}` where `t` runs across
//! the duct and `s` along it. Propagating modes are scaled by `1/√(2β_n)` so
//! that every one of them carries flux ½.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::WallBc;

/// Smallest admissible distance between `k` and a cutoff.
pub const THRESHOLD_GUARD: f64 = 1e-8;

/// Boundary conditions on the two lateral walls of a duct, ordered by the
/// transverse coordinate (`low` wall first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LateralBc {
    NN,
    /// Dirichlet on the low wall, Neumann on the high wall.
    DN,
    /// Neumann on the low wall, Dirichlet on the high wall.
    ND,
    DD,
}

impl LateralBc {
    pub fn new(low: WallBc, high: WallBc) -> Self {
        match (low, high) {
            (WallBc::Neumann, WallBc::Neumann) => LateralBc::NN,
            (WallBc::Dirichlet, WallBc::Neumann) => LateralBc::DN,
            (WallBc::Neumann, WallBc::Dirichlet) => LateralBc::ND,
            (WallBc::Dirichlet, WallBc::Dirichlet) => LateralBc::DD,
        }
    }

    pub fn low(self) -> WallBc {
        match self {
            LateralBc::NN | LateralBc::ND => WallBc::Neumann,
            LateralBc::DN | LateralBc::DD => WallBc::Dirichlet,
        }
    }

    pub fn high(self) -> WallBc {
        match self {
            LateralBc::NN | LateralBc::DN => WallBc::Neumann,
            LateralBc::ND | LateralBc::DD => WallBc::Dirichlet,
        }
    }

    /// The same walls seen with the transverse axis reversed.
    pub fn mirrored(self) -> Self {
        LateralBc::new(self.high(), self.low())
    }

    /// Cutoff `λ_n` of mode `n` in a duct of width `w`.
    pub fn cutoff(self, n: usize, w: f64) -> f64 {
        let n = n as f64;
        match self {
            LateralBc::NN => n * PI / w,
            LateralBc::DN | LateralBc::ND => (n + 0.5) * PI / w,
            LateralBc::DD => (n + 1.0) * PI / w,
        }
    }
}

/// The first `count` cutoffs, in increasing order.
pub fn cutoffs(w: f64, lateral: LateralBc, count: usize) -> Result<Vec<f64>> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(invalid(format!("duct width must be positive, got {w}")));
    }
    Ok((0..count).map(|n| lateral.cutoff(n, w)).collect())
}

/// `β = √(k² − λ²)` with the branch `β = i√(λ² − k²)` above cutoff.
pub fn axial_wavenumber(lambda: f64, k: f64) -> Result<Complex64> {
    let gap = (k - lambda).abs();
    if gap < THRESHOLD_GUARD {
        return Err(Error::Threshold { k, cutoff: lambda, gap });
    }
    Ok(if lambda < k {
        Complex64::new((k * k - lambda * lambda).sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (lambda * lambda - k * k).sqrt())
    })
}

/// Number of modes with cutoff strictly below `k`.
pub fn propagating_count(w: f64, lateral: LateralBc, k: f64) -> usize {
    (0..).take_while(|&n| lateral.cutoff(n, w) < k).count()
}

/// An analytic duct mode on the transverse interval `[low, high]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuctMode {
    pub index: usize,
    pub lateral: LateralBc,
    pub low: f64,
    pub high: f64,
    pub cutoff: f64,
    pub beta: Complex64,
}

impl DuctMode {
    pub fn new(index: usize, lateral: LateralBc, low: f64, high: f64, k: f64) -> Result<Self> {
        let w = high - low;
        let cutoff = cutoffs(w, lateral, index + 1)?[index];
        let beta = axial_wavenumber(cutoff, k)?;
        Ok(DuctMode { index, lateral, low, high, cutoff, beta })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn is_propagating(&self) -> bool {
        self.beta.im == 0.0
    }

    /// L²-normalized transverse profile.
    pub fn profile(&self, t: f64) -> f64 {
        let w = self.width();
        let n = self.index as f64;
        let s = (2.0 / w).sqrt();
        match self.lateral {
            LateralBc::NN if self.index == 0 => 1.0 / w.sqrt(),
            LateralBc::NN => s * (n * PI * (t - self.low) / w).cos(),
            LateralBc::DN => s * ((n + 0.5) * PI * (t - self.low) / w).sin(),
            LateralBc::ND => s * ((n + 0.5) * PI * (t - self.high) / w).sin(),
            LateralBc::DD => s * ((n + 1.0) * PI * (t - self.low) / w).sin(),
        }
    }

    /// Amplitude factor: `1/√(2β)` for propagating modes, 1 otherwise.
    pub fn flux_scale(&self) -> f64 {
        if self.is_propagating() {
            1.0 / (2.0 * self.beta.re).sqrt()
        } else {
            1.0
        }
    }

    /// `φ_n(t) e^{±iβ s}` with the flux scaling; `sign` is +1 or -1.
    pub fn wave(&self, s: f64, t: f64, sign: f64) -> Complex64 {
        (Complex64::i() * self.beta * sign * s).exp() * (self.profile(t) * self.flux_scale())
    }
}

/// Discrete transverse eigenpairs of the lumped finite-volume operator on a
/// cross-section, orthonormal in the lumped mass inner product.
#[derive(Clone, Debug)]
pub struct TransverseModes {
    pub lateral: LateralBc,
    pub low: f64,
    pub high: f64,
    /// Coordinates of the free (non-Dirichlet) nodes.
    pub coords: Vec<f64>,
    pub mass: Vec<f64>,
    /// Eigenvalues, ascending; they play the role of `λ_n²`.
    pub mu: Vec<f64>,
    /// Column `n` is mode `n` at the free nodes.
    pub vectors: Mat<f64>,
}

impl TransverseModes {
    /// `nodes` lists every node of the cross-section in increasing order,
    /// including nodes on Dirichlet walls.
    pub fn new(nodes: &[f64], lateral: LateralBc) -> Result<Self> {
        let n_all = nodes.len();
        if n_all < 2 {
            return Err(invalid("cross-section needs at least two nodes"));
        }
        if nodes.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(invalid("cross-section nodes must increase"));
        }
        let mut diag = vec![0.0; n_all];
        let mut mass = vec![0.0; n_all];
        let mut off = vec![0.0; n_all - 1];
        for (e, p) in nodes.windows(2).enumerate() {
            let d = p[1] - p[0];
            diag[e] += 1.0 / d;
            diag[e + 1] += 1.0 / d;
            off[e] = -1.0 / d;
            mass[e] += 0.5 * d;
            mass[e + 1] += 0.5 * d;
        }
        let first = usize::from(lateral.low() == WallBc::Dirichlet);
        let last = n_all - usize::from(lateral.high() == WallBc::Dirichlet);
        if last <= first {
            return Err(invalid("cross-section has no free nodes"));
        }
        let m = last - first;
        let inv_sqrt: Vec<f64> = (first..last).map(|i| 1.0 / mass[i].sqrt()).collect();
        let s = Mat::<f64>::from_fn(m, m, |i, j| {
            let (gi, gj) = (i + first, j + first);
            let kij = if gi == gj {
                diag[gi]
            } else if gi + 1 == gj {
                off[gi]
            } else if gj + 1 == gi {
                off[gj]
            } else {
                0.0
            };
            kij * inv_sqrt[i] * inv_sqrt[j]
        });
        let evd = s
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Solver(format!("transverse eigenproblem: {e:?}")))?;
        let mu: Vec<f64> = (0..m).map(|i| evd.S()[i]).collect();
        let u = evd.U();
        let coords: Vec<f64> = nodes[first..last].to_vec();
        let mass: Vec<f64> = mass[first..last].to_vec();
        let (low, high) = (nodes[0], nodes[n_all - 1]);
        let mut vectors = Mat::<f64>::from_fn(m, m, |i, j| u[(i, j)] * inv_sqrt[i]);
        for j in 0..m {
            let reference = DuctMode {
                index: j,
                lateral,
                low,
                high,
                cutoff: 0.0,
                beta: Complex64::new(1.0, 0.0),
            };
            let overlap: f64 = (0..m).map(|i| mass[i] * vectors[(i, j)] * reference.profile(coords[i])).sum();
            let flip = if overlap.abs() > 1e-3 {
                overlap < 0.0
            } else {
                (0..m).find(|&i| vectors[(i, j)].abs() > 1e-12).is_some_and(|i| vectors[(i, j)] < 0.0)
            };
            if flip {
                for i in 0..m {
                    vectors[(i, j)] = -vectors[(i, j)];
                }
            }
        }
        Ok(TransverseModes { lateral, low, high, coords, mass, mu, vectors })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Lumped-mass projection `φ_nᵀ M v` of nodal values onto mode `n`.
    pub fn project(&self, n: usize, values: &[Complex64]) -> Complex64 {
        values.iter().enumerate().map(|(i, v)| v * (self.mass[i] * self.vectors[(i, n)])).sum()
    }

    /// All modal coefficients of `values`.
    pub fn project_all(&self, values: &[Complex64]) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.project(n, values)).collect()
    }

    /// Nodal values of `Σ_n c_n φ_n`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|i| coeffs.iter().enumerate().map(|(n, c)| c * self.vectors[(i, n)]).sum())
            .collect()
    }
}

/// Outgoing root of the three-term axial recurrence of one transverse mode
/// on a uniform axial grid of spacing `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxialRoot {
    /// Ratio `u_{j+1}/u_j` of the outgoing (or decaying) grid wave.
    pub rho: Complex64,
    /// Exterior Schur complement `(c − ρ)/a` seen by the cut node.
    pub schur: Complex64,
    /// Discrete axial wavenumber for propagating waves.
    pub kappa: Option<f64>,
}

pub fn axial_root(mu: f64, k: f64, a: f64) -> AxialRoot {
    let c = 1.0 + 0.5 * a * a * (mu - k * k);
    let (rho, kappa) = if c.abs() < 1.0 {
        (Complex64::new(c, (1.0 - c * c).sqrt()), Some(c.acos() / a))
    } else if c >= 1.0 {
        (Complex64::new(c - (c * c - 1.0).sqrt(), 0.0), None)
    } else {
        (Complex64::new(c + (c * c - 1.0).sqrt(), 0.0), None)
    };
    AxialRoot { rho, schur: (Complex64::new(c, 0.0) - rho) / a, kappa }
}
