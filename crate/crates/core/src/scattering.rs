//! Scattering coefficients of the branched guide and of its limit problems.

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{build_branched_guide, half_domain, truncate_semi_infinite, BranchedGuide, Domain, WallBc};
use crate::mesh::Numerics;
use crate::modes::propagating_count;
use crate::solver::{Factored, FieldSolution, Incidence};

/// Coefficients of the full problem for a piston wave from the left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullCoefficients {
    pub reflection: C,
    pub transmission: C,
    /// `| |R|² + |T|² − 1 |`.
    pub energy_residual: f64,
    pub condition_estimate: f64,
    pub residual_norm: f64,
    pub warnings: Vec<String>,
}

/// Reflection coefficient of a half problem (`r` for a Neumann cut,
/// `R_mix` for a Dirichlet cut).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfCoefficients {
    pub symmetry: WallBc,
    pub reflection: C,
    /// `| Σ|outgoing|² − 1 |` over every propagating channel.
    pub energy_residual: f64,
    pub condition_estimate: f64,
    pub residual_norm: f64,
    pub warnings: Vec<String>,
}

fn port(sol: &FieldSolution, name: &str) -> Result<usize> {
    sol.port_index(name)
}

/// Solves the full problem on the truncated guide.
pub fn full_scattering(g: &BranchedGuide, numerics: &Numerics) -> Result<FullCoefficients> {
    let d = build_branched_guide(g)?;
    let f = Factored::new(&d, numerics)?;
    let left = d.port("left").ok_or_else(|| invalid("guide has no left port"))?;
    let sol = f.solve(Incidence::new(left, 0))?;
    let right = port(&sol, "right")?;
    let reflection = sol.amplitude(left, 0);
    let transmission = sol.amplitude(right, 0);
    Ok(FullCoefficients {
        reflection,
        transmission,
        energy_residual: sol.energy_residual(),
        condition_estimate: sol.condition_estimate,
        residual_norm: sol.residual_norm,
        warnings: sol.warnings,
    })
}

/// Solves the left half of the guide with the cut `x = 0` tagged `symmetry`.
pub fn half_scattering(g: &BranchedGuide, symmetry: WallBc, numerics: &Numerics) -> Result<HalfCoefficients> {
    let d = half_domain(&build_branched_guide(g)?, symmetry)?;
    let sol = solve_left(&d, numerics)?;
    Ok(HalfCoefficients {
        symmetry,
        reflection: sol.amplitude(0, 0),
        energy_residual: sol.energy_residual(),
        condition_estimate: sol.condition_estimate,
        residual_norm: sol.residual_norm,
        warnings: sol.warnings,
    })
}

fn solve_left(d: &Domain, numerics: &Numerics) -> Result<FieldSolution> {
    let left = d.port("left").ok_or_else(|| invalid("domain has no left port"))?;
    if left != 0 {
        return Err(invalid("the left port must come first"));
    }
    Factored::new(d, numerics)?.solve(Incidence::new(left, 0))
}

/// `R = (r + R_mix)/2`, `T = (r − R_mix)/2`.
pub fn recombine(r: C, r_mix: C) -> (C, C) {
    (0.5 * (r + r_mix), 0.5 * (r - r_mix))
}

/// Full coefficients assembled from the two half problems.
pub fn scattering_from_halves(g: &BranchedGuide, numerics: &Numerics) -> Result<FullCoefficients> {
    let n = half_scattering(g, WallBc::Neumann, numerics)?;
    let m = half_scattering(g, WallBc::Dirichlet, numerics)?;
    let (reflection, transmission) = recombine(n.reflection, m.reflection);
    let mut warnings = n.warnings;
    warnings.extend(m.warnings);
    Ok(FullCoefficients {
        reflection,
        transmission,
        energy_residual: (reflection.norm_sqr() + transmission.norm_sqr() - 1.0).abs(),
        condition_estimate: n.condition_estimate.max(m.condition_estimate),
        residual_norm: n.residual_norm.max(m.residual_norm),
        warnings,
    })
}

/// Full coefficients at each height, solved in parallel.
pub fn sweep_heights(g: &BranchedGuide, heights: &[f64], numerics: &Numerics) -> Result<Vec<FullCoefficients>> {
    heights.par_iter().map(|&l| full_scattering(&g.with_height(l), numerics)).collect()
}

/// Scattering matrix of a half problem with a semi-infinite branch.
///
/// Channel 0 is the guide, channel 1 (when present) the branch, so a 2×2
/// matrix reads `[[r, t°], [t, r°]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMatrix {
    pub symmetry: WallBc,
    pub entries: Vec<Vec<C>>,
    /// `‖S S̄ᵀ − I‖_F`.
    pub unitarity_residual: f64,
    /// `|t − t°|` (zero for a scalar).
    pub symmetry_residual: f64,
    /// Discrete axial wavenumber of the propagating branch mode, if any.
    pub branch_wavenumber: Option<f64>,
    /// Discrete axial wavenumber of the guide mode.
    pub guide_wavenumber: f64,
    pub warnings: Vec<String>,
}

impl SMatrix {
    pub fn is_scalar(&self) -> bool {
        self.entries.len() == 1
    }

    pub fn r(&self) -> C {
        self.entries[0][0]
    }

    /// Guide-to-branch transmission `t`.
    pub fn t(&self) -> Option<C> {
        self.entries.get(1).map(|row| row[0])
    }

    /// Branch-to-guide transmission `t°`.
    pub fn t_circ(&self) -> Option<C> {
        self.entries.first().and_then(|row| row.get(1).copied())
    }

    /// Branch-to-branch reflection `r°`.
    pub fn r_circ(&self) -> Option<C> {
        self.entries.get(1).map(|row| row[1])
    }

    pub fn from_entries(symmetry: WallBc, entries: Vec<Vec<C>>) -> Result<SMatrix> {
        let n = entries.len();
        if !(n == 1 || n == 2) || entries.iter().any(|r| r.len() != n) {
            return Err(invalid("scattering matrix must be 1×1 or 2×2"));
        }
        let mut res = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s: C = (0..n).map(|l| entries[i][l] * entries[j][l].conj()).sum();
                if i == j {
                    s -= 1.0;
                }
                res += s.norm_sqr();
            }
        }
        let symmetry_residual = if n == 2 { (entries[1][0] - entries[0][1]).norm() } else { 0.0 };
        Ok(SMatrix {
            symmetry,
            entries,
            unitarity_residual: res.sqrt(),
            symmetry_residual,
            branch_wavenumber: None,
            guide_wavenumber: f64::NAN,
            warnings: Vec::new(),
        })
    }
}

/// The half problem with a semi-infinite central branch, truncated by a
/// transparent port at `y_cut`. The branch top in `g` is ignored.
pub fn limit_domain(g: &BranchedGuide, symmetry: WallBc, y_cut: f64) -> Result<Domain> {
    let top = g.side_branches.iter().fold(1.5_f64, |m, b| m.max(b.height));
    if !(y_cut > top) {
        return Err(invalid(format!("cut height {y_cut} must clear every branch top ({top})")));
    }
    let shape = g.with_height(top.min(y_cut));
    let half = half_domain(&build_branched_guide(&shape)?, symmetry)?;
    truncate_semi_infinite(&half, y_cut)
}

/// Computes `s_∞` (Neumann cut) or `𝕊_∞` (Dirichlet cut).
pub fn limit_smatrix(g: &BranchedGuide, symmetry: WallBc, y_cut: f64, numerics: &Numerics) -> Result<SMatrix> {
    let w = g.ell / 2.0;
    let lateral = match symmetry {
        WallBc::Neumann => crate::modes::LateralBc::NN,
        WallBc::Dirichlet => crate::modes::LateralBc::ND,
    };
    let p = propagating_count(w, lateral, g.k);
    if p > 1 {
        return Err(Error::Regime(format!("{p} propagating branch modes; only 0 or 1 are supported")));
    }
    let d = limit_domain(g, symmetry, y_cut)?;
    let left = d.port("left").ok_or_else(|| invalid("no left port"))?;
    let top = d.port("top").ok_or_else(|| invalid("no top port"))?;
    let f = Factored::new(&d, numerics)?;
    let from_left = f.solve(Incidence::new(left, 0))?;
    let mut warnings = from_left.warnings.clone();
    let guide_wavenumber = f.system.ports[left].roots[0].kappa.unwrap_or(f64::NAN);
    let mut s = if p == 0 {
        SMatrix::from_entries(symmetry, vec![vec![from_left.amplitude(left, 0)]])?
    } else {
        let from_top = f.solve(Incidence::new(top, 0))?;
        warnings.extend(from_top.warnings.iter().cloned());
        let e = vec![
            vec![from_left.amplitude(left, 0), from_top.amplitude(left, 0)],
            vec![from_left.amplitude(top, 0), from_top.amplitude(top, 0)],
        ];
        let mut s = SMatrix::from_entries(symmetry, e)?;
        s.branch_wavenumber = f.system.ports[top].roots[0].kappa;
        s
    };
    warnings.sort();
    warnings.dedup();
    s.warnings = warnings;
    s.guide_wavenumber = guide_wavenumber;
    Ok(s)
}

/// A straight cut across a duct between two adjacent grid lines: `outer`
/// lies outside the region the form is taken over, `inner` inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineCut {
    /// True for a cut `x = const` (edges run along x).
    pub vertical: bool,
    pub outer: f64,
    pub inner: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Discrete `q(φ, ψ) = ∫_Σ ∂_nφ ψ̄ − φ ∂_nψ̄` summed over the edges crossing
/// the cuts, with `n` pointing away from the enclosed region.
pub fn symplectic_form(phi: &FieldSolution, psi: &FieldSolution, cuts: &[LineCut], conj_psi: bool) -> Result<C> {
    let fa = field_map(phi);
    let fb = field_map(psi);
    let mut q = C::new(0.0, 0.0);
    for cut in cuts {
        let mut trans: Vec<f64> = fa
            .keys()
            .filter_map(|&(x, y)| {
                let (a, t) = if cut.vertical { (x, y) } else { (y, x) };
                (a == key1(cut.outer) && t >= key1(cut.lo) && t <= key1(cut.hi)).then_some(t as f64 * 1e-8)
            })
            .collect();
        trans.sort_by(f64::total_cmp);
        if trans.len() < 2 {
            return Err(invalid("cut does not cross the grid"));
        }
        let dist = (cut.inner - cut.outer).abs();
        for (i, &t) in trans.iter().enumerate() {
            let left = if i > 0 { t - trans[i - 1] } else { 0.0 };
            let right = if i + 1 < trans.len() { trans[i + 1] - t } else { 0.0 };
            let c = 0.5 * (left + right) / dist;
            let at = |m: &std::collections::HashMap<(i64, i64), C>, a: f64| -> Result<C> {
                let k = if cut.vertical { (key1(a), key1(t)) } else { (key1(t), key1(a)) };
                m.get(&k).copied().ok_or_else(|| invalid("cut lines are not grid lines"))
            };
            let (po, pi) = (at(&fa, cut.outer)?, at(&fa, cut.inner)?);
            let (mut so, mut si) = (at(&fb, cut.outer)?, at(&fb, cut.inner)?);
            if conj_psi {
                so = so.conj();
                si = si.conj();
            }
            q += c * (po * si.conj() - pi * so.conj());
        }
    }
    Ok(q)
}

fn key1(v: f64) -> i64 {
    (v * 1e8).round() as i64
}

fn field_map(s: &FieldSolution) -> std::collections::HashMap<(i64, i64), C> {
    s.nodal_field().into_iter().map(|(p, v)| ((key1(p[0]), key1(p[1])), v)).collect()
}

/// Grid lines bracketing a cut at distance `xi` from the junction in the
/// guide (`x = −xi`) and the cut `y = 1 + xi` in the central half-branch.
pub fn junction_cuts(sol: &FieldSolution, ell: f64, xi: f64) -> Result<Vec<LineCut>> {
    let nodes = sol.nodal_field();
    let mut xs: Vec<f64> = nodes.iter().filter(|(p, _)| p[1] == 0.0).map(|(p, _)| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut ys: Vec<f64> = nodes.iter().filter(|(p, _)| (p[0] + ell / 2.0).abs() < 1e-9).map(|(p, _)| p[1]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let bracket = |v: &[f64], at: f64| -> Result<(f64, f64)> {
        let i = v.iter().rposition(|&t| t <= at).ok_or_else(|| invalid("cut outside the grid"))?;
        if i + 1 >= v.len() {
            return Err(invalid("cut outside the grid"));
        }
        Ok((v[i], v[i + 1]))
    };
    let (xa, xb) = bracket(&xs, -xi)?;
    let (ya, yb) = bracket(&ys, 1.0 + xi)?;
    Ok(vec![
        LineCut { vertical: true, outer: xa, inner: xb, lo: 0.0, hi: 1.0 },
        LineCut { vertical: false, outer: yb, inner: ya, lo: -ell / 2.0, hi: 0.0 },
    ])
}

/// Identities of the form `q` on a limit problem with one propagating branch
/// mode: `q(u, u) = i(|r|² + |t|² − 1)` and `q(u, conj u°) = t − t°`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub q_guide_guide: C,
    pub q_guide_branch: C,
    pub expected_guide_guide: C,
    pub expected_guide_branch: C,
    /// Largest deviation from the identities.
    pub residual: f64,
}

/// Evaluates the identities on the Neumann limit problem of `g`.
pub fn symplectic_check(g: &BranchedGuide, y_cut: f64, xi: f64, numerics: &Numerics) -> Result<SymplecticReport> {
    let d = limit_domain(g, WallBc::Neumann, y_cut)?;
    let f = Factored::new(&d, numerics)?;
    let left = d.port("left").ok_or_else(|| invalid("no left port"))?;
    let top = d.port("top").ok_or_else(|| invalid("no top port"))?;
    let u = f.solve(Incidence::new(left, 0))?;
    let uc = f.solve(Incidence::new(top, 0))?;
    let cuts = junction_cuts(&u, g.ell, xi)?;
    let q_uu = symplectic_form(&u, &u, &cuts, false)?;
    let q_uv = symplectic_form(&u, &uc, &cuts, true)?;
    let (r, t, tc) = (u.amplitude(left, 0), u.amplitude(top, 0), uc.amplitude(left, 0));
    let e_uu = C::i() * (r.norm_sqr() + t.norm_sqr() - 1.0);
    let e_uv = t - tc;
    Ok(SymplecticReport {
        q_guide_guide: q_uu,
        q_guide_branch: q_uv,
        expected_guide_guide: e_uu,
        expected_guide_branch: e_uv,
        residual: (q_uu - e_uu).norm().max((q_uv - e_uv).norm()),
    })
}
