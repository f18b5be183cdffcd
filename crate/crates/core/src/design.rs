//! Searches for branch heights with `R = 0`, `T = 0` or `T = 1`.
//!
//! Every search sweeps its window on a grid of step `π/(50k)` and refines the
//! promising samples: minima of `|R|` or `|T|` by golden-section search on the
//! squared modulus, phase conditions by Brent's method on a smooth component.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentRoot;
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticModel, MixedLimit};
use crate::error::{invalid, Error, Result};
use crate::geometry::{BranchedGuide, WallBc, DEFAULT_Y_CUT};
use crate::mesh::Numerics;
use crate::scattering::{full_scattering, half_scattering, limit_smatrix};

/// Relative tolerance on the refined abscissa.
pub const XTOL_REL: f64 = 1e-7;

/// Sweep step `π/(50k)`.
pub fn default_step(k: f64) -> f64 {
    PI / (50.0 * k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    ZeroReflection,
    ZeroTransmission,
    Invisibility,
}

/// One refined design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Central branch top `L`.
    pub height: f64,
    /// Side branch top `γ`, for invisibility designs.
    pub gamma: Option<f64>,
    pub reflection: C,
    pub transmission: C,
    /// `|R|`, `|T|` or `|T − 1|`.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub objective: Objective,
    pub ell: f64,
    pub tol: f64,
    /// Designs meeting the tolerance, by increasing `L`; when none does, the
    /// best candidate found.
    pub roots: Vec<DesignPoint>,
    /// Heights predicted by the asymptotic model, if available.
    pub seeds: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

struct Scalar<'a, F: Fn(f64) -> Result<f64> + Sync>(&'a F);

impl<F: Fn(f64) -> Result<f64> + Sync> CostFunction for Scalar<'_, F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        (self.0)(*p).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

fn argmin_err(e: argmin::core::Error) -> Error {
    match e.downcast_ref::<Error>() {
        Some(inner) => inner.clone(),
        None => Error::Solver(format!("refinement failed: {e}")),
    }
}

/// Golden-section minimization of `f` on `[a, b]` starting from `x0`.
pub fn golden_minimize<F: Fn(f64) -> Result<f64> + Sync>(f: &F, a: f64, b: f64, x0: f64, xtol_rel: f64) -> Result<f64> {
    let solver = GoldenSectionSearch::new(a, b).and_then(|s| s.with_tolerance(0.5 * xtol_rel)).map_err(argmin_err)?;
    let res = Executor::new(Scalar(f), solver)
        .configure(|s| s.param(x0.clamp(a, b)).max_iters(500))
        .run()
        .map_err(argmin_err)?;
    res.state().get_best_param().copied().ok_or_else(|| Error::Solver("golden-section search returned nothing".into()))
}

/// Brent root of `f` bracketed by `[a, b]`.
pub fn brent_root<F: Fn(f64) -> Result<f64> + Sync>(f: &F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let res = Executor::new(Scalar(f), BrentRoot::new(a, b, xtol))
        .configure(|s| s.max_iters(200))
        .run()
        .map_err(argmin_err)?;
    res.state().get_best_param().copied().ok_or_else(|| Error::Solver("root search returned nothing".into()))
}

/// Samples of the open window `(lo, hi)`: the ends are pulled in by a
/// thousandth of a step.
fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let (lo, hi) = (lo + 1e-3 * step, hi - 1e-3 * step);
    let n = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * step }).collect()
}

fn check_window(w: (f64, f64), floor: f64, what: &str) -> Result<()> {
    // open windows: `lo` may equal the bound, the sweep never evaluates it
    if !(w.0 >= floor && w.1 > w.0 && w.1.is_finite()) {
        return Err(invalid(format!("{what} window {w:?} must satisfy {floor} ≤ lo < hi")));
    }
    Ok(())
}

/// Heights predicted by the asymptotic model for `r_asy(L) = target`.
/// Only the one-mode regime (scalar mixed limit) admits a closed form.
pub fn seed_from_asymptotics(model: &AsymptoticModel, target: C, window: (f64, f64)) -> Result<Vec<f64>> {
    let b = &model.neumann;
    let den = b.r - target;
    if den.norm() < 1e-14 {
        return Err(invalid("target coincides with r_∞"));
    }
    let z = b.r_circ - b.t * b.t_circ / den;
    if (z.norm() - 1.0).abs() > 1e-2 {
        return Ok(Vec::new());
    }
    let kappa = b.wavenumber;
    let base = -z.arg() / (2.0 * kappa);
    let period = PI / kappa;
    let m0 = ((window.0 - base) / period).ceil() as i64;
    let m1 = ((window.1 - base) / period).floor() as i64;
    Ok((m0..=m1).map(|m| base + m as f64 * period).collect())
}

fn model_for(g: &BranchedGuide, numerics: &Numerics) -> Result<AsymptoticModel> {
    let s = limit_smatrix(g, WallBc::Neumann, DEFAULT_Y_CUT, numerics)?;
    let m = limit_smatrix(g, WallBc::Dirichlet, DEFAULT_Y_CUT, numerics)?;
    AsymptoticModel::from_limits(g.k, &s, &m)
}

fn zero_search(
    g: &BranchedGuide,
    objective: Objective,
    window: (f64, f64),
    count: usize,
    tol: f64,
    numerics: &Numerics,
) -> Result<DesignResult> {
    check_window(window, 1.0, "height")?;
    if count == 0 {
        return Err(invalid("count must be positive"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let pick = |r: C, t: C| if objective == Objective::ZeroReflection { r.norm() } else { t.norm() };
    let eval = |l: f64| -> Result<(C, C)> {
        let c = full_scattering(&g.with_height(l), numerics)?;
        Ok((c.reflection, c.transmission))
    };
    let step = default_step(g.k);
    let ls = grid(window.0, window.1, step);
    let samples: Vec<(C, C)> = ls.par_iter().map(|&l| eval(l)).collect::<Result<_>>()?;
    let f: Vec<f64> = samples.iter().map(|&(r, t)| pick(r, t)).collect();
    let mut warnings = Vec::new();

    let mut seeds = Vec::new();
    match model_for(g, numerics) {
        Ok(model) => {
            if let MixedLimit::Scalar(r_inf) = model.mixed {
                let target = if objective == Objective::ZeroReflection { -r_inf } else { r_inf };
                seeds = seed_from_asymptotics(&model, target, window)?;
            }
        }
        Err(e) => warnings.push(format!("no asymptotic seeds: {e}")),
    }

    let mut brackets: Vec<(f64, f64, f64)> = (1..ls.len() - 1)
        .filter(|&i| f[i] <= f[i - 1] && f[i] <= f[i + 1])
        .map(|i| (ls[i - 1], ls[i + 1], ls[i]))
        .collect();
    for &s in &seeds {
        if !brackets.iter().any(|b| s > b.0 && s < b.1) {
            let pad = 1e-3 * step;
            let (a, b) = ((s - step).max(window.0 + pad), (s + step).min(window.1 - pad));
            if b > a {
                brackets.push((a, b, s.clamp(a, b)));
            }
        }
    }
    let sq = |l: f64| -> Result<f64> {
        let (r, t) = eval(l)?;
        Ok(pick(r, t).powi(2))
    };
    let mut found: Vec<DesignPoint> = brackets
        .par_iter()
        .map(|&(a, b, x0)| -> Result<DesignPoint> {
            let l = golden_minimize(&sq, a, b, x0, XTOL_REL)?;
            let (r, t) = eval(l)?;
            Ok(DesignPoint { height: l, gamma: None, reflection: r, transmission: t, objective: pick(r, t) })
        })
        .collect::<Result<_>>()?;
    found.sort_by(|a, b| a.height.total_cmp(&b.height));
    found.dedup_by(|a, b| (a.height - b.height).abs() < 0.5 * step);
    let evaluations = ls.len() + brackets.len() * 40;
    let mut roots: Vec<DesignPoint> = found.iter().filter(|p| p.objective <= tol).take(count).cloned().collect();
    let converged = !roots.is_empty();
    if converged && roots.len() < count {
        warnings.push(format!("only {} of {count} requested roots in the window", roots.len()));
    }
    if !converged {
        let best = found.iter().min_by(|a, b| a.objective.total_cmp(&b.objective)).cloned().or_else(|| {
            let i = (0..f.len()).min_by(|&a, &b| f[a].total_cmp(&f[b]))?;
            Some(DesignPoint { height: ls[i], gamma: None, reflection: samples[i].0, transmission: samples[i].1, objective: f[i] })
        });
        roots.extend(best);
        warnings.push(format!("no design meets the tolerance {tol:e}"));
    }
    Ok(DesignResult { objective, ell: g.ell, tol, roots, seeds, converged, evaluations, warnings })
}

/// Heights `L` in `window` where the full reflection vanishes.
pub fn find_zero_reflection(g: &BranchedGuide, window: (f64, f64), count: usize, tol: f64, numerics: &Numerics) -> Result<DesignResult> {
    zero_search(g, Objective::ZeroReflection, window, count, tol, numerics)
}

/// Heights `L` in `window` where the full transmission vanishes.
pub fn find_zero_transmission(g: &BranchedGuide, window: (f64, f64), count: usize, tol: f64, numerics: &Numerics) -> Result<DesignResult> {
    zero_search(g, Objective::ZeroTransmission, window, count, tol, numerics)
}

/// Where the phase of a sampled unimodular quantity passes through `target`
/// (`π` or `0`): brackets between consecutive samples.
fn phase_brackets(xs: &[f64], vals: &[C], target_negative: bool) -> Vec<(f64, f64)> {
    let sgn = if target_negative { -1.0 } else { 1.0 };
    (0..xs.len() - 1)
        .filter(|&i| {
            let (a, b) = (vals[i], vals[i + 1]);
            sgn * a.re > 0.0 && sgn * b.re > 0.0 && (a.im == 0.0 || a.im.signum() != b.im.signum())
        })
        .map(|i| (xs[i], xs[i + 1]))
        .collect()
}

/// Root of `f` near `x`, widening the bracket until the sign changes.
fn local_root<F: Fn(f64) -> Result<f64> + Sync>(f: &F, x: f64, half: f64) -> Result<f64> {
    for w in [1.0, 2.0, 4.0] {
        let (a, b) = (x - w * half, x + w * half);
        if f(a)?.signum() != f(b)?.signum() {
            return brent_root(f, a, b, XTOL_REL * x.abs());
        }
    }
    Err(Error::Unconverged(format!("no sign change within {} of {x}", 4.0 * half)))
}

/// Options of the two-stage search for `T = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvisibilitySearch {
    pub ell: f64,
    pub k: f64,
    /// Side branch centres at `±offset`.
    pub offset: f64,
    pub width: f64,
    pub gamma_window: (f64, f64),
    pub height_window: (f64, f64),
    pub tol: f64,
    pub joint_refine: bool,
}

/// A `(γ, L)` pair with its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvisibilityCandidate {
    pub gamma: f64,
    pub height: f64,
    /// `r(L)` of the Neumann half problem.
    pub r: C,
    /// `R_mix(L)` of the Dirichlet half problem.
    pub r_mix: C,
    pub reflection: C,
    pub transmission: C,
    /// `|T − 1|`.
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvisibilityResult {
    /// Side heights with `R_∞(γ) = −1`.
    pub gamma_roots: Vec<f64>,
    /// `R_∞` at each side height root.
    pub r_inf: Vec<C>,
    /// Every `(γ, L)` with `r(L) = 1` found in the height window.
    pub candidates: Vec<InvisibilityCandidate>,
    /// The selected design.
    pub best: Option<InvisibilityCandidate>,
    /// The selected design after joint refinement, when requested.
    pub refined: Option<InvisibilityCandidate>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl InvisibilitySearch {
    fn guide(&self, gamma: f64, height: f64) -> BranchedGuide {
        BranchedGuide::new(self.ell, height, self.k).with_side_branch(self.offset, self.width, gamma)
    }

    fn y_cut(&self) -> f64 {
        DEFAULT_Y_CUT.max(self.gamma_window.1 + 1.0)
    }

    /// `R_∞(γ)` on the semi-infinite mixed problem.
    pub fn r_inf(&self, gamma: f64, numerics: &Numerics) -> Result<C> {
        let s = limit_smatrix(&self.guide(gamma, 2.0), WallBc::Dirichlet, self.y_cut(), numerics)?;
        if !s.is_scalar() {
            return Err(Error::Regime("the mixed branch must not carry a propagating mode".into()));
        }
        Ok(s.r())
    }

    pub fn candidate(&self, gamma: f64, height: f64, numerics: &Numerics) -> Result<InvisibilityCandidate> {
        let g = self.guide(gamma, height);
        let r = half_scattering(&g, WallBc::Neumann, numerics)?.reflection;
        let r_mix = half_scattering(&g, WallBc::Dirichlet, numerics)?.reflection;
        let (reflection, transmission) = crate::scattering::recombine(r, r_mix);
        Ok(InvisibilityCandidate { gamma, height, r, r_mix, reflection, transmission, defect: (transmission - 1.0).norm() })
    }

    fn validate(&self) -> Result<()> {
        check_window(self.gamma_window, 1.0, "side height")?;
        check_window(self.height_window, 1.0, "height")?;
        if !(self.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Ok(())
    }

    /// Side heights in the window with `R_∞(γ) = −1`.
    pub fn gamma_roots(&self, numerics: &Numerics) -> Result<Vec<(f64, C)>> {
        let step = default_step(self.k);
        let gs = grid(self.gamma_window.0, self.gamma_window.1, step);
        let vals: Vec<C> = gs.par_iter().map(|&g| self.r_inf(g, numerics)).collect::<Result<_>>()?;
        let im = |g: f64| -> Result<f64> { Ok(self.r_inf(g, numerics)?.im) };
        phase_brackets(&gs, &vals, true)
            .par_iter()
            .map(|&(a, b)| {
                let g = brent_root(&im, a, b, XTOL_REL * b)?;
                Ok((g, self.r_inf(g, numerics)?))
            })
            .collect()
    }

    /// Heights in the window with `r(L) = 1` at fixed `γ`.
    pub fn height_roots(&self, gamma: f64, numerics: &Numerics) -> Result<Vec<f64>> {
        let step = default_step(self.k);
        let ls = grid(self.height_window.0, self.height_window.1, step);
        let r = |l: f64| -> Result<C> { Ok(half_scattering(&self.guide(gamma, l), WallBc::Neumann, numerics)?.reflection) };
        let vals: Vec<C> = ls.par_iter().map(|&l| r(l)).collect::<Result<_>>()?;
        let im = |l: f64| -> Result<f64> { Ok(r(l)?.im) };
        phase_brackets(&ls, &vals, false).par_iter().map(|&(a, b)| brent_root(&im, a, b, XTOL_REL * b)).collect()
    }

    /// Alternates `R_mix(γ; L) = −1` in `γ` and `r(L; γ) = 1` in `L`.
    pub fn refine(&self, start: &InvisibilityCandidate, numerics: &Numerics) -> Result<InvisibilityCandidate> {
        let (mut gamma, mut height) = (start.gamma, start.height);
        let half = 0.5 * default_step(self.k);
        for _ in 0..8 {
            let h0 = height;
            let g_im = |g: f64| -> Result<f64> {
                Ok(half_scattering(&self.guide(g, h0), WallBc::Dirichlet, numerics)?.reflection.im)
            };
            let new_gamma = local_root(&g_im, gamma, half)?;
            let l_im = |l: f64| -> Result<f64> {
                Ok(half_scattering(&self.guide(new_gamma, l), WallBc::Neumann, numerics)?.reflection.im)
            };
            let new_height = local_root(&l_im, height, half)?;
            let moved = (new_gamma - gamma).abs() + (new_height - height).abs();
            gamma = new_gamma;
            height = new_height;
            if moved < 1e-9 {
                break;
            }
        }
        self.candidate(gamma, height, numerics)
    }
}

/// Two-stage search for reflectionless, perfectly transmitting designs:
/// first `R_∞(γ) = −1` on the semi-infinite mixed problem, then `r(L) = 1`
/// on the Neumann half problem. Among the candidates the one with the
/// smallest `|T − 1|` is selected.
pub fn find_invisibility(search: &InvisibilitySearch, numerics: &Numerics) -> Result<InvisibilityResult> {
    search.validate()?;
    let mut warnings = Vec::new();
    let roots = search.gamma_roots(numerics)?;
    if roots.is_empty() {
        return Err(Error::Unconverged("no side height with R_∞ = −1 in the window".into()));
    }
    let mut candidates = Vec::new();
    for &(gamma, _) in &roots {
        for l in search.height_roots(gamma, numerics)? {
            candidates.push(search.candidate(gamma, l, numerics)?);
        }
    }
    if candidates.is_empty() {
        warnings.push("no height with r(L) = 1 in the window".into());
    }
    let best = candidates.iter().min_by(|a, b| a.defect.total_cmp(&b.defect)).cloned();
    let refined = match (&best, search.joint_refine) {
        (Some(b), true) => match search.refine(b, numerics) {
            Ok(c) => {
                let verdict = if c.defect < b.defect { "improved" } else { "did not improve" };
                warnings.push(format!("joint refinement {verdict} |T − 1|: {:.3e} → {:.3e}", b.defect, c.defect));
                Some(c)
            }
            Err(e) => {
                warnings.push(format!("joint refinement abandoned: {e}"));
                None
            }
        },
        _ => None,
    };
    let achieved = [&best, &refined].iter().filter_map(|c| c.as_ref().map(|c| c.defect)).fold(f64::INFINITY, f64::min);
    let converged = achieved <= search.tol;
    if !converged {
        warnings.push(format!("best |T − 1| = {achieved:.3e} exceeds {:.1e}", search.tol));
    }
    Ok(InvisibilityResult {
        gamma_roots: roots.iter().map(|r| r.0).collect(),
        r_inf: roots.iter().map(|r| r.1).collect(),
        candidates,
        best,
        refined,
        converged,
        warnings,
    })
}
