//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines reach the terminal. The
//! process fails if any criterion fails, except those listed in
//! `DOCUMENTED`, which are known shortfalls explained in the README. Their
//! lines still read FAIL.

use std::f64::consts::PI;
use std::time::Instant;

use bguide::asymptotics::{count_antiphase_crossings, AsymptoticModel, BranchLimit, MixedLimit};
use bguide::design::{default_step, find_invisibility, find_zero_reflection, find_zero_transmission, InvisibilitySearch};
use bguide::geometry::{BranchedGuide, WallBc, DEFAULT_Y_CUT};
use bguide::mesh::Numerics;
use bguide::scattering::{full_scattering, half_scattering, limit_smatrix, scattering_from_halves, sweep_heights};
use bguide::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const K: f64 = 0.8 * PI;

/// Criteria whose failure is a known, documented shortfall.
const DOCUMENTED: &[u32] = &[1, 7, 10];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn h64() -> Numerics {
    Numerics::default()
}

fn guide(ell: f64, l: f64) -> BranchedGuide {
    BranchedGuide::new(ell, l, K)
}

fn c1_energy() -> Verdict {
    const TOL: f64 = 1e-3;
    const SHRINK: f64 = 3.0;
    let widths = [0.7, 1.0, 1.4, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let pairs: Vec<(f64, f64)> = (0..20).map(|_| (widths[rng.gen_range(0..4)], rng.gen_range(2.0..10.0))).collect();
    let residuals = |h: f64| -> Vec<f64> {
        let num = Numerics::with_h(h);
        pairs.par_iter().map(|&(ell, l)| full_scattering(&guide(ell, l), &num).unwrap().energy_residual).collect()
    };
    let coarse = residuals(1.0 / 64.0);
    let fine = residuals(1.0 / 128.0);
    let max_c = coarse.iter().cloned().fold(0.0, f64::max);
    let max_f = fine.iter().cloned().fold(0.0, f64::max);
    let shrink = max_c / max_f;
    verdict(
        max_c <= TOL && shrink >= SHRINK,
        format!("max residual {max_c:.2e} at h=1/64, {max_f:.2e} at h=1/128, shrink {shrink:.2}x (need <= {TOL:e} and >= {SHRINK}x)"),
    )
}

fn c2_unitarity() -> Verdict {
    const TOL: f64 = 1e-3;
    let s = limit_smatrix(&guide(1.0, 2.0), WallBc::Neumann, DEFAULT_Y_CUT, &h64()).unwrap();
    let m = limit_smatrix(&guide(1.4, 2.0), WallBc::Dirichlet, DEFAULT_Y_CUT, &h64()).unwrap();
    let worst = [s.unitarity_residual, s.symmetry_residual, m.unitarity_residual, m.symmetry_residual];
    let ok = s.entries.len() == 2 && m.entries.len() == 2 && worst.iter().all(|&v| v <= TOL);
    verdict(
        ok,
        format!(
            "s_inf(l=1): unitarity {:.2e}, |t-t°| {:.2e}; S_inf(l=1.4): unitarity {:.2e}, |t-t°| {:.2e} (need <= {TOL:e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c3_recombination() -> Verdict {
    const TOL: f64 = 5e-3;
    let ls: Vec<f64> = (0..10).map(|i| 2.0 + 0.8 * i as f64).collect();
    let worst = ls
        .par_iter()
        .map(|&l| {
            let g = guide(1.0, l);
            let full = full_scattering(&g, &h64()).unwrap();
            let halves = scattering_from_halves(&g, &h64()).unwrap();
            let d = [full.reflection - halves.reflection, full.transmission - halves.transmission];
            d.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    verdict(worst <= TOL, format!("max componentwise gap {worst:.2e} over L = 2..9.2 (need <= {TOL:e})"))
}

/// Root nearest `target` among the design roots in a window around it.
fn nearest_root(ell: f64, target: f64, zero_r: bool, tol: f64) -> (f64, f64) {
    let g = guide(ell, target);
    let w = (target - 0.5, target + 0.5);
    let res = if zero_r {
        find_zero_reflection(&g, w, 8, tol, &h64()).unwrap()
    } else {
        find_zero_transmission(&g, w, 8, tol, &h64()).unwrap()
    };
    res.roots
        .iter()
        .map(|p| (p.height, p.objective))
        .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
        .unwrap_or((f64::NAN, f64::INFINITY))
}

fn reproduce(zero_r: bool, targets: [(f64, f64); 2], tol: f64, what: &str) -> Verdict {
    const DL: f64 = 0.05;
    let found: Vec<(f64, f64, f64, f64)> =
        targets.par_iter().map(|&(ell, t)| {
            let (l, v) = nearest_root(ell, t, zero_r, tol);
            (ell, t, l, v)
        }).collect();
    let ok = found.iter().all(|&(_, t, l, v)| (l - t).abs() <= DL && v <= tol);
    let parts: Vec<String> =
        found.iter().map(|(ell, t, l, v)| format!("l={ell}: L={l:.6} (target {t}), {what}={v:.2e}")).collect();
    verdict(ok, format!("{} (need |dL| <= {DL}, {what} <= {tol:e})", parts.join("; ")))
}

fn c4_zero_reflection() -> Verdict {
    reproduce(true, [(1.0, 3.3649), (2.0, 5.5329)], 1e-3, "|R|")
}

fn c5_zero_transmission() -> Verdict {
    reproduce(false, [(1.0, 3.85962), (2.0, 3.152073)], 1e-2, "|T|")
}

fn c6_spacing() -> Verdict {
    const REL: f64 = 0.02;
    let res = find_zero_reflection(&guide(1.0, 3.0), (2.0, 10.0), 20, 1e-3, &h64()).unwrap();
    let ls: Vec<f64> = res.roots.iter().map(|p| p.height).collect();
    let gaps: Vec<f64> = ls.windows(2).map(|w| w[1] - w[0]).collect();
    let want = PI / K;
    let worst = gaps.iter().map(|g| (g / want - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        gaps.len() >= 2 && worst <= REL,
        format!("{} roots, gaps {:?}, worst relative deviation from pi/k {worst:.2e} (need <= {REL})", ls.len(), round(&gaps)),
    )
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e5).round() / 1e5).collect()
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c7_decay() -> Verdict {
    const REL: f64 = 0.2;
    let g = guide(1.0, 3.0);
    let r_inf = limit_smatrix(&g, WallBc::Dirichlet, DEFAULT_Y_CUT, &h64()).unwrap().r();
    let ls: Vec<f64> = (0..=20).map(|i| 3.0 + 0.25 * i as f64).collect();
    let logs: Vec<f64> = ls
        .par_iter()
        .map(|&l| (half_scattering(&g.with_height(l), WallBc::Dirichlet, &h64()).unwrap().reflection - r_inf).norm().ln())
        .collect();
    let s = slope(&ls, &logs);
    let want = -0.6 * PI;
    verdict((s / want - 1.0).abs() <= REL, format!("fitted slope {s:.4} vs -0.6pi = {want:.4} (need within {}%)", REL * 100.0))
}

/// `max(|R − R_asy|, |T − T_asy|)` on `ls` at grid step `h`.
fn asymptotic_errors(ell: f64, ls: &[f64], h: f64) -> Vec<f64> {
    let num = Numerics::with_h(h);
    let g = guide(ell, 4.0);
    let n = limit_smatrix(&g, WallBc::Neumann, DEFAULT_Y_CUT, &num).unwrap();
    let m = limit_smatrix(&g, WallBc::Dirichlet, DEFAULT_Y_CUT, &num).unwrap();
    let model = AsymptoticModel::from_limits(K, &n, &m).unwrap();
    let cs = sweep_heights(&g, ls, &num).unwrap();
    ls.iter()
        .zip(&cs)
        .map(|(&l, c)| {
            let (ra, ta) = model.rt_asy(l).unwrap();
            (c.reflection - ra).norm().max((c.transmission - ta).norm())
        })
        .collect()
}

fn c8_asymptotic_agreement() -> Verdict {
    const TOL: f64 = 1e-2;
    let ls: Vec<f64> = (0..=120).map(|i| 4.0 + 0.05 * i as f64).collect();
    let coarse = asymptotic_errors(1.4, &ls, 1.0 / 64.0);
    let fine = asymptotic_errors(1.4, &ls, 1.0 / 128.0);
    let max = coarse.iter().cloned().fold(0.0, f64::max);
    // unit windows [4, 5), ..., [9, 10]
    let bounds: Vec<(usize, usize)> = (0..6).map(|w| (20 * w, if w == 5 { 121 } else { 20 * w + 20 })).collect();
    let wmax = |e: &[f64], (a, b): (usize, usize)| e[a..b].iter().cloned().fold(0.0, f64::max);
    let wc: Vec<f64> = bounds.iter().map(|&b| wmax(&coarse, b)).collect();
    let wf: Vec<f64> = bounds.iter().map(|&b| wmax(&fine, b)).collect();
    // a window sits on the discretization floor when halving h at least
    // halves its error: the asymptotic remainder does not depend on h
    let at_floor: Vec<bool> = wc.iter().zip(&wf).map(|(c, f)| *f <= 0.5 * c).collect();
    let first = at_floor.iter().position(|&b| b).unwrap_or(wc.len());
    let decreasing = wc[..first].windows(2).all(|w| w[1] <= w[0]);
    let stays = at_floor[first..].iter().all(|&b| b);
    verdict(
        max <= TOL && decreasing && stays && first < wc.len(),
        format!(
            "max error {max:.2e}; unit-window maxima at h=1/64 {:?}, at h=1/128 {:?}; floor reached from window {first} (need <= {TOL:e}, decreasing until the floor)",
            sci(&wc),
            sci(&wf)
        ),
    )
}

fn sci(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.1e}")).collect()
}

/// Exact unitary symmetric 2×2 matrix `O diag(e^{ia}, e^{ib}) Oᵀ`.
fn unitary_symmetric(theta: f64, a: f64, b: f64) -> [[C; 2]; 2] {
    let (c, s) = (theta.cos(), theta.sin());
    let (ea, eb) = (C::new(0.0, a).exp(), C::new(0.0, b).exp());
    [[c * c * ea + s * s * eb, c * s * (ea - eb)], [c * s * (ea - eb), s * s * ea + c * c * eb]]
}

fn c9_mobius() -> Verdict {
    const TOL: f64 = 1e-12;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r_inf = C::new(0.0, 0.7).exp();
    let mut drawn = 0;
    while drawn < 50 {
        let s = unitary_symmetric(rng.gen_range(0.1..1.4), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        // |t| → 0 degenerates the map (radius |tt°|/(1 − |r°|²) is 0/0);
        // keep the draws well conditioned so roundoff stays at machine level
        if s[1][0].norm() < 0.3 {
            continue;
        }
        drawn += 1;
        let b = BranchLimit { r: s[0][0], t: s[1][0], t_circ: s[0][1], r_circ: s[1][1], wavenumber: K };
        let (center, radius) = b.circle().unwrap();
        worst = worst.max(center.norm()).max((radius - 1.0).abs());
        let model = AsymptoticModel { k: K, neumann: b, mixed: MixedLimit::Scalar(r_inf) };
        for _ in 0..10 {
            let l = rng.gen_range(1.5..20.0);
            let r = model.r_asy(l).unwrap();
            worst = worst.max((r.norm() - 1.0).abs());
            worst = worst.max((model.r_asy(l + PI / K).unwrap() - r).norm());
            let (big_r, big_t) = model.rt_asy(l).unwrap();
            worst = worst.max(((big_r - r_inf / 2.0).norm() - 0.5).abs());
            worst = worst.max(((big_t + r_inf / 2.0).norm() - 0.5).abs());
        }
    }
    // rational regime: α = k n/m makes the pair of coefficients mπ/k periodic
    for (m, n) in [(2u32, 1u32), (3, 1)] {
        let s = unitary_symmetric(0.6, 0.3, -1.1);
        let p = unitary_symmetric(1.1, 2.0, 0.4);
        let alpha = K * n as f64 / m as f64;
        let limit = |s: [[C; 2]; 2], w: f64| BranchLimit { r: s[0][0], t: s[1][0], t_circ: s[0][1], r_circ: s[1][1], wavenumber: w };
        let model = AsymptoticModel { k: K, neumann: limit(s, K), mixed: MixedLimit::Branch(limit(p, alpha)) };
        let period = m as f64 * PI / K;
        for i in 0..25 {
            let l = 1.5 + 0.37 * i as f64;
            let (a, b) = model.rt_asy(l).unwrap();
            let (c, d) = model.rt_asy(l + period).unwrap();
            worst = worst.max((a - c).norm()).max((b - d).norm());
        }
        let curve = model.curve_samples(m, n, 400).unwrap();
        let (first, last) = (curve[0], curve[curve.len() - 1]);
        worst = worst.max((first.0 - last.0).norm()).max((first.1 - last.1).norm());
        // the curve parameter z = e^{-2ikL/m} reproduces rt_asy
        let l = 2.3;
        let z = C::new(0.0, -2.0 * K * l / m as f64).exp();
        let r = model.neumann.reflection_at(z.powu(m));
        let MixedLimit::Branch(bm) = &model.mixed else { unreachable!() };
        let big = bm.reflection_at(z.powu(n));
        let (want_r, want_t) = model.rt_asy(l).unwrap();
        worst = worst.max((0.5 * (r + big) - want_r).norm()).max((0.5 * (r - big) - want_t).norm());
    }
    verdict(worst <= TOL, format!("largest identity defect {worst:.2e} (need <= {TOL:e})"))
}

fn c10_invisibility() -> Verdict {
    const DG: f64 = 0.05;
    const DL: f64 = 0.05;
    const TOL: f64 = 1e-2;
    let search = InvisibilitySearch {
        ell: 1.0,
        k: K,
        offset: 1.5,
        width: 1.0,
        gamma_window: (1.0, 10.0),
        height_window: (5.0, 10.0),
        tol: TOL,
        joint_refine: false,
    };
    let res = find_invisibility(&search, &h64()).unwrap();
    let Some(best) = res.best.clone() else {
        return verdict(false, format!("no candidate; warnings {:?}", res.warnings));
    };
    let (g0, l0) = (2.4959, 6.384936);
    let ok = (best.gamma - g0).abs() <= DG && (best.height - l0).abs() <= DL && best.defect <= TOL;
    let near = res
        .candidates
        .iter()
        .filter(|c| (c.gamma - g0).abs() <= DG && (c.height - l0).abs() <= DL)
        .map(|c| format!("(gamma={:.6}, L={:.6}, |T-1|={:.1e})", c.gamma, c.height, c.defect))
        .collect::<Vec<_>>();
    verdict(
        ok,
        format!(
            "selected gamma={:.6}, L={:.6}, |T-1|={:.2e} among {} candidates on {} side heights; candidates near target: {} (need within ({DG}, {DL}) of ({g0}, {l0}), |T-1| <= {TOL:e})",
            best.gamma,
            best.height,
            best.defect,
            res.candidates.len(),
            res.gamma_roots.len(),
            if near.is_empty() { "none".into() } else { near.join(", ") }
        ),
    )
}

fn c11_rational_zeros() -> Verdict {
    const WINDOW: f64 = 2.5;
    let ell = 2.0 * PI / (K * 3f64.sqrt());
    let g = guide(ell, 3.0);
    let step = default_step(K);
    let mut out = Vec::new();
    let mut ok = true;
    for w in 0..3 {
        let (a, b) = (2.5 + WINDOW * w as f64, 2.5 + WINDOW * (w + 1) as f64);
        let n = ((b - a) / step).ceil() as usize;
        let ls: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let pairs: Vec<(C, C)> = ls
            .par_iter()
            .map(|&l| {
                let gl = g.with_height(l);
                let r = half_scattering(&gl, WallBc::Neumann, &h64()).unwrap().reflection;
                let m = half_scattering(&gl, WallBc::Dirichlet, &h64()).unwrap().reflection;
                (r, m)
            })
            .collect();
        // R = 0 where r = −R_mix, T = 0 where r = R_mix
        let zr = count_antiphase_crossings(&pairs);
        let flipped: Vec<(C, C)> = pairs.iter().map(|&(r, m)| (r, -m)).collect();
        let zt = count_antiphase_crossings(&flipped);
        ok &= zr >= 1 && zt >= 1;
        out.push(format!("[{a}, {b}): {zr} zeros of R, {zt} of T"));
    }
    verdict(ok, format!("l={ell:.5}: {} (need >= 1 each per window)", out.join("; ")))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    // `cargo test -- <filter>` passes arguments; honour a bare criterion filter
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 11] = [
        (1, "energy conservation", c1_energy),
        (2, "unitarity and symmetry of the limit matrices", c2_unitarity),
        (3, "symmetry decomposition", c3_recombination),
        (4, "non-reflectivity reproduction", c4_zero_reflection),
        (5, "perfect reflectivity reproduction", c5_zero_transmission),
        (6, "zero spacing", c6_spacing),
        (7, "exponential convergence rate", c7_decay),
        (8, "asymptotic formula agreement", c8_asymptotic_agreement),
        (9, "Mobius identities", c9_mobius),
        (10, "invisibility reproduction", c10_invisibility),
        (11, "rational two-mode zero count", c11_rational_zeros),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && DOCUMENTED.contains(&id) { " [documented]" } else { "" };
        println!("criterion {id:>2} {tag}{note}: {name}: {} ({:.1} s)", v.detail, t.elapsed().as_secs_f64());
        if !v.pass && !DOCUMENTED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("undocumented failures: {unexpected:?}");
        std::process::exit(1);
    }
}
