//! Finite-volume Helmholtz solver with exact discrete modal port conditions.
//!
//! The operator is `K − k²M` with a five-point stiffness and lumped mass on a
//! conforming tensor grid. A port contributes the Schur complement of the
//! uniform semi-infinite grid behind it, mode by mode, so a wave leaving
//! through a port is not reflected by the truncation.
//!
//! With [`Method::Reduced`] every rectangle that is a uniform duct hanging off
//! the rest of the domain is eliminated analytically in its transverse
//! eigenbasis; the sparse factorization then only sees the junction block.

use std::collections::HashMap;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as C;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Port, Rect, Side, WallBc, COORD_TOL};
use crate::mesh::{rect_grids, Mesh, Method, Numerics, RectGrid};
use crate::modes::{axial_root, AxialRoot, DuctMode, LateralBc, TransverseModes};

/// Unit-amplitude incoming mode `mode` through port `port`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incidence {
    pub port: usize,
    pub mode: usize,
    pub amplitude: C,
}

impl Incidence {
    pub fn new(port: usize, mode: usize) -> Self {
        Incidence { port, mode, amplitude: C::new(1.0, 0.0) }
    }
}

/// Modal data of a port.
#[derive(Clone, Debug)]
pub struct PortData {
    pub port: Port,
    pub modes: TransverseModes,
    /// Axial spacing of the grid behind the cut.
    pub spacing: f64,
    pub roots: Vec<AxialRoot>,
    /// Analytic counterparts of the kept modes.
    pub analytic: Vec<DuctMode>,
    location: PortLocation,
}

#[derive(Clone, Debug)]
enum PortLocation {
    /// Unknown indices of the cut nodes, aligned with `modes.coords`.
    Core(Vec<usize>),
    Duct(usize),
}

impl PortData {
    fn kept(&self) -> usize {
        self.roots.len()
    }

    /// Incoming wave of unit amplitude in mode `n`, evaluated at the cut as a
    /// modal coefficient.
    pub fn incoming_at_cut(&self, n: usize) -> C {
        let kappa = self.roots[n].kappa.unwrap_or(0.0);
        (C::new(0.0, -kappa * self.port.outward_position())).exp() * self.flux_scale(n)
    }

    /// `1/√(2 sin(κa)/a)` for propagating modes, 1 otherwise. The grid
    /// wave `ρ^j φ` carries the discrete flux `Im ρ / a = sin(κa)/a`, which
    /// tends to `β` as `a → 0`; with this scaling every propagating
    /// amplitude carries unit discrete flux and the scattering matrix is
    /// unitary to roundoff.
    pub fn flux_scale(&self, n: usize) -> f64 {
        match self.roots[n].kappa {
            Some(kappa) if self.analytic[n].is_propagating() => {
                let a = self.spacing;
                1.0 / (2.0 * (kappa * a).sin() / a).sqrt()
            }
            _ => 1.0,
        }
    }

    /// Converts the scattered modal coefficient at the cut into an amplitude.
    fn amplitude(&self, n: usize, scattered: C) -> C {
        match self.roots[n].kappa {
            Some(kappa) if self.analytic[n].is_propagating() => {
                scattered * (C::new(0.0, -kappa * self.port.outward_position())).exp() / self.flux_scale(n)
            }
            _ => scattered,
        }
    }

    pub fn is_propagating(&self, n: usize) -> bool {
        self.analytic[n].is_propagating() && self.roots[n].kappa.is_some()
    }
}

/// A uniform duct eliminated onto its junction line.
#[derive(Clone, Debug)]
struct Duct {
    interface: Side,
    modes: TransverseModes,
    /// Interface unknowns aligned with `modes.coords`.
    interface_unknowns: Vec<usize>,
    /// Axial coordinate of each grid line, interface first.
    axial: Vec<f64>,
    /// Per mode: `X_j` for `j = 1..=N`, so that `c_j = X_j c_{j−1} + f G_j`.
    x: Vec<Vec<C>>,
    /// Per port mode: response `G_j` to unit modal forcing at the far end.
    g: Vec<Vec<C>>,
    /// Interface admittance per mode.
    admittance: Vec<C>,
    /// Coupling `−1/a_1` between the interface and the first interior line.
    o1: f64,
    port: Option<usize>,
}

impl Duct {
    fn point(&self, axial: f64, trans: f64) -> [f64; 2] {
        if self.interface.is_vertical() {
            [axial, trans]
        } else {
            [trans, axial]
        }
    }

    /// Modal coefficients on every grid line, interface first.
    fn sweep(&self, c0: &[C], forcing: Option<(usize, C)>) -> Vec<Vec<C>> {
        let n_lines = self.axial.len();
        let mut out = vec![c0.to_vec()];
        for j in 1..n_lines {
            let prev = &out[j - 1];
            let row: Vec<C> = (0..self.modes.len())
                .map(|n| {
                    let mut v = self.x[n][j - 1] * prev[n];
                    if let Some((fm, f)) = forcing {
                        if fm == n {
                            v += f * self.g[n][j - 1];
                        }
                    }
                    v
                })
                .collect();
            out.push(row);
        }
        out
    }

    /// Modal coefficient of mode `n` on the far line.
    fn far_coefficient(&self, n: usize, c0: C, forcing: Option<(usize, C)>) -> C {
        let mut c = c0;
        for j in 0..self.axial.len() - 1 {
            c = self.x[n][j] * c;
            if let Some((fm, f)) = forcing {
                if fm == n {
                    c += f * self.g[n][j];
                }
            }
        }
        c
    }
}

/// Assembled (and factorable) discrete problem on a domain.
pub struct System {
    pub domain: Domain,
    pub numerics: Numerics,
    pub mesh: Mesh,
    pub ports: Vec<PortData>,
    ducts: Vec<Duct>,
    triplets: Vec<(usize, usize, C)>,
}

/// A factored system ready for any number of incidences.
pub struct Factored {
    pub system: Arc<System>,
    lu: faer::sparse::linalg::solvers::Lu<usize, C>,
    pub condition_estimate: f64,
    pub warnings: Vec<String>,
}

/// Solution for one incidence.
#[derive(Clone)]
pub struct FieldSolution {
    pub system: Arc<System>,
    pub incidence: Incidence,
    /// Values at the core unknowns.
    pub core: Vec<C>,
    /// Outgoing amplitudes per port for the kept modes. Evanescent entries
    /// hold the raw modal coefficient at the cut.
    pub amplitudes: Vec<Vec<C>>,
    pub condition_estimate: f64,
    pub residual_norm: f64,
    pub warnings: Vec<String>,
}

fn axial_wavenumber_guarded(m: usize, lateral: LateralBc, lo: f64, hi: f64, k: f64) -> Result<Vec<DuctMode>> {
    (0..m).map(|n| DuctMode::new(n, lateral, lo, hi, k)).collect()
}

/// Which rectangles are eliminable ducts, with their interface side.
fn find_ducts(d: &Domain) -> Vec<Option<Side>> {
    let rects = d.rects();
    let n = rects.len();
    let mut out: Vec<Option<Side>> = vec![None; n];
    for (i, r) in rects.iter().enumerate() {
        let mut shared_sides = Vec::new();
        for side in Side::ALL {
            let seg = r.side(side);
            let len: f64 = rects
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, o)| seg.overlap(&o.side(side.opposite())))
                .sum();
            if len > COORD_TOL {
                shared_sides.push((side, len));
            }
        }
        if shared_sides.len() != 1 {
            continue;
        }
        let (side, len) = shared_sides[0];
        if (len - r.side(side).length()).abs() > 1e-7 {
            continue;
        }
        let dir_cover = |s: Side| -> f64 { d.dirichlet().iter().map(|seg| seg.overlap(&r.side(s))).sum() };
        let port_cover = |s: Side| -> Vec<&Port> {
            d.ports().iter().filter(|p| p.segment().overlap(&r.side(s)) > COORD_TOL).collect()
        };
        let far = side.opposite();
        let far_ports = port_cover(far);
        let far_ok = dir_cover(far) <= COORD_TOL
            && (far_ports.is_empty() || (far_ports.len() == 1 && (far_ports[0].width() - r.side(far).length()).abs() < 1e-7));
        let laterals: Vec<Side> = Side::ALL.iter().copied().filter(|&s| s != side && s != far).collect();
        let lateral_ok = laterals.iter().all(|&s| {
            let c = dir_cover(s);
            port_cover(s).is_empty() && (c <= COORD_TOL || (c - r.side(s).length()).abs() < 1e-7)
        });
        let iface = r.side(side);
        let ends_ok = laterals.iter().all(|&s| {
            let full = dir_cover(s) > COORD_TOL;
            let (x, y) = if iface.vertical {
                (iface.at, if s == Side::Bottom { iface.lo } else { iface.hi })
            } else {
                (if s == Side::Left { iface.lo } else { iface.hi }, iface.at)
            };
            d.is_dirichlet(x, y) == full
        });
        if far_ok && lateral_ok && ends_ok {
            out[i] = Some(side);
        }
    }
    for i in 0..n {
        if let Some(side) = out[i] {
            let neighbours_are_ducts = (0..n).any(|j| {
                j != i && out[j].is_some() && rects[i].side(side).overlap(&rects[j].side(side.opposite())) > COORD_TOL
            });
            if neighbours_are_ducts {
                out[i] = None;
            }
        }
    }
    if out.iter().all(|o| o.is_some()) {
        out[0] = None;
    }
    out
}

fn lateral_of(d: &Domain, r: &Rect, interface: Side) -> LateralBc {
    let wall = |s: Side| {
        if d.dirichlet().iter().any(|seg| seg.overlap(&r.side(s)) > COORD_TOL) {
            WallBc::Dirichlet
        } else {
            WallBc::Neumann
        }
    };
    if interface.is_vertical() {
        LateralBc::new(wall(Side::Bottom), wall(Side::Top))
    } else {
        LateralBc::new(wall(Side::Left), wall(Side::Right))
    }
}

struct TripletSink {
    entries: Vec<(usize, usize, C)>,
}

impl TripletSink {
    fn add(&mut self, i: Option<usize>, j: Option<usize>, v: C) {
        if let (Some(i), Some(j)) = (i, j) {
            self.entries.push((i, j, v));
        }
    }

    fn finish(mut self) -> Vec<(usize, usize, C)> {
        self.entries.sort_by_key(|e| (e.1, e.0));
        let mut out: Vec<(usize, usize, C)> = Vec::with_capacity(self.entries.len());
        for (i, j, v) in self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }
}

impl System {
    pub fn assemble(domain: &Domain, numerics: &Numerics) -> Result<System> {
        numerics.validate()?;
        let k = domain.k();
        let k2 = k * k;
        let grids = rect_grids(domain, numerics.h);
        let duct_sides = match numerics.method {
            Method::Direct => vec![None; domain.rects().len()],
            Method::Reduced => find_ducts(domain),
        };
        let core_rects: Vec<usize> = (0..domain.rects().len()).filter(|&i| duct_sides[i].is_none()).collect();
        let mesh = Mesh::build(domain, &grids, &core_rects)?;
        if mesh.n_unknowns == 0 {
            return Err(invalid("domain has no unknowns"));
        }
        let mut sink = TripletSink { entries: Vec::with_capacity(mesh.cells.len() * 16) };
        for cell in &mesh.cells {
            let u = cell.corners.map(|n| mesh.unknown[n]);
            let cx = 0.5 * cell.dy / cell.dx;
            let cy = 0.5 * cell.dx / cell.dy;
            for (a, b, c) in [(0, 1, cx), (2, 3, cx), (0, 2, cy), (1, 3, cy)] {
                sink.add(u[a], u[a], C::new(c, 0.0));
                sink.add(u[b], u[b], C::new(c, 0.0));
                sink.add(u[a], u[b], C::new(-c, 0.0));
                sink.add(u[b], u[a], C::new(-c, 0.0));
            }
            let m = -k2 * 0.25 * cell.dx * cell.dy;
            for ui in u {
                sink.add(ui, ui, C::new(m, 0.0));
            }
        }

        let mut ducts = Vec::new();
        let mut duct_of_rect: HashMap<usize, usize> = HashMap::new();
        for (ri, side) in duct_sides.iter().enumerate() {
            let Some(side) = *side else { continue };
            let r = domain.rects()[ri];
            let g: &RectGrid = &grids[ri];
            let lateral = lateral_of(domain, &r, side);
            let (trans, mut axial) = if side.is_vertical() { (g.ys.clone(), g.xs.clone()) } else { (g.xs.clone(), g.ys.clone()) };
            if matches!(side, Side::Right | Side::Top) {
                axial.reverse();
            }
            let modes = TransverseModes::new(&trans, lateral)?;
            let iface_at = axial[0];
            let mut interface_unknowns = Vec::with_capacity(modes.len());
            for &t in &modes.coords {
                let p = if side.is_vertical() { (iface_at, t) } else { (t, iface_at) };
                let u = mesh
                    .unknown_at(p.0, p.1)
                    .ok_or_else(|| invalid(format!("geometry not grid-aligned at duct interface point {p:?}")))?;
                interface_unknowns.push(u);
            }
            duct_of_rect.insert(ri, ducts.len());
            ducts.push(Duct {
                interface: side,
                modes,
                interface_unknowns,
                axial,
                x: Vec::new(),
                g: Vec::new(),
                admittance: Vec::new(),
                o1: 0.0,
                port: None,
            });
        }

        let mut ports = Vec::new();
        for (pi, p) in domain.ports().iter().enumerate() {
            let seg = p.segment();
            let owner = domain
                .rects()
                .iter()
                .position(|r| r.side(p.side).overlap(&seg) > COORD_TOL)
                .ok_or_else(|| invalid(format!("port {} has no owner", p.name)))?;
            let g = &grids[owner];
            let line: Vec<f64> = if p.side.is_vertical() { g.ys.clone() } else { g.xs.clone() };
            let line: Vec<f64> = line.into_iter().filter(|&t| t >= p.lo - COORD_TOL && t <= p.hi + COORD_TOL).collect();
            let axial_line = if p.side.is_vertical() { &g.xs } else { &g.ys };
            let spacing = if matches!(p.side, Side::Right | Side::Top) {
                axial_line[axial_line.len() - 1] - axial_line[axial_line.len() - 2]
            } else {
                axial_line[1] - axial_line[0]
            };
            let (modes, location) = if let Some(&di) = duct_of_rect.get(&owner) {
                ducts[di].port = Some(pi);
                (ducts[di].modes.clone(), PortLocation::Duct(di))
            } else {
                let modes = TransverseModes::new(&line, p.lateral)?;
                let mut idx = Vec::with_capacity(modes.len());
                for &t in &modes.coords {
                    let (x, y) = if p.side.is_vertical() { (p.at, t) } else { (t, p.at) };
                    idx.push(
                        mesh.unknown_at(x, y)
                            .ok_or_else(|| invalid(format!("geometry not grid-aligned at port {}", p.name)))?,
                    );
                }
                (modes, PortLocation::Core(idx))
            };
            if modes.lateral != p.lateral {
                return Err(invalid(format!("port {} lateral conditions do not match its duct", p.name)));
            }
            let kept = p.modes.min(modes.len());
            let roots: Vec<AxialRoot> = (0..kept).map(|n| axial_root(modes.mu[n], k, spacing)).collect();
            let analytic = axial_wavenumber_guarded(kept, p.lateral, p.lo, p.hi, k)?;
            ports.push(PortData { port: p.clone(), modes, spacing, roots, analytic, location });
        }

        for pd in &ports {
            if let PortLocation::Core(idx) = &pd.location {
                add_modal_block(&mut sink, idx, &pd.modes, &pd.roots.iter().map(|r| r.schur).collect::<Vec<_>>());
            }
        }

        for duct in ducts.iter_mut() {
            let port = duct.port.map(|pi| &ports[pi]);
            eliminate(duct, k, port);
            let idx = duct.interface_unknowns.clone();
            add_modal_block(&mut sink, &idx, &duct.modes, &duct.admittance);
        }

        Ok(System { domain: domain.clone(), numerics: *numerics, mesh, ports, ducts, triplets: sink.finish() })
    }

    pub fn n_unknowns(&self) -> usize {
        self.mesh.n_unknowns
    }

    pub fn factor(self) -> Result<Factored> {
        let n = self.mesh.n_unknowns;
        let trip: Vec<Triplet<usize, usize, C>> = self.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::<usize, C>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Solver(format!("matrix construction failed: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Solver(format!("factorization failed: {e:?}")))?;
        let mut f = Factored { system: Arc::new(self), lu, condition_estimate: f64::NAN, warnings: Vec::new() };
        f.condition_estimate = f.estimate_condition();
        if !f.condition_estimate.is_finite() {
            return Err(Error::Solver("factorization produced non-finite values".into()));
        }
        if f.condition_estimate > f.system.numerics.trapped_threshold {
            f.warnings.push(format!(
                "condition estimate {:.3e} exceeds {:.1e}: possible trapped mode",
                f.condition_estimate, f.system.numerics.trapped_threshold
            ));
        }
        Ok(f)
    }

    fn matvec(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![C::new(0.0, 0.0); x.len()];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    fn norm1(&self) -> f64 {
        let mut col = vec![0.0; self.mesh.n_unknowns];
        for &(_, j, v) in &self.triplets {
            col[j] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    fn rhs(&self, inc: &Incidence) -> Result<Vec<C>> {
        let pd = self.ports.get(inc.port).ok_or_else(|| invalid(format!("no port {}", inc.port)))?;
        if inc.mode >= pd.kept() || !pd.is_propagating(inc.mode) {
            return Err(invalid(format!("mode {} is not a propagating mode of port {}", inc.mode, pd.port.name)));
        }
        let mut f = vec![C::new(0.0, 0.0); self.mesh.n_unknowns];
        let forcing = 2.0 * pd.roots[inc.mode].schur * pd.incoming_at_cut(inc.mode) * inc.amplitude;
        match &pd.location {
            PortLocation::Core(idx) => {
                for (i, &u) in idx.iter().enumerate() {
                    f[u] += forcing * (pd.modes.mass[i] * pd.modes.vectors[(i, inc.mode)]);
                }
            }
            PortLocation::Duct(di) => {
                let duct = &self.ducts[*di];
                let w = -duct.o1 * duct.g[inc.mode][0] * forcing;
                for (i, &u) in duct.interface_unknowns.iter().enumerate() {
                    f[u] += w * (duct.modes.mass[i] * duct.modes.vectors[(i, inc.mode)]);
                }
            }
        }
        Ok(f)
    }

    fn duct_forcing(&self, di: usize, inc: &Incidence) -> Option<(usize, C)> {
        let duct = &self.ducts[di];
        if duct.port == Some(inc.port) {
            let pd = &self.ports[inc.port];
            Some((inc.mode, 2.0 * pd.roots[inc.mode].schur * pd.incoming_at_cut(inc.mode) * inc.amplitude))
        } else {
            None
        }
    }

    fn interface_coeffs(&self, di: usize, core: &[C]) -> Vec<C> {
        let duct = &self.ducts[di];
        let vals: Vec<C> = duct.interface_unknowns.iter().map(|&u| core[u]).collect();
        duct.modes.project_all(&vals)
    }
}

/// Adds `M V diag(s) Vᵀ M` on the given unknowns.
fn add_modal_block(sink: &mut TripletSink, idx: &[usize], modes: &TransverseModes, s: &[C]) {
    let m = idx.len();
    let mut w = Mat::<C>::zeros(m, m);
    for (n, &sn) in s.iter().enumerate() {
        if sn == C::new(0.0, 0.0) {
            continue;
        }
        for i in 0..m {
            let vi = modes.mass[i] * modes.vectors[(i, n)] * sn;
            for j in 0..m {
                w[(i, j)] += vi * (modes.mass[j] * modes.vectors[(j, n)]);
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            let v = w[(i, j)];
            if v != C::new(0.0, 0.0) {
                sink.entries.push((idx[i], idx[j], v));
            }
        }
    }
}

/// Thomas elimination of each mode of a duct from the far end inward.
fn eliminate(duct: &mut Duct, k: f64, port: Option<&PortData>) {
    let a: Vec<f64> = duct.axial.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let n_int = a.len();
    let k2 = k * k;
    duct.o1 = -1.0 / a[0];
    let modes = duct.modes.len();
    duct.x = Vec::with_capacity(modes);
    duct.g = Vec::new();
    duct.admittance = Vec::with_capacity(modes);
    for n in 0..modes {
        let q = duct.modes.mu[n] - k2;
        let schur = port.and_then(|p| p.roots.get(n)).map(|r| r.schur).unwrap_or(C::new(0.0, 0.0));
        let mut x = vec![C::new(0.0, 0.0); n_int];
        let mut g = vec![C::new(0.0, 0.0); n_int];
        let d_last = C::new(0.5 * a[n_int - 1] * q + 1.0 / a[n_int - 1], 0.0) + schur;
        x[n_int - 1] = C::new(1.0 / a[n_int - 1], 0.0) / d_last;
        g[n_int - 1] = C::new(1.0, 0.0) / d_last;
        for j in (0..n_int - 1).rev() {
            let dj = 0.5 * (a[j] + a[j + 1]) * q + 1.0 / a[j] + 1.0 / a[j + 1];
            let den = C::new(dj, 0.0) - x[j + 1] / a[j + 1];
            x[j] = C::new(1.0 / a[j], 0.0) / den;
            g[j] = g[j + 1] / (a[j + 1] * den);
        }
        let d0 = 0.5 * a[0] * q + 1.0 / a[0];
        duct.admittance.push(C::new(d0, 0.0) - x[0] / a[0]);
        duct.x.push(x);
        if port.is_some_and(|p| n < p.roots.len()) {
            duct.g.push(g);
        }
    }
}

impl Factored {
    pub fn new(domain: &Domain, numerics: &Numerics) -> Result<Factored> {
        System::assemble(domain, numerics)?.factor()
    }

    fn solve_vec(&self, b: &[C], adjoint: bool) -> Vec<C> {
        let mut m = Mat::<C>::from_fn(b.len(), 1, |i, _| b[i]);
        if adjoint {
            self.lu.solve_adjoint_in_place(&mut m);
        } else {
            self.lu.solve_in_place(&mut m);
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Hager–Higham estimate of the 1-norm condition number.
    fn estimate_condition(&self) -> f64 {
        let n = self.system.mesh.n_unknowns;
        let mut x = vec![C::new(1.0 / n as f64, 0.0); n];
        let mut est: f64 = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_vec(&x, false);
            est = est.max(y.iter().map(|v| v.norm()).sum());
            let xi: Vec<C> = y.iter().map(|v| if v.norm() > 0.0 { v / v.norm() } else { C::new(1.0, 0.0) }).collect();
            let z = self.solve_vec(&xi, true);
            let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if j == last_j || zmax <= ztx {
                break;
            }
            last_j = j;
            x = vec![C::new(0.0, 0.0); n];
            x[j] = C::new(1.0, 0.0);
        }
        let alt: Vec<C> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                C::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
            })
            .collect();
        let y = self.solve_vec(&alt, false);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        self.system.norm1() * est.max(alt_est)
    }

    pub fn solve(&self, inc: Incidence) -> Result<FieldSolution> {
        let sys = &self.system;
        let f = sys.rhs(&inc)?;
        let u = self.solve_vec(&f, false);
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Solver("solution is not finite".into()));
        }
        let au = sys.matvec(&u);
        let rn: f64 = au.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let fnorm: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let residual_norm = rn / fnorm.max(f64::MIN_POSITIVE);
        let mut amplitudes = Vec::with_capacity(sys.ports.len());
        for (pi, pd) in sys.ports.iter().enumerate() {
            let coeffs: Vec<C> = match &pd.location {
                PortLocation::Core(idx) => {
                    let vals: Vec<C> = idx.iter().map(|&i| u[i]).collect();
                    (0..pd.kept()).map(|n| pd.modes.project(n, &vals)).collect()
                }
                PortLocation::Duct(di) => {
                    let c0 = sys.interface_coeffs(*di, &u);
                    let forcing = sys.duct_forcing(*di, &inc);
                    (0..pd.kept()).map(|n| sys.ducts[*di].far_coefficient(n, c0[n], forcing)).collect()
                }
            };
            let amps = coeffs
                .into_iter()
                .enumerate()
                .map(|(n, c)| {
                    let incoming = if pi == inc.port && n == inc.mode { pd.incoming_at_cut(n) * inc.amplitude } else { C::new(0.0, 0.0) };
                    pd.amplitude(n, c - incoming)
                })
                .collect();
            amplitudes.push(amps);
        }
        let mut warnings = self.warnings.clone();
        if residual_norm > 1e-8 {
            warnings.push(format!("relative residual {residual_norm:.3e}"));
        }
        Ok(FieldSolution {
            system: Arc::clone(&self.system),
            incidence: inc,
            core: u,
            amplitudes,
            condition_estimate: self.condition_estimate,
            residual_norm,
            warnings,
        })
    }
}

/// Solves one incidence from scratch.
pub fn solve_with_incidence(domain: &Domain, numerics: &Numerics, inc: Incidence) -> Result<FieldSolution> {
    Factored::new(domain, numerics)?.solve(inc)
}

impl FieldSolution {
    /// Outgoing amplitude of mode `n` through port `port`.
    pub fn amplitude(&self, port: usize, n: usize) -> C {
        self.amplitudes[port][n]
    }

    pub fn port_index(&self, name: &str) -> Result<usize> {
        self.system.domain.port(name).ok_or_else(|| invalid(format!("no port named {name}")))
    }

    /// `|Σ outgoing propagating power − incoming power|` in flux units.
    pub fn energy_residual(&self) -> f64 {
        let mut out = 0.0;
        for (pd, amps) in self.system.ports.iter().zip(&self.amplitudes) {
            for (n, a) in amps.iter().enumerate() {
                if pd.is_propagating(n) {
                    out += a.norm_sqr();
                }
            }
        }
        (out - self.incidence.amplitude.norm_sqr()).abs()
    }

    /// Every grid node of the domain with its total field value.
    pub fn nodal_field(&self) -> Vec<([f64; 2], C)> {
        let sys = &self.system;
        let mut out: Vec<([f64; 2], C)> = sys
            .mesh
            .nodes
            .iter()
            .zip(&sys.mesh.unknown)
            .map(|(p, u)| (*p, u.map(|i| self.core[i]).unwrap_or(C::new(0.0, 0.0))))
            .collect();
        for (di, duct) in sys.ducts.iter().enumerate() {
            let c0 = sys.interface_coeffs(di, &self.core);
            let lines = duct.sweep(&c0, sys.duct_forcing(di, &self.incidence));
            let full_trans: Vec<f64> = duct.modes.coords.clone();
            for (j, coeffs) in lines.iter().enumerate().skip(1) {
                let vals = duct.modes.synthesize(coeffs);
                for (t, v) in full_trans.iter().zip(vals) {
                    out.push((duct.point(duct.axial[j], *t), v));
                }
                let lateral = duct.modes.lateral;
                for (wall, at) in [(lateral.low(), duct.modes.low), (lateral.high(), duct.modes.high)] {
                    if wall == WallBc::Dirichlet {
                        out.push((duct.point(duct.axial[j], at), C::new(0.0, 0.0)));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0[1].total_cmp(&b.0[1]).then(a.0[0].total_cmp(&b.0[0])));
        out
    }
}
