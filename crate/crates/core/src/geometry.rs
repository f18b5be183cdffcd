//! Polygonal waveguide domains built from axis-aligned rectangles.
//!
//! Walls are Neumann unless a segment is tagged Dirichlet. Ports are
//! straight cuts across a duct where a transparent modal condition is applied.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modes::LateralBc;

/// Coordinates closer than this are treated as equal.
pub const COORD_TOL: f64 = 1e-9;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= COORD_TOL
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, x1, y0, y1 };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || self.x1 - self.x0 <= COORD_TOL || self.y1 - self.y0 <= COORD_TOL {
            return Err(invalid(format!("degenerate rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 - COORD_TOL && x <= self.x1 + COORD_TOL && y >= self.y0 - COORD_TOL && y <= self.y1 + COORD_TOL
    }

    fn overlap_area(&self, o: &Rect) -> f64 {
        let w = self.x1.min(o.x1) - self.x0.max(o.x0);
        let h = self.y1.min(o.y1) - self.y0.max(o.y0);
        if w > COORD_TOL && h > COORD_TOL {
            w * h
        } else {
            0.0
        }
    }

    /// Length of the boundary shared with `o` (zero for corner contact).
    pub fn shared_length(&self, o: &Rect) -> f64 {
        let ov = |a0: f64, a1: f64, b0: f64, b1: f64| (a1.min(b1) - a0.max(b0)).max(0.0);
        if same(self.x1, o.x0) || same(self.x0, o.x1) {
            ov(self.y0, self.y1, o.y0, o.y1)
        } else if same(self.y1, o.y0) || same(self.y0, o.y1) {
            ov(self.x0, self.x1, o.x0, o.x1)
        } else {
            0.0
        }
    }

    pub fn mirrored(&self) -> Rect {
        Rect { x0: -self.x1, x1: -self.x0, y0: self.y0, y1: self.y1 }
    }

    /// The side of the rectangle facing `side` as a segment.
    pub fn side(&self, side: Side) -> Segment {
        match side {
            Side::Left => Segment::vertical(self.x0, self.y0, self.y1),
            Side::Right => Segment::vertical(self.x1, self.y0, self.y1),
            Side::Bottom => Segment::horizontal(self.y0, self.x0, self.x1),
            Side::Top => Segment::horizontal(self.y1, self.x0, self.x1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WallBc {
    Neumann,
    Dirichlet,
}

/// Outward direction of a boundary piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// True when the side is a line `x = const`.
    pub fn is_vertical(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    /// Reflection through `x = 0`.
    pub fn mirrored(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            s => s,
        }
    }

    /// +1 when the outward direction points along the positive axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Right | Side::Top => 1.0,
            Side::Left | Side::Bottom => -1.0,
        }
    }
}

/// Axis-aligned segment: `at` is the fixed coordinate, `[lo, hi]` the span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub vertical: bool,
    pub at: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Segment {
    pub fn vertical(x: f64, y0: f64, y1: f64) -> Self {
        Segment { vertical: true, at: x, lo: y0, hi: y1 }
    }

    pub fn horizontal(y: f64, x0: f64, x1: f64) -> Self {
        Segment { vertical: false, at: y, lo: x0, hi: x1 }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let (a, t) = if self.vertical { (x, y) } else { (y, x) };
        same(a, self.at) && t >= self.lo - COORD_TOL && t <= self.hi + COORD_TOL
    }

    /// Overlap length with a collinear segment.
    pub fn overlap(&self, o: &Segment) -> f64 {
        if self.vertical != o.vertical || !same(self.at, o.at) {
            return 0.0;
        }
        (self.hi.min(o.hi) - self.lo.max(o.lo)).max(0.0)
    }

    pub fn mirrored(&self) -> Segment {
        if self.vertical {
            Segment { at: -self.at, ..*self }
        } else {
            Segment { lo: -self.hi, hi: -self.lo, ..*self }
        }
    }
}

/// A transparent cut across a duct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    /// Outward direction; `Left`/`Right` ports are vertical cuts.
    pub side: Side,
    /// Fixed coordinate of the cut.
    pub at: f64,
    /// Transverse extent of the cut.
    pub lo: f64,
    pub hi: f64,
    pub lateral: LateralBc,
    /// Number of modes kept in the transparent condition.
    pub modes: usize,
}

impl Port {
    pub fn segment(&self) -> Segment {
        Segment { vertical: self.side.is_vertical(), at: self.at, lo: self.lo, hi: self.hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Signed distance of the cut from the origin along the outward axis.
    pub fn outward_position(&self) -> f64 {
        self.side.sign() * self.at
    }

    fn mirrored(&self) -> Port {
        let seg = self.segment().mirrored();
        let lateral = if self.side.is_vertical() { self.lateral } else { self.lateral.mirrored() };
        Port { side: self.side.mirrored(), at: seg.at, lo: seg.lo, hi: seg.hi, lateral, ..self.clone() }
    }
}

/// A validated computational domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRecord", into = "DomainRecord")]
pub struct Domain {
    rects: Vec<Rect>,
    dirichlet: Vec<Segment>,
    ports: Vec<Port>,
    k: f64,
}

/// Unvalidated serialized form of a [`Domain`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub k: f64,
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub dirichlet: Vec<Segment>,
    pub ports: Vec<Port>,
}

impl TryFrom<DomainRecord> for Domain {
    type Error = Error;
    fn try_from(r: DomainRecord) -> Result<Self> {
        Domain::new(r.rects, r.dirichlet, r.ports, r.k)
    }
}

impl From<Domain> for DomainRecord {
    fn from(d: Domain) -> Self {
        DomainRecord { k: d.k, rects: d.rects, dirichlet: d.dirichlet, ports: d.ports }
    }
}

impl Domain {
    pub fn new(rects: Vec<Rect>, dirichlet: Vec<Segment>, ports: Vec<Port>, k: f64) -> Result<Self> {
        if !(k > 0.0 && k < std::f64::consts::PI) {
            return Err(invalid(format!("k must lie in (0, π), got {k}")));
        }
        if rects.is_empty() {
            return Err(invalid("domain has no rectangles"));
        }
        for r in &rects {
            r.check()?;
        }
        for (i, a) in rects.iter().enumerate() {
            for b in &rects[i + 1..] {
                if a.overlap_area(b) > 0.0 {
                    return Err(Error::GeometryConflict(format!("rectangles {a:?} and {b:?} overlap")));
                }
            }
        }
        let d = Domain { rects, dirichlet, ports, k };
        d.check_connected()?;
        for s in &d.dirichlet {
            if !(s.length() > COORD_TOL) {
                return Err(invalid(format!("degenerate Dirichlet segment {s:?}")));
            }
            if !d.on_boundary(s, None) {
                return Err(invalid(format!("Dirichlet segment {s:?} is not on the boundary")));
            }
        }
        let mut names = std::collections::HashSet::new();
        for p in &d.ports {
            if p.modes == 0 {
                return Err(invalid(format!("port {} keeps no modes", p.name)));
            }
            if !names.insert(p.name.clone()) {
                return Err(invalid(format!("duplicate port name {}", p.name)));
            }
            if !(p.width() > COORD_TOL) {
                return Err(invalid(format!("port {} has no width", p.name)));
            }
            if !d.on_boundary(&p.segment(), Some(p.side)) {
                return Err(invalid(format!("port {} is not on the boundary", p.name)));
            }
            for s in &d.dirichlet {
                if p.segment().overlap(s) > COORD_TOL {
                    return Err(Error::GeometryConflict(format!("port {} overlaps a Dirichlet segment", p.name)));
                }
            }
        }
        for (i, a) in d.ports.iter().enumerate() {
            for b in &d.ports[i + 1..] {
                if a.segment().overlap(&b.segment()) > COORD_TOL {
                    return Err(Error::GeometryConflict(format!("ports {} and {} overlap", a.name, b.name)));
                }
            }
        }
        Ok(d)
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn dirichlet(&self) -> &[Segment] {
        &self.dirichlet
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn port(&self, name: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.name == name)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }

    pub fn is_dirichlet(&self, x: f64, y: f64) -> bool {
        self.dirichlet.iter().any(|s| s.contains_point(x, y))
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.rects.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            let r = self.rects[i];
            for (j, other) in self.rects.iter().enumerate() {
                if !seen[j] && r.shared_length(other) > COORD_TOL {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::GeometryConflict("domain is not connected".into()))
        }
    }

    /// True when `seg` is covered by rectangle sides that face outward
    /// (optionally only sides facing `side`).
    fn on_boundary(&self, seg: &Segment, side: Option<Side>) -> bool {
        let mut covered = 0.0;
        for r in &self.rects {
            for s in Side::ALL {
                if side.is_some_and(|want| want != s) {
                    continue;
                }
                let ov = r.side(s).overlap(seg);
                if ov > COORD_TOL {
                    let inner = self.rects.iter().any(|o| o != r && o.side(s.opposite()).overlap(seg) > COORD_TOL);
                    if inner {
                        return false;
                    }
                    covered += ov;
                }
            }
        }
        (covered - seg.length()).abs() <= 1e3 * COORD_TOL
    }

    /// Mirror image through `x = 0`.
    pub fn mirrored(&self) -> Domain {
        Domain {
            rects: self.rects.iter().map(Rect::mirrored).collect(),
            dirichlet: self.dirichlet.iter().map(Segment::mirrored).collect(),
            ports: self.ports.iter().map(Port::mirrored).collect(),
            k: self.k,
        }
    }

    /// Region, Dirichlet set and ports coincide with their mirror images.
    pub fn is_mirror_symmetric(&self) -> bool {
        let m = self.mirrored();
        let rects_match = self.rects.iter().all(|r| m.rects.iter().any(|o| rect_eq(r, o)))
            && m.rects.len() == self.rects.len();
        let dir_match = self.dirichlet.iter().all(|s| m.dirichlet.iter().any(|o| seg_eq(s, o)))
            && m.dirichlet.len() == self.dirichlet.len();
        let port_match = self.ports.iter().all(|p| {
            m.ports.iter().any(|o| o.side == p.side && seg_eq(&o.segment(), &p.segment()) && o.lateral == p.lateral)
        }) && m.ports.len() == self.ports.len();
        rects_match && dir_match && port_match
    }
}

fn rect_eq(a: &Rect, b: &Rect) -> bool {
    same(a.x0, b.x0) && same(a.x1, b.x1) && same(a.y0, b.y0) && same(a.y1, b.y1)
}

fn seg_eq(a: &Segment, b: &Segment) -> bool {
    a.vertical == b.vertical && same(a.at, b.at) && same(a.lo, b.lo) && same(a.hi, b.hi)
}

/// A pair of resonator branches at `x = ±offset` on top of the guide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideBranch {
    pub offset: f64,
    pub width: f64,
    pub height: f64,
}

/// Parameters of the branched guide: strip `ℝ×(0,1)` with a central branch
/// `(−ℓ/2, ℓ/2)×[1, L)` and optional symmetric side branches, cut at `±xmax`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchedGuide {
    pub ell: f64,
    pub height: f64,
    pub k: f64,
    pub xmax: f64,
    #[serde(default)]
    pub side_branches: Vec<SideBranch>,
    pub modes: usize,
}

pub const DEFAULT_XMAX: f64 = 8.0;
pub const DEFAULT_MODES: usize = 20;
pub const DEFAULT_Y_CUT: f64 = 9.0;

impl BranchedGuide {
    pub fn new(ell: f64, height: f64, k: f64) -> Self {
        BranchedGuide { ell, height, k, xmax: DEFAULT_XMAX, side_branches: Vec::new(), modes: DEFAULT_MODES }
    }

    pub fn with_side_branch(mut self, offset: f64, width: f64, height: f64) -> Self {
        self.side_branches.push(SideBranch { offset, width, height });
        self
    }

    pub fn with_height(&self, height: f64) -> Self {
        BranchedGuide { height, ..self.clone() }
    }

    /// Half-extent of the junction block under the branches.
    fn core_half_width(&self) -> f64 {
        self.side_branches.iter().fold(self.ell / 2.0, |m, b| m.max(b.offset + b.width / 2.0))
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive, got {v}")))
            }
        };
        pos(self.ell, "branch width")?;
        pos(self.xmax, "truncation abscissa")?;
        if !(self.height > 1.0) {
            return Err(invalid(format!("branch top must exceed 1, got {}", self.height)));
        }
        if self.modes == 0 {
            return Err(invalid("ports need at least one mode"));
        }
        let mut spans = vec![(-self.ell / 2.0, self.ell / 2.0)];
        for b in &self.side_branches {
            pos(b.width, "side branch width")?;
            if !(b.height > 1.0) {
                return Err(invalid(format!("side branch top must exceed 1, got {}", b.height)));
            }
            if !(b.offset - b.width / 2.0 > 0.0) {
                return Err(Error::GeometryConflict(format!("side branch at {} crosses x = 0", b.offset)));
            }
            spans.push((b.offset - b.width / 2.0, b.offset + b.width / 2.0));
            spans.push((-b.offset - b.width / 2.0, -b.offset + b.width / 2.0));
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for p in spans.windows(2) {
            if p[1].0 < p[0].1 + COORD_TOL {
                return Err(Error::GeometryConflict(format!("branches {:?} and {:?} overlap or touch", p[0], p[1])));
            }
        }
        if !(self.xmax > self.core_half_width() + COORD_TOL) {
            return Err(invalid(format!("xmax = {} does not clear the branches", self.xmax)));
        }
        Ok(())
    }
}

/// Builds the truncated branched guide with ports `left` and `right`.
pub fn build_branched_guide(g: &BranchedGuide) -> Result<Domain> {
    g.validate()?;
    let c = g.core_half_width();
    let x = g.xmax;
    let mut rects = vec![
        Rect::new(-x, -c, 0.0, 1.0)?,
        Rect::new(-c, c, 0.0, 1.0)?,
        Rect::new(c, x, 0.0, 1.0)?,
        Rect::new(-g.ell / 2.0, g.ell / 2.0, 1.0, g.height)?,
    ];
    for b in &g.side_branches {
        rects.push(Rect::new(-b.offset - b.width / 2.0, -b.offset + b.width / 2.0, 1.0, b.height)?);
        rects.push(Rect::new(b.offset - b.width / 2.0, b.offset + b.width / 2.0, 1.0, b.height)?);
    }
    let port = |name: &str, side: Side, at: f64| Port {
        name: name.into(),
        side,
        at,
        lo: 0.0,
        hi: 1.0,
        lateral: LateralBc::NN,
        modes: g.modes,
    };
    let ports = vec![port("left", Side::Left, -x), port("right", Side::Right, x)];
    Domain::new(rects, Vec::new(), ports, g.k)
}

/// The strip `(−xmax, xmax) × (0, 1)` without branches.
pub fn build_straight_guide(k: f64, xmax: f64, modes: usize) -> Result<Domain> {
    if !(xmax > 0.0 && xmax.is_finite()) {
        return Err(invalid(format!("xmax must be positive, got {xmax}")));
    }
    let rects = vec![Rect::new(-xmax, 0.0, 0.0, 1.0)?, Rect::new(0.0, xmax, 0.0, 1.0)?];
    let port = |name: &str, side: Side, at: f64| Port { name: name.into(), side, at, lo: 0.0, hi: 1.0, lateral: LateralBc::NN, modes };
    Domain::new(rects, Vec::new(), vec![port("left", Side::Left, -xmax), port("right", Side::Right, xmax)], k)
}

/// The left half `x ≤ 0` of a mirror-symmetric domain with the cut `x = 0`
/// tagged `symmetry`.
pub fn half_domain(d: &Domain, symmetry: WallBc) -> Result<Domain> {
    if !d.is_mirror_symmetric() {
        return Err(Error::NotSymmetric("domain differs from its mirror image".into()));
    }
    let rects: Vec<Rect> = d
        .rects
        .iter()
        .filter(|r| r.x0 < -COORD_TOL)
        .map(|r| Rect { x1: r.x1.min(0.0), ..*r })
        .collect();
    let mut dirichlet: Vec<Segment> = d
        .dirichlet
        .iter()
        .filter_map(|s| {
            if s.vertical {
                (s.at < -COORD_TOL).then_some(*s)
            } else if s.lo < -COORD_TOL {
                Some(Segment { hi: s.hi.min(0.0), ..*s })
            } else {
                None
            }
        })
        .collect();
    let mut ports = Vec::new();
    for p in &d.ports {
        if p.side.is_vertical() {
            if p.at < -COORD_TOL {
                ports.push(p.clone());
            }
        } else if p.lo < -COORD_TOL {
            let mut q = p.clone();
            if p.hi > COORD_TOL {
                q.hi = 0.0;
                q.lateral = LateralBc::new(p.lateral.low(), symmetry);
            }
            ports.push(q);
        }
    }
    if symmetry == WallBc::Dirichlet {
        for r in rects.iter().filter(|r| same(r.x1, 0.0)) {
            dirichlet.push(Segment::vertical(0.0, r.y0, r.y1));
        }
    }
    Domain::new(rects, dirichlet, ports, d.k)
}

/// Replaces the top of the branch on the symmetry axis by a port `top` at
/// height `y_cut`, modelling a semi-infinite branch.
pub fn truncate_semi_infinite(d: &Domain, y_cut: f64) -> Result<Domain> {
    if !(y_cut > 1.0) || !y_cut.is_finite() {
        return Err(invalid(format!("cut height must exceed 1, got {y_cut}")));
    }
    let on_axis = |r: &Rect| r.x0 <= COORD_TOL && r.x1 >= -COORD_TOL;
    let (idx, top) = d
        .rects
        .iter()
        .enumerate()
        .filter(|(_, r)| on_axis(r) && r.y0 >= 1.0 - COORD_TOL)
        .max_by(|a, b| a.1.y1.total_cmp(&b.1.y1))
        .ok_or_else(|| invalid("no branch on the symmetry axis"))?;
    let old_top = top.y1;
    if y_cut <= top.y0 + COORD_TOL {
        return Err(invalid(format!("cut height {y_cut} is below the branch base")));
    }
    let mut rects = d.rects.clone();
    rects[idx].y1 = y_cut;
    let branch = rects[idx];
    let mut dirichlet = d.dirichlet.clone();
    for s in dirichlet.iter_mut() {
        if s.vertical && same(s.hi, old_top) && (same(s.at, branch.x0) || same(s.at, branch.x1)) {
            s.hi = y_cut;
        }
    }
    let wall = |x: f64| {
        if dirichlet.iter().any(|s| s.vertical && same(s.at, x) && s.hi >= y_cut - COORD_TOL) {
            WallBc::Dirichlet
        } else {
            WallBc::Neumann
        }
    };
    let mut ports = d.ports.clone();
    if ports.iter().any(|p| p.name == "top") {
        return Err(invalid("domain already has a port named top"));
    }
    let modes = ports.iter().map(|p| p.modes).max().unwrap_or(DEFAULT_MODES);
    ports.push(Port {
        name: "top".into(),
        side: Side::Top,
        at: y_cut,
        lo: branch.x0,
        hi: branch.x1,
        lateral: LateralBc::new(wall(branch.x0), wall(branch.x1)),
        modes,
    });
    Domain::new(rects, dirichlet, ports, d.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const K: f64 = 0.8 * PI;

    #[test]
    fn guide_decomposition() {
        let d = build_branched_guide(&BranchedGuide::new(1.0, 3.0, K)).unwrap();
        assert_eq!(d.rects().len(), 4);
        assert_eq!(d.ports().len(), 2);
        assert!(d.contains(0.0, 2.9) && !d.contains(0.6, 2.0) && d.contains(-7.9, 0.5));
        assert!(d.is_mirror_symmetric());
    }

    #[test]
    fn side_branch_conflicts() {
        let g = BranchedGuide::new(1.0, 3.0, K).with_side_branch(0.9, 1.0, 2.0);
        assert!(matches!(build_branched_guide(&g), Err(Error::GeometryConflict(_))));
        let g = BranchedGuide::new(1.0, 3.0, K).with_side_branch(1.5, 1.0, 2.4959);
        assert_eq!(build_branched_guide(&g).unwrap().rects().len(), 6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_branched_guide(&BranchedGuide::new(-1.0, 3.0, K)).is_err());
        assert!(build_branched_guide(&BranchedGuide::new(1.0, 0.9, K)).is_err());
        assert!(build_branched_guide(&BranchedGuide::new(1.0, 3.0, 3.5)).is_err());
        let mut g = BranchedGuide::new(1.0, 3.0, K);
        g.xmax = 0.4;
        assert!(build_branched_guide(&g).is_err());
    }

    #[test]
    fn halves() {
        let d = build_branched_guide(&BranchedGuide::new(1.0, 3.0, K)).unwrap();
        let n = half_domain(&d, WallBc::Neumann).unwrap();
        assert!(n.dirichlet().is_empty());
        assert!(n.rects().iter().all(|r| r.x1 <= 0.0));
        let m = half_domain(&d, WallBc::Dirichlet).unwrap();
        let total: f64 = m.dirichlet().iter().map(|s| s.length()).sum();
        assert!((total - 3.0).abs() < 1e-12);
        assert!(m.is_dirichlet(0.0, 2.5) && !m.is_dirichlet(-0.1, 2.5));
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let rects = vec![Rect::new(-8.0, 0.2, 0.0, 1.0).unwrap(), Rect::new(0.2, 8.0, 0.0, 1.0).unwrap(), Rect::new(-0.3, 0.2, 1.0, 3.0).unwrap()];
        let port = |name: &str, side, at| Port { name: name.into(), side, at, lo: 0.0, hi: 1.0, lateral: LateralBc::NN, modes: 4 };
        let d = Domain::new(rects, vec![], vec![port("left", Side::Left, -8.0), port("right", Side::Right, 8.0)], K).unwrap();
        assert!(matches!(half_domain(&d, WallBc::Neumann), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn semi_infinite_ports() {
        let d = build_branched_guide(&BranchedGuide::new(1.0, 3.0, K)).unwrap();
        let n = truncate_semi_infinite(&half_domain(&d, WallBc::Neumann).unwrap(), DEFAULT_Y_CUT).unwrap();
        let top = &n.ports()[n.port("top").unwrap()];
        assert_eq!(top.lateral, LateralBc::NN);
        assert!((top.width() - 0.5).abs() < 1e-15 && top.at == 9.0);
        let m = truncate_semi_infinite(&half_domain(&d, WallBc::Dirichlet).unwrap(), DEFAULT_Y_CUT).unwrap();
        let top = &m.ports()[m.port("top").unwrap()];
        assert_eq!(top.lateral, LateralBc::ND);
        assert!(m.is_dirichlet(0.0, 8.5));
        assert!(truncate_semi_infinite(&d, 0.5).is_err());
    }

    #[test]
    fn port_must_lie_on_boundary() {
        let rects = vec![Rect::new(-1.0, 0.0, 0.0, 1.0).unwrap(), Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()];
        let p = Port { name: "mid".into(), side: Side::Left, at: 0.0, lo: 0.0, hi: 1.0, lateral: LateralBc::NN, modes: 2 };
        assert!(Domain::new(rects, vec![], vec![p], K).is_err());
    }

    #[test]
    fn record_round_trip() {
        let g = BranchedGuide::new(1.4, 5.0, K).with_side_branch(1.5, 1.0, 2.0);
        let d = build_branched_guide(&g).unwrap();
        let rec = DomainRecord::from(d.clone());
        let back = Domain::try_from(rec).unwrap();
        assert_eq!(back, d);
    }
}
