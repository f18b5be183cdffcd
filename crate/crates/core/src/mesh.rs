//! Tensor grids on each rectangle and the conforming node registry.
//!
//! Horizontal subdivisions are uniform per segment, which keeps mirror pairs
//! of rectangles identical. Vertical subdivisions step upward with spacing
//! `h` from the segment base and absorb the remainder in the last cell, so
//! the grid near a junction does not move when a branch grows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Domain, Rect, Side, COORD_TOL};

/// How the linear system is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Every grid node is an unknown.
    Direct,
    /// Uniform ducts are eliminated mode by mode onto their junction line.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub h: f64,
    pub method: Method,
    /// Condition estimates above this flag a possible trapped mode.
    pub trapped_threshold: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { h: 1.0 / 64.0, method: Method::Reduced, trapped_threshold: 1e12 }
    }
}

impl Numerics {
    pub fn with_h(h: f64) -> Self {
        Numerics { h, ..Default::default() }
    }

    pub fn direct(self) -> Self {
        Numerics { method: Method::Direct, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 0.5) {
            return Err(invalid(format!("grid step must lie in (0, 0.5), got {}", self.h)));
        }
        if !(self.trapped_threshold > 1.0) {
            return Err(invalid("trapped-mode threshold must exceed 1"));
        }
        Ok(())
    }
}

/// Uniform subdivision of `[a, b]` into `ceil((b − a)/h)` cells.
pub fn subdivide_uniform(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = (((b - a) / h) - 1e-9).ceil().max(1.0) as usize;
    let mut v: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    v.push(b);
    v
}

/// Cells of size `h` from `a`; the remainder joins the last cell when it is
/// shorter than `h/2` and forms its own cell otherwise.
pub fn subdivide_anchored(a: f64, b: f64, h: f64) -> Vec<f64> {
    let cells = (b - a) / h;
    let whole = cells.round();
    if (cells - whole).abs() <= 1e-9 * cells.max(1.0) && whole >= 1.0 {
        return subdivide_uniform(a, b, (b - a) / whole);
    }
    let m = cells.floor() as usize;
    let rem = (b - a) - m as f64 * h;
    let keep = if rem < 0.5 * h { m.saturating_sub(1) } else { m };
    let mut v: Vec<f64> = (0..=keep).map(|i| a + i as f64 * h).collect();
    v.push(b);
    v
}

fn subdivide(breaks: &[f64], h: f64, anchored: bool) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for p in breaks.windows(2) {
        let seg = if anchored { subdivide_anchored(p[0], p[1], h) } else { subdivide_uniform(p[0], p[1], h) };
        out.extend_from_slice(&seg[1..]);
    }
    out
}

fn sorted_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|&t| t > lo + COORD_TOL && t < hi - COORD_TOL);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= COORD_TOL);
    v
}

/// Grid lines of every rectangle of a domain.
#[derive(Clone, Debug)]
pub struct RectGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

pub fn rect_grids(d: &Domain, h: f64) -> Vec<RectGrid> {
    let rects = d.rects();
    rects
        .iter()
        .map(|r| {
            let mut xb = Vec::new();
            let mut yb = Vec::new();
            for side in Side::ALL {
                let seg = r.side(side);
                let mut push = |lo: f64, hi: f64| {
                    let t = if side.is_vertical() { &mut yb } else { &mut xb };
                    t.push(lo);
                    t.push(hi);
                };
                for o in rects {
                    let s2 = o.side(side.opposite());
                    if seg.overlap(&s2) > COORD_TOL {
                        push(s2.lo.max(seg.lo), s2.hi.min(seg.hi));
                    }
                }
                for s2 in d.dirichlet().iter().chain(d.ports().iter().map(|p| p.segment()).collect::<Vec<_>>().iter()) {
                    if seg.overlap(s2) > COORD_TOL {
                        push(s2.lo.max(seg.lo), s2.hi.min(seg.hi));
                    }
                }
            }
            xb.push(0.0);
            let xb = sorted_breaks(xb, r.x0, r.x1);
            let yb = sorted_breaks(yb, r.y0, r.y1);
            RectGrid { xs: subdivide(&xb, h, false), ys: subdivide(&yb, h, true) }
        })
        .collect()
}

fn key(x: f64, y: f64) -> (i64, i64) {
    ((x * 1e8).round() as i64, (y * 1e8).round() as i64)
}

/// One bilinear cell with corners ordered (x0,y0), (x1,y0), (x0,y1), (x1,y1).
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub corners: [usize; 4],
    pub dx: f64,
    pub dy: f64,
}

/// Nodes and cells of a set of rectangles.
#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub dirichlet: Vec<bool>,
    /// Unknown index of each node (None on Dirichlet nodes).
    pub unknown: Vec<Option<usize>>,
    pub n_unknowns: usize,
    pub cells: Vec<Cell>,
    index: HashMap<(i64, i64), usize>,
}

impl Mesh {
    /// Meshes the rectangles `which` of `d` with the given grids.
    pub fn build(d: &Domain, grids: &[RectGrid], which: &[usize]) -> Result<Mesh> {
        let mut m = Mesh::default();
        for &ri in which {
            let g = &grids[ri];
            let mut ids = vec![0usize; g.xs.len() * g.ys.len()];
            for (j, &y) in g.ys.iter().enumerate() {
                for (i, &x) in g.xs.iter().enumerate() {
                    ids[j * g.xs.len() + i] = m.insert(x, y);
                }
            }
            let nx = g.xs.len();
            for j in 0..g.ys.len() - 1 {
                for i in 0..nx - 1 {
                    m.cells.push(Cell {
                        corners: [ids[j * nx + i], ids[j * nx + i + 1], ids[(j + 1) * nx + i], ids[(j + 1) * nx + i + 1]],
                        dx: g.xs[i + 1] - g.xs[i],
                        dy: g.ys[j + 1] - g.ys[j],
                    });
                }
            }
        }
        check_conforming(d, grids, which)?;
        m.dirichlet = m.nodes.iter().map(|p| d.is_dirichlet(p[0], p[1])).collect();
        let mut next = 0;
        m.unknown = m
            .dirichlet
            .iter()
            .map(|&dir| {
                if dir {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        m.n_unknowns = next;
        Ok(m)
    }

    fn insert(&mut self, x: f64, y: f64) -> usize {
        let n = self.nodes.len();
        *self.index.entry(key(x, y)).or_insert_with(|| {
            self.nodes.push([x, y]);
            n
        })
    }

    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        self.index.get(&key(x, y)).copied()
    }

    pub fn unknown_at(&self, x: f64, y: f64) -> Option<usize> {
        self.node_at(x, y).and_then(|n| self.unknown[n])
    }
}

/// Every node a rectangle places on a shared edge must also be a node of the
/// neighbour across it.
fn check_conforming(d: &Domain, grids: &[RectGrid], which: &[usize]) -> Result<()> {
    let rects = d.rects();
    for &a in which {
        for &b in which {
            if a == b {
                continue;
            }
            let (ra, rb): (&Rect, &Rect) = (&rects[a], &rects[b]);
            for side in Side::ALL {
                let sa = ra.side(side);
                let sb = rb.side(side.opposite());
                if sa.overlap(&sb) <= COORD_TOL {
                    continue;
                }
                let (lo, hi) = (sa.lo.max(sb.lo), sa.hi.min(sb.hi));
                let (ta, tb) = if side.is_vertical() { (&grids[a].ys, &grids[b].ys) } else { (&grids[a].xs, &grids[b].xs) };
                let pick = |t: &Vec<f64>| -> Vec<f64> {
                    t.iter().copied().filter(|&v| v >= lo - COORD_TOL && v <= hi + COORD_TOL).collect()
                };
                let (pa, pb) = (pick(ta), pick(tb));
                if pa.len() != pb.len() || pa.iter().zip(&pb).any(|(u, v)| (u - v).abs() > 1e-8) {
                    return Err(invalid(format!("geometry not grid-aligned along the edge shared by {ra:?} and {rb:?}")));
                }
            }
        }
    }
    Ok(())
}
