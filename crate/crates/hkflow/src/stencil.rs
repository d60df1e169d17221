//! Finite-difference stencils on classified grids.
//!
//! Interior nodes use standard central differences. Boundary-cut nodes come
//! in two flavors:
//!
//! * `WithBoundary` - Shortley-Weller stencils whose shortened arms end on
//!   the boundary and read the Dirichlet data there (the solver's scheme;
//!   first-order truncation at the cut ring, second-order globally);
//! * `FieldOnly` - one-sided lattice-only differences usable without any
//!   boundary data (diagnostic residuals).
//!
//! Hessian cross-terms are 4-point central where the diagonal neighbors
//! exist and fall back to one-sided products at cut nodes.

use crate::domain::{Grid, NodeClass};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) enum ValRef {
    Node(usize),
    /// Known boundary value at a cut point.
    Bound(f64),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Term {
    pub re: ValRef,
    pub w: f64,
}

/// Linear difference stencils for one node: gradient per axis, Hessian
/// diagonal per axis, Hessian off-diagonal for i < j.
#[derive(Clone, Debug, Default)]
pub(crate) struct NodeStencil {
    pub grad: Vec<Vec<Term>>,
    pub hess_diag: Vec<Vec<Term>>,
    pub hess_off: Vec<((usize, usize), Vec<Term>)>,
    /// Cross-terms that had to be dropped for lack of lattice support.
    pub dropped_cross: usize,
}

pub(crate) struct StencilSet {
    pub stencils: Vec<NodeStencil>,
    pub dropped_cross: usize,
}

pub(crate) enum Scheme<'a> {
    FieldOnly,
    /// node, axis, side -> Dirichlet value at the cut point.
    WithBoundary(&'a dyn Fn(usize, usize, usize) -> f64),
}

impl NodeStencil {
    pub fn eval_grad(&self, u: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|t| eval_terms(t, u)).collect()
    }

    /// Hessian as (diag, off) matching the stencil layout.
    pub fn eval_hess(&self, u: &[f64]) -> (Vec<f64>, Vec<((usize, usize), f64)>) {
        let diag = self.hess_diag.iter().map(|t| eval_terms(t, u)).collect();
        let off = self
            .hess_off
            .iter()
            .map(|(ij, t)| (*ij, eval_terms(t, u)))
            .collect();
        (diag, off)
    }
}

pub(crate) fn eval_terms(terms: &[Term], u: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| {
            t.w * match t.re {
                ValRef::Node(i) => u[i],
                ValRef::Bound(v) => v,
            }
        })
        .sum()
}

/// Field-only stencil for one node (used by lenient diagnostics).
pub(crate) fn build_stencils_single(grid: &Grid, i: usize) -> Result<NodeStencil> {
    build_node(grid, i, &Scheme::FieldOnly)
}

/// Build stencils for every node of the grid.
pub(crate) fn build_stencils(grid: &Grid, scheme: Scheme) -> Result<StencilSet> {
    let mut stencils = Vec::with_capacity(grid.len());
    let mut dropped = 0usize;
    for i in 0..grid.len() {
        let s = build_node(grid, i, &scheme)?;
        dropped += s.dropped_cross;
        stencils.push(s);
    }
    Ok(StencilSet { stencils, dropped_cross: dropped })
}

fn build_node(grid: &Grid, i: usize, scheme: &Scheme) -> Result<NodeStencil> {
    let dim = grid.dim;
    let h = grid.h;
    let node = &grid.nodes[i];
    let mut st = NodeStencil::default();

    // Per-axis references and spacings toward both sides.
    struct Side {
        re: Option<ValRef>,
        a: f64,
    }
    let mut sides: Vec<[Side; 2]> = Vec::with_capacity(dim);
    for axis in 0..dim {
        let mk = |side: usize| -> Side {
            match node.nbr[axis][side] {
                Some(j) => Side { re: Some(ValRef::Node(j)), a: h },
                None => match scheme {
                    Scheme::WithBoundary(bv) => Side {
                        re: Some(ValRef::Bound(bv(i, axis, side))),
                        a: node.arms[axis][side],
                    },
                    Scheme::FieldOnly => Side { re: None, a: node.arms[axis][side] },
                },
            }
        };
        sides.push([mk(0), mk(1)]);
    }

    for axis in 0..dim {
        let [m, p] = &sides[axis];
        match (&m.re, &p.re) {
            (Some(rm), Some(rp)) => {
                let (a, b) = (m.a, p.a);
                // Unequal-arm first and second differences; central when a = b.
                st.grad.push(vec![
                    Term { re: *rm, w: -b / (a * (a + b)) },
                    Term { re: ValRef::Node(i), w: (b - a) / (a * b) },
                    Term { re: *rp, w: a / (b * (a + b)) },
                ]);
                st.hess_diag.push(vec![
                    Term { re: *rm, w: 2.0 / (a * (a + b)) },
                    Term { re: ValRef::Node(i), w: -2.0 / (a * b) },
                    Term { re: *rp, w: 2.0 / (b * (a + b)) },
                ]);
            }
            (Some(rm), None) | (None, Some(rm)) => {
                // One-sided: needs the next node inward. The gradient is
                // second order (three-point); the second derivative is the
                // shifted central formula, first order at the node itself.
                let side_in = if matches!(&sides[axis][0].re, Some(_)) { 0 } else { 1 };
                let s = if side_in == 0 { 1.0 } else { -1.0 };
                let j1 = match rm {
                    ValRef::Node(j) => *j,
                    ValRef::Bound(_) => unreachable!("FieldOnly has no Bound refs"),
                };
                let j2 = grid.nodes[j1].nbr[axis][side_in]
                    .ok_or(Error::GridTooCoarse(i))?;
                st.grad.push(vec![
                    Term { re: ValRef::Node(i), w: 3.0 * s / (2.0 * h) },
                    Term { re: ValRef::Node(j1), w: -4.0 * s / (2.0 * h) },
                    Term { re: ValRef::Node(j2), w: s / (2.0 * h) },
                ]);
                st.hess_diag.push(vec![
                    Term { re: ValRef::Node(i), w: 1.0 / (h * h) },
                    Term { re: ValRef::Node(j1), w: -2.0 / (h * h) },
                    Term { re: ValRef::Node(j2), w: 1.0 / (h * h) },
                ]);
            }
            (None, None) => return Err(Error::GridTooCoarse(i)),
        }
    }

    // Cross-terms over lattice nodes only.
    for ia in 0..dim {
        for ib in (ia + 1)..dim {
            match cross_terms(grid, i, ia, ib) {
                Some(terms) => st.hess_off.push(((ia, ib), terms)),
                None => {
                    if matches!(scheme, Scheme::FieldOnly)
                        && grid.nodes[i].class == NodeClass::Interior
                    {
                        return Err(Error::GridTooCoarse(i));
                    }
                    st.hess_off.push(((ia, ib), Vec::new()));
                    st.dropped_cross += 1;
                }
            }
        }
    }
    Ok(st)
}

/// Cross-derivative `D_ab` as a tensor product of one-dimensional
/// first-derivative stencils. Preference order: central x central (the
/// usual 4-point formula), then second-order one-sided combinations, then
/// first-order one-sided products. Returns `None` when no candidate has
/// full lattice support.
fn cross_terms(grid: &Grid, i: usize, ia: usize, ib: usize) -> Option<Vec<Term>> {
    let h = grid.h;
    // (rank, offsets-with-weights); lower rank = higher order.
    let candidates = |axis: usize| -> Vec<(usize, Vec<(i64, f64)>)> {
        let node = &grid.nodes[i];
        let has = |s: i64| node.nbr[axis][if s > 0 { 1 } else { 0 }].is_some();
        let mut c = Vec::new();
        if has(-1) && has(1) {
            c.push((0, vec![(-1, -0.5 / h), (1, 0.5 / h)]));
        }
        // Second-order one-sided, preferring the side with a neighbor.
        let sides: [i64; 2] = if has(-1) { [-1, 1] } else { [1, -1] };
        for s in sides {
            let sf = s as f64;
            c.push((
                1,
                vec![
                    (0, 3.0 * sf / (2.0 * h)),
                    (-s, -4.0 * sf / (2.0 * h)),
                    (-2 * s, sf / (2.0 * h)),
                ],
            ));
        }
        for s in sides {
            let sf = s as f64;
            c.push((3, vec![(0, sf / h), (-s, -sf / h)]));
        }
        c
    };

    let ca = candidates(ia);
    let cb = candidates(ib);
    let mut options: Vec<(usize, usize, usize)> = Vec::new();
    for (qa, (ra, _)) in ca.iter().enumerate() {
        for (qb, (rb, _)) in cb.iter().enumerate() {
            options.push((ra + rb, qa, qb));
        }
    }
    options.sort();

    'outer: for (_, qa, qb) in options {
        let mut terms = Vec::new();
        for &(da, wa) in &ca[qa].1 {
            for &(db, wb) in &cb[qb].1 {
                let w = wa * wb;
                if w == 0.0 {
                    continue;
                }
                match grid.offset_node(i, ia, da, ib, db) {
                    Some(j) => terms.push(Term { re: ValRef::Node(j), w }),
                    None => continue 'outer,
                }
            }
        }
        return Some(terms);
    }
    None
}
