//! Triangular-lattice interface machinery: the unsatisfied dual edges Γ(η)
//! on the hexagonal dual, b-loop tracing with the open-cluster-on-the-left
//! orientation, protected sites and stable edges, the cell exploration
//! process, and the ancestor check between coupled plain/enhanced families.
//!
//! At a degree-3 dual vertex (a triangle of the primal lattice) either zero
//! or exactly two incident dual edges are unsatisfied, so the successor of
//! an oriented boundary edge is unique: tracing needs no corner rule, loops
//! are self-avoiding, and distinct loops are vertex-disjoint.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cells::{CellId, CellPartition};
use crate::curves::Curve;
use crate::fields::SiteField;
use crate::lattice::{Adjacency, Boundary, EdgeKey, Face, LatticeKind, Site};
use crate::{Error, Result};

/// The set of unsatisfied dual edges of a triangular field, keyed by the
/// lattice edge each one crosses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEdgeSet {
    pub mesh: f64,
    pub edges: HashSet<EdgeKey>,
}

fn require_triangular(field: &SiteField) -> Result<()> {
    if field.model.kind != LatticeKind::Triangular {
        return Err(Error::Unsupported(
            "interfaces are defined on the triangular lattice".into(),
        ));
    }
    if field.window.boundary == Boundary::Torus {
        return Err(Error::Unsupported(
            "interface tracing does not support torus windows".into(),
        ));
    }
    Ok(())
}

/// Γ(η): every lattice edge with one open and one closed endpoint, for
/// edges with at least one endpoint in the window (the boundary policy
/// resolves the other).
pub fn unsatisfied(field: &SiteField) -> Result<DualEdgeSet> {
    require_triangular(field)?;
    let model = field.model;
    let mut edges = HashSet::new();
    for s in field.window.sites(model.kind) {
        let so = field.open(s);
        for nb in model.neighbors(s) {
            if so != field.open(nb) {
                edges.insert(EdgeKey::new(s, nb));
            }
        }
    }
    Ok(DualEdgeSet {
        mesh: field.model.mesh,
        edges,
    })
}

/// One traced boundary: an oriented, self-avoiding path on the hexagonal
/// dual whose edges are all unsatisfied, with the open cluster on the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BLoop {
    /// Dual sites (triangle faces) in trace order.
    pub vertices: Vec<Face>,
    /// The crossed lattice edges, one per step.
    pub edges: Vec<EdgeKey>,
    pub closed: bool,
    /// True when the trace touched the window frame ring (such loops are
    /// excluded from convergence gates).
    pub touches_frame: bool,
}

/// A family of traced boundaries rendered as polylines at the field's mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFamily {
    pub mesh: f64,
    pub provenance: Provenance,
    pub loops: Vec<BLoop>,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Plain,
    Enhanced,
}

/// Oriented crossing state: the dual edge crossing `(open, closed)` about
/// to enter `face`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Crossing {
    open: Site,
    closed: Site,
    face: Face,
}

fn faces_of_edge(field: &SiteField, a: Site, b: Site) -> (Face, Face) {
    let d = field.model.dual_edge(a, b).expect("lattice edge");
    d.faces
}

/// The first crossing of the canonical (open-left) orientation of an
/// unsatisfied edge.
fn initial_crossing(field: &SiteField, e: EdgeKey) -> Crossing {
    let (open, closed) = if field.open(e.a) {
        (e.a, e.b)
    } else {
        (e.b, e.a)
    };
    let (f1, f2) = faces_of_edge(field, e.a, e.b);
    let m = field.model;
    let (p1, p2) = (m.dual_position(f1), m.dual_position(f2));
    let mid = [(p1[0] + p2[0]) / 2.0, (p1[1] + p2[1]) / 2.0];
    let dir = [p2[0] - p1[0], p2[1] - p1[1]];
    let po = m.position(open);
    let to_open = [po[0] - mid[0], po[1] - mid[1]];
    // travel with the open side on the left
    if dir[0] * to_open[1] - dir[1] * to_open[0] > 0.0 {
        Crossing {
            open,
            closed,
            face: f2,
        }
    } else {
        Crossing {
            open,
            closed,
            face: f1,
        }
    }
}

/// Deterministic successor: inside the entered triangle, the interface
/// continues between the third corner and whichever of the current pair
/// keeps the open side on the left.
fn successor(field: &SiteField, c: Crossing) -> Crossing {
    let corners = field.model.face_sites(c.face);
    let z = *corners
        .iter()
        .find(|&&s| s != c.open && s != c.closed)
        .expect("triangle has a third corner");
    let (open, closed) = if field.open(z) {
        (z, c.closed)
    } else {
        (c.open, z)
    };
    let (f1, f2) = faces_of_edge(field, open, closed);
    let next_face = if f1 == c.face { f2 } else { f1 };
    Crossing {
        open,
        closed,
        face: next_face,
    }
}

fn near_frame(field: &SiteField, s: Site) -> bool {
    let w = field.window;
    !w.shrunk(1).contains(s)
}

fn trace_from(field: &SiteField, start: Crossing, budget: usize) -> Result<BLoop> {
    let mut cur = start;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut frame = false;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > budget {
            return Err(Error::Contract("boundary trace failed to close".into()));
        }
        edges.push(EdgeKey::new(cur.open, cur.closed));
        vertices.push(cur.face);
        frame |= near_frame(field, cur.open) || near_frame(field, cur.closed);
        cur = successor(field, cur);
        if cur == start {
            break;
        }
    }
    Ok(BLoop {
        vertices,
        edges,
        closed: true,
        touches_frame: frame,
    })
}

/// Trace the single boundary through one unsatisfied edge.
pub fn trace_boundary_through(field: &SiteField, edge: EdgeKey) -> Result<BLoop> {
    require_triangular(field)?;
    if field.open(edge.a) == field.open(edge.b) {
        return Err(Error::Contract("edge is satisfied; no boundary through it".into()));
    }
    let budget = 8 * field.window.len(field.model.kind) + 64;
    trace_from(field, initial_crossing(field, edge), budget)
}

/// Decompose Γ(η) into oriented self-avoiding b-loops (open cluster on the
/// left). With a closed- or open-exterior policy every boundary closes up;
/// loops that touch the window frame ring are flagged.
pub fn trace_loops(field: &SiteField) -> Result<Vec<BLoop>> {
    require_triangular(field)?;
    let gamma = unsatisfied(field)?;
    // deterministic root order: sort the edge set
    let mut roots: Vec<EdgeKey> = gamma.edges.iter().copied().collect();
    roots.sort();
    let mut visited: HashSet<EdgeKey> = HashSet::with_capacity(gamma.edges.len());
    let mut out = Vec::new();
    let budget = 4 * gamma.edges.len() + 8;
    for root in roots {
        if visited.contains(&root) {
            continue;
        }
        let bl = trace_from(field, initial_crossing(field, root), budget)?;
        visited.extend(bl.edges.iter().copied());
        out.push(bl);
    }
    Ok(out)
}

/// Render a traced boundary as a polyline in the plane (dual sites at the
/// field's mesh).
pub fn bloop_curve(field: &SiteField, bl: &BLoop) -> Curve {
    let pts = bl
        .vertices
        .iter()
        .map(|&f| field.model.dual_position(f))
        .collect();
    Curve {
        points: pts,
        closed: bl.closed,
    }
}

/// Trace a field into a curve family.
pub fn family(field: &SiteField, provenance: Provenance) -> Result<CurveFamily> {
    let loops = trace_loops(field)?;
    let curves = loops.iter().map(|b| bloop_curve(field, b)).collect();
    Ok(CurveFamily {
        mesh: field.model.mesh,
        provenance,
        loops,
        curves,
    })
}

/// Is `x` protected: closed, with two closed co-graph paths from `x` whose
/// last sites are the first outside B_x(2·range), disjoint and nonadjacent
/// (in the co-graph) except at `x`? Decided by exact search: DFS over
/// self-avoiding first arms with a reachability check for the second.
///
/// `co` is the matching partner of the percolation graph: star for lattice
/// percolation (they coincide on the triangular lattice), lattice for
/// star percolation.
pub fn is_protected(field: &SiteField, x: Site, range: f64, co: Adjacency) -> Result<bool> {
    let model = field.model;
    let ball: Vec<Site> = model.ball(x, 2.0 * range);
    if field.window.boundary == Boundary::Free {
        // the ball plus its exit ring must be resolvable
        for s in model.ball(x, 2.0 * range + 2.5) {
            if field.window.index(model.kind, s).is_none() {
                return Err(Error::Contract(format!(
                    "protection ball of {x:?} is clipped by a free-boundary window"
                )));
            }
        }
    }
    if field.open(x) {
        return Ok(false);
    }

    // ball-local graph: the ball plus one co-graph ring (exit sites), with
    // closedness and adjacency flattened into small indexed arrays
    let mut nodes: Vec<Site> = ball.clone();
    let in_ball_count = nodes.len();
    {
        let known: HashSet<Site> = nodes.iter().copied().collect();
        let mut ring: Vec<Site> = Vec::new();
        for &s in &ball {
            for nb in model.neighbors_under(co, s) {
                if !known.contains(&nb) && !ring.contains(&nb) {
                    ring.push(nb);
                }
            }
        }
        ring.sort();
        nodes.extend(ring);
    }
    let index: HashMap<Site, usize> = nodes.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = nodes.len();
    let closed: Vec<bool> = nodes.iter().map(|&s| !field.open(s)).collect();
    let inside: Vec<bool> = (0..n).map(|i| i < in_ball_count).collect();
    let nbrs: Vec<Vec<u16>> = nodes
        .iter()
        .map(|&s| {
            model
                .neighbors_under(co, s)
                .into_iter()
                .filter_map(|nb| index.get(&nb).map(|&i| i as u16))
                .collect()
        })
        .collect();
    let xi = index[&x];

    // Is there a closed path from a non-forbidden closed co-neighbor of x
    // to outside the ball, avoiding x, the first arm and its neighborhood?
    let arm2_exists = |forbidden: &[bool]| -> bool {
        let mut seen = vec![false; n];
        let mut stack: Vec<u16> = Vec::new();
        for &b in &nbrs[xi] {
            let b = b as usize;
            if closed[b] && !forbidden[b] && b != xi {
                seen[b] = true;
                stack.push(b as u16);
            }
        }
        while let Some(i) = stack.pop() {
            let i = i as usize;
            if !inside[i] {
                return true;
            }
            for &j in &nbrs[i] {
                let j = j as usize;
                if closed[j] && !forbidden[j] && j != xi && !seen[j] {
                    seen[j] = true;
                    stack.push(j as u16);
                }
            }
        }
        false
    };

    // DFS over self-avoiding closed first arms with subtree pruning: the
    // forbidden set only grows along an arm, so a prefix without a feasible
    // second arm has no feasible completion either.
    struct Search<'a> {
        closed: &'a [bool],
        inside: &'a [bool],
        nbrs: &'a [Vec<u16>],
        xi: usize,
        budget: usize,
        visited: usize,
    }

    impl Search<'_> {
        fn dfs(
            &mut self,
            tip: usize,
            arm: &mut Vec<usize>,
            forbidden: &mut Vec<bool>,
            arm2: &dyn Fn(&[bool]) -> bool,
        ) -> Result<bool> {
            self.visited += 1;
            if self.visited > self.budget {
                return Err(Error::Capability(
                    "protected-site search exceeded its node budget".into(),
                ));
            }
            if !arm2(forbidden) {
                return Ok(false);
            }
            if !self.inside[tip] {
                return Ok(true);
            }
            for &j in &self.nbrs[tip] {
                let j = j as usize;
                if !self.closed[j] || j == self.xi || arm.contains(&j) {
                    continue;
                }
                // extend the arm; forbid the new site and its neighborhood
                arm.push(j);
                let mut newly: Vec<usize> = Vec::new();
                if !forbidden[j] {
                    forbidden[j] = true;
                    newly.push(j);
                }
                for &k in &self.nbrs[j] {
                    let k = k as usize;
                    if !forbidden[k] {
                        forbidden[k] = true;
                        newly.push(k);
                    }
                }
                let found = self.dfs(j, arm, forbidden, arm2)?;
                for k in newly {
                    forbidden[k] = false;
                }
                arm.pop();
                if found {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }

    let mut search = Search {
        closed: &closed,
        inside: &inside,
        nbrs: &nbrs,
        xi,
        budget: 200_000,
        visited: 0,
    };
    for &first in &nbrs[xi] {
        let first = first as usize;
        if !closed[first] {
            continue;
        }
        // forbid the first site and its fan; x itself is the shared start
        // and is excluded from the second arm's flood explicitly
        let mut forbidden = vec![false; n];
        forbidden[first] = true;
        for &k in &nbrs[first] {
            forbidden[k as usize] = true;
        }
        let mut arm = vec![first];
        if search.dfs(first, &mut arm, &mut forbidden, &arm2_exists)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Is the dual edge stable: unsatisfied, with the closed endpoint protected?
pub fn is_stable(field: &SiteField, edge: EdgeKey, range: f64, co: Adjacency) -> Result<bool> {
    let (a, b) = (edge.a, edge.b);
    let (oa, ob) = (field.open(a), field.open(b));
    if oa == ob {
        return Ok(false);
    }
    let closed = if oa { b } else { a };
    is_protected(field, closed, range, co)
}

/// Trace the boundary through `start`, revealing sites lazily: whenever a
/// site in an untouched cell is needed, the whole cell is revealed (logged
/// once, in first-entry order). With the counter-based generator this is
/// equivalent to generating the field on demand; the traced loop is
/// identical to the eager trace.
pub fn explore(
    field: &SiteField,
    start: EdgeKey,
    cells: &CellPartition,
) -> Result<(BLoop, Vec<CellId>)> {
    require_triangular(field)?;
    if field.open(start.a) == field.open(start.b) {
        return Err(Error::Contract("exploration must start on an unsatisfied edge".into()));
    }
    let mut revealed: HashSet<CellId> = HashSet::new();
    let mut log: Vec<CellId> = Vec::new();
    let mut reveal = |s: Site| {
        let c = cells.cell_of(s);
        if revealed.insert(c) {
            log.push(c);
        }
    };

    reveal(start.a);
    reveal(start.b);
    let init = initial_crossing(field, start);
    let mut cur = init;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut frame = false;
    let budget = 8 * field.window.len(field.model.kind) + 64;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > budget {
            return Err(Error::Contract("exploration failed to close".into()));
        }
        vertices.push(cur.face);
        edges.push(EdgeKey::new(cur.open, cur.closed));
        frame |= near_frame(field, cur.open) || near_frame(field, cur.closed);
        // the successor reads the third corner of the entered face
        let corners = field.model.face_sites(cur.face);
        for c in corners {
            reveal(c);
        }
        cur = successor(field, cur);
        if cur == init {
            break;
        }
    }
    Ok((
        BLoop {
            vertices,
            edges,
            closed: true,
            touches_frame: frame,
        },
        log,
    ))
}

/// Outcome of the ancestor matching between coupled families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncestorReport {
    /// Enhanced loops large enough to be gated (diameter ≥ 6·range·mesh).
    pub checked: usize,
    /// (child index, parent index, child diameter, parent diameter) for
    /// pairs violating diam(parent) ≥ diam(child) − 4·range·mesh.
    pub diameter_violations: Vec<(usize, usize, f64, f64)>,
    /// Children that mapped to an already-used parent.
    pub duplicate_parents: usize,
}

impl AncestorReport {
    pub fn ok(&self) -> bool {
        self.diameter_violations.is_empty() && self.duplicate_parents == 0
    }
}

/// For every enhanced loop with diameter at least 6·range·mesh, find the
/// nearest plain loop by curve distance and verify the diameter bound
/// diam(parent) ≥ diam(child) − 4·range·mesh, and that the matching is
/// one to one. Frame-touching loops are skipped.
pub fn ancestor_check(
    plain: &CurveFamily,
    enhanced: &CurveFamily,
    range: f64,
) -> Result<AncestorReport> {
    let mesh = enhanced.mesh;
    let min_diam = 6.0 * range * mesh;
    let slack = 4.0 * range * mesh;
    let plain_diams: Vec<f64> = plain.curves.iter().map(|c| c.diameter()).collect();
    // loops untouched by the enhancement match themselves exactly
    let mut exact: HashMap<Vec<u64>, usize> = HashMap::new();
    for (pi, c) in plain.curves.iter().enumerate() {
        exact.entry(c.canonical_key()).or_insert(pi);
    }
    let mut used: HashMap<usize, usize> = HashMap::new();
    let mut report = AncestorReport {
        checked: 0,
        diameter_violations: Vec::new(),
        duplicate_parents: 0,
    };
    for (ci, curve) in enhanced.curves.iter().enumerate() {
        if enhanced.loops[ci].touches_frame {
            continue;
        }
        let child_diam = curve.diameter();
        if child_diam < min_diam {
            continue;
        }
        report.checked += 1;
        let pi = if let Some(&pi) = exact.get(&curve.canonical_key()) {
            pi
        } else {
            // nearest plain loop by curve distance
            let mut best = (f64::INFINITY, usize::MAX);
            for (pi, pcurve) in plain.curves.iter().enumerate() {
                let d = crate::curves::curve_distance(curve, pcurve)?;
                if d < best.0 {
                    best = (d, pi);
                }
            }
            best.1
        };
        if used.insert(pi, ci).is_some() {
            report.duplicate_parents += 1;
        }
        if plain_diams[pi] < child_diam - slack - 1e-9 {
            report
                .diameter_violations
                .push((ci, pi, child_diam, plain_diams[pi]));
        }
    }
    Ok(report)
}
