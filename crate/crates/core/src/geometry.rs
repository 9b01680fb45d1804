//! Path geometry on the embedded lattices: self-repelling tests and
//! reductions, Jordan interior/exterior splits, and external boundaries of
//! finite clusters as self-avoiding `*`-loops.
//!
//! Close-packing chords are drawn as straight segments inside their face
//! (all faces are convex), so embedded loops are polygons and interior
//! queries reduce to even-odd ray casting. Chords inside one face may cross
//! each other; such crossings are not vertices.

use std::collections::{HashMap, HashSet};

use crate::lattice::{Adjacency, LatticeModel, Path, Site, Window};
use crate::{Error, Result};

/// Even-odd point-in-polygon tester with a per-row intercept cache, so bulk
/// classification against one loop stays cheap.
pub struct PolygonTester {
    vertices: Vec<[f64; 2]>,
    cache: std::cell::RefCell<HashMap<u64, std::rc::Rc<Vec<f64>>>>,
}

impl PolygonTester {
    pub fn new(vertices: Vec<[f64; 2]>) -> PolygonTester {
        PolygonTester {
            vertices,
            cache: Default::default(),
        }
    }

    pub fn from_loop(model: &LatticeModel, lp: &Path) -> PolygonTester {
        PolygonTester::new(lp.sites.iter().map(|&s| model.position(s)).collect())
    }

    fn intercepts(&self, y: f64) -> std::rc::Rc<Vec<f64>> {
        if let Some(v) = self.cache.borrow().get(&y.to_bits()) {
            return v.clone();
        }
        let n = self.vertices.len();
        let mut xs = Vec::new();
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            if (p[1] > y) != (q[1] > y) {
                let t = (y - p[1]) / (q[1] - p[1]);
                xs.push(p[0] + t * (q[0] - p[0]));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rc = std::rc::Rc::new(xs);
        self.cache.borrow_mut().insert(y.to_bits(), rc.clone());
        rc
    }

    /// Even-odd test; for points on the polygon the answer is unspecified.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let xs = self.intercepts(p[1]);
        let first_greater = xs.partition_point(|&x| x <= p[0]);
        (xs.len() - first_greater) % 2 == 1
    }
}

/// True when no site of the path is adjacent (under the path's adjacency) to
/// another site of the path besides its one or two path-neighbors. Loops are
/// treated cyclically. Empty and singleton paths are trivially
/// self-repelling; a repeated site disqualifies.
pub fn is_self_repelling(model: &LatticeModel, path: &Path) -> bool {
    let s = &path.sites;
    let n = s.len();
    if n <= 1 {
        return true;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let consecutive = j == i + 1 || (path.closed && i == 0 && j == n - 1);
            if consecutive {
                continue;
            }
            if s[i] == s[j] || model.adjacent(path.adjacency, s[i], s[j]) {
                return false;
            }
        }
    }
    true
}

/// Reduce a path to a self-repelling subpath with the same endpoints by
/// repeatedly deleting the segment between a non-consecutive adjacent pair.
/// For loops, `marked` must name a point of the interior; the reduction cuts
/// on the side that keeps it inside, and the result still surrounds it.
pub fn self_repelling_reduction(
    model: &LatticeModel,
    path: &Path,
    marked: Option<Site>,
) -> Result<Path> {
    if path.closed {
        let marked =
            marked.ok_or_else(|| Error::Contract("loop reduction needs a marked point".into()))?;
        let sites = reduce_loop(model, path.sites.clone(), path.adjacency, marked, true);
        Ok(Path::loop_of(sites, path.adjacency))
    } else {
        let mut s = path.sites.clone();
        'outer: loop {
            let n = s.len();
            for i in 0..n {
                for j in (i + 2)..n {
                    if s[i] == s[j] || model.adjacent(path.adjacency, s[i], s[j]) {
                        // deleting (i, j) exclusive splices the pair together
                        let keep = if s[i] == s[j] { j + 1 } else { j };
                        s = [&s[..=i], &s[keep.min(n)..]].concat();
                        continue 'outer;
                    }
                }
            }
            return Ok(Path::open(s, path.adjacency));
        }
    }
}

/// Remove repeated sites from a closed walk, keeping `marked` inside.
/// With `shortcut_adjacent` set, non-consecutive adjacent pairs are cut too,
/// which yields a self-repelling loop instead of a merely self-avoiding one.
fn reduce_loop(
    model: &LatticeModel,
    mut sites: Vec<Site>,
    adjacency: Adjacency,
    marked: Site,
    shortcut_adjacent: bool,
) -> Vec<Site> {
    let marked_pos = model.position(marked);
    'outer: loop {
        let n = sites.len();
        if n <= 3 {
            return sites;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let consecutive = j == i + 1 || (i == 0 && j == n - 1);
                let dup = sites[i] == sites[j];
                let chord = shortcut_adjacent
                    && !consecutive
                    && !dup
                    && model.adjacent(adjacency, sites[i], sites[j]);
                if !(dup && !consecutive) && !chord {
                    continue;
                }
                // candidate cycles: inner i..j(±) and outer j.. ++ ..i(±);
                // exactly one of them winds around the marked point
                let inner: Vec<Site> = if dup {
                    sites[i..j].to_vec()
                } else {
                    sites[i..=j].to_vec()
                };
                let outer: Vec<Site> = if dup {
                    [&sites[j..], &sites[..i]].concat()
                } else {
                    [&sites[j..], &sites[..=i]].concat()
                };
                let inner_poly =
                    PolygonTester::new(inner.iter().map(|&s| model.position(s)).collect());
                sites = if inner.len() >= 3 && inner_poly.contains(marked_pos) {
                    inner
                } else {
                    outer
                };
                continue 'outer;
            }
        }
        return sites;
    }
}

/// Loop-erase a closed walk into a self-avoiding loop that still surrounds
/// the marked point.
pub fn erase_repeats(
    model: &LatticeModel,
    sites: Vec<Site>,
    adjacency: Adjacency,
    marked: Site,
) -> Vec<Site> {
    reduce_loop(model, sites, adjacency, marked, false)
}

/// Split the window sites not on the loop into (interior, exterior) by
/// even-odd ray casting against the embedded loop.
pub fn jordan_split(
    model: &LatticeModel,
    lp: &Path,
    window: &Window,
) -> Result<(Vec<Site>, Vec<Site>)> {
    if !lp.closed {
        return Err(Error::Contract("jordan_split needs a loop".into()));
    }
    if !lp.is_self_avoiding() {
        return Err(Error::Contract(
            "jordan_split needs a self-avoiding loop".into(),
        ));
    }
    let on_loop: HashSet<Site> = lp.sites.iter().copied().collect();
    let tester = PolygonTester::from_loop(model, lp);
    let mut interior = Vec::new();
    let mut exterior = Vec::new();
    for s in window.sites(model.kind) {
        if on_loop.contains(&s) {
            continue;
        }
        if tester.contains(model.position(s)) {
            interior.push(s);
        } else {
            exterior.push(s);
        }
    }
    Ok((interior, exterior))
}

/// The external boundary of a bounded, nonempty, L-connected cluster: a
/// self-avoiding `*`-loop of sites outside the cluster, each L-adjacent to
/// it, surrounding the whole cluster.
pub fn external_boundary(model: &LatticeModel, cluster: &[Site]) -> Result<Path> {
    if cluster.is_empty() {
        return Err(Error::Contract(
            "external_boundary of an empty cluster".into(),
        ));
    }
    let cset: HashSet<Site> = cluster.iter().copied().collect();
    // L-connectivity check
    {
        let mut seen = HashSet::with_capacity(cset.len());
        let mut stack = vec![cluster[0]];
        seen.insert(cluster[0]);
        while let Some(s) = stack.pop() {
            for n in model.neighbors(s) {
                if cset.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        if seen.len() != cset.len() {
            return Err(Error::Contract("cluster is not L-connected".into()));
        }
    }

    // start at the top: the highest embedded site and its highest neighbor,
    // which necessarily lies outside the cluster
    let key = |s: Site| {
        let p = model.position(s);
        (p[1], p[0])
    };
    let cstar = *cluster
        .iter()
        .max_by(|&&a, &&b| key(a).partial_cmp(&key(b)).unwrap())
        .unwrap();
    let xstar = model
        .neighbors(cstar)
        .into_iter()
        .max_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap())
        .unwrap();
    debug_assert!(!cset.contains(&xstar));

    // orient the first crossing so the cluster sits on the left
    let d = model.dual_edge(cstar, xstar)?;
    let (pa, pb) = (
        model.dual_position(d.faces.0),
        model.dual_position(d.faces.1),
    );
    let pc = model.position(cstar);
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    let cross = |dir: [f64; 2], v: [f64; 2]| dir[0] * v[1] - dir[1] * v[0];
    let dir_ab = [pb[0] - pa[0], pb[1] - pa[1]];
    let to_c = [pc[0] - mid[0], pc[1] - mid[1]];
    let enter = if cross(dir_ab, to_c) > 0.0 {
        d.faces.1
    } else {
        d.faces.0
    };

    // trace the cell-union contour: state = (entered face, c-site, x-site),
    // crossing (c, x) with the cluster kept on the left
    let start = (enter, cstar, xstar);
    let mut state = start;
    let mut emitted = vec![xstar];
    let budget = 32 * cluster.len() * model.kind.degree() + 256;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > budget {
            return Err(Error::Contract("contour walk failed to close".into()));
        }
        let (face, c, x) = state;
        let perim = model.face_sites(face);
        let m = perim.len();
        let ci = perim.iter().position(|&s| s == c).expect("c on face");
        // continue around the wedge of cluster cells containing c, away
        // from the entry edge
        let forward = perim[(ci + 1) % m] == x;
        debug_assert!(
            forward || perim[(ci + m - 1) % m] == x,
            "entry pair not consecutive on face"
        );
        let stepdir = if forward { m - 1 } else { 1 };
        let mut last_c = c;
        let mut k = (ci + stepdir) % m;
        let out_x = loop {
            if cset.contains(&perim[k]) {
                last_c = perim[k];
                k = (k + stepdir) % m;
            } else {
                break perim[k];
            }
        };
        let out_edge = model.dual_edge(last_c, out_x)?;
        let next_face = if out_edge.faces.0 == face {
            out_edge.faces.1
        } else {
            out_edge.faces.0
        };
        state = (next_face, last_c, out_x);
        if state == start {
            break;
        }
        emitted.push(out_x);
    }

    // consecutive duplicates arise when the walk pivots around one site
    emitted.dedup();
    if emitted.len() > 1 && emitted.first() == emitted.last() {
        emitted.pop();
    }
    let sites = erase_repeats(model, emitted, Adjacency::Star, cstar);
    let lp = Path::loop_of(sites, Adjacency::Star);
    debug_assert!(lp.is_valid(model));
    debug_assert!(lp.is_self_avoiding());
    Ok(lp)
}

/// For each edge of an embedded loop, a pair of probe points that must fall
/// on opposite sides of the loop: the two incident face centers for a
/// lattice edge, or the centroids of the two half-faces for a close-packing
/// chord.
pub fn edge_side_probes(model: &LatticeModel, lp: &Path) -> Result<Vec<([f64; 2], [f64; 2])>> {
    let n = lp.sites.len();
    let mut out = Vec::with_capacity(n);
    let last = if lp.closed { n } else { n.saturating_sub(1) };
    for i in 0..last {
        let a = lp.sites[i];
        let b = lp.sites[(i + 1) % n];
        if model.adjacent(Adjacency::Lattice, a, b) {
            let d = model.dual_edge(a, b)?;
            out.push((
                model.dual_position(d.faces.0),
                model.dual_position(d.faces.1),
            ));
        } else {
            // a close-packing chord: find the face holding both sites
            let fa = model.incident_faces(a);
            let face = model
                .incident_faces(b)
                .into_iter()
                .find(|f| fa.contains(f))
                .ok_or_else(|| Error::NotAnEdge(format!("{a:?} -- {b:?} share no face")))?;
            let perim = model.face_sites(face);
            let ia = perim.iter().position(|&s| s == a).unwrap();
            let ib = perim.iter().position(|&s| s == b).unwrap();
            let (lo, hi) = (ia.min(ib), ia.max(ib));
            let chain1: Vec<Site> = perim[lo..=hi].to_vec();
            let chain2: Vec<Site> = [&perim[hi..], &perim[..=lo]].concat();
            let centroid = |chain: &[Site]| {
                let mut cx = 0.0;
                let mut cy = 0.0;
                for &s in chain {
                    let p = model.position(s);
                    cx += p[0];
                    cy += p[1];
                }
                [cx / chain.len() as f64, cy / chain.len() as f64]
            };
            out.push((centroid(&chain1), centroid(&chain2)));
        }
    }
    Ok(out)
}
