//! Square, triangular and hexagonal lattices with their matching (`*`)
//! adjacency and dual graphs, embedded as regular tessellations of the plane.
//!
//! Coordinates are axial integers `(q, r)` for the triangular lattice and
//! plain pairs for the square lattice. Hexagonal sites carry a sublattice
//! `parity`: the two sites per axial cell are the "up" (parity 0) and "down"
//! (parity 1) triangle faces of the underlying triangular grid. Neighbor
//! lists are returned counterclockwise starting from the +x axis, so traces
//! are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Which of the three regular tessellations the model lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Triangular,
    Hexagonal,
}

impl LatticeKind {
    pub fn degree(self) -> usize {
        match self {
            LatticeKind::Square => 4,
            LatticeKind::Triangular => 6,
            LatticeKind::Hexagonal => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "triangular",
            LatticeKind::Hexagonal => "hexagonal",
        }
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "sq" => Ok(LatticeKind::Square),
            "triangular" | "tri" => Ok(LatticeKind::Triangular),
            "hexagonal" | "hex" => Ok(LatticeKind::Hexagonal),
            other => Err(Error::Parse(format!("unknown lattice {other:?}"))),
        }
    }
}

/// Graph used for adjacency queries: the lattice itself, its matching
/// (close-packed) version, or the dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjacency {
    Lattice,
    Star,
    Dual,
}

impl Adjacency {
    /// The matching partner: `*`-objects block lattice connectivity and vice
    /// versa, so blocking paths for percolation under `Lattice` live on
    /// `Star` and the other way around.
    pub fn matching_partner(self) -> Adjacency {
        match self {
            Adjacency::Lattice => Adjacency::Star,
            Adjacency::Star => Adjacency::Lattice,
            Adjacency::Dual => Adjacency::Dual,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Adjacency::Lattice => "lattice",
            Adjacency::Star => "star",
            Adjacency::Dual => "dual",
        }
    }
}

impl std::str::FromStr for Adjacency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lattice" | "l" => Ok(Adjacency::Lattice),
            "star" | "*" => Ok(Adjacency::Star),
            "dual" | "d" => Ok(Adjacency::Dual),
            other => Err(Error::Parse(format!("unknown adjacency {other:?}"))),
        }
    }
}

/// A lattice site. `parity` is 0 except on the hexagonal lattice, where it
/// selects the sublattice.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct Site {
    pub q: i32,
    pub r: i32,
    pub parity: u8,
}

impl Site {
    pub const fn new(q: i32, r: i32) -> Site {
        Site { q, r, parity: 0 }
    }

    pub const fn hex(q: i32, r: i32, parity: u8) -> Site {
        Site { q, r, parity }
    }

    pub const ORIGIN: Site = Site::new(0, 0);

    /// Translate by a parity-0 offset (a genuine lattice translation on all
    /// three lattices).
    pub const fn offset(self, dq: i32, dr: i32) -> Site {
        Site {
            q: self.q + dq,
            r: self.r + dr,
            parity: self.parity,
        }
    }
}

/// A face of the lattice, identified with the dual site at its center.
///
/// Square faces are unit cells named by their lower-left corner. Triangular
/// faces are the up (parity 0) and down (parity 1) triangles, which are
/// exactly the hexagonal-lattice sites. Hexagonal faces are hexagons indexed
/// by the triangular sites at their centers.
pub type Face = Site;

/// An undirected lattice edge, normalized so the smaller site comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    pub a: Site,
    pub b: Site,
}

impl EdgeKey {
    pub fn new(a: Site, b: Site) -> EdgeKey {
        if a <= b {
            EdgeKey { a, b }
        } else {
            EdgeKey { a: b, b: a }
        }
    }

    pub fn other(&self, s: Site) -> Site {
        if self.a == s {
            self.b
        } else {
            self.a
        }
    }
}

/// The dual edge crossing a lattice edge: it joins the two faces incident to
/// that edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualEdge {
    /// The crossed lattice edge.
    pub crossing: EdgeKey,
    /// The two faces (dual sites) the dual edge joins.
    pub faces: (Face, Face),
}

const SQUARE_NBRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const SQUARE_STAR: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const TRI_NBRS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

// Hexagonal L-neighbors, counterclockwise from +x: up sites see their three
// down neighbors at angles 30/150/270 degrees, down sites see up neighbors
// at 90/210/330.
const HEX_UP_NBRS: [(i32, i32, u8); 3] = [(0, 0, 1), (-1, 0, 1), (0, -1, 1)];
const HEX_DOWN_NBRS: [(i32, i32, u8); 3] = [(0, 1, 0), (0, 0, 0), (1, 0, 0)];

// Hexagonal *-neighbors: close-pack the three incident hexagonal faces and
// deduplicate, giving 12 sites (checked against the face enumeration in the
// tests). Ordered counterclockwise from +x in 30-degree steps.
const HEX_UP_STAR: [(i32, i32, u8); 12] = [
    (1, 0, 0),
    (0, 0, 1),
    (0, 1, 0),
    (-1, 1, 1),
    (-1, 1, 0),
    (-1, 0, 1),
    (-1, 0, 0),
    (-1, -1, 1),
    (0, -1, 0),
    (0, -1, 1),
    (1, -1, 0),
    (1, -1, 1),
];
const HEX_DOWN_STAR: [(i32, i32, u8); 12] = [
    (1, 0, 1),
    (1, 1, 0),
    (0, 1, 1),
    (0, 1, 0),
    (-1, 1, 1),
    (-1, 1, 0),
    (-1, 0, 1),
    (0, 0, 0),
    (0, -1, 1),
    (1, -1, 0),
    (1, -1, 1),
    (1, 0, 0),
];

/// One of the three lattices together with its mesh δ (the embedding scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    pub kind: LatticeKind,
    pub mesh: f64,
}

impl LatticeModel {
    pub fn new(kind: LatticeKind, mesh: f64) -> LatticeModel {
        LatticeModel { kind, mesh }
    }

    pub fn unit(kind: LatticeKind) -> LatticeModel {
        LatticeModel { kind, mesh: 1.0 }
    }

    /// A site is valid when its parity agrees with the lattice (only the
    /// hexagonal lattice has two sublattices).
    pub fn check_site(&self, s: Site) -> Result<()> {
        let ok = match self.kind {
            LatticeKind::Hexagonal => s.parity <= 1,
            _ => s.parity == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Coordinates(format!("{s:?} on {}", self.kind.name())))
        }
    }

    /// Embedded position of a site, scaled by the mesh. Edge length is the
    /// mesh for all three lattices.
    pub fn position(&self, s: Site) -> [f64; 2] {
        let (q, r) = (s.q as f64, s.r as f64);
        let p = match self.kind {
            LatticeKind::Square => [q, r],
            LatticeKind::Triangular => [q + 0.5 * r, 0.5 * SQRT3 * r],
            LatticeKind::Hexagonal => {
                // triangle centroids of the unit triangular grid, rescaled by
                // sqrt(3) so the hexagonal edge length is 1
                let (cx, cy) = if s.parity == 0 {
                    (q + 0.5 * r + 0.5, 0.5 * SQRT3 * r + SQRT3 / 6.0)
                } else {
                    (q + 0.5 * r + 1.0, 0.5 * SQRT3 * r + SQRT3 / 3.0)
                };
                [SQRT3 * cx, SQRT3 * cy]
            }
        };
        [p[0] * self.mesh, p[1] * self.mesh]
    }

    /// Embedded position of a face center (a dual site).
    pub fn dual_position(&self, f: Face) -> [f64; 2] {
        let (a, b) = (f.q as f64, f.r as f64);
        let p = match self.kind {
            LatticeKind::Square => [a + 0.5, b + 0.5],
            LatticeKind::Triangular => {
                if f.parity == 0 {
                    [a + 0.5 * b + 0.5, 0.5 * SQRT3 * b + SQRT3 / 6.0]
                } else {
                    [a + 0.5 * b + 1.0, 0.5 * SQRT3 * b + SQRT3 / 3.0]
                }
            }
            LatticeKind::Hexagonal => [SQRT3 * (a + 0.5 * b), SQRT3 * 0.5 * SQRT3 * b],
        };
        [p[0] * self.mesh, p[1] * self.mesh]
    }

    /// L-neighbors, counterclockwise from the +x axis.
    pub fn neighbors(&self, s: Site) -> Vec<Site> {
        match self.kind {
            LatticeKind::Square => SQUARE_NBRS.iter().map(|&(dq, dr)| s.offset(dq, dr)).collect(),
            LatticeKind::Triangular => {
                TRI_NBRS.iter().map(|&(dq, dr)| s.offset(dq, dr)).collect()
            }
            LatticeKind::Hexagonal => {
                let table = if s.parity == 0 {
                    &HEX_UP_NBRS
                } else {
                    &HEX_DOWN_NBRS
                };
                table
                    .iter()
                    .map(|&(dq, dr, p)| Site::hex(s.q + dq, s.r + dr, p))
                    .collect()
            }
        }
    }

    /// Neighbors in the matching graph L* (all faces close-packed),
    /// counterclockwise from the +x axis. The triangular lattice is
    /// self-matching.
    pub fn star_neighbors(&self, s: Site) -> Vec<Site> {
        match self.kind {
            LatticeKind::Square => SQUARE_STAR.iter().map(|&(dq, dr)| s.offset(dq, dr)).collect(),
            LatticeKind::Triangular => self.neighbors(s),
            LatticeKind::Hexagonal => {
                let table = if s.parity == 0 {
                    &HEX_UP_STAR
                } else {
                    &HEX_DOWN_STAR
                };
                table
                    .iter()
                    .map(|&(dq, dr, p)| Site::hex(s.q + dq, s.r + dr, p))
                    .collect()
            }
        }
    }

    /// Neighbors of a dual site in the dual lattice.
    pub fn dual_neighbors(&self, f: Face) -> Vec<Face> {
        match self.kind {
            // square is self-dual
            LatticeKind::Square => SQUARE_NBRS.iter().map(|&(dq, dr)| f.offset(dq, dr)).collect(),
            // the dual of the triangular lattice is hexagonal
            LatticeKind::Triangular => {
                let table = if f.parity == 0 {
                    &HEX_UP_NBRS
                } else {
                    &HEX_DOWN_NBRS
                };
                table
                    .iter()
                    .map(|&(dq, dr, p)| Site::hex(f.q + dq, f.r + dr, p))
                    .collect()
            }
            // the dual of the hexagonal lattice is triangular
            LatticeKind::Hexagonal => {
                TRI_NBRS.iter().map(|&(dq, dr)| f.offset(dq, dr)).collect()
            }
        }
    }

    pub fn neighbors_under(&self, adjacency: Adjacency, s: Site) -> Vec<Site> {
        match adjacency {
            Adjacency::Lattice => self.neighbors(s),
            Adjacency::Star => self.star_neighbors(s),
            Adjacency::Dual => self.dual_neighbors(s),
        }
    }

    pub fn adjacent(&self, adjacency: Adjacency, a: Site, b: Site) -> bool {
        let (dq, dr) = (b.q - a.q, b.r - a.r);
        match (adjacency, self.kind) {
            (Adjacency::Lattice, LatticeKind::Square) => {
                SQUARE_NBRS.contains(&(dq, dr)) && a.parity == 0 && b.parity == 0
            }
            (Adjacency::Star, LatticeKind::Square) => {
                SQUARE_STAR.contains(&(dq, dr)) && a.parity == 0 && b.parity == 0
            }
            (
                Adjacency::Lattice | Adjacency::Star,
                LatticeKind::Triangular,
            )
            | (Adjacency::Dual, LatticeKind::Hexagonal) => {
                TRI_NBRS.contains(&(dq, dr)) && a.parity == 0 && b.parity == 0
            }
            (Adjacency::Lattice, LatticeKind::Hexagonal)
            | (Adjacency::Dual, LatticeKind::Triangular) => {
                let table = if a.parity == 0 {
                    &HEX_UP_NBRS
                } else {
                    &HEX_DOWN_NBRS
                };
                table.contains(&(dq, dr, b.parity))
            }
            (Adjacency::Star, LatticeKind::Hexagonal) => {
                let table = if a.parity == 0 {
                    &HEX_UP_STAR
                } else {
                    &HEX_DOWN_STAR
                };
                table.contains(&(dq, dr, b.parity))
            }
            (Adjacency::Dual, LatticeKind::Square) => {
                SQUARE_NBRS.contains(&(dq, dr)) && a.parity == 0 && b.parity == 0
            }
        }
    }

    /// The sites on the perimeter of a face, counterclockwise.
    pub fn face_sites(&self, f: Face) -> Vec<Site> {
        match self.kind {
            LatticeKind::Square => vec![
                Site::new(f.q, f.r),
                Site::new(f.q + 1, f.r),
                Site::new(f.q + 1, f.r + 1),
                Site::new(f.q, f.r + 1),
            ],
            LatticeKind::Triangular => {
                if f.parity == 0 {
                    vec![
                        Site::new(f.q, f.r),
                        Site::new(f.q + 1, f.r),
                        Site::new(f.q, f.r + 1),
                    ]
                } else {
                    vec![
                        Site::new(f.q + 1, f.r),
                        Site::new(f.q + 1, f.r + 1),
                        Site::new(f.q, f.r + 1),
                    ]
                }
            }
            LatticeKind::Hexagonal => {
                // six triangles around the triangular site f, counterclockwise
                vec![
                    Site::hex(f.q, f.r, 0),
                    Site::hex(f.q - 1, f.r, 1),
                    Site::hex(f.q - 1, f.r, 0),
                    Site::hex(f.q - 1, f.r - 1, 1),
                    Site::hex(f.q, f.r - 1, 0),
                    Site::hex(f.q, f.r - 1, 1),
                ]
            }
        }
    }

    /// Faces incident to a site.
    pub fn incident_faces(&self, s: Site) -> Vec<Face> {
        match self.kind {
            LatticeKind::Square => vec![
                Site::new(s.q, s.r),
                Site::new(s.q - 1, s.r),
                Site::new(s.q - 1, s.r - 1),
                Site::new(s.q, s.r - 1),
            ],
            LatticeKind::Triangular => vec![
                Site::hex(s.q, s.r, 0),
                Site::hex(s.q - 1, s.r, 0),
                Site::hex(s.q, s.r - 1, 0),
                Site::hex(s.q - 1, s.r, 1),
                Site::hex(s.q, s.r - 1, 1),
                Site::hex(s.q - 1, s.r - 1, 1),
            ],
            LatticeKind::Hexagonal => {
                if s.parity == 0 {
                    vec![
                        Site::new(s.q, s.r),
                        Site::new(s.q + 1, s.r),
                        Site::new(s.q, s.r + 1),
                    ]
                } else {
                    vec![
                        Site::new(s.q + 1, s.r),
                        Site::new(s.q, s.r + 1),
                        Site::new(s.q + 1, s.r + 1),
                    ]
                }
            }
        }
    }

    /// The unique dual edge crossing the lattice edge `(a, b)`.
    pub fn dual_edge(&self, a: Site, b: Site) -> Result<DualEdge> {
        self.check_site(a)?;
        self.check_site(b)?;
        if !self.adjacent(Adjacency::Lattice, a, b) {
            return Err(Error::NotAnEdge(format!("{a:?} -- {b:?}")));
        }
        let fa = self.incident_faces(a);
        let shared: Vec<Face> = self
            .incident_faces(b)
            .into_iter()
            .filter(|f| fa.contains(f))
            .collect();
        debug_assert_eq!(shared.len(), 2, "a lattice edge has exactly two faces");
        Ok(DualEdge {
            crossing: EdgeKey::new(a, b),
            faces: (shared[0], shared[1]),
        })
    }

    /// Euclidean distance between two sites in the embedding.
    pub fn distance(&self, a: Site, b: Site) -> f64 {
        let pa = self.position(a);
        let pb = self.position(b);
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    /// All sites within Euclidean distance `radius` of `center` (the set
    /// B(r) of the enhancement machinery). Deterministic order: by squared
    /// norm, then angle counterclockwise from +x, then coordinates.
    pub fn ball(&self, center: Site, radius: f64) -> Vec<Site> {
        let span = (radius / self.mesh * 1.5).ceil() as i32 + 2;
        let mut out = Vec::new();
        let c = self.position(center);
        for dr in -span..=span {
            for dq in -span..=span {
                for parity in 0..if self.kind == LatticeKind::Hexagonal { 2 } else { 1 } {
                    let s = Site {
                        q: center.q + dq,
                        r: center.r + dr,
                        parity,
                    };
                    let p = self.position(s);
                    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                    if d2 <= radius * radius + 1e-9 {
                        out.push((d2, f64::atan2(p[1] - c[1], p[0] - c[0]), s));
                    }
                }
            }
        }
        out.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap()
                .then(x.1.partial_cmp(&y.1).unwrap())
                .then(x.2.cmp(&y.2))
        });
        out.into_iter().map(|t| t.2).collect()
    }
}

/// Boundary policy of a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// No assumption; out-of-window sites resolve as closed where a value is
    /// forced (enhancement balls), and results near the frame carry no
    /// guarantee.
    Free,
    /// Everything outside the window is closed.
    ClosedExterior,
    /// Everything outside the window is open.
    OpenExterior,
    /// Coordinates wrap around.
    Torus,
}

/// A finite axial-coordinate rectangle of sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub q0: i32,
    pub r0: i32,
    pub width: i32,
    pub height: i32,
    pub boundary: Boundary,
}

/// How a queried site resolves against a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolved {
    /// In the window, at this linear index.
    In(usize),
    /// Outside; the policy forces this state.
    Forced(bool),
}

impl Window {
    pub fn new(q0: i32, r0: i32, width: i32, height: i32, boundary: Boundary) -> Window {
        Window {
            q0,
            r0,
            width,
            height,
            boundary,
        }
    }

    /// A window centered on the origin: coordinates in [-half, half].
    pub fn centered(half: i32, boundary: Boundary) -> Window {
        Window::new(-half, -half, 2 * half + 1, 2 * half + 1, boundary)
    }

    pub fn contains(&self, s: Site) -> bool {
        s.q >= self.q0
            && s.q < self.q0 + self.width
            && s.r >= self.r0
            && s.r < self.r0 + self.height
    }

    /// Number of sites (hexagonal windows hold two sites per axial cell).
    pub fn len(&self, kind: LatticeKind) -> usize {
        let cells = (self.width as usize) * (self.height as usize);
        match kind {
            LatticeKind::Hexagonal => 2 * cells,
            _ => cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width <= 0 || self.height <= 0
    }

    #[inline]
    pub fn index(&self, kind: LatticeKind, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let base = (s.r - self.r0) as usize * self.width as usize + (s.q - self.q0) as usize;
        Some(match kind {
            LatticeKind::Hexagonal => 2 * base + s.parity as usize,
            _ => base,
        })
    }

    pub fn site_at(&self, kind: LatticeKind, index: usize) -> Site {
        match kind {
            LatticeKind::Hexagonal => {
                let cell = index / 2;
                Site::hex(
                    self.q0 + (cell % self.width as usize) as i32,
                    self.r0 + (cell / self.width as usize) as i32,
                    (index % 2) as u8,
                )
            }
            _ => Site::new(
                self.q0 + (index % self.width as usize) as i32,
                self.r0 + (index / self.width as usize) as i32,
            ),
        }
    }

    /// Wrap a site onto the window torus-style.
    pub fn wrap(&self, s: Site) -> Site {
        Site {
            q: self.q0 + (s.q - self.q0).rem_euclid(self.width),
            r: self.r0 + (s.r - self.r0).rem_euclid(self.height),
            parity: s.parity,
        }
    }

    /// Resolve a query per the boundary policy.
    pub fn resolve(&self, kind: LatticeKind, s: Site) -> Resolved {
        if let Some(i) = self.index(kind, s) {
            return Resolved::In(i);
        }
        match self.boundary {
            Boundary::Torus => {
                let w = self.wrap(s);
                Resolved::In(self.index(kind, w).expect("wrapped site is in window"))
            }
            Boundary::OpenExterior => Resolved::Forced(true),
            Boundary::Free | Boundary::ClosedExterior => Resolved::Forced(false),
        }
    }

    pub fn sites(&self, kind: LatticeKind) -> impl Iterator<Item = Site> + '_ {
        let n = self.len(kind);
        (0..n).map(move |i| self.site_at(kind, i))
    }

    /// True when the site lies on the outermost ring of the window.
    pub fn on_frame(&self, s: Site) -> bool {
        self.contains(s)
            && (s.q == self.q0
                || s.q == self.q0 + self.width - 1
                || s.r == self.r0
                || s.r == self.r0 + self.height - 1)
    }

    /// Shrink the window by a margin on every side (policy preserved).
    pub fn shrunk(&self, margin: i32) -> Window {
        Window::new(
            self.q0 + margin,
            self.r0 + margin,
            self.width - 2 * margin,
            self.height - 2 * margin,
            self.boundary,
        )
    }
}

/// An ordered walk of sites under a declared adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub sites: Vec<Site>,
    pub adjacency: Adjacency,
    pub closed: bool,
}

impl Path {
    pub fn open(sites: Vec<Site>, adjacency: Adjacency) -> Path {
        Path {
            sites,
            adjacency,
            closed: false,
        }
    }

    pub fn loop_of(sites: Vec<Site>, adjacency: Adjacency) -> Path {
        Path {
            sites,
            adjacency,
            closed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Consecutive sites are adjacent under the declared adjacency (and the
    /// ends meet for a loop).
    pub fn is_valid(&self, model: &LatticeModel) -> bool {
        let n = self.sites.len();
        for i in 1..n {
            if !model.adjacent(self.adjacency, self.sites[i - 1], self.sites[i]) {
                return false;
            }
        }
        if self.closed && n > 1 {
            return model.adjacent(self.adjacency, self.sites[n - 1], self.sites[0]);
        }
        true
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.sites.len());
        self.sites.iter().all(|s| seen.insert(*s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> [LatticeModel; 3] {
        [
            LatticeModel::unit(LatticeKind::Square),
            LatticeModel::unit(LatticeKind::Triangular),
            LatticeModel::unit(LatticeKind::Hexagonal),
        ]
    }

    fn some_sites(kind: LatticeKind) -> Vec<Site> {
        let mut v = Vec::new();
        for q in -3..=3 {
            for r in -3..=3 {
                v.push(Site::new(q, r));
                if kind == LatticeKind::Hexagonal {
                    v.push(Site::hex(q, r, 1));
                }
            }
        }
        v
    }

    #[test]
    fn degrees_match_lattice() {
        for m in models() {
            for s in some_sites(m.kind) {
                assert_eq!(m.neighbors(s).len(), m.kind.degree());
            }
        }
        assert_eq!(
            LatticeModel::unit(LatticeKind::Triangular)
                .neighbors(Site::ORIGIN)
                .len(),
            6
        );
        assert_eq!(
            LatticeModel::unit(LatticeKind::Square)
                .neighbors(Site::ORIGIN)
                .len(),
            4
        );
        assert_eq!(
            LatticeModel::unit(LatticeKind::Hexagonal)
                .neighbors(Site::ORIGIN)
                .len(),
            3
        );
    }

    #[test]
    fn neighbor_order_is_ccw_from_positive_x() {
        for m in models() {
            for s in [Site::ORIGIN, Site::hex(1, -2, if m.kind == LatticeKind::Hexagonal { 1 } else { 0 })] {
                let c = m.position(s);
                let angles: Vec<f64> = m
                    .neighbors(s)
                    .iter()
                    .map(|&n| {
                        let p = m.position(n);
                        let a = f64::atan2(p[1] - c[1], p[0] - c[0]);
                        if a < -1e-12 {
                            a + std::f64::consts::TAU
                        } else {
                            a
                        }
                    })
                    .collect();
                for w in angles.windows(2) {
                    assert!(w[0] < w[1] + 1e-12, "angles not increasing: {angles:?}");
                }
            }
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        for m in models() {
            for s in some_sites(m.kind) {
                for n in m.neighbors(s) {
                    assert!(m.neighbors(n).contains(&s), "{s:?} <-> {n:?}");
                }
                for n in m.star_neighbors(s) {
                    assert!(m.star_neighbors(n).contains(&s), "star {s:?} <-> {n:?}");
                }
            }
        }
    }

    #[test]
    fn triangular_is_self_matching() {
        let m = LatticeModel::unit(LatticeKind::Triangular);
        for s in some_sites(m.kind) {
            assert_eq!(m.neighbors(s), m.star_neighbors(s));
        }
    }

    #[test]
    fn square_star_has_eight_sites() {
        let m = LatticeModel::unit(LatticeKind::Square);
        assert_eq!(m.star_neighbors(Site::ORIGIN).len(), 8);
    }

    // Oracle for the 12-site hexagonal star: enumerate the three incident
    // hexagonal faces, close-pack each, deduplicate.
    #[test]
    fn hex_star_matches_face_enumeration() {
        let m = LatticeModel::unit(LatticeKind::Hexagonal);
        for s in some_sites(m.kind) {
            let mut expected: Vec<Site> = m
                .incident_faces(s)
                .into_iter()
                .flat_map(|f| m.face_sites(f))
                .filter(|&x| x != s)
                .collect();
            expected.sort();
            expected.dedup();
            let mut got = m.star_neighbors(s);
            assert_eq!(got.len(), 12, "hex star degree at {s:?}");
            got.sort();
            assert_eq!(got, expected, "at {s:?}");
        }
    }

    #[test]
    fn star_neighbor_distances_are_bounded_by_face_diameter() {
        // every *-neighbor shares a face, so it is within the face diameter
        for m in models() {
            let diam = match m.kind {
                LatticeKind::Square => 2.0f64.sqrt(),
                LatticeKind::Triangular => 1.0,
                LatticeKind::Hexagonal => 2.0,
            };
            for n in m.star_neighbors(Site::ORIGIN) {
                assert!(m.distance(Site::ORIGIN, n) <= diam + 1e-9);
            }
        }
    }

    #[test]
    fn face_sites_are_ccw_and_unit_edged() {
        for m in models() {
            let faces = [Site::new(0, 0), Site::hex(1, -1, 1)];
            for f in faces {
                if m.kind != LatticeKind::Triangular && f.parity == 1 {
                    continue;
                }
                let vs = m.face_sites(f);
                let ps: Vec<[f64; 2]> = vs.iter().map(|&s| m.position(s)).collect();
                // shoelace area positive => counterclockwise
                let mut area = 0.0;
                for i in 0..ps.len() {
                    let j = (i + 1) % ps.len();
                    area += ps[i][0] * ps[j][1] - ps[j][0] * ps[i][1];
                }
                assert!(area > 0.0, "face {f:?} not CCW on {:?}", m.kind);
                for i in 0..vs.len() {
                    let j = (i + 1) % vs.len();
                    assert!(
                        (m.distance(vs[i], vs[j]) - 1.0).abs() < 1e-9,
                        "perimeter edge not unit length"
                    );
                }
            }
        }
    }

    #[test]
    fn incident_faces_contain_the_site() {
        for m in models() {
            for s in some_sites(m.kind) {
                for f in m.incident_faces(s) {
                    assert!(m.face_sites(f).contains(&s), "{s:?} not on face {f:?}");
                }
            }
        }
    }

    #[test]
    fn dual_edge_examples() {
        // triangular edge (o, e1): its dual is a hexagonal edge between the
        // two triangles on either side
        let tri = LatticeModel::unit(LatticeKind::Triangular);
        let d = tri.dual_edge(Site::ORIGIN, Site::new(1, 0)).unwrap();
        let mut fs = [d.faces.0, d.faces.1];
        fs.sort();
        assert_eq!(fs, [Site::hex(0, -1, 1), Site::hex(0, 0, 0)]);
        assert!(tri.adjacent(Adjacency::Dual, fs[0], fs[1]));

        // square edge: unique perpendicular dual edge through its midpoint
        let sq = LatticeModel::unit(LatticeKind::Square);
        let d = sq.dual_edge(Site::ORIGIN, Site::new(1, 0)).unwrap();
        let mid = [0.5, 0.0];
        let p0 = sq.dual_position(d.faces.0);
        let p1 = sq.dual_position(d.faces.1);
        assert!((0.5 * (p0[0] + p1[0]) - mid[0]).abs() < 1e-12);
        assert!((0.5 * (p0[1] + p1[1]) - mid[1]).abs() < 1e-12);

        // non-edge input is rejected
        assert!(sq.dual_edge(Site::ORIGIN, Site::new(1, 1)).is_err());
    }

    // Oracle: on a 10x10 window the map edge -> dual edge is a bijection.
    #[test]
    fn dual_edges_biject_with_edges() {
        for m in models() {
            let w = Window::new(0, 0, 10, 10, Boundary::Free);
            let mut seen = std::collections::HashSet::new();
            let mut count = 0usize;
            for s in w.sites(m.kind) {
                for n in m.neighbors(s) {
                    if w.contains(n) && s < n {
                        let d = m.dual_edge(s, n).unwrap();
                        let mut key = [d.faces.0, d.faces.1];
                        key.sort();
                        assert!(seen.insert(key), "dual edge reused for {s:?}-{n:?}");
                        count += 1;
                    }
                }
            }
            assert!(count > 100, "enough edges checked on {:?}", m.kind);
        }
    }

    #[test]
    fn dual_faces_are_dual_adjacent() {
        for m in models() {
            for s in some_sites(m.kind) {
                for n in m.neighbors(s) {
                    let d = m.dual_edge(s, n).unwrap();
                    assert!(
                        m.adjacent(Adjacency::Dual, d.faces.0, d.faces.1),
                        "{:?}: dual edge faces not adjacent",
                        m.kind
                    );
                }
            }
        }
    }

    #[test]
    fn window_indexing_roundtrips() {
        for kind in [
            LatticeKind::Square,
            LatticeKind::Triangular,
            LatticeKind::Hexagonal,
        ] {
            let w = Window::new(-4, -7, 9, 13, Boundary::Free);
            for i in 0..w.len(kind) {
                let s = w.site_at(kind, i);
                assert_eq!(w.index(kind, s), Some(i));
            }
            assert_eq!(w.index(kind, Site::new(100, 0)), None);
        }
    }

    #[test]
    fn torus_wrap_resolves_in_window() {
        let w = Window::new(0, 0, 8, 8, Boundary::Torus);
        match w.resolve(LatticeKind::Square, Site::new(9, -1)) {
            Resolved::In(i) => assert_eq!(w.site_at(LatticeKind::Square, i), Site::new(1, 7)),
            _ => panic!("torus must wrap"),
        }
    }

    #[test]
    fn ball_radius_one_is_closed_neighborhood() {
        for m in models() {
            let b = m.ball(Site::ORIGIN, 1.0);
            let mut expected = vec![Site::ORIGIN];
            expected.extend(m.neighbors(Site::ORIGIN));
            assert_eq!(b.len(), expected.len(), "{:?}", m.kind);
            for s in expected {
                assert!(b.contains(&s));
            }
            assert_eq!(b[0], Site::ORIGIN, "ball ordered from the center out");
        }
    }
}
