//! Hierarchical cell partitions of the lattices.
//!
//! The square lattice is cut into square blocks whose side doubles per
//! level. The triangular lattice (and, through its triangular index, the
//! hexagonal one) is cut into hexagonal seven-site cells, aggregated
//! sevenfold per level: each level-k cell is a union of seven level-(k-1)
//! cells, all congruent up to translation.

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeKind, LatticeModel, Site};
use crate::Result;

/// Identifier of one cell of the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub i64, pub i64);

/// A deterministic partition of the lattice into congruent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPartition {
    pub kind: LatticeKind,
    pub level: u32,
}

// One aggregation step on the triangular lattice: divide by lambda = 1 + 2e
// in the Eisenstein-like ring Z[e] with e = exp(i*pi/3) (the axial basis),
// rounding to the nearest lattice point. N(lambda) = 7 gives sevenfold cells.
fn tri_aggregate(q: i64, r: i64) -> (i64, i64) {
    // z * conj(lambda) = (3q + 2r) + (r - 2q) e, then divide by 7
    let num_a = 3 * q + 2 * r;
    let num_b = r - 2 * q;
    // hex rounding in cube coordinates of the fractional quotient
    let fa = num_a as f64 / 7.0;
    let fb = num_b as f64 / 7.0;
    let fc = -fa - fb;
    let (mut ra, mut rb) = (fa.round(), fb.round());
    let rc = fc.round();
    let (da, db, dc) = ((ra - fa).abs(), (rb - fb).abs(), (rc - fc).abs());
    if da > db && da > dc {
        ra = -rb - rc;
    } else if db > dc {
        rb = -ra - rc;
    }
    (ra as i64, rb as i64)
}

impl CellPartition {
    pub fn new(model: &LatticeModel, level: u32) -> Result<CellPartition> {
        Ok(CellPartition {
            kind: model.kind,
            level,
        })
    }

    /// The cell containing a site.
    pub fn cell_of(&self, s: Site) -> CellId {
        match self.kind {
            LatticeKind::Square => {
                let size = 4i64 << self.level;
                CellId(
                    (s.q as i64).div_euclid(size),
                    (s.r as i64).div_euclid(size),
                )
            }
            LatticeKind::Triangular | LatticeKind::Hexagonal => {
                // hexagonal sites share the cell of their first corner
                let (mut q, mut r) = (s.q as i64, s.r as i64);
                for _ in 0..=self.level {
                    let (a, b) = tri_aggregate(q, r);
                    q = a;
                    r = b;
                }
                CellId(q, r)
            }
        }
    }

    /// Count of lattice sites per cell (hexagonal windows hold two sites per
    /// axial cell).
    pub fn sites_per_cell(&self) -> u64 {
        let per_axial = match self.kind {
            LatticeKind::Square => {
                let size = 4u64 << self.level;
                return size * size;
            }
            LatticeKind::Triangular => 1,
            LatticeKind::Hexagonal => 2,
        };
        per_axial * 7u64.pow(self.level + 1)
    }
}

/// Smallest level whose cells strictly contain a lattice ball of radius
/// `2 * range` around their center site, per the exploration construction.
pub fn level_for_range(model: &LatticeModel, range: f64) -> u32 {
    let target = 2.0 * range;
    for level in 0.. {
        let part = CellPartition {
            kind: model.kind,
            level,
        };
        let home = part.cell_of(Site::ORIGIN);
        // radius up to which every site stays in the origin's cell
        let mut ok_radius = f64::INFINITY;
        let span = (4.0 * (target + 4.0)) as i32;
        for dq in -span..=span {
            for dr in -span..=span {
                let s = Site::new(dq, dr);
                if part.cell_of(s) != home {
                    ok_radius = ok_radius.min(model.distance(Site::ORIGIN, s));
                }
            }
        }
        if ok_radius > target {
            return level;
        }
        if level > 12 {
            break;
        }
    }
    12
}
