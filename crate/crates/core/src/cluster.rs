//! Cluster analysis and the coupled observables of the percolation process:
//! finite-size percolation probability θ_L, the two-point function τ, the
//! correlation length ξ, the mean cluster size χ, and rectangle crossings
//! compared against Cardy's function.
//!
//! All estimators sample η and the enhanced ω̂ from one coupled replica (the
//! same uniform field and activation field), so for a monotone rule the
//! inequalities θ/τ/χ(plain) ≤ θ/τ/χ(enhanced) hold realization by
//! realization, not just in the mean. Replicas are independent seeds;
//! aggregation is in replica order and deterministic.

use serde::{Deserialize, Serialize};

use crate::enhance::{apply_enhancement, full_enhancement, EnhancementRule};
use crate::fields::{sample_activation, sample_site_field, SiteField};
use crate::lattice::{Adjacency, LatticeKind, LatticeModel, Site, Window};
use crate::rng::{Stream, StreamKey};
use crate::runtime::replicate;
use crate::stats::{weighted_line_fit, Estimate};
use crate::{Error, Result};

/// Union-find labels of the open sites of a field under the chosen
/// adjacency. Labels are dense, assigned in first-touch window order, so
/// they are deterministic; closed sites get `u32::MAX`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub adjacency: Adjacency,
    pub labels: Vec<u32>,
    pub sizes: Vec<u32>,
    pub touches_frame: Vec<bool>,
}

pub const CLOSED: u32 = u32::MAX;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // root at the smaller index keeps labels deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Label the open clusters of a field under L- or *-adjacency.
pub fn label(field: &SiteField, adjacency: Adjacency) -> ClusterLabels {
    let kind = field.model.kind;
    let window = field.window;
    let n = field.bits.len();
    let mut uf = UnionFind::new(n);
    for idx in 0..n {
        if field.bits[idx] == 0 {
            continue;
        }
        let s = window.site_at(kind, idx);
        for nb in field.model.neighbors_under(adjacency, s) {
            if let crate::lattice::Resolved::In(j) = window.resolve(kind, nb) {
                if j < idx && field.bits[j] != 0 {
                    uf.union(idx as u32, j as u32);
                }
            }
        }
    }
    let mut labels = vec![CLOSED; n];
    let mut remap: std::collections::HashMap<u32, u32> = Default::default();
    let mut sizes: Vec<u32> = Vec::new();
    let mut touches: Vec<bool> = Vec::new();
    for idx in 0..n {
        if field.bits[idx] == 0 {
            continue;
        }
        let root = uf.find(idx as u32);
        let id = *remap.entry(root).or_insert_with(|| {
            sizes.push(0);
            touches.push(false);
            (sizes.len() - 1) as u32
        });
        labels[idx] = id;
        sizes[id as usize] += 1;
        if window.on_frame(window.site_at(kind, idx)) {
            touches[id as usize] = true;
        }
    }
    ClusterLabels {
        adjacency,
        labels,
        sizes,
        touches_frame: touches,
    }
}

/// Flood fill from `from` over open sites of `field` restricted to `inner`,
/// under `graph` adjacency. Returns (cluster size, reached inner frame,
/// which targets were reached).
fn origin_cluster_scan(
    field: &SiteField,
    graph: Adjacency,
    inner: &Window,
    from: Site,
    targets: &[Site],
) -> (u64, bool, Vec<bool>) {
    let kind = field.model.kind;
    let mut hit = vec![false; targets.len()];
    if !field.open(from) || inner.index(kind, from).is_none() {
        return (0, false, hit);
    }
    let n = inner.len(kind);
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[inner.index(kind, from).unwrap()] = true;
    let mut size = 0u64;
    let mut frame = false;
    while let Some(s) = stack.pop() {
        size += 1;
        if inner.on_frame(s) {
            frame = true;
        }
        for (t, target) in targets.iter().enumerate() {
            if s == *target {
                hit[t] = true;
            }
        }
        for nb in field.model.neighbors_under(graph, s) {
            if let Some(j) = inner.index(kind, nb) {
                if !seen[j] && field.open(nb) {
                    seen[j] = true;
                    stack.push(nb);
                }
            }
        }
    }
    (size, frame, hit)
}

/// One coupled replica: η and ω̂ on the same probability space.
pub fn coupled_sample(
    model: LatticeModel,
    window: Window,
    p: f64,
    s: f64,
    rule: Option<&EnhancementRule>,
    seed: u64,
) -> Result<(SiteField, SiteField)> {
    let eta = sample_site_field(model, window, p, seed);
    let hat = match rule {
        None => eta.clone(),
        Some(_) if s == 0.0 => eta.clone(),
        Some(rule) if s >= 1.0 => full_enhancement(&eta, rule)?,
        Some(rule) => {
            let alpha = sample_activation(model, window, s, seed);
            apply_enhancement(&eta, &alpha, rule)?
        }
    };
    Ok((eta, hat))
}

/// Replica factory for one (model, window, p, s, rule) cell. Neighbor lists
/// are precomputed once, and m-of-neighbors rules take the fast counting
/// path (identical output to the generic application).
pub struct CoupledSampler<'r> {
    model: LatticeModel,
    window: Window,
    p: f64,
    s: f64,
    rule: Option<&'r EnhancementRule>,
    fast_m: Option<(u32, crate::enhance::NeighborIndex)>,
}

impl<'r> CoupledSampler<'r> {
    pub fn new(
        model: LatticeModel,
        window: Window,
        p: f64,
        s: f64,
        rule: Option<&'r EnhancementRule>,
    ) -> CoupledSampler<'r> {
        let fast_m = match rule.map(|r| &r.kind) {
            Some(&crate::enhance::RuleKind::MOfNeighbors { m }) if s > 0.0 => {
                Some((m, crate::enhance::neighbor_index(&model, &window)))
            }
            _ => None,
        };
        CoupledSampler {
            model,
            window,
            p,
            s,
            rule,
            fast_m,
        }
    }

    pub fn sample(&self, seed: u64) -> Result<(SiteField, SiteField)> {
        if let Some((m, nbr)) = &self.fast_m {
            let eta = sample_site_field(self.model, self.window, self.p, seed);
            let hat = if self.s >= 1.0 {
                crate::enhance::apply_m_rule_fast(&eta, None, *m, nbr)
            } else {
                let alpha = sample_activation(self.model, self.window, self.s, seed);
                crate::enhance::apply_m_rule_fast(&eta, Some(&alpha.bits), *m, nbr)
            };
            Ok((eta, hat))
        } else {
            coupled_sample(self.model, self.window, self.p, self.s, self.rule, seed)
        }
    }
}

/// Paired plain/enhanced estimates from coupled replicas, with the count of
/// per-sample coupling violations (must be zero for monotone rules).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedEstimate {
    pub plain: Estimate,
    pub enhanced: Estimate,
    /// Mean and SE of the per-replica difference (enhanced - plain).
    pub diff: Estimate,
    pub violations: u64,
}

fn paired_from_indicators(pairs: &[(bool, bool)]) -> PairedEstimate {
    let n = pairs.len() as u64;
    let plain = pairs.iter().filter(|(p, _)| *p).count() as u64;
    let enh = pairs.iter().filter(|(_, e)| *e).count() as u64;
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|&(p, e)| (e as i64 - p as i64) as f64)
        .collect();
    let violations = pairs.iter().filter(|&&(p, e)| p && !e).count() as u64;
    PairedEstimate {
        plain: Estimate::from_indicator(plain, n),
        enhanced: Estimate::from_indicator(enh, n),
        diff: Estimate::from_samples(&diffs),
        violations,
    }
}

fn margin_for(rule: Option<&EnhancementRule>) -> i32 {
    rule.map(|r| (2.0 * r.radius).ceil() as i32).unwrap_or(0)
}

/// Finite-size percolation probability θ_L: the frequency that the origin's
/// cluster touches the boundary of the L-window, plain and enhanced. The
/// sampling window carries a discarded margin of width 2R₀ so enhanced
/// statistics are free of truncation bias.
#[allow(clippy::too_many_arguments)]
pub fn estimate_theta(
    model: LatticeModel,
    p: f64,
    s: f64,
    rule: Option<&EnhancementRule>,
    graph: Adjacency,
    half_l: i32,
    n_samples: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    if half_l < 4 {
        return Err(Error::Contract("window must be at least 8 wide".into()));
    }
    let margin = margin_for(rule);
    let window = Window::centered(half_l + margin, crate::lattice::Boundary::Free);
    let inner = window.shrunk(margin);
    let sampler = CoupledSampler::new(model, window, p, s, rule);
    let results: Vec<Result<(bool, bool)>> = replicate(n_samples, |i| {
        let rseed = StreamKey::new(seed, Stream::Aux(1)).index_u64(i as u64);
        let (eta, hat) = sampler.sample(rseed)?;
        let (_, plain, _) = origin_cluster_scan(&eta, graph, &inner, Site::ORIGIN, &[]);
        let (_, enh, _) = origin_cluster_scan(&hat, graph, &inner, Site::ORIGIN, &[]);
        Ok((plain, enh))
    });
    let pairs: Vec<(bool, bool)> = results.into_iter().collect::<Result<_>>()?;
    Ok(paired_from_indicators(&pairs))
}

/// Two-point function τ(x) for a list of displacements, plain and enhanced.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tau(
    model: LatticeModel,
    p: f64,
    s: f64,
    rule: Option<&EnhancementRule>,
    graph: Adjacency,
    displacements: &[Site],
    half_l: i32,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(Site, PairedEstimate)>> {
    let margin = margin_for(rule);
    let window = Window::centered(half_l + margin, crate::lattice::Boundary::Free);
    let inner = window.shrunk(margin);
    for d in displacements {
        if inner.index(model.kind, *d).is_none() {
            return Err(Error::Contract(format!(
                "displacement {d:?} outside the inner window"
            )));
        }
    }
    let sampler = CoupledSampler::new(model, window, p, s, rule);
    let results: Vec<Result<(Vec<bool>, Vec<bool>)>> = replicate(n_samples, |i| {
        let rseed = StreamKey::new(seed, Stream::Aux(2)).index_u64(i as u64);
        let (eta, hat) = sampler.sample(rseed)?;
        let (_, _, plain) = origin_cluster_scan(&eta, graph, &inner, Site::ORIGIN, displacements);
        let (_, _, enh) = origin_cluster_scan(&hat, graph, &inner, Site::ORIGIN, displacements);
        Ok((plain, enh))
    });
    let per_sample: Vec<(Vec<bool>, Vec<bool>)> = results.into_iter().collect::<Result<_>>()?;
    Ok(displacements
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let pairs: Vec<(bool, bool)> = per_sample.iter().map(|(p, e)| (p[k], e[k])).collect();
            (d, paired_from_indicators(&pairs))
        })
        .collect())
}

/// Mean cluster size χ: the expected size of the origin's open cluster
/// (zero when the origin is closed), plain and enhanced.
#[allow(clippy::too_many_arguments)]
pub fn estimate_chi(
    model: LatticeModel,
    p: f64,
    s: f64,
    rule: Option<&EnhancementRule>,
    graph: Adjacency,
    half_l: i32,
    n_samples: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    let margin = margin_for(rule);
    let window = Window::centered(half_l + margin, crate::lattice::Boundary::Free);
    let inner = window.shrunk(margin);
    let sampler = CoupledSampler::new(model, window, p, s, rule);
    let results: Vec<Result<(u64, u64)>> = replicate(n_samples, |i| {
        let rseed = StreamKey::new(seed, Stream::Aux(3)).index_u64(i as u64);
        let (eta, hat) = sampler.sample(rseed)?;
        let (plain, _, _) = origin_cluster_scan(&eta, graph, &inner, Site::ORIGIN, &[]);
        let (enh, _, _) = origin_cluster_scan(&hat, graph, &inner, Site::ORIGIN, &[]);
        Ok((plain, enh))
    });
    let sizes: Vec<(u64, u64)> = results.into_iter().collect::<Result<_>>()?;
    let plain: Vec<f64> = sizes.iter().map(|&(p, _)| p as f64).collect();
    let enh: Vec<f64> = sizes.iter().map(|&(_, e)| e as f64).collect();
    let diffs: Vec<f64> = sizes.iter().map(|&(p, e)| e as f64 - p as f64).collect();
    let violations = sizes.iter().filter(|&&(p, e)| e < p).count() as u64;
    Ok(PairedEstimate {
        plain: Estimate::from_samples(&plain),
        enhanced: Estimate::from_samples(&enh),
        diff: Estimate::from_samples(&diffs),
        violations,
    })
}

/// Correlation-length fit from τ estimates: weighted least squares of
/// log τ against |x|; ξ is minus the reciprocal slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiFit {
    pub xi: f64,
    pub se: f64,
    pub points: usize,
}

/// `curve` holds (|x|, τ̂, SE(τ̂)); points with τ̂ = 0 are dropped, and at
/// least four must survive.
pub fn fit_xi(curve: &[(f64, f64, f64)]) -> Result<XiFit> {
    let pts: Vec<(f64, f64, f64)> = curve
        .iter()
        .filter(|&&(_, tau, _)| tau > 0.0)
        .map(|&(x, tau, se)| (x, tau.ln(), (se / tau).max(1e-12)))
        .collect();
    if pts.len() < 4 {
        return Err(Error::UndefinedFit(format!(
            "need at least 4 positive τ points, got {}",
            pts.len()
        )));
    }
    let fit = weighted_line_fit(&pts)?;
    if fit.slope >= 0.0 {
        return Err(Error::UndefinedFit("τ does not decay".into()));
    }
    Ok(XiFit {
        xi: -1.0 / fit.slope,
        se: fit.slope_se / fit.slope.powi(2),
        points: pts.len(),
    })
}

/// Rectangle crossing specification: R(b, h) centered at the origin, on a
/// lattice of mesh δ; crossings are vertical (top to bottom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSpec {
    pub b: f64,
    pub h: f64,
    pub mesh: f64,
}

impl CrossingSpec {
    pub fn rho(&self) -> f64 {
        self.b / self.h
    }

    /// A window in lattice coordinates that covers the rectangle plus the
    /// ring of sites whose end segments may touch the sides.
    pub fn window(&self, kind: LatticeKind, extra_margin: i32) -> Window {
        let halfw = self.b / 2.0 / self.mesh;
        let halfh = self.h / 2.0 / self.mesh;
        let (qspan, rspan) = match kind {
            LatticeKind::Square => (halfw.ceil() as i32 + 2, halfh.ceil() as i32 + 2),
            // x = q + r/2, y = r*sqrt(3)/2
            LatticeKind::Triangular => {
                let rs = (halfh / (crate::lattice::SQRT3 / 2.0)).ceil() as i32 + 2;
                (halfw.ceil() as i32 + rs / 2 + 3, rs)
            }
            // x ~ sqrt(3)*(q + r/2), y ~ 1.5*r
            LatticeKind::Hexagonal => {
                let rs = (halfh / 1.5).ceil() as i32 + 2;
                (
                    (halfw / crate::lattice::SQRT3).ceil() as i32 + rs / 2 + 3,
                    rs,
                )
            }
        };
        Window::new(
            -(qspan + extra_margin),
            -(rspan + extra_margin),
            2 * (qspan + extra_margin) + 1,
            2 * (rspan + extra_margin) + 1,
            crate::lattice::Boundary::Free,
        )
    }
}

/// Field-independent geometry of one crossing problem: interior sites, the
/// interior adjacency, and the (site, neighbor) pairs whose segment touches
/// the top or bottom side. Precomputing it once makes the per-sample test a
/// pure bit scan.
pub struct CrossingGeometry {
    n: usize,
    interior: Vec<bool>,
    adj_offsets: Vec<u32>,
    adj_targets: Vec<u32>,
    /// (interior site, in-window open-required neighbor) whose segment
    /// touches the side; `u32::MAX` as neighbor means the policy forces the
    /// out-of-window endpoint open.
    top_pairs: Vec<(u32, u32)>,
    bottom_pairs: Vec<(u32, u32)>,
}

impl CrossingGeometry {
    pub fn new(model: &LatticeModel, window: Window, spec: &CrossingSpec) -> Result<Self> {
        if (model.mesh - spec.mesh).abs() > 1e-12 {
            return Err(Error::WindowMismatch(format!(
                "field mesh {} vs crossing mesh {}",
                model.mesh, spec.mesh
            )));
        }
        if window.boundary == crate::lattice::Boundary::Torus {
            return Err(Error::Unsupported(
                "crossings are not defined on torus windows".into(),
            ));
        }
        let kind = model.kind;
        let needed = spec.window(kind, 0);
        if !window.contains(Site::new(needed.q0, needed.r0))
            || !window.contains(Site::new(
                needed.q0 + needed.width - 1,
                needed.r0 + needed.height - 1,
            ))
        {
            return Err(Error::WindowMismatch(
                "field window does not cover the crossing rectangle".into(),
            ));
        }

        let (hb, hh) = (spec.b / 2.0, spec.h / 2.0);
        let inside = |p: [f64; 2]| p[0] > -hb && p[0] < hb && p[1] > -hh && p[1] < hh;
        let touches = |p1: [f64; 2], p0: [f64; 2], top: bool| -> bool {
            let y = if top { hh } else { -hh };
            if (top && p0[1] < y) || (!top && p0[1] > y) {
                return false;
            }
            if (p0[1] - p1[1]).abs() < 1e-300 {
                return false;
            }
            let t = (y - p1[1]) / (p0[1] - p1[1]);
            if !(0.0..=1.0).contains(&t) {
                return false;
            }
            let x = p1[0] + t * (p0[0] - p1[0]);
            (-hb..=hb).contains(&x)
        };

        let n = window.len(kind);
        let mut interior = vec![false; n];
        for idx in 0..n {
            interior[idx] = inside(model.position(window.site_at(kind, idx)));
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        let mut adj_targets = Vec::new();
        let mut top_pairs = Vec::new();
        let mut bottom_pairs = Vec::new();
        adj_offsets.push(0u32);
        for idx in 0..n {
            if interior[idx] {
                let s = window.site_at(kind, idx);
                let p1 = model.position(s);
                for nb in model.neighbors(s) {
                    match window.resolve(kind, nb) {
                        crate::lattice::Resolved::In(j) => {
                            if interior[j] {
                                adj_targets.push(j as u32);
                            }
                            let p0 = model.position(nb);
                            if touches(p1, p0, true) {
                                top_pairs.push((idx as u32, j as u32));
                            }
                            if touches(p1, p0, false) {
                                bottom_pairs.push((idx as u32, j as u32));
                            }
                        }
                        crate::lattice::Resolved::Forced(open) => {
                            if open {
                                let p0 = model.position(nb);
                                if touches(p1, p0, true) {
                                    top_pairs.push((idx as u32, u32::MAX));
                                }
                                if touches(p1, p0, false) {
                                    bottom_pairs.push((idx as u32, u32::MAX));
                                }
                            }
                        }
                    }
                }
            }
            adj_offsets.push(adj_targets.len() as u32);
        }
        Ok(CrossingGeometry {
            n,
            interior,
            adj_offsets,
            adj_targets,
            top_pairs,
            bottom_pairs,
        })
    }

    /// Evaluate the crossing on raw field bits (window layout must match).
    pub fn crossing_bits(&self, bits: &[u8]) -> bool {
        debug_assert_eq!(bits.len(), self.n);
        let open_pair = |&(x1, x0): &(u32, u32)| {
            bits[x1 as usize] != 0 && (x0 == u32::MAX || bits[x0 as usize] != 0)
        };
        let mut bottom = vec![false; self.n];
        let mut any_bottom = false;
        for pair in &self.bottom_pairs {
            if open_pair(pair) {
                bottom[pair.0 as usize] = true;
                any_bottom = true;
            }
        }
        if !any_bottom {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack: Vec<u32> = Vec::new();
        for pair in &self.top_pairs {
            if open_pair(pair) && !seen[pair.0 as usize] {
                seen[pair.0 as usize] = true;
                stack.push(pair.0);
            }
        }
        while let Some(idx) = stack.pop() {
            let idx = idx as usize;
            if bottom[idx] {
                return true;
            }
            let lo = self.adj_offsets[idx] as usize;
            let hi = self.adj_offsets[idx + 1] as usize;
            for &j in &self.adj_targets[lo..hi] {
                let ju = j as usize;
                if !seen[ju] && self.interior[ju] && bits[ju] != 0 {
                    seen[ju] = true;
                    stack.push(j);
                }
            }
        }
        false
    }
}

/// Is there an open vertical L-crossing of the rectangle? Interior path
/// sites lie strictly inside R; the two end segments must touch the top and
/// bottom sides, with their outer endpoints open as well.
pub fn vertical_crossing(field: &SiteField, spec: &CrossingSpec) -> Result<bool> {
    let geom = CrossingGeometry::new(&field.model, field.window, spec)?;
    Ok(geom.crossing_bits(&field.bits))
}

/// Paired crossing probability estimates from coupled samples.
pub fn crossing_probability(
    model: LatticeModel,
    p: f64,
    s: f64,
    rule: Option<&EnhancementRule>,
    spec: &CrossingSpec,
    n_samples: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    if (model.mesh - spec.mesh).abs() > 1e-12 {
        return Err(Error::WindowMismatch(
            "model mesh must match the spec".into(),
        ));
    }
    let window = spec.window(model.kind, margin_for(rule));
    let geom = CrossingGeometry::new(&model, window, spec)?;
    let sampler = CoupledSampler::new(model, window, p, s, rule);
    let results: Vec<Result<(bool, bool)>> = replicate(n_samples, |i| {
        let rseed = StreamKey::new(seed, Stream::Aux(4)).index_u64(i as u64);
        let (eta, hat) = sampler.sample(rseed)?;
        let plain = geom.crossing_bits(&eta.bits);
        let enh = if s == 0.0 || rule.is_none() {
            plain
        } else {
            geom.crossing_bits(&hat.bits)
        };
        Ok((plain, enh))
    });
    let pairs: Vec<(bool, bool)> = results.into_iter().collect::<Result<_>>()?;
    Ok(paired_from_indicators(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    fn tri() -> LatticeModel {
        LatticeModel::unit(LatticeKind::Triangular)
    }

    #[test]
    fn labels_of_constant_fields() {
        let w = Window::centered(5, Boundary::Free);
        let closed = SiteField::constant(tri(), w, false);
        assert_eq!(label(&closed, Adjacency::Lattice).sizes.len(), 0);
        let open = SiteField::constant(tri(), w, true);
        let l = label(&open, Adjacency::Lattice);
        assert_eq!(l.sizes.len(), 1);
        assert_eq!(l.sizes[0] as usize, w.len(LatticeKind::Triangular));
        assert!(l.touches_frame[0]);
    }

    // Oracle: flood-fill labeling must agree with union-find on random fields.
    #[test]
    fn labels_agree_with_flood_fill() {
        for kind in [
            LatticeKind::Square,
            LatticeKind::Triangular,
            LatticeKind::Hexagonal,
        ] {
            let model = LatticeModel::unit(kind);
            let w = Window::centered(8, Boundary::Free);
            for seed in 0..20 {
                let f = sample_site_field(model, w, 0.5, seed);
                let l = label(&f, Adjacency::Lattice);
                let n = f.bits.len();
                let mut flood = vec![CLOSED; n];
                let mut next = 0u32;
                for start in 0..n {
                    if f.bits[start] == 0 || flood[start] != CLOSED {
                        continue;
                    }
                    let id = next;
                    next += 1;
                    let mut stack = vec![start];
                    flood[start] = id;
                    while let Some(i) = stack.pop() {
                        let s = w.site_at(kind, i);
                        for nb in model.neighbors(s) {
                            if let Some(j) = w.index(kind, nb) {
                                if f.bits[j] != 0 && flood[j] == CLOSED {
                                    flood[j] = id;
                                    stack.push(j);
                                }
                            }
                        }
                    }
                }
                let mut map = std::collections::HashMap::new();
                for i in 0..n {
                    assert_eq!(l.labels[i] == CLOSED, flood[i] == CLOSED);
                    if flood[i] != CLOSED {
                        let e = map.entry(flood[i]).or_insert(l.labels[i]);
                        assert_eq!(*e, l.labels[i], "partitions differ at {i}");
                    }
                }
                assert_eq!(map.len(), l.sizes.len());
                let total: u32 = l.sizes.iter().sum();
                assert_eq!(total as usize, f.count_open());
            }
        }
    }

    #[test]
    fn theta_edge_cases() {
        let t = estimate_theta(tri(), 1.0, 0.0, None, Adjacency::Lattice, 8, 20, 1).unwrap();
        assert_eq!(t.plain.value, 1.0);
        // p = 0 with a nonessential monotone rule that never fires on the
        // empty configuration
        let rule = crate::enhance::builtin("tri-m6").unwrap();
        let t =
            estimate_theta(tri(), 0.0, 1.0, Some(&rule), Adjacency::Lattice, 8, 20, 1).unwrap();
        assert_eq!(t.enhanced.value, 0.0);
        assert_eq!(t.violations, 0);
    }

    #[test]
    fn theta_is_seed_reproducible_and_self_consistent() {
        let a = estimate_theta(tri(), 0.55, 0.0, None, Adjacency::Lattice, 16, 400, 7).unwrap();
        let b = estimate_theta(tri(), 0.55, 0.0, None, Adjacency::Lattice, 16, 400, 7).unwrap();
        assert_eq!(a, b);
        let c = estimate_theta(tri(), 0.55, 0.0, None, Adjacency::Lattice, 16, 400, 8).unwrap();
        assert!(a.plain.value > 0.0);
        assert!(a.plain.agrees_with(&c.plain, 3.0), "{a:?} vs {c:?}");
    }

    #[test]
    fn tau_at_origin_is_p() {
        let taus = estimate_tau(
            tri(),
            0.37,
            0.0,
            None,
            Adjacency::Lattice,
            &[Site::ORIGIN],
            8,
            4000,
            3,
        )
        .unwrap();
        let (d, est) = &taus[0];
        assert_eq!(*d, Site::ORIGIN);
        assert!((est.plain.value - 0.37).abs() < 4.0 * est.plain.se.max(1e-3));
    }

    #[test]
    fn tau_decays_and_is_coupled_monotone() {
        let rule = crate::enhance::builtin("tri-m5").unwrap();
        let ds = [Site::new(2, 0), Site::new(5, 0), Site::new(8, 0)];
        let taus =
            estimate_tau(tri(), 0.4, 1.0, Some(&rule), Adjacency::Lattice, &ds, 12, 1500, 5)
                .unwrap();
        for (_, est) in &taus {
            assert_eq!(est.violations, 0);
            assert!(est.enhanced.value >= est.plain.value);
        }
        assert!(taus[0].1.plain.value > taus[2].1.plain.value);
    }

    #[test]
    fn tau_slope_is_stable_across_seed_groups() {
        // two independent seed groups fit the same decay slope
        let ds: Vec<Site> = (3..=9).map(|d| Site::new(d, 0)).collect();
        let fit_for = |seed: u64| {
            let taus =
                estimate_tau(tri(), 0.4, 0.0, None, Adjacency::Lattice, &ds, 12, 4000, seed)
                    .unwrap();
            let pts: Vec<(f64, f64, f64)> = taus
                .iter()
                .filter(|(_, e)| e.plain.value > 0.0)
                .map(|(d, e)| {
                    let x = tri().distance(Site::ORIGIN, *d);
                    (x, e.plain.value.ln(), e.plain.se / e.plain.value)
                })
                .collect();
            weighted_line_fit(&pts).unwrap()
        };
        let a = fit_for(1001);
        let b = fit_for(2002);
        let joint = (a.slope_se.powi(2) + b.slope_se.powi(2)).sqrt();
        assert!(a.slope < 0.0 && b.slope < 0.0);
        assert!(
            (a.slope - b.slope).abs() <= 3.0 * joint,
            "slopes {} vs {} (joint se {joint})",
            a.slope,
            b.slope
        );
    }

    #[test]
    fn xi_fit_recovers_exact_exponential() {
        let pts: Vec<(f64, f64, f64)> = (4..=16)
            .map(|x| (x as f64, (-(x as f64) / 5.0).exp(), 1e-9))
            .collect();
        let fit = fit_xi(&pts).unwrap();
        assert!((fit.xi - 5.0).abs() < 0.01, "xi = {}", fit.xi);
        // prefactor invariance
        let pts2: Vec<(f64, f64, f64)> =
            pts.iter().map(|&(x, t, se)| (x, 3.0 * t, se)).collect();
        let fit2 = fit_xi(&pts2).unwrap();
        assert!((fit2.xi - fit.xi).abs() < 1e-9);
    }

    #[test]
    fn xi_fit_rejects_flat_or_empty_curves() {
        assert!(fit_xi(&[]).is_err());
        let flat: Vec<(f64, f64, f64)> = (0..6).map(|x| (x as f64, 0.5, 0.01)).collect();
        assert!(fit_xi(&flat).is_err());
        let zeros: Vec<(f64, f64, f64)> = (0..6).map(|x| (x as f64, 0.0, 0.01)).collect();
        assert!(fit_xi(&zeros).is_err());
    }

    #[test]
    fn chi_edge_cases_and_identity_with_tau_sum() {
        let chi0 = estimate_chi(tri(), 0.0, 0.0, None, Adjacency::Lattice, 8, 50, 1).unwrap();
        assert_eq!(chi0.plain.value, 0.0);
        // χ equals the sum of τ over the window (an identity per sample,
        // checked here statistically across independent sample sets)
        let half = 6;
        let n = 3000;
        let chi = estimate_chi(tri(), 0.35, 0.0, None, Adjacency::Lattice, half, n, 11).unwrap();
        let window = Window::centered(half, Boundary::Free);
        let ds: Vec<Site> = window.sites(LatticeKind::Triangular).collect();
        let taus =
            estimate_tau(tri(), 0.35, 0.0, None, Adjacency::Lattice, &ds, half, n, 12).unwrap();
        let tau_sum: f64 = taus.iter().map(|(_, e)| e.plain.value).sum();
        let tau_sum_se: f64 = taus
            .iter()
            .map(|(_, e)| e.plain.se.powi(2))
            .sum::<f64>()
            .sqrt();
        let joint = (chi.plain.se.powi(2) + tau_sum_se.powi(2)).sqrt();
        assert!(
            (chi.plain.value - tau_sum).abs() <= 3.0 * joint,
            "chi {} vs tau-sum {} (joint se {})",
            chi.plain.value,
            tau_sum,
            joint
        );
    }

    #[test]
    fn crossing_constant_fields() {
        let spec = CrossingSpec {
            b: 1.0,
            h: 1.0,
            mesh: 0.125,
        };
        let model = LatticeModel::new(LatticeKind::Triangular, 0.125);
        let w = spec.window(model.kind, 0);
        let open = SiteField::constant(model, w, true);
        assert!(vertical_crossing(&open, &spec).unwrap());
        let closed = SiteField::constant(model, w, false);
        assert!(!vertical_crossing(&closed, &spec).unwrap());
    }

    // Oracle: full labeling with side bands, independent of the BFS route.
    #[test]
    fn crossing_agrees_with_labeling_oracle() {
        let spec = CrossingSpec {
            b: 2.0,
            h: 2.0,
            mesh: 1.0 / 8.0,
        };
        let model = LatticeModel::new(LatticeKind::Triangular, spec.mesh);
        let w = spec.window(model.kind, 0);
        for seed in 0..300 {
            let f = sample_site_field(model, w, 0.5, seed);
            let got = vertical_crossing(&f, &spec).unwrap();

            let (hb, hh) = (spec.b / 2.0, spec.h / 2.0);
            let mut masked = f.clone();
            for idx in 0..masked.bits.len() {
                let p = model.position(w.site_at(model.kind, idx));
                if !(p[0] > -hb && p[0] < hb && p[1] > -hh && p[1] < hh) {
                    masked.bits[idx] = 0;
                }
            }
            let labels = label(&masked, Adjacency::Lattice);
            let mut top_ids = std::collections::HashSet::new();
            let mut bot_ids = std::collections::HashSet::new();
            for idx in 0..masked.bits.len() {
                if masked.bits[idx] == 0 {
                    continue;
                }
                let s = w.site_at(model.kind, idx);
                let p1 = model.position(s);
                for nb in model.neighbors(s) {
                    if !f.open(nb) {
                        continue;
                    }
                    let p0 = model.position(nb);
                    if p0[1] >= hh {
                        let t = (hh - p1[1]) / (p0[1] - p1[1]);
                        let x = p1[0] + t * (p0[0] - p1[0]);
                        if (-hb..=hb).contains(&x) {
                            top_ids.insert(labels.labels[idx]);
                        }
                    }
                    if p0[1] <= -hh {
                        let t = (-hh - p1[1]) / (p0[1] - p1[1]);
                        let x = p1[0] + t * (p0[0] - p1[0]);
                        if (-hb..=hb).contains(&x) {
                            bot_ids.insert(labels.labels[idx]);
                        }
                    }
                }
            }
            let oracle = top_ids.intersection(&bot_ids).next().is_some();
            assert_eq!(got, oracle, "seed {seed}");
        }
    }

    #[test]
    fn coupled_crossing_is_monotone_per_sample() {
        let spec = CrossingSpec {
            b: 1.0,
            h: 1.0,
            mesh: 1.0 / 12.0,
        };
        let model = LatticeModel::new(LatticeKind::Triangular, spec.mesh);
        let rule = crate::enhance::builtin("tri-m4").unwrap();
        let est = crossing_probability(model, 0.48, 0.5, Some(&rule), &spec, 400, 21).unwrap();
        assert_eq!(est.violations, 0);
        assert!(est.enhanced.value >= est.plain.value);
    }

    #[test]
    fn crossing_window_must_cover_rectangle() {
        let spec = CrossingSpec {
            b: 4.0,
            h: 4.0,
            mesh: 0.25,
        };
        let model = LatticeModel::new(LatticeKind::Triangular, 0.25);
        let w = Window::centered(3, Boundary::Free);
        let f = SiteField::constant(model, w, true);
        assert!(vertical_crossing(&f, &spec).is_err());
    }
}
