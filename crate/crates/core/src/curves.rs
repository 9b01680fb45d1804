//! The curve space used for interface convergence: the conformal metric
//! d(u,v) = inf over smooth curves of ∫ (1+|x|²)⁻¹ dl (the round half-sphere
//! metric under stereographic projection, making the plane precompact with a
//! single point at infinity), the discrete Fréchet distance between
//! polylines modulo monotone reparametrizations (both orientations, and
//! rotations of the basepoint for closed curves), and the induced Hausdorff
//! distance between curve families.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of the compactified plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricPoint {
    Finite([f64; 2]),
    Infinity,
}

/// Geodesic distance under the conformal factor (1+|x|²)⁻¹, in closed form
/// via the stereographic identification with a sphere of radius 1/2:
/// d(u,v) = arcsin(|u−v| / sqrt((1+|u|²)(1+|v|²))).
pub fn point_metric(u: MetricPoint, v: MetricPoint) -> f64 {
    match (u, v) {
        (MetricPoint::Finite(a), MetricPoint::Finite(b)) => point_metric_finite(a, b),
        (MetricPoint::Finite(a), MetricPoint::Infinity)
        | (MetricPoint::Infinity, MetricPoint::Finite(a)) => {
            let r2 = a[0] * a[0] + a[1] * a[1];
            (1.0 / (1.0 + r2).sqrt()).asin()
        }
        (MetricPoint::Infinity, MetricPoint::Infinity) => 0.0,
    }
}

#[inline]
pub fn point_metric_finite(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let na = 1.0 + a[0] * a[0] + a[1] * a[1];
    let nb = 1.0 + b[0] * b[0] + b[1] * b[1];
    let arg = (d2 / (na * nb)).sqrt();
    arg.clamp(0.0, 1.0).asin()
}

/// A polyline curve in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Curve {
    pub fn open(points: Vec<[f64; 2]>) -> Curve {
        Curve {
            points,
            closed: false,
        }
    }

    pub fn closed(points: Vec<[f64; 2]>) -> Curve {
        Curve {
            points,
            closed: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean diameter of the vertex set.
    pub fn diameter(&self) -> f64 {
        let hull = convex_hull(&self.points);
        let mut best = 0.0f64;
        for i in 0..hull.len() {
            for j in (i + 1)..hull.len() {
                let d2 = (hull[i][0] - hull[j][0]).powi(2) + (hull[i][1] - hull[j][1]).powi(2);
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            lo[0] = lo[0].min(p[0]);
            lo[1] = lo[1].min(p[1]);
            hi[0] = hi[0].max(p[0]);
            hi[1] = hi[1].max(p[1]);
        }
        (lo, hi)
    }

    /// Bit-exact canonical form for duplicate detection: closed curves are
    /// rotated to start at their smallest vertex; both orientations are
    /// considered for all curves.
    pub fn canonical_key(&self) -> Vec<u64> {
        let enc = |p: &[f64; 2]| [p[0].to_bits(), p[1].to_bits()];
        let seq = |pts: &[[f64; 2]]| -> Vec<u64> {
            pts.iter().flat_map(|p| enc(p)).collect()
        };
        let fwd = self.points.clone();
        let mut rev = self.points.clone();
        rev.reverse();
        if !self.closed {
            return seq(&fwd).min(seq(&rev));
        }
        let rotate_min = |pts: &[[f64; 2]]| -> Vec<u64> {
            let n = pts.len();
            let min_i = (0..n)
                .min_by(|&i, &j| enc(&pts[i]).cmp(&enc(&pts[j])))
                .unwrap_or(0);
            let mut rot = Vec::with_capacity(n);
            rot.extend_from_slice(&pts[min_i..]);
            rot.extend_from_slice(&pts[..min_i]);
            seq(&rot)
        };
        rotate_min(&fwd).min(rotate_min(&rev))
    }
}

fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if points.len() <= 3 {
        return points.to_vec();
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let chain = |iter: &mut dyn Iterator<Item = &[f64; 2]>| {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for &p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    hull
}

/// Plain discrete Fréchet distance between two fixed vertex sequences.
fn discrete_frechet(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let mut prev = vec![0.0f64; n];
    let mut cur = vec![0.0f64; n];
    for i in 0..m {
        for j in 0..n {
            let d = point_metric_finite(a[i], b[j]);
            cur[j] = if i == 0 && j == 0 {
                d
            } else if i == 0 {
                d.max(cur[j - 1])
            } else if j == 0 {
                d.max(prev[j])
            } else {
                d.max(prev[j].min(prev[j - 1]).min(cur[j - 1]))
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n - 1]
}

fn rotated(points: &[[f64; 2]], offset: usize) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut out = Vec::with_capacity(n + 1);
    out.extend_from_slice(&points[offset..]);
    out.extend_from_slice(&points[..offset]);
    // close the parametrization back at the starting vertex
    out.push(points[offset]);
    out
}

/// Discrete Fréchet distance modulo monotone reparametrizations: minimized
/// over the orientation of the second curve, and over a bounded set of
/// basepoint rotations for closed curves (loops are geometric objects; fixed
/// basepoints would measure tracing artifacts). The result upper-bounds the
/// continuum curve distance up to one mesh step of polyline refinement.
pub fn curve_distance(a: &Curve, b: &Curve) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("curve distance of an empty curve".into()));
    }
    if a.closed != b.closed {
        // an open and a closed curve never match exactly; still comparable
        // as parametrized polylines
    }
    if !a.closed || !b.closed || a.points.len() == 1 || b.points.len() == 1 {
        let fwd = discrete_frechet(&a.points, &b.points);
        let mut rev_pts = b.points.clone();
        rev_pts.reverse();
        let rev = discrete_frechet(&a.points, &rev_pts);
        return Ok(fwd.min(rev));
    }

    // closed curves: candidate rotations = nearest vertices of b to a's
    // first vertex, plus a uniform coarse sweep
    let n = b.points.len();
    let mut candidates: Vec<usize> = Vec::new();
    let mut by_dist: Vec<(f64, usize)> = b
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| (point_metric_finite(a.points[0], p), i))
        .collect();
    by_dist.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.extend(by_dist.iter().take(4).map(|&(_, i)| i));
    let stride = (n / 8).max(1);
    candidates.extend((0..n).step_by(stride));
    candidates.sort_unstable();
    candidates.dedup();

    let a_closed = rotated(&a.points, 0);
    let mut best = f64::INFINITY;
    for &off in &candidates {
        let fwd = rotated(&b.points, off);
        best = best.min(discrete_frechet(&a_closed, &fwd));
        let mut rev: Vec<[f64; 2]> = fwd;
        rev.reverse();
        best = best.min(discrete_frechet(&a_closed, &rev));
    }
    Ok(best)
}

/// Smallest ε such that every curve of `f` is within curve distance ε of
/// some curve of `g`, and vice versa.
pub fn hausdorff(f: &[Curve], g: &[Curve]) -> Result<f64> {
    if f.is_empty() || g.is_empty() {
        return Err(Error::Contract("hausdorff of an empty family".into()));
    }
    Ok(directed_hausdorff(f, g)?.max(directed_hausdorff(g, f)?))
}

fn directed_hausdorff(f: &[Curve], g: &[Curve]) -> Result<f64> {
    use std::collections::HashMap;
    // exact duplicates match at distance zero
    let mut g_keys: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, c) in g.iter().enumerate() {
        g_keys.entry(c.canonical_key()).or_insert(i);
    }
    let g_boxes: Vec<([f64; 2], [f64; 2], f64)> = g
        .iter()
        .map(|c| {
            let (lo, hi) = c.bbox();
            let r = (lo[0].abs().max(hi[0].abs())).hypot(lo[1].abs().max(hi[1].abs()));
            (lo, hi, r)
        })
        .collect();

    let mut worst = 0.0f64;
    for c in f {
        if g_keys.contains_key(&c.canonical_key()) {
            continue;
        }
        let (clo, chi) = c.bbox();
        let cr = (clo[0].abs().max(chi[0].abs())).hypot(clo[1].abs().max(chi[1].abs()));
        // candidates ordered by a metric lower bound from box separation
        let mut order: Vec<(f64, usize)> = g_boxes
            .iter()
            .enumerate()
            .map(|(i, (lo, hi, r))| {
                let dx = (lo[0] - chi[0]).max(clo[0] - hi[0]).max(0.0);
                let dy = (lo[1] - chi[1]).max(clo[1] - hi[1]).max(0.0);
                let gap = dx.hypot(dy);
                let lb = (gap / ((1.0 + cr * cr) * (1.0 + r * r)).sqrt())
                    .clamp(0.0, 1.0)
                    .asin();
                (lb, i)
            })
            .collect();
        order.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut best = f64::INFINITY;
        for &(lb, i) in &order {
            if lb >= best {
                break;
            }
            best = best.min(curve_distance(c, &g[i])?);
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_origin_to_infinity_is_half_pi() {
        let d = point_metric(MetricPoint::Finite([0.0, 0.0]), MetricPoint::Infinity);
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert_eq!(
            point_metric(MetricPoint::Finite([3.0, -4.0]), MetricPoint::Finite([3.0, -4.0])),
            0.0
        );
    }

    // Numeric geodesic oracle: quadrature along candidate discretized curves.
    #[test]
    fn metric_matches_numeric_minimization() {
        let conformal_len = |pts: &[[f64; 2]]| -> f64 {
            let mut total = 0.0;
            for w in pts.windows(2) {
                // refine each segment and integrate the conformal factor
                let steps = 4000;
                for k in 0..steps {
                    let t0 = k as f64 / steps as f64;
                    let t1 = (k + 1) as f64 / steps as f64;
                    let a = [
                        w[0][0] + t0 * (w[1][0] - w[0][0]),
                        w[0][1] + t0 * (w[1][1] - w[0][1]),
                    ];
                    let b = [
                        w[0][0] + t1 * (w[1][0] - w[0][0]),
                        w[0][1] + t1 * (w[1][1] - w[0][1]),
                    ];
                    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    let dl = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                    total += dl / (1.0 + mid[0] * mid[0] + mid[1] * mid[1]);
                }
            }
            total
        };

        // d((x0,0), (x1,0)) along the radial segment equals atan(x1)-atan(x0)
        for (u, v) in [([0.5, 0.0], [4.0, 0.0]), ([0.0, 0.0], [1.0, 0.0])] {
            let exact = point_metric_finite(u, v);
            let radial = conformal_len(&[u, v]);
            assert!((exact - radial).abs() < 1e-6, "radial: {exact} vs {radial}");
            // perturbed polylines are never shorter
            for bend in [0.3, -0.4, 1.0] {
                let mid = [(u[0] + v[0]) / 2.0, bend];
                let detour = conformal_len(&[u, mid, v]);
                assert!(detour >= exact - 1e-9);
            }
        }

        // spot values toward infinity: d((x,0), inf) = atan(1/x)
        for x in [2.0, 6.0, 12.0] {
            let exact = point_metric(MetricPoint::Finite([x, 0.0]), MetricPoint::Infinity);
            assert!((exact - (1.0 / x).atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_is_bounded_by_euclidean_and_scales() {
        let key = crate::rng::StreamKey::new(5, crate::rng::Stream::Aux(7));
        for i in 0..200u64 {
            let u = [
                8.0 * key.index_unit(4 * i) - 4.0,
                8.0 * key.index_unit(4 * i + 1) - 4.0,
            ];
            let v = [
                8.0 * key.index_unit(4 * i + 2) - 4.0,
                8.0 * key.index_unit(4 * i + 3) - 4.0,
            ];
            let d = point_metric_finite(u, v);
            let euclid = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
            assert!(d <= euclid + 1e-12);
            // scaling double bound a·d(u,v) ≤ d(au,av) ≤ d(u,v)/a
            for a in [0.3, 0.7] {
                let scaled = point_metric_finite([a * u[0], a * u[1]], [a * v[0], a * v[1]]);
                assert!(a * d <= scaled + 1e-12);
                assert!(scaled <= d / a + 1e-12);
            }
            // triangle inequality through a third point
            let w = [1.0, -2.0];
            assert!(d <= point_metric_finite(u, w) + point_metric_finite(w, v) + 1e-12);
        }
    }

    #[test]
    fn frechet_identical_and_parallel_segments() {
        let a = Curve::open(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(curve_distance(&a, &a).unwrap(), 0.0);
        // parallel segment at Euclidean offset h near the origin: distance
        // positive and at most h
        let h = 0.25;
        let b = Curve::open(vec![[0.0, h], [1.0, h], [2.0, h]]);
        let d = curve_distance(&a, &b).unwrap();
        assert!(d > 0.0 && d <= h, "d = {d}");
    }

    #[test]
    fn frechet_is_reversal_invariant() {
        let key = crate::rng::StreamKey::new(11, crate::rng::Stream::Aux(8));
        for t in 0..20u64 {
            let pts: Vec<[f64; 2]> = (0..12)
                .map(|i| {
                    [
                        key.index_unit(100 * t + 2 * i) * 4.0,
                        key.index_unit(100 * t + 2 * i + 1) * 4.0,
                    ]
                })
                .collect();
            let qts: Vec<[f64; 2]> = (0..10)
                .map(|i| {
                    [
                        key.index_unit(5000 + 100 * t + 2 * i) * 4.0,
                        key.index_unit(5000 + 100 * t + 2 * i + 1) * 4.0,
                    ]
                })
                .collect();
            let a = Curve::open(pts.clone());
            let b = Curve::open(qts.clone());
            let mut arev = pts;
            arev.reverse();
            let mut brev = qts;
            brev.reverse();
            let d = curve_distance(&a, &b).unwrap();
            assert!((d - curve_distance(&Curve::open(arev), &b).unwrap()).abs() < 1e-12);
            assert!((d - curve_distance(&a, &Curve::open(brev)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_curves_ignore_basepoint() {
        let hexagon: Vec<[f64; 2]> = (0..6)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 6.0;
                [t.cos(), t.sin()]
            })
            .collect();
        let a = Curve::closed(hexagon.clone());
        let mut shifted = hexagon[2..].to_vec();
        shifted.extend_from_slice(&hexagon[..2]);
        let b = Curve::closed(shifted);
        assert!(curve_distance(&a, &b).unwrap() < 1e-12);
        assert_eq!(a.canonical_key(), b.canonical_key());
    }

    #[test]
    fn hull_diameter_matches_brute_force() {
        let key = crate::rng::StreamKey::new(3, crate::rng::Stream::Aux(12));
        for t in 0..50u64 {
            let pts: Vec<[f64; 2]> = (0..40)
                .map(|i| {
                    [
                        key.index_unit(1000 * t + 2 * i) * 10.0 - 5.0,
                        key.index_unit(1000 * t + 2 * i + 1) * 10.0 - 5.0,
                    ]
                })
                .collect();
            let c = Curve::open(pts.clone());
            let mut brute = 0.0f64;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d2 =
                        (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
                    brute = brute.max(d2);
                }
            }
            assert!((c.diameter() - brute.sqrt()).abs() < 1e-12, "set {t}");
        }
    }

    #[test]
    fn diameter_of_known_shapes() {
        let sq = Curve::closed(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        assert!((sq.diameter() - 8.0f64.sqrt()).abs() < 1e-12);
        let seg = Curve::open(vec![[0.0, 0.0], [3.0, 4.0]]);
        assert!((seg.diameter() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_family_properties() {
        let a = Curve::closed(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let b = Curve::closed(vec![[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0]]);
        let f = vec![a.clone(), b.clone()];
        assert_eq!(hausdorff(&f, &f).unwrap(), 0.0);
        let g = vec![a.clone(), b.clone(), b.clone()];
        // duplicates do not change the value
        assert_eq!(hausdorff(&f, &g).unwrap(), 0.0);
        // symmetry
        let h = vec![a];
        let d1 = hausdorff(&f, &h).unwrap();
        let d2 = hausdorff(&h, &f).unwrap();
        assert_eq!(d1, d2);
        assert!(d1 > 0.0);
        assert!(hausdorff(&[], &f).is_err());
    }
}
