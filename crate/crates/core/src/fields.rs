//! Site configurations η, activation fields α and the uniform fields that
//! couple them monotonically in the density.
//!
//! Every field is a pure function of (window, density, seed): the generator
//! is counter-based, so sampling parallelizes by site and any single site
//! can be regenerated on demand.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::lattice::{Boundary, LatticeKind, LatticeModel, Resolved, Site, Window};
use crate::rng::{Stream, StreamKey};
use crate::{Error, Result};

/// A {0,1} site configuration on a finite window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteField {
    pub model: LatticeModel,
    pub window: Window,
    pub bits: Vec<u8>,
    pub density: f64,
    pub seed: u64,
}

/// Activation field α; independent of any site field by seed-stream
/// separation.
pub type ActivationField = SiteField;

/// I.i.d. uniforms in [0,1) per site; thresholding at p gives a density-p
/// site field, monotonically in p.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformField {
    pub model: LatticeModel,
    pub window: Window,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SiteField {
    pub fn constant(model: LatticeModel, window: Window, open: bool) -> SiteField {
        SiteField {
            model,
            window,
            bits: vec![open as u8; window.len(model.kind)],
            density: if open { 1.0 } else { 0.0 },
            seed: 0,
        }
    }

    #[inline]
    pub fn open_idx(&self, idx: usize) -> bool {
        self.bits[idx] != 0
    }

    /// State of a site, resolving out-of-window queries by the boundary
    /// policy.
    #[inline]
    pub fn open(&self, s: Site) -> bool {
        match self.window.resolve(self.model.kind, s) {
            Resolved::In(i) => self.bits[i] != 0,
            Resolved::Forced(v) => v,
        }
    }

    pub fn count_open(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Sitewise containment (same window required).
    pub fn subset_of(&self, other: &SiteField) -> bool {
        self.window == other.window
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(a, b)| *a == 0 || *b != 0)
    }

    /// Documented CSV snapshot: a header with the lattice kind, window,
    /// density and seed, then row-major bit lines (two characters per axial
    /// cell on the hexagonal lattice, up site first).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# enhperc field v1")?;
        writeln!(w, "lattice,{}", self.model.kind.name())?;
        writeln!(w, "mesh,{}", self.model.mesh)?;
        writeln!(
            w,
            "window,{},{},{},{},{}",
            self.window.q0,
            self.window.r0,
            self.window.width,
            self.window.height,
            boundary_name(self.window.boundary)
        )?;
        writeln!(w, "density,{}", self.density)?;
        writeln!(w, "seed,{}", self.seed)?;
        let per_row = self.bits.len() / self.window.height as usize;
        for row in self.bits.chunks(per_row) {
            let line: String = row.iter().map(|&b| if b != 0 { '1' } else { '0' }).collect();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<SiteField> {
        let mut lines = r.lines();
        let mut expect = |prefix: &str| -> Result<String> {
            loop {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse("truncated field dump".into()))??;
                if line.starts_with('#') {
                    continue;
                }
                return line
                    .strip_prefix(prefix)
                    .map(str::to_owned)
                    .ok_or_else(|| Error::Parse(format!("expected {prefix} line, got {line:?}")));
            }
        };
        let kind: LatticeKind = expect("lattice,")?.parse()?;
        let mesh: f64 = expect("mesh,")?
            .parse()
            .map_err(|e| Error::Parse(format!("mesh: {e}")))?;
        let wparts = expect("window,")?;
        let parts: Vec<&str> = wparts.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Parse("window line needs 5 fields".into()));
        }
        let num = |s: &str| -> Result<i32> {
            s.parse().map_err(|e| Error::Parse(format!("window: {e}")))
        };
        let window = Window::new(
            num(parts[0])?,
            num(parts[1])?,
            num(parts[2])?,
            num(parts[3])?,
            boundary_from_name(parts[4])?,
        );
        let density: f64 = expect("density,")?
            .parse()
            .map_err(|e| Error::Parse(format!("density: {e}")))?;
        let seed: u64 = expect("seed,")?
            .parse()
            .map_err(|e| Error::Parse(format!("seed: {e}")))?;
        let mut bits = Vec::with_capacity(window.len(kind));
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            for c in line.chars() {
                match c {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    _ => return Err(Error::Parse(format!("bad bit character {c:?}"))),
                }
            }
        }
        if bits.len() != window.len(kind) {
            return Err(Error::Parse(format!(
                "bit count {} does not match window size {}",
                bits.len(),
                window.len(kind)
            )));
        }
        Ok(SiteField {
            model: LatticeModel::new(kind, mesh),
            window,
            bits,
            density,
            seed,
        })
    }
}

fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Free => "free",
        Boundary::ClosedExterior => "closed",
        Boundary::OpenExterior => "open",
        Boundary::Torus => "torus",
    }
}

fn boundary_from_name(s: &str) -> Result<Boundary> {
    match s {
        "free" => Ok(Boundary::Free),
        "closed" => Ok(Boundary::ClosedExterior),
        "open" => Ok(Boundary::OpenExterior),
        "torus" => Ok(Boundary::Torus),
        other => Err(Error::Parse(format!("unknown boundary {other:?}"))),
    }
}

/// I.i.d. uniforms on the window, deterministic in (window, seed).
pub fn sample_uniform(model: LatticeModel, window: Window, seed: u64) -> UniformField {
    let key = StreamKey::new(seed, Stream::Eta);
    let values = (0..window.len(model.kind))
        .map(|i| key.site_unit(window.site_at(model.kind, i)))
        .collect();
    UniformField {
        model,
        window,
        values,
        seed,
    }
}

/// Monotone coupling device: site open iff its uniform lies below p.
pub fn threshold(u: &UniformField, p: f64) -> SiteField {
    SiteField {
        model: u.model,
        window: u.window,
        bits: u.values.iter().map(|&v| (v < p) as u8).collect(),
        density: p,
        seed: u.seed,
    }
}

/// Bernoulli(p) site field; identical to `threshold(sample_uniform(..), p)`.
pub fn sample_site_field(model: LatticeModel, window: Window, p: f64, seed: u64) -> SiteField {
    let key = StreamKey::new(seed, Stream::Eta);
    let bits = (0..window.len(model.kind))
        .map(|i| (key.site_unit(window.site_at(model.kind, i)) < p) as u8)
        .collect();
    SiteField {
        model,
        window,
        bits,
        density: p,
        seed,
    }
}

/// Bernoulli(s) activation field on its own seed stream, independent of the
/// η stream for the same master seed.
pub fn sample_activation(model: LatticeModel, window: Window, s: f64, seed: u64) -> ActivationField {
    let key = StreamKey::new(seed, Stream::Alpha);
    let bits = (0..window.len(model.kind))
        .map(|i| (key.site_unit(window.site_at(model.kind, i)) < s) as u8)
        .collect();
    SiteField {
        model,
        window,
        bits,
        density: s,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> LatticeModel {
        LatticeModel::unit(LatticeKind::Triangular)
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = Window::centered(10, Boundary::Free);
        let a = sample_uniform(tri(), w, 123);
        let b = sample_uniform(tri(), w, 123);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, sample_uniform(tri(), w, 124).values);
    }

    #[test]
    fn threshold_edges() {
        let w = Window::centered(8, Boundary::Free);
        let u = sample_uniform(tri(), w, 5);
        assert_eq!(threshold(&u, 0.0).count_open(), 0);
        assert_eq!(threshold(&u, 1.0).count_open(), w.len(LatticeKind::Triangular));
    }

    #[test]
    fn threshold_is_monotone_in_p() {
        let w = Window::centered(12, Boundary::Free);
        let u = sample_uniform(tri(), w, 9);
        let grid = [0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95];
        for pair in grid.windows(2) {
            let lo = threshold(&u, pair[0]);
            let hi = threshold(&u, pair[1]);
            assert!(lo.subset_of(&hi), "threshold not monotone at {pair:?}");
        }
    }

    #[test]
    fn direct_sampling_equals_thresholded_uniform() {
        let w = Window::centered(12, Boundary::Free);
        let u = sample_uniform(tri(), w, 77);
        let direct = sample_site_field(tri(), w, 0.42, 77);
        assert_eq!(threshold(&u, 0.42).bits, direct.bits);
    }

    #[test]
    fn uniform_mean_is_half_on_a_million_sites() {
        let m = LatticeModel::unit(LatticeKind::Square);
        let w = Window::new(0, 0, 1000, 1000, Boundary::Free);
        let u = sample_uniform(m, w, 2026);
        let mean: f64 = u.values.iter().sum::<f64>() / u.values.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean = {mean}");
    }

    #[test]
    fn activation_density_edges_and_clt() {
        let m = LatticeModel::unit(LatticeKind::Square);
        let w = Window::new(0, 0, 1000, 1000, Boundary::Free);
        assert_eq!(sample_activation(m, w, 1.0, 3).count_open(), 1_000_000);
        assert_eq!(sample_activation(m, w, 0.0, 3).count_open(), 0);
        let a = sample_activation(m, w, 0.3, 3);
        let density = a.count_open() as f64 / 1e6;
        assert!((density - 0.3).abs() < 0.002, "density = {density}");
    }

    #[test]
    fn eta_and_alpha_streams_are_independent() {
        let w = Window::centered(10, Boundary::Free);
        let eta1 = sample_site_field(tri(), w, 0.5, 42);
        let eta2 = sample_site_field(tri(), w, 0.5, 42);
        let alpha1 = sample_activation(tri(), w, 0.5, 42);
        assert_eq!(eta1.bits, eta2.bits);
        assert_ne!(eta1.bits, alpha1.bits, "streams must differ");
        // changing only the alpha stream's use leaves eta untouched
        let alpha2 = sample_activation(tri(), w, 0.5, 43);
        assert_ne!(alpha1.bits, alpha2.bits);
        assert_eq!(eta1.bits, sample_site_field(tri(), w, 0.5, 42).bits);
    }

    #[test]
    fn boundary_policies_resolve_outside_queries() {
        let w = Window::new(0, 0, 4, 4, Boundary::ClosedExterior);
        let f = SiteField::constant(tri(), w, true);
        assert!(f.open(Site::new(1, 1)));
        assert!(!f.open(Site::new(-1, 0)));
        let mut w2 = w;
        w2.boundary = Boundary::OpenExterior;
        let f2 = SiteField {
            window: w2,
            ..SiteField::constant(tri(), w, false)
        };
        assert!(f2.open(Site::new(-1, 0)));
    }

    #[test]
    fn csv_dump_roundtrips() {
        for kind in [
            LatticeKind::Square,
            LatticeKind::Triangular,
            LatticeKind::Hexagonal,
        ] {
            let m = LatticeModel::new(kind, 0.25);
            let w = Window::new(-3, -2, 7, 5, Boundary::ClosedExterior);
            let f = sample_site_field(m, w, 0.37, 99);
            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let back = SiteField::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
            assert_eq!(back, f);
        }
    }
}
