//! Experiment specifications: every knob of a run, serializable so a spec
//! reproduces its results bit for bit.

use serde::{Deserialize, Serialize};

use enhperc_core::lattice::LatticeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EssentialityReport,
    CouplingSandwich,
    CrossingVsCardy,
    EnhancementInvariance,
    ShiftDetection,
    ExponentComparison,
    InterfaceConvergence,
    GeometrySuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EssentialityReport => "essentiality-report",
            ExperimentKind::CouplingSandwich => "coupling-sandwich",
            ExperimentKind::CrossingVsCardy => "crossing-vs-cardy",
            ExperimentKind::EnhancementInvariance => "enhancement-invariance",
            ExperimentKind::ShiftDetection => "shift-detection",
            ExperimentKind::ExponentComparison => "exponent-comparison",
            ExperimentKind::InterfaceConvergence => "interface-convergence",
            ExperimentKind::GeometrySuite => "geometry-suite",
        }
    }
}

/// Everything a run depends on. Defaults mirror the CLI defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub lattice: LatticeKind,
    /// Catalog id of the enhancement rule, if any.
    pub rule: Option<String>,
    /// Site density grid.
    pub p: Vec<f64>,
    /// Enhancement density.
    pub s: f64,
    /// Window side L (sites), where applicable.
    pub size: i32,
    /// Mesh grid δ.
    pub mesh: Vec<f64>,
    /// Aspect-ratio grid ρ for crossings.
    pub rho: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Critical density override; only the triangular value 1/2 is known.
    pub pc: Option<f64>,
    /// Enhancement range used by the exploration-decay section.
    pub decay_range: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::GeometrySuite,
            lattice: LatticeKind::Triangular,
            rule: None,
            p: vec![0.5],
            s: 1.0,
            size: 64,
            mesh: vec![1.0],
            rho: vec![1.0],
            samples: 1000,
            seed: crate::DEFAULT_SEED,
            pc: None,
            decay_range: 4.0,
        }
    }
}

impl ExperimentSpec {
    /// Stable content hash of the spec (canonical JSON, SHA-256).
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        let mut h = Sha256::new();
        h.update(&canonical);
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_hash_is_stable_and_sensitive() {
        let a = ExperimentSpec::default();
        let b = ExperimentSpec::default();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentSpec {
            seed: 1,
            ..ExperimentSpec::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn spec_roundtrips_through_toml() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::CrossingVsCardy,
            rule: Some("tri-m6".into()),
            p: vec![0.5],
            rho: vec![0.5, 1.0, 2.0],
            mesh: vec![1.0 / 256.0],
            samples: 10_000,
            ..ExperimentSpec::default()
        };
        let text = toml::to_string(&spec).unwrap();
        let back: ExperimentSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
