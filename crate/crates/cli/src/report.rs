//! Result records and their renderings: a frozen-order CSV of estimates, a
//! JSON document for machine consumption, and a human-readable summary.
//! Reports are pure functions of the record, so re-rendering a stored
//! record is byte-identical.

use serde::{Deserialize, Serialize};

use crate::gates::GateResult;
use crate::spec::ExperimentSpec;

/// One estimate cell. CSV column order is frozen:
/// quantity,p,s,rule,L,delta,rho,estimate,stderr,n,seed
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub p: f64,
    pub s: f64,
    pub rule: String,
    pub l: i32,
    pub delta: f64,
    pub rho: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub spec: ExperimentSpec,
    pub spec_hash: String,
    pub rows: Vec<EstimateRow>,
    pub gates: Vec<GateResult>,
    /// Wall-clock runtime; informational only, excluded from determinism
    /// comparisons.
    pub runtime_secs: f64,
    pub version: String,
}

impl ResultRecord {
    pub fn new(spec: ExperimentSpec, rows: Vec<EstimateRow>, gates: Vec<GateResult>) -> Self {
        let spec_hash = spec.hash();
        ResultRecord {
            spec,
            spec_hash,
            rows,
            gates,
            runtime_secs: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn all_gates_pass(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// Equality of the scientific content (everything but the runtime).
    pub fn same_results(&self, other: &ResultRecord) -> bool {
        self.spec == other.spec
            && self.spec_hash == other.spec_hash
            && self.rows == other.rows
            && self.gates == other.gates
    }
}

pub const CSV_HEADER: &str = "quantity,p,s,rule,L,delta,rho,estimate,stderr,n,seed";

/// Frozen-order CSV of the estimate rows.
pub fn render_csv(record: &ResultRecord) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.quantity, r.p, r.s, r.rule, r.l, r.delta, r.rho, r.estimate, r.stderr, r.n, r.seed
        ));
    }
    out
}

/// Human-readable summary with one line per gate.
pub fn render_summary(record: &ResultRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "experiment: {}\nspec hash: {}\nrows: {}\n",
        record.spec.kind.name(),
        record.spec_hash,
        record.rows.len()
    ));
    for g in &record.gates {
        out.push_str(&format!(
            "  [{}] {} (threshold {}, observed {})\n",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.threshold,
            g.observed
        ));
    }
    out.push_str(&format!(
        "gates: {}/{} passed\n",
        record.gates.iter().filter(|g| g.passed).count(),
        record.gates.len()
    ));
    out
}

pub fn render_json(record: &ResultRecord) -> String {
    serde_json::to_string_pretty(record).expect("record serializes")
}

pub fn parse_json(text: &str) -> enhperc_core::Result<ResultRecord> {
    serde_json::from_str(text).map_err(|e| enhperc_core::Error::Parse(format!("record json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentKind;

    fn record() -> ResultRecord {
        let spec = ExperimentSpec {
            kind: ExperimentKind::CrossingVsCardy,
            ..ExperimentSpec::default()
        };
        ResultRecord::new(
            spec,
            vec![EstimateRow {
                quantity: "crossing-plain".into(),
                p: 0.5,
                s: 0.0,
                rule: "none".into(),
                l: 0,
                delta: 0.0078125,
                rho: 1.0,
                estimate: 0.501,
                stderr: 0.005,
                n: 10_000,
                seed: 7,
            }],
            vec![GateResult::new("demo", true, "<= 0.02", "0.001")],
        )
    }

    #[test]
    fn empty_grid_renders_header_only() {
        let mut r = record();
        r.rows.clear();
        assert_eq!(render_csv(&r), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let r = record();
        assert_eq!(render_csv(&r), render_csv(&r));
        assert_eq!(render_summary(&r), render_summary(&r));
        assert_eq!(render_json(&r), render_json(&r));
    }

    #[test]
    fn json_roundtrips_through_schema() {
        let r = record();
        let back = parse_json(&render_json(&r)).unwrap();
        assert!(r.same_results(&back));
        assert_eq!(r.runtime_secs, back.runtime_secs);
    }
}
