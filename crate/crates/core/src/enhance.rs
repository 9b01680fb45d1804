//! Finite-range enhancement rules and the essentiality decision procedure.
//!
//! An enhancement function φ maps a configuration restricted to the ball
//! B(R₀) around the origin to a set of sites inside that ball to open; it is
//! applied at every activated site by translation. The point reduction Φ has
//! range 2R₀, adds at most the origin, fires iff some φ_x with x inside the
//! ball would open the origin, and produces the same full (s = 1)
//! enhancement as φ.
//!
//! Essentiality of a monotone rule under percolation graph G is decided by
//! enumerating self-repelling paths σ through the origin on the matching
//! partner of G whose two arms exit B(2R₀) and are mutually nonadjacent
//! except at the origin. The rule is essential iff Φ opens the origin in the
//! configuration "all of B(2R₀) open except the sites of σ": opening the
//! origin there joins two infinite open arms across the blocking path into a
//! doubly-infinite self-repelling path, and monotonicity makes the converse
//! construction exhaustive over exactly these σ.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::fields::SiteField;
use crate::lattice::{Adjacency, LatticeKind, LatticeModel, Site};
use crate::{Error, Result};

/// A finite-range enhancement rule on one lattice, judged against the
/// declared percolation adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementRule {
    pub id: String,
    pub lattice: LatticeKind,
    /// Percolation adjacency the enhanced process lives on.
    pub graph: Adjacency,
    /// Enhancement range R₀ (Euclidean, in lattice units).
    pub radius: f64,
    pub kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RuleKind {
    /// Open the origin when at least `m` of its lattice neighbors are open.
    MOfNeighbors { m: u32 },
    /// Open the origin when its north, east and west neighbors are open
    /// (square lattice).
    NorthEastWest,
    /// Explicit truth table over the ball.
    Table(RuleTable),
}

/// Truth table: configurations that add sites, everything else adds none.
/// Ball order is the documented one produced by [`LatticeModel::ball`]: by
/// squared distance from the origin, then angle counterclockwise from +x,
/// then coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleTable {
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Ball configuration as a 0/1 string in ball order.
    pub open: String,
    /// Indices (into the ball) of the sites the rule opens.
    pub adds: Vec<u8>,
}

impl RuleTable {
    fn lookup(&self, mask: u64) -> &[u8] {
        for e in &self.entries {
            let mut emask = 0u64;
            for (i, c) in e.open.bytes().enumerate() {
                if c == b'1' {
                    emask |= 1 << i;
                }
            }
            if emask == mask {
                return &e.adds;
            }
        }
        &[]
    }
}

impl EnhancementRule {
    pub fn model(&self) -> LatticeModel {
        LatticeModel::unit(self.lattice)
    }

    /// The ball B(R₀) the rule reads and may open, origin first.
    pub fn ball(&self) -> Vec<Site> {
        self.model().ball(Site::ORIGIN, self.radius)
    }

    /// φ at the origin, as the set of origin-frame sites to open.
    pub fn local_add(&self, is_open: &dyn Fn(Site) -> bool) -> Vec<Site> {
        let model = self.model();
        match &self.kind {
            RuleKind::MOfNeighbors { m } => {
                let open = model
                    .neighbors(Site::ORIGIN)
                    .into_iter()
                    .filter(|&n| is_open(n))
                    .count() as u32;
                if open >= *m {
                    vec![Site::ORIGIN]
                } else {
                    Vec::new()
                }
            }
            RuleKind::NorthEastWest => {
                if is_open(Site::new(0, 1)) && is_open(Site::new(1, 0)) && is_open(Site::new(-1, 0))
                {
                    vec![Site::ORIGIN]
                } else {
                    Vec::new()
                }
            }
            RuleKind::Table(table) => {
                let ball = self.ball();
                let mut mask = 0u64;
                for (i, &s) in ball.iter().enumerate() {
                    if is_open(s) {
                        mask |= 1 << i;
                    }
                }
                table
                    .lookup(mask)
                    .iter()
                    .map(|&i| ball[i as usize])
                    .collect()
            }
        }
    }

    /// Map a global site into the origin frame of an application at `x`.
    /// Translating by a down-parity hexagonal site composes the shift with
    /// the edge-midpoint inversion (the automorphism swapping the two
    /// sublattices), so every lattice site gets a frame; the map is an
    /// involution in both parities.
    #[inline]
    pub fn to_frame(x: Site, s: Site) -> Site {
        if x.parity == 0 {
            Site {
                q: s.q - x.q,
                r: s.r - x.r,
                parity: s.parity,
            }
        } else {
            Site {
                q: x.q - s.q,
                r: x.r - s.r,
                parity: 1 - s.parity,
            }
        }
    }

    #[inline]
    pub fn from_frame(x: Site, t: Site) -> Site {
        if x.parity == 0 {
            Site {
                q: t.q + x.q,
                r: t.r + x.r,
                parity: t.parity,
            }
        } else {
            Site {
                q: x.q - t.q,
                r: x.r - t.r,
                parity: 1 - t.parity,
            }
        }
    }

    /// φ_x against a field (the window's boundary policy resolves ball
    /// overhang); returns global sites to open.
    pub fn add_at(&self, field: &SiteField, x: Site) -> Vec<Site> {
        let is_open = |t: Site| field.open(Self::from_frame(x, t));
        self.local_add(&is_open)
            .into_iter()
            .map(|t| Self::from_frame(x, t))
            .collect()
    }
}

/// The named rules of the catalog: m-of-neighbors on each lattice and the
/// square-lattice north/east/west rule, each under lattice or star
/// percolation adjacency (the triangular lattice is self-matching, so it
/// gets a single variant).
pub fn builtin_rules() -> Vec<EnhancementRule> {
    let mut out = Vec::new();
    let mk_m = |lattice: LatticeKind, graph: Adjacency, m: u32| {
        let prefix = match lattice {
            LatticeKind::Square => "sq",
            LatticeKind::Triangular => "tri",
            LatticeKind::Hexagonal => "hex",
        };
        let suffix = match (lattice, graph) {
            (LatticeKind::Triangular, _) => "",
            (_, Adjacency::Star) => "-star",
            _ => "-l",
        };
        EnhancementRule {
            id: format!("{prefix}-m{m}{suffix}"),
            lattice,
            graph,
            radius: 1.0,
            kind: RuleKind::MOfNeighbors { m },
        }
    };
    for m in 0..=6 {
        out.push(mk_m(LatticeKind::Triangular, Adjacency::Lattice, m));
    }
    for m in 0..=4 {
        out.push(mk_m(LatticeKind::Square, Adjacency::Lattice, m));
        out.push(mk_m(LatticeKind::Square, Adjacency::Star, m));
    }
    for m in 0..=3 {
        out.push(mk_m(LatticeKind::Hexagonal, Adjacency::Lattice, m));
        out.push(mk_m(LatticeKind::Hexagonal, Adjacency::Star, m));
    }
    for (id, graph) in [
        ("sq-new-l", Adjacency::Lattice),
        ("sq-new-star", Adjacency::Star),
    ] {
        out.push(EnhancementRule {
            id: id.into(),
            lattice: LatticeKind::Square,
            graph,
            radius: 1.0,
            kind: RuleKind::NorthEastWest,
        });
    }
    out
}

/// Look a rule up by its catalog id.
pub fn builtin(id: &str) -> Result<EnhancementRule> {
    builtin_rules()
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| Error::Parse(format!("unknown rule id {id:?}")))
}

/// Outcome of the exhaustive monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MonotoneVerdict {
    Yes,
    /// φ(open) ⊄ φ(open ∪ {flip}).
    Counterexample { open: Vec<Site>, flip: Site },
}

fn add_mask(rule: &EnhancementRule, ball: &[Site], mask: u64) -> u64 {
    let is_open = |s: Site| {
        ball.iter()
            .position(|&b| b == s)
            .map(|i| mask >> i & 1 == 1)
            .unwrap_or(false)
    };
    let mut out = 0u64;
    for s in rule.local_add(&is_open) {
        let i = ball
            .iter()
            .position(|&b| b == s)
            .expect("rule output stays inside its ball");
        out |= 1 << i;
    }
    out
}

/// Exhaustively verify monotonicity over all single-site flips of ball
/// configurations. Errors when the ball is too large for exhaustion.
pub fn check_monotone(rule: &EnhancementRule, cap_bits: u32) -> Result<MonotoneVerdict> {
    let ball = rule.ball();
    if ball.len() as u32 > cap_bits {
        return Err(Error::Capability(format!(
            "ball has {} sites; exhaustive monotonicity capped at {cap_bits} bits (use the sampled check)",
            ball.len()
        )));
    }
    let n = ball.len();
    for mask in 0u64..(1 << n) {
        let base = add_mask(rule, &ball, mask);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                continue;
            }
            let bigger = add_mask(rule, &ball, mask | (1 << i));
            if base & !bigger != 0 {
                let open = ball
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, &s)| s)
                    .collect();
                return Ok(MonotoneVerdict::Counterexample {
                    open,
                    flip: ball[i],
                });
            }
        }
    }
    Ok(MonotoneVerdict::Yes)
}

/// Sampled fallback for large balls: reports a concrete counterexample or
/// "none found" (which proves nothing).
pub fn check_monotone_sampled(
    rule: &EnhancementRule,
    samples: usize,
    seed: u64,
) -> Option<MonotoneVerdict> {
    let ball = rule.ball();
    let n = ball.len();
    let key = crate::rng::StreamKey::new(seed, crate::rng::Stream::Aux(0xB0));
    for t in 0..samples {
        let mask = key.index_u64(t as u64) & ((1u64 << n) - 1);
        let flip = key.index_below((t as u64) ^ 0x5555, n as u64) as usize;
        if mask >> flip & 1 == 1 {
            continue;
        }
        let base = add_mask(rule, &ball, mask);
        let bigger = add_mask(rule, &ball, mask | (1 << flip));
        if base & !bigger != 0 {
            let open = ball
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            return Some(MonotoneVerdict::Counterexample {
                open,
                flip: ball[flip],
            });
        }
    }
    None
}

/// The point reduction Φ: range 2R₀, fires (adds the origin) iff some φ_x
/// with x in B(R₀) opens the origin.
#[derive(Debug, Clone)]
pub struct PointRule {
    pub source: EnhancementRule,
    pub radius: f64,
    centers: Vec<Site>,
}

impl PointRule {
    /// Φ_o(ω) = {o}?
    pub fn fires(&self, is_open: &dyn Fn(Site) -> bool) -> bool {
        self.centers.iter().any(|&x| {
            let local = |t: Site| is_open(EnhancementRule::from_frame(x, t));
            self.source
                .local_add(&local)
                .into_iter()
                .any(|t| EnhancementRule::from_frame(x, t) == Site::ORIGIN)
        })
    }

    /// Φ_x against a field.
    pub fn fires_at(&self, field: &SiteField, x: Site) -> bool {
        let is_open = |t: Site| field.open(EnhancementRule::from_frame(x, t));
        self.fires(&is_open)
    }
}

/// Build Φ from φ.
pub fn reduce_to_point(rule: &EnhancementRule) -> PointRule {
    PointRule {
        centers: rule.ball(),
        radius: 2.0 * rule.radius,
        source: rule.clone(),
    }
}

/// Flattened in-window neighbor lists for one (model, window) pair, with
/// the count of out-of-window neighbors the boundary policy forces open.
/// Used by the fast evaluation path of neighbor-counting rules.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
    pub forced_open: Vec<u8>,
}

pub fn neighbor_index(model: &LatticeModel, window: &crate::lattice::Window) -> NeighborIndex {
    let kind = model.kind;
    let n = window.len(kind);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::new();
    let mut forced_open = vec![0u8; n];
    offsets.push(0);
    for idx in 0..n {
        let s = window.site_at(kind, idx);
        for nb in model.neighbors(s) {
            match window.resolve(kind, nb) {
                crate::lattice::Resolved::In(j) => targets.push(j as u32),
                crate::lattice::Resolved::Forced(true) => forced_open[idx] += 1,
                crate::lattice::Resolved::Forced(false) => {}
            }
        }
        offsets.push(targets.len() as u32);
    }
    NeighborIndex {
        offsets,
        targets,
        forced_open,
    }
}

/// Fast application of an m-of-neighbors rule: identical to
/// [`apply_enhancement`] for `RuleKind::MOfNeighbors`, with `alpha = None`
/// meaning α ≡ 1 (the full enhancement).
pub fn apply_m_rule_fast(
    eta: &SiteField,
    alpha: Option<&[u8]>,
    m: u32,
    nbr: &NeighborIndex,
) -> SiteField {
    let mut out = eta.clone();
    for idx in 0..eta.bits.len() {
        if eta.bits[idx] != 0 {
            continue;
        }
        if let Some(a) = alpha {
            if a[idx] == 0 {
                continue;
            }
        }
        let lo = nbr.offsets[idx] as usize;
        let hi = nbr.offsets[idx + 1] as usize;
        let mut open = nbr.forced_open[idx] as u32;
        for &j in &nbr.targets[lo..hi] {
            open += eta.bits[j as usize] as u32;
        }
        if open >= m {
            out.bits[idx] = 1;
        }
    }
    out
}

/// ω̂ = ω ∪ ⋃_{x: α(x)=1} φ_x(ω). Every φ_x is evaluated against the
/// original ω; there is no chaining. Sites opened outside the window are
/// dropped.
pub fn apply_enhancement(
    eta: &SiteField,
    alpha: &SiteField,
    rule: &EnhancementRule,
) -> Result<SiteField> {
    if eta.window != alpha.window {
        return Err(Error::WindowMismatch(
            "η and α live on different windows".into(),
        ));
    }
    if eta.model.kind != rule.lattice {
        return Err(Error::Unsupported(format!(
            "rule {} is for the {} lattice",
            rule.id,
            rule.lattice.name()
        )));
    }
    let kind = eta.model.kind;
    let mut out = eta.clone();
    for idx in 0..alpha.bits.len() {
        if alpha.bits[idx] == 0 {
            continue;
        }
        let x = eta.window.site_at(kind, idx);
        for s in rule.add_at(eta, x) {
            if let Some(j) = eta.window.index(kind, s) {
                out.bits[j] = 1;
            }
        }
    }
    Ok(out)
}

/// ω̃: the deterministic enhancement with density s = 1.
pub fn full_enhancement(eta: &SiteField, rule: &EnhancementRule) -> Result<SiteField> {
    let alpha = SiteField::constant(eta.model, eta.window, true);
    apply_enhancement(eta, &alpha, rule)
}

/// ω̃ computed through the point reduction Φ instead of φ — an independent
/// route that must agree with [`full_enhancement`] sitewise.
pub fn full_enhancement_via_point(eta: &SiteField, rule: &EnhancementRule) -> Result<SiteField> {
    if eta.model.kind != rule.lattice {
        return Err(Error::Unsupported(format!(
            "rule {} is for the {} lattice",
            rule.id,
            rule.lattice.name()
        )));
    }
    let phi = reduce_to_point(rule);
    let kind = eta.model.kind;
    let mut out = eta.clone();
    for idx in 0..eta.bits.len() {
        if out.bits[idx] == 0 && phi.fires_at(eta, eta.window.site_at(kind, idx)) {
            out.bits[idx] = 1;
        }
    }
    Ok(out)
}

/// How an essentiality verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMethod {
    Exhaustive,
    Pruned,
}

/// A positive witness: the blocking path σ through the origin and the ball
/// configuration on which Φ fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// σ in path order, including the origin and the two exit sites.
    pub sigma: Vec<Site>,
    /// First sites outside B(2R₀) on each arm.
    pub arm_exits: (Site, Site),
    /// The closed sites of the witness configuration (σ ∩ B(2R₀)).
    pub closed: Vec<Site>,
    /// Ball B(2R₀) in documented order; everything not in `closed` is open.
    pub ball: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialityVerdict {
    pub rule_id: String,
    pub essential: bool,
    pub witness: Option<Witness>,
    pub method: DecisionMethod,
    pub candidates: usize,
}

/// Caps for the decision procedure.
#[derive(Debug, Clone, Copy)]
pub struct EssentialityOptions {
    /// Abort (capability error) once enumeration passes this many nodes.
    pub max_candidates: usize,
    /// Ball-size cap for the exhaustive monotonicity pre-check.
    pub monotone_cap_bits: u32,
}

impl Default for EssentialityOptions {
    fn default() -> Self {
        EssentialityOptions {
            max_candidates: 5_000_000,
            monotone_cap_bits: 20,
        }
    }
}

struct ArmEnumerator<'a> {
    model: &'a LatticeModel,
    co: Adjacency,
    ball: &'a HashSet<Site>,
    budget: usize,
    count: usize,
}

impl ArmEnumerator<'_> {
    /// All self-avoiding co-paths starting at `first` whose interior stays
    /// in the ball and whose last site is the first one outside, pruned so
    /// every site is nonadjacent to the rest of σ built so far.
    fn arms_from(&mut self, first: Site, blocked: &[Site]) -> Result<Vec<Vec<Site>>> {
        let mut out = Vec::new();
        let mut arm = vec![first];
        self.extend(&mut arm, blocked, &mut out)?;
        Ok(out)
    }

    fn extend(
        &mut self,
        arm: &mut Vec<Site>,
        blocked: &[Site],
        out: &mut Vec<Vec<Site>>,
    ) -> Result<()> {
        self.count += 1;
        if self.count > self.budget {
            return Err(Error::Capability(
                "σ enumeration exceeded the configured cap".into(),
            ));
        }
        let tip = *arm.last().unwrap();
        if !self.ball.contains(&tip) {
            out.push(arm.clone());
            return Ok(());
        }
        for next in self.model.neighbors_under(self.co, tip) {
            // self-repelling: a new site may touch only its predecessor
            let ok_arm = arm[..arm.len() - 1]
                .iter()
                .all(|&s| s != next && !self.model.adjacent(self.co, s, next));
            let ok_blocked = blocked
                .iter()
                .all(|&s| s != next && !self.model.adjacent(self.co, s, next));
            if ok_arm && ok_blocked {
                arm.push(next);
                self.extend(arm, blocked, out)?;
                arm.pop();
            }
        }
        Ok(())
    }
}

/// Decide whether a monotone rule is essential. Non-monotone rules are
/// rejected: the criterion is proven only for monotone enhancements.
pub fn check_essential(
    rule: &EnhancementRule,
    opts: EssentialityOptions,
) -> Result<EssentialityVerdict> {
    match check_monotone(rule, opts.monotone_cap_bits)? {
        MonotoneVerdict::Yes => {}
        MonotoneVerdict::Counterexample { flip, .. } => {
            return Err(Error::NotMonotone { site: flip });
        }
    }
    if rule.graph == Adjacency::Dual {
        return Err(Error::Unsupported(
            "percolation graph must be lattice or star".into(),
        ));
    }

    let model = rule.model();
    let phi = reduce_to_point(rule);
    let ball: Vec<Site> = model.ball(Site::ORIGIN, 2.0 * rule.radius);
    let ball_set: HashSet<Site> = ball.iter().copied().collect();
    let co = rule.graph.matching_partner();

    let origin_nbrs = model.neighbors_under(co, Site::ORIGIN);
    let mut best: Option<(usize, Vec<Site>, Witness)> = None;
    let mut candidates = 0usize;
    let mut en = ArmEnumerator {
        model: &model,
        co,
        ball: &ball_set,
        budget: opts.max_candidates,
        count: 0,
    };

    for i in 0..origin_nbrs.len() {
        let arms1 = en.arms_from(origin_nbrs[i], &[Site::ORIGIN])?;
        for arm1 in &arms1 {
            // arm two starts at a later neighbor (σ is orientation-free) and
            // must stay off and away from arm one and the origin
            let mut blocked2 = vec![Site::ORIGIN];
            blocked2.extend(arm1.iter().copied());
            for &start2 in origin_nbrs.iter().skip(i + 1) {
                if arm1
                    .iter()
                    .any(|&s| s == start2 || model.adjacent(co, s, start2))
                {
                    continue;
                }
                let arms2 = en.arms_from(start2, &blocked2)?;
                for arm2 in &arms2 {
                    candidates += 1;
                    let mut sigma: Vec<Site> = arm1.iter().rev().copied().collect();
                    sigma.push(Site::ORIGIN);
                    sigma.extend(arm2.iter().copied());
                    let closed: HashSet<Site> = sigma
                        .iter()
                        .copied()
                        .filter(|s| ball_set.contains(s))
                        .collect();
                    let is_open = |s: Site| ball_set.contains(&s) && !closed.contains(&s);
                    if phi.fires(&is_open) {
                        let mut closed_sorted: Vec<Site> = closed.iter().copied().collect();
                        closed_sorted.sort();
                        let wit = Witness {
                            sigma: sigma.clone(),
                            arm_exits: (*arm1.last().unwrap(), *arm2.last().unwrap()),
                            closed: closed_sorted,
                            ball: ball.clone(),
                        };
                        // smallest witness wins: total length, then lexicographic
                        let better = match &best {
                            None => true,
                            Some((len, s, _)) => (sigma.len(), &sigma) < (*len, s),
                        };
                        if better {
                            best = Some((sigma.len(), sigma.clone(), wit));
                        }
                    }
                }
            }
        }
    }

    Ok(EssentialityVerdict {
        rule_id: rule.id.clone(),
        essential: best.is_some(),
        witness: best.map(|(_, _, w)| w),
        method: DecisionMethod::Exhaustive,
        candidates,
    })
}

/// Re-run Φ on a stored witness configuration; positive verdicts replay.
pub fn replay_witness(rule: &EnhancementRule, witness: &Witness) -> bool {
    let phi = reduce_to_point(rule);
    let ball: HashSet<Site> = witness.ball.iter().copied().collect();
    let closed: HashSet<Site> = witness.closed.iter().copied().collect();
    let is_open = |s: Site| ball.contains(&s) && !closed.contains(&s);
    phi.fires(&is_open)
}

/// Serializable rule-file payload; the CLI reads and writes it as TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSpec {
    pub lattice: LatticeKind,
    pub graph: Adjacency,
    pub radius: f64,
    pub rule: RuleKind,
    #[serde(default)]
    pub id: Option<String>,
}

impl RuleSpec {
    pub fn into_rule(self) -> Result<EnhancementRule> {
        let rule = EnhancementRule {
            id: self.id.unwrap_or_else(|| "custom".into()),
            lattice: self.lattice,
            graph: self.graph,
            radius: self.radius,
            kind: self.rule,
        };
        if rule.radius <= 0.0 || !rule.radius.is_finite() {
            return Err(Error::Parse("rule radius must be positive".into()));
        }
        if let RuleKind::Table(table) = &rule.kind {
            let ball = rule.ball();
            if ball.len() > 63 {
                return Err(Error::Capability(format!(
                    "table ball has {} sites; at most 63 supported",
                    ball.len()
                )));
            }
            for e in &table.entries {
                if e.open.len() != ball.len() {
                    return Err(Error::Parse(format!(
                        "entry mask {:?} has {} bits; ball has {} sites",
                        e.open,
                        e.open.len(),
                        ball.len()
                    )));
                }
                if e.open.bytes().any(|c| c != b'0' && c != b'1') {
                    return Err(Error::Parse(format!("entry mask {:?} is not 0/1", e.open)));
                }
                if e.adds.iter().any(|&i| i as usize >= ball.len()) {
                    return Err(Error::Parse("table adds index outside the ball".into()));
                }
            }
        }
        Ok(rule)
    }

    pub fn from_rule(rule: &EnhancementRule) -> RuleSpec {
        RuleSpec {
            lattice: rule.lattice,
            graph: rule.graph,
            radius: rule.radius,
            rule: rule.kind.clone(),
            id: Some(rule.id.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_activation, sample_site_field};
    use crate::lattice::{Boundary, Window};

    fn tri_m(m: u32) -> EnhancementRule {
        builtin(&format!("tri-m{m}")).unwrap()
    }

    fn window() -> Window {
        Window::centered(8, Boundary::ClosedExterior)
    }

    #[test]
    fn catalog_contains_the_reference_rules() {
        assert_eq!(tri_m(6).radius, 1.0);
        assert!(builtin("sq-new-l").is_ok());
        assert!(builtin("sq-new-star").is_ok());
        assert!(builtin("nope").is_err());
        // m = 0 degenerate rule adds the origin on any configuration
        assert_eq!(tri_m(0).local_add(&|_| false), vec![Site::ORIGIN]);
    }

    #[test]
    fn m_rules_and_new_rule_are_monotone() {
        for id in ["tri-m6", "tri-m3", "sq-new-l", "sq-new-star", "hex-m2-l"] {
            let rule = builtin(id).unwrap();
            assert_eq!(check_monotone(&rule, 20).unwrap(), MonotoneVerdict::Yes);
            assert!(check_monotone_sampled(&rule, 2000, 1).is_none());
        }
    }

    #[test]
    fn all_neighbors_closed_rule_is_not_monotone() {
        // the classic nonmonotone example: a closed site is made open only
        // if all of its neighbors are closed
        let model = LatticeModel::unit(LatticeKind::Square);
        let ball = model.ball(Site::ORIGIN, 1.0);
        let entries = vec![
            TableEntry {
                open: "0".repeat(ball.len()),
                adds: vec![0],
            },
            TableEntry {
                open: {
                    let mut s = "0".repeat(ball.len());
                    s.replace_range(0..1, "1");
                    s
                },
                adds: vec![0],
            },
        ];
        let rule = EnhancementRule {
            id: "sq-all-closed".into(),
            lattice: LatticeKind::Square,
            graph: Adjacency::Lattice,
            radius: 1.0,
            kind: RuleKind::Table(RuleTable { entries }),
        };
        match check_monotone(&rule, 20).unwrap() {
            MonotoneVerdict::Counterexample { open, flip } => {
                assert!(!open.contains(&flip));
            }
            MonotoneVerdict::Yes => panic!("rule must fail monotonicity"),
        }
        assert!(matches!(
            check_essential(&rule, EssentialityOptions::default()),
            Err(Error::NotMonotone { .. })
        ));
    }

    #[test]
    fn point_rule_of_m_rule_matches_phi_on_balls() {
        // tri-m adds only the origin, so Φ ≡ φ on ball restrictions
        let rule = tri_m(4);
        let phi = reduce_to_point(&rule);
        let ball = rule.ball();
        for mask in 0u64..(1 << ball.len()) {
            let is_open = |s: Site| {
                ball.iter()
                    .position(|&b| b == s)
                    .map(|i| mask >> i & 1 == 1)
                    .unwrap_or(false)
            };
            assert_eq!(
                phi.fires(&is_open),
                rule.local_add(&is_open).contains(&Site::ORIGIN),
                "mask {mask:#b}"
            );
        }
    }

    #[test]
    fn never_adding_rule_reduces_to_empty_point_rule() {
        let rule = EnhancementRule {
            id: "null".into(),
            lattice: LatticeKind::Triangular,
            graph: Adjacency::Lattice,
            radius: 1.0,
            kind: RuleKind::Table(RuleTable::default()),
        };
        let phi = reduce_to_point(&rule);
        assert!(!phi.fires(&|_| true));
        assert!(!phi.fires(&|_| false));
    }

    #[test]
    fn zero_activation_is_identity() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let eta = sample_site_field(model, window(), 0.5, 7);
        let alpha = SiteField::constant(model, window(), false);
        let enhanced = apply_enhancement(&eta, &alpha, &tri_m(2)).unwrap();
        assert_eq!(enhanced.bits, eta.bits);
    }

    #[test]
    fn enhancement_contains_the_original() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        for seed in 0..20 {
            let eta = sample_site_field(model, window(), 0.4, seed);
            let alpha = sample_activation(model, window(), 0.6, seed);
            let enhanced = apply_enhancement(&eta, &alpha, &tri_m(3)).unwrap();
            assert!(eta.subset_of(&enhanced));
        }
    }

    #[test]
    fn m6_opens_a_surrounded_site() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let mut eta = SiteField::constant(model, window(), false);
        let x = Site::new(1, 1);
        for n in model.neighbors(x) {
            let i = window().index(model.kind, n).unwrap();
            eta.bits[i] = 1;
        }
        let mut alpha = SiteField::constant(model, window(), false);
        alpha.bits[window().index(model.kind, x).unwrap()] = 1;
        let enhanced = apply_enhancement(&eta, &alpha, &tri_m(6)).unwrap();
        assert!(enhanced.open(x));
        assert_eq!(enhanced.count_open(), eta.count_open() + 1);
    }

    #[test]
    fn full_enhancement_sandwich_and_point_route_agree() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let rule = tri_m(5);
        for seed in 0..50 {
            let eta = sample_site_field(model, window(), 0.45, seed);
            let alpha = sample_activation(model, window(), 0.5, seed);
            let hat = apply_enhancement(&eta, &alpha, &rule).unwrap();
            let tilde = full_enhancement(&eta, &rule).unwrap();
            assert!(eta.subset_of(&hat));
            assert!(hat.subset_of(&tilde));
            let tilde2 = full_enhancement_via_point(&eta, &rule).unwrap();
            assert_eq!(tilde.bits, tilde2.bits, "Φ and φ full enhancements differ");
        }
    }

    #[test]
    fn all_open_field_stays_all_open() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let eta = SiteField::constant(model, window(), true);
        let tilde = full_enhancement(&eta, &tri_m(1)).unwrap();
        assert_eq!(tilde.count_open(), eta.count_open());
    }

    #[test]
    fn alpha_monotonicity() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let rule = tri_m(3);
        for seed in 0..20 {
            let eta = sample_site_field(model, window(), 0.4, seed);
            let lo = sample_activation(model, window(), 0.3, seed);
            let mut hi = lo.clone();
            let extra = sample_activation(model, window(), 0.3, seed + 1000);
            for i in 0..hi.bits.len() {
                hi.bits[i] |= extra.bits[i];
            }
            let a = apply_enhancement(&eta, &lo, &rule).unwrap();
            let b = apply_enhancement(&eta, &hi, &rule).unwrap();
            assert!(a.subset_of(&b));
        }
    }

    #[test]
    fn translation_covariance_on_random_fields() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let rule = tri_m(4);
        let eta = sample_site_field(model, window(), 0.5, 99);
        for x in [Site::new(2, -1), Site::new(-3, 2), Site::new(0, 4)] {
            let via_frame = rule.add_at(&eta, x);
            let shifted = |t: Site| eta.open(t.offset(x.q, x.r));
            let manual: Vec<Site> = rule
                .local_add(&shifted)
                .into_iter()
                .map(|t| t.offset(x.q, x.r))
                .collect();
            assert_eq!(via_frame, manual, "at {x:?}");
        }
    }

    #[test]
    fn hex_frames_are_involutive_automorphisms() {
        let model = LatticeModel::unit(LatticeKind::Hexagonal);
        let x = Site::hex(2, -1, 1);
        for s in model.neighbors(Site::hex(0, 1, 0)) {
            let t = EnhancementRule::to_frame(x, s);
            assert_eq!(EnhancementRule::from_frame(x, t), s);
        }
        // adjacency is preserved through the frame
        let a = Site::hex(0, 0, 0);
        for b in model.neighbors(a) {
            let fa = EnhancementRule::to_frame(x, a);
            let fb = EnhancementRule::to_frame(x, b);
            assert!(model.adjacent(Adjacency::Lattice, fa, fb));
        }
    }

    #[test]
    fn locality_perturbation_outside_ball_is_invisible() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let rule = tri_m(2);
        let x = Site::new(0, 0);
        let eta = sample_site_field(model, window(), 0.5, 5);
        let base = rule.add_at(&eta, x);
        let ball: std::collections::HashSet<Site> =
            model.ball(x, rule.radius).into_iter().collect();
        let mut perturbed = eta.clone();
        for idx in 0..perturbed.bits.len() {
            let s = window().site_at(model.kind, idx);
            if !ball.contains(&s) {
                perturbed.bits[idx] ^= 1;
            }
        }
        assert_eq!(rule.add_at(&perturbed, x), base);
    }

    #[test]
    fn classification_of_triangular_m_rules() {
        for m in 0..=4 {
            let v = check_essential(&tri_m(m), EssentialityOptions::default()).unwrap();
            assert!(v.essential, "tri-m{m} must be essential");
            let w = v.witness.expect("essential verdicts carry a witness");
            assert!(replay_witness(&tri_m(m), &w), "witness must replay");
        }
        for m in 5..=6 {
            let v = check_essential(&tri_m(m), EssentialityOptions::default()).unwrap();
            assert!(!v.essential, "tri-m{m} must be nonessential");
            assert!(v.witness.is_none());
        }
    }

    #[test]
    fn classification_of_square_new_rule() {
        let l = builtin("sq-new-l").unwrap();
        let v = check_essential(&l, EssentialityOptions::default()).unwrap();
        assert!(v.essential, "NEW under lattice adjacency is essential");
        assert!(replay_witness(&l, &v.witness.unwrap()));

        let star = builtin("sq-new-star").unwrap();
        let v = check_essential(&star, EssentialityOptions::default()).unwrap();
        assert!(!v.essential, "NEW under * adjacency is nonessential");
    }

    #[test]
    fn enumeration_cap_is_a_hard_error() {
        let err = check_essential(
            &tri_m(1),
            EssentialityOptions {
                max_candidates: 3,
                monotone_cap_bits: 20,
            },
        );
        assert!(matches!(err, Err(Error::Capability(_))));
    }

    #[test]
    fn window_mismatch_is_rejected() {
        let model = LatticeModel::unit(LatticeKind::Triangular);
        let eta = sample_site_field(model, window(), 0.5, 1);
        let alpha = sample_activation(model, Window::centered(4, Boundary::Free), 0.5, 1);
        assert!(apply_enhancement(&eta, &alpha, &tri_m(1)).is_err());
    }

    #[test]
    fn fast_m_rule_path_matches_generic_application() {
        for kind in [LatticeKind::Triangular, LatticeKind::Square] {
            let model = LatticeModel::unit(kind);
            for boundary in [
                Boundary::Free,
                Boundary::ClosedExterior,
                Boundary::OpenExterior,
                Boundary::Torus,
            ] {
                let w = Window::new(-5, -5, 11, 11, boundary);
                let nbr = neighbor_index(&model, &w);
                let max_m = kind.degree() as u32;
                for m in [1, max_m / 2 + 1, max_m] {
                    let rule = EnhancementRule {
                        id: format!("test-m{m}"),
                        lattice: kind,
                        graph: Adjacency::Lattice,
                        radius: 1.0,
                        kind: RuleKind::MOfNeighbors { m },
                    };
                    for seed in 0..5 {
                        let eta = sample_site_field(model, w, 0.45, seed);
                        let alpha = sample_activation(model, w, 0.5, seed);
                        let slow = apply_enhancement(&eta, &alpha, &rule).unwrap();
                        let fast = apply_m_rule_fast(&eta, Some(&alpha.bits), m, &nbr);
                        assert_eq!(slow.bits, fast.bits, "{kind:?} {boundary:?} m={m}");
                        let slow_full = full_enhancement(&eta, &rule).unwrap();
                        let fast_full = apply_m_rule_fast(&eta, None, m, &nbr);
                        assert_eq!(slow_full.bits, fast_full.bits);
                    }
                }
            }
        }
    }

    #[test]
    fn rule_spec_roundtrips_and_validates() {
        let spec = RuleSpec::from_rule(&tri_m(6));
        let back = spec.into_rule().unwrap();
        assert_eq!(back.kind, tri_m(6).kind);

        let bad = RuleSpec {
            lattice: LatticeKind::Square,
            graph: Adjacency::Lattice,
            radius: 1.0,
            rule: RuleKind::Table(RuleTable {
                entries: vec![TableEntry {
                    open: "01".into(),
                    adds: vec![0],
                }],
            }),
            id: None,
        };
        assert!(bad.into_rule().is_err(), "mask length must match the ball");
    }
}
