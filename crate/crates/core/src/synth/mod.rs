//! Transactor synthesis: a depth-first search over pairs of states of two
//! complementary interface machines, keeping only transitions that move the
//! payload correctly and keep transaction boundaries aligned.
//!
//! `T` is the side the transactor presents to the initiating component (for
//! a cycle-accurate master: the complemented, delay-transformed bus target)
//! and `I` the side it presents to the responding component.

mod legality;
mod tfsm;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::dsl::PayloadMapping;
use crate::ifsm::{
    apply_delay_consumption, complement, strip_self_loops, validate, Action, CallOp, DelayGuard, Dir, InterfaceFsm,
    Level, Role, SignalDecl, SignalKind, TransformError, Transition, Violation,
};
use crate::StateId;

pub use legality::{check_data_legality, check_timing_legality, LegalityContext};
pub use tfsm::{parse_transactor, serialize_transactor};

/// A node of the product search: `p` in `T`, `q` in `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatePair {
    pub p: StateId,
    pub q: StateId,
}

impl StatePair {
    pub fn new(p: StateId, q: StateId) -> Self {
        StatePair { p, q }
    }
}

impl fmt::Display for StatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    T,
    I,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::T => "t",
            Side::I => "i",
        }
    }
}

/// One transition of the synthesized machine. Exactly one of `p`, `q`
/// changes (or neither, for a retained self-loop).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransactorEdge {
    pub from: StatePair,
    pub to: StatePair,
    pub side: Side,
    pub guard: Option<DelayGuard>,
    pub actions: Vec<Action>,
    /// Legality context after the edge fires.
    pub context: LegalityContext,
}

impl TransactorEdge {
    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }

    /// The component transition this edge was built from.
    pub fn component(&self) -> Transition {
        let (from, to) = match self.side {
            Side::T => (self.from.p, self.to.p),
            Side::I => (self.from.q, self.to.q),
        };
        Transition { from, to, guard: self.guard, actions: self.actions.clone() }
    }
}

impl fmt::Display for TransactorEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {}", self.from, self.to, self.side.as_str())?;
        if let Some(g) = self.guard {
            write!(f, " [{}]", g.keyword())?;
        }
        f.write_str(":")?;
        for (i, a) in self.actions.iter().enumerate() {
            write!(f, "{}{a}", if i == 0 { " " } else { ", " })?;
        }
        Ok(())
    }
}

/// Interface header of one side of a transactor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfo {
    pub name: String,
    pub role: Role,
    pub level: Level,
    pub clock_period_ns: Option<u64>,
    pub signals: Vec<SignalDecl>,
    pub fields: Vec<String>,
}

impl SideInfo {
    fn of(fsm: &InterfaceFsm) -> Self {
        SideInfo {
            name: fsm.name().to_string(),
            role: fsm.role(),
            level: fsm.level(),
            clock_period_ns: fsm.clock_period_ns(),
            signals: fsm.signals().to_vec(),
            fields: fsm.payload_fields().to_vec(),
        }
    }
}

/// The synthesized product machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactorFsm {
    name: String,
    t: SideInfo,
    i: SideInfo,
    mapping: PayloadMapping,
    pairs: BTreeSet<StatePair>,
    initial_pair: StatePair,
    final_pair: StatePair,
    edges: Vec<TransactorEdge>,
}

impl TransactorFsm {
    pub(crate) fn from_parts(
        name: String,
        t: SideInfo,
        i: SideInfo,
        mapping: PayloadMapping,
        initial_pair: StatePair,
        final_pair: StatePair,
        mut edges: Vec<TransactorEdge>,
    ) -> Self {
        edges.sort();
        edges.dedup();
        let mut pairs = BTreeSet::from([initial_pair, final_pair]);
        for e in &edges {
            pairs.insert(e.from);
            pairs.insert(e.to);
        }
        TransactorFsm { name, t, i, mapping, pairs, initial_pair, final_pair, edges }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn side(&self, side: Side) -> &SideInfo {
        match side {
            Side::T => &self.t,
            Side::I => &self.i,
        }
    }

    pub fn mapping(&self) -> &PayloadMapping {
        &self.mapping
    }

    pub fn pairs(&self) -> &BTreeSet<StatePair> {
        &self.pairs
    }

    pub fn initial_pair(&self) -> StatePair {
        self.initial_pair
    }

    pub fn final_pair(&self) -> StatePair {
        self.final_pair
    }

    pub fn edges(&self) -> &[TransactorEdge] {
        &self.edges
    }

    pub fn outgoing(&self, pair: StatePair) -> impl Iterator<Item = &TransactorEdge> + '_ {
        self.edges.iter().filter(move |e| e.from == pair)
    }

    /// Clock period of the cycle-accurate side, if there is one.
    pub fn clock_period_ns(&self) -> Option<u64> {
        self.t.clock_period_ns.or(self.i.clock_period_ns)
    }

    /// The component machine seen from one side: every distinct component
    /// transition used by the transactor.
    pub fn projection(&self, side: Side) -> InterfaceFsm {
        let info = self.side(side);
        let pick = |p: StatePair| match side {
            Side::T => p.p,
            Side::I => p.q,
        };
        let mut b = InterfaceFsm::builder(info.name.clone(), info.role, info.level)
            .initial(pick(self.initial_pair))
            .final_state(pick(self.final_pair));
        if let Some(c) = info.clock_period_ns {
            b = b.clock_period_ns(c);
        }
        for s in &info.signals {
            b = b.signal(s.clone());
        }
        for f in &info.fields {
            b = b.field(f.clone());
        }
        for e in self.edges.iter().filter(|e| e.side == side) {
            b = b.transition(e.component());
        }
        b.build()
    }

    /// Structural checks: every edge advances one side only and its
    /// endpoints are known pairs.
    pub fn check_structure(&self) -> Result<(), String> {
        for e in &self.edges {
            let moved_p = e.from.p != e.to.p;
            let moved_q = e.from.q != e.to.q;
            let ok = match e.side {
                Side::T => !moved_q,
                Side::I => !moved_p,
            };
            if !ok {
                return Err(format!("edge {e} moves the wrong side"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid-input: `{name}` fails validation: {}", join(.violations))]
    InvalidInput { name: String, violations: Vec<Violation> },
    #[error("mapping-mismatch: {0}")]
    MappingMismatch(String),
    #[error("not-prepared: `{0}` must go through self-loop stripping and the delay-consumption transform")]
    NotPrepared(String),
    #[error("no-legal-transactor: search exhausted after {expansions} expansions without reaching {final_pair}")]
    NoLegalTransactor { expansions: usize, final_pair: StatePair },
    #[error("empty-after-prune: the initial pair has no path to the final pair")]
    EmptyAfterPrune,
    #[error(transparent)]
    Transform(#[from] TransformError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::InvalidInput { .. } => "invalid-input",
            SynthError::MappingMismatch(_) => "mapping-mismatch",
            SynthError::NotPrepared(_) => "not-prepared",
            SynthError::NoLegalTransactor { .. } => "no-legal-transactor",
            SynthError::EmptyAfterPrune => "empty-after-prune",
            SynthError::Transform(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    /// Apply the timing-coherence check. Off only for the conventional
    /// baseline.
    pub timing_checks: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { timing_checks: true }
    }
}

/// Candidate count at one expansion versus the `n + m` bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub pair: StatePair,
    pub candidates: usize,
    pub bound: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthStats {
    pub pops: usize,
    pub expansions: usize,
    pub revisits: usize,
    pub deleted_edges: usize,
    pub pruned_pairs: usize,
    pub steps: Vec<StepRecord>,
}

impl SynthStats {
    pub fn max_candidates(&self) -> usize {
        self.steps.iter().map(|s| s.candidates).max().unwrap_or(0)
    }

    pub fn within_bound(&self) -> bool {
        self.steps.iter().all(|s| s.candidates <= s.bound)
    }

    /// One-line summary of the per-step instrumentation.
    pub fn summary(&self) -> String {
        format!(
            "n+m check: {} expansions, {} revisits, max {} candidates per step, {}",
            self.expansions,
            self.revisits,
            self.max_candidates(),
            if self.within_bound() { "all within n+m" } else { "BOUND EXCEEDED" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesis {
    pub transactor: TransactorFsm,
    pub stats: SynthStats,
}

/// Synthesize with the default (timing-coherent) options.
pub fn generate_transactor(
    t: &InterfaceFsm,
    i: &InterfaceFsm,
    l: &PayloadMapping,
) -> Result<TransactorFsm, SynthError> {
    generate_with_stats(t, i, l, SynthOptions::default()).map(|s| s.transactor)
}

fn check_inputs(t: &InterfaceFsm, i: &InterfaceFsm, l: &PayloadMapping, opts: SynthOptions) -> Result<(), SynthError> {
    for fsm in [t, i] {
        let report = validate(fsm);
        if !report.is_ok() {
            return Err(SynthError::InvalidInput { name: fsm.name().to_string(), violations: report.violations });
        }
    }
    let data_signals: BTreeSet<&str> = [t, i]
        .iter()
        .flat_map(|f| f.signals().iter())
        .filter(|s| s.kind == SignalKind::Data)
        .map(|s| s.name.as_str())
        .collect();
    let fields: BTreeSet<&str> = [t, i].iter().flat_map(|f| f.payload_fields().iter()).map(|s| s.as_str()).collect();
    for e in l.entries() {
        if !data_signals.contains(e.signal.as_str()) {
            return Err(SynthError::MappingMismatch(format!("`{}` is not a data signal of either side", e.signal)));
        }
        if !fields.is_empty() && !fields.contains(e.field.as_str()) {
            return Err(SynthError::MappingMismatch(format!("`{}` is not a payload field of either side", e.field)));
        }
    }
    if opts.timing_checks {
        for (fsm, peer) in [(t, i), (i, t)] {
            let peer_has_delay = peer.has_action(&Action::Call(CallOp::Delay, Dir::Receive));
            if fsm.level() == Level::Ca && fsm.role() == Role::Target && peer_has_delay && !fsm.is_delay_transformed() {
                return Err(SynthError::NotPrepared(fsm.name().to_string()));
            }
        }
    }
    Ok(())
}

/// Generation(T, I, L) with instrumentation.
///
/// Stack discipline: pop a pair; a pair popped a second time has its
/// recorded outgoing edges deleted; the final pair reached with no call open
/// ends the search. Candidates are examined T-side first, each side in
/// canonical transition order. Self-loop edges are recorded but never pushed.
pub fn generate_with_stats(
    t: &InterfaceFsm,
    i: &InterfaceFsm,
    l: &PayloadMapping,
    opts: SynthOptions,
) -> Result<Synthesis, SynthError> {
    check_inputs(t, i, l, opts)?;
    let initial = StatePair::new(t.initial(), i.initial());
    let final_pair = StatePair::new(t.final_state(), i.final_state());
    let mut stats = SynthStats::default();
    let mut graph: Vec<TransactorEdge> = Vec::new();
    let mut visited: BTreeSet<StatePair> = BTreeSet::new();
    let mut stack = vec![(initial, LegalityContext::default())];
    let mut found = false;

    while let Some((pair, ctx)) = stack.pop() {
        stats.pops += 1;
        if visited.contains(&pair) {
            let before = graph.len();
            graph.retain(|e| e.from != pair);
            stats.deleted_edges += before - graph.len();
            stats.revisits += 1;
            continue;
        }
        visited.insert(pair);
        stats.expansions += 1;
        if pair == final_pair && !ctx.call_open {
            found = true;
            break;
        }
        let mut candidates = 0;
        for (side, fsm, peer, state, peer_state) in [(Side::T, t, i, pair.p, pair.q), (Side::I, i, t, pair.q, pair.p)] {
            for tr in fsm.outgoing(state) {
                candidates += 1;
                let Some(next) = legality::advance(fsm, tr, &ctx, l) else { continue };
                if opts.timing_checks && !check_timing_legality(fsm, peer, peer_state, tr, &ctx) {
                    continue;
                }
                let to = match side {
                    Side::T => StatePair::new(tr.to, pair.q),
                    Side::I => StatePair::new(pair.p, tr.to),
                };
                if to != pair {
                    stack.push((to, next));
                }
                graph.push(TransactorEdge {
                    from: pair,
                    to,
                    side,
                    guard: tr.guard,
                    actions: tr.actions.clone(),
                    context: next,
                });
            }
        }
        stats.steps.push(StepRecord { pair, candidates, bound: t.out_degree(pair.p) + i.out_degree(pair.q) });
    }

    if !found {
        return Err(SynthError::NoLegalTransactor { expansions: stats.expansions, final_pair });
    }
    let raw = TransactorFsm::from_parts(
        format!("{}__{}", t.name(), i.name()),
        SideInfo::of(t),
        SideInfo::of(i),
        l.clone(),
        initial,
        final_pair,
        graph,
    );
    let before = raw.pairs.len();
    let pruned = prune_dead_states(&raw)?;
    stats.pruned_pairs = before - pruned.pairs.len();
    Ok(Synthesis { transactor: pruned, stats })
}

/// Keep only pairs that are reachable from the initial pair and can reach
/// the final pair.
pub fn prune_dead_states(g: &TransactorFsm) -> Result<TransactorFsm, SynthError> {
    let reach = |start: StatePair, forward: bool| -> BTreeSet<StatePair> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for e in &g.edges {
                let (a, b) = if forward { (e.from, e.to) } else { (e.to, e.from) };
                if a == x && seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        seen
    };
    let fwd = reach(g.initial_pair, true);
    let bwd = reach(g.final_pair, false);
    let live: BTreeSet<StatePair> = fwd.intersection(&bwd).copied().collect();
    if !live.contains(&g.initial_pair) {
        return Err(SynthError::EmptyAfterPrune);
    }
    let edges = g.edges.iter().filter(|e| live.contains(&e.from) && live.contains(&e.to)).cloned().collect();
    let mut out = TransactorFsm::from_parts(
        g.name.clone(),
        g.t.clone(),
        g.i.clone(),
        g.mapping.clone(),
        g.initial_pair,
        g.final_pair,
        edges,
    );
    out.pairs = live;
    Ok(out)
}

/// Re-check an emitted transactor: single-sided progression, and for every
/// edge some context reaching its source under which it is legal and
/// produces the recorded context.
pub fn verify_transactor(
    g: &TransactorFsm,
    t: &InterfaceFsm,
    i: &InterfaceFsm,
    opts: SynthOptions,
) -> Result<(), String> {
    g.check_structure()?;
    let mut incoming: BTreeMap<StatePair, BTreeSet<LegalityContext>> = BTreeMap::new();
    incoming.entry(g.initial_pair).or_default().insert(LegalityContext::default());
    for e in g.edges.iter().filter(|e| !e.is_self_loop()) {
        incoming.entry(e.to).or_default().insert(e.context);
    }
    for e in &g.edges {
        let (fsm, peer, state, peer_state) = match e.side {
            Side::T => (t, i, e.from.p, e.from.q),
            Side::I => (i, t, e.from.q, e.from.p),
        };
        let tr = e.component();
        if !fsm.transitions().contains(&tr) {
            return Err(format!("edge {e} is not a transition of `{}`", fsm.name()));
        }
        debug_assert_eq!(tr.from, state);
        let ok = incoming.get(&e.from).into_iter().flatten().any(|ctx| {
            legality::advance(fsm, &tr, ctx, &g.mapping) == Some(e.context)
                && (!opts.timing_checks || check_timing_legality(fsm, peer, peer_state, &tr, ctx))
        });
        if !ok {
            return Err(format!("edge {e} is not legal under any context reaching {}", e.from));
        }
    }
    Ok(())
}

/// Build the `(T, I)` pair from the two component interfaces: both are
/// complemented, cycle-accurate sides lose their wait-state loops, and a
/// cycle-accurate target side gets the delay-consumption model.
pub fn prepare_sides(
    initiator: &InterfaceFsm,
    target: &InterfaceFsm,
) -> Result<(InterfaceFsm, InterfaceFsm), SynthError> {
    for fsm in [initiator, target] {
        let report = validate(fsm);
        if !report.is_ok() {
            return Err(SynthError::InvalidInput { name: fsm.name().to_string(), violations: report.violations });
        }
    }
    let prep = |fsm: InterfaceFsm| -> Result<InterfaceFsm, SynthError> {
        if fsm.level() != Level::Ca {
            return Ok(fsm);
        }
        let stripped = strip_self_loops(&fsm);
        if fsm.role() == Role::Target {
            Ok(apply_delay_consumption(&stripped)?)
        } else {
            Ok(stripped)
        }
    };
    Ok((prep(complement(initiator)?)?, prep(complement(target)?)?))
}

/// Complement, prepare and synthesize in one call.
pub fn synthesize_bridge(
    initiator: &InterfaceFsm,
    target: &InterfaceFsm,
    l: &PayloadMapping,
) -> Result<Synthesis, SynthError> {
    let (t, i) = prepare_sides(initiator, target)?;
    generate_with_stats(&t, &i, l, SynthOptions::default())
}
