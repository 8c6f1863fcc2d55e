//! The event loop: master, transactor and slave stepped transfer by
//! transfer, each against its own local clock.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hasher;
use std::num::NonZeroU64;

use fnv::FnvHasher;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    advance_local_clock, quantize_delay, wrap_clock_for_call, DelayModel, DelaySampler, Event, LocalClock, RecordSide,
    SimError, SimTrace, TransactionRecord, TxnStats,
};
use crate::dsl::Flow;
use crate::ifsm::{Action, CallOp, DelayGuard, Dir, InterfaceFsm, Level, Transition};
use crate::protocols::{Transfer, TransferKind, WorkloadSpec};
use crate::synth::{Side, StatePair, TransactorEdge, TransactorFsm};
use crate::{StateId, TimeNs};

/// How the run is wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Synthesized transactor with local clock wrapping and dynamic timing
    /// matching.
    Coherent,
    /// One global clock: the call is issued when collection completes and
    /// the bus side finishes without waiting for the returned delay.
    Conventional,
    /// No transactor: the bus master talks to a delay-aware bus slave.
    Reference,
}

/// Master, transactor (absent for [`SimMode::Reference`]) and slave for one
/// transfer shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bridge {
    pub master: InterfaceFsm,
    pub transactor: Option<TransactorFsm>,
    pub slave: InterfaceFsm,
}

impl Bridge {
    pub fn new(master: InterfaceFsm, transactor: Option<TransactorFsm>, slave: InterfaceFsm) -> Self {
        Bridge { master, transactor, slave }
    }
}

/// Bridges keyed by transfer shape, with an optional catch-all.
#[derive(Debug, Clone, Default)]
pub struct BridgeSet {
    shapes: BTreeMap<(TransferKind, u32), Bridge>,
    fallback: Option<Bridge>,
}

impl BridgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// A set that uses `bridge` for every transfer.
    pub fn single(bridge: Bridge) -> Self {
        BridgeSet { shapes: BTreeMap::new(), fallback: Some(bridge) }
    }

    pub fn insert(&mut self, kind: TransferKind, burst_len: u32, bridge: Bridge) {
        self.shapes.insert((kind, burst_len), bridge);
    }

    pub fn set_fallback(&mut self, bridge: Bridge) {
        self.fallback = Some(bridge);
    }

    pub fn get(&self, kind: TransferKind, burst_len: u32) -> Option<&Bridge> {
        self.shapes.get(&(kind, burst_len)).or(self.fallback.as_ref())
    }

    pub fn len(&self) -> usize {
        self.shapes.len() + usize::from(self.fallback.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub mode: SimMode,
    pub record_events: bool,
}

/// Run every transfer of `workload` and record both sides' boundaries.
pub fn run_cosimulation(
    bridges: &BridgeSet,
    workload: &WorkloadSpec,
    delays: &DelayModel,
    mode: SimMode,
) -> Result<SimTrace, SimError> {
    run_with_config(bridges, workload, delays, SimConfig { mode, record_events: true })
}

pub fn run_with_config(
    bridges: &BridgeSet,
    workload: &WorkloadSpec,
    delays: &DelayModel,
    config: SimConfig,
) -> Result<SimTrace, SimError> {
    if workload.transfers.is_empty() {
        return Err(SimError::EmptyWorkload);
    }
    let mut compiled: BTreeMap<(TransferKind, u32), Compiled> = BTreeMap::new();
    let mut period = None;
    for (id, t) in workload.transfers.iter().enumerate() {
        let key = (t.kind, t.burst_len);
        if compiled.contains_key(&key) {
            continue;
        }
        let bridge = bridges.get(t.kind, t.burst_len).ok_or(SimError::NoBridge {
            txn_id: id as u64,
            kind: t.kind.as_str(),
            burst_len: t.burst_len,
        })?;
        let c = Compiled::new(bridge, config.mode)?;
        if *period.get_or_insert(c.period) != c.period {
            return Err(SimError::BadBridge("bridges disagree on the bus clock period".into()));
        }
        compiled.insert(key, c);
    }
    let period = period.expect("non-empty workload");
    let mut k = Kernel {
        config,
        period,
        ca: LocalClock::cycle("master", period),
        pvt: LocalClock::event("slave"),
        sampler: delays.sampler(),
        delays,
        trace: SimTrace::default(),
    };
    for (id, t) in workload.transfers.iter().enumerate() {
        let c = &compiled[&(t.kind, t.burst_len)];
        k.run_transfer(id as u64, t, c)?;
    }
    k.trace.records.sort();
    // firing order is kept among simultaneous events
    k.trace.events.sort_by_key(|e| e.time_ns);
    Ok(k.trace)
}

/// Sorted action multiset, ignoring delay consumption (internal to the
/// side that performs it).
fn key(actions: &[Action]) -> Vec<Action> {
    let mut v: Vec<Action> = actions.iter().filter(|a| **a != Action::ConsumeDelayCycle).cloned().collect();
    v.sort();
    v
}

fn complement_key(actions: &[Action]) -> Vec<Action> {
    let v: Vec<Action> = actions.iter().filter_map(Action::complement).collect();
    key(&v)
}

struct View<'a> {
    t: &'a Transition,
    key: Vec<Action>,
}

struct TxView<'a> {
    e: &'a TransactorEdge,
    /// Actions the partner component must perform on the same step.
    want: Vec<Action>,
}

fn views(fsm: &InterfaceFsm, complemented: bool) -> HashMap<StateId, Vec<View<'_>>> {
    let mut m: HashMap<StateId, Vec<View>> = HashMap::new();
    for t in fsm.transitions() {
        let key = if complemented { complement_key(&t.actions) } else { key(&t.actions) };
        m.entry(t.from).or_default().push(View { t, key });
    }
    // non-loop transitions are preferred; loops only when nothing else fits
    for v in m.values_mut() {
        v.sort_by_key(|x| x.t.is_self_loop());
    }
    m
}

/// Cycles from each state to final along non-loop transitions.
fn distances(fsm: &InterfaceFsm) -> HashMap<StateId, u64> {
    let mut dist = HashMap::from([(fsm.final_state(), 0u64)]);
    let mut queue = VecDeque::from([fsm.final_state()]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        for t in fsm.transitions().iter().filter(|t| t.to == s && !t.is_self_loop()) {
            if let Entry::Vacant(v) = dist.entry(t.from) {
                v.insert(d + 1);
                queue.push_back(t.from);
            }
        }
    }
    dist
}

struct Compiled<'a> {
    bridge: &'a Bridge,
    period: u64,
    master: HashMap<StateId, Vec<View<'a>>>,
    /// Reference mode: bus slave transitions keyed by what the master must do.
    /// Otherwise: transaction-level slave transitions keyed by their actions.
    slave: HashMap<StateId, Vec<View<'a>>>,
    tx: HashMap<StatePair, Vec<TxView<'a>>>,
    /// Remaining cycles to completion on the bus side of the transactor (or
    /// of the reference slave).
    dist: HashMap<StateId, u64>,
    distribute_count: usize,
}

impl<'a> Compiled<'a> {
    fn new(bridge: &'a Bridge, mode: SimMode) -> Result<Self, SimError> {
        let bad = |m: String| SimError::BadBridge(m);
        if bridge.master.level() != Level::Ca {
            return Err(bad(format!("master `{}` is not cycle-accurate", bridge.master.name())));
        }
        let period = bridge
            .master
            .clock_period_ns()
            .filter(|p| *p > 0)
            .ok_or_else(|| bad(format!("master `{}` has no clock period", bridge.master.name())))?;
        let master = views(&bridge.master, false);
        let (slave, tx, dist, distribute_count) = match (&bridge.transactor, mode) {
            (None, SimMode::Reference) => {
                if bridge.slave.level() != Level::Ca {
                    return Err(bad("reference runs need a cycle-accurate slave".into()));
                }
                (views(&bridge.slave, true), HashMap::new(), distances(&bridge.slave), 0)
            }
            (Some(g), SimMode::Coherent | SimMode::Conventional) => {
                if g.clock_period_ns() != Some(period) {
                    return Err(bad(format!("transactor `{}` runs on a different clock", g.name())));
                }
                let mut tx: HashMap<StatePair, Vec<TxView>> = HashMap::new();
                for e in g.edges() {
                    tx.entry(e.from).or_default().push(TxView { e, want: complement_key(&e.actions) });
                }
                // call edges first (they take no bus time), then bus edges,
                // wait loops last
                for v in tx.values_mut() {
                    v.sort_by_key(|x| (x.e.side == Side::T, x.e.is_self_loop()));
                }
                let d = distances(&g.projection(Side::T));
                (views(&bridge.slave, false), tx, d, g.mapping().count(Flow::Distribute))
            }
            (None, _) => return Err(bad("this mode needs a transactor".into())),
            (Some(_), SimMode::Reference) => return Err(bad("reference runs take no transactor".into())),
        };
        Ok(Compiled { bridge, period, master, slave, tx, dist, distribute_count })
    }
}

/// Per-transfer scratch state.
struct Txn {
    id: u64,
    begin: Option<TimeNs>,
    bus: HashMap<String, u64>,
    master_rng: ChaCha8Rng,
    response_rng: ChaCha8Rng,
    master_vals: Vec<u64>,
    collected: Vec<u64>,
    response: Vec<u64>,
    distributed: usize,
    slave_vals: Vec<u64>,
    remaining: Option<u64>,
    hold: u64,
    call_begin: Option<TimeNs>,
    pvt_end: Option<TimeNs>,
    delay: Option<u64>,
}

const RESPONSE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const STEP_LIMIT: usize = 1_000_000;

impl Txn {
    fn new(id: u64, t: &Transfer) -> Self {
        Txn {
            id,
            begin: None,
            bus: HashMap::new(),
            master_rng: ChaCha8Rng::seed_from_u64(t.payload_digest),
            response_rng: ChaCha8Rng::seed_from_u64(t.payload_digest ^ RESPONSE_STREAM),
            master_vals: Vec::new(),
            collected: Vec::new(),
            response: Vec::new(),
            distributed: 0,
            slave_vals: Vec::new(),
            remaining: None,
            hold: 0,
            call_begin: None,
            pvt_end: None,
            delay: None,
        }
    }

    fn deadlock(&self, detail: impl Into<String>) -> SimError {
        SimError::ProtocolDeadlock { txn_id: self.id, detail: detail.into() }
    }

    fn guard_open(&self, g: Option<DelayGuard>) -> bool {
        match g {
            None => true,
            Some(DelayGuard::Pending) => self.remaining.is_some_and(|r| r > 0),
            Some(DelayGuard::Elapsed) => self.remaining == Some(0),
        }
    }
}

fn digest(vals: &[u64]) -> u64 {
    let mut h = FnvHasher::default();
    for v in vals {
        h.write_u64(*v);
    }
    h.finish()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Responder {
    Transactor,
    Slave,
}

struct Kernel<'d> {
    config: SimConfig,
    period: u64,
    ca: LocalClock,
    pvt: LocalClock,
    sampler: DelaySampler,
    delays: &'d DelayModel,
    trace: SimTrace,
}

impl Kernel<'_> {
    fn log(&mut self, time_ns: TimeNs, component: &str, description: impl FnOnce() -> String) {
        if self.config.record_events {
            self.trace.events.push(Event { time_ns, component: component.to_string(), description: description() });
        }
    }

    fn draw_delay(&mut self, txn: &mut Txn) -> Result<u64, SimError> {
        let raw = self.sampler.next_delay_ns(self.period);
        let (d, rounded) = quantize_delay(raw, self.period, self.delays.rounding)
            .ok_or(SimError::DelayNotCycleMultiple { txn_id: txn.id, delay_ns: raw, period_ns: self.period })?;
        if rounded {
            self.trace.warnings.push(format!("txn {}: delay {raw} ns rounded up to {d} ns", txn.id));
        }
        txn.delay = Some(d);
        Ok(d)
    }

    fn advance_ca(&mut self, cycles: u64) {
        if let Some(n) = NonZeroU64::new(cycles) {
            self.ca = advance_local_clock(&self.ca, n).expect("bus clock has a period");
        }
    }

    fn run_transfer(&mut self, id: u64, t: &Transfer, c: &Compiled) -> Result<(), SimError> {
        if t.idle_gap_cycles > 0 {
            let now = self.ca.now_ns;
            self.log(now, "master", || format!("idle {} cycles", t.idle_gap_cycles));
            self.advance_ca(t.idle_gap_cycles.into());
        }
        let mut txn = Txn::new(id, t);
        match self.config.mode {
            SimMode::Reference => self.run_reference(&mut txn, c)?,
            _ => self.run_bridged(&mut txn, c)?,
        }
        let begin = txn.begin.ok_or_else(|| txn.deadlock("transfer finished without any transition"))?;
        let (call_begin, pvt_end) = match self.config.mode {
            SimMode::Reference => (begin, self.ca.now_ns),
            _ => match (txn.call_begin, txn.pvt_end) {
                (Some(b), Some(e)) => (b, e),
                _ => return Err(txn.deadlock("transfer finished without a completed call")),
            },
        };
        self.trace.records.push(TransactionRecord {
            txn_id: id,
            side: RecordSide::Ca,
            begin_ns: begin,
            end_ns: self.ca.now_ns,
            payload_digest: digest(&txn.master_vals),
        });
        self.trace.records.push(TransactionRecord {
            txn_id: id,
            side: RecordSide::Pvt,
            begin_ns: call_begin,
            end_ns: pvt_end,
            payload_digest: digest(&txn.slave_vals),
        });
        self.trace.stats.push(TxnStats {
            txn_id: id,
            kind: t.kind,
            burst_len: t.burst_len,
            returned_delay_ns: txn.delay.unwrap_or(0),
            hold_cycles: txn.hold,
        });
        Ok(())
    }

    /// One bus cycle: a master transition and the responder's transition
    /// fire together.
    fn ca_step(
        &mut self,
        txn: &mut Txn,
        me: &Transition,
        responder: Responder,
        r_actions: &[Action],
        r_label: &dyn Fn() -> String,
    ) -> Result<(), SimError> {
        let t0 = self.ca.now_ns;
        txn.begin.get_or_insert(t0);
        for a in &me.actions {
            if let Action::DriveData(s) = a {
                let v = txn.master_rng.next_u64();
                txn.bus.insert(s.clone(), v);
                txn.master_vals.push(v);
            }
        }
        for a in r_actions {
            if let Action::DriveData(s) = a {
                let v = match responder {
                    Responder::Transactor => {
                        let v = *txn
                            .response
                            .get(txn.distributed)
                            .ok_or_else(|| txn.deadlock(format!("no response value left to drive on {s}")))?;
                        txn.distributed += 1;
                        v
                    }
                    Responder::Slave => {
                        let v = txn.response_rng.next_u64();
                        txn.slave_vals.push(v);
                        v
                    }
                };
                txn.bus.insert(s.clone(), v);
            }
        }
        for a in &me.actions {
            if let Action::SampleData(s) = a {
                let v = *txn.bus.get(s).ok_or_else(|| txn.deadlock(format!("master samples undriven {s}")))?;
                txn.master_vals.push(v);
            }
        }
        for a in r_actions {
            match a {
                Action::SampleData(s) => {
                    let v = *txn.bus.get(s).ok_or_else(|| txn.deadlock(format!("{s} sampled before it was driven")))?;
                    match responder {
                        Responder::Transactor => txn.collected.push(v),
                        Responder::Slave => txn.slave_vals.push(v),
                    }
                }
                Action::ConsumeDelayCycle => {
                    let r = txn.remaining.as_mut().filter(|r| **r > 0).ok_or_else(|| SimError::ProtocolDeadlock {
                        txn_id: txn.id,
                        detail: "delay consumed with none pending".into(),
                    })?;
                    *r -= 1;
                    txn.hold += 1;
                }
                _ => {}
            }
        }
        let component = match responder {
            Responder::Transactor => "transactor.ca",
            Responder::Slave => "slave",
        };
        self.log(t0, "master", || me.to_string());
        self.log(t0, component, r_label);
        self.advance_ca(1);
        Ok(())
    }

    fn run_reference(&mut self, txn: &mut Txn, c: &Compiled) -> Result<(), SimError> {
        let (master, slave) = (&c.bridge.master, &c.bridge.slave);
        let (mut m, mut s) = (master.initial(), slave.initial());
        let begin = self.ca.now_ns;
        let d = self.draw_delay(txn)?;
        let earliest = begin + c.dist.get(&s).copied().unwrap_or(0) * self.period;
        let (_, hold) = wrap_clock_for_call(begin, d, earliest, self.period).map_err(|u| SimError::DelayUnderrun {
            txn_id: txn.id,
            begin_ns: u.begin_ns,
            delay_ns: u.delay_ns,
            ca_now_ns: u.ca_now_ns,
        })?;
        txn.remaining = Some(hold);
        for _ in 0..STEP_LIMIT {
            if m == master.final_state() && s == slave.final_state() {
                return Ok(());
            }
            let choice =
                c.slave.get(&s).into_iter().flatten().filter(|v| txn.guard_open(v.t.guard)).find_map(|sv| {
                    c.master.get(&m).into_iter().flatten().find(|mv| mv.key == sv.key).map(|mv| (sv, mv))
                });
            let Some((sv, mv)) = choice else {
                return Err(txn.deadlock(format!("no enabled step: master in {m}, slave in {s}")));
            };
            self.ca_step(txn, mv.t, Responder::Slave, &sv.t.actions, &|| sv.t.to_string())?;
            m = mv.t.to;
            s = sv.t.to;
        }
        Err(txn.deadlock("step limit reached"))
    }

    fn run_bridged(&mut self, txn: &mut Txn, c: &Compiled) -> Result<(), SimError> {
        let g = c.bridge.transactor.as_ref().expect("checked at compile");
        let (master, slave) = (&c.bridge.master, &c.bridge.slave);
        let (mut m, mut s, mut pair) = (master.initial(), slave.initial(), g.initial_pair());
        for _ in 0..STEP_LIMIT {
            if pair == g.final_pair() && m == master.final_state() && s == slave.final_state() {
                return Ok(());
            }
            let mut fired = false;
            for tv in c.tx.get(&pair).into_iter().flatten() {
                if !txn.guard_open(tv.e.guard) {
                    continue;
                }
                match tv.e.side {
                    Side::T => {
                        let Some(mv) = c.master.get(&m).into_iter().flatten().find(|mv| mv.key == tv.want) else {
                            continue;
                        };
                        self.ca_step(txn, mv.t, Responder::Transactor, &tv.e.actions, &|| tv.e.to_string())?;
                        m = mv.t.to;
                    }
                    Side::I => {
                        let Some(sv) = c.slave.get(&s).into_iter().flatten().find(|sv| sv.key == tv.want) else {
                            continue;
                        };
                        self.call_step(txn, c, tv.e, sv.t)?;
                        s = sv.t.to;
                    }
                }
                pair = tv.e.to;
                fired = true;
                break;
            }
            if !fired {
                return Err(txn.deadlock(format!("no enabled step: transactor in {pair}, master in {m}, slave in {s}")));
            }
        }
        Err(txn.deadlock("step limit reached"))
    }

    /// A transaction-level exchange between the transactor and the slave.
    /// Takes no bus time.
    fn call_step(&mut self, txn: &mut Txn, c: &Compiled, e: &TransactorEdge, se: &Transition) -> Result<(), SimError> {
        let coherent = self.config.mode == SimMode::Coherent;
        let begin = *txn.begin.get_or_insert(self.ca.now_ns);
        let mut at = self.pvt.now_ns;
        // sends first
        for a in &e.actions {
            if *a == Action::Call(CallOp::BeginCall, Dir::Send) {
                // coherent: the call is stamped with the recorded begin time;
                // conventional: with the current bus time
                let t_call = if coherent { begin } else { self.ca.now_ns };
                txn.call_begin = Some(t_call);
                if coherent {
                    self.pvt.now_ns = t_call;
                }
                at = t_call;
            }
        }
        for a in &se.actions {
            match a {
                Action::Call(CallOp::Delay, Dir::Send) => {
                    self.draw_delay(txn)?;
                }
                Action::Call(CallOp::Response, Dir::Send) => {
                    txn.response = (0..c.distribute_count).map(|_| txn.response_rng.next_u64()).collect();
                    txn.slave_vals.extend_from_slice(&txn.response);
                }
                Action::Call(CallOp::Payload, Dir::Receive) => {
                    txn.slave_vals.extend_from_slice(&txn.collected);
                }
                _ => {}
            }
        }
        // then receives
        if e.actions.contains(&Action::Call(CallOp::Delay, Dir::Receive)) {
            let d = txn.delay.ok_or_else(|| txn.deadlock("delay received but never sent"))?;
            let call_begin = txn.call_begin.ok_or_else(|| txn.deadlock("delay returned outside a call"))?;
            if coherent {
                let earliest = self.ca.now_ns + c.dist.get(&e.from.p).copied().unwrap_or(0) * self.period;
                let (end, hold) =
                    wrap_clock_for_call(call_begin, d, earliest, self.period).map_err(|u| SimError::DelayUnderrun {
                        txn_id: txn.id,
                        begin_ns: u.begin_ns,
                        delay_ns: u.delay_ns,
                        ca_now_ns: u.ca_now_ns,
                    })?;
                txn.remaining = Some(hold);
                txn.pvt_end = Some(end);
                self.pvt.now_ns = end;
                at = end;
            } else {
                txn.remaining = Some(0);
                txn.pvt_end = Some(call_begin + d);
            }
        }
        self.log(at, "transactor.pvt", || e.to_string());
        self.log(at, "slave", || se.to_string());
        Ok(())
    }
}
