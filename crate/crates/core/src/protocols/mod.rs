//! Reference interface models, the conventional baseline, and workloads.
//!
//! The shipped `.ifsm`/`.pmap` files describe a single-address, two-beat
//! bus write and its transaction-level counterpart; [`burst_models`]
//! generates the same protocol for any burst length and for reads.

mod workload;

use crate::dsl::{parse_interface_spec, parse_payload_mapping, Flow, MapEntry, PayloadMapping};
use crate::ifsm::act::{drive, recv, require, sample, send, set};
use crate::ifsm::{complement, strip_all_self_loops, CallOp, InterfaceFsm, Level, Role, SignalDecl};
use crate::sim::{Bridge, BridgeSet};
use crate::synth::{generate_with_stats, prepare_sides, Side, SynthError, SynthOptions, Synthesis, TransactorFsm};

pub use workload::{
    generate_workload, parse_workload, serialize_workload, uniform_workload, Transfer, TransferKind, WorkloadError,
    WorkloadKind, WorkloadSpec, GENERAL_BURSTS, MULTIMEDIA_BURSTS,
};

const FILES: [(&str, &str); 8] = [
    ("ca_write_initiator.ifsm", include_str!("../../refs/ca_write_initiator.ifsm")),
    ("ca_write_target.ifsm", include_str!("../../refs/ca_write_target.ifsm")),
    ("ca_read_initiator.ifsm", include_str!("../../refs/ca_read_initiator.ifsm")),
    ("ca_read_target.ifsm", include_str!("../../refs/ca_read_target.ifsm")),
    ("pvt_initiator.ifsm", include_str!("../../refs/pvt_initiator.ifsm")),
    ("pvt_target.ifsm", include_str!("../../refs/pvt_target.ifsm")),
    ("write.pmap", include_str!("../../refs/write.pmap")),
    ("read.pmap", include_str!("../../refs/read.pmap")),
];

/// The embedded reference files as `(file name, contents)`.
pub fn reference_files() -> &'static [(&'static str, &'static str)] {
    &FILES
}

fn file(name: &str) -> &'static str {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).expect("embedded file")
}

/// One complementary pair per level plus the payload mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceLibrary {
    pub ca_initiator: InterfaceFsm,
    pub ca_target: InterfaceFsm,
    pub pvt_initiator: InterfaceFsm,
    pub pvt_target: InterfaceFsm,
    pub mapping: PayloadMapping,
}

fn load(prefix: &str, map: &str) -> ReferenceLibrary {
    let parse = |n: &str| parse_interface_spec(file(n)).unwrap_or_else(|e| panic!("embedded {n}: {e}"));
    ReferenceLibrary {
        ca_initiator: parse(&format!("{prefix}_initiator.ifsm")),
        ca_target: parse(&format!("{prefix}_target.ifsm")),
        pvt_initiator: parse("pvt_initiator.ifsm"),
        pvt_target: parse("pvt_target.ifsm"),
        mapping: parse_payload_mapping(file(map)).unwrap_or_else(|e| panic!("embedded {map}: {e}")),
    }
}

/// The shipped write library: two-beat bus write, one-call transaction
/// model, `L = {addr, data, data}`.
pub fn reference_models() -> ReferenceLibrary {
    load("ca_write", "write.pmap")
}

/// The read counterpart of [`reference_models`].
pub fn read_reference_models() -> ReferenceLibrary {
    load("ca_read", "read.pmap")
}

pub const CLOCK_PERIOD_NS: u64 = 10;

fn pvt_models() -> (InterfaceFsm, InterfaceFsm) {
    let init = InterfaceFsm::builder("pvt_txn", Role::Initiator, Level::Pvt)
        .field("addr")
        .field("data")
        .final_state(2)
        .edge(0, 1, vec![send(CallOp::BeginCall), send(CallOp::Payload)])
        .edge(1, 2, vec![recv(CallOp::EndCall), recv(CallOp::Delay), recv(CallOp::Response)])
        .build();
    let target = complement(&init).expect("call actions complement");
    (init, target)
}

/// The bus protocol for a burst of `beats` data transfers: `beats + 4`
/// states, the last handshake at `beats + 2`, nominal length `beats + 3`
/// cycles. With `beats == 2` this is exactly the shipped library.
pub fn burst_models(kind: TransferKind, beats: u32) -> ReferenceLibrary {
    assert!(beats >= 1, "a burst has at least one beat");
    let (name, data, map_name) = match kind {
        TransferKind::Write => ("ca_write", "HWDATA", "L"),
        TransferKind::Read => ("ca_read", "HRDATA", "R"),
    };
    let beat = |first: bool| {
        let mut v = if first { vec![require("HREADY", true)] } else { vec![] };
        v.push(match kind {
            TransferKind::Write => drive(data),
            TransferKind::Read => sample(data),
        });
        v
    };
    let last = beats + 2;
    let mut b = InterfaceFsm::builder(name, Role::Initiator, Level::Ca)
        .clock_period_ns(CLOCK_PERIOD_NS)
        .signal(SignalDecl::handshake("HTRANS"))
        .signal(SignalDecl::data("HADDR"))
        .signal(SignalDecl::data(data))
        .signal(SignalDecl::handshake("HREADY"))
        .final_state(last + 1)
        .edge(0, 1, vec![set("HTRANS", true), drive("HADDR")])
        .edge(1, 1, vec![require("HREADY", false)])
        .edge(1, 2, vec![require("HREADY", true)])
        .edge(2, 2, vec![require("HREADY", false)])
        .edge(2, 3, beat(true));
    for k in 1..beats {
        b = b.edge(2 + k, 3 + k, beat(false));
    }
    let ca_initiator =
        b.edge(last, last, vec![require("HREADY", false)]).edge(last, last + 1, vec![require("HREADY", true)]).build();
    let ca_target = complement(&ca_initiator).expect("signal actions complement");
    let mut entries = vec![MapEntry::collect("addr", None, "HADDR")];
    for k in 0..beats {
        entries.push(match kind {
            TransferKind::Write => MapEntry::collect("data", Some(k), data),
            TransferKind::Read => MapEntry::distribute("data", Some(k), data),
        });
    }
    let (pvt_initiator, pvt_target) = pvt_models();
    ReferenceLibrary {
        ca_initiator,
        ca_target,
        pvt_initiator,
        pvt_target,
        mapping: PayloadMapping::new(map_name, entries).expect("contiguous indices"),
    }
}

/// The conventional baseline from the same `(T, I, L)` as the coherent
/// synthesis: delay guards are dropped, every wait loop is removed, and the
/// search runs without the timing check. The kernel runs the result on a
/// single clock: the call goes out when collection completes and the bus
/// side finishes as soon as it returns, with no clock wrapping or
/// stretching.
pub fn conventional_transactor(
    t: &InterfaceFsm,
    i: &InterfaceFsm,
    l: &PayloadMapping,
) -> Result<TransactorFsm, SynthError> {
    Ok(conventional_synthesis(t, i, l)?.transactor)
}

fn neutralize(f: &InterfaceFsm) -> InterfaceFsm {
    if f.level() != Level::Ca {
        return f.clone();
    }
    let plain = f.transitions().iter().map(|t| crate::ifsm::Transition { guard: None, ..t.clone() }).collect();
    strip_all_self_loops(&f.clone().with_transitions(plain))
}

pub fn conventional_synthesis(t: &InterfaceFsm, i: &InterfaceFsm, l: &PayloadMapping) -> Result<Synthesis, SynthError> {
    generate_with_stats(&neutralize(t), &neutralize(i), l, SynthOptions { timing_checks: false })
}

/// Coherent synthesis from a library: `T` = prepared complement of the bus
/// initiator, `I` = complement of the transaction-level target.
pub fn coherent_bridge(lib: &ReferenceLibrary) -> Result<Bridge, SynthError> {
    let (t, i) = prepare_sides(&lib.ca_initiator, &lib.pvt_target)?;
    let s = generate_with_stats(&t, &i, &lib.mapping, SynthOptions::default())?;
    Ok(Bridge::new(lib.ca_initiator.clone(), Some(s.transactor), lib.pvt_target.clone()))
}

pub fn conventional_bridge(lib: &ReferenceLibrary) -> Result<Bridge, SynthError> {
    let t = complement(&lib.ca_initiator)?;
    let i = complement(&lib.pvt_target)?;
    let g = conventional_transactor(&t, &i, &lib.mapping)?;
    Ok(Bridge::new(lib.ca_initiator.clone(), Some(g), lib.pvt_target.clone()))
}

/// Pure bus reference: the master talks to a delay-aware bus slave
/// directly, no transactor.
pub fn reference_bridge(lib: &ReferenceLibrary) -> Result<Bridge, SynthError> {
    let (slave, _) = prepare_sides(&lib.ca_initiator, &lib.pvt_target)?;
    Ok(Bridge::new(lib.ca_initiator.clone(), None, slave))
}

/// Which bridges a run needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeFlavor {
    Coherent,
    Conventional,
    Reference,
}

/// Bridges for every `(kind, burst_len)` shape in `w`, built from
/// [`burst_models`].
pub fn standard_bridges(w: &WorkloadSpec, flavor: BridgeFlavor) -> Result<BridgeSet, SynthError> {
    let mut set = BridgeSet::new();
    for t in &w.transfers {
        if set.get(t.kind, t.burst_len).is_some() {
            continue;
        }
        let lib = burst_models(t.kind, t.burst_len);
        let bridge = match flavor {
            BridgeFlavor::Coherent => coherent_bridge(&lib)?,
            BridgeFlavor::Conventional => conventional_bridge(&lib)?,
            BridgeFlavor::Reference => reference_bridge(&lib)?,
        };
        set.insert(t.kind, t.burst_len, bridge);
    }
    Ok(set)
}

/// The transfer shape a transactor was built for, read off its mapping:
/// data collected from the bus means a write, data handed to the bus a
/// read, and the number of `data` entries is the burst length.
pub fn shape_of(g: &TransactorFsm) -> Option<(TransferKind, u32)> {
    let data: Vec<_> = g.mapping().entries().iter().filter(|e| e.field == "data").collect();
    let first = data.first()?;
    if data.iter().any(|e| e.flow != first.flow) {
        return None;
    }
    let kind = match first.flow {
        Flow::Collect => TransferKind::Write,
        Flow::Distribute => TransferKind::Read,
    };
    Some((kind, data.len() as u32))
}

/// Recover the two component interfaces from a stored transactor: the bus
/// master is the complement of the `T` side as used (guards and delay
/// consumption dropped), the slave the complement of the `I` side.
pub fn components_of(g: &TransactorFsm) -> Result<(InterfaceFsm, InterfaceFsm), SynthError> {
    let t = neutralize_keep_loops(&g.projection(Side::T));
    let master = complement(&t)?;
    let slave = complement(&g.projection(Side::I))?;
    Ok((master, slave))
}

fn neutralize_keep_loops(f: &InterfaceFsm) -> InterfaceFsm {
    let plain = f
        .transitions()
        .iter()
        .map(|t| crate::ifsm::Transition {
            guard: None,
            actions: t.actions.iter().filter(|a| **a != crate::ifsm::Action::ConsumeDelayCycle).cloned().collect(),
            ..t.clone()
        })
        .collect();
    f.clone().with_transitions(plain)
}
