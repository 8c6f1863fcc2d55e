//! Strategies shared by the property suites and the acceptance run.

use proptest::prelude::*;

use tlmbridge::ifsm::act::{drive, recv, require, sample, send, set};
use tlmbridge::ifsm::{CallOp, InterfaceFsm, Level, Role, SignalDecl};

/// One non-handshake action of a cycle-accurate edge.
fn ca_extra() -> impl Strategy<Value = Option<tlmbridge::Action>> {
    prop_oneof![
        Just(None),
        (0..2usize, any::<bool>()).prop_map(|(k, out)| {
            let s = ["D0", "D1"][k];
            Some(if out { drive(s) } else { sample(s) })
        }),
        (any::<bool>(), any::<bool>()).prop_map(|(out, lvl)| Some(if out {
            set("H1", lvl)
        } else {
            require("H1", lvl)
        })),
    ]
}

/// A valid cycle-accurate machine: a chain guarded by `H0` with optional
/// wait loops on the opposite level.
pub fn ca_fsm() -> impl Strategy<Value = InterfaceFsm> {
    (1u32..7, any::<bool>(), 1u64..100)
        .prop_flat_map(|(n, initiator, period)| {
            let steps = proptest::collection::vec((any::<bool>(), any::<bool>(), ca_extra()), n as usize);
            (Just(n), Just(initiator), Just(period), steps)
        })
        .prop_map(|(n, initiator, period, steps)| {
            let role = if initiator { Role::Initiator } else { Role::Target };
            let mut b = InterfaceFsm::builder("rand_ca", role, Level::Ca)
                .clock_period_ns(period * 5)
                .signal(SignalDecl::handshake("H0"))
                .signal(SignalDecl::handshake("H1"))
                .signal(SignalDecl::data("D0"))
                .signal(SignalDecl::data("D1"))
                .initial(0)
                .final_state(n);
            for (k, (out, wait, extra)) in steps.into_iter().enumerate() {
                let k = k as u32;
                let h = |lvl| if out { set("H0", lvl) } else { require("H0", lvl) };
                let mut actions = vec![h(true)];
                actions.extend(extra);
                b = b.edge(k, k + 1, actions);
                if wait {
                    b = b.edge(k, k, vec![h(false)]);
                }
            }
            b.build()
        })
}

pub fn pvt_fsm() -> impl Strategy<Value = InterfaceFsm> {
    let op = prop_oneof![
        Just(CallOp::BeginCall),
        Just(CallOp::EndCall),
        Just(CallOp::Payload),
        Just(CallOp::Delay),
        Just(CallOp::Response),
    ];
    let action = (op, any::<bool>()).prop_map(|(op, out)| if out { send(op) } else { recv(op) });
    (proptest::collection::vec(proptest::collection::vec(action, 1..4), 1..5), any::<bool>()).prop_map(
        |(edges, initiator)| {
            let role = if initiator { Role::Initiator } else { Role::Target };
            let mut b = InterfaceFsm::builder("rand_pvt", role, Level::Pvt)
                .field("addr")
                .field("data")
                .initial(0)
                .final_state(edges.len() as u32);
            for (k, actions) in edges.into_iter().enumerate() {
                b = b.edge(k as u32, k as u32 + 1, actions);
            }
            b.build()
        },
    )
}

pub fn any_fsm() -> impl Strategy<Value = InterfaceFsm> {
    prop_oneof![ca_fsm(), pvt_fsm()]
}

const VOCAB: &[&str] = &[
    "ifsm",
    "v1",
    "fsm",
    "{",
    "}",
    ";",
    ":",
    ",",
    "->",
    "<-",
    "=",
    "on",
    "role",
    "level",
    "ca",
    "pvt",
    "clock_period",
    "ns",
    "signal",
    "field",
    "handshake",
    "data",
    "initial",
    "final",
    "HREADY!1",
    "HADDR?",
    "begin_call!",
    "delay?",
    "consume_delay",
    "[delay_pending]",
    "[delay_done]",
    "map",
    "data[0]",
    "tfsm",
    "transactor",
    "side",
    "t",
    "i",
    "(0,1)",
    "with",
    "0",
    "1",
    "4294967296",
    "#",
    "\n",
    " ",
    "é",
    "\"",
];

/// Token soup built from the formats' own vocabulary.
pub fn soup() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(VOCAB), 0..40).prop_map(|v| v.join(" "))
}

pub fn noise() -> impl Strategy<Value = String> {
    proptest::collection::vec(any::<char>(), 0..120).prop_map(|v| v.into_iter().collect())
}
