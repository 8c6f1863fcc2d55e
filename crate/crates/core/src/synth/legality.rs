//! Data and timing legality of a single candidate transition.

use crate::dsl::{Flow, PayloadMapping};
use crate::ifsm::{Action, CallOp, Dir, InterfaceFsm, Level, Transition};
use crate::StateId;

/// What the transactor has done so far along one search path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LegalityContext {
    /// Collect-flow entries of the mapping bound so far (a prefix).
    pub collected: u32,
    /// Distribute-flow entries handed out so far (a prefix).
    pub distributed: u32,
    pub payload_sent: bool,
    pub payload_received: bool,
    pub delay_received: bool,
    pub response_received: bool,
    /// Between `begin_call` and `end_call`.
    pub call_open: bool,
}

impl LegalityContext {
    pub fn collect_complete(&self, l: &PayloadMapping) -> bool {
        self.collected as usize == l.count(Flow::Collect)
    }

    pub fn distribute_complete(&self, l: &PayloadMapping) -> bool {
        self.distributed as usize == l.count(Flow::Distribute)
    }
}

/// Apply `t` (a transition of `fsm`, one side of the transactor) to `ctx`;
/// `None` if it would move payload out of order or incompletely.
pub(crate) fn advance(
    fsm: &InterfaceFsm,
    t: &Transition,
    ctx: &LegalityContext,
    l: &PayloadMapping,
) -> Option<LegalityContext> {
    let mut next = *ctx;
    for a in &t.actions {
        match a {
            Action::SampleData(s) => {
                // every sampled data value has to land in the next collect slot
                let e = l.flow(Flow::Collect).nth(next.collected as usize)?;
                if e.signal != *s {
                    return None;
                }
                next.collected += 1;
            }
            Action::DriveData(s) => {
                if !(next.payload_received || next.response_received) {
                    return None;
                }
                let e = l.flow(Flow::Distribute).nth(next.distributed as usize)?;
                if e.signal != *s {
                    return None;
                }
                next.distributed += 1;
            }
            Action::Call(CallOp::Payload, Dir::Send) => {
                if !next.collect_complete(l) {
                    return None;
                }
                next.payload_sent = true;
            }
            Action::Call(CallOp::Response, Dir::Send) => {
                if !next.collect_complete(l) {
                    return None;
                }
            }
            Action::Call(CallOp::Payload, Dir::Receive) => next.payload_received = true,
            Action::Call(CallOp::Response, Dir::Receive) => next.response_received = true,
            Action::Call(CallOp::Delay, Dir::Receive) => next.delay_received = true,
            Action::Call(CallOp::Delay, Dir::Send) => {}
            Action::Call(CallOp::BeginCall, _) => next.call_open = true,
            Action::Call(CallOp::EndCall, _) => next.call_open = false,
            Action::DriveLevel(..) | Action::RequireLevel(..) | Action::ConsumeDelayCycle => {}
        }
    }
    let completes = fsm.level() == Level::Ca && t.to == fsm.final_state() && !t.is_self_loop();
    if completes && !(next.collect_complete(l) && next.distribute_complete(l)) {
        return None;
    }
    Some(next)
}

/// Payload check: collect-flow signals are sampled in mapping order and
/// nothing unmapped is sampled or driven; the payload (or a response) only
/// leaves once every collect entry is bound; distribute-flow signals are
/// driven in order and only after the values have arrived; a
/// cycle-accurate side only completes once the whole mapping is moved.
pub fn check_data_legality(fsm: &InterfaceFsm, t: &Transition, ctx: &LegalityContext, l: &PayloadMapping) -> bool {
    advance(fsm, t, ctx, l).is_some()
}

/// Timing check for transition `t` of `fsm`, whose peer is at `peer_state`.
///
/// A delay-guarded edge needs the delay in hand. An edge entering the final
/// state is a transaction boundary: if it announces the delay itself, the
/// peer must already have finished (only then is the duration known);
/// otherwise, when the peer learns the duration through a delay
/// receipt, that receipt must already have happened.
pub fn check_timing_legality(
    fsm: &InterfaceFsm,
    peer: &InterfaceFsm,
    peer_state: StateId,
    t: &Transition,
    ctx: &LegalityContext,
) -> bool {
    if t.guard.is_some() && !ctx.delay_received {
        return false;
    }
    if t.is_self_loop() || t.to != fsm.final_state() {
        return true;
    }
    if t.has(&Action::Call(CallOp::Delay, Dir::Send)) {
        return peer_state == peer.final_state();
    }
    if peer.has_action(&Action::Call(CallOp::Delay, Dir::Receive)) {
        return ctx.delay_received || t.has(&Action::Call(CallOp::Delay, Dir::Receive));
    }
    true
}
