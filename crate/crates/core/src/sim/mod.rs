//! Deterministic co-simulation with one local clock per component.
//!
//! The cycle-accurate side and the transaction-level side never share a
//! clock. The transactor advances the cycle-accurate clock while it gathers
//! the payload, issues the call at the recorded begin time, and sets the
//! transaction-level clock to `begin + delay`; the cycle-accurate side then
//! holds its last handshake until the two end times meet.

mod delay;
mod kernel;
mod trace;

use std::num::NonZeroU64;

use thiserror::Error;

use crate::TimeNs;

pub use delay::{quantize_delay, DelayModel, DelaySampler, RoundingPolicy};
pub use kernel::{run_cosimulation, run_with_config, Bridge, BridgeSet, SimConfig, SimMode};
pub use trace::{
    compare_traces, extract_transactions, CompareError, ErrorReport, Event, SimTrace, TraceError, TxnStats, TxnVerdict,
};

/// Which side of the transactor a record was observed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordSide {
    Ca,
    Pvt,
}

impl RecordSide {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordSide::Ca => "ca",
            RecordSide::Pvt => "pvt",
        }
    }
}

/// Transaction boundaries seen by one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransactionRecord {
    pub txn_id: u64,
    pub side: RecordSide,
    pub begin_ns: TimeNs,
    pub end_ns: TimeNs,
    pub payload_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalClock {
    pub owner: String,
    pub now_ns: TimeNs,
    /// Zero for event-timed (transaction-level) clocks.
    pub period_ns: u64,
}

impl LocalClock {
    pub fn cycle(owner: impl Into<String>, period_ns: u64) -> Self {
        LocalClock { owner: owner.into(), now_ns: 0, period_ns }
    }

    pub fn event(owner: impl Into<String>) -> Self {
        LocalClock { owner: owner.into(), now_ns: 0, period_ns: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("delay-underrun: txn {txn_id}: begin {begin_ns} + delay {delay_ns} ns ends before the earliest completion at {ca_now_ns} ns")]
    DelayUnderrun { txn_id: u64, begin_ns: TimeNs, delay_ns: u64, ca_now_ns: TimeNs },
    #[error("delay-not-cycle-multiple: txn {txn_id}: {delay_ns} ns is not a multiple of the {period_ns} ns clock")]
    DelayNotCycleMultiple { txn_id: u64, delay_ns: u64, period_ns: u64 },
    #[error("protocol-deadlock: txn {txn_id}: {detail}")]
    ProtocolDeadlock { txn_id: u64, detail: String },
    #[error("no-bridge: txn {txn_id}: no transactor for {kind} bursts of {burst_len}")]
    NoBridge { txn_id: u64, kind: &'static str, burst_len: u32 },
    #[error("bad-bridge: {0}")]
    BadBridge(String),
    #[error("not-cycle-clock: clock `{0}` has no period")]
    NotCycleClock(String),
    #[error("empty-workload: nothing to simulate")]
    EmptyWorkload,
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::DelayUnderrun { .. } => "delay-underrun",
            SimError::DelayNotCycleMultiple { .. } => "delay-not-cycle-multiple",
            SimError::ProtocolDeadlock { .. } => "protocol-deadlock",
            SimError::NoBridge { .. } => "no-bridge",
            SimError::BadBridge(_) => "bad-bridge",
            SimError::NotCycleClock(_) => "not-cycle-clock",
            SimError::EmptyWorkload => "empty-workload",
        }
    }

    pub fn txn_id(&self) -> Option<u64> {
        match self {
            SimError::DelayUnderrun { txn_id, .. }
            | SimError::DelayNotCycleMultiple { txn_id, .. }
            | SimError::ProtocolDeadlock { txn_id, .. }
            | SimError::NoBridge { txn_id, .. } => Some(*txn_id),
            _ => None,
        }
    }
}

/// Advance a cycle clock by whole periods. Only this clock changes.
pub fn advance_local_clock(clock: &LocalClock, cycles: NonZeroU64) -> Result<LocalClock, SimError> {
    if clock.period_ns == 0 {
        return Err(SimError::NotCycleClock(clock.owner.clone()));
    }
    Ok(LocalClock { now_ns: clock.now_ns + cycles.get() * clock.period_ns, ..clock.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("delay-underrun: begin {begin_ns} + delay {delay_ns} < {ca_now_ns}")]
pub struct Underrun {
    pub begin_ns: TimeNs,
    pub delay_ns: u64,
    pub ca_now_ns: TimeNs,
}

/// Local clock wrapping: the transaction-level side ends at
/// `begin + delay`; the cycle-accurate side, which could finish at
/// `ca_now`, holds for the difference in whole cycles.
pub fn wrap_clock_for_call(
    begin_ns: TimeNs,
    returned_delay_ns: u64,
    ca_now_ns: TimeNs,
    period_ns: u64,
) -> Result<(TimeNs, u64), Underrun> {
    let pvt_end = begin_ns + returned_delay_ns;
    if pvt_end < ca_now_ns {
        return Err(Underrun { begin_ns, delay_ns: returned_delay_ns, ca_now_ns });
    }
    Ok((pvt_end, (pvt_end - ca_now_ns) / period_ns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_clock_for_call(0, 50, 50, 10), Ok((50, 0)));
        assert_eq!(wrap_clock_for_call(0, 70, 50, 10), Ok((70, 2)));
        assert_eq!(wrap_clock_for_call(0, 40, 50, 10), Err(Underrun { begin_ns: 0, delay_ns: 40, ca_now_ns: 50 }));
    }

    #[test]
    fn advance_only_touches_one_clock() {
        let ca = LocalClock::cycle("master", 10);
        let pvt = LocalClock::event("slave");
        let ca2 = advance_local_clock(&ca, NonZeroU64::new(5).unwrap()).unwrap();
        assert_eq!(ca2.now_ns, 50);
        assert_eq!(pvt.now_ns, 0);
        assert!(advance_local_clock(&pvt, NonZeroU64::MIN).is_err());
    }
}
