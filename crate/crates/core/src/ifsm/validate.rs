use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use super::{Action, InterfaceFsm, Level, SignalKind, Transition};
use crate::StateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    FinalNotTerminal,
    UnreachableState,
    DeadState,
    DuplicateSignal,
    DuplicateField,
    UndeclaredSignal,
    SignalKindMismatch,
    ActionLevelMismatch,
    MissingClockPeriod,
    ClockPeriodAtPvt,
    SignalAtPvt,
    FieldAtCa,
    MissingHandshakeSignal,
    NondeterministicChoice,
    GuardOutsideCa,
    EmptyActionList,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::FinalNotTerminal => "final-not-terminal",
            ViolationCode::UnreachableState => "unreachable-state",
            ViolationCode::DeadState => "dead-state",
            ViolationCode::DuplicateSignal => "duplicate-signal",
            ViolationCode::DuplicateField => "duplicate-field",
            ViolationCode::UndeclaredSignal => "undeclared-signal",
            ViolationCode::SignalKindMismatch => "signal-kind-mismatch",
            ViolationCode::ActionLevelMismatch => "action-level-mismatch",
            ViolationCode::MissingClockPeriod => "missing-clock-period",
            ViolationCode::ClockPeriodAtPvt => "clock-period-forbidden-at-pvt",
            ViolationCode::SignalAtPvt => "signal-forbidden-at-pvt",
            ViolationCode::FieldAtCa => "field-forbidden-at-ca",
            ViolationCode::MissingHandshakeSignal => "missing-handshake-signal",
            ViolationCode::NondeterministicChoice => "nondeterministic-choice",
            ViolationCode::GuardOutsideCa => "guard-outside-ca",
            ViolationCode::EmptyActionList => "empty-action-list",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a violation points at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Fsm,
    State(StateId),
    /// Index into [`InterfaceFsm::transitions`].
    Transition {
        index: usize,
        from: StateId,
        to: StateId,
    },
    Signal(String),
    Field(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Fsm => f.write_str("fsm"),
            Location::State(s) => write!(f, "state {s}"),
            Location::Transition { from, to, .. } => write!(f, "transition {from} -> {to}"),
            Location::Signal(s) => write!(f, "signal {s}"),
            Location::Field(s) => write!(f, "field {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, location: Location, message: impl Into<String>) {
        self.violations.push(Violation { code, location, message: message.into() });
    }
}

/// Check every structural invariant of an interface machine. Violations are
/// returned as data; this never fails.
pub fn validate(fsm: &InterfaceFsm) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_header(fsm, &mut report);
    check_declarations(fsm, &mut report);
    for (index, t) in fsm.transitions().iter().enumerate() {
        check_transition(fsm, index, t, &mut report);
    }
    check_determinism(fsm, &mut report);
    check_paths(fsm, &mut report);
    report
}

fn check_header(fsm: &InterfaceFsm, report: &mut ValidationReport) {
    match fsm.level() {
        Level::Ca => {
            if fsm.clock_period_ns().unwrap_or(0) == 0 {
                report.push(
                    ViolationCode::MissingClockPeriod,
                    Location::Fsm,
                    "cycle-accurate interface needs a positive clock period",
                );
            }
            for field in fsm.payload_fields() {
                report.push(
                    ViolationCode::FieldAtCa,
                    Location::Field(field.clone()),
                    "payload fields belong to transaction-level interfaces",
                );
            }
            let has_handshake = fsm.signals().iter().any(|s| s.kind == SignalKind::Handshake);
            if !has_handshake {
                report.push(
                    ViolationCode::MissingHandshakeSignal,
                    Location::Fsm,
                    "completion cannot be stretched without a handshake signal",
                );
            }
        }
        Level::Pvt => {
            if fsm.clock_period_ns().is_some() {
                report.push(
                    ViolationCode::ClockPeriodAtPvt,
                    Location::Fsm,
                    "transaction-level interfaces are not clocked",
                );
            }
            for sig in fsm.signals() {
                report.push(
                    ViolationCode::SignalAtPvt,
                    Location::Signal(sig.name.clone()),
                    "signals belong to cycle-accurate interfaces",
                );
            }
        }
    }
}

fn check_declarations(fsm: &InterfaceFsm, report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    for sig in fsm.signals() {
        if !seen.insert(sig.name.as_str()) {
            report.push(
                ViolationCode::DuplicateSignal,
                Location::Signal(sig.name.clone()),
                "signal declared more than once",
            );
        }
    }
    let mut seen = HashSet::new();
    for field in fsm.payload_fields() {
        if !seen.insert(field.as_str()) {
            report.push(ViolationCode::DuplicateField, Location::Field(field.clone()), "field declared more than once");
        }
    }
}

fn check_transition(fsm: &InterfaceFsm, index: usize, t: &Transition, report: &mut ValidationReport) {
    let loc = || Location::Transition { index, from: t.from, to: t.to };
    if t.from == fsm.final_state() {
        report.push(ViolationCode::FinalNotTerminal, loc(), "final state has an outgoing transition");
    }
    if t.actions.is_empty() {
        report.push(ViolationCode::EmptyActionList, loc(), "transition performs no action");
    }
    if t.guard.is_some() && fsm.level() != Level::Ca {
        report.push(ViolationCode::GuardOutsideCa, loc(), "delay guards only apply to clocked interfaces");
    }
    for action in &t.actions {
        let wrong_level = match fsm.level() {
            Level::Ca => !action.is_ca(),
            Level::Pvt => action.is_ca(),
        };
        if wrong_level {
            report.push(
                ViolationCode::ActionLevelMismatch,
                loc(),
                format!("action `{action}` is not allowed at {} level", fsm.level().as_str()),
            );
            continue;
        }
        let Some(name) = action.signal() else { continue };
        let Some(decl) = fsm.signal(name) else {
            report.push(ViolationCode::UndeclaredSignal, loc(), format!("signal `{name}` is not declared"));
            continue;
        };
        let expected = match action {
            Action::DriveData(_) | Action::SampleData(_) => SignalKind::Data,
            _ => SignalKind::Handshake,
        };
        if decl.kind != expected {
            report.push(
                ViolationCode::SignalKindMismatch,
                loc(),
                format!("`{action}` uses {name} as the wrong kind of signal"),
            );
        }
    }
}

/// Two transitions leaving the same state can be told apart when they carry
/// different delay guards or opposite levels on a common handshake signal.
fn distinguishable(a: &Transition, b: &Transition) -> bool {
    if let (Some(ga), Some(gb)) = (a.guard, b.guard) {
        if ga != gb {
            return true;
        }
    }
    a.actions.iter().any(|x| {
        let (Some(sig), Some(level)) = (x.signal(), x.level()) else { return false };
        b.actions.iter().any(|y| y.signal() == Some(sig) && y.level() == Some(!level))
    })
}

fn check_determinism(fsm: &InterfaceFsm, report: &mut ValidationReport) {
    let ts = fsm.transitions();
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            if ts[i].from == ts[j].from && !distinguishable(&ts[i], &ts[j]) {
                report.push(
                    ViolationCode::NondeterministicChoice,
                    Location::State(ts[i].from),
                    format!("transitions `{}` and `{}` overlap", ts[i], ts[j]),
                );
            }
        }
    }
}

fn reach(start: StateId, edges: impl Fn(StateId) -> Vec<StateId>) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for n in edges(s) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

fn check_paths(fsm: &InterfaceFsm, report: &mut ValidationReport) {
    let forward = reach(fsm.initial(), |s| fsm.outgoing(s).map(|t| t.to).collect());
    let backward =
        reach(fsm.final_state(), |s| fsm.transitions().iter().filter(|t| t.to == s).map(|t| t.from).collect());
    for &s in fsm.states() {
        if !forward.contains(&s) {
            report.push(ViolationCode::UnreachableState, Location::State(s), "not reachable from the initial state");
        } else if !backward.contains(&s) {
            report.push(ViolationCode::DeadState, Location::State(s), "cannot reach the final state");
        }
    }
}
