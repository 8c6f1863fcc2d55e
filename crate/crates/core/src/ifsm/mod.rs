//! Interface finite-state machines.
//!
//! An [`InterfaceFsm`] describes one side of a bus or transaction-level
//! interface: its states, the actions each transition performs, and whether
//! it issues (initiator) or answers (target) transactions. Cycle-accurate
//! machines act on signals; transaction-level machines act on calls.

mod transform;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use crate::StateId;

pub use transform::{
    apply_delay_consumption, complement, find_last_handshake_state, strip_all_self_loops, strip_self_loops,
    TransformError,
};
pub use validate::{validate, Location, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Initiator,
    Target,
}

impl Role {
    pub fn flip(self) -> Role {
        match self {
            Role::Initiator => Role::Target,
            Role::Target => Role::Initiator,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Target => "target",
        }
    }
}

/// Abstraction level of an interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    /// Cycle-accurate: every transition takes one clock period.
    Ca,
    /// Programmer view with time: transitions are function-call events.
    Pvt,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Ca => "ca",
            Level::Pvt => "pvt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalKind {
    Data,
    Handshake,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignalDecl {
    pub name: String,
    pub kind: SignalKind,
    /// Handshake polarity; active-high unless declared otherwise.
    pub active_low: bool,
}

impl SignalDecl {
    pub fn data(name: impl Into<String>) -> Self {
        SignalDecl { name: name.into(), kind: SignalKind::Data, active_low: false }
    }

    pub fn handshake(name: impl Into<String>) -> Self {
        SignalDecl { name: name.into(), kind: SignalKind::Handshake, active_low: false }
    }

    pub fn active_level(&self) -> bool {
        !self.active_low
    }
}

/// Transaction-level operations named by the reserved call keywords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallOp {
    BeginCall,
    Payload,
    EndCall,
    Delay,
    Response,
}

impl CallOp {
    pub const ALL: [CallOp; 5] = [CallOp::BeginCall, CallOp::Payload, CallOp::EndCall, CallOp::Delay, CallOp::Response];

    pub fn keyword(self) -> &'static str {
        match self {
            CallOp::BeginCall => "begin_call",
            CallOp::Payload => "payload",
            CallOp::EndCall => "end_call",
            CallOp::Delay => "delay",
            CallOp::Response => "response",
        }
    }

    pub fn from_keyword(word: &str) -> Option<CallOp> {
        CallOp::ALL.into_iter().find(|op| op.keyword() == word)
    }
}

/// `!` is send / drive, `?` is receive / sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Send,
    Receive,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Send => Dir::Receive,
            Dir::Receive => Dir::Send,
        }
    }

    pub fn mark(self) -> char {
        match self {
            Dir::Send => '!',
            Dir::Receive => '?',
        }
    }
}

/// A single action performed when a transition fires.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    DriveData(String),
    SampleData(String),
    DriveLevel(String, bool),
    RequireLevel(String, bool),
    Call(CallOp, Dir),
    /// Spend one clock period of a pending returned delay.
    ConsumeDelayCycle,
}

impl Action {
    /// The '!'/'?' inversion. `None` for actions that only exist after the
    /// delay-consumption transform.
    pub fn complement(&self) -> Option<Action> {
        Some(match self {
            Action::DriveData(s) => Action::SampleData(s.clone()),
            Action::SampleData(s) => Action::DriveData(s.clone()),
            Action::DriveLevel(s, b) => Action::RequireLevel(s.clone(), *b),
            Action::RequireLevel(s, b) => Action::DriveLevel(s.clone(), *b),
            Action::Call(op, dir) => Action::Call(*op, dir.flip()),
            Action::ConsumeDelayCycle => return None,
        })
    }

    pub fn signal(&self) -> Option<&str> {
        match self {
            Action::DriveData(s) | Action::SampleData(s) | Action::DriveLevel(s, _) | Action::RequireLevel(s, _) => {
                Some(s)
            }
            _ => None,
        }
    }

    pub fn level(&self) -> Option<bool> {
        match self {
            Action::DriveLevel(_, b) | Action::RequireLevel(_, b) => Some(*b),
            _ => None,
        }
    }

    /// Signal-class actions and delay consumption belong to CA machines.
    pub fn is_ca(&self) -> bool {
        !matches!(self, Action::Call(..))
    }

    pub fn is_call(&self, op: CallOp, dir: Dir) -> bool {
        *self == Action::Call(op, dir)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::DriveData(s) => write!(f, "{s}!"),
            Action::SampleData(s) => write!(f, "{s}?"),
            Action::DriveLevel(s, b) => write!(f, "{s}!{}", u8::from(*b)),
            Action::RequireLevel(s, b) => write!(f, "{s}?{}", u8::from(*b)),
            Action::Call(op, dir) => write!(f, "{}{}", op.keyword(), dir.mark()),
            Action::ConsumeDelayCycle => f.write_str("consume_delay"),
        }
    }
}

/// Runtime guard attached by the delay-consumption transform. Both variants
/// imply the returned delay has already been received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DelayGuard {
    /// Remaining delay is at least one more cycle.
    Pending,
    /// Remaining delay is zero.
    Elapsed,
}

impl DelayGuard {
    pub fn keyword(self) -> &'static str {
        match self {
            DelayGuard::Pending => "delay_pending",
            DelayGuard::Elapsed => "delay_done",
        }
    }

    pub fn from_keyword(word: &str) -> Option<DelayGuard> {
        match word {
            "delay_pending" => Some(DelayGuard::Pending),
            "delay_done" => Some(DelayGuard::Elapsed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: StateId,
    pub to: StateId,
    pub guard: Option<DelayGuard>,
    /// Fired atomically; the order only matters for payload binding.
    pub actions: Vec<Action>,
}

impl Transition {
    pub fn new(from: StateId, to: StateId, actions: Vec<Action>) -> Self {
        Transition { from, to, guard: None, actions }
    }

    pub fn guarded(from: StateId, to: StateId, guard: DelayGuard, actions: Vec<Action>) -> Self {
        Transition { from, to, guard: Some(guard), actions }
    }

    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }

    pub fn has(&self, action: &Action) -> bool {
        self.actions.contains(action)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)?;
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

/// A protocol interface: states plus action-labelled transitions.
///
/// Transitions are kept sorted in canonical order (by `from`, then `to`,
/// then guard and actions); the state set always contains every transition
/// endpoint as well as the initial and final states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceFsm {
    name: String,
    role: Role,
    level: Level,
    clock_period_ns: Option<u64>,
    signals: Vec<SignalDecl>,
    payload_fields: Vec<String>,
    states: BTreeSet<StateId>,
    initial: StateId,
    final_state: StateId,
    transitions: Vec<Transition>,
}

impl InterfaceFsm {
    pub fn builder(name: impl Into<String>, role: Role, level: Level) -> FsmBuilder {
        FsmBuilder {
            fsm: InterfaceFsm {
                name: name.into(),
                role,
                level,
                clock_period_ns: None,
                signals: Vec::new(),
                payload_fields: Vec::new(),
                states: BTreeSet::new(),
                initial: 0,
                final_state: 0,
                transitions: Vec::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn clock_period_ns(&self) -> Option<u64> {
        self.clock_period_ns
    }

    pub fn signals(&self) -> &[SignalDecl] {
        &self.signals
    }

    pub fn signal(&self, name: &str) -> Option<&SignalDecl> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn payload_fields(&self) -> &[String] {
        &self.payload_fields
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn final_state(&self) -> StateId {
        self.final_state
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    pub fn out_degree(&self, state: StateId) -> usize {
        self.outgoing(state).count()
    }

    /// True once the delay-consumption transform has been applied.
    pub fn is_delay_transformed(&self) -> bool {
        self.transitions.iter().any(|t| t.guard.is_some() || t.has(&Action::ConsumeDelayCycle))
    }

    pub fn has_action(&self, action: &Action) -> bool {
        self.transitions.iter().any(|t| t.has(action))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub(crate) fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Replace the transition set, keeping declared states.
    pub(crate) fn with_transitions(mut self, transitions: Vec<Transition>) -> Self {
        self.transitions = transitions;
        self.normalize();
        self
    }

    fn normalize(&mut self) {
        self.transitions.sort();
        self.transitions.dedup();
        self.states.insert(self.initial);
        self.states.insert(self.final_state);
        for t in &self.transitions {
            self.states.insert(t.from);
            self.states.insert(t.to);
        }
    }
}

/// Incremental constructor for [`InterfaceFsm`]. Building does not validate;
/// call [`validate`] on the result.
#[derive(Debug, Clone)]
pub struct FsmBuilder {
    fsm: InterfaceFsm,
}

impl FsmBuilder {
    pub fn clock_period_ns(mut self, period: u64) -> Self {
        self.fsm.clock_period_ns = Some(period);
        self
    }

    pub fn signal(mut self, decl: SignalDecl) -> Self {
        self.fsm.signals.push(decl);
        self
    }

    pub fn field(mut self, name: impl Into<String>) -> Self {
        self.fsm.payload_fields.push(name.into());
        self
    }

    pub fn state(mut self, id: StateId) -> Self {
        self.fsm.states.insert(id);
        self
    }

    pub fn initial(mut self, id: StateId) -> Self {
        self.fsm.initial = id;
        self
    }

    pub fn final_state(mut self, id: StateId) -> Self {
        self.fsm.final_state = id;
        self
    }

    pub fn edge(mut self, from: StateId, to: StateId, actions: Vec<Action>) -> Self {
        self.fsm.transitions.push(Transition::new(from, to, actions));
        self
    }

    pub fn transition(mut self, t: Transition) -> Self {
        self.fsm.transitions.push(t);
        self
    }

    pub fn build(mut self) -> InterfaceFsm {
        self.fsm.normalize();
        self.fsm
    }
}

/// Shorthand constructors used by fixtures and generators.
pub mod act {
    use super::{Action, CallOp, Dir};

    pub fn drive(sig: &str) -> Action {
        Action::DriveData(sig.to_string())
    }

    pub fn sample(sig: &str) -> Action {
        Action::SampleData(sig.to_string())
    }

    pub fn set(sig: &str, level: bool) -> Action {
        Action::DriveLevel(sig.to_string(), level)
    }

    pub fn require(sig: &str, level: bool) -> Action {
        Action::RequireLevel(sig.to_string(), level)
    }

    pub fn send(op: CallOp) -> Action {
        Action::Call(op, Dir::Send)
    }

    pub fn recv(op: CallOp) -> Action {
        Action::Call(op, Dir::Receive)
    }
}
