//! Structural rewrites applied to interface machines before synthesis.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{Action, DelayGuard, InterfaceFsm, Level, SignalKind, Transition};
use crate::StateId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("no-complement: action `{0}` has no complement")]
    NoComplement(String),
    #[error("not-cycle-accurate: `{0}` is not a cycle-accurate interface")]
    NotCycleAccurate(String),
    #[error("no-last-handshake: no state raises a handshake on entry to final state {0}")]
    NoLastHandshake(StateId),
    #[error("ambiguous-last-handshake: states {0:?} all raise a handshake into the final state")]
    AmbiguousLastHandshake(Vec<StateId>),
    #[error("already-transformed: `{0}` already carries a delay-consumption model")]
    AlreadyTransformed(String),
}

impl TransformError {
    pub fn code(&self) -> &'static str {
        match self {
            TransformError::NoComplement(_) => "no-complement",
            TransformError::NotCycleAccurate(_) => "not-cycle-accurate",
            TransformError::NoLastHandshake(_) => "no-last-handshake",
            TransformError::AmbiguousLastHandshake(_) => "ambiguous-last-handshake",
            TransformError::AlreadyTransformed(_) => "already-transformed",
        }
    }
}

/// Invert every action ('!' <-> '?') and flip the role. The state graph,
/// level, clock, signals and fields are untouched.
pub fn complement(fsm: &InterfaceFsm) -> Result<InterfaceFsm, TransformError> {
    let mut transitions = Vec::with_capacity(fsm.transitions().len());
    for t in fsm.transitions() {
        if let Some(g) = t.guard {
            return Err(TransformError::NoComplement(format!("[{}]", g.keyword())));
        }
        let actions = t
            .actions
            .iter()
            .map(|a| a.complement().ok_or_else(|| TransformError::NoComplement(a.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        transitions.push(Transition { actions, ..t.clone() });
    }
    Ok(fsm.clone().with_role(fsm.role().flip()).with_transitions(transitions))
}

/// The level action on a handshake signal that drives or requires its active
/// level, if the transition has one.
fn raised_handshake<'a>(fsm: &InterfaceFsm, t: &'a Transition) -> Option<&'a Action> {
    t.actions.iter().find(|a| {
        let (Some(name), Some(level)) = (a.signal(), a.level()) else { return false };
        fsm.signal(name).is_some_and(|s| s.kind == SignalKind::Handshake && s.active_level() == level)
    })
}

/// The unique state whose transition into the final state raises a
/// handshake signal.
pub fn find_last_handshake_state(fsm: &InterfaceFsm) -> Result<StateId, TransformError> {
    if fsm.level() != Level::Ca {
        return Err(TransformError::NotCycleAccurate(fsm.name().to_string()));
    }
    let candidates: BTreeSet<StateId> = fsm
        .transitions()
        .iter()
        .filter(|t| t.to == fsm.final_state() && !t.is_self_loop())
        .filter(|t| raised_handshake(fsm, t).is_some())
        .map(|t| t.from)
        .collect();
    let mut it = candidates.iter();
    match (it.next(), it.next()) {
        (None, _) => Err(TransformError::NoLastHandshake(fsm.final_state())),
        (Some(&s), None) => Ok(s),
        _ => Err(TransformError::AmbiguousLastHandshake(candidates.into_iter().collect())),
    }
}

/// Turn the last handshake state into a delay-consumption model.
///
/// Existing self-loops on that state are replaced by one guarded loop that
/// holds the handshake inactive and spends a cycle of the returned delay;
/// every transition from it into the final state is guarded on the delay
/// being fully consumed.
pub fn apply_delay_consumption(fsm: &InterfaceFsm) -> Result<InterfaceFsm, TransformError> {
    if fsm.is_delay_transformed() {
        return Err(TransformError::AlreadyTransformed(fsm.name().to_string()));
    }
    let last = find_last_handshake_state(fsm)?;
    let final_state = fsm.final_state();
    let hold = fsm
        .outgoing(last)
        .filter(|t| t.to == final_state)
        .find_map(|t| raised_handshake(fsm, t))
        .map(|a| match a {
            Action::DriveLevel(s, level) => Action::DriveLevel(s.clone(), !level),
            Action::RequireLevel(s, level) => Action::RequireLevel(s.clone(), !level),
            _ => unreachable!("raised_handshake only returns level actions"),
        })
        .expect("last handshake state has a raising transition");

    let mut transitions: Vec<Transition> = fsm
        .transitions()
        .iter()
        .filter(|t| !(t.from == last && t.is_self_loop()))
        .map(|t| {
            let mut t = t.clone();
            if t.from == last && t.to == final_state {
                t.guard = Some(DelayGuard::Elapsed);
            }
            t
        })
        .collect();
    transitions.push(Transition::guarded(last, last, DelayGuard::Pending, vec![hold, Action::ConsumeDelayCycle]));
    Ok(fsm.clone().with_transitions(transitions))
}

/// Remove wait-state self-loops, keeping only those on the last handshake
/// state where completion timing is adjusted. Machines without a last
/// handshake state lose all self-loops.
pub fn strip_self_loops(fsm: &InterfaceFsm) -> InterfaceFsm {
    let keep = find_last_handshake_state(fsm).ok();
    let transitions = fsm.transitions().iter().filter(|t| !t.is_self_loop() || Some(t.from) == keep).cloned().collect();
    fsm.clone().with_transitions(transitions)
}

/// Remove every self-loop. Used by the conventional baseline, which never
/// inserts wait states.
pub fn strip_all_self_loops(fsm: &InterfaceFsm) -> InterfaceFsm {
    let transitions = fsm.transitions().iter().filter(|t| !t.is_self_loop()).cloned().collect();
    fsm.clone().with_transitions(transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifsm::act::*;
    use crate::ifsm::{validate, CallOp, Role, SignalDecl};
    use crate::protocols::reference_models;

    fn ca(name: &str) -> crate::ifsm::FsmBuilder {
        InterfaceFsm::builder(name, Role::Target, Level::Ca)
            .clock_period_ns(10)
            .signal(SignalDecl::data("D"))
            .signal(SignalDecl::handshake("R"))
            .initial(0)
    }

    #[test]
    fn complement_of_ca_initiator_is_target() {
        let lib = reference_models();
        assert_eq!(complement(&lib.ca_initiator).unwrap(), lib.ca_target);
        assert_eq!(complement(&lib.pvt_initiator).unwrap(), lib.pvt_target);
    }

    #[test]
    fn complement_flips_call_marks() {
        let lib = reference_models();
        let t = complement(&lib.pvt_initiator).unwrap();
        assert_eq!(t.role(), Role::Target);
        assert_eq!(t.transitions()[0].actions, vec![recv(CallOp::BeginCall), recv(CallOp::Payload)]);
    }

    #[test]
    fn complement_rejects_transformed() {
        let lib = reference_models();
        let t = apply_delay_consumption(&lib.ca_target).unwrap();
        assert_eq!(complement(&t).unwrap_err().code(), "no-complement");
    }

    #[test]
    fn last_handshake_of_reference_target() {
        let lib = reference_models();
        assert_eq!(find_last_handshake_state(&lib.ca_target), Ok(4));
    }

    #[test]
    fn last_handshake_two_state() {
        let fsm = ca("two").final_state(1).edge(0, 1, vec![set("R", true)]).build();
        assert_eq!(find_last_handshake_state(&fsm), Ok(0));
    }

    #[test]
    fn last_handshake_ambiguous() {
        let fsm = ca("amb")
            .final_state(3)
            .edge(0, 1, vec![sample("D")])
            .edge(0, 2, vec![sample("D"), set("R", false)])
            .edge(1, 3, vec![set("R", true)])
            .edge(2, 3, vec![set("R", true)])
            .build();
        // oracle: enumerate predecessors of final and count the raising ones
        let raising: BTreeSet<_> = fsm
            .transitions()
            .iter()
            .filter(|t| t.to == 3 && t.actions.contains(&set("R", true)))
            .map(|t| t.from)
            .collect();
        assert_eq!(raising.len(), 2);
        assert_eq!(
            find_last_handshake_state(&fsm),
            Err(TransformError::AmbiguousLastHandshake(raising.into_iter().collect()))
        );
    }

    #[test]
    fn last_handshake_missing() {
        let fsm = ca("none").final_state(1).edge(0, 1, vec![sample("D")]).build();
        assert_eq!(find_last_handshake_state(&fsm), Err(TransformError::NoLastHandshake(1)));
        // inactive level does not count as raising
        let fsm = ca("low").final_state(1).edge(0, 1, vec![set("R", false)]).build();
        assert!(matches!(find_last_handshake_state(&fsm), Err(TransformError::NoLastHandshake(_))));
    }

    #[test]
    fn active_low_handshake_is_held_high() {
        let fsm = InterfaceFsm::builder("n", Role::Target, Level::Ca)
            .clock_period_ns(10)
            .signal(SignalDecl { active_low: true, ..SignalDecl::handshake("RDY_N") })
            .final_state(1)
            .edge(0, 1, vec![set("RDY_N", false)])
            .build();
        let t = apply_delay_consumption(&fsm).unwrap();
        let hold = t.outgoing(0).find(|t| t.is_self_loop()).unwrap();
        assert_eq!(hold.actions, vec![set("RDY_N", true), Action::ConsumeDelayCycle]);
    }

    #[test]
    fn delay_consumption_on_reference_target() {
        let lib = reference_models();
        let t = apply_delay_consumption(&lib.ca_target).unwrap();
        assert!(validate(&t).is_ok(), "{:?}", validate(&t).violations);
        let at4: Vec<_> = t.outgoing(4).collect();
        assert_eq!(at4.len(), 2);
        assert_eq!(
            *at4[0],
            Transition::guarded(4, 4, DelayGuard::Pending, vec![set("HREADY", false), Action::ConsumeDelayCycle])
        );
        assert_eq!(at4[1].to, 5);
        assert_eq!(at4[1].guard, Some(DelayGuard::Elapsed));
        assert_eq!(apply_delay_consumption(&t).unwrap_err(), TransformError::AlreadyTransformed(t.name().to_string()));
    }

    #[test]
    fn final_needs_delay_token_after_transform() {
        let lib = reference_models();
        let t = apply_delay_consumption(&strip_self_loops(&lib.ca_target)).unwrap();
        // search without the delay token: guarded edges are closed
        let mut seen = BTreeSet::from([t.initial()]);
        let mut stack = vec![t.initial()];
        while let Some(s) = stack.pop() {
            for e in t.outgoing(s).filter(|e| e.guard.is_none()) {
                if seen.insert(e.to) {
                    stack.push(e.to);
                }
            }
        }
        assert!(!seen.contains(&t.final_state()));
    }

    #[test]
    fn strip_keeps_last_handshake_loop() {
        let lib = reference_models();
        let before = lib.ca_target.transitions().iter().filter(|t| t.is_self_loop()).count();
        let stripped = strip_self_loops(&lib.ca_target);
        let loops: Vec<_> = stripped.transitions().iter().filter(|t| t.is_self_loop()).collect();
        assert_eq!(before, 3);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].from, 4);
        let non_loops = |f: &InterfaceFsm| -> Vec<Transition> {
            f.transitions().iter().filter(|t| !t.is_self_loop()).cloned().collect()
        };
        assert_eq!(non_loops(&stripped), non_loops(&lib.ca_target));
    }

    #[test]
    fn strip_three_loops_removes_two() {
        let fsm = ca("loops")
            .final_state(5)
            .edge(0, 1, vec![sample("D")])
            .edge(1, 1, vec![set("R", false)])
            .edge(1, 2, vec![set("R", true)])
            .edge(2, 2, vec![set("R", false)])
            .edge(2, 4, vec![set("R", true)])
            .edge(4, 4, vec![set("R", false)])
            .edge(4, 5, vec![set("R", true)])
            .build();
        let stripped = strip_self_loops(&fsm);
        let removed: BTreeSet<_> = fsm.transitions().iter().filter(|t| !stripped.transitions().contains(t)).collect();
        assert_eq!(removed.len(), 2);
        assert!(removed.iter().all(|t| t.is_self_loop() && t.from != 4));
    }

    #[test]
    fn strip_without_loops_is_identity() {
        let lib = reference_models();
        assert_eq!(strip_self_loops(&lib.pvt_initiator), lib.pvt_initiator);
    }
}
