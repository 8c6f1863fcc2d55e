use std::collections::HashMap;
use std::fmt::Write as _;

use super::lexer::Cursor;
use super::{DslError, SourceSpan, SpannedViolation};
use crate::ifsm::{
    validate, Action, CallOp, DelayGuard, Dir, InterfaceFsm, Level, Location, Role, SignalDecl, SignalKind, Transition,
};
use crate::StateId;

const CONSUME_DELAY: &str = "consume_delay";

fn is_reserved(word: &str) -> bool {
    CallOp::from_keyword(word).is_some() || word == CONSUME_DELAY
}

/// One action: `SIG!`, `SIG?`, `SIG!1`, `begin_call!`, `consume_delay`.
fn parse_action(cur: &mut Cursor) -> Result<Action, DslError> {
    let (name, _) = cur.expect_ident("action")?;
    if name == CONSUME_DELAY {
        return Ok(Action::ConsumeDelayCycle);
    }
    let dir = if cur.eat_sym("!") {
        Dir::Send
    } else if cur.eat_sym("?") {
        Dir::Receive
    } else {
        return Err(cur.error(&["!", "?"]));
    };
    if let Some(op) = CallOp::from_keyword(&name) {
        return Ok(Action::Call(op, dir));
    }
    if cur.at_int() {
        let (bit, span) = cur.expect_int("bit")?;
        let level = match bit {
            0 => false,
            1 => true,
            _ => return Err(DslError::new("invalid-bit", format!("signal level must be 0 or 1, got {bit}"), span)),
        };
        return Ok(match dir {
            Dir::Send => Action::DriveLevel(name, level),
            Dir::Receive => Action::RequireLevel(name, level),
        });
    }
    Ok(match dir {
        Dir::Send => Action::DriveData(name),
        Dir::Receive => Action::SampleData(name),
    })
}

/// `action ("," action)* ";"`
pub(crate) fn parse_action_list(cur: &mut Cursor) -> Result<Vec<Action>, DslError> {
    let mut actions = vec![parse_action(cur)?];
    while cur.eat_sym(",") {
        actions.push(parse_action(cur)?);
    }
    cur.expect_sym(";")?;
    Ok(actions)
}

/// Optional `[delay_pending]` / `[delay_done]`.
pub(crate) fn parse_guard(cur: &mut Cursor) -> Result<Option<DelayGuard>, DslError> {
    if !cur.eat_sym("[") {
        return Ok(None);
    }
    let (word, span) = cur.expect_ident("guard")?;
    let guard = DelayGuard::from_keyword(&word)
        .ok_or_else(|| DslError::new("unknown-guard", format!("unknown guard `{word}`"), span))?;
    cur.expect_sym("]")?;
    Ok(Some(guard))
}

#[derive(Default)]
pub(crate) struct Decls {
    pub signals: Vec<(SignalDecl, SourceSpan)>,
    pub fields: Vec<(String, SourceSpan)>,
}

/// `signal NAME: data|handshake [active high|low];` and `field NAME;`
pub(crate) fn parse_decls(cur: &mut Cursor) -> Result<Decls, DslError> {
    let mut decls = Decls::default();
    loop {
        if cur.at_kw("signal") {
            cur.expect_kw("signal")?;
            let (name, span) = cur.expect_ident("signal name")?;
            if is_reserved(&name) {
                return Err(DslError::new("reserved-word", format!("`{name}` is reserved"), span));
            }
            cur.expect_sym(":")?;
            let (kind, _) = cur.expect_one_of(&["data", "handshake"])?;
            let mut decl = if kind == "data" { SignalDecl::data(name) } else { SignalDecl::handshake(name) };
            if cur.at_kw("active") {
                cur.expect_kw("active")?;
                let (pol, _) = cur.expect_one_of(&["high", "low"])?;
                decl.active_low = pol == "low";
            }
            cur.expect_sym(";")?;
            decls.signals.push((decl, span));
        } else if cur.at_kw("field") {
            cur.expect_kw("field")?;
            let (name, span) = cur.expect_ident("field name")?;
            cur.expect_sym(";")?;
            decls.fields.push((name, span));
        } else {
            return Ok(decls);
        }
    }
}

pub(crate) fn write_signal_decls(out: &mut String, signals: &[SignalDecl], fields: &[String]) {
    for s in signals {
        let kind = match s.kind {
            SignalKind::Data => "data",
            SignalKind::Handshake => "handshake",
        };
        let pol = if s.active_low { " active low" } else { "" };
        let _ = writeln!(out, "  signal {}: {kind}{pol};", s.name);
    }
    for f in fields {
        let _ = writeln!(out, "  field {f};");
    }
}

pub(crate) fn write_action_list(out: &mut String, actions: &[Action]) {
    for (i, a) in actions.iter().enumerate() {
        let _ = write!(out, "{}{a}", if i == 0 { " " } else { ", " });
    }
    out.push(';');
}

pub(crate) struct Headers {
    pub role: Option<Role>,
    pub level: Option<(Level, SourceSpan)>,
    pub clock: Option<(u64, SourceSpan)>,
}

pub(crate) fn parse_headers(cur: &mut Cursor) -> Result<Headers, DslError> {
    let mut h = Headers { role: None, level: None, clock: None };
    loop {
        let span = cur.span();
        let dup = || DslError::new("duplicate-header", "header given twice", span);
        if cur.at_kw("role") {
            cur.expect_kw("role")?;
            cur.expect_sym("=")?;
            let (r, _) = cur.expect_one_of(&["initiator", "target"])?;
            cur.expect_sym(";")?;
            if h.role.is_some() {
                return Err(dup());
            }
            h.role = Some(if r == "initiator" { Role::Initiator } else { Role::Target });
        } else if cur.at_kw("level") {
            cur.expect_kw("level")?;
            cur.expect_sym("=")?;
            let (l, _) = cur.expect_one_of(&["ca", "pvt"])?;
            cur.expect_sym(";")?;
            if h.level.is_some() {
                return Err(dup());
            }
            h.level = Some((if l == "ca" { Level::Ca } else { Level::Pvt }, span));
        } else if cur.at_kw("clock_period") {
            cur.expect_kw("clock_period")?;
            cur.expect_sym("=")?;
            let (n, _) = cur.expect_int("clock period")?;
            cur.expect_kw("ns")?;
            cur.expect_sym(";")?;
            if h.clock.is_some() {
                return Err(dup());
            }
            h.clock = Some((n, span));
        } else {
            return Ok(h);
        }
    }
}

/// Parse and validate an `.ifsm` document.
pub fn parse_interface_spec(text: &str) -> Result<InterfaceFsm, DslError> {
    let mut cur = Cursor::new(text)?;
    cur.expect_kw("ifsm")?;
    let version_span = cur.span();
    let (version, _) = cur.expect_ident("version")?;
    if version != "v1" {
        return Err(DslError::new("unsupported-version", format!("unsupported version `{version}`"), version_span));
    }
    cur.expect_kw("fsm")?;
    let (name, name_span) = cur.expect_ident("machine name")?;
    cur.expect_sym("{")?;
    let headers = parse_headers(&mut cur)?;
    let decls = parse_decls(&mut cur)?;

    let mut state_spans: HashMap<StateId, SourceSpan> = HashMap::new();
    cur.expect_kw("initial")?;
    cur.expect_sym("=")?;
    let (initial, span) = cur.expect_u32("state")?;
    state_spans.entry(initial).or_insert(span);
    cur.expect_sym(";")?;
    cur.expect_kw("final")?;
    cur.expect_sym("=")?;
    let (final_state, span) = cur.expect_u32("state")?;
    state_spans.entry(final_state).or_insert(span);
    cur.expect_sym(";")?;

    let mut edges: Vec<(Transition, SourceSpan)> = Vec::new();
    while cur.at_kw("on") {
        let on_span = cur.expect_kw("on")?;
        let (from, fspan) = cur.expect_u32("state")?;
        cur.expect_sym("->")?;
        let (to, tspan) = cur.expect_u32("state")?;
        state_spans.entry(from).or_insert(fspan);
        state_spans.entry(to).or_insert(tspan);
        let guard = parse_guard(&mut cur)?;
        cur.expect_sym(":")?;
        let actions = parse_action_list(&mut cur)?;
        edges.push((Transition { from, to, guard, actions }, on_span));
    }
    if !cur.at_sym("}") {
        return Err(cur.error(&["on", "}"]));
    }
    cur.expect_sym("}")?;
    cur.expect_eof()?;

    let role = headers.role.ok_or_else(|| DslError::new("missing-header", "`role` header is required", name_span))?;
    let (level, _) =
        headers.level.ok_or_else(|| DslError::new("missing-header", "`level` header is required", name_span))?;
    match level {
        Level::Pvt => {
            if let Some((_, span)) = headers.clock {
                return Err(DslError::new(
                    "clock-period-forbidden-at-pvt",
                    "transaction-level interfaces take no clock period",
                    span,
                ));
            }
            if let Some((s, span)) = decls.signals.first() {
                return Err(DslError::new(
                    "signal-forbidden-at-pvt",
                    format!("signal `{}` declared in a transaction-level interface", s.name),
                    *span,
                ));
            }
        }
        Level::Ca => {
            if let Some((f, span)) = decls.fields.first() {
                return Err(DslError::new(
                    "field-forbidden-at-ca",
                    format!("field `{f}` declared in a cycle-accurate interface"),
                    *span,
                ));
            }
        }
    }

    let mut b = InterfaceFsm::builder(name, role, level).initial(initial).final_state(final_state);
    if let Some((clock, _)) = headers.clock {
        b = b.clock_period_ns(clock);
    }
    for (s, _) in &decls.signals {
        b = b.signal(s.clone());
    }
    for (f, _) in &decls.fields {
        b = b.field(f.clone());
    }
    for (t, _) in &edges {
        b = b.transition(t.clone());
    }
    let fsm = b.build();

    let report = validate(&fsm);
    if report.is_ok() {
        return Ok(fsm);
    }
    let span_of = |loc: &Location| -> SourceSpan {
        match loc {
            Location::Fsm => name_span,
            Location::State(s) => state_spans.get(s).copied().unwrap_or(name_span),
            Location::Transition { index, .. } => {
                let t = &fsm.transitions()[*index];
                edges.iter().find(|(e, _)| e == t).map(|(_, s)| *s).unwrap_or(name_span)
            }
            Location::Signal(n) => {
                decls.signals.iter().find(|(s, _)| &s.name == n).map(|(_, s)| *s).unwrap_or(name_span)
            }
            Location::Field(n) => decls.fields.iter().find(|(f, _)| f == n).map(|(_, s)| *s).unwrap_or(name_span),
        }
    };
    let violations: Vec<SpannedViolation> =
        report.violations.into_iter().map(|v| SpannedViolation { span: span_of(&v.location), violation: v }).collect();
    let message = violations.iter().map(|v| v.violation.to_string()).collect::<Vec<_>>().join("; ");
    let mut err = DslError::new("validation", message, violations[0].span);
    err.violations = violations;
    Err(err)
}

/// Canonical text: headers in fixed order, declarations as given, one
/// transition per line in `(from, to)` order.
pub fn serialize_fsm(fsm: &InterfaceFsm) -> String {
    let mut out = String::new();
    out.push_str("ifsm v1\n");
    let _ = writeln!(out, "fsm {} {{", fsm.name());
    let _ = writeln!(out, "  role = {};", fsm.role().as_str());
    let _ = writeln!(out, "  level = {};", fsm.level().as_str());
    if let Some(p) = fsm.clock_period_ns() {
        let _ = writeln!(out, "  clock_period = {p} ns;");
    }
    write_signal_decls(&mut out, fsm.signals(), fsm.payload_fields());
    let _ = writeln!(out, "  initial = {}; final = {};", fsm.initial(), fsm.final_state());
    for t in fsm.transitions() {
        let _ = write!(out, "  on {} -> {}", t.from, t.to);
        if let Some(g) = t.guard {
            let _ = write!(out, " [{}]", g.keyword());
        }
        out.push(':');
        write_action_list(&mut out, &t.actions);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}
