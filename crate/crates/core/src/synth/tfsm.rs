//! `.tfsm` text: a transactor with both side headers, the payload mapping,
//! and one line per edge.
//!
//! ```text
//! tfsm v1
//! transactor ca_write__pvt_txn {
//!   side t ca_write { role = target; level = ca; clock_period = 10 ns; ... }
//!   side i pvt_txn { role = initiator; level = pvt; field addr; ... }
//!   map L { addr <- HADDR; ... }
//!   initial = (0,0); final = (5,2);
//!   on (4,0) -> (4,1) i: begin_call!, payload!; with collected=3, payload_sent=1, call_open=1;
//! }
//! ```
//!
//! The `with` clause lists the non-zero fields of the legality context after
//! the edge; it is omitted when all are zero.

use std::fmt::Write as _;

use super::{LegalityContext, SideInfo, StatePair, TransactorEdge, TransactorFsm};
use crate::dsl::lexer::Cursor;
use crate::dsl::{
    parse_action_list, parse_decls, parse_guard, parse_headers, parse_mapping_block, serialize_mapping,
    write_action_list, write_signal_decls, DslError,
};
use crate::ifsm::Level;

use super::Side;

const CTX_KEYS: [&str; 7] = [
    "collected",
    "distributed",
    "payload_sent",
    "payload_received",
    "delay_received",
    "response_received",
    "call_open",
];

fn ctx_values(c: &LegalityContext) -> [u64; 7] {
    [
        c.collected.into(),
        c.distributed.into(),
        c.payload_sent.into(),
        c.payload_received.into(),
        c.delay_received.into(),
        c.response_received.into(),
        c.call_open.into(),
    ]
}

pub fn serialize_transactor(g: &TransactorFsm) -> String {
    let mut out = String::from("tfsm v1\n");
    let _ = writeln!(out, "transactor {} {{", g.name());
    for side in [Side::T, Side::I] {
        let info = g.side(side);
        let _ = writeln!(out, "  side {} {} {{", side.as_str(), info.name);
        let _ = writeln!(out, "    role = {};", info.role.as_str());
        let _ = writeln!(out, "    level = {};", info.level.as_str());
        if let Some(c) = info.clock_period_ns {
            let _ = writeln!(out, "    clock_period = {c} ns;");
        }
        let mut decls = String::new();
        write_signal_decls(&mut decls, &info.signals, &info.fields);
        for line in decls.lines() {
            let _ = writeln!(out, "  {line}");
        }
        out.push_str("  }\n");
    }
    for line in serialize_mapping(g.mapping()).lines() {
        let _ = writeln!(out, "  {line}");
    }
    let _ = writeln!(out, "  initial = {}; final = {};", g.initial_pair(), g.final_pair());
    for e in g.edges() {
        let _ = write!(out, "  on {} -> {} {}", e.from, e.to, e.side.as_str());
        if let Some(gd) = e.guard {
            let _ = write!(out, " [{}]", gd.keyword());
        }
        out.push(':');
        write_action_list(&mut out, &e.actions);
        let parts: Vec<String> = CTX_KEYS
            .iter()
            .zip(ctx_values(&e.context))
            .filter(|(_, v)| *v != 0)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if !parts.is_empty() {
            let _ = write!(out, " with {};", parts.join(", "));
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn parse_pair(cur: &mut Cursor) -> Result<StatePair, DslError> {
    cur.expect_sym("(")?;
    let (p, _) = cur.expect_u32("state")?;
    cur.expect_sym(",")?;
    let (q, _) = cur.expect_u32("state")?;
    cur.expect_sym(")")?;
    Ok(StatePair::new(p, q))
}

fn parse_side(cur: &mut Cursor, expected: &'static str) -> Result<SideInfo, DslError> {
    cur.expect_kw("side")?;
    cur.expect_kw(expected)?;
    let (name, name_span) = cur.expect_ident("side name")?;
    cur.expect_sym("{")?;
    let h = parse_headers(cur)?;
    let decls = parse_decls(cur)?;
    cur.expect_sym("}")?;
    let role = h.role.ok_or_else(|| DslError::new("missing-header", "`role` header is required", name_span))?;
    let (level, _) = h.level.ok_or_else(|| DslError::new("missing-header", "`level` header is required", name_span))?;
    if let (Level::Pvt, Some((_, span))) = (level, h.clock) {
        return Err(DslError::new(
            "clock-period-forbidden-at-pvt",
            "transaction-level side takes no clock period",
            span,
        ));
    }
    Ok(SideInfo {
        name,
        role,
        level,
        clock_period_ns: h.clock.map(|(c, _)| c),
        signals: decls.signals.into_iter().map(|(s, _)| s).collect(),
        fields: decls.fields.into_iter().map(|(f, _)| f).collect(),
    })
}

fn parse_context(cur: &mut Cursor) -> Result<LegalityContext, DslError> {
    let mut c = LegalityContext::default();
    if !cur.at_kw("with") {
        return Ok(c);
    }
    cur.expect_kw("with")?;
    loop {
        let (key, _) = cur.expect_one_of(&CTX_KEYS)?;
        cur.expect_sym("=")?;
        let (v, span) = cur.expect_u32("value")?;
        let flag = || match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(DslError::new("invalid-bit", format!("`{key}` must be 0 or 1"), span)),
        };
        match key {
            "collected" => c.collected = v,
            "distributed" => c.distributed = v,
            "payload_sent" => c.payload_sent = flag()?,
            "payload_received" => c.payload_received = flag()?,
            "delay_received" => c.delay_received = flag()?,
            "response_received" => c.response_received = flag()?,
            _ => c.call_open = flag()?,
        }
        if !cur.eat_sym(",") {
            break;
        }
    }
    cur.expect_sym(";")?;
    Ok(c)
}

/// Parse a `.tfsm` document. Edges must each advance a single side.
pub fn parse_transactor(text: &str) -> Result<TransactorFsm, DslError> {
    let mut cur = Cursor::new(text)?;
    cur.expect_kw("tfsm")?;
    let vspan = cur.span();
    let (version, _) = cur.expect_ident("version")?;
    if version != "v1" {
        return Err(DslError::new("unsupported-version", format!("unsupported version `{version}`"), vspan));
    }
    cur.expect_kw("transactor")?;
    let (name, _) = cur.expect_ident("transactor name")?;
    cur.expect_sym("{")?;
    let t = parse_side(&mut cur, "t")?;
    let i = parse_side(&mut cur, "i")?;
    let mapping = parse_mapping_block(&mut cur)?;
    cur.expect_kw("initial")?;
    cur.expect_sym("=")?;
    let initial = parse_pair(&mut cur)?;
    cur.expect_sym(";")?;
    cur.expect_kw("final")?;
    cur.expect_sym("=")?;
    let final_pair = parse_pair(&mut cur)?;
    cur.expect_sym(";")?;
    let mut edges = Vec::new();
    while cur.at_kw("on") {
        let span = cur.expect_kw("on")?;
        let from = parse_pair(&mut cur)?;
        cur.expect_sym("->")?;
        let to = parse_pair(&mut cur)?;
        let (side, _) = cur.expect_one_of(&["t", "i"])?;
        let side = if side == "t" { Side::T } else { Side::I };
        let guard = parse_guard(&mut cur)?;
        cur.expect_sym(":")?;
        let actions = parse_action_list(&mut cur)?;
        let context = parse_context(&mut cur)?;
        let single_sided = match side {
            Side::T => from.q == to.q,
            Side::I => from.p == to.p,
        };
        if !single_sided {
            return Err(DslError::new(
                "not-single-sided",
                format!("edge {from} -> {to} changes a state the `{}` side does not own", side.as_str()),
                span,
            ));
        }
        edges.push(TransactorEdge { from, to, side, guard, actions, context });
    }
    if !cur.at_sym("}") {
        return Err(cur.error(&["on", "}"]));
    }
    cur.expect_sym("}")?;
    cur.expect_eof()?;
    Ok(TransactorFsm::from_parts(name, t, i, mapping, initial, final_pair, edges))
}
