//! Text formats: `.ifsm` interface machines and `.pmap` payload mappings.
//!
//! Interface files start with an `ifsm v1` line:
//!
//! ```text
//! ifsm v1
//! fsm ca_write {
//!   role = initiator;
//!   level = ca;
//!   clock_period = 10 ns;
//!   signal HADDR: data;
//!   signal HREADY: handshake;
//!   initial = 0; final = 5;
//!   on 0 -> 1: HTRANS!1, HADDR!;
//!   on 4 -> 4 [delay_pending]: HREADY!0, consume_delay;
//! }
//! ```
//!
//! `#` starts a comment. `consume_delay` and the bracketed `delay_pending` /
//! `delay_done` guards only appear in machines that went through the
//! delay-consumption transform.

mod fsm;
pub(crate) mod lexer;
mod mapping;

use std::fmt;

use thiserror::Error;

use crate::ifsm::Violation;

pub use fsm::{parse_interface_spec, serialize_fsm};
pub use mapping::{parse_payload_mapping, serialize_mapping, Flow, MapEntry, MappingError, PayloadMapping};

pub(crate) use fsm::{
    parse_action_list, parse_decls, parse_guard, parse_headers, write_action_list, write_signal_decls,
};
pub(crate) use mapping::parse_mapping_block;

/// 1-based position of a token in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedViolation {
    pub violation: Violation,
    pub span: SourceSpan,
}

/// A parse or validation failure with its location.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {code}: {message}")]
pub struct DslError {
    /// Stable kebab-case identifier, e.g. `syntax` or `non-contiguous-index`.
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
    /// Tokens that would have been accepted, for syntax errors.
    pub expected: Vec<String>,
    pub violations: Vec<SpannedViolation>,
}

impl DslError {
    pub(crate) fn new(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        DslError { code, message: message.into(), span, expected: Vec::new(), violations: Vec::new() }
    }
}
