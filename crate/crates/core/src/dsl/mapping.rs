use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::lexer::Cursor;
use super::{DslError, SourceSpan};

/// Which way a mapped value travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flow {
    /// `field <- SIGNAL`: sampled on the cycle-accurate side, carried in the
    /// request payload.
    Collect,
    /// `field -> SIGNAL`: arrives with the response, driven onto the
    /// cycle-accurate side.
    Distribute,
}

impl Flow {
    fn arrow(self) -> &'static str {
        match self {
            Flow::Collect => "<-",
            Flow::Distribute => "->",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapEntry {
    pub field: String,
    pub index: Option<u32>,
    pub signal: String,
    pub flow: Flow,
}

impl MapEntry {
    pub fn collect(field: &str, index: Option<u32>, signal: &str) -> Self {
        MapEntry { field: field.into(), index, signal: signal.into(), flow: Flow::Collect }
    }

    pub fn distribute(field: &str, index: Option<u32>, signal: &str) -> Self {
        MapEntry { field: field.into(), index, signal: signal.into(), flow: Flow::Distribute }
    }
}

impl fmt::Display for MapEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.field)?;
        if let Some(i) = self.index {
            write!(f, "[{i}]")?;
        }
        write!(f, " {} {}", self.flow.arrow(), self.signal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("`{0}` is mapped twice")]
    DuplicateEntry(String),
    #[error("`{field}[{found}]` appears where index {expected} was due")]
    NonContiguousIndex { field: String, expected: u32, found: u32 },
    #[error("field `{0}` mixes indexed and unindexed entries")]
    MixedIndexing(String),
}

impl MappingError {
    pub fn code(&self) -> &'static str {
        match self {
            MappingError::DuplicateEntry(_) => "duplicate-entry",
            MappingError::NonContiguousIndex { .. } => "non-contiguous-index",
            MappingError::MixedIndexing(_) => "mixed-indexing",
        }
    }
}

/// Ordered payload binding. Entry order is the order in which values are
/// gathered from, or handed to, the cycle-accurate side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadMapping {
    name: String,
    entries: Vec<MapEntry>,
}

impl PayloadMapping {
    pub fn new(name: impl Into<String>, entries: Vec<MapEntry>) -> Result<Self, MappingError> {
        check_entries(&entries).map_err(|(_, e)| e)?;
        Ok(PayloadMapping { name: name.into(), entries })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of one flow, in order.
    pub fn flow(&self, flow: Flow) -> impl Iterator<Item = &MapEntry> + '_ {
        self.entries.iter().filter(move |e| e.flow == flow)
    }

    pub fn count(&self, flow: Flow) -> usize {
        self.flow(flow).count()
    }

    pub fn maps_signal(&self, signal: &str) -> bool {
        self.entries.iter().any(|e| e.signal == signal)
    }

    /// Copy without the entry at `index`. Skips the invariant check so
    /// callers can build deliberately incomplete mappings.
    pub fn without_entry(&self, index: usize) -> PayloadMapping {
        let mut entries = self.entries.clone();
        entries.remove(index);
        PayloadMapping { name: self.name.clone(), entries }
    }
}

/// Returns the position of the first offending entry.
fn check_entries(entries: &[MapEntry]) -> Result<(), (usize, MappingError)> {
    let mut seen: HashMap<&str, (u32, bool)> = HashMap::new();
    for (pos, e) in entries.iter().enumerate() {
        match seen.get_mut(e.field.as_str()) {
            None => {
                let found = e.index.unwrap_or(0);
                if e.index.is_some() && found != 0 {
                    return Err((pos, MappingError::NonContiguousIndex { field: e.field.clone(), expected: 0, found }));
                }
                seen.insert(&e.field, (1, e.index.is_some()));
            }
            Some((count, indexed)) => {
                match (e.index, *indexed) {
                    (None, false) => return Err((pos, MappingError::DuplicateEntry(e.field.clone()))),
                    (Some(_), false) | (None, true) => return Err((pos, MappingError::MixedIndexing(e.field.clone()))),
                    (Some(i), true) if i < *count => {
                        return Err((pos, MappingError::DuplicateEntry(format!("{}[{i}]", e.field))))
                    }
                    (Some(i), true) if i != *count => {
                        return Err((
                            pos,
                            MappingError::NonContiguousIndex { field: e.field.clone(), expected: *count, found: i },
                        ))
                    }
                    _ => {}
                }
                *count += 1;
            }
        }
    }
    Ok(())
}

/// `map NAME { entry* }`; the `;` after the last entry may be omitted.
pub(crate) fn parse_mapping_block(cur: &mut Cursor) -> Result<PayloadMapping, DslError> {
    cur.expect_kw("map")?;
    let (name, _) = cur.expect_ident("mapping name")?;
    cur.expect_sym("{")?;
    let mut entries = Vec::new();
    let mut spans: Vec<SourceSpan> = Vec::new();
    while !cur.at_sym("}") {
        let (field, span) = cur.expect_ident("field name")?;
        let index = if cur.eat_sym("[") {
            let (i, _) = cur.expect_u32("index")?;
            cur.expect_sym("]")?;
            Some(i)
        } else {
            None
        };
        let flow = if cur.eat_sym("<-") {
            Flow::Collect
        } else if cur.eat_sym("->") {
            Flow::Distribute
        } else {
            return Err(cur.error(&["<-", "->"]));
        };
        let (signal, _) = cur.expect_ident("signal name")?;
        entries.push(MapEntry { field, index, signal, flow });
        spans.push(span);
        if !cur.eat_sym(";") && !cur.at_sym("}") {
            return Err(cur.error(&[";", "}"]));
        }
    }
    cur.expect_sym("}")?;
    if let Err((pos, e)) = check_entries(&entries) {
        return Err(DslError::new(e.code(), e.to_string(), spans[pos]));
    }
    Ok(PayloadMapping { name, entries })
}

pub fn parse_payload_mapping(text: &str) -> Result<PayloadMapping, DslError> {
    let mut cur = Cursor::new(text)?;
    let m = parse_mapping_block(&mut cur)?;
    cur.expect_eof()?;
    Ok(m)
}

pub fn serialize_mapping(m: &PayloadMapping) -> String {
    let mut out = String::new();
    if m.entries.is_empty() {
        let _ = writeln!(out, "map {} {{ }}", m.name);
        return out;
    }
    let _ = writeln!(out, "map {} {{", m.name);
    for e in &m.entries {
        let _ = writeln!(out, "  {e};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_entries_in_order() {
        let m = parse_payload_mapping("map L { addr <- HADDR; data[0] <- HWDATA; data[1] <- HWDATA }").unwrap();
        let fields: Vec<_> = m.entries().iter().map(|e| (e.field.as_str(), e.index)).collect();
        assert_eq!(fields, vec![("addr", None), ("data", Some(0)), ("data", Some(1))]);
        assert_eq!(m.count(Flow::Collect), 3);
    }

    #[test]
    fn empty_body() {
        let m = parse_payload_mapping("map E { }").unwrap();
        assert!(m.is_empty());
        assert_eq!(parse_payload_mapping(&serialize_mapping(&m)).unwrap(), m);
    }

    #[test]
    fn index_gap() {
        let err = parse_payload_mapping("map L {\n  addr <- HADDR;\n  data[1] <- HWDATA;\n}").unwrap_err();
        assert_eq!(err.code, "non-contiguous-index");
        assert_eq!(err.span.line, 3);
    }

    #[test]
    fn duplicates_and_mixing() {
        assert_eq!(parse_payload_mapping("map L { a <- X; a <- X; }").unwrap_err().code, "duplicate-entry");
        assert_eq!(parse_payload_mapping("map L { a[0] <- X; a[0] <- X; }").unwrap_err().code, "duplicate-entry");
        assert_eq!(parse_payload_mapping("map L { a[0] <- X; a <- X; }").unwrap_err().code, "mixed-indexing");
    }

    #[test]
    fn distribute_arrow_round_trips() {
        let m = parse_payload_mapping("map R { addr <- HADDR; data[0] -> HRDATA; }").unwrap();
        assert_eq!(m.entries()[1].flow, Flow::Distribute);
        let text = serialize_mapping(&m);
        assert_eq!(parse_payload_mapping(&text).unwrap(), m);
        assert_eq!(serialize_mapping(&parse_payload_mapping(&text).unwrap()), text);
    }

    #[test]
    fn constructor_checks() {
        let bad = vec![MapEntry::collect("d", Some(0), "X"), MapEntry::collect("d", Some(2), "X")];
        assert_eq!(PayloadMapping::new("m", bad).unwrap_err().code(), "non-contiguous-index");
    }
}
