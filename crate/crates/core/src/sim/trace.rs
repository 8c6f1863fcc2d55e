//! Trace files and the per-transaction comparison against a reference run.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use num_rational::Ratio;
use thiserror::Error;

use super::{RecordSide, TransactionRecord};
use crate::protocols::TransferKind;
use crate::TimeNs;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time_ns: TimeNs,
    pub component: String,
    pub description: String,
}

/// Bookkeeping for one transaction; not part of the trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxnStats {
    pub txn_id: u64,
    pub kind: TransferKind,
    pub burst_len: u32,
    pub returned_delay_ns: u64,
    /// Cycles the bus side spent holding its last handshake.
    pub hold_cycles: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimTrace {
    /// Sorted by transaction id, bus side first.
    pub records: Vec<TransactionRecord>,
    pub events: Vec<Event>,
    pub stats: Vec<TxnStats>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace-format: line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("orphan-record: txn {txn_id} has no {missing} record")]
    OrphanRecord { txn_id: u64, missing: &'static str },
    #[error("duplicate-record: txn {txn_id} has two {side} records")]
    DuplicateRecord { txn_id: u64, side: &'static str },
}

impl TraceError {
    pub fn code(&self) -> &'static str {
        match self {
            TraceError::Format { .. } => "trace-format",
            TraceError::OrphanRecord { .. } => "orphan-record",
            TraceError::DuplicateRecord { .. } => "duplicate-record",
        }
    }
}

const HEADER: [&str; 5] = ["txn_id", "side", "begin_ns", "end_ns", "payload_digest"];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

impl SimTrace {
    pub fn to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(HEADER).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.txn_id.to_string(),
                r.side.as_str().to_string(),
                r.begin_ns.to_string(),
                r.end_ns.to_string(),
                format!("{:016x}", r.payload_digest),
            ])
            .expect("in-memory write");
        }
        finish(w)
    }

    /// Records only; events and statistics are not stored in trace files.
    pub fn from_csv(text: &str) -> Result<SimTrace, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let bad = |line: usize, message: String| TraceError::Format { line, message };
        let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if headers.iter().ne(HEADER.iter().copied()) {
            return Err(bad(1, format!("expected columns {}", HEADER.join(","))));
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(line, e.to_string()))?;
            let num = |k: usize, name: &str| -> Result<u64, TraceError> {
                rec.get(k)
                    .ok_or_else(|| bad(line, format!("missing {name}")))?
                    .parse()
                    .map_err(|e| bad(line, format!("{name}: {e}")))
            };
            let side = match rec.get(1) {
                Some("ca") => RecordSide::Ca,
                Some("pvt") => RecordSide::Pvt,
                other => return Err(bad(line, format!("side must be ca or pvt, got {other:?}"))),
            };
            let digest = rec.get(4).ok_or_else(|| bad(line, "missing payload_digest".into()))?;
            let r = TransactionRecord {
                txn_id: num(0, "txn_id")?,
                side,
                begin_ns: num(2, "begin_ns")?,
                end_ns: num(3, "end_ns")?,
                payload_digest: u64::from_str_radix(digest, 16)
                    .map_err(|e| bad(line, format!("payload_digest: {e}")))?,
            };
            if r.end_ns < r.begin_ns {
                return Err(bad(line, format!("end {} before begin {}", r.end_ns, r.begin_ns)));
            }
            records.push(r);
        }
        records.sort();
        Ok(SimTrace { records, ..SimTrace::default() })
    }

    pub fn events_to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(["time_ns", "component", "description"]).expect("in-memory write");
        for e in &self.events {
            w.write_record([e.time_ns.to_string().as_str(), &e.component, &e.description]).expect("in-memory write");
        }
        finish(w)
    }

    pub fn side(&self, side: RecordSide) -> impl Iterator<Item = &TransactionRecord> {
        self.records.iter().filter(move |r| r.side == side)
    }
}

/// Bus-side and call-side records paired by transaction id.
pub fn extract_transactions(
    trace: &SimTrace,
) -> Result<BTreeMap<u64, (TransactionRecord, TransactionRecord)>, TraceError> {
    let mut ca = BTreeMap::new();
    let mut pvt = BTreeMap::new();
    for r in &trace.records {
        let map = match r.side {
            RecordSide::Ca => &mut ca,
            RecordSide::Pvt => &mut pvt,
        };
        if map.insert(r.txn_id, *r).is_some() {
            return Err(TraceError::DuplicateRecord { txn_id: r.txn_id, side: r.side.as_str() });
        }
    }
    if let Some(id) = pvt.keys().find(|id| !ca.contains_key(*id)) {
        return Err(TraceError::OrphanRecord { txn_id: *id, missing: "ca" });
    }
    ca.into_iter()
        .map(|(id, c)| {
            let p = pvt.get(&id).ok_or(TraceError::OrphanRecord { txn_id: id, missing: "pvt" })?;
            Ok((id, (c, *p)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("workload-mismatch: {0}")]
    WorkloadMismatch(String),
}

impl CompareError {
    pub fn code(&self) -> &'static str {
        match self {
            CompareError::Trace(e) => e.code(),
            CompareError::WorkloadMismatch(_) => "workload-mismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxnVerdict {
    pub txn_id: u64,
    pub ca_timing_ok: bool,
    pub pvt_timing_ok: bool,
    pub payload_ok: bool,
}

impl TxnVerdict {
    pub fn is_ok(&self) -> bool {
        self.ca_timing_ok && self.pvt_timing_ok && self.payload_ok
    }
}

impl fmt::Display for TxnVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        f.write_str("error")?;
        for (ok, what) in
            [(self.ca_timing_ok, "ca-timing"), (self.pvt_timing_ok, "pvt-timing"), (self.payload_ok, "payload")]
        {
            if !ok {
                write!(f, " {what}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorReport {
    pub verdicts: Vec<TxnVerdict>,
    pub erroneous: u64,
    pub total: u64,
}

impl ErrorReport {
    pub fn error_rate(&self) -> Ratio<u64> {
        Ratio::new(self.erroneous, self.total.max(1))
    }

    /// Percentage with one decimal, rounded half up.
    pub fn percent(&self) -> String {
        let t = self.total.max(1);
        let permille = (self.erroneous * 2000 + t) / (2 * t);
        format!("{}.{}", permille / 10, permille % 10)
    }

    /// `key = value` lines, one verdict per transaction.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "report_version = 1");
        let _ = writeln!(s, "total = {}", self.total);
        let _ = writeln!(s, "erroneous = {}", self.erroneous);
        let _ = writeln!(s, "error_rate = {}/{}", self.erroneous, self.total);
        let _ = writeln!(s, "error_rate_percent = {}", self.percent());
        for v in &self.verdicts {
            let _ = writeln!(s, "txn.{} = {v}", v.txn_id);
        }
        s
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error_rate: {}/{} = {}%", self.erroneous, self.total, self.percent())
    }
}

/// A transaction is erroneous when either side's begin or end time, or
/// either side's payload, differs from the reference.
pub fn compare_traces(test: &SimTrace, reference: &SimTrace) -> Result<ErrorReport, CompareError> {
    let a = extract_transactions(test)?;
    let b = extract_transactions(reference)?;
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return Err(CompareError::WorkloadMismatch(format!(
            "{} transactions under test, {} in the reference",
            a.len(),
            b.len()
        )));
    }
    let same_time = |x: &TransactionRecord, y: &TransactionRecord| x.begin_ns == y.begin_ns && x.end_ns == y.end_ns;
    let verdicts: Vec<TxnVerdict> = a
        .iter()
        .map(|(id, (tc, tp))| {
            let (rc, rp) = &b[id];
            TxnVerdict {
                txn_id: *id,
                ca_timing_ok: same_time(tc, rc),
                pvt_timing_ok: same_time(tp, rp),
                payload_ok: tc.payload_digest == rc.payload_digest && tp.payload_digest == rp.payload_digest,
            }
        })
        .collect();
    let erroneous = verdicts.iter().filter(|v| !v.is_ok()).count() as u64;
    Ok(ErrorReport { total: verdicts.len() as u64, erroneous, verdicts })
}
