//! Seeded synthetic transfer sequences.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransferKind {
    Write,
    Read,
}

impl TransferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Write => "write",
            TransferKind::Read => "read",
        }
    }
}

impl FromStr for TransferKind {
    type Err = WorkloadError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "write" => Ok(TransferKind::Write),
            "read" => Ok(TransferKind::Read),
            _ => Err(WorkloadError::Format(format!("unknown transfer kind `{s}`"))),
        }
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transfer {
    pub kind: TransferKind,
    pub burst_len: u32,
    /// Idle bus cycles before the transfer starts.
    pub idle_gap_cycles: u32,
    /// Seed of the transfer's data values; opaque otherwise.
    pub payload_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub transfers: Vec<Transfer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkloadKind {
    GeneralChannel,
    Multimedia,
    Mixed,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 3] = [WorkloadKind::GeneralChannel, WorkloadKind::Multimedia, WorkloadKind::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadKind::GeneralChannel => "general_channel",
            WorkloadKind::Multimedia => "multimedia",
            WorkloadKind::Mixed => "mixed",
        }
    }
}

impl FromStr for WorkloadKind {
    type Err = WorkloadError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WorkloadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkloadError::Format(format!("unknown workload `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("workload-format: {0}")]
    Format(String),
}

pub const GENERAL_BURSTS: [u32; 5] = [1, 2, 4, 8, 16];
pub const MULTIMEDIA_BURSTS: [u32; 3] = [4, 8, 16];

fn general_transfer(rng: &mut ChaCha8Rng) -> Transfer {
    Transfer {
        kind: if rng.gen_ratio(1, 2) { TransferKind::Write } else { TransferKind::Read },
        burst_len: *GENERAL_BURSTS.choose(rng).expect("non-empty"),
        idle_gap_cycles: rng.gen_range(0..=3),
        payload_digest: rng.gen(),
    }
}

/// Two sources into one destination (read, read, write) or one source into
/// two destinations (read, write, write), back to back.
fn multimedia_pattern(rng: &mut ChaCha8Rng, two_sources: bool) -> Vec<Transfer> {
    use TransferKind::{Read, Write};
    let kinds = if two_sources { [Read, Read, Write] } else { [Read, Write, Write] };
    let burst_len = *MULTIMEDIA_BURSTS.choose(rng).expect("non-empty");
    let lead_gap = rng.gen_range(1..=4);
    kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| Transfer {
            kind,
            burst_len,
            idle_gap_cycles: if k == 0 { lead_gap } else { 0 },
            payload_digest: rng.gen(),
        })
        .collect()
}

/// `n` transfers of the given shape, reproducible from `seed`.
pub fn generate_workload(kind: WorkloadKind, n: usize, seed: u64) -> WorkloadSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transfers = Vec::with_capacity(n + 2);
    let mut two_sources = true;
    while transfers.len() < n {
        let general = match kind {
            WorkloadKind::GeneralChannel => true,
            WorkloadKind::Multimedia => false,
            WorkloadKind::Mixed => rng.gen_ratio(1, 2),
        };
        if general {
            transfers.push(general_transfer(&mut rng));
        } else {
            transfers.extend(multimedia_pattern(&mut rng, two_sources));
            two_sources = !two_sources;
        }
    }
    transfers.truncate(n);
    WorkloadSpec { seed, transfers }
}

/// `n` identical transfers (payload values still vary with `seed`).
pub fn uniform_workload(kind: TransferKind, burst_len: u32, idle_gap_cycles: u32, n: usize, seed: u64) -> WorkloadSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transfers = (0..n).map(|_| Transfer { kind, burst_len, idle_gap_cycles, payload_digest: rng.gen() }).collect();
    WorkloadSpec { seed, transfers }
}

const HEADER: [&str; 4] = ["kind", "burst_len", "idle_gap_cycles", "payload_digest"];

pub fn serialize_workload(w: &WorkloadSpec) -> String {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    wtr.write_record(HEADER).expect("in-memory write");
    for t in &w.transfers {
        wtr.write_record([
            t.kind.as_str().to_string(),
            t.burst_len.to_string(),
            t.idle_gap_cycles.to_string(),
            format!("{:016x}", t.payload_digest),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii");
    format!("# seed={}\n{body}", w.seed)
}

pub fn parse_workload(text: &str) -> Result<WorkloadSpec, WorkloadError> {
    let bad = |m: String| WorkloadError::Format(m);
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let seed = first
        .trim()
        .strip_prefix("# seed=")
        .ok_or_else(|| bad("missing `# seed=` header line".into()))?
        .parse::<u64>()
        .map_err(|e| bad(format!("seed: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(bad(format!("expected columns {}", HEADER.join(","))));
    }
    let mut transfers = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 3;
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("line {line}: missing column")));
        let burst_len: u32 = field(1)?.parse().map_err(|e| bad(format!("line {line}: burst_len: {e}")))?;
        if burst_len == 0 {
            return Err(bad(format!("line {line}: burst_len must be at least 1")));
        }
        transfers.push(Transfer {
            kind: field(0)?.parse()?,
            burst_len,
            idle_gap_cycles: field(2)?.parse().map_err(|e| bad(format!("line {line}: idle_gap_cycles: {e}")))?,
            payload_digest: u64::from_str_radix(field(3)?, 16)
                .map_err(|e| bad(format!("line {line}: payload_digest: {e}")))?,
        });
    }
    Ok(WorkloadSpec { seed, transfers })
}
