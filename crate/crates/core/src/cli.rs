//! Command-line driver: `synth`, `sim`, `compare`, `export-refs`.
//!
//! Exit codes: 0 ok, 2 bad input, 3 synthesis failure, 4 simulation
//! failure, 5 comparison mismatch. Every input is read and checked before
//! any output file is written.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use thiserror::Error;

use crate::dsl::{parse_interface_spec, parse_payload_mapping, DslError};
use crate::ifsm::{complement, InterfaceFsm};
use crate::protocols::{
    components_of, conventional_synthesis, generate_workload, parse_workload, reference_files, serialize_workload,
    shape_of, standard_bridges, uniform_workload, BridgeFlavor, TransferKind, WorkloadKind, WorkloadSpec,
};
use crate::sim::{
    compare_traces, run_with_config, Bridge, BridgeSet, DelayModel, ErrorReport, RoundingPolicy, SimConfig, SimMode,
    SimTrace,
};
use crate::synth::{parse_transactor, serialize_transactor, synthesize_bridge, SynthError, Synthesis, TransactorFsm};

#[derive(Debug, Parser)]
#[command(name = "tlmbridge", version, about = "Timing-coherent transactor synthesis and co-simulation")]
pub struct Cli {
    /// More diagnostics on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a transactor from two interface machines and a payload mapping.
    Synth(SynthArgs),
    /// Run a workload through a transactor (or the baseline / reference).
    Sim(SimArgs),
    /// Compare a trace against a reference trace.
    Compare(CompareArgs),
    /// Write the embedded reference models to a directory.
    ExportRefs(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Bus-side initiator (`.ifsm`).
    #[arg(long)]
    pub initiator: PathBuf,
    /// Transaction-level target (`.ifsm`).
    #[arg(long)]
    pub target: PathBuf,
    /// Payload mapping (`.pmap`).
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Build the conventional (timing-incoherent) baseline instead.
    #[arg(long)]
    pub conventional: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Synthesized transactor (`.tfsm`); repeat for several transfer shapes.
    /// Without one, bridges are synthesized from the built-in burst family.
    #[arg(long, conflicts_with = "reference")]
    pub transactor: Vec<PathBuf>,
    #[arg(long, conflicts_with = "reference")]
    pub conventional: bool,
    /// Run the pure bus-level oracle configuration.
    #[arg(long)]
    pub reference: bool,
    /// general_channel, multimedia or mixed.
    #[arg(long, default_value = "general_channel")]
    pub workload: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform workload of this transfer kind (write/read) instead of a generator.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, default_value_t = 2, requires = "kind")]
    pub burst_len: u32,
    #[arg(long, default_value_t = 0, requires = "kind")]
    pub idle_gap: u32,
    /// Read the workload from a file instead of generating it.
    #[arg(long, conflicts_with = "kind")]
    pub workload_file: Option<PathBuf>,
    #[arg(long)]
    pub workload_out: Option<PathBuf>,
    /// Base returned delay in clock cycles.
    #[arg(long, default_value_t = 20)]
    pub delay_base: u64,
    /// Contention probability, as a decimal (`0.3`) or a fraction (`3/10`).
    #[arg(long, default_value = "0.3")]
    pub contention_prob: String,
    #[arg(long, default_value_t = 1)]
    pub contention_min: u64,
    #[arg(long, default_value_t = 10)]
    pub contention_max: u64,
    /// Seed of the delay stream; defaults to `--seed`.
    #[arg(long)]
    pub delay_seed: Option<u64>,
    /// Length of one latency unit in ns (defaults to the bus clock period).
    #[arg(long)]
    pub latency_unit_ns: Option<u64>,
    /// Fail on delays that are not whole cycles instead of rounding up.
    #[arg(long)]
    pub reject_unaligned: bool,
    #[arg(long)]
    pub trace_out: PathBuf,
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Trace under test.
    #[arg(requires = "reference")]
    pub test: Option<PathBuf>,
    /// Reference trace.
    pub reference: Option<PathBuf>,
    /// Key-value report file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Extra comparison for the summary table: APPROACH WORKLOAD TEST REF.
    #[arg(long, num_args = 4, value_names = ["APPROACH", "WORKLOAD", "TEST", "REF"], action = clap::ArgAction::Append)]
    pub pair: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

/// Failure with the exit code it maps to.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub exit: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { exit: 2, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn dsl_err(path: &Path, e: DslError) -> CliError {
    let mut msg = format!("{}:{e}", path.display());
    if !e.expected.is_empty() {
        let _ = write!(msg, " (expected {})", e.expected.join(", "));
    }
    for v in &e.violations {
        let _ = write!(msg, "\n  {}:{}: {}", path.display(), v.span, v.violation);
    }
    CliError::input(msg)
}

fn synth_err(e: SynthError) -> CliError {
    let exit = match e {
        SynthError::InvalidInput { .. } | SynthError::MappingMismatch(_) => 2,
        _ => 3,
    };
    CliError { exit, message: e.to_string() }
}

fn load_fsm(path: &Path) -> Result<InterfaceFsm, CliError> {
    parse_interface_spec(&read(path)?).map_err(|e| dsl_err(path, e))
}

/// Parse, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            i32::from(e.exit)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, cli.verbose),
        Command::Sim(a) => cmd_sim(a, cli.verbose),
        Command::Compare(a) => cmd_compare(a),
        Command::ExportRefs(a) => cmd_export(a),
    }
}

fn cmd_synth(a: &SynthArgs, verbose: u8) -> Result<(), CliError> {
    let initiator = load_fsm(&a.initiator)?;
    let target = load_fsm(&a.target)?;
    let map = parse_payload_mapping(&read(&a.map)?).map_err(|e| dsl_err(&a.map, e))?;
    let s: Synthesis = if a.conventional {
        let t = complement(&initiator).map_err(|e| synth_err(e.into()))?;
        let i = complement(&target).map_err(|e| synth_err(e.into()))?;
        conventional_synthesis(&t, &i, &map)
    } else {
        synthesize_bridge(&initiator, &target, &map)
    }
    .map_err(synth_err)?;
    let g = &s.transactor;
    write(&a.out, &serialize_transactor(g))?;
    println!("transactor {}: {} state pairs, {} transitions", g.name(), g.pairs().len(), g.edges().len());
    println!("{}", s.stats.summary());
    if verbose > 0 {
        for step in &s.stats.steps {
            eprintln!("  expand {}: {} candidates (bound {})", step.pair, step.candidates, step.bound);
        }
    }
    Ok(())
}

/// `0.3`, `3/10` or `1` as an exact ratio in [0, 1].
pub fn parse_probability(s: &str) -> Result<Ratio<u32>, String> {
    let bad = || format!("invalid probability `{s}`");
    let r = if let Some((n, d)) = s.split_once('/') {
        let d: u32 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ratio::new(n.trim().parse().map_err(|_| bad())?, d)
    } else {
        let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
        if frac.len() > 9 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let all_digits = |x: &str| x.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int) || !all_digits(frac) {
            return Err(bad());
        }
        let denom = 10u32.pow(frac.len() as u32);
        let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u32 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        if int > 1 {
            return Err(bad());
        }
        Ratio::new(int * denom + frac, denom)
    };
    if r > Ratio::from_integer(1) {
        return Err(bad());
    }
    Ok(r)
}

fn build_workload(a: &SimArgs) -> Result<WorkloadSpec, CliError> {
    if let Some(p) = &a.workload_file {
        let w = parse_workload(&read(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        return Ok(w);
    }
    if a.n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }
    if let Some(k) = &a.kind {
        let kind: TransferKind = k.parse().map_err(|e| CliError::input(format!("--kind: {e}")))?;
        if a.burst_len == 0 {
            return Err(CliError::input("--burst-len must be at least 1"));
        }
        return Ok(uniform_workload(kind, a.burst_len, a.idle_gap, a.n, a.seed));
    }
    let kind: WorkloadKind = a.workload.parse().map_err(|e| CliError::input(format!("--workload: {e}")))?;
    Ok(generate_workload(kind, a.n, a.seed))
}

fn build_delays(a: &SimArgs) -> Result<DelayModel, CliError> {
    let p = parse_probability(&a.contention_prob).map_err(|e| CliError::input(format!("--contention-prob: {e}")))?;
    if a.contention_min > a.contention_max {
        return Err(CliError::input("--contention-min exceeds --contention-max"));
    }
    if a.latency_unit_ns == Some(0) {
        return Err(CliError::input("--latency-unit-ns must be positive"));
    }
    Ok(DelayModel {
        base_latency_cycles: a.delay_base,
        contention_probability: p,
        contention_extra_cycles: a.contention_min..=a.contention_max,
        seed: a.delay_seed.unwrap_or(a.seed),
        latency_unit_ns: a.latency_unit_ns,
        rounding: if a.reject_unaligned { RoundingPolicy::Reject } else { RoundingPolicy::RoundUp },
    })
}

fn build_bridges(a: &SimArgs, w: &WorkloadSpec, verbose: u8) -> Result<BridgeSet, CliError> {
    let flavor = match (a.reference, a.conventional) {
        (true, _) => BridgeFlavor::Reference,
        (_, true) => BridgeFlavor::Conventional,
        _ => BridgeFlavor::Coherent,
    };
    let loaded: Vec<TransactorFsm> = a
        .transactor
        .iter()
        .map(|p| parse_transactor(&read(p)?).map_err(|e| dsl_err(p, e)))
        .collect::<Result<_, _>>()?;
    let bridge_of = |g: &TransactorFsm| -> Result<Bridge, CliError> {
        let (master, slave) = components_of(g).map_err(|e| CliError::input(format!("transactor {}: {e}", g.name())))?;
        Ok(Bridge::new(master, Some(g.clone()), slave))
    };
    // a transactor whose shape cannot be read off its mapping serves every
    // transfer on its own
    if let Some(g) = loaded.iter().find(|g| shape_of(g).is_none()) {
        return Ok(BridgeSet::single(bridge_of(g)?));
    }
    let mut set = standard_bridges(w, flavor).map_err(synth_err)?;
    let mut covered = 0;
    for g in &loaded {
        let (kind, beats) = shape_of(g).expect("checked above");
        set.insert(kind, beats, bridge_of(g)?);
        covered += 1;
    }
    if verbose > 0 && !loaded.is_empty() {
        eprintln!("{covered} shape(s) from transactor files; remaining shapes synthesized from the burst family");
    }
    Ok(set)
}

fn cmd_sim(a: &SimArgs, verbose: u8) -> Result<(), CliError> {
    let w = build_workload(a)?;
    let delays = build_delays(a)?;
    let bridges = build_bridges(a, &w, verbose)?;
    let mode = match (a.reference, a.conventional) {
        (true, _) => SimMode::Reference,
        (_, true) => SimMode::Conventional,
        _ => SimMode::Coherent,
    };
    let config = SimConfig { mode, record_events: a.events_out.is_some() };
    let trace =
        run_with_config(&bridges, &w, &delays, config).map_err(|e| CliError { exit: 4, message: e.to_string() })?;
    for warning in &trace.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(p) = &a.workload_out {
        write(p, &serialize_workload(&w))?;
    }
    write(&a.trace_out, &trace.to_csv())?;
    if let Some(p) = &a.events_out {
        write(p, &trace.events_to_csv())?;
    }
    println!(
        "simulated {} transactions ({:?}): {} records -> {}",
        w.transfers.len(),
        mode,
        trace.records.len(),
        a.trace_out.display()
    );
    Ok(())
}

fn load_trace(path: &Path) -> Result<SimTrace, CliError> {
    SimTrace::from_csv(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn compare_files(test: &Path, reference: &Path) -> Result<ErrorReport, CliError> {
    let (t, r) = (load_trace(test)?, load_trace(reference)?);
    compare_traces(&t, &r).map_err(|e| CliError { exit: 5, message: e.to_string() })
}

/// Rows are approaches and columns workloads, in first-seen order.
pub fn summary_table(cells: &[(String, String, ErrorReport)]) -> String {
    let mut rows: Vec<&str> = Vec::new();
    let mut cols: Vec<&str> = Vec::new();
    for (a, w, _) in cells {
        if !rows.contains(&a.as_str()) {
            rows.push(a);
        }
        if !cols.contains(&w.as_str()) {
            cols.push(w);
        }
    }
    let width = cols.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
    let first = rows.iter().map(|r| r.len()).max().unwrap_or(0).max("approach".len());
    let mut s = format!("{:first$}", "approach");
    for c in &cols {
        let _ = write!(s, "  {c:>width$}");
    }
    s.push('\n');
    for r in &rows {
        let _ = write!(s, "{r:first$}");
        for c in &cols {
            let cell = cells
                .iter()
                .find(|(a, w, _)| a == r && w == c)
                .map(|(_, _, rep)| format!("{}%", rep.percent()))
                .unwrap_or_else(|| "-".into());
            let _ = write!(s, "  {cell:>width$}");
        }
        s.push('\n');
    }
    s
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    if a.test.is_none() && a.pair.is_empty() {
        return Err(CliError::input("nothing to compare: give TEST REF or --pair"));
    }
    let main = match (&a.test, &a.reference) {
        (Some(t), Some(r)) => Some(compare_files(t, r)?),
        _ => None,
    };
    let mut cells = Vec::new();
    for p in a.pair.chunks(4) {
        let rep = compare_files(Path::new(&p[2]), Path::new(&p[3]))?;
        cells.push((p[0].clone(), p[1].clone(), rep));
    }
    let mut report = String::new();
    if let Some(rep) = &main {
        println!("{rep}");
        report.push_str(&rep.to_report());
    }
    if !cells.is_empty() {
        print!("{}", summary_table(&cells));
        if main.is_none() {
            report.push_str("report_version = 1\n");
        }
        for (approach, workload, rep) in &cells {
            let _ = writeln!(report, "pair.{approach}.{workload}.error_rate = {}/{}", rep.erroneous, rep.total);
        }
    }
    if let Some(p) = &a.report {
        write(p, &report)?;
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<(), CliError> {
    fs::create_dir_all(&a.dir).map_err(|e| CliError::input(format!("{}: {e}", a.dir.display())))?;
    for (name, text) in reference_files() {
        write(&a.dir.join(name), text)?;
    }
    println!("wrote {} reference files to {}", reference_files().len(), a.dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities() {
        assert_eq!(parse_probability("0.3"), Ok(Ratio::new(3, 10)));
        assert_eq!(parse_probability("3/10"), Ok(Ratio::new(3, 10)));
        assert_eq!(parse_probability("1"), Ok(Ratio::from_integer(1)));
        assert_eq!(parse_probability(".25"), Ok(Ratio::new(1, 4)));
        for bad in ["1.5", "2", "x", "3/0", "-0.1", "", "."] {
            assert!(parse_probability(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn table_layout() {
        let rep = |e, t| ErrorReport { verdicts: vec![], erroneous: e, total: t };
        let t = summary_table(&[
            ("coherent".into(), "mixed".into(), rep(0, 10)),
            ("conventional".into(), "mixed".into(), rep(4, 10)),
        ]);
        assert_eq!(t, "approach         mixed\ncoherent          0.0%\nconventional     40.0%\n");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
