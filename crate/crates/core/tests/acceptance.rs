//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod support;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use tlmbridge::dsl::{parse_interface_spec, parse_payload_mapping, serialize_fsm};
use tlmbridge::ifsm::{complement, CallOp, DelayGuard, Dir};
use tlmbridge::protocols::{
    burst_models, generate_workload, reference_files, reference_models, standard_bridges, BridgeFlavor,
    BridgeFlavor::*, TransferKind, WorkloadKind,
};
use tlmbridge::sim::{
    compare_traces, run_with_config, BridgeSet, DelayModel, RecordSide, SimConfig, SimMode, SimTrace,
};
use tlmbridge::synth::{
    parse_transactor, prepare_sides, serialize_transactor, synthesize_bridge, verify_transactor, StatePair,
    SynthOptions, TransactorEdge, TransactorFsm,
};
use tlmbridge::{Action, InterfaceFsm};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Shipped write models, one transfer, fixed returned delay.
fn single_write(delay_cycles: u64) -> Result<(SimTrace, Duration), String> {
    let start = Instant::now();
    let lib = reference_models();
    let g = synthesize_bridge(&lib.ca_initiator, &lib.pvt_target, &lib.mapping).map_err(|e| e.to_string())?;
    let bridge = tlmbridge::sim::Bridge::new(lib.ca_initiator.clone(), Some(g.transactor), lib.pvt_target.clone());
    let w = tlmbridge::protocols::uniform_workload(TransferKind::Write, 2, 0, 1, 0);
    let trace = tlmbridge::run_cosimulation(
        &BridgeSet::single(bridge),
        &w,
        &DelayModel::fixed(delay_cycles),
        SimMode::Coherent,
    )
    .map_err(|e| e.to_string())?;
    Ok((trace, start.elapsed()))
}

fn spans(t: &SimTrace) -> Vec<(u64, u64)> {
    t.records.iter().map(|r| (r.begin_ns, r.end_ns)).collect()
}

fn criterion_1() -> Outcome {
    let (t, took) = single_write(5)?;
    check(spans(&t) == [(0, 50), (0, 50)], || format!("records {:?}, want (0,50) on both sides", spans(&t)))?;
    check(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("ca (0,50), pvt (0,50), {took:.1?}"))
}

fn criterion_2() -> Outcome {
    let (t, _) = single_write(7)?;
    check(spans(&t) == [(0, 70), (0, 70)], || format!("records {:?}, want (0,70) on both sides", spans(&t)))?;
    let held = t.stats[0].hold_cycles;
    let loops =
        t.events.iter().filter(|e| e.component == "transactor.ca" && e.description.contains("[delay_pending]")).count();
    check(held == 2 && loops == 2, || format!("handshake held {held} cycles ({loops} hold firings), want 2"))?;
    Ok("ca (0,70), pvt (0,70), handshake held inactive 2 extra cycles".into())
}

fn matrix_delays(seed: u64) -> DelayModel {
    DelayModel {
        contention_probability: Ratio::new(3, 10),
        contention_extra_cycles: 1..=10,
        seed,
        ..DelayModel::fixed(20)
    }
}

struct MatrixRun {
    kind: WorkloadKind,
    seed: u64,
    erroneous: u64,
    total: u64,
    /// Baseline transactions whose call did not start after the bus transfer.
    early_calls: usize,
}

fn run(
    set: &BridgeSet,
    w: &tlmbridge::protocols::WorkloadSpec,
    d: &DelayModel,
    mode: SimMode,
) -> Result<SimTrace, String> {
    run_with_config(set, w, d, SimConfig { mode, record_events: false }).map_err(|e| e.to_string())
}

/// Every (workload kind, seed) cell, the flavor under test against the
/// bus-level reference.
fn matrix(flavor: BridgeFlavor) -> Result<(Vec<MatrixRun>, Duration), String> {
    let start = Instant::now();
    let mut out = Vec::new();
    for kind in WorkloadKind::ALL {
        for seed in 0..10u64 {
            let w = generate_workload(kind, 1000, seed);
            let d = matrix_delays(seed.wrapping_mul(0x9e37_79b9) ^ 0x5eed);
            let mode = match flavor {
                Coherent => SimMode::Coherent,
                Conventional => SimMode::Conventional,
                Reference => SimMode::Reference,
            };
            let set = standard_bridges(&w, flavor).map_err(|e| e.to_string())?;
            let test = run(&set, &w, &d, mode)?;
            let reference =
                run(&standard_bridges(&w, Reference).map_err(|e| e.to_string())?, &w, &d, SimMode::Reference)?;
            let rep = compare_traces(&test, &reference).map_err(|e| e.to_string())?;
            let ca: Vec<_> = test.side(RecordSide::Ca).collect();
            let early_calls = test
                .side(RecordSide::Pvt)
                .zip(&ca)
                .filter(|(p, c)| c.end_ns > c.begin_ns && p.begin_ns <= c.begin_ns)
                .count();
            out.push(MatrixRun { kind, seed, erroneous: rep.erroneous, total: rep.total, early_calls });
        }
    }
    Ok((out, start.elapsed()))
}

fn rates(runs: &[MatrixRun]) -> String {
    WorkloadKind::ALL
        .iter()
        .map(|k| {
            let (e, t) = runs.iter().filter(|r| r.kind == *k).fold((0, 0), |(e, t), r| (e + r.erroneous, t + r.total));
            format!("{} {e}/{t}", k.as_str())
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_3() -> Outcome {
    let (runs, took) = matrix(Coherent)?;
    if let Some(r) = runs.iter().find(|r| r.erroneous != 0) {
        return Err(format!("{} seed {}: error_rate {}/{}", r.kind.as_str(), r.seed, r.erroneous, r.total));
    }
    // the timing budget covers the coherent runs and their references
    check(took < Duration::from_secs(30), || format!("matrix took {took:?}"))?;
    Ok(format!("{} runs, error_rate 0 everywhere ({}), {took:.1?}", runs.len(), rates(&runs)))
}

fn criterion_4() -> Outcome {
    let (runs, _) = matrix(Conventional)?;
    if let Some(r) = runs.iter().find(|r| r.erroneous == 0) {
        return Err(format!("{} seed {}: baseline error_rate is 0", r.kind.as_str(), r.seed));
    }
    if let Some(r) = runs.iter().find(|r| r.early_calls > 0) {
        return Err(format!(
            "{} seed {}: {} calls not later than the bus begin",
            r.kind.as_str(),
            r.seed,
            r.early_calls
        ));
    }
    Ok(format!(
        "error_rate > 0 in all {} runs ({}); every call starts after its bus transfer",
        runs.len(),
        rates(&runs)
    ))
}

/// All initial-to-final paths of the pair graph that never repeat a pair,
/// self-loops excluded, found by brute-force enumeration.
fn all_paths(g: &TransactorFsm) -> Vec<Vec<TransactorEdge>> {
    fn walk(
        g: &TransactorFsm,
        at: StatePair,
        seen: &mut BTreeSet<StatePair>,
        path: &mut Vec<TransactorEdge>,
        out: &mut Vec<Vec<TransactorEdge>>,
    ) {
        if at == g.final_pair() {
            out.push(path.clone());
            return;
        }
        for e in g.edges().iter().filter(|e| e.from == at && e.to != at) {
            if seen.insert(e.to) {
                path.push(e.clone());
                walk(g, e.to, seen, path, out);
                path.pop();
                seen.remove(&e.to);
            }
        }
    }
    let mut out = Vec::new();
    walk(g, g.initial_pair(), &mut BTreeSet::from([g.initial_pair()]), &mut Vec::new(), &mut out);
    out
}

fn criterion_5() -> Outcome {
    let lib = reference_models();
    let g = synthesize_bridge(&lib.ca_initiator, &lib.pvt_target, &lib.mapping).map_err(|e| e.to_string())?.transactor;
    let paths = all_paths(&g);
    check(paths.len() == 1, || format!("{} initial-to-final paths, want exactly one", paths.len()))?;
    let path = &paths[0];
    let bindings: Vec<usize> = path
        .iter()
        .enumerate()
        .flat_map(|(k, e)| e.actions.iter().filter(|a| matches!(a, Action::SampleData(_))).map(move |_| k))
        .collect();
    check(bindings.len() == 3, || format!("{} binding transitions on the path, want 3", bindings.len()))?;
    let send = path
        .iter()
        .position(|e| e.actions.contains(&Action::Call(CallOp::Payload, Dir::Send)))
        .ok_or("no payload-send transition on the path")?;
    check(bindings.iter().all(|b| *b < send), || format!("payload sent at step {send}, bindings at {bindings:?}"))?;
    let last = path.last().expect("non-empty path");
    let hold = g
        .edges()
        .iter()
        .find(|e| e.from == last.from && e.to == last.from && e.actions.contains(&Action::ConsumeDelayCycle))
        .ok_or_else(|| format!("no delay-consumption loop at {}", last.from))?;
    check(hold.guard == Some(DelayGuard::Pending) && last.guard == Some(DelayGuard::Elapsed), || {
        "hold loop / final transition guards are wrong".into()
    })?;
    check(path.iter().position(|e| e.from == hold.from).is_some_and(|k| k > send), || {
        "hold loop precedes the call".into()
    })?;
    let order: Vec<String> =
        std::iter::once(g.initial_pair()).chain(path.iter().map(|e| e.to)).map(|p| p.to_string()).collect();
    Ok(format!("unique path {} with hold loop at {}", order.join(" "), hold.from))
}

fn prop(name: &str, cases: u32, f: impl Fn(&mut TestRunner) -> Result<(), String>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    f(&mut runner).map_err(|e| format!("{name}: {e}"))
}

fn criterion_6() -> Outcome {
    let mut done = Vec::new();

    prop("complement involution", 512, |r| {
        r.run(&support::any_fsm(), |f| {
            let c = complement(&f).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = complement(&c).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if back != f {
                return Err(TestCaseError::fail("complement twice changed the machine"));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;
    done.push("complement involution x512");

    prop("dsl round trip", 512, |r| {
        r.run(&support::any_fsm(), |f| {
            let text = serialize_fsm(&f);
            let back = parse_interface_spec(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if back != f || serialize_fsm(&back) != text {
                return Err(TestCaseError::fail(format!("not a fixed point:\n{text}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;
    for (name, text) in reference_files().iter().filter(|(n, _)| n.ends_with(".ifsm")) {
        let f = parse_interface_spec(text).map_err(|e| format!("{name}: {e}"))?;
        let canon = serialize_fsm(&f);
        let again = parse_interface_spec(&canon).map_err(|e| format!("{name}: {e}"))?;
        check(serialize_fsm(&again) == canon, || format!("{name}: canonical form is not a fixed point"))?;
    }
    done.push("dsl round trip x512 + fixtures");

    prop("parser fuzz", 10_000, |r| {
        use proptest::prelude::*;
        r.run(&prop_oneof![support::soup(), support::noise()], |s| {
            let _ = parse_interface_spec(&s);
            let _ = parse_payload_mapping(&s);
            let _ = parse_transactor(&s);
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;
    done.push("parser fuzz x10000");

    let mut max_candidates = 0;
    for kind in [TransferKind::Write, TransferKind::Read] {
        for beats in 1..=16 {
            let lib = burst_models(kind, beats);
            let s = synthesize_bridge(&lib.ca_initiator, &lib.pvt_target, &lib.mapping).map_err(|e| e.to_string())?;
            let (t, i) = prepare_sides(&lib.ca_initiator, &lib.pvt_target).map_err(|e| e.to_string())?;
            verify_transactor(&s.transactor, &t, &i, SynthOptions::default())
                .map_err(|e| format!("{kind} x{beats}: {e}"))?;
            check(s.stats.within_bound(), || format!("{kind} x{beats}: {}", s.stats.summary()))?;
            max_candidates = max_candidates.max(s.stats.max_candidates());
        }
    }
    done.push("progression + legality re-verification + n+m (32 transactors)");

    let pipeline = || -> Result<Vec<String>, String> {
        let lib = reference_models();
        let g = synthesize_bridge(&lib.ca_initiator, &lib.pvt_target, &lib.mapping).map_err(|e| e.to_string())?;
        let w = generate_workload(WorkloadKind::Mixed, 500, 42);
        let d = matrix_delays(7);
        let cfg = |mode| SimConfig { mode, record_events: true };
        let c = run_with_config(
            &standard_bridges(&w, Coherent).map_err(|e| e.to_string())?,
            &w,
            &d,
            cfg(SimMode::Coherent),
        )
        .map_err(|e| e.to_string())?;
        let r = run(&standard_bridges(&w, Reference).map_err(|e| e.to_string())?, &w, &d, SimMode::Reference)?;
        let rep = compare_traces(&c, &r).map_err(|e| e.to_string())?;
        Ok(vec![serialize_transactor(&g.transactor), c.to_csv(), c.events_to_csv(), r.to_csv(), rep.to_report()])
    };
    let first = pipeline()?;
    for k in 2..=3 {
        check(pipeline()? == first, || format!("run {k} differs from run 1"))?;
    }
    done.push("pipeline byte-determinism x3");
    Ok(format!("{} (max {max_candidates} candidates per step)", done.join("; ")))
}

fn criterion_7() -> Outcome {
    let lib = reference_models();
    for k in 0..lib.mapping.len() {
        let l = lib.mapping.without_entry(k);
        match synthesize_bridge(&lib.ca_initiator, &lib.pvt_target, &l) {
            Err(e) if e.code() == "no-legal-transactor" => {}
            Err(e) => return Err(format!("without entry {k}: {}, want no-legal-transactor", e.code())),
            Ok(_) => return Err(format!("without entry {k}: synthesis succeeded")),
        }
    }
    // a bus master whose final transition raises no handshake
    let flat: InterfaceFsm = {
        use tlmbridge::ifsm::act::{drive, set};
        use tlmbridge::ifsm::{Level, Role, SignalDecl};
        InterfaceFsm::builder("flat", Role::Initiator, Level::Ca)
            .clock_period_ns(10)
            .signal(SignalDecl::handshake("HTRANS"))
            .signal(SignalDecl::data("HADDR"))
            .signal(SignalDecl::data("HWDATA"))
            .initial(0)
            .final_state(2)
            .edge(0, 1, vec![set("HTRANS", true), drive("HADDR")])
            .edge(1, 2, vec![drive("HWDATA")])
            .build()
    };
    let l = parse_payload_mapping("map L { addr <- HADDR; data[0] <- HWDATA; }").map_err(|e| e.to_string())?;
    match synthesize_bridge(&flat, &lib.pvt_target, &l) {
        Err(e) if e.code() == "no-last-handshake" => {}
        Err(e) => return Err(format!("flat master: {}, want no-last-handshake", e.code())),
        Ok(_) => return Err("flat master: synthesis succeeded".into()),
    }
    Ok(format!(
        "each of {} mapping removals -> no-legal-transactor; flat master -> no-last-handshake",
        lib.mapping.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("single write, 50 ns delay: (0,50) on both sides", criterion_1),
        ("single write, 70 ns delay: 2-cycle hold, (0,70) on both sides", criterion_2),
        ("coherent transactor: zero error rate over the workload matrix", criterion_3),
        ("conventional transactor: non-zero error rate, late calls", criterion_4),
        ("reference transactor structure against a path-enumeration oracle", criterion_5),
        ("property suites", criterion_6),
        ("negative synthesis", criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name} -- {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} -- {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
