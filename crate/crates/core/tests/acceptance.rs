//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::cell::Cell;
use std::process::ExitCode;
use std::time::Instant;

use avionet::config_io::{write_report, write_trace_csv, ReportDocument, ReportFormat};
use avionet::engine::{run, run_with, RunOptions, SimulationResult, StartOffsets, TraceEvent};
use avionet::metrics::CapacityChange;
use avionet::netmodel::{
    analytic_min_delay, validate_network, LinkDecl, NetworkConfig, NodeDecl, NodeKind, Protocol, RouteDecl,
    ValidatedNetwork, VlDecl, VlId,
};
use avionet::scaling::{run_bench, BenchConfig};
use avionet::scenarios::{
    a350_network, is_cu_to_es, random_small_network, xu2019_network, xu2019_worst_case, A350Params, WorstCaseRow,
    A350_PERIODICITIES_MS,
};
use avionet::SimTime;

type Criterion = (&'static str, fn() -> Outcome);

/// ±0.01 us.
const TIME_TOLERANCE_NS: u64 = 10;

thread_local! {
    static CONSERVATION_RUNS: Cell<u64> = const { Cell::new(0) };
    static CONSERVATION_FAILURES: Cell<u64> = const { Cell::new(0) };
}

/// Every simulation of the suite goes through here so that frame
/// conservation is checked on all of them.
fn checked(result: SimulationResult) -> SimulationResult {
    CONSERVATION_RUNS.with(|c| c.set(c.get() + 1));
    if !result.report.counters.conservation_holds() {
        CONSERVATION_FAILURES.with(|c| c.set(c.get() + 1));
        eprintln!("conservation broken: {:?}", result.report.counters);
    }
    result
}

fn sim(net: &ValidatedNetwork, offsets: &StartOffsets, seed: u64) -> SimulationResult {
    checked(run(net, offsets, seed).expect("run completes"))
}

fn sim_traced(net: &ValidatedNetwork, seed: u64) -> SimulationResult {
    let opts = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    checked(run_with(net, &StartOffsets::new(), seed, &opts).expect("run completes"))
}

fn xu() -> ValidatedNetwork {
    validate_network(xu2019_network()).expect("valid")
}

fn a350(periodicity: SimTime) -> ValidatedNetwork {
    validate_network(a350_network(&A350Params::with_periodicity(periodicity)).expect("params")).expect("valid")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn worst_case_delays() -> Outcome {
    let net = xu();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in WorstCaseRow::ALL {
        let started = Instant::now();
        let result = sim(&net, &xu2019_worst_case(row), 1);
        let elapsed = started.elapsed();
        let worst = result.worst_delay(row.target());
        let ok = worst
            .is_some_and(|w| w.as_nanos().abs_diff(row.expected_worst_delay().as_nanos()) <= TIME_TOLERANCE_NS)
            && elapsed.as_secs_f64() < 1.0;
        pass &= ok;
        parts.push(format!(
            "{row}={}us/{}us ({:.3}s)",
            worst.map_or("none".into(), SimTime::fmt_micros),
            row.expected_worst_delay().fmt_micros(),
            elapsed.as_secs_f64()
        ));
    }
    outcome(pass, parts.join(" "))
}

/// Groups sample times within the tolerance of a target instant.
fn near(t: SimTime, target_us: u64) -> bool {
    t.as_nanos().abs_diff(target_us * 1000) <= TIME_TOLERANCE_NS
}

fn memory_timeline() -> Outcome {
    let net = xu();
    let result = sim(&net, &xu2019_worst_case(WorstCaseRow::V1), 1);
    let s3 = result.report.capacity_of("S3").expect("S3 series");
    let first_bag: Vec<_> = s3.samples.iter().filter(|s| s.time < SimTime::from_millis(4)).collect();
    let enqueues: Vec<(SimTime, usize)> = first_bag
        .iter()
        .filter_map(|s| match s.change {
            CapacityChange::Enqueue { port } => Some((s.time, port)),
            _ => None,
        })
        .collect();
    let releases: Vec<SimTime> = first_bag
        .iter()
        .filter(|s| matches!(s.change, CapacityChange::Release { .. }))
        .map(|s| s.time)
        .collect();

    let at_112: Vec<usize> = enqueues.iter().filter(|(t, _)| near(*t, 112)).map(|e| e.1).collect();
    let at_152: Vec<usize> = enqueues.iter().filter(|(t, _)| near(*t, 152)).map(|e| e.1).collect();
    let enqueue_ok = at_112.len() == 2
        && at_112[0] != at_112[1]
        && at_152.len() == 3
        && at_152.iter().all(|p| *p == at_152[0])
        && enqueues.len() == 5;
    let release_targets = [152u64, 192, 232, 272];
    let release_ok = releases.iter().all(|t| release_targets.iter().any(|&r| near(*t, r)))
        && release_targets.iter().all(|&r| releases.iter().any(|t| near(*t, r)));
    let peak = first_bag.iter().map(|s| s.used_bytes).max().unwrap_or(0);
    let peak_ok = peak == 1500;
    let fmt = |ts: &[SimTime]| ts.iter().map(|t| t.fmt_micros()).collect::<Vec<_>>().join(",");
    outcome(
        enqueue_ok && release_ok && peak_ok,
        format!(
            "enqueues at [{}] ports {:?}; releases at [{}]; peak {} B",
            fmt(&enqueues.iter().map(|e| e.0).collect::<Vec<_>>()),
            enqueues.iter().map(|e| e.1).collect::<Vec<_>>(),
            fmt(&releases),
            peak
        ),
    )
}

fn analytic_lower_bound() -> Outcome {
    let mut violations = 0u64;
    let mut checked_frames = 0u64;
    for seed in 0..100 {
        let net = validate_network(random_small_network(seed)).expect("generator yields valid networks");
        let result = sim(&net, &StartOffsets::new(), seed);
        for c in &result.samples {
            let bound = analytic_min_delay(&net, c.vl).expect("configured VL");
            checked_frames += c.delays.len() as u64;
            violations += c.delays.iter().filter(|d| **d < bound).count() as u64;
        }
    }
    outcome(
        violations == 0 && checked_frames > 0,
        format!("100 networks, {checked_frames} deliveries, {violations} below the bound"),
    )
}

fn es(id: &str) -> NodeDecl {
    NodeDecl {
        id: id.into(),
        kind: NodeKind::EndSystem,
    }
}

fn switch(id: &str) -> NodeDecl {
    NodeDecl {
        id: id.into(),
        kind: NodeKind::Switch,
    }
}

fn link(a: &str, b: &str) -> LinkDecl {
    LinkDecl {
        a: a.into(),
        b: b.into(),
        cable_length_m: 10.0,
        link_speed_bps: Some(100_000_000),
        failed: false,
    }
}

fn ber_statistics() -> Outcome {
    let ber = 1e-5;
    let mut vl = VlDecl::unicast(1, &["E1", "SW", "E2"], SimTime::from_micros(100), 500);
    vl.start_offset = SimTime::ZERO;
    let cfg = NetworkConfig {
        protocol: Protocol::Ethernet,
        sim_duration: SimTime::from_millis(2500),
        ber,
        rng_seed: 7,
        redundancy: Some(false),
        nodes: vec![es("E1"), es("E2"), switch("SW")],
        links: vec![link("E1", "SW"), link("SW", "E2")],
        vls: vec![vl],
        switches: Vec::new(),
    };
    let net = validate_network(cfg).expect("valid");
    let result = sim(&net, &StartOffsets::new(), 7);
    let c = &result.report.counters;
    let n = c.copies_generated as f64;
    let corrupt = (c.switch_drops.crc + c.corrupt_discarded) as f64;
    let p = -(8.0 * 500.0 * (-ber).ln_1p()).exp_m1();
    let sigma = (p * (1.0 - p) / n).sqrt();
    let rate = corrupt / n;
    outcome(
        c.copies_generated >= 20_000 && (rate - p).abs() <= 3.0 * sigma,
        format!(
            "{} frames, corrupt rate {rate:.5} vs expected {p:.5} (3 sigma = {:.5})",
            c.copies_generated,
            3.0 * sigma
        ),
    )
}

fn redundant_config(fail_route_a: bool) -> NetworkConfig {
    let vls = (1..=4)
        .map(|i| {
            let mut vl = VlDecl::unicast(i, &["E1", "SA", "E2"], SimTime::from_millis(1), 200 + 100 * i);
            vl.route_b = Some(RouteDecl::path(["E1", "SB", "E2"]));
            vl.start_offset = SimTime::from_micros(u64::from(i) * 3);
            vl
        })
        .collect();
    let mut down = link("SA", "E2");
    down.failed = fail_route_a;
    NetworkConfig {
        protocol: Protocol::Afdx,
        sim_duration: SimTime::from_millis(50),
        ber: 0.0,
        rng_seed: 3,
        redundancy: Some(true),
        nodes: vec![es("E1"), es("E2"), switch("SA"), switch("SB")],
        links: vec![link("E1", "SA"), down, link("E1", "SB"), link("SB", "E2")],
        vls,
        switches: Vec::new(),
    }
}

fn redundancy() -> Outcome {
    let healthy = validate_network(redundant_config(false)).expect("valid");
    let r = sim(&healthy, &StartOffsets::new(), 3);
    let c = &r.report.counters;
    let both_ok = c.accepted == c.logical_frames && c.duplicate_discarded == c.logical_frames && c.logical_frames > 0;

    let broken = validate_network(redundant_config(true)).expect("valid");
    let rb = sim(&broken, &StartOffsets::new(), 3);
    let cb = &rb.report.counters;
    let b_only_ok = cb.accepted == cb.logical_frames && cb.link_down_drops == cb.logical_frames;
    outcome(
        both_ok && b_only_ok,
        format!(
            "both networks: sent {} accepted {} duplicates {}; route A down: sent {} accepted {} lost on A {}",
            c.logical_frames, c.accepted, c.duplicate_discarded, cb.logical_frames, cb.accepted, cb.link_down_drops
        ),
    )
}

fn bag_conformance() -> Outcome {
    let mut shipped_credit_drops = 0;
    for row in WorstCaseRow::ALL {
        shipped_credit_drops += sim(&xu(), &xu2019_worst_case(row), 1)
            .report
            .counters
            .switch_drops
            .credit;
    }
    shipped_credit_drops += sim(&xu(), &StartOffsets::new(), 1).report.counters.switch_drops.credit;
    for ms in A350_PERIODICITIES_MS {
        let net = a350(SimTime::from_millis_f64(ms).expect("periodicity"));
        shipped_credit_drops += sim(&net, &StartOffsets::new(), 1).report.counters.switch_drops.credit;
    }

    // a flow sending every 2 ms policed as if its BAG were 4 ms
    let mut cfg = xu2019_network();
    cfg.sim_duration = SimTime::from_millis(1000);
    cfg.vls[0].bag = SimTime::from_millis(2);
    cfg.vls[0].police_bag = Some(SimTime::from_millis(4));
    let net = validate_network(cfg).expect("valid");
    let r = sim_traced(&net, 1);
    let warmup = SimTime::from_millis(20);
    let trace = r.trace.as_ref().expect("traced");
    let sent = trace
        .iter()
        .filter(|t| t.vl == VlId(1) && t.event == TraceEvent::Depart && t.time >= warmup)
        .count();
    let dropped = trace
        .iter()
        .filter(|t| t.vl == VlId(1) && t.event == TraceEvent::DropCredit && t.time >= warmup)
        .count();
    let ratio = dropped as f64 / sent.max(1) as f64;
    let others_clean = trace
        .iter()
        .all(|t| t.event != TraceEvent::DropCredit || t.vl == VlId(1));
    outcome(
        shipped_credit_drops == 0 && (ratio - 0.5).abs() <= 0.05 && others_clean,
        format!(
            "shipped scenarios: {shipped_credit_drops} credit drops; double-rate flow: {dropped}/{sent} dropped ({:.1}%)",
            100.0 * ratio
        ),
    )
}

fn runtime_scaling() -> Outcome {
    let cfg = BenchConfig {
        periodicities: A350_PERIODICITIES_MS
            .iter()
            .map(|&ms| SimTime::from_millis_f64(ms).expect("periodicity"))
            .collect(),
        reps: 5,
        jobs: 1,
        base: A350Params::default(),
    };
    match run_bench(&cfg) {
        Ok(r) => match r.fit {
            Ok(f) => outcome(
                f.r_squared >= 0.95,
                format!(
                    "9 configurations x 5 reps: slope {:.3e} min/packet, intercept {:.3e} min, R^2 {:.5}",
                    f.slope, f.intercept, f.r_squared
                ),
            ),
            Err(e) => outcome(false, e.to_string()),
        },
        Err(e) => outcome(false, e.to_string()),
    }
}

fn outputs(result: &SimulationResult) -> (String, String) {
    (
        write_report(&ReportDocument::of(result), ReportFormat::Json),
        write_trace_csv(result.trace.as_deref().unwrap_or_default()),
    )
}

fn determinism() -> Outcome {
    let mut nets = vec![("xu2019", xu()), ("a350", a350(SimTime::from_micros(500)))];
    for seed in [11, 12] {
        nets.push(("random", validate_network(random_small_network(seed)).expect("valid")));
    }
    let mut pass = true;
    let mut bytes = 0;
    for (name, net) in &nets {
        let a = outputs(&sim_traced(net, 5));
        let b = outputs(&sim_traced(net, 5));
        if a != b {
            pass = false;
            eprintln!("{name}: outputs differ between identical runs");
        }
        bytes += a.0.len() + a.1.len();
    }
    outcome(
        pass,
        format!("{} scenarios run twice, {bytes} bytes compared", nets.len()),
    )
}

fn a350_delay_band() -> Outcome {
    let cfg = a350_network(&A350Params::default()).expect("params");
    let net = validate_network(cfg.clone()).expect("valid");
    let r = sim(&net, &StartOffsets::new(), 1);
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut in_band = true;
    for decl in &cfg.vls {
        let Some(delay) = r.report.vl(decl.id).and_then(|v| v.delay) else {
            in_band = false;
            continue;
        };
        let mean_us = delay.mean / 1000.0;
        in_band &= (10.0..=500.0).contains(&mean_us);
        if is_cu_to_es(&cfg, decl) {
            low.push(mean_us);
        } else {
            high.push(mean_us);
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let all: Vec<f64> = low.iter().chain(&high).copied().collect();
    let (lo, hi) = (avg(&low), avg(&high));
    outcome(
        in_band && low.len() == 6 && lo < hi,
        format!(
            "means {:.1}..{:.1} us; CU->ES group {lo:.1} us, ES->CU group {hi:.1} us",
            all.iter().copied().fold(f64::INFINITY, f64::min),
            all.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn conservation() -> Outcome {
    let runs = CONSERVATION_RUNS.with(Cell::get);
    let failures = CONSERVATION_FAILURES.with(Cell::get);
    outcome(
        runs > 0 && failures == 0,
        format!("identity held on {} of {runs} runs", runs - failures),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1 worst-case delays of the five-VL network", worst_case_delays),
        ("AC2 switch S3 memory timeline", memory_timeline),
        ("AC3 analytic lower bound on random networks", analytic_lower_bound),
        ("AC4 CRC discard rate under BER", ber_statistics),
        ("AC5 redundancy and first-valid-wins", redundancy),
        ("AC6 BAG conformance and policing", bag_conformance),
        ("AC7 runtime scaling fit", runtime_scaling),
        ("AC8 determinism of reports and traces", determinism),
        ("AC9 A350-style delay band and group ordering", a350_delay_band),
        ("AC10 frame conservation on every run", conservation),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {} ({:.2}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
