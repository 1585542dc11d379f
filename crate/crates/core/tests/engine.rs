use avionet::engine::{run, run_with, RunOptions, StartOffsets, TraceEvent};
use avionet::netmodel::{
    validate_network, LinkDecl, NetworkConfig, NodeDecl, NodeKind, Protocol, RouteDecl, SwitchDecl, VlDecl, VlId,
};
use avionet::scenarios::{random_small_network, xu2019_network, xu2019_worst_case, WorstCaseRow};
use avionet::SimTime;

fn node(id: &str, kind: NodeKind) -> NodeDecl {
    NodeDecl { id: id.into(), kind }
}

fn link(a: &str, b: &str) -> LinkDecl {
    LinkDecl {
        a: a.into(),
        b: b.into(),
        cable_length_m: 0.0,
        link_speed_bps: Some(100_000_000),
        failed: false,
    }
}

fn ethernet(nodes: Vec<NodeDecl>, links: Vec<LinkDecl>, vls: Vec<VlDecl>, duration: SimTime) -> NetworkConfig {
    NetworkConfig {
        protocol: Protocol::Ethernet,
        sim_duration: duration,
        ber: 0.0,
        rng_seed: 1,
        redundancy: None,
        nodes,
        links,
        vls,
        switches: Vec::new(),
    }
}

#[test]
fn direct_link_delay_is_serialization_time() {
    let cfg = ethernet(
        vec![node("A", NodeKind::EndSystem), node("B", NodeKind::EndSystem)],
        vec![link("A", "B")],
        vec![VlDecl::unicast(1, &["A", "B"], SimTime::from_millis(1), 64)],
        SimTime::from_millis(10),
    );
    let net = validate_network(cfg).unwrap();
    let r = run(&net, &StartOffsets::new(), 1).unwrap();
    let c = r.samples_of(VlId(1)).unwrap();
    assert_eq!(c.delays.len(), 10);
    assert!(c.delays.iter().all(|d| *d == SimTime::from_nanos(5120)));
    let fom = r.report.vl(VlId(1)).unwrap();
    assert_eq!(fom.loss_percent, 0.0);
    assert_eq!(fom.delay.unwrap().std, 0.0);
}

#[test]
fn multicast_fans_out_at_the_branching_switch() {
    let mut vl = VlDecl::unicast(7, &["A", "S", "B"], SimTime::from_millis(2), 300);
    vl.destinations = vec!["B".into(), "C".into()];
    vl.route_a = RouteDecl {
        paths: vec![
            vec!["A".into(), "S".into(), "B".into()],
            vec!["A".into(), "S".into(), "C".into()],
        ],
    };
    let cfg = ethernet(
        vec![
            node("A", NodeKind::EndSystem),
            node("B", NodeKind::EndSystem),
            node("C", NodeKind::EndSystem),
            node("S", NodeKind::Switch),
        ],
        vec![link("A", "S"), link("S", "B"), link("S", "C")],
        vec![vl],
        SimTime::from_millis(20),
    );
    let net = validate_network(cfg).unwrap();
    let r = run(&net, &StartOffsets::new(), 1).unwrap();
    let counters = r.report.counters;
    assert_eq!(counters.logical_frames, 10);
    assert_eq!(counters.fanout_clones, 10);
    assert_eq!(counters.accepted, 20);
    assert!(counters.conservation_holds());
    assert_eq!(r.report.vl(VlId(7)).unwrap().loss_percent, 0.0);
}

#[test]
fn memory_exhaustion_drops_frames_and_conserves_them() {
    let sources = ["A", "B", "C", "D"];
    let mut nodes: Vec<NodeDecl> = sources.iter().map(|s| node(s, NodeKind::EndSystem)).collect();
    nodes.push(node("Z", NodeKind::EndSystem));
    nodes.push(node("S", NodeKind::Switch));
    let mut links: Vec<LinkDecl> = sources.iter().map(|s| link(s, "S")).collect();
    links.push(link("S", "Z"));
    let vls = sources
        .iter()
        .enumerate()
        .map(|(i, s)| VlDecl::unicast(i as u32 + 1, &[s, "S", "Z"], SimTime::from_millis(1), 1000))
        .collect();
    let mut cfg = ethernet(nodes, links, vls, SimTime::from_millis(10));
    cfg.switches = vec![SwitchDecl {
        id: "S".into(),
        latency: None,
        dedicated_bytes_per_port: Some(1500),
        shared_pool_bytes: Some(1000),
    }];
    let net = validate_network(cfg).unwrap();
    let r = run(&net, &StartOffsets::new(), 1).unwrap();
    let c = r.report.counters;
    // four frames arrive together; one dedicated slot and one shared slot
    assert_eq!(c.switch_drops.memory, 20);
    assert_eq!(c.accepted, 20);
    assert!(c.conservation_holds());
    let s = &r.report.switches[0];
    assert_eq!(s.peak_bytes, 2000);
    assert_eq!(s.drops.memory, 20);
}

#[test]
fn frames_in_flight_at_the_end_are_not_losses() {
    let cfg = ethernet(
        vec![node("A", NodeKind::EndSystem), node("B", NodeKind::EndSystem)],
        vec![link("A", "B")],
        vec![VlDecl::unicast(1, &["A", "B"], SimTime::from_millis(1), 1500)],
        // the last departure at 9 ms is still on the wire at 9.1 ms
        SimTime::from_micros(9_100),
    );
    let net = validate_network(cfg).unwrap();
    let r = run(&net, &StartOffsets::new(), 1).unwrap();
    let fom = r.report.vl(VlId(1)).unwrap();
    assert_eq!(fom.sent, 10);
    assert_eq!(fom.accepted, 9);
    assert_eq!(fom.loss_percent, 0.0);
    assert_eq!(r.report.counters.resident_at_end, 1);
    assert!(r.report.counters.conservation_holds());
    assert!(r.final_time <= SimTime::from_micros(9_100));
}

#[test]
fn redundant_copies_with_bit_errors() {
    let mut vl = VlDecl::unicast(1, &["A", "SA", "B"], SimTime::from_millis(1), 1500);
    vl.route_b = Some(RouteDecl::path(["A", "SB", "B"]));
    let mut cfg = ethernet(
        vec![
            node("A", NodeKind::EndSystem),
            node("B", NodeKind::EndSystem),
            node("SA", NodeKind::Switch),
            node("SB", NodeKind::Switch),
        ],
        vec![link("A", "SA"), link("SA", "B"), link("A", "SB"), link("SB", "B")],
        vec![vl],
        SimTime::from_millis(2000),
    );
    cfg.protocol = Protocol::Afdx;
    cfg.ber = 2e-5;
    let net = validate_network(cfg).unwrap();
    let r = run(&net, &StartOffsets::new(), 9).unwrap();
    let c = r.report.counters;
    assert_eq!(c.copies_generated, 2 * c.logical_frames);
    assert!(c.switch_drops.crc > 0);
    // a frame is lost only if both copies are corrupt
    let lost = c.logical_frames - c.accepted;
    let p = 1.0 - (1.0f64 - 2e-5).powi(12_000);
    let expected = p * p * c.logical_frames as f64;
    assert!(
        (lost as f64 - expected).abs() < 5.0 * expected.sqrt() + 3.0,
        "{lost} vs {expected}"
    );
    assert_eq!(
        c.accepted + c.duplicate_discarded,
        c.copies_generated - c.switch_drops.crc
    );
    assert!(c.conservation_holds());
}

#[test]
fn trace_follows_a_frame_hop_by_hop() {
    let net = validate_network(xu2019_network()).unwrap();
    let opts = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    let r = run_with(&net, &xu2019_worst_case(WorstCaseRow::V2), 1, &opts).unwrap();
    let hops: Vec<(String, TraceEvent, u64)> = r
        .trace
        .unwrap()
        .into_iter()
        .filter(|t| t.vl == VlId(2) && t.seq == 0)
        .map(|t| (t.node, t.event, t.time.as_nanos()))
        .collect();
    let expect = [
        ("ES2", TraceEvent::Depart, 1),
        ("ES2", TraceEvent::TxStart, 1),
        ("S1", TraceEvent::Arrive, 40_001),
        ("S1", TraceEvent::Enqueue, 56_001),
        // VL1 from ES1 holds the S1 output until 96 us
        ("S1", TraceEvent::TxStart, 96_000),
        ("S3", TraceEvent::Arrive, 136_000),
        ("S3", TraceEvent::Enqueue, 152_000),
        ("S3", TraceEvent::TxStart, 152_000),
        ("ES7", TraceEvent::Arrive, 192_000),
        ("ES7", TraceEvent::Accept, 192_000),
    ];
    let expect: Vec<(String, TraceEvent, u64)> = expect.iter().map(|(n, e, t)| (n.to_string(), *e, *t)).collect();
    assert_eq!(hops, expect);
}

#[test]
fn same_seed_same_report() {
    let net = validate_network(random_small_network(4)).unwrap();
    let a = run(&net, &StartOffsets::new(), 1).unwrap();
    let b = run(&net, &StartOffsets::new(), 1).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.event_count, b.event_count);
}

#[test]
fn random_networks_conserve_frames() {
    for seed in 100..160 {
        let net = validate_network(random_small_network(seed)).unwrap();
        let r = run(&net, &StartOffsets::new(), seed).unwrap();
        assert!(
            r.report.counters.conservation_holds(),
            "seed {seed}: {:?}",
            r.report.counters
        );
        assert_eq!(r.report.vls.len(), net.vls.len());
        assert!(r.final_time <= net.sim_duration);
    }
}

#[test]
fn jittered_departures_keep_the_bag() {
    let mut vl = VlDecl::unicast(1, &["A", "B"], SimTime::from_millis(1), 100);
    vl.jitter = SimTime::from_micros(300);
    let cfg = ethernet(
        vec![node("A", NodeKind::EndSystem), node("B", NodeKind::EndSystem)],
        vec![link("A", "B")],
        vec![vl],
        SimTime::from_millis(200),
    );
    let net = validate_network(cfg).unwrap();
    let opts = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    let r = run_with(&net, &StartOffsets::new(), 3, &opts).unwrap();
    let departures: Vec<u64> = r
        .trace
        .unwrap()
        .iter()
        .filter(|t| t.event == TraceEvent::Depart)
        .map(|t| t.time.as_nanos())
        .collect();
    assert!(departures.len() > 100);
    let gaps: Vec<u64> = departures.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.iter().all(|g| (1_000_000..=1_300_000).contains(g)));
    assert!(gaps.iter().any(|g| *g > 1_000_000));
}

#[test]
fn periodic_capacity_samples() {
    let net = validate_network(xu2019_network()).unwrap();
    let opts = RunOptions {
        sample_interval: Some(SimTime::from_millis(10)),
        ..RunOptions::default()
    };
    let r = run_with(&net, &StartOffsets::new(), 1, &opts).unwrap();
    let s3 = r.report.capacity_of("S3").unwrap();
    let periodic = s3
        .samples
        .iter()
        .filter(|s| matches!(s.change, avionet::metrics::CapacityChange::Periodic))
        .count();
    assert_eq!(periodic, 10);
}
