//! Built-in scenarios: the five-VL validation network with its worst-case
//! start offsets, an A350-style generator and small random networks.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::engine::StartOffsets;
use crate::netmodel::{
    LinkDecl, NetworkConfig, NodeDecl, NodeKind, Protocol, RouteDecl, SwitchDecl, VlDecl, VlId, AFDX_BAGS_MS,
};
use crate::rng::{stream, Purpose};
use crate::time::SimTime;

/// Offset granularity used to order simultaneous departures.
pub const DELTA_T: SimTime = SimTime::from_nanos(1);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown worst-case row `{0}` (expected V1..V5)")]
    UnknownRow(String),
    #[error("unknown scenario `{0}` (expected xu2019 or a350)")]
    UnknownScenario(String),
    #[error("invalid scenario parameter: {0}")]
    InvalidParams(String),
    #[error("adjacency matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    Xu2019,
    A350,
}

impl FromStr for ScenarioName {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xu2019" => Ok(ScenarioName::Xu2019),
            "a350" => Ok(ScenarioName::A350),
            _ => Err(ScenarioError::UnknownScenario(s.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Five-VL validation network

pub const XU_LINK_SPEED_BPS: u64 = 100_000_000;
pub const XU_SWITCH_LATENCY: SimTime = SimTime::from_micros(16);
pub const XU_FRAME_BYTES: u32 = 500;
pub const XU_BAG: SimTime = SimTime::from_millis(4);
pub const XU_DURATION: SimTime = SimTime::from_millis(100);

const XU_PATHS: [&[&str]; 5] = [
    &["ES1", "S1", "S3", "ES6"],
    &["ES2", "S1", "S3", "ES7"],
    &["ES3", "S2", "S3", "ES6"],
    &["ES4", "S2", "S3", "ES6"],
    &["ES5", "S3", "ES6"],
];

/// Seven end systems, three switches, five unicast VLs of 500 B every 4 ms
/// on a single network.
pub fn xu2019_network() -> NetworkConfig {
    let mut nodes: Vec<NodeDecl> = (1..=7)
        .map(|i| NodeDecl {
            id: format!("ES{i}"),
            kind: NodeKind::EndSystem,
        })
        .collect();
    nodes.extend((1..=3).map(|i| NodeDecl {
        id: format!("S{i}"),
        kind: NodeKind::Switch,
    }));
    let pairs = [
        ("ES1", "S1"),
        ("ES2", "S1"),
        ("ES3", "S2"),
        ("ES4", "S2"),
        ("ES5", "S3"),
        ("S1", "S3"),
        ("S2", "S3"),
        ("S3", "ES6"),
        ("S3", "ES7"),
    ];
    let links = pairs
        .iter()
        .map(|(a, b)| LinkDecl {
            a: a.to_string(),
            b: b.to_string(),
            cable_length_m: 0.0,
            link_speed_bps: Some(XU_LINK_SPEED_BPS),
            failed: false,
        })
        .collect();
    let vls = XU_PATHS
        .iter()
        .enumerate()
        .map(|(i, path)| VlDecl::unicast(i as u32 + 1, path, XU_BAG, XU_FRAME_BYTES))
        .collect();
    let switches = (1..=3)
        .map(|i| SwitchDecl {
            id: format!("S{i}"),
            latency: Some(XU_SWITCH_LATENCY),
            dedicated_bytes_per_port: None,
            shared_pool_bytes: None,
        })
        .collect();
    NetworkConfig {
        protocol: Protocol::Afdx,
        sim_duration: XU_DURATION,
        ber: 0.0,
        rng_seed: 0,
        redundancy: Some(false),
        nodes,
        links,
        vls,
        switches,
    }
}

/// Start offset of one end system, as listed for a worst-case row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetSpec {
    Zero,
    DeltaT,
    TwoDeltaT,
    Micros(u64),
    MicrosPlusTwoDeltaT(u64),
}

impl OffsetSpec {
    pub fn resolve(self) -> SimTime {
        match self {
            OffsetSpec::Zero => SimTime::ZERO,
            OffsetSpec::DeltaT => DELTA_T,
            OffsetSpec::TwoDeltaT => DELTA_T + DELTA_T,
            OffsetSpec::Micros(us) => SimTime::from_micros(us),
            OffsetSpec::MicrosPlusTwoDeltaT(us) => SimTime::from_micros(us) + DELTA_T + DELTA_T,
        }
    }
}

/// Start offsets that produce the worst delay of one VL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WorstCaseRow {
    V1,
    V2,
    V3,
    V4,
    V5,
}

impl WorstCaseRow {
    pub const ALL: [WorstCaseRow; 5] = [
        WorstCaseRow::V1,
        WorstCaseRow::V2,
        WorstCaseRow::V3,
        WorstCaseRow::V4,
        WorstCaseRow::V5,
    ];

    pub fn target(self) -> VlId {
        VlId(self as u32 + 1)
    }

    /// Offsets of ES1..ES5.
    pub fn offsets(self) -> [OffsetSpec; 5] {
        use OffsetSpec::*;
        match self {
            WorstCaseRow::V1 => [TwoDeltaT, DeltaT, Zero, Zero, Micros(96)],
            WorstCaseRow::V2 => [Zero, DeltaT, Zero, Zero, Micros(96)],
            WorstCaseRow::V3 => [DeltaT, Zero, TwoDeltaT, DeltaT, Micros(96)],
            WorstCaseRow::V4 => [DeltaT, Zero, DeltaT, TwoDeltaT, Micros(96)],
            WorstCaseRow::V5 => [DeltaT, Zero, Zero, Zero, MicrosPlusTwoDeltaT(96)],
        }
    }

    pub fn expected_worst_delay(self) -> SimTime {
        SimTime::from_micros(match self {
            WorstCaseRow::V1 | WorstCaseRow::V3 | WorstCaseRow::V4 => 272,
            WorstCaseRow::V2 => 192,
            WorstCaseRow::V5 => 176,
        })
    }
}

impl FromStr for WorstCaseRow {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "V1" => Ok(WorstCaseRow::V1),
            "V2" => Ok(WorstCaseRow::V2),
            "V3" => Ok(WorstCaseRow::V3),
            "V4" => Ok(WorstCaseRow::V4),
            "V5" => Ok(WorstCaseRow::V5),
            _ => Err(ScenarioError::UnknownRow(s.to_string())),
        }
    }
}

impl fmt::Display for WorstCaseRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", *self as u32 + 1)
    }
}

/// First-departure offsets for a row. ESk transmits VL k.
pub fn xu2019_worst_case(row: WorstCaseRow) -> StartOffsets {
    row.offsets()
        .iter()
        .enumerate()
        .map(|(i, spec)| (VlId(i as u32 + 1), spec.resolve()))
        .collect()
}

// ---------------------------------------------------------------------------
// A350-style network

pub const A350_PERIODICITIES_MS: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct A350Params {
    /// End systems, control units included.
    pub n_es: usize,
    pub n_cu: usize,
    pub n_switches: usize,
    pub n_vls: usize,
    pub periodicity: SimTime,
    pub sim_duration: SimTime,
    pub min_frame_bytes: u32,
    pub frame_spread_bytes: u32,
    pub es_link_speed_bps: u64,
    pub backbone_speed_bps: u64,
    pub seed: u64,
}

impl Default for A350Params {
    fn default() -> Self {
        A350Params {
            n_es: 37,
            n_cu: 6,
            n_switches: 7,
            n_vls: 60,
            periodicity: SimTime::from_micros(500),
            sim_duration: SimTime::from_millis(1000),
            min_frame_bytes: 100,
            frame_spread_bytes: 200,
            es_link_speed_bps: 100_000_000,
            backbone_speed_bps: 1_000_000_000,
            seed: 1,
        }
    }
}

impl A350Params {
    pub fn with_periodicity(periodicity: SimTime) -> Self {
        A350Params {
            periodicity,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidParams(m.to_string()));
        if self.n_switches == 0 || self.n_cu == 0 || self.n_vls == 0 {
            return bad("counts must be positive");
        }
        if self.n_cu >= self.n_es {
            return bad("need at least one end system besides the control units");
        }
        if self.n_cu > self.n_vls {
            return bad("every control unit sources one VL");
        }
        if self.periodicity == SimTime::ZERO || self.sim_duration == SimTime::ZERO {
            return bad("periodicity and duration must be positive");
        }
        if self.min_frame_bytes < 64 || self.min_frame_bytes + self.frame_spread_bytes > 1518 {
            return bad("frame lengths must stay within 64..=1518 B");
        }
        Ok(())
    }
}

fn switch_ring_path(from: usize, to: usize, n: usize, clockwise: bool) -> Vec<usize> {
    let mut path = vec![from];
    let mut at = from;
    while at != to {
        at = if clockwise { (at + 1) % n } else { (at + n - 1) % n };
        path.push(at);
    }
    path
}

/// Control units and end systems attached around a ring of switches, with
/// one CU→ES VL per control unit and ES→CU VLs for the rest. Endpoints,
/// ring directions, VL ids of the CU→ES group and start offsets are drawn
/// from `params.seed`.
pub fn a350_network(params: &A350Params) -> Result<NetworkConfig, ScenarioError> {
    params.check()?;
    let mut rng = stream(params.seed, 0, Purpose::Topology);
    let n_sw = params.n_switches;
    let n_plain = params.n_es - params.n_cu;

    let cu = |i: usize| format!("CU{}", i + 1);
    let es = |i: usize| format!("ES{}", i + 1);
    let sw = |i: usize| format!("SW{}", i + 1);
    let cu_switch = |i: usize| i % n_sw;
    let es_switch = |i: usize| i % n_sw;

    let mut nodes = Vec::new();
    nodes.extend((0..params.n_cu).map(|i| NodeDecl {
        id: cu(i),
        kind: NodeKind::ControlUnit,
    }));
    nodes.extend((0..n_plain).map(|i| NodeDecl {
        id: es(i),
        kind: NodeKind::EndSystem,
    }));
    nodes.extend((0..n_sw).map(|i| NodeDecl {
        id: sw(i),
        kind: NodeKind::Switch,
    }));

    let edge = |a: String, b: String| LinkDecl {
        a,
        b,
        cable_length_m: 5.0,
        link_speed_bps: Some(params.es_link_speed_bps),
        failed: false,
    };
    let mut links: Vec<LinkDecl> = (0..params.n_cu).map(|i| edge(cu(i), sw(cu_switch(i)))).collect();
    links.extend((0..n_plain).map(|i| edge(es(i), sw(es_switch(i)))));
    let ring_links = match n_sw {
        1 => 0,
        2 => 1,
        n => n,
    };
    links.extend((0..ring_links).map(|i| LinkDecl {
        a: sw(i),
        b: sw((i + 1) % n_sw),
        cable_length_m: 20.0,
        link_speed_bps: Some(params.backbone_speed_bps),
        failed: false,
    }));

    let route = |rng: &mut crate::rng::StreamRng, src: String, s_from: usize, s_to: usize, dst: String| {
        let cw = switch_ring_path(s_from, s_to, n_sw, true);
        let ccw = switch_ring_path(s_from, s_to, n_sw, false);
        let shortest = cw.len().min(ccw.len());
        let candidates: Vec<&Vec<usize>> = [&cw, &ccw].into_iter().filter(|p| p.len() <= shortest + 1).collect();
        let chosen = if n_sw <= 2 {
            &cw
        } else {
            *candidates.choose(rng).expect("non-empty")
        };
        let mut path = vec![src];
        path.extend(chosen.iter().map(|&s| sw(s)));
        path.push(dst);
        path
    };

    let mut ids: Vec<u32> = (1..=params.n_vls as u32).collect();
    ids.shuffle(&mut rng);
    let mut cu_to_es: Vec<u32> = ids[..params.n_cu].to_vec();
    cu_to_es.sort_unstable();

    let mut vls = Vec::with_capacity(params.n_vls);
    let mut next_cu = 0;
    for id in 1..=params.n_vls as u32 {
        let path = if cu_to_es.binary_search(&id).is_ok() {
            let c = next_cu;
            next_cu += 1;
            let d = rng.random_range(0..n_plain);
            route(&mut rng, cu(c), cu_switch(c), es_switch(d), es(d))
        } else {
            let s = rng.random_range(0..n_plain);
            let c = rng.random_range(0..params.n_cu);
            route(&mut rng, es(s), es_switch(s), cu_switch(c), cu(c))
        };
        let offset_us = rng.random_range(0..params.periodicity.as_nanos().div_ceil(1000));
        let refs: Vec<&str> = path.iter().map(String::as_str).collect();
        let mut vl = VlDecl::unicast(id, &refs, params.periodicity, params.min_frame_bytes);
        vl.max_frame_bytes = params.min_frame_bytes + params.frame_spread_bytes;
        vl.start_offset = SimTime::from_micros(offset_us);
        vls.push(vl);
    }

    Ok(NetworkConfig {
        protocol: Protocol::Ethernet,
        sim_duration: params.sim_duration,
        ber: 0.0,
        rng_seed: params.seed,
        redundancy: Some(false),
        nodes,
        links,
        vls,
        switches: Vec::new(),
    })
}

/// Whether a VL of an A350-style network goes from a control unit to an end
/// system.
pub fn is_cu_to_es(config: &NetworkConfig, vl: &VlDecl) -> bool {
    config
        .nodes
        .iter()
        .any(|n| n.id == vl.source && n.kind == NodeKind::ControlUnit)
}

// ---------------------------------------------------------------------------
// Helpers

/// Converts a symmetric 0/1 adjacency matrix over `names` into a link list
/// (default speed, 0 m cables).
pub fn links_from_adjacency(names: &[String], matrix: &[Vec<u8>]) -> Result<Vec<LinkDecl>, ScenarioError> {
    let n = names.len();
    let bad = |m: String| Err(ScenarioError::InvalidMatrix(m));
    if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
        return bad(format!("expected a {n}x{n} matrix"));
    }
    let mut links = Vec::new();
    for i in 0..n {
        if matrix[i][i] != 0 {
            return bad(format!("self loop on {}", names[i]));
        }
        for j in i + 1..n {
            match (matrix[i][j], matrix[j][i]) {
                (0, 0) => {}
                (1, 1) => links.push(LinkDecl {
                    a: names[i].clone(),
                    b: names[j].clone(),
                    cable_length_m: 0.0,
                    link_speed_bps: None,
                    failed: false,
                }),
                _ => return bad(format!("entries {}-{} must both be 0 or both be 1", names[i], names[j])),
            }
        }
    }
    Ok(links)
}

/// A valid random network with at most 10 end systems and 3 switches in a
/// chain. Exercises multicast, redundancy, mixed link speeds and cable
/// lengths, small switch memories and non-zero BER.
pub fn random_small_network(seed: u64) -> NetworkConfig {
    let mut rng = stream(seed, 1, Purpose::Topology);
    let n_sw = rng.random_range(1..=3usize);
    let n_es = rng.random_range(2..=10usize);
    let protocol = if rng.random_bool(0.5) {
        Protocol::Afdx
    } else {
        Protocol::Ethernet
    };
    let redundancy = protocol == Protocol::Afdx && rng.random_bool(0.5);
    let speeds = [10_000_000u64, 100_000_000, 1_000_000_000];

    let es = |i: usize| format!("E{}", i + 1);
    let sw = |i: usize| format!("W{}", i + 1);
    let mut nodes: Vec<NodeDecl> = (0..n_es)
        .map(|i| NodeDecl {
            id: es(i),
            kind: NodeKind::EndSystem,
        })
        .collect();
    nodes.extend((0..n_sw).map(|i| NodeDecl {
        id: sw(i),
        kind: NodeKind::Switch,
    }));
    nodes.shuffle(&mut rng);

    let attach: Vec<usize> = (0..n_es).map(|_| rng.random_range(0..n_sw)).collect();
    let mut links = Vec::new();
    for (i, &s) in attach.iter().enumerate() {
        links.push(LinkDecl {
            a: es(i),
            b: sw(s),
            cable_length_m: f64::from(rng.random_range(0..=200u32)),
            link_speed_bps: Some(*speeds.choose(&mut rng).expect("non-empty")),
            failed: false,
        });
    }
    for s in 1..n_sw {
        links.push(LinkDecl {
            a: sw(s - 1),
            b: sw(s),
            cable_length_m: f64::from(rng.random_range(0..=200u32)),
            link_speed_bps: Some(*speeds.choose(&mut rng).expect("non-empty")),
            failed: false,
        });
    }

    let chain = |from: usize, to: usize| -> Vec<usize> {
        if from <= to {
            (from..=to).collect()
        } else {
            (to..=from).rev().collect()
        }
    };

    let n_vls = rng.random_range(1..=8u32);
    let mut vls = Vec::new();
    for id in 1..=n_vls {
        let src = rng.random_range(0..n_es);
        let others: Vec<usize> = (0..n_es).filter(|&e| e != src).collect();
        let fan = rng.random_range(1..=others.len().min(3));
        let dests: Vec<usize> = others.choose_multiple(&mut rng, fan).copied().collect();
        let paths: Vec<Vec<String>> = dests
            .iter()
            .map(|&d| {
                let mut p = vec![es(src)];
                p.extend(chain(attach[src], attach[d]).into_iter().map(sw));
                p.push(es(d));
                p
            })
            .collect();
        let route = RouteDecl { paths };
        let bag = match protocol {
            Protocol::Afdx => SimTime::from_millis(*AFDX_BAGS_MS[..4].choose(&mut rng).expect("non-empty")),
            Protocol::Ethernet => SimTime::from_micros(rng.random_range(300..=5000)),
        };
        let min_frame_bytes = rng.random_range(64..=1518u32);
        let max_frame_bytes = rng.random_range(min_frame_bytes..=1518);
        vls.push(VlDecl {
            id: VlId(id),
            source: es(src),
            destinations: dests.iter().map(|&d| es(d)).collect(),
            route_b: redundancy.then(|| route.clone()),
            route_a: route,
            bag,
            min_frame_bytes,
            max_frame_bytes,
            start_offset: SimTime::from_micros(rng.random_range(0..1000)),
            jitter: if rng.random_bool(0.3) {
                SimTime::from_micros(rng.random_range(0..=200))
            } else {
                SimTime::ZERO
            },
            police_bag: None,
            bucket_depth_bytes: None,
        });
    }

    let switches = (0..n_sw)
        .map(|s| {
            let tight = rng.random_bool(0.3);
            SwitchDecl {
                id: sw(s),
                latency: Some(SimTime::from_micros(rng.random_range(1..=20))),
                dedicated_bytes_per_port: tight.then(|| rng.random_range(1518..=4000)),
                shared_pool_bytes: tight.then(|| rng.random_range(0..=4000)),
            }
        })
        .collect();

    NetworkConfig {
        protocol,
        sim_duration: SimTime::from_millis(20),
        ber: if rng.random_bool(0.3) { 1e-6 } else { 0.0 },
        rng_seed: seed,
        redundancy: Some(redundancy),
        nodes,
        links,
        vls,
        switches,
    }
}
