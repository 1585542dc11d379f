//! Network description, validation and elementary timing.
//!
//! A [`NetworkConfig`] is the declarative input (topology, traffic and switch
//! parameters). [`validate_network`] checks it and resolves it into a
//! [`ValidatedNetwork`], which is what the simulator consumes: node names are
//! replaced by indices, defaults are filled in and per-switch routing tables
//! keyed by virtual link identifier are built.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Signal propagation delay per meter of cable.
pub const PROPAGATION_NS_PER_METER: f64 = 5.0;
pub const DEFAULT_LINK_SPEED_BPS: u64 = 100_000_000;
pub const DEFAULT_SWITCH_LATENCY: SimTime = SimTime::from_micros(16);
pub const DEFAULT_DEDICATED_BYTES_PER_PORT: u64 = 32 * 1024;
pub const DEFAULT_SHARED_POOL_BYTES: u64 = 128 * 1024;
pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1518;
/// Legal AFDX bandwidth allocation gaps, in milliseconds.
pub const AFDX_BAGS_MS: [u64; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Afdx,
    Ethernet,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Afdx => f.write_str("afdx"),
            Protocol::Ethernet => f.write_str("ethernet"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    EndSystem,
    /// An end system tagged as a concentrator (control unit).
    ControlUnit,
    Switch,
}

impl NodeKind {
    pub fn is_end_system(self) -> bool {
        matches!(self, NodeKind::EndSystem | NodeKind::ControlUnit)
    }
}

/// Virtual link identifier; the routing key in every switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VlId(pub u32);

impl fmt::Display for VlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

/// Which of the two redundant networks a frame copy travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CopyId {
    A,
    B,
}

impl fmt::Display for CopyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CopyId::A => f.write_str("A"),
            CopyId::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub id: String,
    pub kind: NodeKind,
}

/// A full-duplex cable between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub a: String,
    pub b: String,
    pub cable_length_m: f64,
    pub link_speed_bps: Option<u64>,
    /// A failed link keeps its place in the topology but loses every frame
    /// sent over it.
    pub failed: bool,
}

/// Explicit node route of one copy of a virtual link.
///
/// A unicast route is a single path. A multicast route lists one path per
/// destination; the paths must agree on every shared prefix so that their
/// union is a tree rooted at the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteDecl {
    pub paths: Vec<Vec<String>>,
}

impl RouteDecl {
    pub fn path<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Self {
        RouteDecl {
            paths: vec![nodes.into_iter().map(Into::into).collect()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlDecl {
    pub id: VlId,
    pub source: String,
    pub destinations: Vec<String>,
    pub route_a: RouteDecl,
    pub route_b: Option<RouteDecl>,
    /// BAG in AFDX mode, periodicity in Ethernet mode.
    pub bag: SimTime,
    pub min_frame_bytes: u32,
    pub max_frame_bytes: u32,
    pub start_offset: SimTime,
    /// Upper bound of the uniform extra gap added to each departure.
    pub jitter: SimTime,
    /// Overrides the policing interval of the switch token buckets
    /// (default: the BAG).
    pub police_bag: Option<SimTime>,
    /// Overrides the token bucket depth (default: two maximum frames).
    pub bucket_depth_bytes: Option<u32>,
}

impl VlDecl {
    /// A unicast virtual link with default regulation parameters.
    pub fn unicast(id: u32, route: &[&str], bag: SimTime, frame_bytes: u32) -> Self {
        VlDecl {
            id: VlId(id),
            source: route[0].to_string(),
            destinations: vec![route[route.len() - 1].to_string()],
            route_a: RouteDecl::path(route.iter().copied()),
            route_b: None,
            bag,
            min_frame_bytes: frame_bytes,
            max_frame_bytes: frame_bytes,
            start_offset: SimTime::ZERO,
            jitter: SimTime::ZERO,
            police_bag: None,
            bucket_depth_bytes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDecl {
    pub id: String,
    pub latency: Option<SimTime>,
    pub dedicated_bytes_per_port: Option<u64>,
    pub shared_pool_bytes: Option<u64>,
}

/// Declarative network description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub protocol: Protocol,
    pub sim_duration: SimTime,
    pub ber: f64,
    pub rng_seed: u64,
    /// Frame duplication onto routes A and B. Defaults to on for AFDX and off
    /// for Ethernet.
    pub redundancy: Option<bool>,
    pub nodes: Vec<NodeDecl>,
    pub links: Vec<LinkDecl>,
    pub vls: Vec<VlDecl>,
    pub switches: Vec<SwitchDecl>,
}

impl NetworkConfig {
    pub fn redundancy_enabled(&self) -> bool {
        self.redundancy.unwrap_or(self.protocol == Protocol::Afdx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIdx(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeIdx,
    pub b: NodeIdx,
    pub cable_length_m: f64,
    pub speed_bps: u64,
    pub propagation: SimTime,
    pub failed: bool,
}

/// One port of a node: the local end of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRef {
    pub peer: NodeIdx,
    pub link: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchParams {
    pub latency: SimTime,
    pub dedicated_bytes_per_port: u64,
    pub shared_pool_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRoute {
    pub paths: Vec<Vec<NodeIdx>>,
}

impl ResolvedRoute {
    /// Successors of `node` in the route tree, in path order.
    pub fn next_hops(&self, node: NodeIdx) -> Vec<NodeIdx> {
        let mut hops = Vec::new();
        for path in &self.paths {
            if let Some(pos) = path.iter().position(|&n| n == node) {
                if let Some(&next) = path.get(pos + 1) {
                    if !hops.contains(&next) {
                        hops.push(next);
                    }
                }
            }
        }
        hops
    }

    pub fn contains(&self, node: NodeIdx) -> bool {
        self.paths.iter().any(|p| p.contains(&node))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedVl {
    pub id: VlId,
    pub source: NodeIdx,
    pub destinations: Vec<NodeIdx>,
    /// Routes of the copies actually emitted (A only, or A and B).
    pub routes: Vec<(CopyId, ResolvedRoute)>,
    pub bag: SimTime,
    pub min_frame_bytes: u32,
    pub max_frame_bytes: u32,
    pub start_offset: SimTime,
    pub jitter: SimTime,
    pub police_interval: SimTime,
    pub bucket_depth_bytes: u64,
}

impl ResolvedVl {
    pub fn route(&self, copy: CopyId) -> Option<&ResolvedRoute> {
        self.routes.iter().find(|(c, _)| *c == copy).map(|(_, r)| r)
    }

    pub fn copies(&self) -> impl Iterator<Item = CopyId> + '_ {
        self.routes.iter().map(|(c, _)| *c)
    }
}

/// Per-switch forwarding table: `(VL, copy)` to output port indices.
pub type RoutingTable = BTreeMap<(VlId, CopyId), Vec<usize>>;

/// A checked network with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedNetwork {
    config: NetworkConfig,
    pub protocol: Protocol,
    pub sim_duration: SimTime,
    pub ber: f64,
    pub rng_seed: u64,
    pub redundancy: bool,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// Ports of each node, indexed by node; the position is the port index.
    pub adjacency: Vec<Vec<PortRef>>,
    /// Switch parameters, indexed by node (`None` for end systems).
    pub switch_params: Vec<Option<SwitchParams>>,
    pub vls: Vec<ResolvedVl>,
    pub routing: BTreeMap<NodeIdx, RoutingTable>,
    vl_index: HashMap<VlId, usize>,
    name_index: HashMap<String, NodeIdx>,
}

impl ValidatedNetwork {
    /// The configuration this network was validated from.
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeIdx> {
        self.name_index.get(name).copied()
    }

    pub fn vl(&self, id: VlId) -> Option<&ResolvedVl> {
        self.vl_index.get(&id).map(|&i| &self.vls[i])
    }

    pub fn vl_position(&self, id: VlId) -> Option<usize> {
        self.vl_index.get(&id).copied()
    }

    /// Port index on `node` facing `peer`.
    pub fn port_toward(&self, node: NodeIdx, peer: NodeIdx) -> Option<usize> {
        self.adjacency[node.0].iter().position(|p| p.peer == peer)
    }

    pub fn link_between(&self, a: NodeIdx, b: NodeIdx) -> Option<&Link> {
        self.port_toward(a, b)
            .map(|port| &self.links[self.adjacency[a.0][port].link])
    }

    pub fn switches(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Switch)
            .map(|(i, _)| NodeIdx(i))
    }
}

/// A single reason a configuration is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("{context} references unknown node {node}")]
    UnknownNode { context: String, node: String },
    #[error("link {a}-{b}: {reason}")]
    InvalidLink { a: String, b: String, reason: String },
    #[error("duplicate link between {a} and {b}")]
    DuplicateLink { a: String, b: String },
    #[error("switch parameters given for {0}, which is not a switch")]
    NotASwitch(String),
    #[error("duplicate parameters for switch {0}")]
    DuplicateSwitchParams(String),
    #[error("duplicate virtual link id {0}")]
    DuplicateVlId(VlId),
    #[error("{vl}: endpoint {node} is not an end system")]
    NotAnEndSystem { vl: VlId, node: String },
    #[error("{vl}: destinations {reason}")]
    InvalidDestinations { vl: VlId, reason: String },
    #[error("{vl}: illegal BAG/periodicity {bag_ms} ms for {protocol}")]
    IllegalBag { vl: VlId, bag_ms: f64, protocol: Protocol },
    #[error("{vl}: frame bounds {min}..={max} outside {MIN_FRAME_BYTES}..={MAX_FRAME_BYTES} or inverted")]
    FrameBoundsViolation { vl: VlId, min: u32, max: u32 },
    #[error("{vl}: invalid policing parameters: {reason}")]
    InvalidPolicing { vl: VlId, reason: String },
    #[error("{vl}: redundancy is enabled but route B is missing")]
    MissingRouteB { vl: VlId },
    #[error("{vl} route {copy}: no link between {from} and {to}")]
    DisconnectedRoute {
        vl: VlId,
        copy: CopyId,
        from: String,
        to: String,
    },
    #[error("{vl} route {copy}: {reason}")]
    MalformedRoute { vl: VlId, copy: CopyId, reason: String },
}

/// All violations found in a configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

/// Checks a configuration and resolves it into a [`ValidatedNetwork`].
///
/// Every violation is collected rather than stopping at the first one.
pub fn validate_network(config: NetworkConfig) -> Result<ValidatedNetwork, ValidationError> {
    let mut errs = Vec::new();

    if config.sim_duration == SimTime::ZERO {
        errs.push(Violation::InvalidParameter {
            name: "simulation_time_s",
            reason: "must be positive".into(),
        });
    }
    if !(config.ber >= 0.0 && config.ber < 1.0) {
        errs.push(Violation::InvalidParameter {
            name: "ber",
            reason: format!("{} not in [0, 1)", config.ber),
        });
    }

    // Nodes.
    let mut nodes = Vec::with_capacity(config.nodes.len());
    let mut name_index = HashMap::new();
    for decl in &config.nodes {
        if name_index.contains_key(&decl.id) {
            errs.push(Violation::DuplicateNode(decl.id.clone()));
            continue;
        }
        name_index.insert(decl.id.clone(), NodeIdx(nodes.len()));
        nodes.push(Node {
            name: decl.id.clone(),
            kind: decl.kind,
        });
    }
    let lookup = |errs: &mut Vec<Violation>, context: &dyn Fn() -> String, name: &str| {
        let found = name_index.get(name).copied();
        if found.is_none() {
            errs.push(Violation::UnknownNode {
                context: context(),
                node: name.to_string(),
            });
        }
        found
    };

    // Links.
    let mut links = Vec::new();
    let mut adjacency: Vec<Vec<PortRef>> = vec![Vec::new(); nodes.len()];
    let mut seen_pairs = BTreeSet::new();
    for decl in &config.links {
        let ctx = || format!("link {}-{}", decl.a, decl.b);
        let a = lookup(&mut errs, &ctx, &decl.a);
        let b = lookup(&mut errs, &ctx, &decl.b);
        let invalid = |reason: &str| Violation::InvalidLink {
            a: decl.a.clone(),
            b: decl.b.clone(),
            reason: reason.to_string(),
        };
        if decl.link_speed_bps == Some(0) {
            errs.push(invalid("link speed must be positive"));
        }
        if !(decl.cable_length_m.is_finite() && decl.cable_length_m >= 0.0) {
            errs.push(invalid("cable length must be finite and non-negative"));
        }
        let (Some(a), Some(b)) = (a, b) else { continue };
        if a == b {
            errs.push(invalid("link connects a node to itself"));
            continue;
        }
        if !seen_pairs.insert((a.min(b), a.max(b))) {
            errs.push(Violation::DuplicateLink {
                a: decl.a.clone(),
                b: decl.b.clone(),
            });
            continue;
        }
        let link = links.len();
        links.push(Link {
            a,
            b,
            cable_length_m: decl.cable_length_m,
            speed_bps: decl.link_speed_bps.unwrap_or(DEFAULT_LINK_SPEED_BPS),
            propagation: propagation_delay(decl.cable_length_m.max(0.0)),
            failed: decl.failed,
        });
        adjacency[a.0].push(PortRef { peer: b, link });
        adjacency[b.0].push(PortRef { peer: a, link });
    }

    // Switch parameters.
    let mut switch_params: Vec<Option<SwitchParams>> = nodes
        .iter()
        .map(|n| {
            (n.kind == NodeKind::Switch).then_some(SwitchParams {
                latency: DEFAULT_SWITCH_LATENCY,
                dedicated_bytes_per_port: DEFAULT_DEDICATED_BYTES_PER_PORT,
                shared_pool_bytes: DEFAULT_SHARED_POOL_BYTES,
            })
        })
        .collect();
    let mut configured = BTreeSet::new();
    for decl in &config.switches {
        let Some(idx) = lookup(&mut errs, &|| "switch parameters".to_string(), &decl.id) else {
            continue;
        };
        let Some(params) = switch_params[idx.0].as_mut() else {
            errs.push(Violation::NotASwitch(decl.id.clone()));
            continue;
        };
        if !configured.insert(idx) {
            errs.push(Violation::DuplicateSwitchParams(decl.id.clone()));
            continue;
        }
        if let Some(latency) = decl.latency {
            params.latency = latency;
        }
        if let Some(bytes) = decl.dedicated_bytes_per_port {
            params.dedicated_bytes_per_port = bytes;
        }
        if let Some(bytes) = decl.shared_pool_bytes {
            params.shared_pool_bytes = bytes;
        }
    }

    // Virtual links.
    let redundancy = config.redundancy_enabled();
    let mut vls = Vec::with_capacity(config.vls.len());
    let mut vl_index = HashMap::new();
    for decl in &config.vls {
        let vl = decl.id;
        if vl_index.contains_key(&vl) {
            errs.push(Violation::DuplicateVlId(vl));
            continue;
        }
        let before = errs.len();
        let ctx = || format!("{vl}");

        let source = lookup(&mut errs, &ctx, &decl.source);
        if let Some(s) = source {
            if !nodes[s.0].kind.is_end_system() {
                errs.push(Violation::NotAnEndSystem {
                    vl,
                    node: decl.source.clone(),
                });
            }
        }
        let mut destinations = Vec::new();
        if decl.destinations.is_empty() {
            errs.push(Violation::InvalidDestinations {
                vl,
                reason: "must not be empty".into(),
            });
        }
        for name in &decl.destinations {
            let Some(d) = lookup(&mut errs, &ctx, name) else {
                continue;
            };
            if !nodes[d.0].kind.is_end_system() {
                errs.push(Violation::NotAnEndSystem { vl, node: name.clone() });
            } else if Some(d) == source {
                errs.push(Violation::InvalidDestinations {
                    vl,
                    reason: format!("include the source {name}"),
                });
            } else if destinations.contains(&d) {
                errs.push(Violation::InvalidDestinations {
                    vl,
                    reason: format!("list {name} twice"),
                });
            } else {
                destinations.push(d);
            }
        }

        let bag_ok = match config.protocol {
            Protocol::Afdx => AFDX_BAGS_MS.iter().any(|&ms| decl.bag == SimTime::from_millis(ms)),
            Protocol::Ethernet => decl.bag > SimTime::ZERO,
        };
        if !bag_ok {
            errs.push(Violation::IllegalBag {
                vl,
                bag_ms: decl.bag.as_millis_f64(),
                protocol: config.protocol,
            });
        }
        if decl.min_frame_bytes < MIN_FRAME_BYTES
            || decl.max_frame_bytes > MAX_FRAME_BYTES
            || decl.min_frame_bytes > decl.max_frame_bytes
        {
            errs.push(Violation::FrameBoundsViolation {
                vl,
                min: decl.min_frame_bytes,
                max: decl.max_frame_bytes,
            });
        }
        if decl.police_bag == Some(SimTime::ZERO) {
            errs.push(Violation::InvalidPolicing {
                vl,
                reason: "policing interval must be positive".into(),
            });
        }
        if decl.bucket_depth_bytes == Some(0) {
            errs.push(Violation::InvalidPolicing {
                vl,
                reason: "bucket depth must be positive".into(),
            });
        }

        let mut routes = Vec::new();
        if let Some(source) = source {
            let mut wanted = vec![(CopyId::A, Some(&decl.route_a))];
            if redundancy {
                wanted.push((CopyId::B, decl.route_b.as_ref()));
            }
            for (copy, decl_route) in wanted {
                let Some(decl_route) = decl_route else {
                    errs.push(Violation::MissingRouteB { vl });
                    continue;
                };
                if let Some(route) = resolve_route(
                    vl,
                    copy,
                    decl_route,
                    source,
                    &destinations,
                    &nodes,
                    &name_index,
                    &adjacency,
                    &mut errs,
                ) {
                    routes.push((copy, route));
                }
            }
        }

        vl_index.insert(vl, vls.len());
        if errs.len() == before {
            let max = u64::from(decl.max_frame_bytes);
            vls.push(ResolvedVl {
                id: vl,
                source: source.expect("checked above"),
                destinations,
                routes,
                bag: decl.bag,
                min_frame_bytes: decl.min_frame_bytes,
                max_frame_bytes: decl.max_frame_bytes,
                start_offset: decl.start_offset,
                jitter: decl.jitter,
                police_interval: decl.police_bag.unwrap_or(decl.bag),
                bucket_depth_bytes: decl.bucket_depth_bytes.map_or(2 * max, u64::from),
            });
        }
    }

    if !errs.is_empty() {
        return Err(ValidationError { violations: errs });
    }

    let mut net = ValidatedNetwork {
        protocol: config.protocol,
        sim_duration: config.sim_duration,
        ber: config.ber,
        rng_seed: config.rng_seed,
        redundancy,
        nodes,
        links,
        adjacency,
        switch_params,
        vls,
        routing: BTreeMap::new(),
        vl_index,
        name_index,
        config,
    };
    net.routing = build_routing_tables(&net);
    Ok(net)
}

#[allow(clippy::too_many_arguments)]
fn resolve_route(
    vl: VlId,
    copy: CopyId,
    decl: &RouteDecl,
    source: NodeIdx,
    destinations: &[NodeIdx],
    nodes: &[Node],
    names: &HashMap<String, NodeIdx>,
    adjacency: &[Vec<PortRef>],
    errs: &mut Vec<Violation>,
) -> Option<ResolvedRoute> {
    let before = errs.len();
    let malformed = |reason: String| Violation::MalformedRoute { vl, copy, reason };
    if decl.paths.is_empty() {
        errs.push(malformed("no path given".into()));
        return None;
    }
    let mut paths = Vec::with_capacity(decl.paths.len());
    for path in &decl.paths {
        let mut resolved = Vec::with_capacity(path.len());
        for name in path {
            match names.get(name) {
                Some(&idx) => resolved.push(idx),
                None => errs.push(Violation::UnknownNode {
                    context: format!("{vl} route {copy}"),
                    node: name.clone(),
                }),
            }
        }
        if resolved.len() != path.len() {
            continue;
        }
        if resolved.len() < 2 {
            errs.push(malformed("a path needs at least two nodes".into()));
            continue;
        }
        if resolved[0] != source {
            errs.push(malformed(format!("path starts at {}, not at the source", path[0])));
        }
        let last = *resolved.last().expect("len >= 2");
        if !destinations.contains(&last) {
            errs.push(malformed(format!(
                "path ends at {}, which is not a destination",
                path[path.len() - 1]
            )));
        }
        let mut visited = BTreeSet::new();
        for (i, &node) in resolved.iter().enumerate() {
            if !visited.insert(node) {
                errs.push(malformed(format!("path visits {} twice", path[i])));
            }
            if i > 0 && i + 1 < resolved.len() && nodes[node.0].kind != NodeKind::Switch {
                errs.push(malformed(format!("intermediate node {} is not a switch", path[i])));
            }
        }
        for (i, pair) in resolved.windows(2).enumerate() {
            if !adjacency[pair[0].0].iter().any(|p| p.peer == pair[1]) {
                errs.push(Violation::DisconnectedRoute {
                    vl,
                    copy,
                    from: path[i].clone(),
                    to: path[i + 1].clone(),
                });
            }
        }
        paths.push(resolved);
    }
    if errs.len() != before {
        return None;
    }

    // The union of the paths must be a tree covering every destination once.
    let mut covered = BTreeSet::new();
    for path in &paths {
        if !covered.insert(*path.last().expect("len >= 2")) {
            errs.push(malformed(format!(
                "destination {} reached by more than one path",
                nodes[path.last().expect("len >= 2").0].name
            )));
        }
    }
    for &d in destinations {
        if !covered.contains(&d) {
            errs.push(malformed(format!("destination {} not reached", nodes[d.0].name)));
        }
    }
    let mut parent: BTreeMap<NodeIdx, NodeIdx> = BTreeMap::new();
    for path in &paths {
        for pair in path.windows(2) {
            if let Some(&prev) = parent.get(&pair[1]) {
                if prev != pair[0] {
                    errs.push(malformed(format!(
                        "{} is reached from two different nodes",
                        nodes[pair[1].0].name
                    )));
                }
            } else {
                parent.insert(pair[1], pair[0]);
            }
        }
    }
    let route = ResolvedRoute { paths };
    if route.next_hops(source).len() > 1 {
        errs.push(malformed("the source end system cannot fan out".into()));
    }
    for &d in destinations {
        if !route.next_hops(d).is_empty() {
            errs.push(malformed(format!(
                "destination {} is also an intermediate hop",
                nodes[d.0].name
            )));
        }
    }
    (errs.len() == before).then_some(route)
}

/// Builds the per-switch forwarding tables of a network from its routes.
///
/// Every switch gets a table (possibly empty). A switch on a route maps the
/// `(VL, copy)` pair to the ports toward its successors in the route tree.
pub fn build_routing_tables(net: &ValidatedNetwork) -> BTreeMap<NodeIdx, RoutingTable> {
    let mut tables: BTreeMap<NodeIdx, RoutingTable> = net.switches().map(|s| (s, RoutingTable::new())).collect();
    for vl in &net.vls {
        for (copy, route) in &vl.routes {
            for (&switch, table) in tables.iter_mut() {
                if !route.contains(switch) {
                    continue;
                }
                let ports = route
                    .next_hops(switch)
                    .into_iter()
                    .map(|next| {
                        net.port_toward(switch, next)
                            .expect("validated route uses declared links")
                    })
                    .collect();
                table.insert((vl.id, *copy), ports);
            }
        }
    }
    tables
}

/// Serialization time of a frame on a link, rounded up to the nanosecond.
pub fn transmission_time(frame_bytes: u32, link_speed_bps: u64) -> SimTime {
    assert!(link_speed_bps > 0, "link speed must be positive");
    let bits = u128::from(frame_bytes) * 8 * 1_000_000_000;
    let speed = u128::from(link_speed_bps);
    SimTime::from_nanos(bits.div_ceil(speed) as u64)
}

/// Propagation delay over a cable, at a fixed 5 ns/m.
pub fn propagation_delay(cable_length_m: f64) -> SimTime {
    SimTime::from_nanos((cable_length_m * PROPAGATION_NS_PER_METER).round() as u64)
}

/// Uncontended delay of a frame of `frame_bytes` along `path`: one
/// serialization and propagation per link plus the latency of every switch.
pub fn path_min_delay(net: &ValidatedNetwork, path: &[NodeIdx], frame_bytes: u32) -> SimTime {
    let mut total = SimTime::ZERO;
    for pair in path.windows(2) {
        let link = net.link_between(pair[0], pair[1]).expect("path follows declared links");
        total += transmission_time(frame_bytes, link.speed_bps) + link.propagation;
    }
    for node in &path[1..path.len().saturating_sub(1)] {
        if let Some(params) = net.switch_params[node.0] {
            total += params.latency;
        }
    }
    total
}

/// Lower bound on the end-to-end delay of any frame of a virtual link:
/// the uncontended delay of the shortest frame over the fastest
/// destination path of any emitted copy.
pub fn analytic_min_delay(net: &ValidatedNetwork, vl: VlId) -> Option<SimTime> {
    let vl = net.vl(vl)?;
    vl.routes
        .iter()
        .flat_map(|(_, route)| route.paths.iter())
        .map(|path| path_min_delay(net, path, vl.min_frame_bytes))
        .min()
}
