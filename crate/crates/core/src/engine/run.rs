use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::queue::{EventKind, EventQueue, QueueError};
use crate::endsystem::{emit, generate_frame, next_departure, Frame, RxOutcome, RxState, VlTxState};
use crate::metrics::{summarize, CapacityChange, CapacitySeries, FomStats, MetricsError, SummaryOptions, VlCollector};
use crate::netmodel::{CopyId, NodeIdx, NodeKind, ValidatedNetwork, VlId};
use crate::switchfabric::{
    start_transmission, Charge, DropCause, DropCounters, EnqueueOutcome, IngressOutcome, PortQueue, SwitchState,
};
use crate::time::SimTime;

/// Per-VL first-departure overrides (the VL's configured offset otherwise).
pub type StartOffsets = BTreeMap<VlId, SimTime>;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record one trace row per frame copy per hop event.
    pub trace: bool,
    pub summary: SummaryOptions,
    /// Periodic capacity samples in addition to the per-change ones.
    pub sample_interval: Option<SimTime>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Depart,
    TxStart,
    Arrive,
    Enqueue,
    Accept,
    Duplicate,
    Corrupt,
    DropCrc,
    DropCredit,
    DropMemory,
    DropLinkDown,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceEvent::Depart => "depart",
            TraceEvent::TxStart => "tx_start",
            TraceEvent::Arrive => "arrive",
            TraceEvent::Enqueue => "enqueue",
            TraceEvent::Accept => "accept",
            TraceEvent::Duplicate => "duplicate",
            TraceEvent::Corrupt => "corrupt",
            TraceEvent::DropCrc => "drop_crc",
            TraceEvent::DropCredit => "drop_credit",
            TraceEvent::DropMemory => "drop_memory",
            TraceEvent::DropLinkDown => "drop_link_down",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub vl: VlId,
    pub seq: u64,
    pub copy: CopyId,
    pub node: String,
    pub event: TraceEvent,
    pub time: SimTime,
}

/// Frame entity bookkeeping for a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub logical_frames: u64,
    pub copies_generated: u64,
    /// Extra entities created where a multicast route branches.
    pub fanout_clones: u64,
    pub accepted: u64,
    pub duplicate_discarded: u64,
    pub corrupt_discarded: u64,
    pub switch_drops: DropCounters,
    pub link_down_drops: u64,
    pub resident_at_end: u64,
}

impl RunCounters {
    pub fn created(&self) -> u64 {
        self.copies_generated + self.fanout_clones
    }

    pub fn terminated(&self) -> u64 {
        self.accepted
            + self.duplicate_discarded
            + self.corrupt_discarded
            + self.switch_drops.total()
            + self.link_down_drops
    }

    /// Every frame entity created was either terminated or is still inside
    /// the network.
    pub fn conservation_holds(&self) -> bool {
        self.created() == self.terminated() + self.resident_at_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSummary {
    pub name: String,
    pub frames_in: u64,
    pub frames_out: u64,
    pub drops: DropCounters,
    pub resident_at_end: u64,
    pub peak_bytes: u64,
    pub total_capacity_bytes: u64,
}

/// Figures of merit of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FomReport {
    /// Sorted by VL id.
    pub vls: Vec<FomStats>,
    pub capacity: Vec<CapacitySeries>,
    pub switches: Vec<SwitchSummary>,
    pub counters: RunCounters,
}

impl FomReport {
    pub fn vl(&self, id: VlId) -> Option<&FomStats> {
        self.vls.iter().find(|s| s.vl == id)
    }

    pub fn capacity_of(&self, switch: &str) -> Option<&CapacitySeries> {
        self.capacity.iter().find(|c| c.switch == switch)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub seed: u64,
    /// Events dispatched.
    pub event_count: u64,
    pub events_scheduled: u64,
    pub events_remaining: u64,
    pub final_time: SimTime,
    pub report: FomReport,
    /// Raw per-VL samples, sorted by VL id.
    pub samples: Vec<VlCollector>,
    pub trace: Option<Vec<TraceRecord>>,
    pub wall_clock: Duration,
}

impl SimulationResult {
    pub fn samples_of(&self, id: VlId) -> Option<&VlCollector> {
        self.samples.iter().find(|c| c.vl == id)
    }

    /// Largest end-to-end delay observed on a VL.
    pub fn worst_delay(&self, id: VlId) -> Option<SimTime> {
        self.samples_of(id)?.delays.iter().max().copied()
    }
}

/// Simulates `net` from time 0 to its configured duration.
pub fn run(net: &ValidatedNetwork, offsets: &StartOffsets, seed: u64) -> Result<SimulationResult, ModelError> {
    run_with(net, offsets, seed, &RunOptions::default())
}

pub fn run_with(
    net: &ValidatedNetwork,
    offsets: &StartOffsets,
    seed: u64,
    opts: &RunOptions,
) -> Result<SimulationResult, ModelError> {
    let started = Instant::now();
    let mut sim = Simulator::new(net, offsets, seed, opts);
    sim.start()?;
    sim.run_loop()?;
    Ok(sim.finish(started.elapsed()))
}

enum NodeState {
    EndSystem { ports: Vec<PortQueue>, rx: RxState },
    Switch(Box<SwitchState>),
}

#[derive(Debug, Clone, Copy)]
struct Live {
    entities: u32,
    accepted: u32,
}

struct Simulator<'a> {
    net: &'a ValidatedNetwork,
    opts: &'a RunOptions,
    seed: u64,
    queue: EventQueue,
    nodes: Vec<NodeState>,
    tx: Vec<VlTxState>,
    offsets: Vec<SimTime>,
    collectors: Vec<VlCollector>,
    live: HashMap<(usize, u64), Live>,
    counters: RunCounters,
    trace: Option<Vec<TraceRecord>>,
}

impl<'a> Simulator<'a> {
    fn new(net: &'a ValidatedNetwork, offsets: &StartOffsets, seed: u64, opts: &'a RunOptions) -> Self {
        let nodes = (0..net.nodes.len())
            .map(|i| {
                let idx = NodeIdx(i);
                match net.node(idx).kind {
                    NodeKind::Switch => NodeState::Switch(Box::new(SwitchState::new(net, idx))),
                    NodeKind::EndSystem | NodeKind::ControlUnit => NodeState::EndSystem {
                        ports: (0..net.adjacency[i].len())
                            .map(|p| PortQueue::new(net, idx, p, u64::MAX))
                            .collect(),
                        rx: RxState::default(),
                    },
                }
            })
            .collect();
        Simulator {
            net,
            opts,
            seed,
            queue: EventQueue::new(),
            nodes,
            tx: net.vls.iter().map(|vl| VlTxState::new(seed, vl.id)).collect(),
            offsets: net
                .vls
                .iter()
                .map(|vl| offsets.get(&vl.id).copied().unwrap_or(vl.start_offset))
                .collect(),
            collectors: net
                .vls
                .iter()
                .map(|vl| VlCollector::new(vl.id, vl.destinations.len()))
                .collect(),
            live: HashMap::new(),
            counters: RunCounters::default(),
            trace: opts.trace.then(Vec::new),
        }
    }

    fn start(&mut self) -> Result<(), ModelError> {
        // ascending VL id, so equal offsets depart in VL id order
        let mut order: Vec<usize> = (0..self.net.vls.len()).collect();
        order.sort_by_key(|&i| self.net.vls[i].id);
        for pos in order {
            let first = next_departure(&mut self.tx[pos], &self.net.vls[pos], self.offsets[pos]);
            if first < self.net.sim_duration {
                self.queue.schedule(first, EventKind::FrameDeparture { vl: pos })?;
            }
        }
        if let Some(interval) = self.opts.sample_interval {
            self.queue.schedule(interval, EventKind::MetricsSample)?;
        }
        self.queue.schedule(self.net.sim_duration, EventKind::SimulationEnd)?;
        Ok(())
    }

    fn run_loop(&mut self) -> Result<(), ModelError> {
        while let Ok(event) = self.queue.pop_next() {
            match event.kind {
                EventKind::FrameDeparture { vl } => self.on_departure(vl)?,
                EventKind::PortTransmissionComplete { node, port } => self.on_port_complete(node, port)?,
                EventKind::LinkDeliveryComplete {
                    frame,
                    from: _,
                    to,
                    link,
                } => self.on_delivery(frame, to, link)?,
                EventKind::SwitchForwardReady { frame, switch } => self.on_forward_ready(frame, switch)?,
                EventKind::MetricsSample => self.on_sample()?,
                EventKind::SimulationEnd => break,
            }
        }
        Ok(())
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    fn record(&mut self, frame: &Frame, node: NodeIdx, event: TraceEvent) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                vl: frame.vl,
                seq: frame.seq,
                copy: frame.copy,
                node: self.net.node(node).name.clone(),
                event,
                time: self.queue.now(),
            });
        }
    }

    fn vl_pos(&self, vl: VlId) -> usize {
        self.net.vl_position(vl).expect("frame of a configured VL")
    }

    fn terminate(&mut self, frame: &Frame) {
        let key = (self.vl_pos(frame.vl), frame.seq);
        let live = self.live.get_mut(&key).expect("live frame");
        live.entities -= 1;
        if live.entities == 0 {
            self.live.remove(&key);
        }
    }

    fn port_mut(&mut self, node: NodeIdx, port: usize) -> &mut PortQueue {
        match &mut self.nodes[node.0] {
            NodeState::EndSystem { ports, .. } => &mut ports[port],
            NodeState::Switch(sw) => &mut sw.ports[port],
        }
    }

    fn try_start(&mut self, node: NodeIdx, port: usize) -> Result<(), ModelError> {
        let now = self.now();
        let tracing = self.trace.is_some();
        let queue = self.port_mut(node, port);
        if let Some(done) = start_transmission(queue, now) {
            if tracing {
                let frame = queue.in_service.as_ref().expect("just started").frame.clone();
                self.record(&frame, node, TraceEvent::TxStart);
            }
            self.queue
                .schedule(done, EventKind::PortTransmissionComplete { node, port })?;
        }
        Ok(())
    }

    fn on_departure(&mut self, pos: usize) -> Result<(), ModelError> {
        let net = self.net;
        let vl = &net.vls[pos];
        let now = self.now();
        let logical = generate_frame(&mut self.tx[pos], vl, now);
        let copies = emit(&logical, vl, &mut self.tx[pos], net.ber);
        self.collectors[pos].sent += 1;
        self.counters.logical_frames += 1;
        self.live.insert(
            (pos, logical.seq),
            Live {
                entities: copies.len() as u32,
                accepted: 0,
            },
        );
        for frame in copies {
            self.counters.copies_generated += 1;
            self.record(&frame, vl.source, TraceEvent::Depart);
            let route = vl.route(frame.copy).expect("copy has a route");
            let first_hop = route.next_hops(vl.source)[0];
            let port = net.port_toward(vl.source, first_hop).expect("validated route");
            self.port_mut(vl.source, port).push(frame, Charge::Unmetered);
            self.try_start(vl.source, port)?;
        }
        let next = next_departure(&mut self.tx[pos], vl, self.offsets[pos]);
        if next < net.sim_duration {
            self.queue.schedule(next, EventKind::FrameDeparture { vl: pos })?;
        }
        Ok(())
    }

    fn on_port_complete(&mut self, node: NodeIdx, port: usize) -> Result<(), ModelError> {
        let now = self.now();
        let done = match &mut self.nodes[node.0] {
            NodeState::Switch(sw) => sw.complete_transmission(port, now),
            NodeState::EndSystem { ports, .. } => ports[port].in_service.take().expect("transmission in progress"),
        };
        let queue = self.port_mut(node, port);
        let (to, link, arrival) = (queue.peer, queue.link, now + queue.propagation);
        self.queue.schedule(
            arrival,
            EventKind::LinkDeliveryComplete {
                frame: done.frame,
                from: node,
                to,
                link,
            },
        )?;
        self.try_start(node, port)
    }

    fn on_delivery(&mut self, frame: Frame, to: NodeIdx, link: usize) -> Result<(), ModelError> {
        self.record(&frame, to, TraceEvent::Arrive);
        if self.net.links[link].failed {
            self.counters.link_down_drops += 1;
            self.record(&frame, to, TraceEvent::DropLinkDown);
            self.terminate(&frame);
            return Ok(());
        }
        let now = self.now();
        match &mut self.nodes[to.0] {
            NodeState::Switch(sw) => match sw.ingress(&frame, now) {
                IngressOutcome::Forwarded { ready_at } => {
                    self.queue
                        .schedule(ready_at, EventKind::SwitchForwardReady { frame, switch: to })?;
                }
                IngressOutcome::Dropped(cause) => {
                    let event = match cause {
                        DropCause::Crc => TraceEvent::DropCrc,
                        DropCause::Credit => TraceEvent::DropCredit,
                        DropCause::Memory => TraceEvent::DropMemory,
                    };
                    self.record(&frame, to, event);
                    self.terminate(&frame);
                }
            },
            NodeState::EndSystem { rx, .. } => {
                let outcome = rx.receive(&frame);
                let event = match outcome {
                    RxOutcome::Accepted => {
                        let pos = self.vl_pos(frame.vl);
                        self.collectors[pos].record_delivery(frame.generated_at, now, frame.length_bytes)?;
                        self.live.get_mut(&(pos, frame.seq)).expect("live frame").accepted += 1;
                        self.counters.accepted += 1;
                        TraceEvent::Accept
                    }
                    RxOutcome::DuplicateDiscarded => {
                        self.counters.duplicate_discarded += 1;
                        TraceEvent::Duplicate
                    }
                    RxOutcome::CorruptDiscarded => {
                        self.counters.corrupt_discarded += 1;
                        TraceEvent::Corrupt
                    }
                };
                self.record(&frame, to, event);
                self.terminate(&frame);
            }
        }
        Ok(())
    }

    fn on_forward_ready(&mut self, frame: Frame, switch: NodeIdx) -> Result<(), ModelError> {
        let now = self.now();
        let ports = match &self.nodes[switch.0] {
            NodeState::Switch(sw) => sw.output_ports(&frame).to_vec(),
            NodeState::EndSystem { .. } => unreachable!("forwarding happens in switches"),
        };
        assert!(
            !ports.is_empty(),
            "{} has no route for {}",
            self.net.node(switch).name,
            frame.vl
        );
        if ports.len() > 1 {
            let extra = ports.len() as u64 - 1;
            self.counters.fanout_clones += extra;
            let key = (self.vl_pos(frame.vl), frame.seq);
            self.live.get_mut(&key).expect("live frame").entities += extra as u32;
        }
        for port in ports {
            let copy = frame.clone();
            self.record(&copy, switch, TraceEvent::Enqueue);
            let NodeState::Switch(sw) = &mut self.nodes[switch.0] else {
                unreachable!()
            };
            match sw.enqueue_output(copy, port, now) {
                EnqueueOutcome::Enqueued(_) => self.try_start(switch, port)?,
                EnqueueOutcome::Dropped => {
                    self.record(&frame, switch, TraceEvent::DropMemory);
                    self.terminate(&frame);
                }
            }
        }
        Ok(())
    }

    fn on_sample(&mut self) -> Result<(), ModelError> {
        let now = self.now();
        for node in &mut self.nodes {
            if let NodeState::Switch(sw) = node {
                sw.record_capacity(now, CapacityChange::Periodic);
            }
        }
        if let Some(interval) = self.opts.sample_interval {
            let next = now + interval;
            if next <= self.net.sim_duration {
                self.queue.schedule(next, EventKind::MetricsSample)?;
            }
        }
        Ok(())
    }

    fn finish(mut self, wall_clock: Duration) -> SimulationResult {
        let in_events = self.queue.pending().filter(|e| e.kind.frame().is_some()).count();
        let in_ports: usize = self
            .nodes
            .iter()
            .map(|n| match n {
                NodeState::EndSystem { ports, .. } => ports.iter().map(PortQueue::resident).sum(),
                NodeState::Switch(sw) => sw.resident_frames(),
            })
            .sum();
        self.counters.resident_at_end = (in_events + in_ports) as u64;
        debug_assert_eq!(
            self.live.values().map(|l| u64::from(l.entities)).sum::<u64>(),
            self.counters.resident_at_end
        );

        // deliveries that could still happen do not count as losses
        for (&(pos, _), live) in &self.live {
            let c = &mut self.collectors[pos];
            c.unresolved += c.destinations.saturating_sub(u64::from(live.accepted));
        }

        let mut capacity = Vec::new();
        let mut switches = Vec::new();
        for node in self.nodes {
            match node {
                NodeState::Switch(sw) => {
                    self.counters.switch_drops.crc += sw.drops.crc;
                    self.counters.switch_drops.credit += sw.drops.credit;
                    self.counters.switch_drops.memory += sw.drops.memory;
                    switches.push(SwitchSummary {
                        name: sw.name.clone(),
                        frames_in: sw.frames_in,
                        frames_out: sw.frames_out,
                        drops: sw.drops,
                        resident_at_end: sw.resident_frames() as u64,
                        peak_bytes: sw.capacity.peak_bytes(),
                        total_capacity_bytes: sw.total_capacity_bytes(),
                    });
                    capacity.push(sw.capacity);
                }
                NodeState::EndSystem { .. } => {}
            }
        }

        let mut samples = self.collectors;
        samples.sort_by_key(|c| c.vl);
        let vls = samples
            .iter()
            .map(|c| summarize(c, self.net.sim_duration, &self.opts.summary))
            .collect();

        SimulationResult {
            seed: self.seed,
            event_count: self.queue.dispatched(),
            events_scheduled: self.queue.scheduled(),
            events_remaining: self.queue.len() as u64,
            final_time: self.queue.now(),
            report: FomReport {
                vls,
                capacity,
                switches,
                counters: self.counters,
            },
            samples,
            trace: self.trace,
            wall_clock,
        }
    }
}
