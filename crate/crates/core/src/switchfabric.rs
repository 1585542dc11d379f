//! Switch model.
//!
//! A frame is inspected only after it has been fully received. Frames with a
//! bad CRC or without enough policing credit are dropped; the others become
//! ready for output after the switch latency and are appended to the FIFO of
//! each output port on their route. Queued frames are charged against the
//! port's dedicated memory, or against the shared pool when the dedicated
//! part cannot hold the whole frame, and release that charge when their
//! transmission completes.

use std::collections::{HashMap, VecDeque};

use crate::endsystem::Frame;
use crate::metrics::{CapacityChange, CapacitySample, CapacitySeries};
use crate::netmodel::{
    transmission_time, CopyId, NodeIdx, ResolvedVl, RoutingTable, SwitchParams, ValidatedNetwork, VlId,
};
use crate::time::SimTime;

/// Credit-based policer of one virtual link copy.
///
/// Credit accrues at `max_frame_bytes` per policing interval (the BAG by
/// default) up to `depth_bytes`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBucket {
    pub credit_bytes: f64,
    pub depth_bytes: f64,
    pub bytes_per_interval: f64,
    pub interval: SimTime,
    pub last_update: SimTime,
}

impl TokenBucket {
    /// A full bucket.
    pub fn new(bytes_per_interval: u32, interval: SimTime, depth_bytes: u64, now: SimTime) -> Self {
        TokenBucket {
            credit_bytes: depth_bytes as f64,
            depth_bytes: depth_bytes as f64,
            bytes_per_interval: f64::from(bytes_per_interval),
            interval,
            last_update: now,
        }
    }

    pub fn for_vl(vl: &ResolvedVl, now: SimTime) -> Self {
        Self::new(vl.max_frame_bytes, vl.police_interval, vl.bucket_depth_bytes, now)
    }

    pub fn rate_bytes_per_s(&self) -> f64 {
        self.bytes_per_interval / self.interval.as_secs_f64()
    }

    pub fn refill(&mut self, now: SimTime) {
        let elapsed = now.saturating_sub(self.last_update).as_nanos() as f64;
        // numerator first: exact for whole multiples of the interval
        let gained = self.bytes_per_interval * elapsed / self.interval.as_nanos() as f64;
        self.credit_bytes = (self.credit_bytes + gained).min(self.depth_bytes);
        self.last_update = self.last_update.max(now);
    }

    /// Refills, then debits `bytes` if enough credit is available.
    pub fn try_consume(&mut self, bytes: u32, now: SimTime) -> bool {
        self.refill(now);
        let bytes = f64::from(bytes);
        if self.credit_bytes < bytes {
            return false;
        }
        self.credit_bytes -= bytes;
        true
    }
}

/// Which memory a queued frame is charged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Dedicated,
    Shared,
    /// End system ports have no memory limit.
    Unmetered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueuedFrame {
    pub frame: Frame,
    pub charge: Charge,
}

/// Output port: FIFO plus the frame currently being serialized.
#[derive(Debug, Clone)]
pub struct PortQueue {
    pub peer: NodeIdx,
    pub link: usize,
    pub speed_bps: u64,
    pub propagation: SimTime,
    pub fifo: VecDeque<QueuedFrame>,
    pub in_service: Option<QueuedFrame>,
    pub busy_until: SimTime,
    pub dedicated_capacity_bytes: u64,
    pub dedicated_used_bytes: u64,
}

impl PortQueue {
    pub fn new(net: &ValidatedNetwork, node: NodeIdx, port: usize, dedicated_capacity: u64) -> Self {
        let port_ref = net.adjacency[node.0][port];
        let link = &net.links[port_ref.link];
        PortQueue {
            peer: port_ref.peer,
            link: port_ref.link,
            speed_bps: link.speed_bps,
            propagation: link.propagation,
            fifo: VecDeque::new(),
            in_service: None,
            busy_until: SimTime::ZERO,
            dedicated_capacity_bytes: dedicated_capacity,
            dedicated_used_bytes: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    /// Frames held by the port, including the one on the wire.
    pub fn resident(&self) -> usize {
        self.fifo.len() + usize::from(self.in_service.is_some())
    }

    pub fn push(&mut self, frame: Frame, charge: Charge) {
        if charge == Charge::Dedicated {
            self.dedicated_used_bytes += u64::from(frame.length_bytes);
        }
        self.fifo.push_back(QueuedFrame { frame, charge });
    }
}

/// Starts serializing the head of the queue if the port is idle. Returns the
/// completion instant.
pub fn start_transmission(port: &mut PortQueue, now: SimTime) -> Option<SimTime> {
    if !port.is_idle() {
        return None;
    }
    let head = port.fifo.pop_front()?;
    port.busy_until = now + transmission_time(head.frame.length_bytes, port.speed_bps);
    port.in_service = Some(head);
    Some(port.busy_until)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropCause {
    Crc,
    Credit,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngressOutcome {
    Forwarded { ready_at: SimTime },
    Dropped(DropCause),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Enqueued(Charge),
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounters {
    pub crc: u64,
    pub credit: u64,
    pub memory: u64,
}

impl DropCounters {
    pub fn total(&self) -> u64 {
        self.crc + self.credit + self.memory
    }
}

/// Traffic classes served by the output scheduler. Only one class exists:
/// every port is a single FIFO.
pub const TRAFFIC_CLASSES: usize = 1;

#[derive(Debug, Clone)]
pub struct SwitchState {
    pub node: NodeIdx,
    pub name: String,
    pub latency: SimTime,
    pub routing: RoutingTable,
    pub buckets: HashMap<(VlId, CopyId), TokenBucket>,
    pub ports: Vec<PortQueue>,
    pub shared_pool_capacity_bytes: u64,
    pub shared_pool_used_bytes: u64,
    pub drops: DropCounters,
    pub frames_in: u64,
    pub frames_out: u64,
    pub capacity: CapacitySeries,
}

impl SwitchState {
    pub fn new(net: &ValidatedNetwork, node: NodeIdx) -> Self {
        let params: SwitchParams = net.switch_params[node.0].expect("node is a switch");
        let ports: Vec<PortQueue> = (0..net.adjacency[node.0].len())
            .map(|p| PortQueue::new(net, node, p, params.dedicated_bytes_per_port))
            .collect();
        let total = params.dedicated_bytes_per_port * ports.len() as u64 + params.shared_pool_bytes;
        let routing = net.routing.get(&node).cloned().unwrap_or_default();
        let mut buckets = HashMap::new();
        for &(vl, copy) in routing.keys() {
            let decl = net.vl(vl).expect("routed VL exists");
            buckets.insert((vl, copy), TokenBucket::for_vl(decl, SimTime::ZERO));
        }
        SwitchState {
            node,
            name: net.node(node).name.clone(),
            latency: params.latency,
            routing,
            buckets,
            ports,
            shared_pool_capacity_bytes: params.shared_pool_bytes,
            shared_pool_used_bytes: 0,
            drops: DropCounters::default(),
            frames_in: 0,
            frames_out: 0,
            capacity: CapacitySeries::new(net.node(node).name.clone(), total),
        }
    }

    pub fn total_capacity_bytes(&self) -> u64 {
        self.capacity.total_capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.ports.iter().map(|p| p.dedicated_used_bytes).sum::<u64>() + self.shared_pool_used_bytes
    }

    /// Current memory occupancy as `(bytes, percent of total capacity)`.
    pub fn capacity_sample(&self) -> (u64, f64) {
        let used = self.used_bytes();
        let total = self.total_capacity_bytes();
        let pct = if total == 0 {
            0.0
        } else {
            used as f64 / total as f64 * 100.0
        };
        (used, pct)
    }

    pub fn record_capacity(&mut self, now: SimTime, change: CapacityChange) {
        let (used_bytes, used_percent) = self.capacity_sample();
        self.capacity.samples.push(CapacitySample {
            time: now,
            used_bytes,
            used_percent,
            change,
        });
    }

    /// Filters a frame whose reception completed at `now`.
    pub fn ingress(&mut self, frame: &Frame, now: SimTime) -> IngressOutcome {
        self.frames_in += 1;
        if !frame.crc_valid {
            self.drops.crc += 1;
            return IngressOutcome::Dropped(DropCause::Crc);
        }
        let bucket = self
            .buckets
            .get_mut(&(frame.vl, frame.copy))
            .expect("frame arrived on a VL routed through this switch");
        if !bucket.try_consume(frame.length_bytes, now) {
            self.drops.credit += 1;
            return IngressOutcome::Dropped(DropCause::Credit);
        }
        IngressOutcome::Forwarded {
            ready_at: now + self.latency,
        }
    }

    /// Output ports of a frame that became ready for forwarding.
    pub fn output_ports(&self, frame: &Frame) -> &[usize] {
        self.routing
            .get(&(frame.vl, frame.copy))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Appends a frame to an output queue, charging the whole frame to the
    /// port's dedicated memory or, failing that, to the shared pool.
    pub fn enqueue_output(&mut self, frame: Frame, port: usize, now: SimTime) -> EnqueueOutcome {
        let len = u64::from(frame.length_bytes);
        let queue = &self.ports[port];
        let charge = if queue.dedicated_used_bytes + len <= queue.dedicated_capacity_bytes {
            Charge::Dedicated
        } else if self.shared_pool_used_bytes + len <= self.shared_pool_capacity_bytes {
            self.shared_pool_used_bytes += len;
            Charge::Shared
        } else {
            self.drops.memory += 1;
            return EnqueueOutcome::Dropped;
        };
        self.ports[port].push(frame, charge);
        self.record_capacity(now, CapacityChange::Enqueue { port });
        EnqueueOutcome::Enqueued(charge)
    }

    /// Ends the transmission in progress on `port` and releases its memory.
    pub fn complete_transmission(&mut self, port: usize, now: SimTime) -> QueuedFrame {
        let done = self.ports[port].in_service.take().expect("transmission in progress");
        let len = u64::from(done.frame.length_bytes);
        match done.charge {
            Charge::Dedicated => self.ports[port].dedicated_used_bytes -= len,
            Charge::Shared => self.shared_pool_used_bytes -= len,
            Charge::Unmetered => {}
        }
        self.frames_out += 1;
        self.record_capacity(now, CapacityChange::Release { port });
        done
    }

    pub fn resident_frames(&self) -> usize {
        self.ports.iter().map(PortQueue::resident).sum()
    }
}
