use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::endsystem::Frame;
use crate::netmodel::NodeIdx;
use crate::time::SimTime;

/// What happens at an event. The variant order defines the dispatch order of
/// events at the same instant: a port freed at `t` is released before
/// frames that become ready at `t` are queued, so they can leave back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// Serialization of the frame in service on `node`'s `port` ends.
    PortTransmissionComplete {
        node: NodeIdx,
        port: usize,
    },
    /// The last bit of `frame` reached `to` over `link`.
    LinkDeliveryComplete {
        frame: Frame,
        from: NodeIdx,
        to: NodeIdx,
        link: usize,
    },
    /// `frame` passed the switch latency and can be queued for output.
    SwitchForwardReady {
        frame: Frame,
        switch: NodeIdx,
    },
    /// Virtual link at position `vl` in the network emits its next frame.
    FrameDeparture {
        vl: usize,
    },
    MetricsSample,
    SimulationEnd,
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::PortTransmissionComplete { .. } => 0,
            EventKind::LinkDeliveryComplete { .. } => 1,
            EventKind::SwitchForwardReady { .. } => 2,
            EventKind::FrameDeparture { .. } => 3,
            EventKind::MetricsSample => 4,
            EventKind::SimulationEnd => 5,
        }
    }

    pub fn frame(&self) -> Option<&Frame> {
        match self {
            EventKind::LinkDeliveryComplete { frame, .. } | EventKind::SwitchForwardReady { frame, .. } => Some(frame),
            _ => None,
        }
    }
}

/// Orders events that share a timestamp: class rank first, then creation
/// order. Unique within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TieKey {
    pub rank: u8,
    pub seq: u64,
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: SimTime,
    pub tie: TieKey,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.tie).cmp(&(other.time, other.tie))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("event scheduled at {at}, before the current time {now}")]
    SchedulingInPast { now: SimTime, at: SimTime },
    #[error("event queue is empty")]
    EmptyQueue,
}

/// Min-heap of pending events and the simulated clock.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Events ever scheduled.
    pub fn scheduled(&self) -> u64 {
        self.next_seq
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<TieKey, QueueError> {
        if time < self.now {
            return Err(QueueError::SchedulingInPast {
                now: self.now,
                at: time,
            });
        }
        let tie = TieKey {
            rank: kind.rank(),
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, tie, kind }));
        Ok(tie)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop_next(&mut self) -> Result<Event, QueueError> {
        let Reverse(event) = self.heap.pop().ok_or(QueueError::EmptyQueue)?;
        debug_assert!(event.time >= self.now);
        self.now = event.time;
        self.dispatched += 1;
        Ok(event)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    /// Pending events, in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter().map(|Reverse(e)| e)
    }
}
