use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::io::Write;

use serde::Serialize;

use super::{LatencyMatrix, Message, NodeId, RoundTag, SimError};

/// Protocol logic driven by the scheduler.
pub trait Handler {
    /// Invoked for each message at its delivery time.
    fn on_deliver(&mut self, now: f64, msg: &Message, out: &mut Outbox);

    /// Invoked when no message is in flight; anything sent here starts the next phase.
    fn on_idle(&mut self, _now: f64, _out: &mut Outbox) {}
}

/// Messages a handler emits during a callback; sent at the callback's time.
#[derive(Debug, Default)]
pub struct Outbox {
    pending: Vec<Message>,
}

impl Outbox {
    pub fn send(&mut self, msg: Message) {
        self.pending.push(msg);
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub message: Message,
    pub send_time: f64,
    pub deliver_time: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounters {
    pub sent: usize,
    pub received: usize,
    pub bytes_out: usize,
    pub bytes_in: usize,
}

/// Everything that crossed the network during one or more runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    /// Records in delivery order.
    pub messages: Vec<MessageRecord>,
    pub counters: Vec<NodeCounters>,
    pub start_time: f64,
    /// Completion time of the last delivery, relative to `start_time`.
    pub critical_path_latency: f64,
}

#[derive(Serialize)]
struct JsonlRecord {
    round_tag: RoundTag,
    sender: NodeId,
    receiver: NodeId,
    byte_size: usize,
    send_time: f64,
    deliver_time: f64,
}

impl Transcript {
    fn empty(nodes: usize, start_time: f64) -> Self {
        Self {
            messages: Vec::new(),
            counters: vec![NodeCounters::default(); nodes],
            start_time,
            critical_path_latency: 0.0,
        }
    }

    pub fn total_sent(&self) -> usize {
        self.counters.iter().map(|c| c.sent).sum()
    }

    pub fn total_received(&self) -> usize {
        self.counters.iter().map(|c| c.received).sum()
    }

    pub fn total_bytes(&self) -> usize {
        self.counters.iter().map(|c| c.bytes_out).sum()
    }

    /// Appends a later run; latencies accumulate.
    pub fn extend(&mut self, other: Transcript) {
        if self.counters.len() < other.counters.len() {
            self.counters.resize(other.counters.len(), NodeCounters::default());
        }
        if self.messages.is_empty() && self.critical_path_latency == 0.0 {
            self.start_time = other.start_time;
        }
        for (mine, theirs) in self.counters.iter_mut().zip(&other.counters) {
            mine.sent += theirs.sent;
            mine.received += theirs.received;
            mine.bytes_out += theirs.bytes_out;
            mine.bytes_in += theirs.bytes_in;
        }
        self.critical_path_latency += other.critical_path_latency;
        self.messages.extend(other.messages);
    }

    /// One JSON object per message.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.messages {
            let rec = JsonlRecord {
                round_tag: r.message.round_tag,
                sender: r.message.sender,
                receiver: r.message.receiver,
                byte_size: r.message.byte_size(),
                send_time: r.send_time,
                deliver_time: r.deliver_time,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct InFlight(MessageRecord);

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    // Reversed: BinaryHeap is a max-heap, we pop the earliest (deliver_time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .deliver_time
            .total_cmp(&self.0.deliver_time)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

/// Single-threaded discrete-event network.
///
/// The clock persists across runs so consecutive rounds get increasing
/// timestamps; each [`SimNet::run_until_idle`] returns the transcript of that
/// run only.
pub struct SimNet {
    latency: LatencyMatrix,
    processing_delay: f64,
    clock: f64,
    seq: u64,
    queue: BinaryHeap<InFlight>,
    failed: BTreeSet<NodeId>,
    current: Option<Transcript>,
}

impl SimNet {
    pub fn new(latency: LatencyMatrix) -> Self {
        Self {
            latency,
            processing_delay: 0.0,
            clock: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            failed: BTreeSet::new(),
            current: None,
        }
    }

    /// Fixed delay charged before every send.
    pub fn with_processing_delay(mut self, ms: f64) -> Self {
        self.processing_delay = ms.max(0.0);
        self
    }

    pub fn latency(&self) -> &LatencyMatrix {
        &self.latency
    }

    pub fn parties(&self) -> usize {
        self.latency.parties()
    }

    pub fn mediator(&self) -> NodeId {
        self.latency.mediator()
    }

    pub fn now(&self) -> f64 {
        self.clock
    }

    /// Messages sent by a failed node are silently dropped.
    pub fn fail_node(&mut self, node: NodeId) {
        self.failed.insert(node);
    }

    pub fn clear_failures(&mut self) {
        self.failed.clear();
    }

    fn transcript(&mut self) -> &mut Transcript {
        let (nodes, clock) = (self.latency.nodes(), self.clock);
        self.current.get_or_insert_with(|| Transcript::empty(nodes, clock))
    }

    pub fn schedule(&mut self, msg: Message, at: f64) -> Result<(), SimError> {
        let nodes = self.latency.nodes();
        for id in [msg.sender, msg.receiver] {
            if id.0 >= nodes {
                return Err(SimError::Routing(id));
            }
        }
        if msg.sender == msg.receiver {
            return Err(SimError::Routing(msg.receiver));
        }
        if self.failed.contains(&msg.sender) {
            log::debug!("simnet: dropping message from failed node {:?}", msg.sender);
            return Ok(());
        }
        let send_time = at.max(self.clock) + self.processing_delay;
        let deliver_time = send_time + self.latency.get(msg.sender, msg.receiver);
        let bytes = msg.byte_size();
        let sender = msg.sender.0;
        let counters = &mut self.transcript().counters;
        counters[sender].sent += 1;
        counters[sender].bytes_out += bytes;
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(InFlight(MessageRecord {
            message: msg,
            send_time,
            deliver_time,
            seq,
        }));
        Ok(())
    }

    /// Delivers messages in `(deliver_time, seq)` order until nothing is in
    /// flight and the handler emits nothing more from `on_idle`.
    pub fn run_until_idle<H: Handler + ?Sized>(&mut self, handler: &mut H) -> Result<Transcript, SimError> {
        let start = self.transcript().start_time;
        let mut out = Outbox::default();
        loop {
            while let Some(InFlight(rec)) = self.queue.pop() {
                self.clock = self.clock.max(rec.deliver_time);
                let now = self.clock;
                handler.on_deliver(now, &rec.message, &mut out);
                let bytes = rec.message.byte_size();
                let t = self.transcript();
                let c = &mut t.counters[rec.message.receiver.0];
                c.received += 1;
                c.bytes_in += bytes;
                t.critical_path_latency = t.critical_path_latency.max(rec.deliver_time - start);
                t.messages.push(rec);
                self.flush(&mut out, now)?;
            }
            let now = self.clock;
            handler.on_idle(now, &mut out);
            if out.is_empty() {
                break;
            }
            self.flush(&mut out, now)?;
            if self.queue.is_empty() {
                // Every message in the new phase was dropped.
                continue;
            }
        }
        Ok(self.current.take().unwrap_or_else(|| Transcript::empty(self.latency.nodes(), start)))
    }

    fn flush(&mut self, out: &mut Outbox, now: f64) -> Result<(), SimError> {
        for msg in out.pending.drain(..) {
            self.schedule(msg, now)?;
        }
        Ok(())
    }
}
