//! Multi-threaded scheduler: each node drains its own inbox on a pool of
//! worker threads. The notary commit is the only global serialisation
//! point.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use parking_lot::{Condvar, Mutex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClientEndpoint, Core, FlowHandle, LatencyModel, NetError, NetworkConfig, Registry};
use crate::clock::WallClock;
use crate::flows::{
    ApprovalPolicy, AutoApprove, Envelope, FlowId, FlowRequest, FlowResult, Payload, Transport,
};
use crate::ledger::{Ledger, NodeId};

enum Timed {
    At(Instant, u64, Envelope),
    Stop,
}

struct Delayed(Instant, u64, Envelope);

impl PartialEq for Delayed {
    fn eq(&self, other: &Self) -> bool {
        (self.0, self.1) == (other.0, other.1)
    }
}

impl Eq for Delayed {}

impl PartialOrd for Delayed {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Delayed {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0, self.1).cmp(&(other.0, other.1))
    }
}

struct LatencyState {
    rng: ChaCha8Rng,
    seq: u64,
    session_tail: HashMap<(FlowId, NodeId, NodeId), Instant>,
}

struct Shared {
    core: Core,
    registry: Registry,
    inboxes: BTreeMap<NodeId, Sender<Envelope>>,
    in_flight: Mutex<usize>,
    idle: Condvar,
    latency: LatencyModel,
    latency_state: Mutex<LatencyState>,
    timer: Option<Sender<Timed>>,
}

impl Shared {
    fn deliver(&self, env: Envelope) {
        let inbox = &self.inboxes[&env.to];
        // Receivers live as long as the network; a send can only fail
        // during shutdown, when the message no longer matters.
        let _ = inbox.send(env);
    }

    fn delivered(&self) {
        let mut n = self.in_flight.lock();
        *n -= 1;
        if *n == 0 {
            self.idle.notify_all();
        }
    }
}

impl Transport for Shared {
    fn send(&self, env: Envelope) {
        *self.in_flight.lock() += 1;
        match &self.timer {
            None => self.deliver(env),
            Some(timer) => {
                let jitter = self.latency.jitter_micros();
                let mut st = self.latency_state.lock();
                let extra = if jitter > 0 { st.rng.gen_range(0..=jitter) } else { 0 };
                let mut due = Instant::now()
                    + Duration::from_micros(self.latency.constant_micros() + extra);
                let key = env.session_key();
                if let Some(&tail) = st.session_tail.get(&key) {
                    due = due.max(tail);
                }
                st.session_tail.insert(key, due);
                st.seq += 1;
                let seq = st.seq;
                drop(st);
                let _ = timer.send(Timed::At(due, seq, env));
            }
        }
    }

    fn complete(&self, result: FlowResult) {
        self.registry.complete(result);
    }
}

pub struct ConcurrentNetwork {
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
    timer: Option<JoinHandle<()>>,
    next_flow: AtomicU64,
    next_client: AtomicU64,
    client_capacity: usize,
    workers_per_node: usize,
}

impl ConcurrentNetwork {
    pub fn start(config: &NetworkConfig) -> Result<Self, NetError> {
        Self::start_with(config, Arc::new(AutoApprove))
    }

    pub fn start_with(
        config: &NetworkConfig,
        approval: Arc<dyn ApprovalPolicy>,
    ) -> Result<Self, NetError> {
        if !config.faults.is_empty() {
            return Err(NetError::FaultsNeedDeterministic);
        }
        let core = Core::build(config, Arc::new(WallClock::new()), approval)?;
        let workers_per_node = config.workers_per_node.unwrap_or(1).max(1);

        let mut inboxes = BTreeMap::new();
        let mut receivers: Vec<(NodeId, Receiver<Envelope>)> = Vec::new();
        for &id in core.nodes.keys() {
            let (tx, rx) = unbounded();
            inboxes.insert(id, tx);
            receivers.push((id, rx));
        }

        let (timer_tx, timer_rx) = if config.latency.is_zero() {
            (None, None)
        } else {
            let (tx, rx) = unbounded();
            (Some(tx), Some(rx))
        };

        let shared = Arc::new(Shared {
            core,
            registry: Registry::default(),
            inboxes,
            in_flight: Mutex::new(0),
            idle: Condvar::new(),
            latency: config.latency,
            latency_state: Mutex::new(LatencyState {
                rng: ChaCha8Rng::seed_from_u64(config.seed),
                seq: 0,
                session_tail: HashMap::new(),
            }),
            timer: timer_tx,
        });

        let mut workers = Vec::new();
        for (id, rx) in receivers {
            for w in 0..workers_per_node {
                let shared = Arc::clone(&shared);
                let rx = rx.clone();
                let node = Arc::clone(&shared.core.nodes[&id]);
                let handle = std::thread::Builder::new()
                    .name(format!("{id}-{w}"))
                    .spawn(move || {
                        while let Ok(env) = rx.recv() {
                            if matches!(env.payload, Payload::Shutdown) {
                                break;
                            }
                            node.handle(env, shared.as_ref());
                            shared.delivered();
                        }
                    })
                    .expect("spawn node worker");
                workers.push(handle);
            }
        }

        let timer = timer_rx.map(|rx| {
            let inboxes = shared.inboxes.clone();
            std::thread::Builder::new()
                .name("latency-timer".into())
                .spawn(move || run_timer(rx, inboxes))
                .expect("spawn timer")
        });

        Ok(Self {
            shared,
            workers,
            timer,
            next_flow: AtomicU64::new(0),
            next_client: AtomicU64::new(0),
            client_capacity: config.client_capacity,
            workers_per_node,
        })
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.shared.core.ledger
    }

    pub fn client(&self, node: NodeId) -> ClientEndpoint {
        self.client_with_capacity(node, self.client_capacity)
    }

    pub fn client_with_capacity(&self, node: NodeId, capacity: usize) -> ClientEndpoint {
        let id = self.next_client.fetch_add(1, Ordering::SeqCst) + 1;
        ClientEndpoint::new(id, node, capacity)
    }

    pub fn submit(
        &self,
        client: &ClientEndpoint,
        request: FlowRequest,
    ) -> Result<FlowHandle, NetError> {
        client.admit(&request)?;
        let flow = FlowId {
            node: client.node,
            seq: self.next_flow.fetch_add(1, Ordering::SeqCst) + 1,
        };
        let handle = self.shared.registry.open(flow, client);
        let submitted_at = self.shared.core.ledger.clock().now_micros();
        self.shared.send(Envelope {
            flow,
            from: client.node,
            to: client.node,
            payload: Payload::Start {
                request: Box::new(request),
                submitted_at,
            },
        });
        Ok(handle)
    }

    /// Blocks until no message is queued or being handled.
    pub fn wait_idle(&self) {
        let mut n = self.shared.in_flight.lock();
        while *n > 0 {
            self.shared.idle.wait(&mut n);
        }
    }

    pub fn wait_idle_timeout(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut n = self.shared.in_flight.lock();
        while *n > 0 {
            if self.shared.idle.wait_until(&mut n, deadline).timed_out() {
                return *n == 0;
            }
        }
        true
    }

    pub fn pending_flows(&self) -> Vec<FlowId> {
        self.shared.registry.pending()
    }
}

impl Drop for ConcurrentNetwork {
    fn drop(&mut self) {
        if let Some(timer) = &self.shared.timer {
            let _ = timer.send(Timed::Stop);
        }
        if let Some(t) = self.timer.take() {
            let _ = t.join();
        }
        for inbox in self.shared.inboxes.values() {
            for _ in 0..self.workers_per_node {
                let _ = inbox.send(Envelope {
                    flow: FlowId {
                        node: NodeId::Notary,
                        seq: 0,
                    },
                    from: NodeId::Notary,
                    to: NodeId::Notary,
                    payload: Payload::Shutdown,
                });
            }
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn run_timer(rx: Receiver<Timed>, inboxes: BTreeMap<NodeId, Sender<Envelope>>) {
    let mut heap: BinaryHeap<Reverse<Delayed>> = BinaryHeap::new();
    loop {
        let now = Instant::now();
        while heap.peek().is_some_and(|Reverse(d)| d.0 <= now) {
            let Reverse(Delayed(_, _, env)) = heap.pop().expect("peeked");
            let _ = inboxes[&env.to].send(env);
        }
        let next = match heap.peek() {
            Some(Reverse(d)) => rx.recv_timeout(d.0.saturating_duration_since(now)),
            None => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match next {
            Ok(Timed::At(due, seq, env)) => heap.push(Reverse(Delayed(due, seq, env))),
            Ok(Timed::Stop) | Err(RecvTimeoutError::Disconnected) => return,
            Err(RecvTimeoutError::Timeout) => {}
        }
    }
}
