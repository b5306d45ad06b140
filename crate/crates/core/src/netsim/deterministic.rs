//! Seeded single-threaded discrete-event scheduler.
//!
//! Every delivery is ordered by `(deliver_at, rank, seq)` where `rank` is
//! drawn from the seeded RNG, so the interleaving of independent sessions
//! depends only on the seed. Messages on one session keep their send order.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ClientEndpoint, Core, Fault, FlowHandle, IdleReport, LatencyModel, NetError, NetworkConfig,
    Registry,
};
use crate::clock::{Clock, ManualClock};
use crate::flows::{
    ApprovalPolicy, AutoApprove, Envelope, FlowId, FlowRequest, FlowResult, Payload, Transport,
};
use crate::ledger::{Ledger, NodeId};

#[derive(Debug)]
struct Scheduled {
    deliver_at: u64,
    rank: u64,
    seq: u64,
    env: Envelope,
}

impl Scheduled {
    fn key(&self) -> (u64, u64, u64) {
        (self.deliver_at, self.rank, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Default)]
struct Outbox {
    sent: RefCell<Vec<Envelope>>,
    completed: RefCell<Vec<FlowResult>>,
}

impl Transport for Outbox {
    fn send(&self, env: Envelope) {
        self.sent.borrow_mut().push(env);
    }

    fn complete(&self, result: FlowResult) {
        self.completed.borrow_mut().push(result);
    }
}

pub struct DeterministicNetwork {
    core: Core,
    clock: Arc<ManualClock>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    session_tail: HashMap<(FlowId, NodeId, NodeId), (u64, u64)>,
    latency: LatencyModel,
    faults: Vec<Fault>,
    paused: BTreeSet<NodeId>,
    held: Vec<Envelope>,
    registry: Registry,
    next_flow: u64,
    next_client: u64,
    client_capacity: usize,
    steps: u64,
}

impl DeterministicNetwork {
    pub fn start(config: &NetworkConfig) -> Result<Self, NetError> {
        Self::start_with(config, Arc::new(AutoApprove))
    }

    pub fn start_with(
        config: &NetworkConfig,
        approval: Arc<dyn ApprovalPolicy>,
    ) -> Result<Self, NetError> {
        let clock = Arc::new(ManualClock::new());
        let core = Core::build(config, clock.clone(), approval)?;
        let mut net = Self {
            core,
            clock,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            queue: BinaryHeap::new(),
            seq: 0,
            session_tail: HashMap::new(),
            latency: config.latency,
            faults: Vec::new(),
            paused: BTreeSet::new(),
            held: Vec::new(),
            registry: Registry::default(),
            next_flow: 0,
            next_client: 0,
            client_capacity: config.client_capacity,
            steps: 0,
        };
        for fault in &config.faults {
            net.inject_fault(fault.clone());
        }
        Ok(net)
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.core.ledger
    }

    pub fn now_micros(&self) -> u64 {
        self.clock.now_micros()
    }

    pub fn client(&mut self, node: NodeId) -> ClientEndpoint {
        self.client_with_capacity(node, self.client_capacity)
    }

    pub fn client_with_capacity(&mut self, node: NodeId, capacity: usize) -> ClientEndpoint {
        self.next_client += 1;
        ClientEndpoint::new(self.next_client, node, capacity)
    }

    /// Enqueues a flow; it makes progress only when the scheduler runs.
    pub fn submit(
        &mut self,
        client: &ClientEndpoint,
        request: FlowRequest,
    ) -> Result<FlowHandle, NetError> {
        client.admit(&request)?;
        self.next_flow += 1;
        let flow = FlowId {
            node: client.node,
            seq: self.next_flow,
        };
        let handle = self.registry.open(flow, client);
        let env = Envelope {
            flow,
            from: client.node,
            to: client.node,
            payload: Payload::Start {
                request: Box::new(request),
                submitted_at: self.clock.now_micros(),
            },
        };
        self.schedule(env, 0);
        Ok(handle)
    }

    /// Submits, runs to quiescence and returns the flow's result.
    pub fn execute(
        &mut self,
        client: &ClientEndpoint,
        request: FlowRequest,
    ) -> Result<FlowResult, NetError> {
        let handle = self.submit(client, request)?;
        self.run_until_idle()?;
        handle.try_result().ok_or(NetError::Unresolved(handle.id()))
    }

    pub fn inject_fault(&mut self, fault: Fault) {
        match fault {
            Fault::PauseNode { node } => self.pause_node(node),
            other => self.faults.push(other),
        }
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    pub fn pause_node(&mut self, node: NodeId) {
        self.paused.insert(node);
    }

    /// Releases messages held for `node` in their original order.
    pub fn resume_node(&mut self, node: NodeId) {
        self.paused.remove(&node);
        let (release, keep): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.held).into_iter().partition(|e| e.to == node);
        self.held = keep;
        for env in release {
            self.schedule(env, 0);
        }
    }

    pub fn pending_messages(&self) -> usize {
        self.queue.len()
    }

    /// Delivers one message. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(Reverse(item)) = self.queue.pop() else {
            return false;
        };
        self.clock.advance_to(item.deliver_at);
        let env = item.env;
        if self.paused.contains(&env.to) {
            self.held.push(env);
            return true;
        }
        self.steps += 1;
        let node = Arc::clone(&self.core.nodes[&env.to]);
        let out = Outbox::default();
        node.handle(env, &out);
        for result in out.completed.into_inner() {
            self.registry.complete(result);
        }
        for env in out.sent.into_inner() {
            self.dispatch(env);
        }
        true
    }

    pub fn run_until_idle(&mut self) -> Result<IdleReport, NetError> {
        let start = self.steps;
        while self.step() {}
        let pending = self.registry.pending();
        let report = IdleReport {
            steps: self.steps - start,
            stalled: Vec::new(),
            held: self.held.len(),
        };
        if pending.is_empty() {
            self.session_tail.clear();
            Ok(report)
        } else if !self.held.is_empty() {
            Ok(IdleReport {
                stalled: pending,
                ..report
            })
        } else {
            Err(NetError::DeadlockDetected { flows: pending })
        }
    }

    fn dispatch(&mut self, env: Envelope) {
        let mut extra = 0u64;
        for fault in &self.faults {
            match *fault {
                Fault::Blackhole { from, to }
                    if env.from == from && env.to == to && env.droppable() =>
                {
                    return;
                }
                Fault::DropSession { from, to }
                    if env.from == from && env.to == to && env.droppable() =>
                {
                    let owner = env.flow.node;
                    let peer = if env.from == owner { env.to } else { env.from };
                    let failed = Envelope {
                        flow: env.flow,
                        from: peer,
                        to: owner,
                        payload: Payload::SessionFailed {
                            peer,
                            reason: format!("link {from}->{to} dropped"),
                        },
                    };
                    self.schedule(failed, 0);
                    return;
                }
                Fault::Delay { from, to, ms }
                    if from.is_none_or(|f| f == env.from) && to.is_none_or(|t| t == env.to) =>
                {
                    extra += (ms.max(0.0) * 1000.0) as u64;
                }
                _ => {}
            }
        }
        let jitter = self.latency.jitter_micros();
        let delay = self.latency.constant_micros()
            + if jitter > 0 { self.rng.gen_range(0..=jitter) } else { 0 }
            + extra;
        self.schedule(env, delay);
    }

    fn schedule(&mut self, env: Envelope, delay: u64) {
        let mut deliver_at = self.clock.now_micros() + delay;
        let mut rank: u64 = self.rng.gen();
        let key = env.session_key();
        if let Some(&(t, r)) = self.session_tail.get(&key) {
            if (deliver_at, rank) < (t, r) {
                deliver_at = t;
                rank = r;
            }
        }
        self.session_tail.insert(key, (deliver_at, rank));
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            deliver_at,
            rank,
            seq: self.seq,
            env,
        }));
    }
}
