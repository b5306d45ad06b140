//! Simulated network: the five node roles, flow sessions between them,
//! client endpoints, and two schedulers (seeded single-threaded and
//! multi-threaded).

mod concurrent;
mod deterministic;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use dashmap::DashMap;
use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::contracts::ContractRules;
use crate::flows::{ApprovalPolicy, AutoApprove, FlowId, FlowKind, FlowRequest, FlowResult, Node};
use crate::ledger::{Ledger, NodeId};

pub use concurrent::ConcurrentNetwork;
pub use deterministic::DeterministicNetwork;
pub use crate::flows::{Envelope, Payload, Transport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("node {0} is configured twice")]
    DuplicateNode(NodeId),
    #[error("the network has no notary")]
    MissingNotary,
    #[error("the network has no {0} node")]
    MissingRole(NodeId),
    #[error("client is attached to {client_node} but the initiator is hosted on {initiator_host}")]
    WrongNode {
        client_node: NodeId,
        initiator_host: NodeId,
    },
    #[error("client queue is full ({capacity} requests in flight)")]
    QueueOverflow { capacity: usize },
    #[error("deadlock: {} flow(s) wait for messages no node will send", flows.len())]
    DeadlockDetected { flows: Vec<FlowId> },
    #[error("flow {0} did not reach a result")]
    Unresolved(FlowId),
    #[error("fault injection needs the deterministic scheduler")]
    FaultsNeedDeterministic,
    #[error("invalid network config: {0}")]
    Config(#[from] serde_json::Error),
    #[error("cannot read network config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerMode {
    #[default]
    Deterministic,
    Concurrent,
}

/// Signature scheme the network's ledger uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureKind {
    #[default]
    Digest,
    Ed25519,
}

/// Per-message delay: `constant + uniform(0, jitter)`, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LatencyModel {
    #[serde(default)]
    pub constant_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
}

impl LatencyModel {
    pub fn constant_micros(&self) -> u64 {
        (self.constant_ms.max(0.0) * 1000.0) as u64
    }

    pub fn jitter_micros(&self) -> u64 {
        (self.jitter_ms.max(0.0) * 1000.0) as u64
    }

    pub fn is_zero(&self) -> bool {
        self.constant_micros() == 0 && self.jitter_micros() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Fault {
    /// Undeliverable link: the flow owner is told the session failed.
    DropSession { from: NodeId, to: NodeId },
    /// Messages on the link vanish without notice.
    Blackhole { from: NodeId, to: NodeId },
    /// Extra delay on matching messages; unset endpoints match any node.
    Delay {
        #[serde(default)]
        from: Option<NodeId>,
        #[serde(default)]
        to: Option<NodeId>,
        ms: f64,
    },
    /// Messages to the node are held until it is resumed.
    PauseNode { node: NodeId },
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NodeConfig {
    pub name: NodeId,
    #[serde(default = "all_flows")]
    pub flows: BTreeSet<FlowKind>,
}

fn all_flows() -> BTreeSet<FlowKind> {
    FlowKind::ALL.into_iter().collect()
}

impl NodeConfig {
    pub fn new(name: NodeId) -> Self {
        Self {
            name,
            flows: all_flows(),
        }
    }
}

fn default_nodes() -> Vec<NodeConfig> {
    NodeId::ALL.into_iter().map(NodeConfig::new).collect()
}

fn default_capacity() -> usize {
    100_000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_nodes")]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub mode: SchedulerMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub faults: Vec<Fault>,
    /// Worker threads per node in concurrent mode.
    #[serde(default)]
    pub workers_per_node: Option<usize>,
    /// Default bound on a client's in-flight requests.
    #[serde(default = "default_capacity")]
    pub client_capacity: usize,
    #[serde(default)]
    pub rules: ContractRules,
    #[serde(default)]
    pub signatures: SignatureKind,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            mode: SchedulerMode::Deterministic,
            seed: 0,
            latency: LatencyModel::default(),
            faults: Vec::new(),
            workers_per_node: None,
            client_capacity: default_capacity(),
            rules: ContractRules::default(),
            signatures: SignatureKind::Digest,
        }
    }
}

impl NetworkConfig {
    pub fn deterministic(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn concurrent() -> Self {
        Self {
            mode: SchedulerMode::Concurrent,
            ..Self::default()
        }
    }

    pub fn with_rules(mut self, rules: ContractRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn from_json(json: &str) -> Result<Self, NetError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the node set: unique names, a notary, and every role.
    pub fn validate(&self) -> Result<(), NetError> {
        let mut seen = BTreeSet::new();
        for node in &self.nodes {
            if !seen.insert(node.name) {
                return Err(NetError::DuplicateNode(node.name));
            }
        }
        if !seen.contains(&NodeId::Notary) {
            return Err(NetError::MissingNotary);
        }
        if let Some(missing) = NodeId::ALL.into_iter().find(|n| !seen.contains(n)) {
            return Err(NetError::MissingRole(missing));
        }
        Ok(())
    }
}

/// Ledger plus node instances shared by both schedulers.
pub(crate) struct Core {
    pub ledger: Arc<Ledger>,
    pub nodes: BTreeMap<NodeId, Arc<Node>>,
}

impl Core {
    pub fn build(
        config: &NetworkConfig,
        clock: Arc<dyn Clock>,
        approval: Arc<dyn ApprovalPolicy>,
    ) -> Result<Self, NetError> {
        config.validate()?;
        let signer: Arc<dyn crate::ledger::SignatureScheme> = match config.signatures {
            SignatureKind::Digest => Arc::new(crate::ledger::DigestSignatures),
            SignatureKind::Ed25519 => Arc::new(crate::ledger::Ed25519Signatures::new(config.seed)),
        };
        let ledger = Arc::new(Ledger::with_parts(
            config.nodes.iter().map(|n| n.name),
            signer,
            clock,
        ));
        let rules = Arc::new(config.rules.clone());
        let nodes = config
            .nodes
            .iter()
            .map(|n| {
                let node = Node::new(
                    n.name,
                    n.flows.iter().copied(),
                    Arc::clone(&ledger),
                    Arc::clone(&rules),
                    Arc::clone(&approval),
                );
                (n.name, Arc::new(node))
            })
            .collect();
        Ok(Self { ledger, nodes })
    }
}

struct Slot {
    result: Mutex<Option<FlowResult>>,
    ready: Condvar,
    client: Arc<AtomicUsize>,
}

/// Resolves to the flow's terminal result.
#[derive(Clone)]
pub struct FlowHandle {
    id: FlowId,
    slot: Arc<Slot>,
}

impl std::fmt::Debug for FlowHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowHandle").field("id", &self.id).finish()
    }
}

impl FlowHandle {
    pub fn id(&self) -> FlowId {
        self.id
    }

    pub fn try_result(&self) -> Option<FlowResult> {
        self.slot.result.lock().clone()
    }

    pub fn is_done(&self) -> bool {
        self.slot.result.lock().is_some()
    }

    /// Blocks until the flow finishes. Only meaningful with the concurrent
    /// scheduler; deterministic runs resolve handles in `run_until_idle`.
    pub fn wait(&self) -> FlowResult {
        let mut guard = self.slot.result.lock();
        loop {
            if let Some(r) = guard.as_ref() {
                return r.clone();
            }
            self.slot.ready.wait(&mut guard);
        }
    }

    pub fn wait_timeout(&self, timeout: Duration) -> Option<FlowResult> {
        let deadline = std::time::Instant::now() + timeout;
        let mut guard = self.slot.result.lock();
        while guard.is_none() {
            if self.slot.ready.wait_until(&mut guard, deadline).timed_out() {
                break;
            }
        }
        guard.clone()
    }
}

/// Open flow handles, keyed by flow id.
#[derive(Default)]
pub(crate) struct Registry {
    open: DashMap<FlowId, FlowHandle>,
}

impl Registry {
    pub fn open(&self, id: FlowId, client: &ClientEndpoint) -> FlowHandle {
        let handle = FlowHandle {
            id,
            slot: Arc::new(Slot {
                result: Mutex::new(None),
                ready: Condvar::new(),
                client: Arc::clone(&client.in_flight),
            }),
        };
        self.open.insert(id, handle.clone());
        handle
    }

    pub fn complete(&self, result: FlowResult) {
        if let Some((_, handle)) = self.open.remove(&result.flow_id) {
            handle.slot.client.fetch_sub(1, Ordering::SeqCst);
            *handle.slot.result.lock() = Some(result);
            handle.slot.ready.notify_all();
        }
    }

    pub fn pending(&self) -> Vec<FlowId> {
        let mut ids: Vec<FlowId> = self.open.iter().map(|e| *e.key()).collect();
        ids.sort();
        ids
    }
}

/// A request generator bound to one node.
#[derive(Clone, Debug)]
pub struct ClientEndpoint {
    pub client_id: u64,
    pub node: NodeId,
    capacity: usize,
    in_flight: Arc<AtomicUsize>,
}

impl ClientEndpoint {
    pub(crate) fn new(client_id: u64, node: NodeId, capacity: usize) -> Self {
        Self {
            client_id,
            node,
            capacity,
            in_flight: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.load(Ordering::SeqCst)
    }

    /// Reserves a queue slot for `req`.
    pub(crate) fn admit(&self, req: &FlowRequest) -> Result<(), NetError> {
        if req.initiator.host_node != self.node {
            return Err(NetError::WrongNode {
                client_node: self.node,
                initiator_host: req.initiator.host_node,
            });
        }
        let admitted = self
            .in_flight
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                (n < self.capacity).then_some(n + 1)
            });
        admitted.map(|_| ()).map_err(|_| NetError::QueueOverflow {
            capacity: self.capacity,
        })
    }
}

/// Quiescence summary from `run_until_idle`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdleReport {
    /// Messages delivered during this call.
    pub steps: u64,
    /// Flows blocked behind a paused node.
    pub stalled: Vec<FlowId>,
    /// Messages held for paused nodes.
    pub held: usize,
}

/// Either scheduler behind one interface.
#[allow(clippy::large_enum_variant)]
pub enum Network {
    Deterministic(DeterministicNetwork),
    Concurrent(ConcurrentNetwork),
}

pub fn start_network(config: &NetworkConfig) -> Result<Network, NetError> {
    start_network_with(config, Arc::new(AutoApprove))
}

pub fn start_network_with(
    config: &NetworkConfig,
    approval: Arc<dyn ApprovalPolicy>,
) -> Result<Network, NetError> {
    Ok(match config.mode {
        SchedulerMode::Deterministic => {
            Network::Deterministic(DeterministicNetwork::start_with(config, approval)?)
        }
        SchedulerMode::Concurrent => {
            Network::Concurrent(ConcurrentNetwork::start_with(config, approval)?)
        }
    })
}

impl Network {
    pub fn ledger(&self) -> &Arc<Ledger> {
        match self {
            Network::Deterministic(n) => n.ledger(),
            Network::Concurrent(n) => n.ledger(),
        }
    }

    pub fn client(&mut self, node: NodeId) -> ClientEndpoint {
        match self {
            Network::Deterministic(n) => n.client(node),
            Network::Concurrent(n) => n.client(node),
        }
    }

    pub fn submit(
        &mut self,
        client: &ClientEndpoint,
        request: FlowRequest,
    ) -> Result<FlowHandle, NetError> {
        match self {
            Network::Deterministic(n) => n.submit(client, request),
            Network::Concurrent(n) => n.submit(client, request),
        }
    }

    /// Deterministic: drains the event queue. Concurrent: waits until no
    /// message is in flight.
    pub fn run_until_idle(&mut self) -> Result<IdleReport, NetError> {
        match self {
            Network::Deterministic(n) => n.run_until_idle(),
            Network::Concurrent(n) => {
                n.wait_idle();
                Ok(IdleReport::default())
            }
        }
    }
}
