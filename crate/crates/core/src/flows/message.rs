use std::sync::Arc;

use super::{FlowError, FlowId, FlowRequest};
use crate::ledger::{
    AccountId, InvoiceState, LedgerError, NodeId, PartySignature, SignedTransaction,
};

#[derive(Clone, Debug)]
pub enum Payload {
    /// Client submission, delivered to the initiating node.
    Start {
        request: Box<FlowRequest>,
        submitted_at: u64,
    },
    SignRequest(Arc<SignedTransaction>),
    SignResponse(Result<Vec<PartySignature>, FlowError>),
    NotariseRequest(Arc<SignedTransaction>),
    NotariseResponse(Result<Arc<SignedTransaction>, LedgerError>),
    QueryRequest {
        subject: AccountId,
    },
    QueryResponse(Result<Vec<InvoiceState>, FlowError>),
    Record(Arc<SignedTransaction>),
    RecordAck(Result<(), FlowError>),
    /// Synthesised by the transport when a session cannot deliver.
    SessionFailed {
        peer: NodeId,
        reason: String,
    },
    /// Stops a worker thread.
    Shutdown,
}

impl Payload {
    pub fn name(&self) -> &'static str {
        match self {
            Payload::Start { .. } => "Start",
            Payload::SignRequest(_) => "SignRequest",
            Payload::SignResponse(_) => "SignResponse",
            Payload::NotariseRequest(_) => "NotariseRequest",
            Payload::NotariseResponse(_) => "NotariseResponse",
            Payload::QueryRequest { .. } => "QueryRequest",
            Payload::QueryResponse(_) => "QueryResponse",
            Payload::Record(_) => "Record",
            Payload::RecordAck(_) => "RecordAck",
            Payload::SessionFailed { .. } => "SessionFailed",
            Payload::Shutdown => "Shutdown",
        }
    }
}

/// One message on a flow session between two nodes.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub flow: FlowId,
    pub from: NodeId,
    pub to: NodeId,
    pub payload: Payload,
}

impl Envelope {
    /// Messages sent after the notary commit are retried by the sender
    /// until delivered, so fault injection never drops them.
    pub fn droppable(&self) -> bool {
        matches!(
            self.payload,
            Payload::SignRequest(_) | Payload::SignResponse(_) | Payload::NotariseRequest(_)
        )
    }

    pub fn reply(&self, payload: Payload) -> Envelope {
        Envelope {
            flow: self.flow,
            from: self.to,
            to: self.from,
            payload,
        }
    }

    /// Ordering key: messages with the same key are delivered in send order.
    pub fn session_key(&self) -> (FlowId, NodeId, NodeId) {
        (self.flow, self.from, self.to)
    }
}
