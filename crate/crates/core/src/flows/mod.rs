//! Multi-party flows: the initiating state machines and the responder
//! logic each node runs when a counterparty asks it to sign.

mod message;
mod node;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{Violation, ViolationReason, DISALLOWED_GOODS_MESSAGE};
use crate::ledger::{
    AccountId, AccountKind, AccountRef, InvoiceState, ItemLine, Ledger, LedgerError, LinearId,
    MoneyKind, NodeId, SignedTransaction, TransactionId,
};

pub use message::{Envelope, Payload};
pub use node::{Node, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowKind {
    IssueInvoice,
    PayInvoice,
    PayInvoiceTokens,
    IssueTokens,
    RequestWarrant,
    ExecuteWarrant,
}

impl FlowKind {
    pub const ALL: [FlowKind; 6] = [
        FlowKind::IssueInvoice,
        FlowKind::PayInvoice,
        FlowKind::PayInvoiceTokens,
        FlowKind::IssueTokens,
        FlowKind::RequestWarrant,
        FlowKind::ExecuteWarrant,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowPayload {
    IssueInvoice {
        buyer: AccountRef,
        lines: Vec<ItemLine>,
        money_kind: MoneyKind,
    },
    Pay {
        invoice_id: LinearId,
    },
    IssueTokens {
        recipient: AccountRef,
        amount: i64,
    },
    RequestWarrant {
        subject: AccountRef,
    },
    ExecuteWarrant {
        warrant_id: LinearId,
        /// When set, must name the authority recorded on the warrant.
        authority: Option<AccountId>,
    },
}

/// A request submitted by a client to the node hosting `initiator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowRequest {
    pub kind: FlowKind,
    pub initiator: AccountRef,
    pub payload: FlowPayload,
}

impl FlowRequest {
    pub fn issue_invoice(
        seller: &AccountRef,
        buyer: &AccountRef,
        lines: Vec<ItemLine>,
        money_kind: MoneyKind,
    ) -> Self {
        Self {
            kind: FlowKind::IssueInvoice,
            initiator: seller.clone(),
            payload: FlowPayload::IssueInvoice {
                buyer: buyer.clone(),
                lines,
                money_kind,
            },
        }
    }

    pub fn pay_invoice(buyer: &AccountRef, invoice_id: LinearId) -> Self {
        Self {
            kind: FlowKind::PayInvoice,
            initiator: buyer.clone(),
            payload: FlowPayload::Pay { invoice_id },
        }
    }

    pub fn pay_invoice_with_tokens(buyer: &AccountRef, invoice_id: LinearId) -> Self {
        Self {
            kind: FlowKind::PayInvoiceTokens,
            initiator: buyer.clone(),
            payload: FlowPayload::Pay { invoice_id },
        }
    }

    /// `issuer` is any account hosted on the issuing node; the node itself
    /// signs the issuance.
    pub fn issue_tokens(issuer: &AccountRef, recipient: &AccountRef, amount: i64) -> Self {
        Self {
            kind: FlowKind::IssueTokens,
            initiator: issuer.clone(),
            payload: FlowPayload::IssueTokens {
                recipient: recipient.clone(),
                amount,
            },
        }
    }

    pub fn request_warrant(requester: &AccountRef, subject: &AccountRef) -> Self {
        Self {
            kind: FlowKind::RequestWarrant,
            initiator: requester.clone(),
            payload: FlowPayload::RequestWarrant {
                subject: subject.clone(),
            },
        }
    }

    pub fn execute_warrant(requester: &AccountRef, warrant_id: LinearId) -> Self {
        Self {
            kind: FlowKind::ExecuteWarrant,
            initiator: requester.clone(),
            payload: FlowPayload::ExecuteWarrant {
                warrant_id,
                authority: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("contract violation: {0}")]
    ContractViolation(Violation),
    #[error("insufficient funds available")]
    InsufficientFunds,
    #[error("{}", DISALLOWED_GOODS_MESSAGE)]
    DisallowedGoods,
    #[error("unknown invoice {0}")]
    UnknownInvoice(LinearId),
    #[error("{0} is not the buyer of this invoice")]
    WrongBuyer(AccountId),
    #[error("{0} may not issue tokens")]
    UnauthorizedIssuer(NodeId),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("{0} is not an investigator account")]
    NotInvestigator(AccountId),
    #[error("unknown subject account {0}")]
    UnknownSubject(AccountId),
    #[error("warrant {0} was already executed")]
    AlreadyExecuted(LinearId),
    #[error("only the requester may execute warrant {0}")]
    NotRequester(LinearId),
    #[error("unknown warrant {0}")]
    UnknownWarrant(LinearId),
    #[error("the legal authority declined the warrant")]
    WarrantDenied,
    #[error("{0:?} is not installed on this node")]
    UnsupportedFlow(FlowKind),
    #[error("notary rejected the transaction: {0}")]
    Notary(LedgerError),
    #[error("session failure: {0}")]
    SessionFailure(String),
}

impl From<Violation> for FlowError {
    fn from(v: Violation) -> Self {
        match v.reason {
            ViolationReason::DisallowedGoods => FlowError::DisallowedGoods,
            _ => FlowError::ContractViolation(v),
        }
    }
}

impl From<LedgerError> for FlowError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::InsufficientFunds { .. } => FlowError::InsufficientFunds,
            LedgerError::UnknownAccount(id) => FlowError::UnknownAccount(id),
            other => FlowError::Notary(other),
        }
    }
}

impl FlowError {
    pub fn violation_reason(&self) -> Option<ViolationReason> {
        match self {
            FlowError::ContractViolation(v) => Some(v.reason),
            FlowError::DisallowedGoods => Some(ViolationReason::DisallowedGoods),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId {
    pub node: NodeId,
    pub seq: u64,
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.node, self.seq)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowOutput {
    Invoice {
        invoice_id: LinearId,
        tx_id: TransactionId,
    },
    Tx {
        tx_id: TransactionId,
    },
    Warrant {
        warrant_id: LinearId,
        tx_id: TransactionId,
    },
    /// Invoices of the warrant subject. Returned to the caller only; never
    /// stored in any vault.
    WarrantData {
        tx_id: TransactionId,
        invoices: Vec<InvoiceState>,
    },
}

impl FlowOutput {
    pub fn tx_id(&self) -> TransactionId {
        match self {
            FlowOutput::Invoice { tx_id, .. }
            | FlowOutput::Tx { tx_id }
            | FlowOutput::Warrant { tx_id, .. }
            | FlowOutput::WarrantData { tx_id, .. } => *tx_id,
        }
    }
}

/// Terminal outcome of a flow. Times are network-clock microseconds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowResult {
    pub flow_id: FlowId,
    pub kind: FlowKind,
    pub outcome: Result<FlowOutput, FlowError>,
    pub submitted_at: u64,
    /// Notary commit time; set iff the transaction was committed.
    pub notarized_at: Option<u64>,
    /// When distribution to every participant node was acknowledged.
    pub completed_at: u64,
}

impl FlowResult {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn output(&self) -> Option<&FlowOutput> {
        self.outcome.as_ref().ok()
    }

    pub fn error(&self) -> Option<&FlowError> {
        self.outcome.as_ref().err()
    }

    pub fn invoice_id(&self) -> Option<LinearId> {
        match self.output()? {
            FlowOutput::Invoice { invoice_id, .. } => Some(*invoice_id),
            _ => None,
        }
    }

    pub fn warrant_id(&self) -> Option<LinearId> {
        match self.output()? {
            FlowOutput::Warrant { warrant_id, .. } => Some(*warrant_id),
            _ => None,
        }
    }

    /// Seconds from submission to notary commit.
    pub fn latency_secs(&self) -> Option<f64> {
        self.notarized_at
            .map(|n| n.saturating_sub(self.submitted_at) as f64 / 1e6)
    }
}

/// Decides whether the legal authority signs a warrant request.
pub trait ApprovalPolicy: Send + Sync {
    fn approve(&self, tx: &SignedTransaction) -> bool;
}

/// Signs every well-formed request.
#[derive(Clone, Copy, Debug, Default)]
pub struct AutoApprove;

impl ApprovalPolicy for AutoApprove {
    fn approve(&self, _tx: &SignedTransaction) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DenyAll;

impl ApprovalPolicy for DenyAll {
    fn approve(&self, _tx: &SignedTransaction) -> bool {
        false
    }
}

/// The three government-side accounts every deployment needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GovAccounts {
    pub vat_payments: AccountRef,
    pub vat_investigator: AccountRef,
    pub legal_authority: AccountRef,
}

impl GovAccounts {
    pub fn create(ledger: &Ledger) -> Result<Self, LedgerError> {
        Ok(Self {
            vat_payments: ledger.create_account(
                NodeId::HmrcCwp,
                "VATPayments",
                AccountKind::GovPayments,
            )?,
            vat_investigator: ledger.create_account(
                NodeId::HmrcCwp,
                "VATInvestigator",
                AccountKind::GovInvestigator,
            )?,
            legal_authority: ledger.create_account(
                NodeId::LegalCwp,
                "LegalAuthority",
                AccountKind::LegalAuthority,
            )?,
        })
    }
}
