use thiserror::Error;

use super::types::{AccountId, AccountKind, MoneyKind, NodeId, Party, StateRef, TransactionId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("account name {name:?} already exists on {node}")]
    DuplicateAccountName { node: NodeId, name: String },
    #[error("an account of kind {0:?} already exists")]
    DuplicateAccountKind(AccountKind),
    #[error("accounts of kind {kind:?} must be hosted on {expected}")]
    WrongHostForKind { kind: AccountKind, expected: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("unknown input state {0}")]
    UnknownInput(StateRef),
    #[error("unknown transaction {0:?}")]
    UnknownTransaction(TransactionId),
    #[error("{0} is not a required signer of this transaction")]
    SignerNotParticipant(Party),
    #[error("input {state} already consumed by {consumed_by:?}")]
    DoubleSpend {
        state: StateRef,
        consumed_by: TransactionId,
    },
    #[error("transaction {0:?} already notarised")]
    AlreadyNotarized(TransactionId),
    #[error("missing signature of {0}")]
    MissingSignature(Party),
    #[error("invalid signature of {0}")]
    InvalidSignature(Party),
    #[error("transaction content does not match its id")]
    TxIdMismatch,
    #[error("insufficient funds available")]
    InsufficientFunds { account: AccountId, money: MoneyKind },
    #[error("amount must be positive")]
    NonPositiveAmount,
    #[error("account {0} is not a participant of the state")]
    NotParticipant(AccountId),
    #[error("balance arithmetic overflow")]
    Overflow,
}
