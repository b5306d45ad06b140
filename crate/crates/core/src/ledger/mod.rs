//! Immutable state storage, account-scoped vaults, transaction assembly
//! and signing, and the notary uniqueness service.

mod error;
pub mod log;
mod signing;
mod store;
mod types;
mod vault;

pub use error::LedgerError;
pub use log::LedgerEvent;
pub use signing::{DigestSignatures, Ed25519Signatures, SignatureScheme};
pub use store::{Ledger, LedgerSnapshot, NotaryResult, Notarized};
pub use types::*;
pub use vault::VaultFilter;
