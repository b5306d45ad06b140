//! Account-scoped storage of current states.

use std::collections::BTreeMap;

use super::types::{
    AccountId, InvoiceStatus, LedgerState, LinearId, StateAndRef, StateKind, StateRef,
    WarrantStatus,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum VaultKey {
    Linear(LinearId),
    Fungible(StateRef),
}

/// Query filter; unset fields match everything.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VaultFilter {
    pub kind: Option<StateKind>,
    pub invoice_status: Option<InvoiceStatus>,
    pub warrant_status: Option<WarrantStatus>,
    pub counterparty: Option<AccountId>,
    pub linear_id: Option<LinearId>,
}

impl VaultFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn invoices() -> Self {
        Self {
            kind: Some(StateKind::Invoice),
            ..Self::default()
        }
    }

    pub fn warrants() -> Self {
        Self {
            kind: Some(StateKind::DataAccessRequest),
            ..Self::default()
        }
    }

    pub fn with_invoice_status(mut self, status: InvoiceStatus) -> Self {
        self.kind = Some(StateKind::Invoice);
        self.invoice_status = Some(status);
        self
    }

    pub fn with_linear_id(mut self, id: LinearId) -> Self {
        self.linear_id = Some(id);
        self
    }

    pub fn with_counterparty(mut self, account: AccountId) -> Self {
        self.counterparty = Some(account);
        self
    }

    pub fn matches(&self, state: &LedgerState) -> bool {
        if let Some(kind) = self.kind {
            if state.kind() != kind {
                return false;
            }
        }
        if let Some(status) = self.invoice_status {
            match state.as_invoice() {
                Some(inv) if inv.status == status => {}
                _ => return false,
            }
        }
        if let Some(status) = self.warrant_status {
            match state.as_warrant() {
                Some(dar) if dar.status == status => {}
                _ => return false,
            }
        }
        if let Some(cp) = self.counterparty {
            if !state.is_participant(cp) {
                return false;
            }
        }
        if let Some(id) = self.linear_id {
            if state.linear_id() != Some(id) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Default)]
pub(crate) struct Vault {
    current: BTreeMap<VaultKey, StateAndRef>,
    historic: Vec<StateRef>,
}

impl Vault {
    /// Inserts a state, superseding an older state of the same sequence.
    /// Ordering within a sequence follows the notary logical clock.
    pub(crate) fn record(&mut self, sar: StateAndRef) {
        let key = match sar.state().linear_id() {
            Some(id) => VaultKey::Linear(id),
            None => VaultKey::Fungible(sar.state_ref()),
        };
        match self.current.get(&key) {
            None => {
                self.current.insert(key, sar);
            }
            Some(existing) if existing.state_ref() == sar.state_ref() => {}
            Some(existing) => {
                if logical(existing) < logical(&sar) {
                    self.historic.push(existing.state_ref());
                    self.current.insert(key, sar);
                } else {
                    self.historic.push(sar.state_ref());
                }
            }
        }
    }

    pub(crate) fn query(&self, filter: &VaultFilter) -> Vec<StateAndRef> {
        if let Some(id) = filter.linear_id {
            return self
                .current
                .get(&VaultKey::Linear(id))
                .filter(|sar| filter.matches(sar.state()))
                .cloned()
                .into_iter()
                .collect();
        }
        self.current
            .values()
            .filter(|sar| filter.matches(sar.state()))
            .cloned()
            .collect()
    }

    pub(crate) fn historic(&self) -> &[StateRef] {
        &self.historic
    }

    pub(crate) fn len(&self) -> usize {
        self.current.len()
    }
}

fn logical(sar: &StateAndRef) -> u64 {
    sar.tx.timestamp.map(|t| t.logical).unwrap_or(0)
}
