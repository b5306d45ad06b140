use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::{Mutex, RwLock};

use super::error::LedgerError;
use super::log::LedgerEvent;
use super::signing::{DigestSignatures, SignatureScheme};
use super::types::*;
use super::vault::{Vault, VaultFilter};
use crate::clock::{Clock, ManualClock};
use crate::contracts::{self, ContractRules};

/// Outcome of a successful notarisation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotaryResult {
    pub tx_id: TransactionId,
    pub timestamp: Timestamp,
}

#[derive(Clone, Debug)]
pub struct Notarized {
    pub tx: Arc<SignedTransaction>,
    pub result: NotaryResult,
}

/// Balances and vault contents, comparable across ledgers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub balances: BTreeMap<AccountId, Balances>,
    pub vaults: BTreeMap<AccountId, Vec<(StateRef, LedgerState)>>,
}

#[derive(Default)]
struct Registry {
    accounts: BTreeMap<AccountId, AccountRef>,
    names: HashSet<(NodeId, String)>,
    next_id: u64,
}

#[derive(Default)]
struct CommitStore {
    consumed: HashMap<StateRef, TransactionId>,
    balances: HashMap<AccountId, Balances>,
    log: Vec<LedgerEvent>,
    logical: u64,
}

/// Shared ledger: account registry, notary commit store, transaction
/// storage and per-account vaults.
///
/// The notary commit (consume inputs, move balances, assign timestamp,
/// append to the log) happens under a single lock, so two transactions
/// consuming the same input serialize and exactly one wins.
pub struct Ledger {
    nodes: BTreeSet<NodeId>,
    signer: Arc<dyn SignatureScheme>,
    clock: Arc<dyn Clock>,
    registry: RwLock<Registry>,
    commit: Mutex<CommitStore>,
    transactions: DashMap<TransactionId, Arc<SignedTransaction>>,
    vaults: DashMap<AccountId, Vault>,
    next_linear: AtomicU64,
}

impl Ledger {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        Self::with_parts(nodes, Arc::new(DigestSignatures), Arc::new(ManualClock::new()))
    }

    pub fn with_parts(
        nodes: impl IntoIterator<Item = NodeId>,
        signer: Arc<dyn SignatureScheme>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            nodes: nodes.into_iter().collect(),
            signer,
            clock,
            registry: RwLock::new(Registry::default()),
            commit: Mutex::new(CommitStore::default()),
            transactions: DashMap::new(),
            vaults: DashMap::new(),
            next_linear: AtomicU64::new(1),
        }
    }

    pub fn signer(&self) -> &dyn SignatureScheme {
        self.signer.as_ref()
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn next_linear_id(&self) -> LinearId {
        LinearId(self.next_linear.fetch_add(1, Ordering::SeqCst))
    }

    pub fn create_account(
        &self,
        node: NodeId,
        name: &str,
        kind: AccountKind,
    ) -> Result<AccountRef, LedgerError> {
        if !self.nodes.contains(&node) {
            return Err(LedgerError::UnknownNode(node));
        }
        if matches!(kind, AccountKind::GovPayments | AccountKind::GovInvestigator)
            && node != NodeId::HmrcCwp
        {
            return Err(LedgerError::WrongHostForKind {
                kind,
                expected: NodeId::HmrcCwp,
            });
        }
        let mut reg = self.registry.write();
        if matches!(kind, AccountKind::GovPayments | AccountKind::GovInvestigator)
            && reg.accounts.values().any(|a| a.kind == kind)
        {
            return Err(LedgerError::DuplicateAccountKind(kind));
        }
        if !reg.names.insert((node, name.to_string())) {
            return Err(LedgerError::DuplicateAccountName {
                node,
                name: name.to_string(),
            });
        }
        reg.next_id += 1;
        let account = AccountRef {
            id: AccountId(reg.next_id),
            display_name: name.to_string(),
            host_node: node,
            kind,
        };
        reg.accounts.insert(account.id, account.clone());
        drop(reg);

        self.vaults.insert(account.id, Vault::default());
        let mut commit = self.commit.lock();
        commit.balances.insert(account.id, Balances::default());
        commit.log.push(LedgerEvent::Account {
            account: account.clone(),
        });
        Ok(account)
    }

    pub fn account(&self, id: AccountId) -> Option<AccountRef> {
        self.registry.read().accounts.get(&id).cloned()
    }

    pub fn account_by_name(&self, name: &str) -> Option<AccountRef> {
        self.registry
            .read()
            .accounts
            .values()
            .find(|a| a.display_name == name)
            .cloned()
    }

    /// First registered account of the given kind.
    pub fn account_of_kind(&self, kind: AccountKind) -> Option<AccountRef> {
        self.registry
            .read()
            .accounts
            .values()
            .find(|a| a.kind == kind)
            .cloned()
    }

    pub fn accounts(&self) -> Vec<AccountRef> {
        self.registry.read().accounts.values().cloned().collect()
    }

    pub fn accounts_on(&self, node: NodeId) -> Vec<AccountRef> {
        self.registry
            .read()
            .accounts
            .values()
            .filter(|a| a.host_node == node)
            .cloned()
            .collect()
    }

    /// External issuance of money into an account (funds arriving from
    /// outside the ledger).
    pub fn deposit(
        &self,
        account: AccountId,
        money: MoneyKind,
        amount: i64,
    ) -> Result<(), LedgerError> {
        if amount <= 0 {
            return Err(LedgerError::NonPositiveAmount);
        }
        let account_ref = self
            .account(account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        let mut commit = self.commit.lock();
        let balances = commit
            .balances
            .get_mut(&account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        let slot = balances.get_mut(money);
        *slot = slot.checked_add(amount).ok_or(LedgerError::Overflow)?;
        commit.logical += 1;
        let timestamp = Timestamp {
            logical: commit.logical,
            micros: self.clock.now_micros(),
        };
        commit.log.push(LedgerEvent::Deposit {
            account: account_ref,
            money,
            amount,
            timestamp,
        });
        Ok(())
    }

    pub fn get_balance(&self, account: AccountId, money: MoneyKind) -> Result<i64, LedgerError> {
        self.balances(account).map(|b| b.get(money))
    }

    pub fn balances(&self, account: AccountId) -> Result<Balances, LedgerError> {
        self.commit
            .lock()
            .balances
            .get(&account)
            .copied()
            .ok_or(LedgerError::UnknownAccount(account))
    }

    pub fn transaction(&self, tx_id: &TransactionId) -> Option<Arc<SignedTransaction>> {
        self.transactions.get(tx_id).map(|t| Arc::clone(&t))
    }

    /// Looks up a notarised output.
    pub fn resolve(&self, state_ref: &StateRef) -> Result<StateAndRef, LedgerError> {
        let tx = self
            .transaction(&state_ref.tx_id)
            .ok_or(LedgerError::UnknownInput(*state_ref))?;
        if state_ref.output_index as usize >= tx.outputs.len() {
            return Err(LedgerError::UnknownInput(*state_ref));
        }
        Ok(StateAndRef::new(tx, state_ref.output_index))
    }

    pub fn consumed_by(&self, state_ref: &StateRef) -> Option<TransactionId> {
        self.commit.lock().consumed.get(state_ref).copied()
    }

    /// Builds a transaction and attaches the initiator's signature.
    /// Required signers are derived from the command and outputs.
    pub fn build_and_sign(
        &self,
        rules: &ContractRules,
        initiator: Party,
        inputs: Vec<StateRef>,
        outputs: Vec<LedgerState>,
        command: Command,
        transfers: Vec<Transfer>,
    ) -> Result<SignedTransaction, LedgerError> {
        for input in &inputs {
            self.resolve(input)?;
            if let Some(by) = self.consumed_by(input) {
                return Err(LedgerError::DoubleSpend {
                    state: *input,
                    consumed_by: by,
                });
            }
        }
        let signers = contracts::required_signers(command, &outputs, rules);
        if !signers.contains(&initiator) {
            return Err(LedgerError::SignerNotParticipant(initiator));
        }
        let mut tx = SignedTransaction::new(initiator, inputs, outputs, command, transfers, signers);
        self.sign_as(&mut tx, initiator);
        Ok(tx)
    }

    pub fn sign_as(&self, tx: &mut SignedTransaction, party: Party) {
        let signature = self.signer.sign(party, &tx.tx_id);
        tx.add_signature(PartySignature { party, signature });
    }

    /// Checks id integrity and every required signature.
    pub fn check_signatures(&self, tx: &SignedTransaction) -> Result<(), LedgerError> {
        if !tx.content_matches_id() {
            return Err(LedgerError::TxIdMismatch);
        }
        for party in &tx.required_signers {
            let sig = tx
                .signature_of(*party)
                .ok_or(LedgerError::MissingSignature(*party))?;
            if !self.signer.verify(*party, &tx.tx_id, &sig) {
                return Err(LedgerError::InvalidSignature(*party));
            }
        }
        Ok(())
    }

    /// Checks a committed transaction that produced an input: its id,
    /// every required signature and the notary's attestation.
    pub fn verify_dependency(&self, tx: &SignedTransaction) -> Result<(), LedgerError> {
        self.check_signatures(tx)?;
        let notary = Party::Node(NodeId::Notary);
        let sig = tx.notary_signature.ok_or(LedgerError::MissingSignature(notary))?;
        if !self.signer.verify(notary, &tx.tx_id, &sig) {
            return Err(LedgerError::InvalidSignature(notary));
        }
        Ok(())
    }

    /// Uniqueness-and-timestamp notary commit. Does not run contracts.
    pub fn notarize(&self, mut tx: SignedTransaction) -> Result<Notarized, LedgerError> {
        self.check_signatures(&tx)?;
        let mut commit = self.commit.lock();

        let mut seen = HashSet::with_capacity(tx.inputs.len());
        for input in &tx.inputs {
            let origin = self
                .transactions
                .get(&input.tx_id)
                .ok_or(LedgerError::UnknownInput(*input))?;
            if input.output_index as usize >= origin.outputs.len() {
                return Err(LedgerError::UnknownInput(*input));
            }
            if let Some(by) = commit.consumed.get(input) {
                return Err(LedgerError::DoubleSpend {
                    state: *input,
                    consumed_by: *by,
                });
            }
            if !seen.insert(*input) {
                return Err(LedgerError::DoubleSpend {
                    state: *input,
                    consumed_by: tx.tx_id,
                });
            }
        }
        if self.transactions.contains_key(&tx.tx_id) {
            return Err(LedgerError::AlreadyNotarized(tx.tx_id));
        }

        let updated = apply_transfers(&commit.balances, &tx.transfers)?;

        for input in &tx.inputs {
            commit.consumed.insert(*input, tx.tx_id);
        }
        for (id, balances) in updated {
            commit.balances.insert(id, balances);
        }
        commit.logical += 1;
        let timestamp = Timestamp {
            logical: commit.logical,
            micros: self.clock.now_micros(),
        };
        tx.timestamp = Some(timestamp);
        tx.notary_signature = Some(self.signer.sign(Party::Node(NodeId::Notary), &tx.tx_id));
        let tx = Arc::new(tx);
        self.transactions.insert(tx.tx_id, Arc::clone(&tx));
        commit.log.push(LedgerEvent::Transaction(Arc::clone(&tx)));
        drop(commit);

        Ok(Notarized {
            result: NotaryResult {
                tx_id: tx.tx_id,
                timestamp,
            },
            tx,
        })
    }

    /// Stores a notarised output in one participant's vault.
    pub fn record_state(&self, account: AccountId, sar: StateAndRef) -> Result<(), LedgerError> {
        if !sar.state().is_participant(account) {
            return Err(LedgerError::NotParticipant(account));
        }
        if sar.tx.notary_signature.is_none() || !self.transactions.contains_key(&sar.tx.tx_id) {
            return Err(LedgerError::UnknownTransaction(sar.tx.tx_id));
        }
        let mut vault = self
            .vaults
            .get_mut(&account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        vault.record(sar);
        Ok(())
    }

    /// Records every output of `tx` for each participant hosted on `node`.
    pub fn record_for_node(
        &self,
        node: NodeId,
        tx: &Arc<SignedTransaction>,
    ) -> Result<usize, LedgerError> {
        let mut recorded = 0;
        for (index, state) in tx.outputs.iter().enumerate() {
            for participant in state.participants() {
                if participant.host_node == node {
                    self.record_state(participant.id, StateAndRef::new(Arc::clone(tx), index as u32))?;
                    recorded += 1;
                }
            }
        }
        Ok(recorded)
    }

    /// Current (non-historic) states visible to `account`.
    pub fn vault_query(
        &self,
        account: AccountId,
        filter: &VaultFilter,
    ) -> Result<Vec<StateAndRef>, LedgerError> {
        let vault = self
            .vaults
            .get(&account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        Ok(vault.query(filter))
    }

    pub fn historic_states(&self, account: AccountId) -> Result<Vec<StateRef>, LedgerError> {
        let vault = self
            .vaults
            .get(&account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        Ok(vault.historic().to_vec())
    }

    pub fn vault_size(&self, account: AccountId) -> usize {
        self.vaults.get(&account).map(|v| v.len()).unwrap_or(0)
    }

    /// Number of transactions committed by the notary.
    pub fn committed_count(&self) -> usize {
        self.transactions.len()
    }

    pub fn consumed_count(&self) -> usize {
        self.commit.lock().consumed.len()
    }

    /// Every consumed input with the transaction that consumed it.
    pub fn consumed_set(&self) -> BTreeMap<StateRef, TransactionId> {
        self.commit
            .lock()
            .consumed
            .iter()
            .map(|(k, v)| (*k, *v))
            .collect()
    }

    pub fn events(&self) -> Vec<LedgerEvent> {
        self.commit.lock().log.clone()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let balances = self
            .commit
            .lock()
            .balances
            .iter()
            .map(|(k, v)| (*k, *v))
            .collect();
        let vaults = self
            .vaults
            .iter()
            .map(|entry| {
                let states = entry
                    .value()
                    .query(&VaultFilter::all())
                    .into_iter()
                    .map(|sar| (sar.state_ref(), sar.state().clone()))
                    .collect();
                (*entry.key(), states)
            })
            .collect();
        LedgerSnapshot { balances, vaults }
    }

    /// Rebuilds a ledger from an event log. Every committed output is
    /// recorded in all of its participants' vaults.
    pub fn replay(
        nodes: impl IntoIterator<Item = NodeId>,
        events: &[LedgerEvent],
    ) -> Result<Ledger, LedgerError> {
        Self::replay_with(nodes, Arc::new(DigestSignatures), events)
    }

    /// Replay for logs signed under another scheme.
    pub fn replay_with(
        nodes: impl IntoIterator<Item = NodeId>,
        signer: Arc<dyn SignatureScheme>,
        events: &[LedgerEvent],
    ) -> Result<Ledger, LedgerError> {
        let ledger = Ledger::with_parts(nodes, signer, Arc::new(ManualClock::new()));
        for event in events {
            match event {
                LedgerEvent::Account { account } => ledger.restore_account(account.clone())?,
                LedgerEvent::Deposit {
                    account,
                    money,
                    amount,
                    timestamp,
                } => {
                    let mut commit = ledger.commit.lock();
                    let balances = commit
                        .balances
                        .get_mut(&account.id)
                        .ok_or(LedgerError::UnknownAccount(account.id))?;
                    let slot = balances.get_mut(*money);
                    *slot = slot.checked_add(*amount).ok_or(LedgerError::Overflow)?;
                    commit.logical = commit.logical.max(timestamp.logical);
                    commit.log.push(event.clone());
                }
                LedgerEvent::Transaction(tx) => {
                    ledger.check_signatures(tx)?;
                    let mut commit = ledger.commit.lock();
                    for input in &tx.inputs {
                        if let Some(by) = commit.consumed.insert(*input, tx.tx_id) {
                            return Err(LedgerError::DoubleSpend {
                                state: *input,
                                consumed_by: by,
                            });
                        }
                    }
                    let updated = apply_transfers(&commit.balances, &tx.transfers)?;
                    for (id, b) in updated {
                        commit.balances.insert(id, b);
                    }
                    if let Some(ts) = tx.timestamp {
                        commit.logical = commit.logical.max(ts.logical);
                    }
                    commit.log.push(event.clone());
                    drop(commit);
                    ledger.transactions.insert(tx.tx_id, Arc::clone(tx));
                    for (index, state) in tx.outputs.iter().enumerate() {
                        for p in state.participants() {
                            ledger.record_state(p.id, StateAndRef::new(Arc::clone(tx), index as u32))?;
                        }
                    }
                }
            }
        }
        Ok(ledger)
    }

    fn restore_account(&self, account: AccountRef) -> Result<(), LedgerError> {
        let mut reg = self.registry.write();
        if !reg.names.insert((account.host_node, account.display_name.clone())) {
            return Err(LedgerError::DuplicateAccountName {
                node: account.host_node,
                name: account.display_name,
            });
        }
        reg.next_id = reg.next_id.max(account.id.0);
        reg.accounts.insert(account.id, account.clone());
        drop(reg);
        self.vaults.insert(account.id, Vault::default());
        let mut commit = self.commit.lock();
        commit.balances.insert(account.id, Balances::default());
        commit.log.push(LedgerEvent::Account { account });
        Ok(())
    }
}

/// Computes post-transfer balances; rejects unknown accounts and overdrafts.
pub(super) fn apply_transfers(
    balances: &HashMap<AccountId, Balances>,
    transfers: &[Transfer],
) -> Result<Vec<(AccountId, Balances)>, LedgerError> {
    let mut updated: Vec<(AccountId, Balances)> = Vec::with_capacity(transfers.len());
    for t in transfers {
        let id = t.account.id;
        let pos = match updated.iter().position(|(a, _)| *a == id) {
            Some(pos) => pos,
            None => {
                let current = *balances.get(&id).ok_or(LedgerError::UnknownAccount(id))?;
                updated.push((id, current));
                updated.len() - 1
            }
        };
        let slot = updated[pos].1.get_mut(t.money);
        *slot = slot.checked_add(t.delta).ok_or(LedgerError::Overflow)?;
    }
    for t in transfers {
        let (_, b) = updated.iter().find(|(a, _)| *a == t.account.id).expect("present");
        if b.get(t.money) < 0 {
            return Err(LedgerError::InsufficientFunds {
                account: t.account.id,
                money: t.money,
            });
        }
    }
    Ok(updated)
}
