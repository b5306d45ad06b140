//! A network node: hosts accounts, runs initiating flows as resumable state
//! machines and answers counterparty requests.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::Mutex;

use super::message::{Envelope, Payload};
use super::{ApprovalPolicy, FlowError, FlowId, FlowKind, FlowOutput, FlowPayload, FlowRequest, FlowResult};
use crate::contracts::{self, ContractRules, InvoiceAmounts, TxView, Violation};
use crate::ledger::{
    AccountKind, AccountRef, Command, DataAccessRequestState, InvoiceState, InvoiceStatus,
    Ledger, LedgerState, MoneyKind, NodeId, Party, PartySignature, SignedTransaction,
    StateAndRef, TokenIssuanceState, Transfer, VaultFilter, WarrantStatus,
};

/// Outgoing side of a node: message delivery and flow completion.
pub trait Transport {
    fn send(&self, env: Envelope);
    fn complete(&self, result: FlowResult);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    Signing,
    Notarising,
    Querying,
    Finalising,
}

struct FlowMachine {
    kind: FlowKind,
    submitted_at: u64,
    stage: Stage,
    tx: SignedTransaction,
    awaiting: BTreeSet<NodeId>,
    committed: Option<Arc<SignedTransaction>>,
    output: FlowOutput,
    query: Option<AccountRef>,
}

enum Lookup {
    Own(StateAndRef),
    Elsewhere,
    Missing,
}

struct Prepared {
    tx: SignedTransaction,
    output: FlowOutput,
    query: Option<AccountRef>,
}

pub struct Node {
    id: NodeId,
    installed: BTreeSet<FlowKind>,
    ledger: Arc<Ledger>,
    rules: Arc<ContractRules>,
    approval: Arc<dyn ApprovalPolicy>,
    flows: Mutex<HashMap<FlowId, Arc<Mutex<FlowMachine>>>>,
}

impl Node {
    pub fn new(
        id: NodeId,
        installed: impl IntoIterator<Item = FlowKind>,
        ledger: Arc<Ledger>,
        rules: Arc<ContractRules>,
        approval: Arc<dyn ApprovalPolicy>,
    ) -> Self {
        Self {
            id,
            installed: installed.into_iter().collect(),
            ledger,
            rules,
            approval,
            flows: Mutex::new(HashMap::new()),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    pub fn rules(&self) -> &ContractRules {
        &self.rules
    }

    /// Flows started here that have not reached a terminal result.
    pub fn active_flows(&self) -> usize {
        self.flows.lock().len()
    }

    pub fn handle(&self, env: Envelope, t: &dyn Transport) {
        match env.payload {
            Payload::Start {
                ref request,
                submitted_at,
            } => self.start_flow(env.flow, request, submitted_at, t),
            Payload::SignRequest(ref tx) => {
                let resp = self.respond_sign(tx);
                t.send(env.reply(Payload::SignResponse(resp)));
            }
            Payload::NotariseRequest(ref tx) => {
                let resp = if self.id == NodeId::Notary {
                    self.ledger.notarize((**tx).clone()).map(|n| n.tx)
                } else {
                    Err(crate::ledger::LedgerError::UnknownNode(self.id))
                };
                t.send(env.reply(Payload::NotariseResponse(resp)));
            }
            Payload::QueryRequest { subject } => {
                let resp = self.answer_query(subject);
                t.send(env.reply(Payload::QueryResponse(resp)));
            }
            Payload::Record(ref tx) => {
                let resp = self
                    .ledger
                    .record_for_node(self.id, tx)
                    .map(|_| ())
                    .map_err(FlowError::from);
                t.send(env.reply(Payload::RecordAck(resp)));
            }
            Payload::SignResponse(_)
            | Payload::NotariseResponse(_)
            | Payload::QueryResponse(_)
            | Payload::RecordAck(_)
            | Payload::SessionFailed { .. } => self.advance(env, t),
            Payload::Shutdown => {}
        }
    }

    fn now(&self) -> u64 {
        self.ledger.clock().now_micros()
    }

    fn finish(
        &self,
        flow: FlowId,
        m: &FlowMachine,
        outcome: Result<FlowOutput, FlowError>,
        t: &dyn Transport,
    ) {
        self.flows.lock().remove(&flow);
        t.complete(FlowResult {
            flow_id: flow,
            kind: m.kind,
            outcome,
            submitted_at: m.submitted_at,
            notarized_at: m
                .committed
                .as_ref()
                .and_then(|tx| tx.timestamp)
                .map(|ts| ts.micros),
            completed_at: self.now(),
        });
    }

    fn fail_early(
        &self,
        flow: FlowId,
        kind: FlowKind,
        submitted_at: u64,
        err: FlowError,
        t: &dyn Transport,
    ) {
        t.complete(FlowResult {
            flow_id: flow,
            kind,
            outcome: Err(err),
            submitted_at,
            notarized_at: None,
            completed_at: self.now(),
        });
    }

    fn start_flow(&self, flow: FlowId, req: &FlowRequest, submitted_at: u64, t: &dyn Transport) {
        if !self.installed.contains(&req.kind) {
            return self.fail_early(flow, req.kind, submitted_at, FlowError::UnsupportedFlow(req.kind), t);
        }
        let prepared = match self.prepare(req) {
            Ok(p) => p,
            Err(e) => return self.fail_early(flow, req.kind, submitted_at, e, t),
        };
        let mut tx = prepared.tx;
        let mut awaiting = BTreeSet::new();
        for party in tx.required_signers.clone() {
            match party_host(&tx, party) {
                Some(host) if host == self.id => {
                    if let Party::Account(id) = party {
                        if self.ledger.account(id).map(|a| a.host_node) != Some(self.id) {
                            return self.fail_early(
                                flow,
                                req.kind,
                                submitted_at,
                                FlowError::UnknownAccount(id),
                                t,
                            );
                        }
                    }
                    if tx.signature_of(party).is_none() {
                        self.ledger.sign_as(&mut tx, party);
                    }
                }
                Some(host) => {
                    awaiting.insert(host);
                }
                None => {
                    return self.fail_early(
                        flow,
                        req.kind,
                        submitted_at,
                        FlowError::SessionFailure(format!("no node hosts signer {party}")),
                        t,
                    )
                }
            }
        }
        let machine = FlowMachine {
            kind: req.kind,
            submitted_at,
            stage: Stage::Signing,
            tx,
            awaiting,
            committed: None,
            output: prepared.output,
            query: prepared.query,
        };
        let machine = Arc::new(Mutex::new(machine));
        self.flows.lock().insert(flow, Arc::clone(&machine));
        let mut m = machine.lock();
        if m.awaiting.is_empty() {
            self.request_notarisation(flow, &mut m, t);
        } else {
            let shared = Arc::new(m.tx.clone());
            for &peer in &m.awaiting {
                t.send(Envelope {
                    flow,
                    from: self.id,
                    to: peer,
                    payload: Payload::SignRequest(Arc::clone(&shared)),
                });
            }
        }
    }

    fn request_notarisation(&self, flow: FlowId, m: &mut FlowMachine, t: &dyn Transport) {
        m.stage = Stage::Notarising;
        t.send(Envelope {
            flow,
            from: self.id,
            to: NodeId::Notary,
            payload: Payload::NotariseRequest(Arc::new(m.tx.clone())),
        });
    }

    fn advance(&self, env: Envelope, t: &dyn Transport) {
        let flow = env.flow;
        let Some(machine) = self.flows.lock().get(&flow).cloned() else {
            return;
        };
        let mut m = machine.lock();
        match env.payload {
            Payload::SignResponse(resp) => {
                if m.stage != Stage::Signing || !m.awaiting.remove(&env.from) {
                    return;
                }
                match resp {
                    Ok(sigs) => {
                        for sig in sigs {
                            let expected = m.tx.required_signers.contains(&sig.party)
                                && party_host(&m.tx, sig.party) == Some(env.from);
                            if !expected
                                || !self.ledger.signer().verify(sig.party, &m.tx.tx_id, &sig.signature)
                            {
                                let err = FlowError::SessionFailure(format!(
                                    "{} returned an invalid signature",
                                    env.from
                                ));
                                return self.finish(flow, &m, Err(err), t);
                            }
                            m.tx.add_signature(sig);
                        }
                        if m.awaiting.is_empty() {
                            self.request_notarisation(flow, &mut m, t);
                        }
                    }
                    Err(e) => self.finish(flow, &m, Err(e), t),
                }
            }
            Payload::NotariseResponse(resp) => {
                if m.stage != Stage::Notarising {
                    return;
                }
                match resp {
                    Ok(tx) => {
                        if let Err(e) = self.ledger.record_for_node(self.id, &tx) {
                            m.committed = Some(tx);
                            return self.finish(flow, &m, Err(e.into()), t);
                        }
                        m.committed = Some(tx);
                        match m.query.clone() {
                            Some(subject) if subject.host_node != self.id => {
                                m.stage = Stage::Querying;
                                t.send(Envelope {
                                    flow,
                                    from: self.id,
                                    to: subject.host_node,
                                    payload: Payload::QueryRequest { subject: subject.id },
                                });
                            }
                            Some(subject) => {
                                let data = self.answer_query(subject.id);
                                self.on_query_data(flow, &mut m, data, t);
                            }
                            None => self.distribute(flow, &mut m, t),
                        }
                    }
                    Err(e) => self.finish(flow, &m, Err(e.into()), t),
                }
            }
            Payload::QueryResponse(resp) => {
                if m.stage == Stage::Querying {
                    self.on_query_data(flow, &mut m, resp, t);
                }
            }
            Payload::RecordAck(_) => {
                if m.stage == Stage::Finalising && m.awaiting.remove(&env.from) && m.awaiting.is_empty() {
                    let out = m.output.clone();
                    self.finish(flow, &m, Ok(out), t);
                }
            }
            Payload::SessionFailed { peer, reason } if m.committed.is_none() => {
                let err = FlowError::SessionFailure(format!("session with {peer} failed: {reason}"));
                self.finish(flow, &m, Err(err), t);
            }
            _ => {}
        }
    }

    fn on_query_data(
        &self,
        flow: FlowId,
        m: &mut FlowMachine,
        data: Result<Vec<crate::ledger::InvoiceState>, FlowError>,
        t: &dyn Transport,
    ) {
        match data {
            Ok(data) => {
                if let FlowOutput::WarrantData { invoices, .. } = &mut m.output {
                    *invoices = data;
                }
                self.distribute(flow, m, t);
            }
            Err(e) => self.finish(flow, m, Err(e), t),
        }
    }

    /// Sends the committed transaction to every other node hosting a
    /// participant and waits for their acknowledgements.
    fn distribute(&self, flow: FlowId, m: &mut FlowMachine, t: &dyn Transport) {
        let tx = Arc::clone(m.committed.as_ref().expect("distribute after commit"));
        let targets: BTreeSet<NodeId> = tx
            .outputs
            .iter()
            .flat_map(|s| s.participants())
            .map(|p| p.host_node)
            .filter(|n| *n != self.id)
            .collect();
        if targets.is_empty() {
            let out = m.output.clone();
            return self.finish(flow, m, Ok(out), t);
        }
        m.stage = Stage::Finalising;
        m.awaiting = targets;
        for &peer in &m.awaiting {
            t.send(Envelope {
                flow,
                from: self.id,
                to: peer,
                payload: Payload::Record(Arc::clone(&tx)),
            });
        }
    }

    fn answer_query(&self, subject: crate::ledger::AccountId) -> Result<Vec<InvoiceState>, FlowError> {
        match self.ledger.account(subject) {
            Some(a) if a.host_node == self.id => {}
            _ => return Err(FlowError::UnknownSubject(subject)),
        }
        let states = self.ledger.vault_query(subject, &VaultFilter::invoices())?;
        Ok(states
            .iter()
            .filter_map(|sar| sar.state().as_invoice().cloned())
            .collect())
    }

    /// Counterparty side of the signing session: check the transaction,
    /// run the contracts and sign for every required signer hosted here.
    fn respond_sign(&self, tx: &SignedTransaction) -> Result<Vec<PartySignature>, FlowError> {
        if !tx.content_matches_id() {
            return Err(FlowError::SessionFailure(
                "transaction id does not match its content".into(),
            ));
        }
        let initiator_ok = tx
            .signature_of(tx.initiator)
            .is_some_and(|sig| self.ledger.signer().verify(tx.initiator, &tx.tx_id, &sig));
        if !initiator_ok {
            return Err(FlowError::SessionFailure(
                "missing or invalid initiator signature".into(),
            ));
        }
        let inputs = tx
            .inputs
            .iter()
            .map(|r| self.ledger.resolve(r))
            .collect::<Result<Vec<StateAndRef>, _>>()
            .map_err(|e| FlowError::SessionFailure(e.to_string()))?;
        for input in &inputs {
            self.ledger
                .verify_dependency(&input.tx)
                .map_err(|e| FlowError::SessionFailure(format!("input {}: {e}", input.state_ref())))?;
        }
        let input_states: Vec<&LedgerState> = inputs.iter().map(StateAndRef::state).collect();
        contracts::verify(
            &TxView {
                tx,
                inputs: &input_states,
            },
            &self.rules,
        )?;

        let mut hosted = Vec::new();
        let mut needs_approval = false;
        for &party in &tx.required_signers {
            if party_host(tx, party) != Some(self.id) {
                continue;
            }
            if let Party::Account(id) = party {
                let account = self
                    .ledger
                    .account(id)
                    .filter(|a| a.host_node == self.id)
                    .ok_or_else(|| FlowError::SessionFailure(format!("{} hosts no account {id}", self.id)))?;
                needs_approval |= account.kind == AccountKind::LegalAuthority;
            }
            hosted.push(party);
        }
        if hosted.is_empty() {
            return Err(FlowError::SessionFailure(format!(
                "no required signer is hosted on {}",
                self.id
            )));
        }
        if needs_approval && !self.approval.approve(tx) {
            return Err(FlowError::WarrantDenied);
        }
        Ok(hosted
            .into_iter()
            .map(|party| PartySignature {
                party,
                signature: self.ledger.signer().sign(party, &tx.tx_id),
            })
            .collect())
    }

    fn prepare(&self, req: &FlowRequest) -> Result<Prepared, FlowError> {
        let initiator = &req.initiator;
        match self.ledger.account(initiator.id) {
            Some(a) if a.host_node == self.id => {}
            _ => return Err(FlowError::UnknownAccount(initiator.id)),
        }
        match (&req.kind, &req.payload) {
            (
                FlowKind::IssueInvoice,
                FlowPayload::IssueInvoice {
                    buyer,
                    lines,
                    money_kind,
                },
            ) => self.prepare_issue(initiator, buyer, lines, *money_kind),
            (FlowKind::PayInvoice, FlowPayload::Pay { invoice_id }) => {
                self.prepare_pay(initiator, *invoice_id, MoneyKind::Current)
            }
            (FlowKind::PayInvoiceTokens, FlowPayload::Pay { invoice_id }) => {
                self.prepare_pay(initiator, *invoice_id, MoneyKind::Token)
            }
            (FlowKind::IssueTokens, FlowPayload::IssueTokens { recipient, amount }) => {
                self.prepare_tokens(recipient, *amount)
            }
            (FlowKind::RequestWarrant, FlowPayload::RequestWarrant { subject }) => {
                self.prepare_warrant(initiator, subject)
            }
            (
                FlowKind::ExecuteWarrant,
                FlowPayload::ExecuteWarrant {
                    warrant_id,
                    authority,
                },
            ) => self.prepare_execute(initiator, *warrant_id, *authority),
            (kind, _) => Err(FlowError::SessionFailure(format!(
                "payload does not match flow {kind:?}"
            ))),
        }
    }

    fn check_locally(&self, tx: &SignedTransaction, inputs: &[&LedgerState]) -> Result<(), FlowError> {
        contracts::verify(&TxView { tx, inputs }, &self.rules).map_err(FlowError::from)
    }

    fn prepare_issue(
        &self,
        seller: &AccountRef,
        buyer: &AccountRef,
        lines: &[crate::ledger::ItemLine],
        money_kind: MoneyKind,
    ) -> Result<Prepared, FlowError> {
        let amounts =
            InvoiceAmounts::compute(lines, &self.rules.vat).map_err(Violation::from)?;
        let invoice_id = self.ledger.next_linear_id();
        let state = InvoiceState {
            invoice_id,
            seller: seller.clone(),
            buyer: buyer.clone(),
            lines: lines.to_vec(),
            money_kind,
            net_amount: amounts.net,
            vat_amount: amounts.vat,
            total_amount: amounts.total,
            status: InvoiceStatus::Unpaid,
            participants: vec![seller.clone(), buyer.clone()],
        };
        let tx = self.ledger.build_and_sign(
            &self.rules,
            Party::Account(seller.id),
            Vec::new(),
            vec![LedgerState::Invoice(state)],
            Command::IssueInvoice,
            Vec::new(),
        )?;
        self.check_locally(&tx, &[])?;
        Ok(Prepared {
            output: FlowOutput::Invoice {
                invoice_id,
                tx_id: tx.tx_id,
            },
            tx,
            query: None,
        })
    }

    /// Finds a linear state in `account`'s vault, falling back to the
    /// vaults of other accounts on this node.
    fn find_linear(&self, account: &AccountRef, filter: &VaultFilter) -> Result<Lookup, FlowError> {
        if let Some(sar) = self.ledger.vault_query(account.id, filter)?.into_iter().next() {
            return Ok(Lookup::Own(sar));
        }
        for other in self.ledger.accounts_on(self.id) {
            if other.id != account.id && !self.ledger.vault_query(other.id, filter)?.is_empty() {
                return Ok(Lookup::Elsewhere);
            }
        }
        Ok(Lookup::Missing)
    }

    fn prepare_pay(
        &self,
        buyer: &AccountRef,
        invoice_id: crate::ledger::LinearId,
        money: MoneyKind,
    ) -> Result<Prepared, FlowError> {
        let filter = VaultFilter::invoices().with_linear_id(invoice_id);
        let sar = match self.find_linear(buyer, &filter)? {
            Lookup::Own(sar) => sar,
            Lookup::Elsewhere => return Err(FlowError::WrongBuyer(buyer.id)),
            Lookup::Missing => return Err(FlowError::UnknownInvoice(invoice_id)),
        };
        let unpaid = sar.state().as_invoice().expect("invoice filter");
        if unpaid.buyer.id != buyer.id {
            return Err(FlowError::WrongBuyer(buyer.id));
        }

        let mut paid = unpaid.clone();
        paid.status = InvoiceStatus::Paid;
        let leg = |account: &AccountRef, delta: i64| Transfer {
            account: account.clone(),
            money,
            delta,
        };
        let transfers = if self.rules.split_payments {
            let gov = self
                .ledger
                .account_of_kind(AccountKind::GovPayments)
                .ok_or_else(|| FlowError::SessionFailure("no VAT payments account".into()))?;
            paid.participants = vec![paid.seller.clone(), paid.buyer.clone(), gov.clone()];
            vec![
                leg(&paid.buyer, -paid.total_amount),
                leg(&paid.seller, paid.net_amount),
                leg(&gov, paid.vat_amount),
            ]
        } else {
            paid.participants = vec![paid.seller.clone(), paid.buyer.clone()];
            vec![
                leg(&paid.buyer, -paid.total_amount),
                leg(&paid.seller, paid.total_amount),
            ]
        };
        let total = paid.total_amount;
        let command = match money {
            MoneyKind::Current => Command::PayInvoice,
            MoneyKind::Token => Command::PayInvoiceTokens,
        };
        let tx = self.ledger.build_and_sign(
            &self.rules,
            Party::Account(buyer.id),
            vec![sar.state_ref()],
            vec![LedgerState::Invoice(paid)],
            command,
            transfers,
        )?;
        self.check_locally(&tx, &[sar.state()])?;
        if self.ledger.get_balance(buyer.id, money)? < total {
            return Err(FlowError::InsufficientFunds);
        }
        Ok(Prepared {
            output: FlowOutput::Tx { tx_id: tx.tx_id },
            tx,
            query: None,
        })
    }

    fn prepare_tokens(&self, recipient: &AccountRef, amount: i64) -> Result<Prepared, FlowError> {
        if self.id != self.rules.tax_node {
            return Err(FlowError::UnauthorizedIssuer(self.id));
        }
        if self.ledger.account(recipient.id).as_ref() != Some(recipient) {
            return Err(FlowError::UnknownAccount(recipient.id));
        }
        let state = TokenIssuanceState {
            issuer: self.id,
            recipient: recipient.clone(),
            amount,
        };
        let transfers = vec![Transfer {
            account: recipient.clone(),
            money: MoneyKind::Token,
            delta: amount,
        }];
        let tx = self.ledger.build_and_sign(
            &self.rules,
            Party::Node(self.id),
            Vec::new(),
            vec![LedgerState::TokenIssuance(state)],
            Command::IssueTokens,
            transfers,
        )?;
        self.check_locally(&tx, &[])?;
        Ok(Prepared {
            output: FlowOutput::Tx { tx_id: tx.tx_id },
            tx,
            query: None,
        })
    }

    fn prepare_warrant(
        &self,
        requester: &AccountRef,
        subject: &AccountRef,
    ) -> Result<Prepared, FlowError> {
        if requester.kind != AccountKind::GovInvestigator {
            return Err(FlowError::NotInvestigator(requester.id));
        }
        if self.ledger.account(subject.id).as_ref() != Some(subject) {
            return Err(FlowError::UnknownSubject(subject.id));
        }
        let authorizer = self
            .ledger
            .account_of_kind(AccountKind::LegalAuthority)
            .ok_or_else(|| FlowError::SessionFailure("no legal authority account".into()))?;
        let warrant_id = self.ledger.next_linear_id();
        let state = DataAccessRequestState {
            warrant_id,
            requester: requester.clone(),
            subject: subject.clone(),
            authorizer,
            status: WarrantStatus::Authorized,
            authorized_at: Some(self.now()),
            executed_at: None,
        };
        let tx = self.ledger.build_and_sign(
            &self.rules,
            Party::Account(requester.id),
            Vec::new(),
            vec![LedgerState::DataAccessRequest(state)],
            Command::RequestDar,
            Vec::new(),
        )?;
        self.check_locally(&tx, &[])?;
        Ok(Prepared {
            output: FlowOutput::Warrant {
                warrant_id,
                tx_id: tx.tx_id,
            },
            tx,
            query: None,
        })
    }

    fn prepare_execute(
        &self,
        requester: &AccountRef,
        warrant_id: crate::ledger::LinearId,
        authority: Option<crate::ledger::AccountId>,
    ) -> Result<Prepared, FlowError> {
        let filter = VaultFilter::warrants().with_linear_id(warrant_id);
        let sar = match self.find_linear(requester, &filter)? {
            Lookup::Own(sar) => sar,
            Lookup::Elsewhere => return Err(FlowError::NotRequester(warrant_id)),
            Lookup::Missing => return Err(FlowError::UnknownWarrant(warrant_id)),
        };
        let dar = sar.state().as_warrant().expect("warrant filter");
        if dar.requester.id != requester.id {
            return Err(FlowError::NotRequester(warrant_id));
        }
        if dar.status == WarrantStatus::Executed {
            return Err(FlowError::AlreadyExecuted(warrant_id));
        }
        if authority.is_some_and(|a| a != dar.authorizer.id) {
            return Err(FlowError::UnknownWarrant(warrant_id));
        }
        let mut executed = dar.clone();
        executed.status = WarrantStatus::Executed;
        executed.executed_at = Some(self.now());
        let subject = dar.subject.clone();
        let tx = self.ledger.build_and_sign(
            &self.rules,
            Party::Account(requester.id),
            vec![sar.state_ref()],
            vec![LedgerState::DataAccessRequest(executed)],
            Command::ExecuteDar,
            Vec::new(),
        )?;
        self.check_locally(&tx, &[sar.state()])?;
        Ok(Prepared {
            output: FlowOutput::WarrantData {
                tx_id: tx.tx_id,
                invoices: Vec::new(),
            },
            tx,
            query: Some(subject),
        })
    }
}

/// Node expected to hold the key of `party`, judged from the accounts the
/// transaction itself names.
fn party_host(tx: &SignedTransaction, party: Party) -> Option<NodeId> {
    match party {
        Party::Node(node) => Some(node),
        Party::Account(id) => tx
            .outputs
            .iter()
            .flat_map(named_accounts)
            .find(|a| a.id == id)
            .map(|a| a.host_node),
    }
}

fn named_accounts(state: &LedgerState) -> Vec<&AccountRef> {
    match state {
        LedgerState::Invoice(inv) => {
            let mut v = vec![&inv.seller, &inv.buyer];
            v.extend(inv.participants.iter());
            v
        }
        LedgerState::DataAccessRequest(dar) => vec![&dar.requester, &dar.subject, &dar.authorizer],
        LedgerState::TokenIssuance(tok) => vec![&tok.recipient],
    }
}
