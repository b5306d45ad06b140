mod common;

use std::sync::Arc;

use common::*;
use mts_core::contracts::ContractRules;
use mts_core::flows::GovAccounts;
use mts_core::ledger::{
    log, AccountKind, Command, Ed25519Signatures, InvoiceStatus, Ledger, LedgerError,
    LedgerState, MoneyKind, NodeId, Party, StateAndRef, StateRef, TransactionId, VaultFilter,
};

fn fresh() -> (Ledger, GovAccounts) {
    let ledger = Ledger::new(NodeId::ALL);
    let gov = GovAccounts::create(&ledger).unwrap();
    (ledger, gov)
}

#[test]
fn accounts_are_unique_per_node() {
    let (ledger, _) = fresh();
    let alice = ledger
        .create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer)
        .unwrap();
    assert_eq!(alice.display_name, "Alice");
    assert_eq!(alice.host_node, NodeId::BuyerCwp);
    let mega = ledger
        .create_account(NodeId::SellerCwp, "MegaCompany", AccountKind::Seller)
        .unwrap();
    assert_ne!(alice.id, mega.id);
    assert!(matches!(
        ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer),
        Err(LedgerError::DuplicateAccountName { .. })
    ));
    let partial = Ledger::new([NodeId::Notary, NodeId::BuyerCwp]);
    assert_eq!(
        partial.create_account(NodeId::SellerCwp, "X", AccountKind::Seller),
        Err(LedgerError::UnknownNode(NodeId::SellerCwp))
    );
}

#[test]
fn tax_accounts_live_on_the_tax_node_once() {
    let (ledger, gov) = fresh();
    assert_eq!(gov.vat_payments.host_node, NodeId::HmrcCwp);
    assert_eq!(gov.vat_investigator.host_node, NodeId::HmrcCwp);
    assert_eq!(gov.legal_authority.kind, AccountKind::LegalAuthority);
    assert!(matches!(
        ledger.create_account(NodeId::HmrcCwp, "Second", AccountKind::GovPayments),
        Err(LedgerError::DuplicateAccountKind(AccountKind::GovPayments))
    ));
    assert!(matches!(
        ledger.create_account(NodeId::BuyerCwp, "Spy", AccountKind::GovInvestigator),
        Err(LedgerError::WrongHostForKind { .. })
    ));
}

#[test]
fn balances_start_at_zero() {
    let (ledger, _) = fresh();
    let alice = ledger
        .create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer)
        .unwrap();
    assert_eq!(ledger.get_balance(alice.id, MoneyKind::Current), Ok(0));
    assert_eq!(ledger.get_balance(alice.id, MoneyKind::Token), Ok(0));
    ledger.deposit(alice.id, MoneyKind::Current, 500).unwrap();
    assert_eq!(ledger.get_balance(alice.id, MoneyKind::Current), Ok(500));
    assert_eq!(ledger.deposit(alice.id, MoneyKind::Current, 0), Err(LedgerError::NonPositiveAmount));
    let ghost = mts_core::ledger::AccountId(999);
    assert_eq!(ledger.get_balance(ghost, MoneyKind::Current), Err(LedgerError::UnknownAccount(ghost)));
}

#[test]
fn token_balance_after_issuance_flow() {
    let mut w = world(1);
    let r = w.run(
        NodeId::HmrcCwp,
        mts_core::flows::FlowRequest::issue_tokens(&w.gov.vat_payments.clone(), &w.alice.clone(), 50_000),
    );
    assert!(r.is_ok(), "{:?}", r.outcome);
    assert_eq!(w.balance(&w.alice, MoneyKind::Token), 50_000);
}

#[test]
fn build_and_sign_attaches_only_the_initiator() {
    let (ledger, _) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let tx = ledger
        .build_and_sign(&rules, Party::Account(mega.id), vec![], vec![LedgerState::Invoice(inv)], Command::IssueInvoice, vec![])
        .unwrap();
    assert!(tx.inputs.is_empty());
    assert_eq!(tx.signatures.len(), 1);
    assert!(tx.signature_of(Party::Account(mega.id)).is_some());
    assert!(tx.required_signers.contains(&Party::Node(NodeId::HmrcCwp)));
    assert!(tx.notary_signature.is_none());
}

#[test]
fn unknown_input_and_non_signer_initiator_are_rejected() {
    let (ledger, gov) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let (paid, transfers) = pay_parts(&inv, &gov.vat_payments, MoneyKind::Current);
    let bogus = StateRef {
        tx_id: TransactionId([9; 32]),
        output_index: 0,
    };
    assert_eq!(
        ledger.build_and_sign(&rules, Party::Account(alice.id), vec![bogus], vec![LedgerState::Invoice(paid)], Command::PayInvoice, transfers).unwrap_err(),
        LedgerError::UnknownInput(bogus)
    );
    let outsider = Party::Account(gov.legal_authority.id);
    assert_eq!(
        ledger.build_and_sign(&rules, outsider, vec![], vec![LedgerState::Invoice(inv)], Command::IssueInvoice, vec![]).unwrap_err(),
        LedgerError::SignerNotParticipant(outsider)
    );
}

#[test]
fn tampering_after_signing_is_detected() {
    let (ledger, _) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let mut tx = ledger
        .build_and_sign(&rules, Party::Account(mega.id), vec![], vec![LedgerState::Invoice(inv)], Command::IssueInvoice, vec![])
        .unwrap();
    sign_all(&ledger, &mut tx);
    let original_id = tx.tx_id;

    let mut tampered = tx.clone();
    if let LedgerState::Invoice(i) = &mut tampered.outputs[0] {
        i.lines[0].price += 1;
    }
    assert_ne!(tampered.compute_id(), original_id);
    assert_eq!(ledger.check_signatures(&tampered), Err(LedgerError::TxIdMismatch));

    tampered.tx_id = tampered.compute_id();
    assert_eq!(
        ledger.check_signatures(&tampered),
        Err(LedgerError::InvalidSignature(Party::Account(mega.id)))
    );
    assert!(ledger.notarize(tampered).is_err());
    assert!(ledger.notarize(tx).is_ok());
}

#[test]
fn notary_assigns_ids_and_rejects_reuse() {
    let (ledger, gov) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    ledger.deposit(alice.id, MoneyKind::Current, 10_000).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let issued = commit_issue(&ledger, &rules, inv.clone());
    assert!(issued.tx.notary_signature.is_some());
    assert!(issued.tx.timestamp.is_some());

    let (paid, transfers) = pay_parts(&inv, &gov.vat_payments, MoneyKind::Current);
    let mut pay = ledger
        .build_and_sign(&rules, Party::Account(alice.id), vec![issued.state_ref()], vec![LedgerState::Invoice(paid)], Command::PayInvoice, transfers)
        .unwrap();
    sign_all(&ledger, &mut pay);
    let first = ledger.notarize(pay.clone()).unwrap();
    assert_eq!(first.result.tx_id, pay.tx_id);
    assert_ne!(first.result.tx_id, issued.tx.tx_id);
    assert!(first.result.timestamp > issued.tx.timestamp.unwrap());
    assert!(matches!(ledger.notarize(pay), Err(LedgerError::DoubleSpend { .. })));
    assert_eq!(ledger.consumed_by(&issued.state_ref()), Some(first.result.tx_id));
}

#[test]
fn pay_without_tax_signature_is_refused() {
    let (ledger, gov) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    ledger.deposit(alice.id, MoneyKind::Current, 10_000).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let issued = commit_issue(&ledger, &rules, inv.clone());
    let (paid, transfers) = pay_parts(&inv, &gov.vat_payments, MoneyKind::Current);
    let mut pay = ledger
        .build_and_sign(&rules, Party::Account(alice.id), vec![issued.state_ref()], vec![LedgerState::Invoice(paid)], Command::PayInvoice, transfers)
        .unwrap();
    ledger.sign_as(&mut pay, Party::Account(mega.id));
    let gov_party = Party::Account(gov.vat_payments.id);
    assert!(pay.required_signers.contains(&gov_party));
    assert_eq!(ledger.notarize(pay).unwrap_err(), LedgerError::MissingSignature(gov_party));
    assert_eq!(ledger.get_balance(alice.id, MoneyKind::Current), Ok(10_000));
}

#[test]
fn overdraft_is_refused_at_commit() {
    let (ledger, gov) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    ledger.deposit(alice.id, MoneyKind::Current, 50).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let issued = commit_issue(&ledger, &rules, inv.clone());
    let (paid, transfers) = pay_parts(&inv, &gov.vat_payments, MoneyKind::Current);
    let mut pay = ledger
        .build_and_sign(&rules, Party::Account(alice.id), vec![issued.state_ref()], vec![LedgerState::Invoice(paid)], Command::PayInvoice, transfers)
        .unwrap();
    sign_all(&ledger, &mut pay);
    assert!(matches!(ledger.notarize(pay), Err(LedgerError::InsufficientFunds { .. })));
    assert_eq!(ledger.consumed_count(), 0);
    assert_eq!(ledger.get_balance(alice.id, MoneyKind::Current), Ok(50));
}

#[test]
fn vaults_hold_only_participant_states() {
    let (ledger, gov) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let bob = ledger.create_account(NodeId::BuyerCwp, "Bob", AccountKind::Consumer).unwrap();
    assert!(ledger.vault_query(bob.id, &VaultFilter::all()).unwrap().is_empty());

    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let issued = commit_issue(&ledger, &rules, inv);
    assert_eq!(
        ledger.record_state(gov.vat_payments.id, issued.clone()),
        Err(LedgerError::NotParticipant(gov.vat_payments.id))
    );
    assert_eq!(
        ledger.record_state(gov.legal_authority.id, issued.clone()),
        Err(LedgerError::NotParticipant(gov.legal_authority.id))
    );
    ledger.record_state(alice.id, issued.clone()).unwrap();
    let unpaid_filter = VaultFilter::invoices().with_invoice_status(InvoiceStatus::Unpaid);
    assert_eq!(ledger.vault_query(alice.id, &unpaid_filter).unwrap(), vec![issued.clone()]);
    assert!(ledger.vault_query(gov.vat_payments.id, &unpaid_filter).unwrap().is_empty());
    assert!(ledger.vault_query(mega.id, &unpaid_filter).unwrap().is_empty());
    assert_eq!(
        ledger.vault_query(alice.id, &VaultFilter::invoices().with_counterparty(mega.id)).unwrap().len(),
        1
    );
    assert!(ledger
        .vault_query(alice.id, &VaultFilter::invoices().with_counterparty(bob.id))
        .unwrap()
        .is_empty());
}

#[test]
fn uncommitted_states_cannot_be_recorded() {
    let (ledger, _) = fresh();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let tx = ledger
        .build_and_sign(&rules, Party::Account(mega.id), vec![], vec![LedgerState::Invoice(inv)], Command::IssueInvoice, vec![])
        .unwrap();
    let id = tx.tx_id;
    assert_eq!(
        ledger.record_state(alice.id, StateAndRef::new(Arc::new(tx), 0)),
        Err(LedgerError::UnknownTransaction(id))
    );
}

#[test]
fn paid_state_supersedes_unpaid_in_vaults() {
    let mut w = world(3);
    w.fund(MoneyKind::Current, 10_000);
    let inv = w.issue(vec![groceries(1000, 2)], MoneyKind::Current).invoice_id().unwrap();
    assert!(w.pay(inv, MoneyKind::Current).is_ok());
    for a in [&w.alice, &w.mega, &w.gov.vat_payments] {
        let current = w.ledger.vault_query(a.id, &VaultFilter::invoices()).unwrap();
        assert_eq!(current.len(), 1, "{}", a.display_name);
        assert_eq!(current[0].state().as_invoice().unwrap().status, InvoiceStatus::Paid);
    }
    assert_eq!(w.ledger.historic_states(w.alice.id).unwrap().len(), 1);
    assert_eq!(w.ledger.historic_states(w.gov.vat_payments.id).unwrap().len(), 0);
}

#[test]
fn event_log_round_trips_and_replays() {
    let mut w = world(5);
    w.fund(MoneyKind::Current, 100_000);
    for price in [100, 250, 999] {
        let inv = w.issue(vec![groceries(price, 3)], MoneyKind::Current).invoice_id().unwrap();
        assert!(w.pay(inv, MoneyKind::Current).is_ok());
    }
    let events = w.ledger.events();
    let text = log::to_ndjson(&events);
    assert_eq!(text.lines().count(), events.len());
    let parsed = log::read_ndjson(text.as_bytes()).unwrap();
    assert_eq!(parsed, events);

    let replayed = Ledger::replay(NodeId::ALL, &parsed).unwrap();
    assert_eq!(replayed.snapshot(), w.ledger.snapshot());
    assert_eq!(log::to_ndjson(&replayed.events()), text);
}

#[test]
fn replay_rejects_a_forged_log() {
    let mut w = world(6);
    w.fund(MoneyKind::Current, 100_000);
    let inv = w.issue(vec![groceries(100, 1)], MoneyKind::Current).invoice_id().unwrap();
    assert!(w.pay(inv, MoneyKind::Current).is_ok());
    let mut events = w.ledger.events();
    let last = events.len() - 1;
    if let mts_core::ledger::LedgerEvent::Transaction(tx) = &mut events[last] {
        let mut forged = (**tx).clone();
        forged.transfers[1].delta += 1;
        *tx = Arc::new(forged);
    } else {
        panic!("last event should be the payment");
    }
    assert_eq!(Ledger::replay(NodeId::ALL, &events).err(), Some(LedgerError::TxIdMismatch));
}

#[test]
fn ed25519_ledger_commits_and_replays() {
    let signer = Arc::new(Ed25519Signatures::new(11));
    let ledger = Ledger::with_parts(NodeId::ALL, signer.clone(), Arc::new(mts_core::clock::ManualClock::new()));
    GovAccounts::create(&ledger).unwrap();
    let rules = ContractRules::default();
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
    let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
    let inv = unpaid(&mega, &alice, vec![groceries(100, 1)], MoneyKind::Current, &rules, 1);
    let issued = commit_issue(&ledger, &rules, inv);
    ledger.verify_dependency(&issued.tx).unwrap();
    let events = ledger.events();
    assert!(Ledger::replay(NodeId::ALL, &events).is_err());
    let replayed = Ledger::replay_with(NodeId::ALL, signer, &events).unwrap();
    assert_eq!(replayed.committed_count(), 1);
}
