mod common;

use common::*;
use mts_core::contracts::{
    required_signers, verify, ContractRules, TxView, ViolationReason, DISALLOWED_GOODS_MESSAGE,
};
use mts_core::ledger::{
    AccountId, AccountKind, AccountRef, Command, DataAccessRequestState, GoodsClass, InvoiceState,
    InvoiceStatus, ItemLine, LedgerState, LinearId, MoneyKind, NodeId, Party, SignedTransaction,
    StateRef, TokenIssuanceState, TransactionId, Transfer, WarrantStatus,
};

fn acct(id: u64, name: &str, node: NodeId, kind: AccountKind) -> AccountRef {
    AccountRef {
        id: AccountId(id),
        display_name: name.into(),
        host_node: node,
        kind,
    }
}

struct Cast {
    alice: AccountRef,
    mega: AccountRef,
    vat: AccountRef,
    investigator: AccountRef,
    judge: AccountRef,
}

fn cast() -> Cast {
    Cast {
        alice: acct(1, "Alice", NodeId::BuyerCwp, AccountKind::Consumer),
        mega: acct(2, "MegaCompany", NodeId::SellerCwp, AccountKind::Seller),
        vat: acct(3, "VATPayments", NodeId::HmrcCwp, AccountKind::GovPayments),
        investigator: acct(4, "VATInvestigator", NodeId::HmrcCwp, AccountKind::GovInvestigator),
        judge: acct(5, "Court", NodeId::LegalCwp, AccountKind::LegalAuthority),
    }
}

fn some_input() -> StateRef {
    StateRef {
        tx_id: TransactionId([1; 32]),
        output_index: 0,
    }
}

fn tx(
    rules: &ContractRules,
    initiator: Party,
    inputs: Vec<StateRef>,
    outputs: Vec<LedgerState>,
    command: Command,
    transfers: Vec<Transfer>,
) -> SignedTransaction {
    let signers = required_signers(command, &outputs, rules);
    SignedTransaction::new(initiator, inputs, outputs, command, transfers, signers)
}

fn check(t: &SignedTransaction, inputs: &[&LedgerState], rules: &ContractRules) -> Result<(), ViolationReason> {
    verify(&TxView { tx: t, inputs }, rules).map_err(|v| v.reason)
}

fn issue_tx(rules: &ContractRules, inv: InvoiceState) -> SignedTransaction {
    let seller = Party::Account(inv.seller.id);
    tx(rules, seller, vec![], vec![LedgerState::Invoice(inv)], Command::IssueInvoice, vec![])
}

fn pay_tx(
    rules: &ContractRules,
    inv: &InvoiceState,
    c: &Cast,
    command: Command,
) -> SignedTransaction {
    let (mut paid, mut transfers) = pay_parts(inv, &c.vat, inv.money_kind);
    if !rules.split_payments {
        paid.participants.pop();
        transfers.pop();
        transfers[1].delta = paid.total_amount;
    }
    tx(
        rules,
        Party::Account(inv.buyer.id),
        vec![some_input()],
        vec![LedgerState::Invoice(paid)],
        command,
        transfers,
    )
}

fn mixed_lines() -> Vec<ItemLine> {
    vec![
        ItemLine::new(GoodsClass::Electrical, 1999, 2, 20),
        ItemLine::new(GoodsClass::Energy, 5090, 1, 5),
        groceries(250, 4),
    ]
}

#[test]
fn well_formed_issue_and_payment_verify() {
    let rules = ContractRules::default();
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    assert_eq!(check(&issue_tx(&rules, inv.clone()), &[], &rules), Ok(()));
    let input = LedgerState::Invoice(inv.clone());
    let pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    assert_eq!(check(&pay, &[&input], &rules), Ok(()));
}

#[test]
fn cached_amounts_must_match_the_oracle() {
    let rules = ContractRules::default();
    let c = cast();
    let lines = mixed_lines();
    let inv = unpaid(&c.mega, &c.alice, lines.clone(), MoneyKind::Current, &rules, 1);
    assert_eq!(
        (inv.net_amount, inv.vat_amount, inv.total_amount),
        oracle_amounts(&lines)
    );

    let mut bad = inv.clone();
    bad.vat_amount += 1;
    assert_eq!(check(&issue_tx(&rules, bad), &[], &rules), Err(ViolationReason::WrongVat));
    let mut bad = inv.clone();
    bad.vat_amount -= 1;
    assert_eq!(check(&issue_tx(&rules, bad), &[], &rules), Err(ViolationReason::WrongVat));
    let mut bad = inv.clone();
    bad.net_amount += 1;
    assert_eq!(check(&issue_tx(&rules, bad), &[], &rules), Err(ViolationReason::WrongNet));
    let mut bad = inv;
    bad.total_amount -= 1;
    assert_eq!(check(&issue_tx(&rules, bad), &[], &rules), Err(ViolationReason::WrongTotal));
}

#[test]
fn declared_rate_must_match_the_table() {
    let rules = ContractRules::default();
    let c = cast();
    let mut inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    inv.lines[1].vat_rate = 20;
    assert_eq!(check(&issue_tx(&rules, inv), &[], &rules), Err(ViolationReason::RateMismatch));
}

#[test]
fn issue_shape_is_enforced() {
    let rules = ContractRules::default();
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);

    let mut paid = inv.clone();
    paid.status = InvoiceStatus::Paid;
    assert_eq!(check(&issue_tx(&rules, paid), &[], &rules), Err(ViolationReason::WrongStatus));

    let self_dealing = unpaid(&c.mega, &c.mega, mixed_lines(), MoneyKind::Current, &rules, 1);
    assert_eq!(
        check(&issue_tx(&rules, self_dealing), &[], &rules),
        Err(ViolationReason::WrongParticipants)
    );

    let mut leaky = inv.clone();
    leaky.participants.push(c.vat.clone());
    assert_eq!(
        check(&issue_tx(&rules, leaky), &[], &rules),
        Err(ViolationReason::WrongParticipants)
    );

    let mut with_input = issue_tx(&rules, inv.clone());
    with_input.inputs.push(some_input());
    assert_eq!(check(&with_input, &[], &rules), Err(ViolationReason::WrongShape));

    let mut unsigned_tax = issue_tx(&rules, inv);
    unsigned_tax.required_signers.pop();
    assert_eq!(check(&unsigned_tax, &[], &rules), Err(ViolationReason::WrongSigners));
}

#[test]
fn tax_node_cosigns_only_in_split_mode() {
    let split = ContractRules::default();
    let plain = ContractRules::default().with_split(false);
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &split, 1);
    let out = [LedgerState::Invoice(inv.clone())];
    assert!(required_signers(Command::IssueInvoice, &out, &split).contains(&Party::Node(NodeId::HmrcCwp)));
    assert!(!required_signers(Command::IssueInvoice, &out, &plain).contains(&Party::Node(NodeId::HmrcCwp)));
    assert_eq!(check(&issue_tx(&plain, inv), &[], &plain), Ok(()));
}

#[test]
fn non_split_payment_credits_seller_in_full() {
    let rules = ContractRules::default().with_split(false);
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    let input = LedgerState::Invoice(inv.clone());
    let pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    assert_eq!(pay.transfers.len(), 2);
    assert_eq!(check(&pay, &[&input], &rules), Ok(()));

    // a split-shaped payment is wrong here
    let split_pay = pay_tx(&ContractRules::default(), &inv, &c, Command::PayInvoice);
    assert!(check(&split_pay, &[&input], &rules).is_err());
}

#[test]
fn split_payment_legs_are_exact() {
    let rules = ContractRules::default();
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    assert!(inv.vat_amount > 0);
    let input = LedgerState::Invoice(inv.clone());

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    pay.transfers[2].delta += 1;
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongVat));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    pay.transfers[1].delta = inv.total_amount;
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongNet));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    pay.transfers[0].delta += 1;
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongTotal));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    pay.transfers.push(Transfer {
        account: c.judge.clone(),
        money: MoneyKind::Current,
        delta: 0,
    });
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongTransfers));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    pay.transfers[2].money = MoneyKind::Token;
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongMoneyKind));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    if let LedgerState::Invoice(out) = &mut pay.outputs[0] {
        out.participants.pop();
    }
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongParticipants));
}

#[test]
fn payment_must_preserve_the_invoice() {
    let rules = ContractRules::default();
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    let input = LedgerState::Invoice(inv.clone());

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    if let LedgerState::Invoice(out) = &mut pay.outputs[0] {
        out.lines[0].quantity = 1;
    }
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::InvoiceMismatch));

    let mut pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    if let LedgerState::Invoice(out) = &mut pay.outputs[0] {
        out.status = InvoiceStatus::Unpaid;
    }
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongStatus));

    let pay = pay_tx(&rules, &inv, &c, Command::PayInvoiceTokens);
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::WrongMoneyKind));

    let pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    assert_eq!(check(&pay, &[], &rules), Err(ViolationReason::WrongShape));
}

#[test]
fn paid_invoice_cannot_be_paid_again() {
    let rules = ContractRules::default();
    let c = cast();
    let inv = unpaid(&c.mega, &c.alice, mixed_lines(), MoneyKind::Current, &rules, 1);
    let (paid, _) = pay_parts(&inv, &c.vat, MoneyKind::Current);
    let input = LedgerState::Invoice(paid.clone());
    let pay = pay_tx(&rules, &inv, &c, Command::PayInvoice);
    assert_eq!(check(&pay, &[&input], &rules), Err(ViolationReason::AlreadyPaid));
}

#[test]
fn tokens_only_buy_allowed_goods() {
    let rules = ContractRules::default();
    let c = cast();
    let ok = unpaid(&c.mega, &c.alice, vec![groceries(300, 2)], MoneyKind::Token, &rules, 1);
    let input = LedgerState::Invoice(ok.clone());
    assert_eq!(check(&pay_tx(&rules, &ok, &c, Command::PayInvoiceTokens), &[&input], &rules), Ok(()));

    let booze = unpaid(
        &c.mega,
        &c.alice,
        vec![groceries(300, 2), ItemLine::new(GoodsClass::Alcohol, 1200, 1, 20)],
        MoneyKind::Token,
        &rules,
        2,
    );
    let input = LedgerState::Invoice(booze.clone());
    let pay = pay_tx(&rules, &booze, &c, Command::PayInvoiceTokens);
    let v = verify(&TxView { tx: &pay, inputs: &[&input] }, &rules).unwrap_err();
    assert_eq!(v.reason, ViolationReason::DisallowedGoods);
    assert_eq!(v.to_string(), DISALLOWED_GOODS_MESSAGE);

    // current money may buy anything
    let booze_cash = unpaid(&c.mega, &c.alice, booze.lines.clone(), MoneyKind::Current, &rules, 3);
    let input = LedgerState::Invoice(booze_cash.clone());
    let pay = pay_tx(&rules, &booze_cash, &c, Command::PayInvoice);
    assert_eq!(check(&pay, &[&input], &rules), Ok(()));
}

fn warrant(c: &Cast, status: WarrantStatus) -> DataAccessRequestState {
    DataAccessRequestState {
        warrant_id: LinearId(7),
        requester: c.investigator.clone(),
        subject: c.mega.clone(),
        authorizer: c.judge.clone(),
        status,
        authorized_at: Some(10),
        executed_at: (status == WarrantStatus::Executed).then_some(20),
    }
}

fn request_tx(rules: &ContractRules, dar: DataAccessRequestState, by: Party) -> SignedTransaction {
    tx(rules, by, vec![], vec![LedgerState::DataAccessRequest(dar)], Command::RequestDar, vec![])
}

fn execute_tx(rules: &ContractRules, c: &Cast, by: Party) -> SignedTransaction {
    tx(
        rules,
        by,
        vec![some_input()],
        vec![LedgerState::DataAccessRequest(warrant(c, WarrantStatus::Executed))],
        Command::ExecuteDar,
        vec![],
    )
}

#[test]
fn warrant_requests() {
    let rules = ContractRules::default();
    let c = cast();
    let inv_party = Party::Account(c.investigator.id);
    assert_eq!(check(&request_tx(&rules, warrant(&c, WarrantStatus::Authorized), inv_party), &[], &rules), Ok(()));

    let mut dar = warrant(&c, WarrantStatus::Authorized);
    dar.requester = c.alice.clone();
    assert_eq!(
        check(&request_tx(&rules, dar, Party::Account(c.alice.id)), &[], &rules),
        Err(ViolationReason::NotInvestigator)
    );

    let forged = request_tx(&rules, warrant(&c, WarrantStatus::Authorized), Party::Account(c.vat.id));
    assert_eq!(check(&forged, &[], &rules), Err(ViolationReason::NotRequester));

    let mut dar = warrant(&c, WarrantStatus::Authorized);
    dar.authorizer = c.vat.clone();
    assert_eq!(check(&request_tx(&rules, dar, inv_party), &[], &rules), Err(ViolationReason::WrongAuthority));

    let mut dar = warrant(&c, WarrantStatus::Authorized);
    dar.authorized_at = None;
    assert_eq!(check(&request_tx(&rules, dar, inv_party), &[], &rules), Err(ViolationReason::WrongStatus));

    let mut moving = request_tx(&rules, warrant(&c, WarrantStatus::Authorized), inv_party);
    moving.transfers.push(Transfer {
        account: c.alice.clone(),
        money: MoneyKind::Current,
        delta: 1,
    });
    assert_eq!(check(&moving, &[], &rules), Err(ViolationReason::WrongTransfers));
}

#[test]
fn warrant_execution() {
    let rules = ContractRules::default();
    let c = cast();
    let inv_party = Party::Account(c.investigator.id);
    let authorized = LedgerState::DataAccessRequest(warrant(&c, WarrantStatus::Authorized));
    let executed = LedgerState::DataAccessRequest(warrant(&c, WarrantStatus::Executed));

    assert_eq!(check(&execute_tx(&rules, &c, inv_party), &[&authorized], &rules), Ok(()));
    assert_eq!(
        check(&execute_tx(&rules, &c, inv_party), &[&executed], &rules),
        Err(ViolationReason::AlreadyExecuted)
    );
    assert_eq!(
        check(&execute_tx(&rules, &c, Party::Account(c.vat.id)), &[&authorized], &rules),
        Err(ViolationReason::NotRequester)
    );
    assert_eq!(
        check(&execute_tx(&rules, &c, inv_party), &[], &rules),
        Err(ViolationReason::UnknownWarrant)
    );

    let mut other = warrant(&c, WarrantStatus::Executed);
    other.warrant_id = LinearId(8);
    let mut t = execute_tx(&rules, &c, inv_party);
    t.outputs = vec![LedgerState::DataAccessRequest(other)];
    assert_eq!(check(&t, &[&authorized], &rules), Err(ViolationReason::UnknownWarrant));

    let pending = LedgerState::DataAccessRequest(warrant(&c, WarrantStatus::Requested));
    assert_eq!(
        check(&execute_tx(&rules, &c, inv_party), &[&pending], &rules),
        Err(ViolationReason::WrongStatus)
    );
}

fn token_tx(rules: &ContractRules, issuer: NodeId, recipient: &AccountRef, amount: i64) -> SignedTransaction {
    tx(
        rules,
        Party::Node(issuer),
        vec![],
        vec![LedgerState::TokenIssuance(TokenIssuanceState {
            issuer,
            recipient: recipient.clone(),
            amount,
        })],
        Command::IssueTokens,
        vec![Transfer {
            account: recipient.clone(),
            money: MoneyKind::Token,
            delta: amount,
        }],
    )
}

#[test]
fn token_issuance() {
    let rules = ContractRules::default();
    let c = cast();
    assert_eq!(check(&token_tx(&rules, NodeId::HmrcCwp, &c.alice, 500), &[], &rules), Ok(()));
    assert_eq!(
        check(&token_tx(&rules, NodeId::SellerCwp, &c.alice, 500), &[], &rules),
        Err(ViolationReason::UnauthorizedIssuer)
    );
    assert_eq!(
        check(&token_tx(&rules, NodeId::HmrcCwp, &c.alice, 0), &[], &rules),
        Err(ViolationReason::NonPositiveAmount)
    );
    assert_eq!(
        check(&token_tx(&rules, NodeId::HmrcCwp, &c.alice, -5), &[], &rules),
        Err(ViolationReason::NonPositiveAmount)
    );
    let mut t = token_tx(&rules, NodeId::HmrcCwp, &c.alice, 500);
    t.transfers[0].delta = 501;
    assert_eq!(check(&t, &[], &rules), Err(ViolationReason::WrongTransfers));
    let mut t = token_tx(&rules, NodeId::HmrcCwp, &c.alice, 500);
    t.initiator = Party::Account(c.vat.id);
    assert_eq!(check(&t, &[], &rules), Err(ViolationReason::UnauthorizedIssuer));
}

#[test]
fn rules_load_from_json() {
    let rules = ContractRules::from_json(
        r#"{"splitPayments": false, "allowedGoods": ["Groceries"], "vatRates": {"Energy": 0}}"#,
    );
    let rules = match rules {
        Ok(r) => r,
        Err(e) => panic!("{e}"),
    };
    assert!(!rules.split_payments);
    assert!(!rules.allowed_goods.contains(GoodsClass::Books));
    assert_eq!(rules.vat.rate(GoodsClass::Energy), 0);
    assert_eq!(rules.vat.rate(GoodsClass::Alcohol), 20);
    assert!(ContractRules::from_json(r#"{"vatRates": {"Alcohol": 17}}"#).is_err());
}
