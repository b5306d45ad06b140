#![allow(dead_code)]

use std::sync::Arc;

use mts_core::contracts::{ContractRules, InvoiceAmounts};
use mts_core::flows::{FlowRequest, FlowResult, GovAccounts};
use mts_core::ledger::{
    AccountKind, AccountRef, Command, GoodsClass, InvoiceState, InvoiceStatus, ItemLine, Ledger,
    LedgerState, MoneyKind, NodeId, Party, SignedTransaction, StateAndRef, Transfer,
};
use mts_core::netsim::{DeterministicNetwork, NetworkConfig};

pub struct World {
    pub net: DeterministicNetwork,
    pub ledger: Arc<Ledger>,
    pub gov: GovAccounts,
    pub alice: AccountRef,
    pub mega: AccountRef,
}

pub fn world_with(config: NetworkConfig) -> World {
    let net = DeterministicNetwork::start(&config).unwrap();
    let ledger = net.ledger().clone();
    let gov = GovAccounts::create(&ledger).unwrap();
    let alice = ledger
        .create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer)
        .unwrap();
    let mega = ledger
        .create_account(NodeId::SellerCwp, "MegaCompany", AccountKind::Seller)
        .unwrap();
    World {
        net,
        ledger,
        gov,
        alice,
        mega,
    }
}

pub fn world(seed: u64) -> World {
    world_with(NetworkConfig::deterministic(seed))
}

impl World {
    pub fn run(&mut self, node: NodeId, req: FlowRequest) -> FlowResult {
        let client = self.net.client(node);
        self.net.execute(&client, req).unwrap()
    }

    pub fn issue(&mut self, lines: Vec<ItemLine>, money: MoneyKind) -> FlowResult {
        let req = FlowRequest::issue_invoice(&self.mega, &self.alice, lines, money);
        self.run(NodeId::SellerCwp, req)
    }

    pub fn pay(&mut self, invoice: mts_core::ledger::LinearId, money: MoneyKind) -> FlowResult {
        let req = match money {
            MoneyKind::Current => FlowRequest::pay_invoice(&self.alice, invoice),
            MoneyKind::Token => FlowRequest::pay_invoice_with_tokens(&self.alice, invoice),
        };
        self.run(NodeId::BuyerCwp, req)
    }

    pub fn fund(&self, money: MoneyKind, amount: i64) {
        self.ledger.deposit(self.alice.id, money, amount).unwrap();
    }

    pub fn balance(&self, a: &AccountRef, money: MoneyKind) -> i64 {
        self.ledger.get_balance(a.id, money).unwrap()
    }
}

pub fn groceries(price: i64, qty: i64) -> ItemLine {
    ItemLine::new(GoodsClass::Groceries, price, qty, 0)
}

pub fn unpaid(
    seller: &AccountRef,
    buyer: &AccountRef,
    lines: Vec<ItemLine>,
    money: MoneyKind,
    rules: &ContractRules,
    id: u64,
) -> InvoiceState {
    let a = InvoiceAmounts::compute(&lines, &rules.vat).unwrap();
    InvoiceState {
        invoice_id: mts_core::ledger::LinearId(id),
        seller: seller.clone(),
        buyer: buyer.clone(),
        lines,
        money_kind: money,
        net_amount: a.net,
        vat_amount: a.vat,
        total_amount: a.total,
        status: InvoiceStatus::Unpaid,
        participants: vec![seller.clone(), buyer.clone()],
    }
}

pub fn sign_all(ledger: &Ledger, tx: &mut SignedTransaction) {
    for party in tx.required_signers.clone() {
        if tx.signature_of(party).is_none() {
            ledger.sign_as(tx, party);
        }
    }
}

/// Builds, fully signs and notarises an issue transaction directly on the ledger.
pub fn commit_issue(
    ledger: &Ledger,
    rules: &ContractRules,
    state: InvoiceState,
) -> StateAndRef {
    let seller = state.seller.id;
    let mut tx = ledger
        .build_and_sign(
            rules,
            Party::Account(seller),
            vec![],
            vec![LedgerState::Invoice(state)],
            Command::IssueInvoice,
            vec![],
        )
        .unwrap();
    sign_all(ledger, &mut tx);
    let n = ledger.notarize(tx).unwrap();
    StateAndRef::new(n.tx, 0)
}

/// Paid successor and split transfers for an unpaid invoice.
pub fn pay_parts(
    input: &InvoiceState,
    gov: &AccountRef,
    money: MoneyKind,
) -> (InvoiceState, Vec<Transfer>) {
    let mut paid = input.clone();
    paid.status = InvoiceStatus::Paid;
    paid.participants = vec![paid.seller.clone(), paid.buyer.clone(), gov.clone()];
    let leg = |a: &AccountRef, delta| Transfer {
        account: a.clone(),
        money,
        delta,
    };
    let transfers = vec![
        leg(&paid.buyer, -paid.total_amount),
        leg(&paid.seller, paid.net_amount),
        leg(gov, paid.vat_amount),
    ];
    (paid, transfers)
}

/// Per-line VAT with halves rounded up, written independently of the
/// contract arithmetic.
pub fn oracle_amounts(lines: &[ItemLine]) -> (i64, i64, i64) {
    let mut net = 0i128;
    let mut vat = 0i128;
    for l in lines {
        let gross = i128::from(l.price) * i128::from(l.quantity);
        net += gross;
        let hundredths = gross * i128::from(l.vat_rate);
        let whole = hundredths / 100;
        let frac = hundredths - whole * 100;
        vat += whole + i128::from(frac * 2 >= 100);
    }
    (net as i64, vat as i64, (net + vat) as i64)
}
