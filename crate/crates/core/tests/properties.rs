mod common;

use common::*;
use mts_core::contracts::{
    net_amount, total_amount, vat_amount, verify, ContractRules, InvoiceAmounts, TxView,
    VatRateTable,
};
use mts_core::flows::FlowRequest;
use mts_core::ledger::{
    AccountKind, GoodsClass, ItemLine, LedgerState, MoneyKind, NodeId, Party, VaultFilter,
};
use proptest::prelude::*;

fn line() -> impl Strategy<Value = ItemLine> {
    let table = VatRateTable::uk();
    (0..GoodsClass::ALL.len(), 0i64..=1_000_000, 1i64..=1000).prop_map(move |(c, price, qty)| {
        let item = GoodsClass::ALL[c];
        ItemLine::new(item, price, qty, table.rate(item))
    })
}

fn lines(max: usize) -> impl Strategy<Value = Vec<ItemLine>> {
    prop::collection::vec(line(), 0..max)
}

proptest! {
    #[test]
    fn amounts_match_the_oracle(ls in lines(40)) {
        let a = InvoiceAmounts::compute(&ls, &VatRateTable::uk()).unwrap();
        prop_assert_eq!((a.net, a.vat, a.total), oracle_amounts(&ls));
        prop_assert_eq!(a.total, a.net + a.vat);
    }

    #[test]
    fn amounts_are_additive(a in lines(20), b in lines(20)) {
        let t = VatRateTable::uk();
        let joined: Vec<_> = a.iter().chain(&b).cloned().collect();
        prop_assert_eq!(net_amount(&joined).unwrap(), net_amount(&a).unwrap() + net_amount(&b).unwrap());
        prop_assert_eq!(vat_amount(&joined, &t).unwrap(), vat_amount(&a, &t).unwrap() + vat_amount(&b, &t).unwrap());
        prop_assert_eq!(total_amount(&joined, &t).unwrap(), total_amount(&a, &t).unwrap() + total_amount(&b, &t).unwrap());
    }

    #[test]
    fn vat_is_bounded_by_the_top_rate(ls in lines(20)) {
        let a = InvoiceAmounts::compute(&ls, &VatRateTable::uk()).unwrap();
        prop_assert!(a.vat >= 0);
        // each line rounds up by at most half a unit
        prop_assert!(a.vat * 100 <= a.net * 20 + 50 * ls.len() as i64);
    }

    #[test]
    fn bad_lines_poison_the_whole_list(mut ls in prop::collection::vec(line(), 1..10), at in any::<prop::sample::Index>(), qty in -5i64..1) {
        let i = at.index(ls.len());
        ls[i].quantity = qty;
        prop_assert!(InvoiceAmounts::compute(&ls, &VatRateTable::uk()).is_err());
    }

    #[test]
    fn any_unit_change_to_cached_amounts_is_rejected(
        ls in prop::collection::vec(line(), 1..10),
        field in 0usize..3,
        up in any::<bool>(),
    ) {
        let rules = ContractRules::default();
        let ledger = mts_core::ledger::Ledger::new(NodeId::ALL);
        let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer).unwrap();
        let mega = ledger.create_account(NodeId::SellerCwp, "Mega", AccountKind::Seller).unwrap();
        let mut inv = unpaid(&mega, &alice, ls, MoneyKind::Current, &rules, 1);
        let d = if up { 1 } else { -1 };
        match field {
            0 => inv.net_amount += d,
            1 => inv.vat_amount += d,
            _ => inv.total_amount += d,
        }
        let outputs = vec![LedgerState::Invoice(inv)];
        let signers = mts_core::contracts::required_signers(mts_core::ledger::Command::IssueInvoice, &outputs, &rules);
        let tx = mts_core::ledger::SignedTransaction::new(
            Party::Account(mega.id), vec![], outputs, mts_core::ledger::Command::IssueInvoice, vec![], signers,
        );
        let verdict = verify(&TxView { tx: &tx, inputs: &[] }, &rules);
        prop_assert!(verdict.is_err());
    }
}

#[derive(Clone, Debug)]
enum Op {
    Issue(i64),
    Pay(usize),
    Tokens(i64),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            (1i64..5000).prop_map(Op::Issue),
            (0usize..16).prop_map(Op::Pay),
            (1i64..5000).prop_map(Op::Tokens),
        ],
        1..30,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random issue/pay interleavings: each invoice is paid at most once,
    /// money is conserved, and invoices sit only in participant vaults.
    #[test]
    fn ledger_invariants_hold(seed in any::<u64>(), script in ops(), funds in 0i64..40_000) {
        let mut w = world(seed);
        w.fund(MoneyKind::Current, funds);
        let bob = w.ledger.create_account(NodeId::BuyerCwp, "Bob", AccountKind::Consumer).unwrap();
        let mut issued = Vec::new();
        let mut paid = std::collections::BTreeSet::new();
        let mut minted = 0i64;
        for op in script {
            match op {
                Op::Issue(p) => {
                    let lines = vec![ItemLine::new(GoodsClass::Electrical, p, 1, 20)];
                    if let Some(id) = w.issue(lines, MoneyKind::Current).invoice_id() {
                        issued.push(id);
                    }
                }
                Op::Pay(i) if !issued.is_empty() => {
                    let id = issued[i % issued.len()];
                    let r = w.pay(id, MoneyKind::Current);
                    if r.is_ok() {
                        prop_assert!(paid.insert(id), "invoice {} paid twice", id);
                    }
                }
                Op::Pay(_) => {}
                Op::Tokens(a) => {
                    let vat = w.gov.vat_payments.clone();
                    let alice = w.alice.clone();
                    if w.run(NodeId::HmrcCwp, FlowRequest::issue_tokens(&vat, &alice, a)).is_ok() {
                        minted += a;
                    }
                }
            }
        }

        let everyone = [&w.alice, &w.mega, &w.gov.vat_payments, &w.gov.vat_investigator, &w.gov.legal_authority, &bob];
        let current: i64 = everyone.iter().map(|a| w.balance(a, MoneyKind::Current)).sum();
        let tokens: i64 = everyone.iter().map(|a| w.balance(a, MoneyKind::Token)).sum();
        prop_assert_eq!(current, funds);
        prop_assert_eq!(tokens, minted);
        prop_assert!(w.balance(&w.alice, MoneyKind::Current) >= 0);

        for a in everyone {
            for s in w.ledger.vault_query(a.id, &VaultFilter::all()).unwrap() {
                prop_assert!(s.state().is_participant(a.id));
            }
        }
        prop_assert!(w.ledger.vault_query(bob.id, &VaultFilter::all()).unwrap().is_empty());
        prop_assert!(w.ledger.vault_query(w.gov.vat_investigator.id, &VaultFilter::invoices()).unwrap().is_empty());
        let on_gov = w.ledger.vault_query(w.gov.vat_payments.id, &VaultFilter::invoices()).unwrap().len();
        prop_assert_eq!(on_gov, paid.len());

        let consumed = w.ledger.consumed_set();
        prop_assert_eq!(consumed.len(), paid.len());
    }
}
