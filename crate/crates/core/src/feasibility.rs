//! The thirteen feasibility assertions, run in order on one deterministic
//! network: a funded payment, an underfunded payment, an allowed token
//! payment, a disallowed token payment, and a single-use warrant.

use std::fmt::Write as _;

use thiserror::Error;

use crate::contracts::ContractRules;
use crate::flows::{FlowError, FlowOutput, FlowRequest, FlowResult, GovAccounts};
use crate::ledger::{
    log, AccountKind, AccountRef, InvoiceState, InvoiceStatus, ItemLine, LedgerError, LinearId,
    MoneyKind, NodeId, VaultFilter, WarrantStatus,
};
use crate::netsim::{DeterministicNetwork, NetError, NetworkConfig};
use crate::shopping::{listing, ShoppingListDocument, LISTING_1, LISTING_2};

pub const STARTING_CURRENT: i64 = 100_000;
pub const ISSUED_TOKENS: i64 = 100_000;

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("scenario step failed: {0}")]
    Step(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionOutcome {
    pub id: &'static str,
    pub description: &'static str,
    pub checks: Vec<Check>,
}

impl AssertionOutcome {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub outcomes: Vec<AssertionOutcome>,
    /// Ledger event log of the whole run, as NDJSON.
    pub event_log: String,
    /// Messages returned by the two rejected payments.
    pub rejection_messages: Vec<String>,
}

impl FeasibilityReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.len() == 13 && self.outcomes.iter().all(AssertionOutcome::passed)
    }

    pub fn first_failure(&self) -> Option<&AssertionOutcome> {
        self.outcomes.iter().find(|o| !o.passed())
    }

    pub fn passed_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed()).count()
    }

    pub fn render_table(&self) -> String {
        let width = self
            .outcomes
            .iter()
            .map(|o| o.description.len())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<5} {:<width$}  Result", "Test", "Description");
        for o in &self.outcomes {
            let verdict = if o.passed() { "True" } else { "False" };
            let _ = writeln!(out, "{:<5} {:<width$}  {verdict}", o.id, o.description);
            for c in o.checks.iter().filter(|c| !c.passed) {
                let _ = writeln!(out, "      failed: {}", c.label);
            }
        }
        let _ = writeln!(out, "{}/{} assertions hold", self.passed_count(), self.outcomes.len());
        out
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilityOptions {
    pub rules: ContractRules,
    pub seed: u64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            rules: ContractRules::default(),
            seed: 7,
        }
    }
}

/// Reference amounts from the lines as declared in the listing, using
/// quotient and remainder instead of the contract's biased division.
pub fn reference_amounts(lines: &[ItemLine]) -> (i64, i64, i64) {
    let mut net = 0i64;
    let mut vat = 0i64;
    for l in lines {
        let gross = l.price * l.quantity;
        net += gross;
        let scaled = gross * i64::from(l.vat_rate);
        let (q, r) = (scaled / 100, scaled % 100);
        vat += if r >= 50 { q + 1 } else { q };
    }
    (net, vat, net + vat)
}

struct Parties {
    alice: AccountRef,
    mega: AccountRef,
    gov: GovAccounts,
}

struct Scenario {
    net: DeterministicNetwork,
    p: Parties,
    rules: ContractRules,
    outcomes: Vec<AssertionOutcome>,
    rejections: Vec<String>,
}

fn check(label: impl Into<String>, passed: bool) -> Check {
    Check {
        label: label.into(),
        passed,
    }
}

impl Scenario {
    fn balance(&self, a: &AccountRef, money: MoneyKind) -> Result<i64, FeasibilityError> {
        Ok(self.net.ledger().get_balance(a.id, money)?)
    }

    fn invoice_in(&self, a: &AccountRef, id: LinearId) -> Result<Option<InvoiceState>, FeasibilityError> {
        let found = self
            .net
            .ledger()
            .vault_query(a.id, &VaultFilter::invoices().with_linear_id(id))?;
        Ok(found.first().and_then(|s| s.state().as_invoice().cloned()))
    }

    fn is_paid_in(&self, a: &AccountRef, id: LinearId) -> Result<bool, FeasibilityError> {
        Ok(self
            .invoice_in(a, id)?
            .is_some_and(|inv| inv.status == InvoiceStatus::Paid))
    }

    fn run(&mut self, client_node: NodeId, req: FlowRequest) -> Result<FlowResult, FeasibilityError> {
        let client = self.net.client(client_node);
        Ok(self.net.execute(&client, req)?)
    }

    fn issue(&mut self, doc: &ShoppingListDocument, money: MoneyKind) -> Result<LinearId, FeasibilityError> {
        let lines = doc.normalized_lines(&self.rules.vat);
        let req = FlowRequest::issue_invoice(&self.p.mega, &self.p.alice, lines, money);
        let result = self.run(NodeId::SellerCwp, req)?;
        result
            .invoice_id()
            .ok_or_else(|| FeasibilityError::Step(format!("invoice issue failed: {:?}", result.outcome)))
    }

    fn push(&mut self, id: &'static str, description: &'static str, checks: Vec<Check>) {
        self.outcomes.push(AssertionOutcome {
            id,
            description,
            checks,
        });
    }

    fn parties(&self) -> [(&'static str, AccountRef); 3] {
        [
            ("MegaCompany", self.p.mega.clone()),
            ("Alice", self.p.alice.clone()),
            ("VATPayments", self.p.gov.vat_payments.clone()),
        ]
    }

    fn snapshot_balances(&self, money: MoneyKind) -> Result<[i64; 3], FeasibilityError> {
        Ok([
            self.balance(&self.p.mega, money)?,
            self.balance(&self.p.alice, money)?,
            self.balance(&self.p.gov.vat_payments, money)?,
        ])
    }

    fn paid_checks(&self, inv: LinearId, expect_paid: bool) -> Result<Vec<Check>, FeasibilityError> {
        let mut checks = Vec::new();
        for (name, acct) in self.parties() {
            let paid = self.is_paid_in(&acct, inv)?;
            let label = if expect_paid {
                format!("{name} sees the invoice as paid")
            } else {
                format!("{name} does not see the invoice as paid")
            };
            checks.push(check(label, paid == expect_paid));
        }
        Ok(checks)
    }

    fn balance_checks(&self, money: MoneyKind, before: [i64; 3], deltas: [i64; 3]) -> Result<Vec<Check>, FeasibilityError> {
        let after = self.snapshot_balances(money)?;
        Ok(self
            .parties()
            .iter()
            .enumerate()
            .map(|(i, (name, _))| {
                check(
                    format!(
                        "{name} {money:?} balance {} == {} + {}",
                        after[i], before[i], deltas[i]
                    ),
                    after[i] == before[i] + deltas[i],
                )
            })
            .collect())
    }

    fn funded_payment(&mut self, list1: &ShoppingListDocument) -> Result<(), FeasibilityError> {
        let (net, vat, total) = reference_amounts(&list1.shopping_list);
        let before = self.snapshot_balances(MoneyKind::Current)?;
        let inv = self.issue(list1, MoneyKind::Current)?;

        let at1 = vec![
            check("invoice is in MegaCompany's vault", self.invoice_in(&self.p.mega, inv)?.is_some()),
            check("invoice is in Alice's vault", self.invoice_in(&self.p.alice, inv)?.is_some()),
            check(
                "invoice is absent from VATPayments' vault",
                self.invoice_in(&self.p.gov.vat_payments, inv)?.is_none(),
            ),
        ];
        self.push("AT1", "Unpaid invoice visible to seller and buyer only", at1);

        let paid = self.run(NodeId::BuyerCwp, FlowRequest::pay_invoice(&self.p.alice, inv))?;
        let mut at2 = self.paid_checks(inv, true)?;
        at2.push(check("payment flow succeeded", paid.is_ok()));
        self.push("AT2", "Paid invoice seen as paid by all three parties", at2);

        let at3 = self.balance_checks(MoneyKind::Current, before, [net, -total, vat])?;
        self.push("AT3", "Current balances moved by net, total and VAT", at3);
        Ok(())
    }

    fn underfunded_payment(&mut self, list1: &ShoppingListDocument) -> Result<(), FeasibilityError> {
        let (_, _, total) = reference_amounts(&list1.shopping_list);
        let inv = self.issue(list1, MoneyKind::Current)?;
        let before = self.snapshot_balances(MoneyKind::Current)?;
        let underfunded = before[1] < total;
        let result = self.run(NodeId::BuyerCwp, FlowRequest::pay_invoice(&self.p.alice, inv))?;
        let message = result.error().map(ToString::to_string).unwrap_or_default();
        self.rejections.push(message.clone());

        let mut at4 = self.paid_checks(inv, false)?;
        at4.push(check("buyer balance is below the invoice total", underfunded));
        at4.push(check(
            format!("payment rejected with \"insufficient funds available\" (got {message:?})"),
            matches!(result.error(), Some(FlowError::InsufficientFunds))
                && message == "insufficient funds available",
        ));
        self.push("AT4", "Underfunded invoice stays unpaid", at4);

        let at5 = self.balance_checks(MoneyKind::Current, before, [0, 0, 0])?;
        self.push("AT5", "Underfunded payment leaves balances unchanged", at5);
        Ok(())
    }

    fn allowed_token_payment(&mut self, list2: &ShoppingListDocument) -> Result<(), FeasibilityError> {
        let (net, vat, total) = reference_amounts(&list2.shopping_list);
        let issuer = self.p.gov.vat_payments.clone();
        let tokens = self.run(
            NodeId::HmrcCwp,
            FlowRequest::issue_tokens(&issuer, &self.p.alice, ISSUED_TOKENS),
        )?;
        if !tokens.is_ok() {
            return Err(FeasibilityError::Step(format!("token issuance failed: {:?}", tokens.outcome)));
        }
        let before = self.snapshot_balances(MoneyKind::Token)?;
        let inv = self.issue(list2, MoneyKind::Token)?;
        let result = self.run(
            NodeId::BuyerCwp,
            FlowRequest::pay_invoice_with_tokens(&self.p.alice, inv),
        )?;
        let mut at6 = self.paid_checks(inv, true)?;
        at6.push(check("token payment flow succeeded", result.is_ok()));
        self.push("AT6", "Token-paid invoice of allowed goods is paid", at6);

        let at7 = self.balance_checks(MoneyKind::Token, before, [net, -total, vat])?;
        self.push("AT7", "Token balances moved by net, total and VAT", at7);
        Ok(())
    }

    fn disallowed_token_payment(&mut self, list1: &ShoppingListDocument) -> Result<(), FeasibilityError> {
        let inv = self.issue(list1, MoneyKind::Token)?;
        let before_token = self.snapshot_balances(MoneyKind::Token)?;
        let before_current = self.snapshot_balances(MoneyKind::Current)?;
        let result = self.run(
            NodeId::BuyerCwp,
            FlowRequest::pay_invoice_with_tokens(&self.p.alice, inv),
        )?;
        let message = result.error().map(ToString::to_string).unwrap_or_default();
        self.rejections.push(message.clone());

        let mut at8 = self.paid_checks(inv, false)?;
        at8.push(check(
            format!("payment rejected for disallowed goods (got {message:?})"),
            matches!(result.error(), Some(FlowError::DisallowedGoods)),
        ));
        self.push("AT8", "Token payment for disallowed goods is refused", at8);

        let mut at9 = self.balance_checks(MoneyKind::Token, before_token, [0, 0, 0])?;
        at9.extend(self.balance_checks(MoneyKind::Current, before_current, [0, 0, 0])?);
        self.push("AT9", "Refused token payment leaves balances unchanged", at9);
        Ok(())
    }

    fn warrant(&mut self) -> Result<(), FeasibilityError> {
        let investigator = self.p.gov.vat_investigator.clone();
        let requested = self.run(
            NodeId::HmrcCwp,
            FlowRequest::request_warrant(&investigator, &self.p.mega),
        )?;
        let warrant_id = requested
            .warrant_id()
            .ok_or_else(|| FeasibilityError::Step(format!("warrant request failed: {:?}", requested.outcome)))?;
        let status = |s: &Self| -> Result<Option<WarrantStatus>, FeasibilityError> {
            let found = s
                .net
                .ledger()
                .vault_query(investigator.id, &VaultFilter::warrants().with_linear_id(warrant_id))?;
            Ok(found.first().and_then(|w| w.state().as_warrant()).map(|w| w.status))
        };
        let authority_signed = self
            .net
            .ledger()
            .vault_query(self.p.gov.legal_authority.id, &VaultFilter::warrants().with_linear_id(warrant_id))?
            .first()
            .is_some_and(|w| w.tx.signature_of(crate::ledger::Party::Account(self.p.gov.legal_authority.id)).is_some());
        let at10 = vec![
            check("warrant is in the investigator's vault", status(self)?.is_some()),
            check("warrant is authorized and unexecuted", status(self)? == Some(WarrantStatus::Authorized)),
            check("legal authority signed the warrant", authority_signed),
        ];
        self.push("AT10", "Signed warrant exists and is unexecuted", at10);

        let executed = self.run(
            NodeId::HmrcCwp,
            FlowRequest::execute_warrant(&investigator, warrant_id),
        )?;
        let at11 = vec![
            check("execution flow succeeded", executed.is_ok()),
            check("warrant is now executed", status(self)? == Some(WarrantStatus::Executed)),
        ];
        self.push("AT11", "Warrant moves to executed", at11);

        let mut fetched = match executed.output() {
            Some(FlowOutput::WarrantData { invoices, .. }) => invoices.clone(),
            _ => Vec::new(),
        };
        let mut actual: Vec<InvoiceState> = self
            .net
            .ledger()
            .vault_query(self.p.mega.id, &VaultFilter::invoices())?
            .iter()
            .filter_map(|s| s.state().as_invoice().cloned())
            .collect();
        fetched.sort_by_key(|i| i.invoice_id);
        actual.sort_by_key(|i| i.invoice_id);
        let investigator_has_invoices = !self
            .net
            .ledger()
            .vault_query(investigator.id, &VaultFilter::invoices())?
            .is_empty();
        let at12 = vec![
            check(
                format!("fetched {} invoices equal the seller's {} invoices", fetched.len(), actual.len()),
                !actual.is_empty() && fetched == actual,
            ),
            check("fetched data is not stored in the investigator's vault", !investigator_has_invoices),
        ];
        self.push("AT12", "Fetched data equals the seller's invoices", at12);

        let again = self.run(
            NodeId::HmrcCwp,
            FlowRequest::execute_warrant(&investigator, warrant_id),
        )?;
        let at13 = vec![
            check(
                "second execution is rejected as already executed",
                matches!(again.error(), Some(FlowError::AlreadyExecuted(_))),
            ),
            check("second execution returns no data", again.output().is_none()),
        ];
        self.push("AT13", "Warrant can be executed only once", at13);
        Ok(())
    }
}

pub fn run_feasibility(opts: &FeasibilityOptions) -> Result<FeasibilityReport, FeasibilityError> {
    let config = NetworkConfig::deterministic(opts.seed).with_rules(opts.rules.clone());
    let net = DeterministicNetwork::start(&config)?;
    let ledger = net.ledger().clone();
    let gov = GovAccounts::create(&ledger)?;
    let alice = ledger.create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer)?;
    let mega = ledger.create_account(NodeId::SellerCwp, "MegaCompany", AccountKind::Seller)?;
    ledger.deposit(alice.id, MoneyKind::Current, STARTING_CURRENT)?;

    let mut s = Scenario {
        net,
        p: Parties { alice, mega, gov },
        rules: opts.rules.clone(),
        outcomes: Vec::new(),
        rejections: Vec::new(),
    };
    let list1 = listing(LISTING_1);
    let list2 = listing(LISTING_2);
    s.funded_payment(&list1)?;
    s.underfunded_payment(&list1)?;
    s.allowed_token_payment(&list2)?;
    s.disallowed_token_payment(&list1)?;
    s.warrant()?;

    Ok(FeasibilityReport {
        outcomes: s.outcomes,
        event_log: log::to_ndjson(&ledger.events()),
        rejection_messages: s.rejections,
    })
}
