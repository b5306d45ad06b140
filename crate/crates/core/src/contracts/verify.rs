//! Command-based transaction verification. Pure and deterministic: every
//! node running these checks on the same transaction reaches the same
//! verdict.

use std::fmt;

use serde::Serialize;

use super::amounts::{AmountError, InvoiceAmounts};
use super::rules::ContractRules;
use crate::ledger::{
    AccountKind, AccountRef, Command, DataAccessRequestState, InvoiceState, InvoiceStatus,
    LedgerState, MoneyKind, Party, SignedTransaction, TokenIssuanceState, Transfer,
    WarrantStatus,
};

pub const DISALLOWED_GOODS_MESSAGE: &str =
    "you cannot pay for invalid goods with money from your token account";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationReason {
    WrongShape,
    WrongCommand,
    InvalidLine,
    RateMismatch,
    WrongNet,
    WrongVat,
    WrongTotal,
    WrongStatus,
    WrongMoneyKind,
    WrongParticipants,
    WrongTransfers,
    WrongSigners,
    InvoiceMismatch,
    AlreadyPaid,
    DisallowedGoods,
    NotInvestigator,
    NotRequester,
    WrongAuthority,
    AlreadyExecuted,
    UnknownWarrant,
    UnauthorizedIssuer,
    NonPositiveAmount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub reason: ViolationReason,
    pub detail: String,
}

impl Violation {
    pub fn new(reason: ViolationReason, detail: impl Into<String>) -> Self {
        Self {
            reason,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            ViolationReason::DisallowedGoods => f.write_str(DISALLOWED_GOODS_MESSAGE),
            reason => write!(f, "{reason:?}: {}", self.detail),
        }
    }
}

impl std::error::Error for Violation {}

impl From<AmountError> for Violation {
    fn from(err: AmountError) -> Self {
        let reason = match err {
            AmountError::RateMismatch { .. } => ViolationReason::RateMismatch,
            AmountError::InvalidLine { .. } | AmountError::Overflow => ViolationReason::InvalidLine,
        };
        Violation::new(reason, err.to_string())
    }
}

type Verdict = Result<(), Violation>;

fn ensure(cond: bool, reason: ViolationReason, detail: impl FnOnce() -> String) -> Verdict {
    if cond {
        Ok(())
    } else {
        Err(Violation::new(reason, detail()))
    }
}

/// A transaction together with its resolved input states, in input order.
#[derive(Clone, Copy, Debug)]
pub struct TxView<'a> {
    pub tx: &'a SignedTransaction,
    pub inputs: &'a [&'a LedgerState],
}

/// Signers a transaction with this command and outputs must carry.
pub fn required_signers(
    command: Command,
    outputs: &[LedgerState],
    rules: &ContractRules,
) -> Vec<Party> {
    let first = outputs.first();
    match command {
        Command::IssueInvoice => match first.and_then(LedgerState::as_invoice) {
            Some(inv) => {
                let mut s = vec![Party::Account(inv.seller.id), Party::Account(inv.buyer.id)];
                if rules.split_payments {
                    s.push(Party::Node(rules.tax_node));
                }
                s
            }
            None => Vec::new(),
        },
        Command::PayInvoice | Command::PayInvoiceTokens => {
            match first.and_then(LedgerState::as_invoice) {
                Some(inv) => {
                    let mut s =
                        vec![Party::Account(inv.buyer.id), Party::Account(inv.seller.id)];
                    if rules.split_payments {
                        if let Some(gov) = gov_participant(inv) {
                            s.push(Party::Account(gov.id));
                        }
                    }
                    s
                }
                None => Vec::new(),
            }
        }
        Command::IssueTokens => match first {
            Some(LedgerState::TokenIssuance(tok)) => {
                vec![Party::Node(tok.issuer), Party::Account(tok.recipient.id)]
            }
            _ => Vec::new(),
        },
        Command::RequestDar | Command::ExecuteDar => match first.and_then(LedgerState::as_warrant) {
            Some(dar) => vec![
                Party::Account(dar.requester.id),
                Party::Account(dar.authorizer.id),
            ],
            None => Vec::new(),
        },
    }
}

fn gov_participant(inv: &InvoiceState) -> Option<&AccountRef> {
    inv.participants
        .iter()
        .find(|p| p.kind == AccountKind::GovPayments)
}

fn same_members(a: &[AccountRef], b: &[&AccountRef]) -> bool {
    a.len() == b.len() && b.iter().all(|x| a.iter().any(|y| y.id == x.id))
}

fn check_signers(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    let expected = required_signers(view.tx.command, &view.tx.outputs, rules);
    let actual = &view.tx.required_signers;
    ensure(
        expected.len() == actual.len() && expected.iter().all(|p| actual.contains(p)),
        ViolationReason::WrongSigners,
        || format!("expected signers {expected:?}, got {actual:?}"),
    )
}

/// Dispatches on the transaction command.
pub fn verify(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    match view.tx.command {
        Command::IssueInvoice | Command::PayInvoice | Command::PayInvoiceTokens => {
            verify_invoice(view, rules)
        }
        Command::RequestDar | Command::ExecuteDar => verify_data_access(view, rules),
        Command::IssueTokens => verify_token_issue(view, rules),
    }
}

fn single_invoice_output<'a>(view: &TxView<'a>) -> Result<&'a InvoiceState, Violation> {
    match view.tx.outputs.as_slice() {
        [LedgerState::Invoice(inv)] => Ok(inv),
        _ => Err(Violation::new(
            ViolationReason::WrongShape,
            "expected exactly one invoice output",
        )),
    }
}

fn check_cached_amounts(inv: &InvoiceState, rules: &ContractRules) -> Verdict {
    let amounts = InvoiceAmounts::compute(&inv.lines, &rules.vat)?;
    ensure(inv.net_amount == amounts.net, ViolationReason::WrongNet, || {
        format!("net {} != {}", inv.net_amount, amounts.net)
    })?;
    ensure(inv.vat_amount == amounts.vat, ViolationReason::WrongVat, || {
        format!("vat {} != {}", inv.vat_amount, amounts.vat)
    })?;
    ensure(inv.total_amount == amounts.total, ViolationReason::WrongTotal, || {
        format!("total {} != {}", inv.total_amount, amounts.total)
    })
}

pub fn verify_invoice(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    match view.tx.command {
        Command::IssueInvoice => verify_invoice_issue(view, rules),
        Command::PayInvoice => verify_invoice_payment(view, rules, MoneyKind::Current),
        Command::PayInvoiceTokens => verify_invoice_payment(view, rules, MoneyKind::Token),
        other => Err(Violation::new(
            ViolationReason::WrongCommand,
            format!("{other:?} is not an invoice command"),
        )),
    }
}

fn verify_invoice_issue(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    ensure(view.tx.inputs.is_empty(), ViolationReason::WrongShape, || {
        "issuing consumes no inputs".into()
    })?;
    let inv = single_invoice_output(view)?;
    ensure(inv.status == InvoiceStatus::Unpaid, ViolationReason::WrongStatus, || {
        "issued invoice must be unpaid".into()
    })?;
    ensure(inv.seller.id != inv.buyer.id, ViolationReason::WrongParticipants, || {
        "seller and buyer must differ".into()
    })?;
    check_cached_amounts(inv, rules)?;
    ensure(
        same_members(&inv.participants, &[&inv.seller, &inv.buyer]),
        ViolationReason::WrongParticipants,
        || "unpaid invoice is shared by seller and buyer only".into(),
    )?;
    ensure(view.tx.transfers.is_empty(), ViolationReason::WrongTransfers, || {
        "issuing moves no money".into()
    })?;
    check_signers(view, rules)
}

fn find_transfer<'a>(transfers: &'a [Transfer], account: &AccountRef) -> Option<&'a Transfer> {
    transfers.iter().find(|t| t.account.id == account.id)
}

fn verify_invoice_payment(view: &TxView<'_>, rules: &ContractRules, money: MoneyKind) -> Verdict {
    let input = match (view.tx.inputs.len(), view.inputs) {
        (1, [LedgerState::Invoice(inv)]) => inv,
        _ => {
            return Err(Violation::new(
                ViolationReason::WrongShape,
                "payment consumes exactly one invoice",
            ))
        }
    };
    ensure(input.status == InvoiceStatus::Unpaid, ViolationReason::AlreadyPaid, || {
        format!("invoice {} is already paid", input.invoice_id)
    })?;
    let out = single_invoice_output(view)?;
    ensure(out.status == InvoiceStatus::Paid, ViolationReason::WrongStatus, || {
        "payment output must be paid".into()
    })?;
    ensure(
        out.invoice_id == input.invoice_id
            && out.seller == input.seller
            && out.buyer == input.buyer
            && out.lines == input.lines
            && out.money_kind == input.money_kind
            && out.net_amount == input.net_amount
            && out.vat_amount == input.vat_amount
            && out.total_amount == input.total_amount,
        ViolationReason::InvoiceMismatch,
        || "paid invoice differs from the unpaid one".into(),
    )?;
    ensure(out.money_kind == money, ViolationReason::WrongMoneyKind, || {
        format!("invoice is payable in {:?} money", out.money_kind)
    })?;
    if money == MoneyKind::Token {
        if let Some(line) = out
            .lines
            .iter()
            .find(|l| !rules.allowed_goods.contains(l.item))
        {
            return Err(Violation::new(
                ViolationReason::DisallowedGoods,
                format!("{} is not on the allowed goods list", line.item),
            ));
        }
    }
    check_cached_amounts(out, rules)?;

    let transfers = &view.tx.transfers;
    ensure(
        transfers.iter().all(|t| t.money == money),
        ViolationReason::WrongMoneyKind,
        || format!("all movements must be in {money:?} money"),
    )?;
    let buyer_leg = find_transfer(transfers, &out.buyer).map(|t| t.delta);
    ensure(
        buyer_leg == Some(-out.total_amount),
        ViolationReason::WrongTotal,
        || format!("buyer must be debited {}, got {buyer_leg:?}", out.total_amount),
    )?;
    let seller_leg = find_transfer(transfers, &out.seller).map(|t| t.delta);
    let seller_due = if rules.split_payments {
        out.net_amount
    } else {
        out.total_amount
    };
    ensure(seller_leg == Some(seller_due), ViolationReason::WrongNet, || {
        format!("seller must be credited {seller_due}, got {seller_leg:?}")
    })?;

    if rules.split_payments {
        let gov = gov_participant(out).ok_or_else(|| {
            Violation::new(
                ViolationReason::WrongParticipants,
                "paid invoice must be shared with the VAT payments account",
            )
        })?;
        let gov_leg = find_transfer(transfers, gov).map(|t| t.delta);
        ensure(gov_leg == Some(out.vat_amount), ViolationReason::WrongVat, || {
            format!("VAT account must be credited {}, got {gov_leg:?}", out.vat_amount)
        })?;
        ensure(transfers.len() == 3, ViolationReason::WrongTransfers, || {
            "split payment has exactly three legs".into()
        })?;
        ensure(
            same_members(&out.participants, &[&out.seller, &out.buyer, gov]),
            ViolationReason::WrongParticipants,
            || "paid invoice is shared by seller, buyer and the VAT account".into(),
        )?;
    } else {
        ensure(transfers.len() == 2, ViolationReason::WrongTransfers, || {
            "non-split payment has exactly two legs".into()
        })?;
        ensure(
            same_members(&out.participants, &[&out.seller, &out.buyer]),
            ViolationReason::WrongParticipants,
            || "paid invoice is shared by seller and buyer".into(),
        )?;
    }
    check_signers(view, rules)
}

fn single_warrant_output<'a>(view: &TxView<'a>) -> Result<&'a DataAccessRequestState, Violation> {
    match view.tx.outputs.as_slice() {
        [LedgerState::DataAccessRequest(dar)] => Ok(dar),
        _ => Err(Violation::new(
            ViolationReason::WrongShape,
            "expected exactly one data access request output",
        )),
    }
}

pub fn verify_data_access(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    ensure(view.tx.transfers.is_empty(), ViolationReason::WrongTransfers, || {
        "warrants move no money".into()
    })?;
    match view.tx.command {
        Command::RequestDar => {
            ensure(view.tx.inputs.is_empty(), ViolationReason::WrongShape, || {
                "a request consumes no inputs".into()
            })?;
            let dar = single_warrant_output(view)?;
            ensure(
                dar.requester.kind == AccountKind::GovInvestigator,
                ViolationReason::NotInvestigator,
                || format!("{} is not an investigator account", dar.requester),
            )?;
            ensure(
                view.tx.initiator == Party::Account(dar.requester.id),
                ViolationReason::NotRequester,
                || "the request must be initiated by the requester".into(),
            )?;
            ensure(
                dar.authorizer.kind == AccountKind::LegalAuthority,
                ViolationReason::WrongAuthority,
                || format!("{} is not a legal authority", dar.authorizer),
            )?;
            ensure(
                dar.status == WarrantStatus::Authorized
                    && dar.authorized_at.is_some()
                    && dar.executed_at.is_none(),
                ViolationReason::WrongStatus,
                || format!("a new warrant must be authorized and unexecuted, got {:?}", dar.status),
            )?;
            check_signers(view, rules)
        }
        Command::ExecuteDar => {
            let input = match (view.tx.inputs.len(), view.inputs) {
                (1, [LedgerState::DataAccessRequest(dar)]) => dar,
                _ => {
                    return Err(Violation::new(
                        ViolationReason::UnknownWarrant,
                        "execution must consume exactly one warrant",
                    ))
                }
            };
            ensure(
                view.tx.initiator == Party::Account(input.requester.id),
                ViolationReason::NotRequester,
                || "only the requester may execute the warrant".into(),
            )?;
            ensure(
                input.status != WarrantStatus::Executed,
                ViolationReason::AlreadyExecuted,
                || format!("warrant {} was already executed", input.warrant_id),
            )?;
            ensure(
                input.status == WarrantStatus::Authorized,
                ViolationReason::WrongStatus,
                || "only authorized warrants can be executed".into(),
            )?;
            let out = single_warrant_output(view)?;
            ensure(
                out.warrant_id == input.warrant_id
                    && out.authorizer == input.authorizer
                    && out.requester == input.requester
                    && out.subject == input.subject
                    && out.authorized_at == input.authorized_at,
                ViolationReason::UnknownWarrant,
                || "warrant id or authority does not match an issued warrant".into(),
            )?;
            ensure(
                out.status == WarrantStatus::Executed && out.executed_at.is_some(),
                ViolationReason::WrongStatus,
                || "execution output must be executed and timestamped".into(),
            )?;
            check_signers(view, rules)
        }
        other => Err(Violation::new(
            ViolationReason::WrongCommand,
            format!("{other:?} is not a warrant command"),
        )),
    }
}

pub fn verify_token_issue(view: &TxView<'_>, rules: &ContractRules) -> Verdict {
    ensure(
        view.tx.command == Command::IssueTokens,
        ViolationReason::WrongCommand,
        || format!("{:?} is not a token command", view.tx.command),
    )?;
    ensure(view.tx.inputs.is_empty(), ViolationReason::WrongShape, || {
        "issuance consumes no inputs".into()
    })?;
    let tok: &TokenIssuanceState = match view.tx.outputs.as_slice() {
        [LedgerState::TokenIssuance(tok)] => tok,
        _ => {
            return Err(Violation::new(
                ViolationReason::WrongShape,
                "expected exactly one token issuance output",
            ))
        }
    };
    ensure(tok.issuer == rules.tax_node, ViolationReason::UnauthorizedIssuer, || {
        format!("{} may not issue tokens", tok.issuer)
    })?;
    ensure(
        view.tx.initiator == Party::Node(tok.issuer),
        ViolationReason::UnauthorizedIssuer,
        || "issuance must be initiated by the issuing node".into(),
    )?;
    ensure(tok.amount > 0, ViolationReason::NonPositiveAmount, || {
        format!("cannot issue {} tokens", tok.amount)
    })?;
    let expected = [Transfer {
        account: tok.recipient.clone(),
        money: MoneyKind::Token,
        delta: tok.amount,
    }];
    ensure(view.tx.transfers == expected, ViolationReason::WrongTransfers, || {
        "issuance credits exactly the recipient's token balance".into()
    })?;
    check_signers(view, rules)
}
