//! VAT arithmetic in minor currency units.
//!
//! VAT is computed per line as `round_half_up(price * quantity * rate / 100)`
//! and then summed, so every total is additive over line lists.

use serde::Serialize;
use thiserror::Error;

use super::rules::VatRateTable;
use crate::ledger::{GoodsClass, ItemLine};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("line {index}: {reason}")]
    InvalidLine { index: usize, reason: &'static str },
    #[error("line {index}: {item} declares {declared}% VAT, table rate is {expected}%")]
    RateMismatch {
        index: usize,
        item: GoodsClass,
        declared: u32,
        expected: u32,
    },
    #[error("amount overflow")]
    Overflow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InvoiceAmounts {
    pub net: i64,
    pub vat: i64,
    pub total: i64,
}

impl InvoiceAmounts {
    pub fn compute(lines: &[ItemLine], table: &VatRateTable) -> Result<Self, AmountError> {
        let net = net_amount(lines)?;
        let vat = vat_amount(lines, table)?;
        let total = net.checked_add(vat).ok_or(AmountError::Overflow)?;
        Ok(Self { net, vat, total })
    }
}

fn check_line(index: usize, line: &ItemLine) -> Result<(), AmountError> {
    if line.price < 0 {
        return Err(AmountError::InvalidLine {
            index,
            reason: "negative price",
        });
    }
    if line.quantity < 1 {
        return Err(AmountError::InvalidLine {
            index,
            reason: "quantity must be at least 1",
        });
    }
    Ok(())
}

fn gross(line: &ItemLine) -> Result<i64, AmountError> {
    line.price
        .checked_mul(line.quantity)
        .ok_or(AmountError::Overflow)
}

/// VAT of a single line, rounded half up to the minor unit.
pub fn line_vat(line: &ItemLine) -> Result<i64, AmountError> {
    let scaled = i128::from(gross(line)?) * i128::from(line.vat_rate);
    i64::try_from((scaled + 50) / 100).map_err(|_| AmountError::Overflow)
}

/// Sum of `price * quantity`.
pub fn net_amount(lines: &[ItemLine]) -> Result<i64, AmountError> {
    lines.iter().enumerate().try_fold(0i64, |acc, (i, line)| {
        check_line(i, line)?;
        acc.checked_add(gross(line)?).ok_or(AmountError::Overflow)
    })
}

/// Sum of per-line VAT; every line's rate must agree with the table.
pub fn vat_amount(lines: &[ItemLine], table: &VatRateTable) -> Result<i64, AmountError> {
    lines.iter().enumerate().try_fold(0i64, |acc, (i, line)| {
        check_line(i, line)?;
        let expected = table.rate(line.item);
        if line.vat_rate != expected {
            return Err(AmountError::RateMismatch {
                index: i,
                item: line.item,
                declared: line.vat_rate,
                expected,
            });
        }
        acc.checked_add(line_vat(line)?).ok_or(AmountError::Overflow)
    })
}

pub fn total_amount(lines: &[ItemLine], table: &VatRateTable) -> Result<i64, AmountError> {
    InvoiceAmounts::compute(lines, table).map(|a| a.total)
}
