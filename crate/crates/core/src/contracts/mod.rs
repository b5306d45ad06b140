//! Verification rules and VAT arithmetic.

mod amounts;
mod rules;
mod verify;

pub use amounts::{line_vat, net_amount, total_amount, vat_amount, AmountError, InvoiceAmounts};
pub use rules::{AllowedGoodsList, ConfigError, ContractRules, VatRateTable, ALLOWED_VAT_RATES};
pub use verify::{
    required_signers, verify, verify_data_access, verify_invoice, verify_token_issue, TxView,
    Violation, ViolationReason, DISALLOWED_GOODS_MESSAGE,
};
