//! Shopping-list JSON documents: an array of
//! `{amount, buyer, shoppingList: [{item, price, quantity, vatRate}], whoAmI}`.
//!
//! `amount` is kept for display only; invoice amounts are always
//! recomputed from the lines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::VatRateTable;
use crate::ledger::{GoodsClass, ItemLine};

pub const LISTING_1: &str = include_str!("../data/listing1.json");
pub const LISTING_2: &str = include_str!("../data/listing2.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShoppingListDocument {
    pub amount: i64,
    pub buyer: String,
    #[serde(rename = "shoppingList")]
    pub shopping_list: Vec<ItemLine>,
    #[serde(rename = "whoAmI")]
    pub who_am_i: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateWarning {
    pub document: usize,
    pub line: usize,
    pub item: GoodsClass,
    pub declared: u32,
    pub expected: u32,
}

impl std::fmt::Display for RateWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "document {} line {}: {} declares {}% VAT, table rate is {}%",
            self.document, self.line, self.item, self.declared, self.expected
        )
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("rate mismatch: {0}")]
    RateMismatch(RateWarning),
    #[error("cannot read shopping list: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ingested {
    pub documents: Vec<ShoppingListDocument>,
    /// Lines whose declared rate disagreed with the table (non-strict mode).
    pub warnings: Vec<RateWarning>,
}

impl ShoppingListDocument {
    /// Lines with each rate replaced by the table rate for its class.
    pub fn normalized_lines(&self, table: &VatRateTable) -> Vec<ItemLine> {
        self.shopping_list
            .iter()
            .map(|l| ItemLine {
                vat_rate: table.rate(l.item),
                ..*l
            })
            .collect()
    }

    pub fn rate_mismatches(&self, document: usize, table: &VatRateTable) -> Vec<RateWarning> {
        self.shopping_list
            .iter()
            .enumerate()
            .filter(|(_, l)| l.vat_rate != table.rate(l.item))
            .map(|(line, l)| RateWarning {
                document,
                line,
                item: l.item,
                declared: l.vat_rate,
                expected: table.rate(l.item),
            })
            .collect()
    }
}

/// Parses documents and cross-checks rates. In strict mode the first
/// mismatch is an error; otherwise mismatches are reported as warnings.
pub fn parse_shopping_lists(
    json: &str,
    table: &VatRateTable,
    strict: bool,
) -> Result<Ingested, IngestError> {
    let documents: Vec<ShoppingListDocument> =
        serde_json::from_str(json).map_err(|e| IngestError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let mut warnings = Vec::new();
    for (i, doc) in documents.iter().enumerate() {
        let mismatches = doc.rate_mismatches(i, table);
        if strict {
            if let Some(first) = mismatches.into_iter().next() {
                return Err(IngestError::RateMismatch(first));
            }
        } else {
            warnings.extend(mismatches);
        }
    }
    Ok(Ingested {
        documents,
        warnings,
    })
}

pub fn parse_shopping_list_file(
    path: &Path,
    table: &VatRateTable,
    strict: bool,
) -> Result<Ingested, IngestError> {
    parse_shopping_lists(&std::fs::read_to_string(path)?, table, strict)
}

/// The single document of an embedded listing.
pub fn listing(json: &str) -> ShoppingListDocument {
    let mut docs: Vec<ShoppingListDocument> =
        serde_json::from_str(json).expect("embedded listing is valid");
    docs.remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listings_parse() {
        let t = VatRateTable::uk();
        let one = parse_shopping_lists(LISTING_1, &t, true).unwrap();
        assert_eq!(one.documents.len(), 1);
        let doc = &one.documents[0];
        assert_eq!(doc.shopping_list.len(), 8);
        assert_eq!(doc.buyer, "Alice");
        assert_eq!(doc.who_am_i, "MegaCompany");
        assert_eq!(doc.amount, 60626);
        assert!(one.warnings.is_empty());

        let two = parse_shopping_lists(LISTING_2, &t, true).unwrap();
        assert_eq!(two.documents[0].shopping_list.len(), 7);
        assert_eq!(two.documents[0].amount, 26009);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_shopping_lists("[{\"amount\": 1,\n  \"buyer\": }]", &VatRateTable::uk(), false)
            .unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }), "{err}");
        let err = parse_shopping_lists(r#"[{"amount": 1}]"#, &VatRateTable::uk(), false).unwrap_err();
        assert!(matches!(err, IngestError::Parse { .. }));
    }

    #[test]
    fn rate_mismatch_is_warning_or_error() {
        let t = VatRateTable::uk().with_rate(GoodsClass::Energy, 0).unwrap();
        let lenient = parse_shopping_lists(LISTING_2, &t, false).unwrap();
        assert_eq!(lenient.warnings.len(), 1);
        assert_eq!(lenient.warnings[0].item, GoodsClass::Energy);
        assert_eq!(lenient.warnings[0].line, 2);
        assert!(matches!(
            parse_shopping_lists(LISTING_2, &t, true),
            Err(IngestError::RateMismatch(_))
        ));
        let lines = lenient.documents[0].normalized_lines(&t);
        assert!(lines.iter().all(|l| l.vat_rate == t.rate(l.item)));
    }
}
