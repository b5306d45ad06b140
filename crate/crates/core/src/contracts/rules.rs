use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{GoodsClass, NodeId};

pub const ALLOWED_VAT_RATES: [u32; 3] = [0, 5, 20];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("VAT table has no rate for {0}")]
    MissingClass(GoodsClass),
    #[error("VAT rate {rate}% for {class} is not one of 0, 5, 20")]
    InvalidRate { class: GoodsClass, rate: u32 },
    #[error("invalid rules config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read rules config: {0}")]
    Io(#[from] std::io::Error),
}

/// VAT percent per goods class. Covers all seven classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<GoodsClass, u32>", into = "BTreeMap<GoodsClass, u32>")]
pub struct VatRateTable {
    rates: BTreeMap<GoodsClass, u32>,
}

impl VatRateTable {
    /// UK rates: standard 20%, reduced 5% for energy, zero for food,
    /// books and children's clothing.
    pub fn uk() -> Self {
        use GoodsClass::*;
        let rates = [
            (AdultClothing, 20),
            (Alcohol, 20),
            (Books, 0),
            (ChildrensClothing, 0),
            (Electrical, 20),
            (Energy, 5),
            (Groceries, 0),
        ]
        .into_iter()
        .collect();
        Self { rates }
    }

    pub fn from_rates(rates: BTreeMap<GoodsClass, u32>) -> Result<Self, ConfigError> {
        for class in GoodsClass::ALL {
            match rates.get(&class) {
                None => return Err(ConfigError::MissingClass(class)),
                Some(rate) if !ALLOWED_VAT_RATES.contains(rate) => {
                    return Err(ConfigError::InvalidRate { class, rate: *rate })
                }
                Some(_) => {}
            }
        }
        Ok(Self { rates })
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(json)?)
    }

    /// Returns a copy with one class re-rated.
    pub fn with_rate(&self, class: GoodsClass, rate: u32) -> Result<Self, ConfigError> {
        let mut rates = self.rates.clone();
        rates.insert(class, rate);
        Self::from_rates(rates)
    }

    pub fn rate(&self, class: GoodsClass) -> u32 {
        self.rates[&class]
    }

    pub fn iter(&self) -> impl Iterator<Item = (GoodsClass, u32)> + '_ {
        self.rates.iter().map(|(c, r)| (*c, *r))
    }
}

impl Default for VatRateTable {
    fn default() -> Self {
        Self::uk()
    }
}

impl TryFrom<BTreeMap<GoodsClass, u32>> for VatRateTable {
    type Error = ConfigError;

    fn try_from(rates: BTreeMap<GoodsClass, u32>) -> Result<Self, Self::Error> {
        Self::from_rates(rates)
    }
}

impl From<VatRateTable> for BTreeMap<GoodsClass, u32> {
    fn from(table: VatRateTable) -> Self {
        table.rates
    }
}

/// Goods classes that may be bought with token money.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllowedGoodsList(BTreeSet<GoodsClass>);

impl AllowedGoodsList {
    pub fn new(classes: impl IntoIterator<Item = GoodsClass>) -> Self {
        Self(classes.into_iter().collect())
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn contains(&self, class: GoodsClass) -> bool {
        self.0.contains(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = GoodsClass> + '_ {
        self.0.iter().copied()
    }
}

impl Default for AllowedGoodsList {
    fn default() -> Self {
        use GoodsClass::*;
        Self::new([Groceries, Energy, Books, ChildrensClothing])
    }
}

/// Deployment-wide verification rules shared by every node.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RulesFile")]
pub struct ContractRules {
    pub vat: VatRateTable,
    pub allowed_goods: AllowedGoodsList,
    /// When false, payments credit the seller with the full total and the
    /// tax authority takes no part in invoice transactions.
    pub split_payments: bool,
    /// The only node allowed to issue tokens and co-sign invoices.
    pub tax_node: NodeId,
}

impl Default for ContractRules {
    fn default() -> Self {
        Self {
            vat: VatRateTable::uk(),
            allowed_goods: AllowedGoodsList::default(),
            split_payments: true,
            tax_node: NodeId::HmrcCwp,
        }
    }
}

impl ContractRules {
    pub fn with_split(mut self, split: bool) -> Self {
        self.split_payments = split;
        self
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parses `{"vatRates": {...}, "allowedGoods": [...], "splitPayments": bool}`;
    /// every key is optional and `vatRates` overrides individual classes.
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(json)?)
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RulesFile {
    vat_rates: Option<BTreeMap<GoodsClass, u32>>,
    allowed_goods: Option<AllowedGoodsList>,
    split_payments: Option<bool>,
}

impl TryFrom<RulesFile> for ContractRules {
    type Error = ConfigError;

    fn try_from(file: RulesFile) -> Result<Self, ConfigError> {
        let mut rules = Self::default();
        for (class, rate) in file.vat_rates.unwrap_or_default() {
            rules.vat = rules.vat.with_rate(class, rate)?;
        }
        if let Some(allowed) = file.allowed_goods {
            rules.allowed_goods = allowed;
        }
        if let Some(split) = file.split_payments {
            rules.split_payments = split;
        }
        Ok(rules)
    }
}
