//! On-ledger data model: accounts, goods lines, states, transactions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The five node roles of the network. Each role is a single node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    #[serde(rename = "HMRCCWP")]
    HmrcCwp,
    #[serde(rename = "BuyerCWP")]
    BuyerCwp,
    #[serde(rename = "SellerCWP")]
    SellerCwp,
    #[serde(rename = "LegalCWP")]
    LegalCwp,
    #[serde(rename = "Notary")]
    Notary,
}

impl NodeId {
    pub const ALL: [NodeId; 5] = [
        NodeId::HmrcCwp,
        NodeId::BuyerCwp,
        NodeId::SellerCwp,
        NodeId::LegalCwp,
        NodeId::Notary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeId::HmrcCwp => "HMRCCWP",
            NodeId::BuyerCwp => "BuyerCWP",
            NodeId::SellerCwp => "SellerCWP",
            NodeId::LegalCwp => "LegalCWP",
            NodeId::Notary => "Notary",
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId(pub u64);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acct-{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccountKind {
    Consumer,
    Seller,
    GovPayments,
    GovInvestigator,
    LegalAuthority,
}

/// A logical account hosted inside one node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccountRef {
    pub id: AccountId,
    pub display_name: String,
    pub host_node: NodeId,
    pub kind: AccountKind,
}

impl fmt::Display for AccountRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.display_name, self.host_node)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoneyKind {
    Current,
    Token,
}

/// Balances in minor currency units. Never negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Balances {
    pub current: i64,
    pub token: i64,
}

impl Balances {
    pub fn get(&self, kind: MoneyKind) -> i64 {
        match kind {
            MoneyKind::Current => self.current,
            MoneyKind::Token => self.token,
        }
    }

    pub(crate) fn get_mut(&mut self, kind: MoneyKind) -> &mut i64 {
        match kind {
            MoneyKind::Current => &mut self.current,
            MoneyKind::Token => &mut self.token,
        }
    }
}

/// The seven goods classes the VAT table covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GoodsClass {
    #[serde(rename = "Adult Clothing")]
    AdultClothing,
    #[serde(rename = "Alcohol")]
    Alcohol,
    #[serde(rename = "Books")]
    Books,
    #[serde(rename = "Children's Clothing")]
    ChildrensClothing,
    #[serde(rename = "Electrical")]
    Electrical,
    #[serde(rename = "Energy")]
    Energy,
    #[serde(rename = "Groceries")]
    Groceries,
}

impl GoodsClass {
    pub const ALL: [GoodsClass; 7] = [
        GoodsClass::AdultClothing,
        GoodsClass::Alcohol,
        GoodsClass::Books,
        GoodsClass::ChildrensClothing,
        GoodsClass::Electrical,
        GoodsClass::Energy,
        GoodsClass::Groceries,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GoodsClass::AdultClothing => "Adult Clothing",
            GoodsClass::Alcohol => "Alcohol",
            GoodsClass::Books => "Books",
            GoodsClass::ChildrensClothing => "Children's Clothing",
            GoodsClass::Electrical => "Electrical",
            GoodsClass::Energy => "Energy",
            GoodsClass::Groceries => "Groceries",
        }
    }
}

impl fmt::Display for GoodsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of an invoice. Field names follow the shopping-list JSON schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemLine {
    pub item: GoodsClass,
    pub price: i64,
    pub quantity: i64,
    #[serde(rename = "vatRate")]
    pub vat_rate: u32,
}

impl ItemLine {
    pub fn new(item: GoodsClass, price: i64, quantity: i64, vat_rate: u32) -> Self {
        Self {
            item,
            price,
            quantity,
            vat_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinearId(pub u64);

impl fmt::Display for LinearId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lin-{:08x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InvoiceStatus {
    Unpaid,
    Paid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvoiceState {
    pub invoice_id: LinearId,
    pub seller: AccountRef,
    pub buyer: AccountRef,
    pub lines: Vec<ItemLine>,
    pub money_kind: MoneyKind,
    pub net_amount: i64,
    pub vat_amount: i64,
    pub total_amount: i64,
    pub status: InvoiceStatus,
    pub participants: Vec<AccountRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WarrantStatus {
    Requested,
    Authorized,
    Executed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataAccessRequestState {
    pub warrant_id: LinearId,
    pub requester: AccountRef,
    pub subject: AccountRef,
    pub authorizer: AccountRef,
    pub status: WarrantStatus,
    pub authorized_at: Option<u64>,
    pub executed_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIssuanceState {
    pub issuer: NodeId,
    pub recipient: AccountRef,
    pub amount: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Invoice,
    DataAccessRequest,
    TokenIssuance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LedgerState {
    Invoice(InvoiceState),
    DataAccessRequest(DataAccessRequestState),
    TokenIssuance(TokenIssuanceState),
}

impl LedgerState {
    pub fn kind(&self) -> StateKind {
        match self {
            LedgerState::Invoice(_) => StateKind::Invoice,
            LedgerState::DataAccessRequest(_) => StateKind::DataAccessRequest,
            LedgerState::TokenIssuance(_) => StateKind::TokenIssuance,
        }
    }

    /// Accounts whose vaults store this state.
    pub fn participants(&self) -> Vec<&AccountRef> {
        match self {
            LedgerState::Invoice(inv) => inv.participants.iter().collect(),
            LedgerState::DataAccessRequest(dar) => vec![&dar.requester, &dar.authorizer],
            LedgerState::TokenIssuance(tok) => vec![&tok.recipient],
        }
    }

    pub fn is_participant(&self, account: AccountId) -> bool {
        self.participants().iter().any(|p| p.id == account)
    }

    /// Identifier of the state sequence, if the state is linear.
    pub fn linear_id(&self) -> Option<LinearId> {
        match self {
            LedgerState::Invoice(inv) => Some(inv.invoice_id),
            LedgerState::DataAccessRequest(dar) => Some(dar.warrant_id),
            LedgerState::TokenIssuance(_) => None,
        }
    }

    pub fn as_invoice(&self) -> Option<&InvoiceState> {
        match self {
            LedgerState::Invoice(inv) => Some(inv),
            _ => None,
        }
    }

    pub fn as_warrant(&self) -> Option<&DataAccessRequestState> {
        match self {
            LedgerState::DataAccessRequest(dar) => Some(dar),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransactionId(pub [u8; 32]);

impl TransactionId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..6])
    }
}

impl fmt::Debug for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TransactionId({})", self.short())
    }
}

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for TransactionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&self.to_hex())
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for TransactionId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let s = String::deserialize(d)?;
            let mut out = [0u8; 32];
            hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
            Ok(TransactionId(out))
        } else {
            Ok(TransactionId(<[u8; 32]>::deserialize(d)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub tx_id: TransactionId,
    pub output_index: u32,
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tx_id.short(), self.output_index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    IssueInvoice,
    PayInvoice,
    PayInvoiceTokens,
    IssueTokens,
    RequestDar,
    ExecuteDar,
}

/// A signing identity: an account, or a node signing in its own name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    Account(AccountId),
    Node(NodeId),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Account(id) => write!(f, "{id}"),
            Party::Node(node) => write!(f, "node:{node}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..6]))
    }
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 64];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Signature(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartySignature {
    pub party: Party,
    pub signature: Signature,
}

/// Money movement carried by a transaction and applied at notary commit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub account: AccountRef,
    pub money: MoneyKind,
    pub delta: i64,
}

/// Notary logical clock value plus the network-clock reading (microseconds).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub logical: u64,
    pub micros: u64,
}

/// Unit of ledger append.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub tx_id: TransactionId,
    pub initiator: Party,
    pub inputs: Vec<StateRef>,
    pub outputs: Vec<LedgerState>,
    pub command: Command,
    pub transfers: Vec<Transfer>,
    pub required_signers: Vec<Party>,
    pub signatures: Vec<PartySignature>,
    pub notary_signature: Option<Signature>,
    pub timestamp: Option<Timestamp>,
}

#[derive(Serialize)]
struct TxContent<'a> {
    initiator: &'a Party,
    inputs: &'a [StateRef],
    outputs: &'a [LedgerState],
    command: &'a Command,
    transfers: &'a [Transfer],
    required_signers: &'a [Party],
}

impl SignedTransaction {
    /// Builds an unsigned transaction with its content-derived id.
    pub fn new(
        initiator: Party,
        inputs: Vec<StateRef>,
        outputs: Vec<LedgerState>,
        command: Command,
        transfers: Vec<Transfer>,
        required_signers: Vec<Party>,
    ) -> Self {
        let mut tx = Self {
            tx_id: TransactionId([0; 32]),
            initiator,
            inputs,
            outputs,
            command,
            transfers,
            required_signers,
            signatures: Vec::new(),
            notary_signature: None,
            timestamp: None,
        };
        tx.tx_id = tx.compute_id();
        tx
    }

    /// Recomputes the id from the signed content.
    pub fn compute_id(&self) -> TransactionId {
        let content = TxContent {
            initiator: &self.initiator,
            inputs: &self.inputs,
            outputs: &self.outputs,
            command: &self.command,
            transfers: &self.transfers,
            required_signers: &self.required_signers,
        };
        let mut hasher = Sha256::new();
        hasher.update(b"mts/tx/v1");
        hasher.update(bincode::serialize(&content).expect("in-memory serialization cannot fail"));
        TransactionId(hasher.finalize().into())
    }

    pub fn content_matches_id(&self) -> bool {
        self.compute_id() == self.tx_id
    }

    pub fn signature_of(&self, party: Party) -> Option<Signature> {
        self.signatures
            .iter()
            .find(|s| s.party == party)
            .map(|s| s.signature)
    }

    pub fn add_signature(&mut self, sig: PartySignature) {
        match self.signatures.binary_search_by(|s| s.party.cmp(&sig.party)) {
            Ok(pos) => self.signatures[pos] = sig,
            Err(pos) => self.signatures.insert(pos, sig),
        }
    }

    pub fn output_ref(&self, index: u32) -> StateRef {
        StateRef {
            tx_id: self.tx_id,
            output_index: index,
        }
    }
}

/// A committed output together with the transaction that produced it.
#[derive(Clone, Debug)]
pub struct StateAndRef {
    pub tx: Arc<SignedTransaction>,
    pub index: u32,
}

impl StateAndRef {
    pub fn new(tx: Arc<SignedTransaction>, index: u32) -> Self {
        debug_assert!((index as usize) < tx.outputs.len());
        Self { tx, index }
    }

    pub fn state(&self) -> &LedgerState {
        &self.tx.outputs[self.index as usize]
    }

    pub fn state_ref(&self) -> StateRef {
        self.tx.output_ref(self.index)
    }
}

impl PartialEq for StateAndRef {
    fn eq(&self, other: &Self) -> bool {
        self.state_ref() == other.state_ref() && self.state() == other.state()
    }
}

impl Eq for StateAndRef {}
