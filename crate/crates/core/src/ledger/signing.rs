use dashmap::DashMap;
use ed25519_dalek::{Signer, SigningKey, Verifier};
use sha2::{Digest, Sha256};

use super::types::{NodeId, Party, Signature, TransactionId};

/// Signature scheme used by every node. Real asymmetric crypto can be
/// plugged in behind this trait.
pub trait SignatureScheme: Send + Sync {
    fn sign(&self, party: Party, tx_id: &TransactionId) -> Signature;
    fn verify(&self, party: Party, tx_id: &TransactionId, signature: &Signature) -> bool;
}

/// Content-hash signatures: `sha256(party || tx_id)`. Not secure; the
/// network simulates honest participants.
#[derive(Clone, Copy, Debug, Default)]
pub struct DigestSignatures;

impl DigestSignatures {
    fn digest(party: Party, tx_id: &TransactionId) -> Signature {
        let mut h = Sha256::new();
        h.update(b"mts/sig/v1");
        match party {
            Party::Account(id) => {
                h.update([0u8]);
                h.update(id.0.to_be_bytes());
            }
            Party::Node(node) => {
                h.update([1u8]);
                h.update(node_tag(node).to_be_bytes());
            }
        }
        h.update(tx_id.0);
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&h.finalize());
        Signature(out)
    }
}

fn node_tag(node: NodeId) -> u64 {
    match node {
        NodeId::HmrcCwp => 1,
        NodeId::BuyerCwp => 2,
        NodeId::SellerCwp => 3,
        NodeId::LegalCwp => 4,
        NodeId::Notary => 5,
    }
}

impl SignatureScheme for DigestSignatures {
    fn sign(&self, party: Party, tx_id: &TransactionId) -> Signature {
        Self::digest(party, tx_id)
    }

    fn verify(&self, party: Party, tx_id: &TransactionId, signature: &Signature) -> bool {
        Self::digest(party, tx_id) == *signature
    }
}

/// Ed25519 with one key pair per party, derived from a seed. Costs what a
/// real deployment's signing and verification cost.
pub struct Ed25519Signatures {
    seed: [u8; 32],
    keys: DashMap<Party, SigningKey>,
}

impl Ed25519Signatures {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"mts/ed25519/seed");
        h.update(seed.to_be_bytes());
        Self {
            seed: h.finalize().into(),
            keys: DashMap::new(),
        }
    }

    fn key(&self, party: Party) -> SigningKey {
        self.keys
            .entry(party)
            .or_insert_with(|| {
                let mut h = Sha256::new();
                h.update(self.seed);
                match party {
                    Party::Account(id) => {
                        h.update([0u8]);
                        h.update(id.0.to_be_bytes());
                    }
                    Party::Node(node) => {
                        h.update([1u8]);
                        h.update(node_tag(node).to_be_bytes());
                    }
                }
                SigningKey::from_bytes(&h.finalize().into())
            })
            .clone()
    }
}

impl std::fmt::Debug for Ed25519Signatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Ed25519Signatures({} keys)", self.keys.len())
    }
}

impl SignatureScheme for Ed25519Signatures {
    fn sign(&self, party: Party, tx_id: &TransactionId) -> Signature {
        Signature(self.key(party).sign(&tx_id.0).to_bytes())
    }

    fn verify(&self, party: Party, tx_id: &TransactionId, signature: &Signature) -> bool {
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        self.key(party).verifying_key().verify(&tx_id.0, &sig).is_ok()
    }
}
