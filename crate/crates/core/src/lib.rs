//! Permissioned ledger engine for VAT split payments, programmable-money
//! tokens and single-use smart warrants, with a simulated multi-node
//! network and a benchmark harness.

pub mod clock;
pub mod contracts;
pub mod ledger;
pub mod flows;
pub mod netsim;
pub mod shopping;
pub mod feasibility;
pub mod harness;
