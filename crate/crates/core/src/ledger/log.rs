//! Append-only event log, persistable as newline-delimited JSON.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::types::{AccountRef, MoneyKind, SignedTransaction, Timestamp};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerEvent {
    Account {
        account: AccountRef,
    },
    Deposit {
        account: AccountRef,
        money: MoneyKind,
        amount: i64,
        timestamp: Timestamp,
    },
    Transaction(Arc<SignedTransaction>),
}

pub fn write_ndjson<W: Write>(mut out: W, events: &[LedgerEvent]) -> std::io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_ndjson(events: &[LedgerEvent]) -> String {
    let mut buf = Vec::new();
    write_ndjson(&mut buf, events).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_ndjson<R: BufRead>(input: R) -> std::io::Result<Vec<LedgerEvent>> {
    let mut events = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {}: {e}", lineno + 1),
            )
        })?;
        events.push(event);
    }
    Ok(events)
}
