//! Load generation and metrics for throughput/latency sweeps.
//!
//! Each repetition boots a fresh concurrent network, issues `tx` invoices
//! from `cl` clients on the seller node, then pays them from `cl` clients
//! on the buyer node. Latency is submission to notary commit.

use std::fs::OpenOptions;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{ContractRules, InvoiceAmounts, VatRateTable};
use crate::flows::{FlowRequest, FlowResult, GovAccounts};
use crate::ledger::{AccountKind, AccountRef, GoodsClass, ItemLine, LedgerError, MoneyKind, NodeId};
use crate::netsim::{ConcurrentNetwork, LatencyModel, NetError, NetworkConfig, SignatureKind};

pub const MIN_CLIENTS: usize = 10;
pub const MAX_CLIENTS: usize = 100;
pub const MIN_VOL: usize = 10;
pub const MAX_VOL: usize = 100;
pub const MAX_TX: usize = 10_000;

/// How long a single flow may stay unresolved before the run is abandoned.
const FLOW_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration violation: {0}")]
    ConfigViolation(String),
    #[error("vol must be at least 1, got {0}")]
    InvalidVol(usize),
    #[error("no timing records")]
    EmptyRecords,
    #[error("corrupt record: notarized {notarized_at} before submitted {submitted_at}")]
    CorruptRecord { submitted_at: u64, notarized_at: u64 },
    #[error("{0} flows did not resolve")]
    IncompleteRun(usize),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Issue,
    Pay,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Phase::Issue => "issue",
            Phase::Pay => "pay",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSelection {
    Issue,
    Pay,
    Both,
}

impl PhaseSelection {
    pub fn includes(self, phase: Phase) -> bool {
        matches!(
            (self, phase),
            (PhaseSelection::Both, _)
                | (PhaseSelection::Issue, Phase::Issue)
                | (PhaseSelection::Pay, Phase::Pay)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub tx: usize,
    pub vol: usize,
    pub clients: usize,
    pub split: bool,
    pub phase: PhaseSelection,
    pub repetitions: usize,
    pub seed: u64,
    /// Leave the first repetition out of the aggregate.
    pub discard_warmup: bool,
    pub workers_per_node: Option<usize>,
    pub latency: LatencyModel,
    pub signatures: SignatureKind,
}

impl BenchConfig {
    pub fn new(tx: usize, vol: usize, clients: usize, split: bool) -> Self {
        Self {
            tx,
            vol,
            clients,
            split,
            phase: PhaseSelection::Both,
            repetitions: 10,
            seed: 0,
            discard_warmup: true,
            workers_per_node: None,
            latency: LatencyModel::default(),
            signatures: SignatureKind::Ed25519,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::ConfigViolation(m));
        if !(MIN_CLIENTS..=MAX_CLIENTS).contains(&self.clients) {
            return fail(format!("clients must be in {MIN_CLIENTS}..={MAX_CLIENTS}, got {}", self.clients));
        }
        if !(MIN_VOL..=MAX_VOL).contains(&self.vol) {
            return fail(format!("vol must be in {MIN_VOL}..={MAX_VOL}, got {}", self.vol));
        }
        if self.tx == 0 || self.tx > MAX_TX {
            return fail(format!("tx must be in 1..={MAX_TX}, got {}", self.tx));
        }
        if !self.tx.is_multiple_of(self.clients) {
            return fail(format!("tx {} is not divisible by clients {}", self.tx, self.clients));
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        Ok(())
    }

    pub fn per_client(&self) -> usize {
        self.tx / self.clients
    }
}

/// `vol` random lines over all seven classes, rated from `table`.
pub fn gen_shopping_list(
    vol: usize,
    table: &VatRateTable,
    rng: &mut impl Rng,
) -> Result<Vec<ItemLine>, HarnessError> {
    if vol < 1 {
        return Err(HarnessError::InvalidVol(vol));
    }
    Ok((0..vol)
        .map(|_| {
            let item = GoodsClass::ALL[rng.gen_range(0..GoodsClass::ALL.len())];
            ItemLine::new(item, rng.gen_range(100..=10_000), rng.gen_range(1..=5), table.rate(item))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub phase: Phase,
    pub submitted_at: u64,
    pub notarized_at: Option<u64>,
    pub completed_at: u64,
}

impl TxRecord {
    pub fn from_result(phase: Phase, r: &FlowResult) -> Self {
        Self {
            phase,
            submitted_at: r.submitted_at,
            notarized_at: if r.is_ok() { r.notarized_at } else { None },
            completed_at: r.completed_at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub successes: usize,
    pub rejected: usize,
    pub throughput_tps: f64,
    pub latency_mean_s: f64,
    pub latency_median_s: f64,
    pub latency_p95_s: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn compute_metrics(records: &[TxRecord]) -> Result<MetricsReport, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let mut latencies = Vec::with_capacity(records.len());
    let mut first_submit = u64::MAX;
    let mut last_commit = 0u64;
    for r in records {
        let Some(n) = r.notarized_at else { continue };
        if n < r.submitted_at {
            return Err(HarnessError::CorruptRecord {
                submitted_at: r.submitted_at,
                notarized_at: n,
            });
        }
        latencies.push((n - r.submitted_at) as f64 / 1e6);
        first_submit = first_submit.min(r.submitted_at);
        last_commit = last_commit.max(n);
    }
    let successes = latencies.len();
    let rejected = records.len() - successes;
    if successes == 0 {
        return Ok(MetricsReport {
            successes,
            rejected,
            throughput_tps: 0.0,
            latency_mean_s: 0.0,
            latency_median_s: 0.0,
            latency_p95_s: 0.0,
        });
    }
    // A zero span only happens with a coarse clock; count it as one tick.
    let span = (last_commit - first_submit).max(1) as f64 / 1e6;
    latencies.sort_by(f64::total_cmp);
    Ok(MetricsReport {
        successes,
        rejected,
        throughput_tps: successes as f64 / span,
        latency_mean_s: latencies.iter().sum::<f64>() / successes as f64,
        latency_median_s: percentile(&latencies, 0.5),
        latency_p95_s: percentile(&latencies, 0.95),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRun {
    pub phase: Phase,
    /// 1-based repetition number.
    pub run: usize,
    pub metrics: MetricsReport,
    pub records: Vec<TxRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub phase: Phase,
    pub runs_used: usize,
    pub throughput_tps: f64,
    pub latency_mean_s: f64,
    pub latency_median_s: f64,
    pub latency_p95_s: f64,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: BenchConfig,
    pub runs: Vec<PhaseRun>,
    pub aggregates: Vec<Aggregate>,
}

impl ScenarioReport {
    pub fn aggregate(&self, phase: Phase) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.phase == phase)
    }

    pub fn rejected(&self) -> usize {
        self.runs.iter().map(|r| r.metrics.rejected).sum()
    }
}

fn aggregate(phase: Phase, runs: &[&PhaseRun], discard_warmup: bool) -> Aggregate {
    let used: Vec<&&PhaseRun> = if discard_warmup && runs.len() > 1 {
        runs.iter().skip(1).collect()
    } else {
        runs.iter().collect()
    };
    let n = used.len().max(1) as f64;
    let mean = |f: fn(&MetricsReport) -> f64| used.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    Aggregate {
        phase,
        runs_used: used.len(),
        throughput_tps: mean(|m| m.throughput_tps),
        latency_mean_s: mean(|m| m.latency_mean_s),
        latency_median_s: mean(|m| m.latency_median_s),
        latency_p95_s: mean(|m| m.latency_p95_s),
        rejected: runs.iter().map(|r| r.metrics.rejected).sum(),
    }
}

struct ClientSetup {
    buyer: AccountRef,
    seller: AccountRef,
    lists: Vec<Vec<ItemLine>>,
}

fn setup_clients(
    net: &ConcurrentNetwork,
    config: &BenchConfig,
    rules: &ContractRules,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ClientSetup>, HarnessError> {
    let ledger = net.ledger();
    GovAccounts::create(ledger).map_err(|e| HarnessError::Setup(e.to_string()))?;
    let mut clients = Vec::with_capacity(config.clients);
    for c in 0..config.clients {
        let buyer = ledger.create_account(NodeId::BuyerCwp, &format!("buyer-{c}"), AccountKind::Consumer)?;
        let seller = ledger.create_account(NodeId::SellerCwp, &format!("seller-{c}"), AccountKind::Seller)?;
        let lists = (0..config.per_client())
            .map(|_| gen_shopping_list(config.vol, &rules.vat, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let mut funding = 0i64;
        for l in &lists {
            funding += InvoiceAmounts::compute(l, &rules.vat)
                .map_err(|e| HarnessError::Setup(e.to_string()))?
                .total;
        }
        ledger.deposit(buyer.id, MoneyKind::Current, funding)?;
        clients.push(ClientSetup { buyer, seller, lists });
    }
    Ok(clients)
}

/// Every client submits its whole batch, then waits for all of it.
fn drive<F>(
    net: &ConcurrentNetwork,
    node: NodeId,
    phase: Phase,
    batches: Vec<Vec<FlowRequest>>,
    keep: F,
) -> Result<Vec<(TxRecord, FlowResult)>, HarnessError>
where
    F: Fn(&FlowResult) -> bool + Sync,
{
    // Thread start-up stays outside the measured window.
    let start = std::sync::Barrier::new(batches.len());
    let per_client: Vec<Result<Vec<(TxRecord, FlowResult)>, HarnessError>> =
        std::thread::scope(|s| {
            let joins: Vec<_> = batches
                .into_iter()
                .map(|batch| {
                    let client = net.client(node);
                    let keep = &keep;
                    let start = &start;
                    s.spawn(move || {
                        start.wait();
                        let handles = batch
                            .into_iter()
                            .map(|req| net.submit(&client, req))
                            .collect::<Result<Vec<_>, _>>()?;
                        let mut out = Vec::with_capacity(handles.len());
                        let mut unresolved = 0;
                        for h in handles {
                            match h.wait_timeout(FLOW_TIMEOUT) {
                                Some(r) => {
                                    let _ = keep(&r);
                                    out.push((TxRecord::from_result(phase, &r), r));
                                }
                                None => unresolved += 1,
                            }
                        }
                        if unresolved > 0 {
                            return Err(HarnessError::IncompleteRun(unresolved));
                        }
                        Ok(out)
                    })
                })
                .collect();
            joins
                .into_iter()
                .map(|j| j.join().expect("client thread panicked"))
                .collect()
        });
    let mut merged = Vec::new();
    for batch in per_client {
        merged.extend(batch?);
    }
    Ok(merged)
}

fn run_once(config: &BenchConfig, rep: usize) -> Result<Vec<PhaseRun>, HarnessError> {
    let rules = ContractRules::default().with_split(config.split);
    let mut net_config = NetworkConfig::concurrent().with_rules(rules.clone());
    net_config.seed = config.seed.wrapping_add(rep as u64);
    net_config.latency = config.latency;
    net_config.workers_per_node = config.workers_per_node;
    net_config.signatures = config.signatures;
    let net = ConcurrentNetwork::start(&net_config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(rep as u64));
    let clients = setup_clients(&net, config, &rules, &mut rng)?;

    let issue_batches = clients
        .iter()
        .map(|c| {
            c.lists
                .iter()
                .map(|l| FlowRequest::issue_invoice(&c.seller, &c.buyer, l.clone(), MoneyKind::Current))
                .collect()
        })
        .collect();
    let issued = drive(&net, NodeId::SellerCwp, Phase::Issue, issue_batches, |_| true)?;
    net.wait_idle();

    let mut runs = Vec::new();
    if config.phase.includes(Phase::Issue) {
        let records: Vec<TxRecord> = issued.iter().map(|(r, _)| *r).collect();
        runs.push(PhaseRun {
            phase: Phase::Issue,
            run: rep + 1,
            metrics: compute_metrics(&records)?,
            records,
        });
    }
    if !config.phase.includes(Phase::Pay) {
        return Ok(runs);
    }

    // Issue results come back grouped by client in submission order.
    let per_client = config.per_client();
    let pay_batches = clients
        .iter()
        .enumerate()
        .map(|(i, c)| {
            issued[i * per_client..(i + 1) * per_client]
                .iter()
                .filter_map(|(_, r)| r.invoice_id())
                .map(|id| FlowRequest::pay_invoice(&c.buyer, id))
                .collect()
        })
        .collect();
    let paid = drive(&net, NodeId::BuyerCwp, Phase::Pay, pay_batches, |_| true)?;
    net.wait_idle();
    let mut records: Vec<TxRecord> = paid.iter().map(|(r, _)| *r).collect();
    // Invoices that never got issued count against the pay phase too.
    let missing = issued.iter().filter(|(_, r)| r.invoice_id().is_none()).count();
    records.extend((0..missing).map(|_| TxRecord {
        phase: Phase::Pay,
        submitted_at: 0,
        notarized_at: None,
        completed_at: 0,
    }));
    runs.push(PhaseRun {
        phase: Phase::Pay,
        run: rep + 1,
        metrics: compute_metrics(&records)?,
        records,
    });
    Ok(runs)
}

pub fn run_scenario(config: &BenchConfig) -> Result<ScenarioReport, HarnessError> {
    config.validate()?;
    let mut runs = Vec::new();
    for rep in 0..config.repetitions {
        runs.extend(run_once(config, rep)?);
    }
    Ok(report(config, runs))
}

/// Runs repetition r of every config before repetition r + 1 of any,
/// so slow drift in machine speed lands on all points of a sweep alike.
pub fn run_interleaved(configs: &[BenchConfig]) -> Result<Vec<ScenarioReport>, HarnessError> {
    for c in configs {
        c.validate()?;
    }
    let rounds = configs.iter().map(|c| c.repetitions).max().unwrap_or(0);
    let mut runs: Vec<Vec<PhaseRun>> = vec![Vec::new(); configs.len()];
    for rep in 0..rounds {
        for (c, out) in configs.iter().zip(&mut runs) {
            if rep < c.repetitions {
                out.extend(run_once(c, rep)?);
            }
        }
    }
    Ok(configs.iter().zip(runs).map(|(c, r)| report(c, r)).collect())
}

fn report(config: &BenchConfig, runs: Vec<PhaseRun>) -> ScenarioReport {
    let aggregates = [Phase::Issue, Phase::Pay]
        .into_iter()
        .filter_map(|phase| {
            let of_phase: Vec<&PhaseRun> = runs.iter().filter(|r| r.phase == phase).collect();
            (!of_phase.is_empty()).then(|| aggregate(phase, &of_phase, config.discard_warmup))
        })
        .collect();
    ScenarioReport {
        config: config.clone(),
        runs,
        aggregates,
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "phase",
    "split",
    "tx",
    "vol",
    "cl",
    "run",
    "throughput_tps",
    "latency_mean_s",
    "latency_p95_s",
    "rejected",
];

/// One CSV line. `run` is the repetition number or `mean` for the aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub phase: Phase,
    pub split: bool,
    pub tx: usize,
    pub vol: usize,
    pub cl: usize,
    pub run: String,
    pub throughput_tps: f64,
    pub latency_mean_s: f64,
    pub latency_p95_s: f64,
    pub rejected: usize,
}

pub fn csv_rows(report: &ScenarioReport) -> Vec<CsvRow> {
    let c = &report.config;
    let row = |phase, run: String, tps, mean, p95, rejected| CsvRow {
        phase,
        split: c.split,
        tx: c.tx,
        vol: c.vol,
        cl: c.clients,
        run,
        throughput_tps: tps,
        latency_mean_s: mean,
        latency_p95_s: p95,
        rejected,
    };
    let mut rows = Vec::new();
    for agg in &report.aggregates {
        for r in report.runs.iter().filter(|r| r.phase == agg.phase) {
            let m = &r.metrics;
            rows.push(row(r.phase, r.run.to_string(), m.throughput_tps, m.latency_mean_s, m.latency_p95_s, m.rejected));
        }
        rows.push(row(agg.phase, "mean".into(), agg.throughput_tps, agg.latency_mean_s, agg.latency_p95_s, agg.rejected));
    }
    rows
}

fn write_rows(path: &Path, rows: &[CsvRow], append: bool) -> Result<(), HarnessError> {
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)?;
    let needs_header = file.metadata()?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if needs_header {
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a fresh CSV file.
pub fn export_csv(report: &ScenarioReport, path: &Path) -> Result<(), HarnessError> {
    write_rows(path, &csv_rows(report), false)
}

/// Appends to a CSV file, writing the header only if the file is empty.
pub fn append_csv(report: &ScenarioReport, path: &Path) -> Result<(), HarnessError> {
    write_rows(path, &csv_rows(report), true)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// JSON array with the same fields as the CSV.
pub fn export_json(reports: &[ScenarioReport], path: &Path) -> Result<(), HarnessError> {
    let rows: Vec<CsvRow> = reports.iter().flat_map(csv_rows).collect();
    std::fs::write(path, serde_json::to_string_pretty(&rows)?)?;
    Ok(())
}

/// Least-squares line through the points: `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}

/// (max − min) / mean.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        0.0
    } else {
        (max - min) / mean
    }
}
