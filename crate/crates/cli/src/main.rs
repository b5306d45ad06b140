use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mts_core::contracts::{ContractRules, InvoiceAmounts};
use mts_core::feasibility::{run_feasibility, FeasibilityOptions};
use mts_core::flows::{FlowRequest, GovAccounts};
use mts_core::harness::{
    append_csv, export_json, run_interleaved, BenchConfig, HarnessError, PhaseSelection,
};
use mts_core::ledger::{AccountKind, AccountRef, Ledger, MoneyKind, NodeId};
use mts_core::netsim::{DeterministicNetwork, LatencyModel, NetworkConfig};
use mts_core::shopping::{listing, parse_shopping_list_file, IngestError, LISTING_1, LISTING_2};

const CONFIG_ENV: &str = "MTS_CONFIG";

const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "mts", version, about = "VAT split-payment ledger simulator")]
struct Cli {
    /// Contract rules file (VAT table, allowed goods, split flag).
    /// Falls back to $MTS_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the thirteen feasibility assertions and print the result table.
    Feasibility {
        /// Also print the ledger event log (NDJSON).
        #[arg(long)]
        events: bool,
    },
    /// Run throughput/latency sweeps and write CSV.
    Bench(BenchArgs),
    /// Walk through the two sample shopping lists step by step.
    Demo,
    /// Parse a shopping-list JSON file and show computed amounts.
    Ingest {
        path: PathBuf,
        /// Treat rate mismatches as errors.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhaseArg {
    Issue,
    Pay,
    Both,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    /// Invoices per run: `N`, `a,b,c` or `a..b` with --step.
    #[arg(long, default_value = "1000")]
    tx: String,
    /// Items per invoice.
    #[arg(long, default_value = "10")]
    vol: String,
    /// Concurrent clients.
    #[arg(long, default_value = "10")]
    clients: String,
    /// Increment for `a..b` ranges.
    #[arg(long, default_value_t = 10)]
    step: usize,
    /// `on`, `off` or `on,off`.
    #[arg(long, default_value = "on")]
    split: String,
    #[arg(long, value_enum, default_value = "both")]
    phase: PhaseArg,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the first repetition in the aggregate.
    #[arg(long)]
    keep_warmup: bool,
    /// Worker threads per node.
    #[arg(long)]
    workers: Option<usize>,
    /// Constant per-message delay in milliseconds.
    #[arg(long, default_value_t = 0.0)]
    latency_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    jitter_ms: f64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    /// Also write the rows as a JSON array.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_factor(spec: &str, step: usize) -> Result<Vec<usize>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("not a number: {s:?}"))
    };
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if step == 0 || a > b {
            return Err(format!("bad range {spec:?} with step {step}"));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    spec.split(',').map(num).collect()
}

fn parse_split(spec: &str) -> Result<Vec<bool>, String> {
    spec.split(',')
        .map(|s| match s.trim() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(format!("split must be on or off, got {other:?}")),
        })
        .collect()
}

fn load_rules(cli_path: Option<&Path>) -> Result<ContractRules, String> {
    let path = cli_path
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        None => Ok(ContractRules::default()),
        Some(p) => ContractRules::load(&p).map_err(|e| format!("{}: {e}", p.display())),
    }
}

fn cmd_feasibility(rules: ContractRules, events: bool) -> u8 {
    let opts = FeasibilityOptions {
        rules,
        ..FeasibilityOptions::default()
    };
    match run_feasibility(&opts) {
        Ok(report) => {
            print!("{}", report.render_table());
            if events {
                print!("{}", report.event_log);
            }
            match report.first_failure() {
                None => EXIT_OK,
                Some(f) => {
                    eprintln!("first failing assertion: {} ({})", f.id, f.description);
                    EXIT_FAILED
                }
            }
        }
        Err(e) => {
            eprintln!("feasibility run aborted: {e}");
            EXIT_FAILED
        }
    }
}

fn cmd_bench(args: &BenchArgs) -> u8 {
    let grid = (|| {
        Ok::<_, String>((
            parse_factor(&args.tx, args.step)?,
            parse_factor(&args.vol, args.step)?,
            parse_factor(&args.clients, args.step)?,
            parse_split(&args.split)?,
        ))
    })();
    let (txs, vols, cls, splits) = match grid {
        Ok(g) => g,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut configs = Vec::new();
    for &split in &splits {
        for &tx in &txs {
            for &vol in &vols {
                for &cl in &cls {
                    let mut c = BenchConfig::new(tx, vol, cl, split);
                    c.phase = match args.phase {
                        PhaseArg::Issue => PhaseSelection::Issue,
                        PhaseArg::Pay => PhaseSelection::Pay,
                        PhaseArg::Both => PhaseSelection::Both,
                    };
                    c.repetitions = args.reps;
                    c.seed = args.seed;
                    c.discard_warmup = !args.keep_warmup;
                    c.workers_per_node = args.workers;
                    c.latency = LatencyModel {
                        constant_ms: args.latency_ms,
                        jitter_ms: args.jitter_ms,
                    };
                    if let Err(e) = c.validate() {
                        eprintln!("{e}");
                        return EXIT_CONFIG;
                    }
                    configs.push(c);
                }
            }
        }
    }
    if let Err(e) = std::fs::File::create(&args.out) {
        eprintln!("cannot write {}: {e}", args.out.display());
        return EXIT_CONFIG;
    }
    println!("split tx    vol cl  phase  tps       mean_s    p95_s     rejected");
    let reports = match run_interleaved(&configs) {
        Ok(r) => r,
        Err(e @ HarnessError::ConfigViolation(_)) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            return EXIT_FAILED;
        }
    };
    let mut code = EXIT_OK;
    for report in &reports {
        let c = &report.config;
        for a in &report.aggregates {
            println!(
                "{:<5} {:<5} {:<3} {:<3} {:<6} {:<9.2} {:<9.4} {:<9.4} {}",
                if c.split { "on" } else { "off" },
                c.tx,
                c.vol,
                c.clients,
                a.phase,
                a.throughput_tps,
                a.latency_mean_s,
                a.latency_p95_s,
                a.rejected
            );
            if a.rejected > 0 {
                code = EXIT_FAILED;
            }
        }
        if let Err(e) = append_csv(report, &args.out) {
            eprintln!("cannot write {}: {e}", args.out.display());
            return EXIT_FAILED;
        }
    }
    if let Some(path) = &args.json {
        if let Err(e) = export_json(&reports, path) {
            eprintln!("cannot write {}: {e}", path.display());
            return EXIT_FAILED;
        }
    }
    println!("wrote {}", args.out.display());
    code
}

fn show_balances(ledger: &Ledger, accounts: &[&AccountRef]) {
    for a in accounts {
        let b = ledger.balances(a.id).unwrap_or_default();
        println!("    {:<12} current {:>8}  token {:>8}", a.display_name, b.current, b.token);
    }
}

fn cmd_demo(rules: ContractRules) -> u8 {
    let run = || -> Result<(), String> {
        let config = NetworkConfig::deterministic(1).with_rules(rules.clone());
        let mut net = DeterministicNetwork::start(&config).map_err(|e| e.to_string())?;
        let ledger = net.ledger().clone();
        let err = |e: &dyn std::fmt::Display| e.to_string();
        let gov = GovAccounts::create(&ledger).map_err(|e| err(&e))?;
        let alice = ledger
            .create_account(NodeId::BuyerCwp, "Alice", AccountKind::Consumer)
            .map_err(|e| err(&e))?;
        let mega = ledger
            .create_account(NodeId::SellerCwp, "MegaCompany", AccountKind::Seller)
            .map_err(|e| err(&e))?;
        ledger
            .deposit(alice.id, MoneyKind::Current, 100_000)
            .map_err(|e| err(&e))?;
        let people = [&alice, &mega, &gov.vat_payments];
        println!("Alice is funded with 100000 in current money");
        show_balances(&ledger, &people);

        let seller_client = net.client(NodeId::SellerCwp);
        let buyer_client = net.client(NodeId::BuyerCwp);
        let hmrc_client = net.client(NodeId::HmrcCwp);

        for (name, json, money) in [
            ("first list", LISTING_1, MoneyKind::Current),
            ("second list", LISTING_2, MoneyKind::Token),
        ] {
            let doc = listing(json);
            let lines = doc.normalized_lines(&rules.vat);
            let amounts = InvoiceAmounts::compute(&lines, &rules.vat).map_err(|e| err(&e))?;
            if money == MoneyKind::Token {
                let r = net
                    .execute(&hmrc_client, FlowRequest::issue_tokens(&gov.vat_payments, &alice, 100_000))
                    .map_err(|e| err(&e))?;
                println!("\nHMRC issues 100000 tokens to Alice: {}", outcome(&r.outcome.map(|_| ())));
                show_balances(&ledger, &people);
            }
            println!(
                "\nMegaCompany invoices Alice for the {name} ({} lines): net {} vat {} total {}",
                lines.len(),
                amounts.net,
                amounts.vat,
                amounts.total
            );
            let issued = net
                .execute(&seller_client, FlowRequest::issue_invoice(&mega, &alice, lines, money))
                .map_err(|e| err(&e))?;
            let Some(id) = issued.invoice_id() else {
                println!("    issue failed: {}", outcome(&issued.outcome.map(|_| ())));
                continue;
            };
            println!("    invoice {id} committed in tx {}", issued.outcome.as_ref().map(|o| o.tx_id().short()).unwrap_or_default());
            let req = match money {
                MoneyKind::Current => FlowRequest::pay_invoice(&alice, id),
                MoneyKind::Token => FlowRequest::pay_invoice_with_tokens(&alice, id),
            };
            let paid = net.execute(&buyer_client, req).map_err(|e| err(&e))?;
            println!("    Alice pays with {money:?} money: {}", outcome(&paid.outcome.map(|_| ())));
            show_balances(&ledger, &people);
        }
        println!("\n{} transactions committed", ledger.committed_count());
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("demo failed: {e}");
            EXIT_FAILED
        }
    }
}

fn outcome<E: std::fmt::Display>(r: &Result<(), E>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => format!("rejected ({e})"),
    }
}

fn cmd_ingest(rules: ContractRules, path: &Path, strict: bool) -> u8 {
    match parse_shopping_list_file(path, &rules.vat, strict) {
        Ok(ingested) => {
            for w in &ingested.warnings {
                eprintln!("warning: {w}");
            }
            for (i, doc) in ingested.documents.iter().enumerate() {
                let lines = doc.normalized_lines(&rules.vat);
                match InvoiceAmounts::compute(&lines, &rules.vat) {
                    Ok(a) => println!(
                        "document {i}: seller {} buyer {} lines {} net {} vat {} total {} (declared amount {})",
                        doc.who_am_i,
                        doc.buyer,
                        lines.len(),
                        a.net,
                        a.vat,
                        a.total,
                        doc.amount
                    ),
                    Err(e) => {
                        eprintln!("document {i}: {e}");
                        return EXIT_CONFIG;
                    }
                }
            }
            EXIT_OK
        }
        Err(e @ (IngestError::Parse { .. } | IngestError::RateMismatch(_) | IngestError::Io(_))) => {
            eprintln!("{}: {e}", path.display());
            EXIT_CONFIG
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rules = match load_rules(cli.config.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let code = match &cli.command {
        Command::Feasibility { events } => cmd_feasibility(rules, *events),
        Command::Bench(args) => cmd_bench(args),
        Command::Demo => cmd_demo(rules),
        Command::Ingest { path, strict } => cmd_ingest(rules, path, *strict),
    };
    ExitCode::from(code)
}
