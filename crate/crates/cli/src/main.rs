//! `mcoin`: keys, transactions, chain directories and simulations.
//!
//! Successful commands print canonical JSON on stdout. Failures print a
//! message on stderr and the stable error code as the last stdout line, then
//! exit with status 1 (2 for usage errors).

mod error;
mod keyfile;
mod txspec;

use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mcoin_core::chain::{accounts_json, supply_json};
use mcoin_core::codec::CodecError;
use mcoin_core::{Block, Chain, ChainStore, GenesisConfig, KeyPair, Transaction};
use mcoin_simnet::{run_scenario, SimScenario};
use serde_json::{json, Value};

use error::CliError;
use keyfile::KeyFile;
use txspec::TxSpec;

#[derive(Parser)]
#[command(name = "mcoin", version, about = "Managed-cryptocurrency node tools")]
struct Cli {
    /// Chain directory used by `tx build`, `validate` and `chain`.
    #[arg(long, global = true, default_value = "chain")]
    chain_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and write it to a key file.
    Keygen {
        /// Derive the key from an integer seed instead of the system RNG.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transaction tools.
    Tx {
        #[command(subcommand)]
        command: TxCommand,
    },
    /// Check a transaction or block (hex, or stdin) against the chain tip.
    Validate { hex: Option<String> },
    /// Chain directory operations.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
    /// Simulation runs.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
}

#[derive(Subcommand)]
enum TxCommand {
    /// Compile a JSON transaction spec and check it against the tip.
    Build {
        spec: PathBuf,
        /// Also write the transaction hex to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the transaction even when the pre-flight check rejects it.
        #[arg(long)]
        allow_invalid: bool,
    },
}

#[derive(Subcommand)]
enum ChainCommand {
    /// Create a chain directory from a genesis config (JSON).
    Init { genesis: PathBuf },
    /// Mine a block on the tip from the given transactions and append it.
    Mine {
        /// Key file of the miner, which must hold the U role.
        #[arg(long)]
        miner: PathBuf,
        /// Transaction hex; repeatable.
        #[arg(long = "tx")]
        txs: Vec<String>,
        /// File with one transaction hex per line.
        #[arg(long)]
        tx_file: Option<PathBuf>,
        /// Defaults to the tip timestamp plus one.
        #[arg(long)]
        timestamp: Option<u32>,
        /// Also write the block hex to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a block (hex, or stdin) and append it.
    Apply { hex: Option<String> },
    /// Print part of the tip state.
    Inspect { what: Inspect },
}

#[derive(Clone, Copy, ValueEnum)]
enum Inspect {
    Accounts,
    Policy,
    Utxo,
    Supply,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run a scenario file (TOML).
    Run {
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here and print a summary instead.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            println!("UsageError");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(value) => {
            print!("{}", canonical(&value));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn canonical(value: &Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("json value");
    out.push('\n');
    out
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let dir = cli.chain_dir.as_path();
    match cli.command {
        Command::Keygen { seed, label, out } => keygen(seed, label, &out),
        Command::Tx { command: TxCommand::Build { spec, out, allow_invalid } } => {
            tx_build(dir, &spec, out.as_deref(), allow_invalid)
        }
        Command::Validate { hex } => validate(dir, &read_hex(hex)?),
        Command::Chain { command } => match command {
            ChainCommand::Init { genesis } => chain_init(dir, &genesis),
            ChainCommand::Mine { miner, txs, tx_file, timestamp, out } => {
                chain_mine(dir, &miner, txs, tx_file.as_deref(), timestamp, out.as_deref())
            }
            ChainCommand::Apply { hex } => chain_apply(dir, &read_hex(hex)?),
            ChainCommand::Inspect { what } => chain_inspect(dir, what),
        },
        Command::Sim { command: SimCommand::Run { scenario, seed, out } } => sim_run(&scenario, seed, out.as_deref()),
    }
}

/// The positional argument, or stdin when it is absent or `-`.
fn read_hex(arg: Option<String>) -> Result<String, CliError> {
    match arg {
        Some(h) if h != "-" => Ok(h.trim().to_string()),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(CliError::io("<stdin>"))?;
            Ok(s.trim().to_string())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

fn keygen(seed: Option<u64>, label: Option<String>, out: &Path) -> Result<Value, CliError> {
    let key = seed.map_or_else(KeyPair::random, KeyPair::from_seed);
    let file = KeyFile::new(&key, label);
    file.write(out)?;
    Ok(json!({
        "scheme": file.scheme,
        "public": file.public,
        "label": file.label,
        "path": out.display().to_string(),
    }))
}

fn load_chain(dir: &Path) -> Result<Chain, CliError> {
    Ok(ChainStore::open(dir)?.load()?)
}

fn tx_build(dir: &Path, spec_path: &Path, out: Option<&Path>, allow_invalid: bool) -> Result<Value, CliError> {
    let chain = load_chain(dir)?;
    let (spec, base) = TxSpec::load(spec_path)?;
    let tx = spec.compile(&base, &chain)?;
    let verdict = match chain.validate_tx(&tx) {
        Ok(_) => "valid",
        Err(e) if allow_invalid => e.code(),
        Err(e) => return Err(e.into()),
    };
    let hex = tx.to_hex();
    if let Some(path) = out {
        write_text(path, &format!("{hex}\n"))?;
    }
    Ok(json!({"hex": hex, "txid": tx.txid(), "verdict": verdict}))
}

fn validate(dir: &Path, hex: &str) -> Result<Value, CliError> {
    let decoded = match Transaction::from_hex(hex) {
        Ok(tx) => Ok(tx),
        Err(tx_err) => Err(Block::from_hex(hex).map_err(|block_err| match tx_err {
            // A wrong version is what a block looks like to the tx decoder.
            CodecError::BadVersion(_) => block_err,
            _ => tx_err,
        })?),
    };
    let mut chain = load_chain(dir)?;
    match decoded {
        Ok(tx) => {
            let outcome = chain.validate_tx(&tx)?;
            Ok(json!({
                "kind": "transaction",
                "valid": true,
                "txid": outcome.txid,
                "fee": outcome.fee.to_string(),
                "created": outcome.created.to_string(),
                "classification": outcome.classification,
            }))
        }
        Err(block) => {
            let applied = chain.apply_block(&block)?;
            Ok(json!({
                "kind": "block",
                "valid": true,
                "hash": applied.hash,
                "height": applied.height,
                "new_tip": applied.new_tip,
            }))
        }
    }
}

fn chain_init(dir: &Path, genesis: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(genesis).map_err(CliError::io(genesis))?;
    let config: GenesisConfig =
        serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("genesis config: {e}")))?;
    let store = ChainStore::init(dir, &config)?;
    let chain = store.load()?;
    Ok(json!({"genesis": chain.genesis_hash(), "tip": chain.tip(), "height": chain.height()}))
}

fn chain_mine(
    dir: &Path,
    miner: &Path,
    mut hexes: Vec<String>,
    tx_file: Option<&Path>,
    timestamp: Option<u32>,
    out: Option<&Path>,
) -> Result<Value, CliError> {
    let store = ChainStore::open_locked(dir)?;
    let mut chain = store.load()?;
    let key = KeyFile::load(miner)?;
    if let Some(path) = tx_file {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        hexes.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
    }
    let txs = hexes.iter().map(|h| Transaction::from_hex(h)).collect::<Result<Vec<_>, _>>()?;
    let tip = chain.entry(&chain.tip()).expect("tip indexed").block.header.timestamp;
    let block = chain.mine_block(&txs, &key, timestamp.unwrap_or(tip.saturating_add(1)))?;
    let applied = chain.apply_block(&block)?;
    store.append(&chain, &block)?;
    let hex = block.to_hex();
    if let Some(path) = out {
        write_text(path, &format!("{hex}\n"))?;
    }
    Ok(json!({
        "hash": applied.hash,
        "height": applied.height,
        "transactions": block.transactions.len(),
        "hex": hex,
    }))
}

fn chain_apply(dir: &Path, hex: &str) -> Result<Value, CliError> {
    let store = ChainStore::open_locked(dir)?;
    let mut chain = store.load()?;
    let block = Block::from_hex(hex)?;
    let applied = chain.apply_block(&block)?;
    if !applied.already_known {
        store.append(&chain, &block)?;
    }
    Ok(json!({
        "hash": applied.hash,
        "height": applied.height,
        "new_tip": applied.new_tip,
        "reorg": applied.reorg,
        "already_known": applied.already_known,
        "tip": chain.tip(),
    }))
}

fn chain_inspect(dir: &Path, what: Inspect) -> Result<Value, CliError> {
    let chain = load_chain(dir)?;
    let state = chain.tip_state();
    Ok(match what {
        Inspect::Accounts => json!({"height": state.height, "accounts": accounts_json(state)}),
        Inspect::Policy => json!({
            "height": state.height,
            "effective": state.policy.snapshot().0.to_vec(),
            "records": state.policy.all_records().collect::<Vec<_>>(),
        }),
        Inspect::Utxo => {
            let utxos: Vec<Value> = state
                .utxos()
                .map(|(op, u)| json!({"outpoint": op, "owner": u.owner, "amount": u.amount, "height": u.height}))
                .collect();
            json!({"height": state.height, "utxos": utxos})
        }
        Inspect::Supply => json!({"height": state.height, "supply": supply_json(state)}),
    })
}

fn sim_run(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Value, CliError> {
    let mut scenario = SimScenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = run_scenario(scenario)?;
    let text = report.to_json();
    let Some(out) = out else {
        return Ok(serde_json::from_str(&text).expect("report json"));
    };
    write_text(out, &text)?;
    Ok(json!({
        "report": out.display().to_string(),
        "seed": report.seed,
        "canonical_height": report.canonical.height,
        "branches": report.branches.len(),
        "stalls": report.stalls.len(),
        "supply_consistent": report.supply.consistent,
    }))
}
