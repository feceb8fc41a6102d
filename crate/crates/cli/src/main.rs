//! `treepin`: capacity reports, bounds, rate assignments, and protocol
//! simulation for tree-structured pairwise independent networks.
//!
//! Exit codes: 0 success, 2 config error, 3 capability refusal (size caps),
//! 4 internal invariant violation.

#![forbid(unsafe_code)]

mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use treepin_core::protocol::{SecrecyOptions, SeedMode, SeedModeUsed};
use treepin_core::{
    choose_lambda, exact_secrecy, reliability_and_comm, run_protocol, CapacityError, Edge,
    GraphError, ModelError, ProtocolConfig, ProtocolError, ReportOptions, DEFAULT_STATE_CAP,
};

use config::{Loaded, Network};
use report::{edge_value, emit, float, header, rate_vector_value, write_text};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input: exit 2.
    Config(String),
    /// The request exceeds a size cap or an unsupported case: exit 3.
    Refusal(String),
    /// A cross-check inside the library failed: exit 4.
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Refusal(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Refusal(msg) => write!(f, "refused: {msg}"),
            CliError::Internal(msg) => write!(f, "internal invariant violation: {msg}"),
        }
    }
}

impl From<CapacityError> for CliError {
    fn from(error: CapacityError) -> Self {
        match &error {
            CapacityError::TooManyNodesForLp { .. } => CliError::Refusal(error.to_string()),
            CapacityError::Graph(GraphError::TooManyNodes { .. }) => {
                CliError::Refusal(error.to_string())
            }
            CapacityError::Model(ModelError::StateSpaceTooLarge { .. }) => {
                CliError::Refusal(error.to_string())
            }
            CapacityError::InvariantViolated(_) => CliError::Internal(error.to_string()),
            _ => CliError::Config(error.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(error: ProtocolError) -> Self {
        match &error {
            ProtocolError::StateSpaceTooLarge { .. } => CliError::Refusal(error.to_string()),
            ProtocolError::Model(ModelError::StateSpaceTooLarge { .. }) => {
                CliError::Refusal(error.to_string())
            }
            ProtocolError::Graph(GraphError::TooManyNodes { .. }) => {
                CliError::Refusal(error.to_string())
            }
            ProtocolError::Capacity(inner) => CliError::from(inner.clone()),
            _ => CliError::Config(error.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "treepin",
    version,
    about = "Secret-key capacity and key-agreement simulation for tree pairwise independent networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form capacity report, optionally cross-checked by the LP oracle.
    Capacity {
        config: PathBuf,
        /// Also solve the omniscience LP and report the gap (m <= 8).
        #[arg(long)]
        verify_lp: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition upper bound and Steiner-packing lower bound at blocklength n.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the key-agreement protocol on simulated sources.
    Simulate {
        config: PathBuf,
        /// Also compute the exact statistical distance by enumeration.
        #[arg(long)]
        exact_secrecy: bool,
        /// Emit a CSV of (n, lambda, rate) for these blocklengths instead of
        /// running the protocol.
        #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
        sweep_n: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Omniscience rate assignment plus the subset feasibility check.
    Rates {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Capacity {
            config,
            verify_lp,
            out,
        } => cmd_capacity(&config, verify_lp, out.as_deref()),
        Command::Bounds { config, n, out } => cmd_bounds(&config, n, out.as_deref()),
        Command::Simulate {
            config,
            exact_secrecy,
            sweep_n,
            out,
        } => cmd_simulate(&config, exact_secrecy, sweep_n, out.as_deref()),
        Command::Rates { config, out } => cmd_rates(&config, out.as_deref()),
    };
    if let Err(error) = result {
        eprintln!("treepin: {error}");
        std::process::exit(error.exit_code());
    }
}

fn network_value(loaded: &Loaded) -> Value {
    let pin = loaded.network.weighted();
    let targets: Vec<usize> = pin.targets().to_vec();
    json!({
        "nodes": pin.tree().node_count(),
        "edges": pin.tree().edges().len(),
        "target_set": targets,
        "mode": loaded.network.mode(),
    })
}

fn cmd_capacity(path: &Path, verify_lp: bool, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = config::load(path)?;
    let pin = loaded.network.weighted();
    let capacity_report = pin.capacity_report(&ReportOptions {
        verify_lp,
        packing_n: None,
    })?;
    let rates = pin.rate_assignment();

    let mut doc = header("capacity", &loaded.input_bytes);
    doc.insert("network".into(), network_value(&loaded));
    doc.insert("c_wsk".into(), float(capacity_report.c_wsk));
    doc.insert(
        "argmin_edge".into(),
        edge_value(capacity_report.argmin_edge),
    );
    doc.insert("c_pk".into(), float(capacity_report.c_pk));
    doc.insert(
        "r_co_closed_form".into(),
        float(capacity_report.r_co_closed_form),
    );
    if let Some(lp) = capacity_report.r_co_lp {
        doc.insert("r_co_lp".into(), float(lp));
        doc.insert(
            "lp_gap".into(),
            float((lp - capacity_report.r_co_closed_form).abs()),
        );
    }
    doc.insert("rates".into(), rate_vector_value(&rates));
    doc.insert(
        "provenance".into(),
        serde_json::to_value(&capacity_report.provenance).expect("string map"),
    );
    emit(&Value::Object(doc), out)
}

fn cmd_bounds(path: &Path, n: u64, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = config::load(path)?;
    let pin = loaded.network.weighted();
    let capacity_report = pin.capacity_report(&ReportOptions {
        verify_lp: false,
        packing_n: Some(n),
    })?;
    let (c_wsk, _) = pin.wsk_capacity();
    // The partition bound is mandatory here, so a network too large for the
    // enumeration is a refusal rather than a missing field.
    let partition = match capacity_report.partition_bound {
        Some(bound) => bound,
        None => pin.partition_upper_bound()?,
    };

    let mut doc = header("bounds", &loaded.input_bytes);
    doc.insert("network".into(), network_value(&loaded));
    doc.insert("n".into(), json!(n));
    doc.insert("c_wsk".into(), float(c_wsk));
    doc.insert("partition_bound".into(), float(partition));
    match capacity_report.packing_bound {
        Some(bound) => {
            doc.insert("packing_bound".into(), float(bound));
            doc.insert(
                "sandwich_ok".into(),
                json!(bound <= c_wsk + 1e-9 && c_wsk <= partition + 1e-9),
            );
        }
        None => {
            doc.insert("packing_bound".into(), Value::Null);
            doc.insert(
                "packing_note".into(),
                json!(format!(
                    "unavailable: packing needs the full terminal set or a pair, got {} targets",
                    pin.targets().len()
                )),
            );
            doc.insert("sandwich_ok".into(), json!(c_wsk <= partition + 1e-9));
        }
    }
    doc.insert(
        "provenance".into(),
        serde_json::to_value(&capacity_report.provenance).expect("string map"),
    );
    emit(&Value::Object(doc), out)
}

fn cmd_rates(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = config::load(path)?;
    let pin = loaded.network.weighted();
    let rates = pin.rate_assignment();
    let feasibility = pin.check_feasibility(rates.node_rates())?;

    let mut doc = header("rates", &loaded.input_bytes);
    doc.insert("network".into(), network_value(&loaded));
    doc.insert("rates".into(), rate_vector_value(&rates));
    doc.insert(
        "r_co_closed_form".into(),
        float(pin.total_weight() - pin.wsk_capacity().0),
    );
    doc.insert("feasible".into(), json!(feasibility.passed()));
    doc.insert(
        "violated_subsets".into(),
        json!(feasibility
            .violated
            .iter()
            .map(|s| s.nodes())
            .collect::<Vec<_>>()),
    );
    emit(&Value::Object(doc), out)
}

fn state_cap_from_env() -> Result<u128, CliError> {
    match std::env::var("TREEPIN_STATE_CAP") {
        Ok(text) => text.parse::<u128>().map_err(|_| {
            CliError::Config(format!(
                "TREEPIN_STATE_CAP must be a nonnegative integer, got {text:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_STATE_CAP),
    }
}

fn cmd_simulate(
    path: &Path,
    with_exact_secrecy: bool,
    sweep_n: Option<Vec<usize>>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let loaded = config::load(path)?;
    let Network::Full(spec) = &loaded.network else {
        return Err(CliError::Config(
            "sources required for simulation: this config has weight-only edges".into(),
        ));
    };
    let Some(block) = &loaded.protocol else {
        return Err(CliError::Config(
            "simulation needs a \"protocol\" block (n, delta, ...)".into(),
        ));
    };

    if let Some(ns) = sweep_n {
        let mut csv = String::from("n,lambda,rate\n");
        for n in ns {
            let choice = choose_lambda(spec, n, block.delta, block.delta_n)?;
            csv.push_str(&format!(
                "{n},{},{}\n",
                choice.lambda,
                report::sig12(choice.rate)
            ));
        }
        return write_text(csv.trim_end(), out);
    }

    let lambda = match block.lambda {
        Some(lambda) => lambda,
        None => choose_lambda(spec, block.n, block.delta, block.delta_n)?.lambda,
    };
    let root_edge = block
        .root_edge
        .map(|[i, j]| Edge::new(i, j).map_err(|e| CliError::Config(e.to_string())))
        .transpose()?;
    let protocol_config =
        ProtocolConfig::new(spec, block.n, block.delta, block.delta_n, lambda, root_edge)?;
    let seed = block.seed.unwrap_or(0);
    let transcript = run_protocol(spec, &protocol_config, seed)?;
    let (reliability_failure, communication_bits) =
        reliability_and_comm(&transcript, &protocol_config)?;

    let transcript_json = transcript.to_json_string();
    let root_key = &transcript.pairwise_keys()[&transcript.root_edge()];
    let all_equal = transcript.keys().values().all(|k| k == root_key);

    let mut doc = header("simulate", &loaded.input_bytes);
    doc.insert("network".into(), network_value(&loaded));
    doc.insert("n".into(), json!(protocol_config.rounds()));
    doc.insert("lambda".into(), json!(protocol_config.lambda()));
    doc.insert("rate".into(), float(protocol_config.rate()));
    doc.insert("seed".into(), json!(seed));
    doc.insert("root_edge".into(), edge_value(protocol_config.root_edge()));
    doc.insert(
        "broadcast_count".into(),
        json!(transcript.broadcasts().len()),
    );
    doc.insert("communication_bits".into(), json!(communication_bits));
    doc.insert("all_keys_equal".into(), json!(all_equal));
    doc.insert("reliability_failure".into(), float(reliability_failure));
    doc.insert(
        "transcript_digest".into(),
        json!(report::content_hash(transcript_json.as_bytes())),
    );
    doc.insert(
        "transcript".into(),
        serde_json::from_str::<Value>(&transcript_json).expect("transcript json"),
    );

    if with_exact_secrecy {
        let options = SecrecyOptions {
            state_cap: state_cap_from_env()?,
            seed_mode: SeedMode::Auto,
        };
        let secrecy = exact_secrecy(spec, &protocol_config, &options)?;
        let mut pairwise = Map::new();
        for (edge, &sd) in &secrecy.pairwise_sd {
            let (i, j) = edge.endpoints();
            pairwise.insert(format!("{i}-{j}"), float(sd));
        }
        doc.insert(
            "secrecy".into(),
            json!({
                "statistical_distance": float(secrecy.statistical_distance),
                "pairwise_sd": Value::Object(pairwise),
                "pairwise_sd_max": float(secrecy.pairwise_sd_max),
                "composition_bound": float(secrecy.composition_bound),
                "within_composition_bound":
                    secrecy.statistical_distance <= secrecy.composition_bound + 1e-12,
                "seed_mode": match secrecy.seed_mode {
                    SeedModeUsed::Enumerated => json!("enumerated"),
                    SeedModeUsed::Conditional { seed } =>
                        json!(format!("conditional(seed={seed})")),
                },
            }),
        );
    }
    emit(&Value::Object(doc), out)
}
