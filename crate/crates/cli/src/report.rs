//! Deterministic JSON report emission.
//!
//! Reports must be byte-identical across reruns of the same config and
//! seed: map keys are sorted (serde_json's default map is ordered), and
//! every float is rounded to 12 significant digits before printing so the
//! shortest-round-trip formatter always produces the same text.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use treepin_core::{Edge, NodeId, RateVector64};

use crate::CliError;

/// Rounds to 12 significant decimal digits.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("scientific round-trip")
}

pub fn float(x: f64) -> Value {
    json!(sig12(x))
}

pub fn edge_value(edge: Edge) -> Value {
    let (i, j) = edge.endpoints();
    json!([i, j])
}

pub fn node_rate_map(rates: &BTreeMap<NodeId, f64>) -> Value {
    let mut map = Map::new();
    for (&node, &rate) in rates {
        map.insert(node.to_string(), float(rate));
    }
    Value::Object(map)
}

pub fn rate_vector_value(rates: &RateVector64) -> Value {
    let mut components = Map::new();
    for (&(owner, neighbor), &value) in rates.components() {
        components.insert(format!("{owner}->{neighbor}"), float(value));
    }
    json!({
        "per_node": node_rate_map(rates.node_rates()),
        "components": Value::Object(components),
        "sum": float(rates.sum()),
    })
}

/// 64-bit FNV-1a, for content hashes of inputs and transcripts.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in bytes {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn content_hash(bytes: &[u8]) -> String {
    format!("fnv1a64:{:016x}", fnv1a64(bytes))
}

/// Common header fields for every report.
pub fn header(command: &str, input_bytes: &[u8]) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("command".into(), json!(command));
    map.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
    map.insert("input_hash".into(), json!(content_hash(input_bytes)));
    map
}

/// Writes the finished report to stdout or a file.
pub fn emit(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_text(&text, out)
}

pub fn write_text(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            writeln!(file, "{text}")
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}
