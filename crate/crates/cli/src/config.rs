//! Declarative network configuration files.
//!
//! A config describes the tree, one entry per edge carrying either a full
//! source (`dist` + `channel`) or a bare entropy `weight` (synthetic-weight
//! mode), the target terminal set, and an optional protocol block. Channel
//! shorthands expand to explicit matrices at parse time, so the core never
//! special-cases channel types.

use std::path::Path;

use serde::{Deserialize, Serialize};
use treepin_core::{
    Edge, EdgeSource64, NodeId, Tree, TreePinSpec64, WeightedTreePin64, WiretapChannel64,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfigFile {
    pub nodes: usize,
    pub edges: Vec<EdgeConfig>,
    pub target_set: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub i: NodeId,
    pub j: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub dist: Vec<f64>,
    pub channel: ChannelConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelConfig {
    Bsc { crossover: f64 },
    Bec { erasure: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub delta_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_edge: Option<[NodeId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A parsed network: fully specified sources, or entropy weights only.
pub enum Network {
    Full(TreePinSpec64),
    WeightsOnly(WeightedTreePin64),
}

impl Network {
    pub fn weighted(&self) -> WeightedTreePin64 {
        match self {
            Network::Full(spec) => spec.to_weighted(),
            Network::WeightsOnly(pin) => pin.clone(),
        }
    }

    pub fn mode(&self) -> &'static str {
        match self {
            Network::Full(_) => "sources",
            Network::WeightsOnly(_) => "weights",
        }
    }
}

pub struct Loaded {
    pub network: Network,
    pub protocol: Option<ProtocolBlock>,
    pub input_bytes: Vec<u8>,
}

impl ChannelConfig {
    pub fn build(&self) -> Result<WiretapChannel64, CliError> {
        let channel = match self {
            ChannelConfig::Bsc { crossover } => WiretapChannel64::bsc(*crossover),
            ChannelConfig::Bec { erasure } => WiretapChannel64::bec(*erasure),
            ChannelConfig::Matrix { rows } => WiretapChannel64::from_matrix(rows.clone()),
        };
        channel.map_err(|e| CliError::Config(format!("invalid channel: {e}")))
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let input_bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: NetworkConfigFile = serde_json::from_slice(&input_bytes).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let network = build_network(&file)?;
    Ok(Loaded {
        network,
        protocol: file.protocol,
        input_bytes,
    })
}

pub fn build_network(file: &NetworkConfigFile) -> Result<Network, CliError> {
    let mut edges = Vec::with_capacity(file.edges.len());
    for entry in &file.edges {
        let edge = Edge::new(entry.i, entry.j)
            .map_err(|e| CliError::Config(format!("edge ({}, {}): {e}", entry.i, entry.j)))?;
        match (&entry.source, &entry.weight) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(format!(
                    "edge {edge}: give either a source or a weight, not both"
                )))
            }
            (None, None) => {
                return Err(CliError::Config(format!(
                    "edge {edge}: needs a source or a weight"
                )))
            }
            _ => {}
        }
        edges.push(edge);
    }
    let tree = Tree::new(file.nodes, edges.clone())
        .map_err(|e| CliError::Config(format!("edges do not form a tree: {e}")))?;

    let all_sourced = file.edges.iter().all(|e| e.source.is_some());
    if all_sourced {
        let mut sources = Vec::with_capacity(file.edges.len());
        for (entry, &edge) in file.edges.iter().zip(&edges) {
            let source = entry.source.as_ref().expect("all sourced");
            let channel = source.channel.build()?;
            let edge_source = EdgeSource64::new(edge, source.dist.clone(), channel)
                .map_err(|e| CliError::Config(format!("edge {edge}: {e}")))?;
            sources.push(edge_source);
        }
        let spec = TreePinSpec64::new(tree, sources, file.target_set.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Network::Full(spec))
    } else {
        let mut weights = std::collections::BTreeMap::new();
        for (entry, &edge) in file.edges.iter().zip(&edges) {
            let weight = match (&entry.source, &entry.weight) {
                (Some(source), None) => {
                    let channel = source.channel.build()?;
                    let edge_source = EdgeSource64::new(edge, source.dist.clone(), channel)
                        .map_err(|e| CliError::Config(format!("edge {edge}: {e}")))?;
                    treepin_core::conditional_entropy(&edge_source)
                }
                (None, Some(w)) => *w,
                _ => unreachable!("validated above"),
            };
            weights.insert(edge, weight);
        }
        let pin = WeightedTreePin64::new(tree, weights, file.target_set.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Network::WeightsOnly(pin))
    }
}
