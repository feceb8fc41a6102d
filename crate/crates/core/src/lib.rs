//! Secret-key capacity of tree-structured pairwise independent networks.
//!
//! A pairwise independent network places one shared random variable on each
//! edge of a graph of terminals, mutually independent across edges, with a
//! wiretapper observing each variable through its own noisy channel. When
//! the graph is a tree, the maximum rate at which a subset of terminals can
//! distill a shared secret key equals the smallest per-edge conditional
//! entropy `H(V|Z)` over the minimal subtree spanning them, and a
//! non-interactive protocol of pairwise privacy amplification plus XOR
//! broadcasts achieves it.
//!
//! The crate computes that capacity in closed form, cross-validates it
//! against independent brute-force oracles (a generic LP over the
//! exponential omniscience constraint family, exhaustive partition search,
//! max-flow and spanning-tree packing counts), executes the protocol on
//! simulated sources, and measures its secrecy exactly by enumerating the
//! full joint distribution of key, transcript, and wiretap view at desk
//! scale.
//!
//! Numeric code is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases at the crate root fix `f64`.
//!
//! ```
//! use treepin_core::{
//!     run_protocol, Edge, EdgeSource64, ProtocolConfig64, Tree, TreePinSpec64,
//!     WiretapChannel64,
//! };
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! // Three terminals in a path, each edge a uniform bit seen by the
//! // adversary through a 50% erasure channel.
//! let tree = Tree::new(3, vec![Edge::new(1, 2)?, Edge::new(2, 3)?])?;
//! let sources = tree
//!     .edges()
//!     .iter()
//!     .map(|&e| EdgeSource64::uniform_bit(e, WiretapChannel64::bec(0.5)?))
//!     .collect::<Result<Vec<_>, _>>()?;
//! let spec = TreePinSpec64::new(tree, sources, vec![1, 2, 3])?;
//!
//! let (capacity, argmin) = spec.to_weighted().wsk_capacity();
//! assert_eq!((capacity, argmin), (0.5, Edge::new(1, 2)?));
//!
//! let config = ProtocolConfig64::new(&spec, 2, 0.0, 0.0, 1, None)?;
//! let transcript = run_protocol(&spec, &config, 7)?;
//! let root_key = &transcript.pairwise_keys()[&transcript.root_edge()];
//! assert!(transcript.keys().values().all(|k| k == root_key));
//! # Ok(())
//! # }
//! ```

#![forbid(unsafe_code)]

pub mod bits;
pub mod capacity;
pub mod graph;
pub mod model;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod simplex;

pub use bits::Bits;
pub use capacity::{
    CapacityError, CapacityReport, FeasibilityReport, LpOutcome, PackingBound, RateVector,
    ReportOptions, TreePinSpec, WeightedTreePin,
};
pub use graph::{
    enumerate_constraint_subsets, enumerate_partitions, max_edge_disjoint_paths,
    nash_williams_value, steiner_subtree, Edge, GraphError, Multigraph, NodeId, NodeSet, Partition,
    SteinerSubtree, Tree,
};
pub use model::{
    conditional_entropy, entropy, enumerate_joint, sample, total_conditional_entropy, Alphabet,
    EdgeSource, ModelError, SampleBatch, WiretapChannel, DEFAULT_STATE_CAP,
};
pub use protocol::{
    choose_lambda, exact_secrecy, extract_pairwise, extractor_seed_len, reliability_and_comm,
    run_protocol, LambdaChoice, ProtocolConfig, ProtocolError, SecrecyOptions, SecrecyReport,
    SeedMode, SeedModeUsed, Transcript,
};
pub use rng::SplitMix64;
pub use scalar::Real;

/// `f64` instantiations of the generic core types.
pub type TreePinSpec64 = TreePinSpec<f64>;
pub type WeightedTreePin64 = WeightedTreePin<f64>;
pub type EdgeSource64 = EdgeSource<f64>;
pub type WiretapChannel64 = WiretapChannel<f64>;
pub type RateVector64 = RateVector<f64>;
pub type CapacityReport64 = CapacityReport<f64>;
pub type ProtocolConfig64 = ProtocolConfig<f64>;
pub type SecrecyReport64 = SecrecyReport<f64>;
