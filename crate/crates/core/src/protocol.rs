//! The executable key-agreement protocol: pairwise privacy amplification,
//! public XOR broadcasts, per-terminal key reconstruction, and exact secrecy
//! evaluation by exhaustive enumeration.
//!
//! The protocol runs on the minimal subtree spanning the target set. Each
//! subtree edge extracts a pairwise key from its shared samples with a
//! seeded universal hash; every node then XORs the key toward its designated
//! root edge onto each of its other pairwise keys and broadcasts the
//! results. Every terminal of the subtree ends up holding the root edge's
//! pairwise key. Terminals outside the subtree send nothing.
//!
//! Secrecy is not argued asymptotically here: on small instances the full
//! distribution of `(K, F, Q, Z)` is computed exactly and compared against
//! an ideal uniform key, both per edge (giving the max pairwise statistical
//! distance sigma) and end to end (which the composition inequality bounds
//! by `2 |E| sigma`).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bits::{Bits, BitsDecodeError};
use crate::capacity::{CapacityError, TreePinSpec};
use crate::graph::{Edge, GraphError, NodeId, SteinerSubtree};
use crate::model::{sample, Alphabet, ModelError, DEFAULT_STATE_CAP};
use crate::rng::SplitMix64;
use crate::scalar::{real, Real};

/// Largest per-run key length accepted by the exact-secrecy enumeration.
const MAX_ENUM_LAMBDA: usize = 20;
/// Auto seed handling enumerates the public seeds jointly when their product
/// space is at most this many states, and conditions on a fixed seed
/// otherwise.
const SEED_ENUM_LIMIT: u128 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error("rounds must be at least 1")]
    ZeroRounds,
    #[error("slack delta={delta} must be below the capacity {capacity} of the subtree")]
    DeltaTooLarge { delta: f64, capacity: f64 },
    #[error(
        "no admissible key length at n={n}: floor(n*(capacity - delta - delta_n)) < 1; raise n"
    )]
    LambdaUnattainable { n: usize },
    #[error("key length must be at least 1")]
    ZeroLambda,
    #[error("slack parameters delta and delta_n must be nonnegative")]
    NegativeSlack,
    #[error(
        "key length {lambda} exceeds the admissible bound {bound:.6} = n*(capacity - delta - delta_n)"
    )]
    LambdaExceedsBound { lambda: usize, bound: f64 },
    #[error("key length {lambda} exceeds the {input_bits}-bit sample encoding")]
    LambdaExceedsEncoding { lambda: usize, input_bits: usize },
    #[error("key length {lambda} exceeds the {input_bits}-bit encoding of edge {edge}'s samples")]
    LambdaExceedsInput {
        lambda: usize,
        input_bits: usize,
        edge: Edge,
    },
    #[error("extractor seed has {found} bits, expected {expected}")]
    SeedLengthMismatch { expected: usize, found: usize },
    #[error("root edge {0} is not an edge of the target-spanning subtree")]
    RootEdgeOutsideSubtree(Edge),
    #[error("sample sequence for edge {edge} has {found} rounds, config says {expected}")]
    RoundMismatch {
        edge: Edge,
        expected: usize,
        found: usize,
    },
    #[error(
        "exact secrecy state space of {states} states exceeds the cap of {cap}; \
         lower n, the alphabet sizes, or lambda, or raise the cap"
    )]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("transcript is malformed: {0}")]
    Transcript(String),
    #[error(transparent)]
    BitsDecode(#[from] BitsDecodeError),
    #[error("transcript and config disagree: {0}")]
    ConfigMismatch(String),
}

/// Key length selected for a given blocklength: `floor(n * (C - delta -
/// delta_n))`, with the achieved rate `lambda / n`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaChoice<F> {
    pub lambda: usize,
    pub rate: F,
}

/// Picks the largest admissible key length at blocklength `n`. Errors if the
/// slack eats the whole capacity or if no positive length is attainable at
/// this `n`.
pub fn choose_lambda<F: Real>(
    spec: &TreePinSpec<F>,
    n: usize,
    delta: F,
    delta_n: F,
) -> Result<LambdaChoice<F>, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::ZeroRounds);
    }
    if delta < F::zero() || delta_n < F::zero() {
        return Err(ProtocolError::NegativeSlack);
    }
    let (capacity, _) = spec.to_weighted().wsk_capacity();
    if delta >= capacity {
        return Err(ProtocolError::DeltaTooLarge {
            delta: delta.to_f64().unwrap_or(f64::NAN),
            capacity: capacity.to_f64().unwrap_or(f64::NAN),
        });
    }
    let slack_rate = capacity - delta - delta_n;
    // Nudge before flooring so that exactly-representable products like
    // 100 * 0.25 do not land one below the intended integer.
    let scaled = real::<F>(n as f64) * slack_rate + real(1e-9);
    let lambda = scaled.floor().to_f64().unwrap_or(0.0) as i64;
    if lambda < 1 {
        return Err(ProtocolError::LambdaUnattainable { n });
    }
    let lambda = lambda as usize;
    Ok(LambdaChoice {
        lambda,
        rate: real::<F>(lambda as f64) / real(n as f64),
    })
}

/// Bit length of the public seed for one edge's extractor: the hash is an
/// identity block on the first `lambda` input bits XOR a Toeplitz hash of
/// the remaining `input_bits - lambda`, so the diagonal seed has
/// `input_bits - 1` bits (none at all when the key keeps every input bit).
pub fn extractor_seed_len(n: usize, alphabet: Alphabet, lambda: usize) -> usize {
    let input_bits = n * alphabet.bits_per_symbol();
    if lambda >= input_bits {
        0
    } else {
        input_bits - 1
    }
}

/// Fixed-width big-endian bit encoding of a symbol sequence.
pub fn encode_symbols(symbols: &[u8], alphabet: Alphabet) -> Bits {
    let bps = alphabet.bits_per_symbol();
    let mut bits = Bits::zeros(symbols.len() * bps);
    for (t, &symbol) in symbols.iter().enumerate() {
        for b in 0..bps {
            if symbol >> (bps - 1 - b) & 1 == 1 {
                bits.set(t * bps + b, true);
            }
        }
    }
    bits
}

/// Extracts a `lambda`-bit pairwise key from one edge's sample sequence:
/// the first `lambda` rows of the seeded hash family `[I | T]`, with `T` a
/// Toeplitz matrix over the seed. The identity block keeps the map full rank
/// for every seed (a uniform input yields an exactly uniform key), and for a
/// fixed nonzero input difference the Toeplitz output is uniform over seeds,
/// which is the 2-universal property privacy amplification needs. Both
/// endpoints hold identical samples, so both compute the identical key.
pub fn extract_pairwise(
    symbols: &[u8],
    alphabet: Alphabet,
    lambda: usize,
    seed: &Bits,
) -> Result<Bits, ProtocolError> {
    let input_bits = symbols.len() * alphabet.bits_per_symbol();
    if lambda > input_bits {
        return Err(ProtocolError::LambdaExceedsEncoding { lambda, input_bits });
    }
    let expected_seed = if lambda >= input_bits {
        0
    } else {
        input_bits - 1
    };
    if seed.len() != expected_seed {
        return Err(ProtocolError::SeedLengthMismatch {
            expected: expected_seed,
            found: seed.len(),
        });
    }
    let x = encode_symbols(symbols, alphabet);
    let tail = input_bits - lambda;
    let mut out = Bits::zeros(lambda);
    for r in 0..lambda {
        // Row r of [I | T]: identity at column r, T[r][c] = seed[r + tail-1 - c].
        let mut bit = x.get(r);
        for c in 0..tail {
            if seed.get(r + tail - 1 - c) && x.get(lambda + c) {
                bit = !bit;
            }
        }
        out.set(r, bit);
    }
    Ok(out)
}

/// Parameters of one protocol execution.
#[derive(Debug, Clone)]
pub struct ProtocolConfig<F> {
    n: usize,
    delta: F,
    delta_n: F,
    lambda: usize,
    root_edge: Edge,
}

impl<F: Real> ProtocolConfig<F> {
    /// Validates a full parameter set against the spec: `lambda >= 1`,
    /// `lambda <= n * (capacity - delta - delta_n)`, `lambda` no longer than
    /// any subtree edge's encoded samples, and the root edge inside the
    /// target-spanning subtree (defaults to its lexicographically smallest
    /// edge).
    pub fn new(
        spec: &TreePinSpec<F>,
        n: usize,
        delta: F,
        delta_n: F,
        lambda: usize,
        root_edge: Option<Edge>,
    ) -> Result<Self, ProtocolError> {
        if n == 0 {
            return Err(ProtocolError::ZeroRounds);
        }
        if lambda == 0 {
            return Err(ProtocolError::ZeroLambda);
        }
        if delta < F::zero() || delta_n < F::zero() {
            return Err(ProtocolError::NegativeSlack);
        }
        let subtree = spec.steiner();
        let root_edge = match root_edge {
            Some(edge) => {
                if !subtree.contains_edge(edge) {
                    return Err(ProtocolError::RootEdgeOutsideSubtree(edge));
                }
                edge
            }
            None => subtree.edges()[0],
        };
        let (capacity, _) = spec.to_weighted().wsk_capacity();
        let bound = real::<F>(n as f64) * (capacity - delta - delta_n);
        if real::<F>(lambda as f64) > bound + real(1e-9) {
            return Err(ProtocolError::LambdaExceedsBound {
                lambda,
                bound: bound.to_f64().unwrap_or(f64::NAN),
            });
        }
        for &edge in subtree.edges() {
            let alphabet = spec
                .source(edge)
                .expect("spec is complete")
                .value_alphabet();
            let input_bits = n * alphabet.bits_per_symbol();
            if lambda > input_bits {
                return Err(ProtocolError::LambdaExceedsInput {
                    lambda,
                    input_bits,
                    edge,
                });
            }
        }
        Ok(Self {
            n,
            delta,
            delta_n,
            lambda,
            root_edge,
        })
    }

    /// Builds a config with the key length picked by [`choose_lambda`].
    pub fn with_chosen_lambda(
        spec: &TreePinSpec<F>,
        n: usize,
        delta: F,
        delta_n: F,
    ) -> Result<Self, ProtocolError> {
        let choice = choose_lambda(spec, n, delta, delta_n)?;
        Self::new(spec, n, delta, delta_n, choice.lambda, None)
    }

    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> F {
        self.delta
    }

    pub fn delta_n(&self) -> F {
        self.delta_n
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn root_edge(&self) -> Edge {
        self.root_edge
    }

    /// Achieved key rate `lambda / n`.
    pub fn rate(&self) -> F {
        real::<F>(self.lambda as f64) / real(self.n as f64)
    }
}

/// Everything one execution makes public (extractor seeds and XOR
/// broadcasts) plus the pairwise keys and the per-terminal keys, kept for
/// audit and replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    n: usize,
    lambda: usize,
    root_edge: Edge,
    seeds: BTreeMap<Edge, Bits>,
    pairwise_keys: BTreeMap<Edge, Bits>,
    broadcasts: BTreeMap<(NodeId, NodeId), Bits>,
    keys: BTreeMap<NodeId, Bits>,
}

impl Transcript {
    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn root_edge(&self) -> Edge {
        self.root_edge
    }

    pub fn seeds(&self) -> &BTreeMap<Edge, Bits> {
        &self.seeds
    }

    pub fn pairwise_keys(&self) -> &BTreeMap<Edge, Bits> {
        &self.pairwise_keys
    }

    /// Broadcast map keyed by `(sender, receiving neighbor)`.
    pub fn broadcasts(&self) -> &BTreeMap<(NodeId, NodeId), Bits> {
        &self.broadcasts
    }

    pub fn keys(&self) -> &BTreeMap<NodeId, Bits> {
        &self.keys
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::{json, Map, Value};
        let bits_value = |bits: &Bits| serde_json::to_value(bits).expect("bits serialize");
        let mut seeds = Map::new();
        for (edge, bits) in &self.seeds {
            let (i, j) = edge.endpoints();
            seeds.insert(format!("{i}-{j}"), bits_value(bits));
        }
        let mut pairwise = Map::new();
        for (edge, bits) in &self.pairwise_keys {
            let (i, j) = edge.endpoints();
            pairwise.insert(format!("{i}-{j}"), bits_value(bits));
        }
        let mut broadcasts = Map::new();
        for (&(sender, receiver), bits) in &self.broadcasts {
            broadcasts.insert(format!("{sender}->{receiver}"), bits_value(bits));
        }
        let mut keys = Map::new();
        for (&node, bits) in &self.keys {
            keys.insert(node.to_string(), bits_value(bits));
        }
        let (a, b) = self.root_edge.endpoints();
        json!({
            "n": self.n,
            "lambda": self.lambda,
            "root_edge": [a, b],
            "seeds": Value::Object(seeds),
            "pairwise_keys": Value::Object(pairwise),
            "broadcasts": Value::Object(broadcasts),
            "keys": Value::Object(keys),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("transcript serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ProtocolError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ProtocolError::Transcript(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ProtocolError::Transcript("expected an object".into()))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| ProtocolError::Transcript(format!("missing field {name}")))
        };
        let n = field("n")?
            .as_u64()
            .ok_or_else(|| ProtocolError::Transcript("n must be an integer".into()))?
            as usize;
        let lambda = field("lambda")?
            .as_u64()
            .ok_or_else(|| ProtocolError::Transcript("lambda must be an integer".into()))?
            as usize;
        let root = field("root_edge")?
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| ProtocolError::Transcript("root_edge must be a pair".into()))?;
        let root_edge = Edge::new(
            root[0].as_u64().unwrap_or(0) as usize,
            root[1].as_u64().unwrap_or(0) as usize,
        )?;
        let parse_bits = |value: &serde_json::Value| -> Result<Bits, ProtocolError> {
            serde_json::from_value(value.clone())
                .map_err(|e| ProtocolError::Transcript(e.to_string()))
        };
        let parse_edge_map =
            |value: &serde_json::Value| -> Result<BTreeMap<Edge, Bits>, ProtocolError> {
                let mut out = BTreeMap::new();
                for (key, bits) in value
                    .as_object()
                    .ok_or_else(|| ProtocolError::Transcript("expected a map".into()))?
                {
                    let (i, j) = key
                        .split_once('-')
                        .ok_or_else(|| ProtocolError::Transcript(format!("bad edge key {key}")))?;
                    let parse = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| ProtocolError::Transcript(format!("bad edge key {key}")))
                    };
                    out.insert(Edge::new(parse(i)?, parse(j)?)?, parse_bits(bits)?);
                }
                Ok(out)
            };
        let seeds = parse_edge_map(field("seeds")?)?;
        let pairwise_keys = parse_edge_map(field("pairwise_keys")?)?;
        let mut broadcasts = BTreeMap::new();
        for (key, bits) in field("broadcasts")?
            .as_object()
            .ok_or_else(|| ProtocolError::Transcript("broadcasts must be a map".into()))?
        {
            let (s, r) = key
                .split_once("->")
                .ok_or_else(|| ProtocolError::Transcript(format!("bad broadcast key {key}")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| ProtocolError::Transcript(format!("bad broadcast key {key}")))
            };
            broadcasts.insert((parse(s)?, parse(r)?), parse_bits(bits)?);
        }
        let mut keys = BTreeMap::new();
        for (key, bits) in field("keys")?
            .as_object()
            .ok_or_else(|| ProtocolError::Transcript("keys must be a map".into()))?
        {
            let node = key
                .parse::<usize>()
                .map_err(|_| ProtocolError::Transcript(format!("bad node key {key}")))?;
            keys.insert(node, parse_bits(bits)?);
        }
        Ok(Self {
            n,
            lambda,
            root_edge,
            seeds,
            pairwise_keys,
            broadcasts,
            keys,
        })
    }
}

/// Parent orientation of the subtree toward the root edge: both root
/// endpoints point at each other, every other subtree node points at its
/// unique neighbor closer to the root edge.
fn orient_subtree(subtree: &SteinerSubtree, root_edge: Edge) -> BTreeMap<NodeId, NodeId> {
    let (a, b) = root_edge.endpoints();
    let mut parent = BTreeMap::new();
    parent.insert(a, b);
    parent.insert(b, a);
    let mut queue = std::collections::VecDeque::from([a, b]);
    let mut seen: std::collections::BTreeSet<NodeId> = [a, b].into_iter().collect();
    while let Some(u) = queue.pop_front() {
        for &edge in subtree.edges() {
            if let Some(v) = edge.other(u) {
                if seen.insert(v) {
                    parent.insert(v, u);
                    queue.push_back(v);
                }
            }
        }
    }
    debug_assert_eq!(parent.len(), subtree.nodes().len());
    parent
}

/// Executes the protocol end to end on the target-spanning subtree:
/// samples the sources, extracts one pairwise key per subtree edge, emits
/// each node's XOR broadcasts toward the root edge, and reconstructs every
/// terminal's key. Pure in `(spec, config, seed)`.
pub fn run_protocol<F: Real>(
    spec: &TreePinSpec<F>,
    config: &ProtocolConfig<F>,
    seed: u64,
) -> Result<Transcript, ProtocolError> {
    let subtree = spec.steiner();
    if !subtree.contains_edge(config.root_edge) {
        return Err(ProtocolError::RootEdgeOutsideSubtree(config.root_edge));
    }
    let mut master = SplitMix64::new(seed);
    let sample_seed = master.next_u64();
    let mut seed_rng = master.split();
    let batch = sample(spec, config.n, sample_seed)?;

    let mut seeds = BTreeMap::new();
    let mut pairwise_keys = BTreeMap::new();
    for &edge in subtree.edges() {
        let source = spec.source(edge).expect("spec is complete");
        let alphabet = source.value_alphabet();
        let seed_bits = Bits::random(
            &mut seed_rng,
            extractor_seed_len(config.n, alphabet, config.lambda),
        );
        let key = extract_pairwise(batch.values(edge), alphabet, config.lambda, &seed_bits)?;
        seeds.insert(edge, seed_bits);
        pairwise_keys.insert(edge, key);
    }

    let parent = orient_subtree(&subtree, config.root_edge);
    let key_toward_parent = |node: NodeId| -> &Bits {
        let edge = Edge::new(node, parent[&node]).expect("parent differs");
        &pairwise_keys[&edge]
    };

    // Public discussion: every node XORs its parent-edge key onto each of
    // its other pairwise keys.
    let mut broadcasts = BTreeMap::new();
    for &node in subtree.nodes() {
        for &edge in subtree.edges() {
            if let Some(neighbor) = edge.other(node) {
                if neighbor != parent[&node] {
                    let message = key_toward_parent(node) ^ &pairwise_keys[&edge];
                    broadcasts.insert((node, neighbor), message);
                }
            }
        }
    }

    // Key extraction: the root endpoints hold the root key directly; every
    // other node unwinds the broadcast chain along its path to the root edge.
    let (root_a, root_b) = config.root_edge.endpoints();
    let root_key = pairwise_keys[&config.root_edge].clone();
    let mut keys = BTreeMap::new();
    for &node in subtree.nodes() {
        if node == root_a || node == root_b {
            keys.insert(node, root_key.clone());
            continue;
        }
        let mut key = key_toward_parent(node).clone();
        let mut child = node;
        let mut up = parent[&node];
        loop {
            key ^= &broadcasts[&(up, child)];
            if up == root_a || up == root_b {
                break;
            }
            child = up;
            up = parent[&up];
        }
        keys.insert(node, key);
    }

    Ok(Transcript {
        n: config.n,
        lambda: config.lambda,
        root_edge: config.root_edge,
        seeds,
        pairwise_keys,
        broadcasts,
        keys,
    })
}

/// Observed reliability failure and the exact public communication in bits:
/// one `lambda`-bit broadcast per non-root subtree edge. The failure is the
/// fraction of terminals whose key differs from the root key, identically
/// zero in this model since both endpoints of every edge hold the same
/// samples.
pub fn reliability_and_comm<F: Real>(
    transcript: &Transcript,
    config: &ProtocolConfig<F>,
) -> Result<(F, u64), ProtocolError> {
    if transcript.lambda != config.lambda || transcript.n != config.n {
        return Err(ProtocolError::ConfigMismatch(format!(
            "transcript ran with n={}, lambda={}, config says n={}, lambda={}",
            transcript.n, transcript.lambda, config.n, config.lambda
        )));
    }
    let root_key = &transcript.pairwise_keys[&transcript.root_edge];
    let mismatches = transcript
        .keys
        .values()
        .filter(|key| *key != root_key)
        .count();
    let epsilon = real::<F>(mismatches as f64) / real(transcript.keys.len() as f64);
    let bits = transcript.broadcasts.len() as u64 * transcript.lambda as u64;
    Ok((epsilon, bits))
}

/// How the public extractor seeds enter the exact secrecy computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    /// Enumerate the joint seed space when it is small, otherwise condition
    /// on one fixed seed drawn from the given value.
    Auto,
    Enumerate,
    Conditional {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct SecrecyOptions {
    pub state_cap: u128,
    pub seed_mode: SeedMode,
}

impl Default for SecrecyOptions {
    fn default() -> Self {
        Self {
            state_cap: DEFAULT_STATE_CAP,
            seed_mode: SeedMode::Auto,
        }
    }
}

/// Which seed handling actually ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedModeUsed {
    /// Seeds enumerated jointly with the sources; the reported distance is
    /// the full statistical distance including the seed randomness.
    Enumerated,
    /// Distance conditioned on one fixed public seed per edge.
    Conditional { seed: u64 },
}

/// Exact secrecy figures for one configuration.
#[derive(Debug, Clone)]
pub struct SecrecyReport<F> {
    /// `SD((K, F, Q, Z); (U, F, Q, Z))`, computed exactly.
    pub statistical_distance: F,
    /// Exact per-edge `SD((S'_e, Q_e, Z_e); (U, Q_e, Z_e))`.
    pub pairwise_sd: BTreeMap<Edge, F>,
    /// `sigma`: the maximum pairwise distance.
    pub pairwise_sd_max: F,
    /// `2 * |subtree edges| * sigma`.
    pub composition_bound: F,
    /// Exact reliability failure probability: zero, because reciprocal
    /// shared samples make every pairwise key agree deterministically.
    pub reliability_failure: F,
    /// `(|subtree edges| - 1) * lambda`.
    pub communication_bits: u64,
    pub seed_mode: SeedModeUsed,
    pub subtree_edges: usize,
}

struct EdgeTable<F> {
    /// Dense probabilities indexed by `(q * z_states + z) * 2^lambda + s`.
    probs: Vec<F>,
    qz_states: usize,
}

/// Computes the exact joint secrecy of the protocol's output key.
///
/// The distribution of `(K, F, Q, Z)` factors per subtree edge: the map from
/// the pairwise-key vector to `(K, F)` is a linear bijection (the key and
/// the broadcasts uniquely give back all pairwise keys), so the joint
/// probability of `(K, F, Q, Z)` is the product over edges of
/// `P(S'_e, Q_e, Z_e)`, evaluated at the pairwise keys reconstructed from
/// `(K, F)`. Wiretap components of edges outside the subtree are independent
/// of everything the protocol touches and cancel from the statistical
/// distance exactly, so only subtree edges are enumerated.
pub fn exact_secrecy<F: Real>(
    spec: &TreePinSpec<F>,
    config: &ProtocolConfig<F>,
    options: &SecrecyOptions,
) -> Result<SecrecyReport<F>, ProtocolError> {
    let subtree = spec.steiner();
    let edges: Vec<Edge> = subtree.edges().to_vec();
    let edge_count = edges.len();
    let lambda = config.lambda;
    if lambda > MAX_ENUM_LAMBDA {
        return Err(ProtocolError::StateSpaceTooLarge {
            states: (1u128) << lambda.min(127),
            cap: 1 << MAX_ENUM_LAMBDA,
        });
    }
    let key_states = 1usize << lambda;

    // Decide seed handling.
    let mut seed_product: u128 = 1;
    for &edge in &edges {
        let alphabet = spec.source(edge).expect("spec complete").value_alphabet();
        let seed_len = extractor_seed_len(config.n, alphabet, lambda);
        seed_product = seed_product.saturating_mul(1u128 << seed_len.min(127));
    }
    let enumerate_seeds = match options.seed_mode {
        SeedMode::Enumerate => true,
        SeedMode::Conditional { .. } => false,
        SeedMode::Auto => seed_product <= SEED_ENUM_LIMIT,
    };
    let fixed_seed = match options.seed_mode {
        SeedMode::Conditional { seed } => seed,
        _ => 0,
    };
    let mut fixed_rng = SplitMix64::new(fixed_seed);

    // State-space guards: the enumerated source space per the usual cap, and
    // the accumulation loop which additionally ranges over seeds and keys.
    let mut source_states: u128 = 1;
    let mut loop_states: u128 = (key_states as u128).saturating_pow(edge_count as u32 + 1);
    for &edge in &edges {
        let source = spec.source(edge).expect("spec complete");
        let v = source.value_alphabet().size() as u128;
        let z = source.channel().output_alphabet().size() as u128;
        for _ in 0..config.n {
            source_states = source_states.saturating_mul(v * z);
            loop_states = loop_states.saturating_mul(z);
        }
        if enumerate_seeds {
            let seed_len = extractor_seed_len(config.n, source.value_alphabet(), lambda);
            loop_states = loop_states.saturating_mul(1u128 << seed_len.min(127));
        }
    }
    let states = source_states.max(loop_states);
    if states > options.state_cap {
        return Err(ProtocolError::StateSpaceTooLarge {
            states,
            cap: options.state_cap,
        });
    }

    // Per-edge dense tables of P(S', Q, Z) and the per-edge exact distances.
    let mut tables = Vec::with_capacity(edge_count);
    let mut pairwise_sd = BTreeMap::new();
    for &edge in &edges {
        let source = spec.source(edge).expect("spec complete");
        let alphabet = source.value_alphabet();
        let v_size = alphabet.size();
        let z_size = source.channel().output_alphabet().size();
        let v_states = v_size.pow(config.n as u32);
        let z_states = z_size.pow(config.n as u32);
        let seed_len = extractor_seed_len(config.n, alphabet, lambda);
        let (q_states, fixed_bits) = if enumerate_seeds {
            if seed_len >= 32 {
                return Err(ProtocolError::StateSpaceTooLarge {
                    states: 1u128 << seed_len.min(127),
                    cap: options.state_cap,
                });
            }
            (1usize << seed_len, None)
        } else {
            (1usize, Some(Bits::random(&mut fixed_rng, seed_len)))
        };
        let q_weight = real::<F>(1.0 / q_states as f64);

        let mut probs = vec![F::zero(); q_states * z_states * key_states];
        let mut symbols = vec![0u8; config.n];
        for q_idx in 0..q_states {
            let seed_bits = match &fixed_bits {
                Some(bits) => bits.clone(),
                None => Bits::from_u64(seed_len, q_idx as u64),
            };
            for v_idx in 0..v_states {
                let mut rest = v_idx;
                for t in (0..config.n).rev() {
                    symbols[t] = (rest % v_size) as u8;
                    rest /= v_size;
                }
                let mut p_v = F::one();
                for &s in &symbols {
                    p_v = p_v * source.value_dist()[s as usize];
                }
                if p_v == F::zero() {
                    continue;
                }
                let key = extract_pairwise(&symbols, alphabet, lambda, &seed_bits)?;
                let s = key.low_u64() as usize;
                for z_idx in 0..z_states {
                    let mut rest = z_idx;
                    let mut p_z = F::one();
                    for t in (0..config.n).rev() {
                        let z = rest % z_size;
                        rest /= z_size;
                        p_z = p_z * source.channel().prob(symbols[t] as usize, z);
                    }
                    let cell = (q_idx * z_states + z_idx) * key_states + s;
                    probs[cell] = probs[cell] + p_v * p_z * q_weight;
                }
            }
        }

        let qz_states = q_states * z_states;
        let mut sd = F::zero();
        let uniform = real::<F>(1.0 / key_states as f64);
        for qz in 0..qz_states {
            let row = &probs[qz * key_states..(qz + 1) * key_states];
            let marginal: F = row.iter().copied().sum();
            for &p in row {
                sd = sd + (p - marginal * uniform).abs();
            }
        }
        pairwise_sd.insert(edge, sd * real(0.5));
        tables.push(EdgeTable { probs, qz_states });
    }

    // Joint distance: iterate the product of per-edge (Q, Z) cells; inside,
    // enumerate the pairwise-key vector via (key, offsets) with the root
    // edge's offset fixed at zero.
    let root_pos = edges
        .iter()
        .position(|&e| e == config.root_edge)
        .expect("config validated root edge");
    let uniform = real::<F>(1.0 / key_states as f64);
    let mut accumulated = F::zero();
    let mut qz_index = vec![0usize; edge_count];
    let mut offsets = vec![0usize; edge_count]; // offsets[root_pos] stays 0
    let mut term1 = vec![F::zero(); key_states];
    let mut rows: Vec<&[F]> = Vec::with_capacity(edge_count);
    loop {
        rows.clear();
        rows.extend(
            tables
                .iter()
                .zip(&qz_index)
                .map(|(table, &qz)| &table.probs[qz * key_states..(qz + 1) * key_states]),
        );
        // Offsets odometer over non-root edges.
        offsets.fill(0);
        loop {
            let mut total = F::zero();
            for (k, slot) in term1.iter_mut().enumerate() {
                let mut product = rows[root_pos][k];
                for (pos, row) in rows.iter().enumerate() {
                    if pos != root_pos {
                        product = product * row[k ^ offsets[pos]];
                    }
                }
                *slot = product;
                total = total + product;
            }
            let ideal = total * uniform;
            for &t in &term1 {
                accumulated = accumulated + (t - ideal).abs();
            }
            // Advance the offsets odometer.
            let mut pos = 0;
            loop {
                if pos == edge_count {
                    break;
                }
                if pos == root_pos {
                    pos += 1;
                    continue;
                }
                offsets[pos] += 1;
                if offsets[pos] < key_states {
                    break;
                }
                offsets[pos] = 0;
                pos += 1;
            }
            if pos == edge_count {
                break;
            }
        }
        // Advance the (Q, Z) odometer.
        let mut pos = 0;
        loop {
            if pos == edge_count {
                break;
            }
            qz_index[pos] += 1;
            if qz_index[pos] < tables[pos].qz_states {
                break;
            }
            qz_index[pos] = 0;
            pos += 1;
        }
        if pos == edge_count {
            break;
        }
    }
    let statistical_distance = accumulated * real(0.5);

    let sigma = pairwise_sd
        .values()
        .copied()
        .fold(F::zero(), |acc, v| acc.max(v));
    Ok(SecrecyReport {
        statistical_distance,
        pairwise_sd,
        pairwise_sd_max: sigma,
        composition_bound: real::<F>(2.0 * edge_count as f64) * sigma,
        reliability_failure: F::zero(),
        communication_bits: (edge_count as u64 - 1) * lambda as u64,
        seed_mode: if enumerate_seeds {
            SeedModeUsed::Enumerated
        } else {
            SeedModeUsed::Conditional { seed: fixed_seed }
        },
        subtree_edges: edge_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::TreePinSpec;
    use crate::graph::testutil::random_tree;
    use crate::graph::Tree;
    use crate::model::{EdgeSource, WiretapChannel};

    fn edge(i: usize, j: usize) -> Edge {
        Edge::new(i, j).unwrap()
    }

    fn uniform_bit_spec(
        tree: Tree,
        channel_for: impl Fn(Edge) -> WiretapChannel<f64>,
        targets: Vec<NodeId>,
    ) -> TreePinSpec<f64> {
        let sources = tree
            .edges()
            .iter()
            .map(|&e| EdgeSource::uniform_bit(e, channel_for(e)).unwrap())
            .collect();
        TreePinSpec::new(tree, sources, targets).unwrap()
    }

    fn path_spec(m: usize, channel: WiretapChannel<f64>, targets: Vec<NodeId>) -> TreePinSpec<f64> {
        let tree = Tree::new(m, (1..m).map(|i| edge(i, i + 1)).collect()).unwrap();
        uniform_bit_spec(tree, |_| channel.clone(), targets)
    }

    #[test]
    fn choose_lambda_matches_arithmetic() {
        // Capacity 1.0: uniform bit, uninformative wiretap.
        let spec = path_spec(2, WiretapChannel::uninformative(2).unwrap(), vec![1, 2]);
        let choice = choose_lambda(&spec, 10, 0.1, 0.0).unwrap();
        assert_eq!(choice.lambda, 9);
        assert!((choice.rate - 0.9).abs() < 1e-12);

        // Capacity 0.3: uniform bit through an erasure channel.
        let spec = path_spec(2, WiretapChannel::bec(0.3).unwrap(), vec![1, 2]);
        let choice = choose_lambda(&spec, 100, 0.05, 0.0).unwrap();
        assert_eq!(choice.lambda, 25);
        assert!((choice.rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn choose_lambda_rate_approaches_capacity_minus_delta() {
        let spec = path_spec(3, WiretapChannel::bec(0.77).unwrap(), vec![1, 2, 3]);
        let c = spec.to_weighted().wsk_capacity().0;
        let delta = 0.1;
        for n in [10usize, 100, 1_000, 10_000] {
            let choice = choose_lambda(&spec, n, delta, 0.0).unwrap();
            let target = c - delta;
            assert!(choice.rate <= target + 1e-9);
            assert!(choice.rate > target - 1.0 / n as f64 - 1e-9);
        }
    }

    #[test]
    fn choose_lambda_accounts_for_extractor_penalty() {
        let spec = path_spec(2, WiretapChannel::uninformative(2).unwrap(), vec![1, 2]);
        let choice = choose_lambda(&spec, 20, 0.1, 0.15).unwrap();
        assert_eq!(choice.lambda, 15);
        assert!(choice.rate >= 1.0 - 0.1 - 0.15 - 1.0 / 20.0 - 1e-9);
    }

    #[test]
    fn choose_lambda_rejects_bad_slack() {
        let spec = path_spec(2, WiretapChannel::bec(0.3).unwrap(), vec![1, 2]);
        assert!(matches!(
            choose_lambda(&spec, 10, 0.5, 0.0),
            Err(ProtocolError::DeltaTooLarge { .. })
        ));
        // delta below capacity but too large for a positive length at n=1.
        assert!(matches!(
            choose_lambda(&spec, 1, 0.25, 0.0),
            Err(ProtocolError::LambdaUnattainable { n: 1 })
        ));
    }

    #[test]
    fn fully_leaked_source_admits_no_key_length() {
        // Z = V means zero capacity; no positive lambda can be chosen.
        let spec = path_spec(2, WiretapChannel::identity(2).unwrap(), vec![1, 2]);
        assert!(matches!(
            choose_lambda(&spec, 100, 0.0, 0.0),
            Err(ProtocolError::DeltaTooLarge { .. })
        ));
        assert!(matches!(
            ProtocolConfig::new(&spec, 100, 0.0, 0.0, 1, None),
            Err(ProtocolError::LambdaExceedsBound { .. })
        ));
    }

    #[test]
    fn extractor_is_linear_and_deterministic() {
        let alphabet = Alphabet::new(2).unwrap();
        let mut rng = SplitMix64::new(5);
        let seed = Bits::random(&mut rng, extractor_seed_len(8, alphabet, 3));
        let zeros = extract_pairwise(&[0; 8], alphabet, 3, &seed).unwrap();
        assert!(zeros.is_zero());
        let symbols = [1, 0, 1, 1, 0, 0, 1, 0];
        let a = extract_pairwise(&symbols, alphabet, 3, &seed).unwrap();
        let b = extract_pairwise(&symbols, alphabet, 3, &seed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extractor_with_full_length_key_is_identity() {
        let alphabet = Alphabet::new(2).unwrap();
        let seed = Bits::zeros(0);
        let symbols = [1u8, 0, 1, 1];
        let key = extract_pairwise(&symbols, alphabet, 4, &seed).unwrap();
        assert_eq!(key, encode_symbols(&symbols, alphabet));
    }

    /// A uniform input through the extractor is exactly uniform for every
    /// seed (full-rank hash), so the seed-averaged distance to uniform is 0.
    #[test]
    fn uniform_input_gives_exactly_uniform_key() {
        let alphabet = Alphabet::new(2).unwrap();
        let n = 8;
        let lambda = 4;
        let seed_len = extractor_seed_len(n, alphabet, lambda);
        for seed_value in 0..(1u64 << seed_len) {
            let seed = Bits::from_u64(seed_len, seed_value);
            let mut counts = vec![0u32; 1 << lambda];
            for input in 0..(1u32 << n) {
                let symbols: Vec<u8> = (0..n).map(|t| (input >> t & 1) as u8).collect();
                let key = extract_pairwise(&symbols, alphabet, lambda, &seed).unwrap();
                counts[key.low_u64() as usize] += 1;
            }
            assert!(
                counts.iter().all(|&c| c == 1 << (n - lambda)),
                "seed {seed_value} does not preserve uniformity: {counts:?}"
            );
        }
    }

    /// The hash family is linear per seed: H(x xor y) = H(x) xor H(y).
    #[test]
    fn extractor_is_linear_per_seed() {
        let alphabet = Alphabet::new(2).unwrap();
        let mut rng = SplitMix64::new(0x11ea);
        let n = 7;
        let lambda = 3;
        let seed_len = extractor_seed_len(n, alphabet, lambda);
        for _ in 0..50 {
            let seed = Bits::random(&mut rng, seed_len);
            let x: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
            let y: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
            let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
            let hx = extract_pairwise(&x, alphabet, lambda, &seed).unwrap();
            let hy = extract_pairwise(&y, alphabet, lambda, &seed).unwrap();
            let hxy = extract_pairwise(&xy, alphabet, lambda, &seed).unwrap();
            assert_eq!(hxy, &hx ^ &hy);
        }
    }

    /// 2-universality, checked exhaustively: for every nonzero input
    /// difference, the fraction of seeds mapping it to zero is at most
    /// 2^-lambda (zero when the difference sits entirely in the identity
    /// block, exactly 2^-lambda otherwise).
    #[test]
    fn extractor_collision_probability_is_two_universal() {
        let alphabet = Alphabet::new(2).unwrap();
        let n = 6;
        let lambda = 2;
        let seed_len = extractor_seed_len(n, alphabet, lambda);
        let seed_count = 1u64 << seed_len;
        for diff in 1u32..1 << n {
            let symbols: Vec<u8> = (0..n).map(|t| (diff >> t & 1) as u8).collect();
            let collisions = (0..seed_count)
                .filter(|&q| {
                    let seed = Bits::from_u64(seed_len, q);
                    extract_pairwise(&symbols, alphabet, lambda, &seed)
                        .unwrap()
                        .is_zero()
                })
                .count() as u64;
            assert!(
                collisions <= seed_count >> lambda,
                "difference {diff:06b} collides on {collisions} of {seed_count} seeds"
            );
        }
    }

    #[test]
    fn extractor_rejects_mismatched_seed_or_length() {
        let alphabet = Alphabet::new(2).unwrap();
        assert!(matches!(
            extract_pairwise(&[0, 1], alphabet, 3, &Bits::zeros(1)),
            Err(ProtocolError::LambdaExceedsEncoding { .. })
        ));
        assert!(matches!(
            extract_pairwise(&[0, 1, 0], alphabet, 1, &Bits::zeros(1)),
            Err(ProtocolError::SeedLengthMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn two_terminals_share_the_pairwise_key_with_no_broadcasts() {
        let spec = path_spec(2, WiretapChannel::bec(0.5).unwrap(), vec![1, 2]);
        let config = ProtocolConfig::new(&spec, 8, 0.1, 0.0, 3, None).unwrap();
        let transcript = run_protocol(&spec, &config, 11).unwrap();
        assert!(transcript.broadcasts().is_empty());
        let root_key = &transcript.pairwise_keys()[&edge(1, 2)];
        assert_eq!(&transcript.keys()[&1], root_key);
        assert_eq!(&transcript.keys()[&2], root_key);
    }

    #[test]
    fn three_node_path_broadcast_matches_xor_rule() {
        let spec = path_spec(3, WiretapChannel::bec(0.5).unwrap(), vec![1, 2, 3]);
        let config = ProtocolConfig::new(&spec, 8, 0.1, 0.0, 2, Some(edge(1, 2))).unwrap();
        let transcript = run_protocol(&spec, &config, 3).unwrap();
        assert_eq!(transcript.broadcasts().len(), 1);
        let s12 = &transcript.pairwise_keys()[&edge(1, 2)];
        let s23 = &transcript.pairwise_keys()[&edge(2, 3)];
        assert_eq!(&transcript.broadcasts()[&(2, 3)], &(s12 ^ s23));
        for node in 1..=3 {
            assert_eq!(&transcript.keys()[&node], s12);
        }
    }

    #[test]
    fn star_center_broadcasts_toward_every_other_leaf() {
        let tree = Tree::new(5, vec![edge(1, 2), edge(1, 3), edge(1, 4), edge(1, 5)]).unwrap();
        let spec = uniform_bit_spec(
            tree,
            |_| WiretapChannel::bec(0.5).unwrap(),
            (1..=5).collect(),
        );
        let config = ProtocolConfig::new(&spec, 6, 0.1, 0.0, 2, Some(edge(1, 2))).unwrap();
        let transcript = run_protocol(&spec, &config, 9).unwrap();
        assert_eq!(transcript.broadcasts().len(), 3);
        for receiver in [3, 4, 5] {
            assert!(transcript.broadcasts().contains_key(&(1, receiver)));
        }
        let root_key = &transcript.pairwise_keys()[&edge(1, 2)];
        assert_eq!(transcript.keys().len(), 5);
        for key in transcript.keys().values() {
            assert_eq!(key, root_key);
        }
    }

    #[test]
    fn protocol_runs_only_on_the_spanning_subtree() {
        // 5-node path with targets {1, 3}: edges (3,4), (4,5) stay silent.
        let spec = path_spec(5, WiretapChannel::bec(0.5).unwrap(), vec![1, 3]);
        let config = ProtocolConfig::new(&spec, 8, 0.1, 0.0, 2, None).unwrap();
        let transcript = run_protocol(&spec, &config, 17).unwrap();
        assert_eq!(transcript.pairwise_keys().len(), 2);
        assert!(!transcript.pairwise_keys().contains_key(&edge(3, 4)));
        assert_eq!(transcript.broadcasts().len(), 1);
        assert_eq!(transcript.keys().len(), 3);
        let root_key = &transcript.pairwise_keys()[&transcript.root_edge()];
        for key in transcript.keys().values() {
            assert_eq!(key, root_key);
        }
    }

    #[test]
    fn broadcasts_are_recomputable_from_sender_local_keys() {
        let mut rng = SplitMix64::new(0x10ca1);
        for _ in 0..25 {
            let m = rng.next_below(7) as usize + 2;
            let tree = random_tree(&mut rng, m);
            let spec = uniform_bit_spec(
                tree,
                |_| WiretapChannel::bec(0.6).unwrap(),
                (1..=m).collect(),
            );
            let config = ProtocolConfig::with_chosen_lambda(&spec, 10, 0.1, 0.0).unwrap();
            let transcript = run_protocol(&spec, &config, rng.next_u64()).unwrap();
            let subtree = spec.steiner();
            let parent = orient_subtree(&subtree, transcript.root_edge());
            for (&(sender, receiver), message) in transcript.broadcasts() {
                let up = Edge::new(sender, parent[&sender]).unwrap();
                let out = Edge::new(sender, receiver).unwrap();
                let expect = &transcript.pairwise_keys()[&up] ^ &transcript.pairwise_keys()[&out];
                assert_eq!(message, &expect, "broadcast {sender}->{receiver}");
            }
        }
    }

    /// `(K, F)` determines every pairwise key: unwind the broadcasts from the
    /// root edge outward and compare with the transcript.
    #[test]
    fn key_and_broadcasts_reconstruct_all_pairwise_keys() {
        let mut rng = SplitMix64::new(0x1273);
        for _ in 0..25 {
            let m = rng.next_below(7) as usize + 2;
            let tree = random_tree(&mut rng, m);
            let spec = uniform_bit_spec(
                tree,
                |_| WiretapChannel::bsc(0.2).unwrap(),
                (1..=m).collect(),
            );
            let config = ProtocolConfig::with_chosen_lambda(&spec, 12, 0.1, 0.0).unwrap();
            let transcript = run_protocol(&spec, &config, rng.next_u64()).unwrap();
            let subtree = spec.steiner();
            let parent = orient_subtree(&subtree, transcript.root_edge());

            let mut recovered: BTreeMap<Edge, Bits> = BTreeMap::new();
            recovered.insert(
                transcript.root_edge(),
                transcript.keys()[&transcript.root_edge().endpoints().0].clone(),
            );
            // Broadcast senders closer to the root edge come first.
            let mut order: Vec<(NodeId, NodeId)> =
                transcript.broadcasts().keys().copied().collect();
            let (root_a, root_b) = transcript.root_edge().endpoints();
            let depth = |mut node: NodeId| {
                let mut d = 0;
                while node != root_a && node != root_b {
                    node = parent[&node];
                    d += 1;
                }
                d
            };
            order.sort_by_key(|&(sender, _)| depth(sender));
            for (sender, receiver) in order {
                let up = Edge::new(sender, parent[&sender]).unwrap();
                let out = Edge::new(sender, receiver).unwrap();
                let known = recovered[&up].clone();
                recovered.insert(out, &known ^ &transcript.broadcasts()[&(sender, receiver)]);
            }
            assert_eq!(&recovered, transcript.pairwise_keys());
        }
    }

    #[test]
    fn keys_agree_for_every_root_edge_choice() {
        let spec = path_spec(4, WiretapChannel::bec(0.5).unwrap(), vec![1, 2, 3, 4]);
        for root in [edge(1, 2), edge(2, 3), edge(3, 4)] {
            let config = ProtocolConfig::new(&spec, 8, 0.1, 0.0, 2, Some(root)).unwrap();
            let transcript = run_protocol(&spec, &config, 21).unwrap();
            let root_key = &transcript.pairwise_keys()[&root];
            for key in transcript.keys().values() {
                assert_eq!(key, root_key);
            }
        }
    }

    #[test]
    fn reliability_and_comm_counts() {
        // 5-node path, full target set, lambda 8: 3 broadcasts of 8 bits.
        let spec = path_spec(
            5,
            WiretapChannel::uninformative(2).unwrap(),
            (1..=5).collect(),
        );
        let config = ProtocolConfig::new(&spec, 8, 0.0, 0.0, 8, None).unwrap();
        let transcript = run_protocol(&spec, &config, 2).unwrap();
        let (eps, bits) = reliability_and_comm(&transcript, &config).unwrap();
        assert_eq!(eps, 0.0);
        assert_eq!(bits, 24);

        let spec2 = path_spec(2, WiretapChannel::uninformative(2).unwrap(), vec![1, 2]);
        let config2 = ProtocolConfig::new(&spec2, 4, 0.0, 0.0, 2, None).unwrap();
        let transcript2 = run_protocol(&spec2, &config2, 2).unwrap();
        let (_, bits2) = reliability_and_comm(&transcript2, &config2).unwrap();
        assert_eq!(bits2, 0);
    }

    #[test]
    fn config_validation_errors() {
        let spec = path_spec(3, WiretapChannel::bec(0.5).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            ProtocolConfig::new(&spec, 4, 0.1, 0.0, 2, Some(edge(1, 3))),
            Err(ProtocolError::RootEdgeOutsideSubtree(_))
        ));
        assert!(matches!(
            ProtocolConfig::new(&spec, 4, 0.1, 0.0, 0, None),
            Err(ProtocolError::ZeroLambda)
        ));
        // Capacity 0.5 at n=4 admits at most lambda = 2 with delta = 0.1.
        assert!(matches!(
            ProtocolConfig::new(&spec, 4, 0.1, 0.0, 3, None),
            Err(ProtocolError::LambdaExceedsBound { .. })
        ));
        // lambda larger than the admissible bound (which never exceeds the
        // encoded input length, since the capacity is at most the alphabet's
        // bits per symbol).
        let spec2 = path_spec(2, WiretapChannel::uninformative(2).unwrap(), vec![1, 2]);
        assert!(matches!(
            ProtocolConfig::new(&spec2, 2, 0.0, 0.0, 3, None),
            Err(ProtocolError::LambdaExceedsBound { .. })
        ));
    }

    #[test]
    fn transcript_json_round_trip() {
        let spec = path_spec(4, WiretapChannel::bec(0.5).unwrap(), vec![1, 2, 3, 4]);
        let config = ProtocolConfig::new(&spec, 8, 0.1, 0.0, 2, None).unwrap();
        let transcript = run_protocol(&spec, &config, 33).unwrap();
        let text = transcript.to_json_string();
        let back = Transcript::from_json_str(&text).unwrap();
        assert_eq!(transcript, back);
        // Byte-identical re-serialization.
        assert_eq!(text, back.to_json_string());
    }

    #[test]
    fn quaternary_alphabet_encodes_big_endian_and_shares_keys() {
        assert_eq!(
            encode_symbols(&[3, 1], Alphabet::new(4).unwrap()).to_hex(),
            "d0" // 11 01 padded with zeros
        );
        let tree = Tree::new(3, vec![edge(1, 2), edge(2, 3)]).unwrap();
        let quarter = vec![0.25; 4];
        let sources = tree
            .edges()
            .iter()
            .map(|&e| {
                EdgeSource::new(
                    e,
                    quarter.clone(),
                    WiretapChannel::uninformative(4).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let spec = TreePinSpec::new(tree, sources, vec![1, 2, 3]).unwrap();
        // Capacity 2 bits/round: n=2 admits a 4-bit key.
        let config = ProtocolConfig::new(&spec, 2, 0.0, 0.0, 4, None).unwrap();
        let transcript = run_protocol(&spec, &config, 5).unwrap();
        let root_key = &transcript.pairwise_keys()[&transcript.root_edge()];
        assert_eq!(root_key.len(), 4);
        assert!(transcript.keys().values().all(|k| k == root_key));
    }

    #[test]
    fn exact_secrecy_matches_slow_oracle_quaternary() {
        // 4-ary source through a 4-ary erasure channel (column 4 erases).
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|v| {
                let mut row = vec![0.0; 5];
                row[v] = 0.5;
                row[4] = 0.5;
                row
            })
            .collect();
        let channel = WiretapChannel::from_matrix(rows).unwrap();
        let tree = Tree::new(2, vec![edge(1, 2)]).unwrap();
        let source = EdgeSource::new(edge(1, 2), vec![0.25; 4], channel).unwrap();
        let spec = TreePinSpec::new(tree, vec![source], vec![1, 2]).unwrap();
        let config = ProtocolConfig::new(&spec, 1, 0.0, 0.0, 1, None).unwrap();
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        let slow = slow_exact_sd(&spec, &config);
        assert!(
            (report.statistical_distance - slow).abs() < 1e-12,
            "fast {} vs slow {slow}",
            report.statistical_distance
        );
        assert!(report.statistical_distance <= report.composition_bound + 1e-12);
    }

    // ----- exact secrecy -----

    /// Slow independent oracle: enumerate every (seed, value, wiretap)
    /// realization of the whole network, push each through the protocol
    /// rules directly, histogram (K, F, Q, Z), and compute the statistical
    /// distance to an ideal uniform key by direct summation.
    fn slow_exact_sd(spec: &TreePinSpec<f64>, config: &ProtocolConfig<f64>) -> f64 {
        let subtree = spec.steiner();
        let sub_edges: Vec<Edge> = subtree.edges().to_vec();
        let all_edges: Vec<Edge> = spec.tree().edges().to_vec();
        let parent = orient_subtree(&subtree, config.root_edge());
        let n = config.rounds();
        let lambda = config.lambda();

        let seed_lens: Vec<usize> = sub_edges
            .iter()
            .map(|&e| extractor_seed_len(n, spec.source(e).unwrap().value_alphabet(), lambda))
            .collect();
        let seed_counts: Vec<u64> = seed_lens.iter().map(|&l| 1u64 << l).collect();

        // rest = (F, Q, Z) encoded as a vector; value = per-key-probabilities.
        let mut groups: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();

        let mut seed_idx = vec![0u64; sub_edges.len()];
        loop {
            let seeds: Vec<Bits> = sub_edges
                .iter()
                .zip(&seed_idx)
                .zip(&seed_lens)
                .map(|((_, &q), &len)| Bits::from_u64(len, q))
                .collect();
            let q_prob: f64 = 1.0 / seed_counts.iter().product::<u64>() as f64;

            // Enumerate every joint (v, z) over ALL tree edges.
            let mut digits: Vec<usize> = Vec::new();
            let mut bases: Vec<usize> = Vec::new();
            for &e in &all_edges {
                let source = spec.source(e).unwrap();
                for _ in 0..n {
                    bases.push(source.value_alphabet().size());
                }
                for _ in 0..n {
                    bases.push(source.channel().output_alphabet().size());
                }
            }
            digits.resize(bases.len(), 0);
            'states: loop {
                // Decode and score this realization.
                let mut prob = q_prob;
                let mut values: BTreeMap<Edge, Vec<u8>> = BTreeMap::new();
                let mut z_code: Vec<u64> = Vec::new();
                let mut cursor = 0;
                for &e in &all_edges {
                    let source = spec.source(e).unwrap();
                    let v: Vec<u8> = digits[cursor..cursor + n]
                        .iter()
                        .map(|&d| d as u8)
                        .collect();
                    let z: Vec<u8> = digits[cursor + n..cursor + 2 * n]
                        .iter()
                        .map(|&d| d as u8)
                        .collect();
                    cursor += 2 * n;
                    for t in 0..n {
                        prob *= source.value_dist()[v[t] as usize]
                            * source.channel().prob(v[t] as usize, z[t] as usize);
                    }
                    let mut code = 0u64;
                    for &zt in &z {
                        code = code * source.channel().output_alphabet().size() as u64 + zt as u64;
                    }
                    z_code.push(code);
                    values.insert(e, v);
                }
                if prob > 0.0 {
                    // Pairwise keys for subtree edges.
                    let mut pairwise: BTreeMap<Edge, Bits> = BTreeMap::new();
                    for (pos, &e) in sub_edges.iter().enumerate() {
                        let source = spec.source(e).unwrap();
                        let key = extract_pairwise(
                            &values[&e],
                            source.value_alphabet(),
                            lambda,
                            &seeds[pos],
                        )
                        .unwrap();
                        pairwise.insert(e, key);
                    }
                    let key_of = |node: NodeId| &pairwise[&Edge::new(node, parent[&node]).unwrap()];
                    // Broadcasts, in deterministic map order.
                    let mut f_code: Vec<u64> = Vec::new();
                    for &node in subtree.nodes() {
                        for &e in &sub_edges {
                            if let Some(neighbor) = e.other(node) {
                                if neighbor != parent[&node] {
                                    f_code.push((key_of(node) ^ &pairwise[&e]).low_u64());
                                }
                            }
                        }
                    }
                    let k = pairwise[&config.root_edge()].low_u64() as usize;
                    let mut rest = f_code;
                    rest.extend(seed_idx.iter().copied());
                    rest.extend(z_code);
                    groups.entry(rest).or_insert_with(|| vec![0.0; 1 << lambda])[k] += prob;
                }
                // Advance (v, z) odometer.
                for pos in 0..digits.len() {
                    digits[pos] += 1;
                    if digits[pos] < bases[pos] {
                        continue 'states;
                    }
                    digits[pos] = 0;
                }
                break;
            }
            // Advance seed odometer.
            let mut pos = 0;
            loop {
                if pos == sub_edges.len() {
                    break;
                }
                seed_idx[pos] += 1;
                if seed_idx[pos] < seed_counts[pos] {
                    break;
                }
                seed_idx[pos] = 0;
                pos += 1;
            }
            if pos == sub_edges.len() {
                break;
            }
        }

        let key_count = (1usize << lambda) as f64;
        let mut sd = 0.0;
        for per_key in groups.values() {
            let total: f64 = per_key.iter().sum();
            for &p in per_key {
                sd += (p - total / key_count).abs();
            }
        }
        sd / 2.0
    }

    #[test]
    fn exact_secrecy_matches_slow_oracle_full_targets() {
        let spec = path_spec(3, WiretapChannel::bsc(0.25).unwrap(), vec![1, 2, 3]);
        let config = ProtocolConfig::new(&spec, 2, 0.05, 0.0, 1, None).unwrap();
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        let slow = slow_exact_sd(&spec, &config);
        assert!(
            (report.statistical_distance - slow).abs() < 1e-12,
            "fast {} vs slow {slow}",
            report.statistical_distance
        );
        assert_eq!(report.seed_mode, SeedModeUsed::Enumerated);
        assert!(report.statistical_distance <= report.composition_bound + 1e-12);
    }

    #[test]
    fn exact_secrecy_matches_slow_oracle_with_outside_edge() {
        // Targets {1,2} of a 3-path: edge (2,3) is outside the subtree and
        // its wiretap output must cancel from the distance exactly.
        let spec = path_spec(3, WiretapChannel::bec(0.5).unwrap(), vec![1, 2]);
        let config = ProtocolConfig::new(&spec, 2, 0.0, 0.0, 1, None).unwrap();
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        let slow = slow_exact_sd(&spec, &config);
        assert!(
            (report.statistical_distance - slow).abs() < 1e-12,
            "fast {} vs slow {slow}",
            report.statistical_distance
        );
        assert_eq!(report.subtree_edges, 1);
        assert_eq!(report.communication_bits, 0);
    }

    #[test]
    fn exact_secrecy_matches_slow_oracle_star() {
        let tree = Tree::new(4, vec![edge(1, 2), edge(1, 3), edge(1, 4)]).unwrap();
        let spec = uniform_bit_spec(
            tree,
            |e| {
                if e == edge(1, 2) {
                    WiretapChannel::bsc(0.3).unwrap()
                } else {
                    WiretapChannel::bec(0.5).unwrap()
                }
            },
            (1..=4).collect(),
        );
        let config = ProtocolConfig::new(&spec, 2, 0.0, 0.0, 1, None).unwrap();
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        let slow = slow_exact_sd(&spec, &config);
        assert!(
            (report.statistical_distance - slow).abs() < 1e-12,
            "fast {} vs slow {slow}",
            report.statistical_distance
        );
        assert!(report.statistical_distance <= report.composition_bound + 1e-12);
    }

    #[test]
    fn independent_wiretap_and_full_length_key_is_perfectly_secret() {
        // Z independent of V and lambda = n: the key is exactly uniform and
        // independent of everything public.
        let spec = path_spec(3, WiretapChannel::uninformative(2).unwrap(), vec![1, 2, 3]);
        let config = ProtocolConfig::new(&spec, 2, 0.0, 0.0, 2, None).unwrap();
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        assert!(report.statistical_distance < 1e-14);
        assert!(report.pairwise_sd_max < 1e-14);
    }

    #[test]
    fn conditional_mode_reports_its_seed() {
        let spec = path_spec(3, WiretapChannel::bsc(0.25).unwrap(), vec![1, 2, 3]);
        let config = ProtocolConfig::new(&spec, 2, 0.05, 0.0, 1, None).unwrap();
        let options = SecrecyOptions {
            state_cap: DEFAULT_STATE_CAP,
            seed_mode: SeedMode::Conditional { seed: 7 },
        };
        let report = exact_secrecy(&spec, &config, &options).unwrap();
        assert_eq!(report.seed_mode, SeedModeUsed::Conditional { seed: 7 });
        assert!(report.statistical_distance <= report.composition_bound + 1e-12);
    }

    #[test]
    fn exact_secrecy_refuses_oversized_state_spaces() {
        let spec = path_spec(3, WiretapChannel::bec(0.5).unwrap(), vec![1, 2, 3]);
        let config = ProtocolConfig::new(&spec, 2, 0.0, 0.0, 1, None).unwrap();
        let options = SecrecyOptions {
            state_cap: 16,
            seed_mode: SeedMode::Auto,
        };
        assert!(matches!(
            exact_secrecy(&spec, &config, &options),
            Err(ProtocolError::StateSpaceTooLarge { cap: 16, .. })
        ));
    }

    #[test]
    fn protocol_and_secrecy_work_at_f32() {
        let tree = Tree::new(2, vec![edge(1, 2)]).unwrap();
        let source =
            EdgeSource::<f32>::uniform_bit(edge(1, 2), WiretapChannel::<f32>::bec(0.5).unwrap())
                .unwrap();
        let spec = TreePinSpec::new(tree, vec![source], vec![1, 2]).unwrap();
        let config = ProtocolConfig::new(&spec, 2, 0.0f32, 0.0, 1, None).unwrap();
        let transcript = run_protocol(&spec, &config, 3).unwrap();
        assert_eq!(transcript.keys()[&1], transcript.keys()[&2]);
        let report = exact_secrecy(&spec, &config, &SecrecyOptions::default()).unwrap();
        assert!(report.statistical_distance <= report.composition_bound + 1e-5);
    }

    #[test]
    fn reliability_sweep_on_random_trees() {
        let mut rng = SplitMix64::new(0xbeef);
        for _ in 0..100 {
            let m = rng.next_below(7) as usize + 2;
            let tree = random_tree(&mut rng, m);
            let channel = if rng.next_f64() < 0.5 {
                WiretapChannel::bec(0.3 + 0.6 * rng.next_f64()).unwrap()
            } else {
                WiretapChannel::bsc(0.06 + 0.4 * rng.next_f64()).unwrap()
            };
            let spec = uniform_bit_spec(tree, |_| channel.clone(), (1..=m).collect());
            let c = spec.to_weighted().wsk_capacity().0;
            let config = ProtocolConfig::with_chosen_lambda(&spec, 8, c / 2.0, 0.0).unwrap();
            let transcript = run_protocol(&spec, &config, rng.next_u64()).unwrap();
            let subtree = spec.steiner();
            assert_eq!(transcript.broadcasts().len(), subtree.edges().len() - 1);
            let (eps, _) = reliability_and_comm(&transcript, &config).unwrap();
            assert_eq!(eps, 0.0);
        }
    }
}
