//! Discrete probability machinery: pairwise source distributions, wiretap
//! channels, conditional entropy in bits, IID sampling, and exhaustive
//! joint-distribution enumeration.
//!
//! Each edge of the network carries one shared variable `V` observed
//! identically at both endpoints, plus a wiretap channel producing the
//! adversary's per-edge view `Z` from `V`. Because the variables of distinct
//! edges are mutually independent and the adversary's view factors across
//! edges, every conditional entropy reduces to the per-edge quantity
//! `H(V|Z)` and joint distributions are products over edges.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::capacity::TreePinSpec;
use crate::graph::Edge;
use crate::rng::SplitMix64;
use crate::scalar::{real, stochastic_tolerance, Real};

/// Default cap on the number of states `enumerate_joint` will visit.
pub const DEFAULT_STATE_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alphabet size {found} is below the minimum of {min}")]
    AlphabetTooSmall { found: usize, min: usize },
    #[error("alphabet size {0} exceeds 256 symbols")]
    AlphabetTooLarge(usize),
    #[error("probability vector sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("probability entry {value} at index {index} is negative")]
    NegativeProbability { index: usize, value: f64 },
    #[error("channel row {row} sums to {sum}, not 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("channel rows have inconsistent lengths")]
    RaggedMatrix,
    #[error("channel matrix is empty")]
    EmptyMatrix,
    #[error("distribution length {dist} does not match channel input alphabet {input}")]
    DistChannelMismatch { dist: usize, input: usize },
    #[error("sample count must be at least 1")]
    ZeroRounds,
    #[error("joint state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
}

/// A finite symbol alphabet `{0, ..., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    /// An alphabet of `size` symbols; channel outputs may be unary, source
    /// alphabets are checked for `size >= 2` at [`EdgeSource`] construction.
    pub fn new(size: usize) -> Result<Self, ModelError> {
        if size < 1 {
            return Err(ModelError::AlphabetTooSmall {
                found: size,
                min: 1,
            });
        }
        if size > 256 {
            return Err(ModelError::AlphabetTooLarge(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Bits of a fixed-width big-endian encoding of one symbol.
    pub fn bits_per_symbol(&self) -> usize {
        usize::BITS as usize - (self.size - 1).leading_zeros() as usize
    }
}

/// Shannon entropy of a probability vector, in bits, with `0 log 0 = 0`.
pub fn entropy<F: Real>(dist: &[F]) -> F {
    let mut h = F::zero();
    for &p in dist {
        if p > F::zero() {
            h = h - p * p.log2();
        }
    }
    h
}

fn check_distribution<F: Real>(dist: &[F]) -> Result<(), ModelError> {
    let mut sum = F::zero();
    for (index, &p) in dist.iter().enumerate() {
        if p < F::zero() {
            return Err(ModelError::NegativeProbability {
                index,
                value: p.to_f64().unwrap_or(f64::NAN),
            });
        }
        sum = sum + p;
    }
    if (sum - F::one()).abs() > stochastic_tolerance::<F>() {
        return Err(ModelError::NotNormalized {
            sum: sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// A discrete memoryless wiretap channel `P(Z|V)` as a row-stochastic table;
/// rows are inputs, columns outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapChannel<F> {
    input: Alphabet,
    output: Alphabet,
    matrix: Vec<Vec<F>>,
}

impl<F: Real> WiretapChannel<F> {
    pub fn from_matrix(matrix: Vec<Vec<F>>) -> Result<Self, ModelError> {
        if matrix.is_empty() || matrix[0].is_empty() {
            return Err(ModelError::EmptyMatrix);
        }
        let width = matrix[0].len();
        if matrix.iter().any(|row| row.len() != width) {
            return Err(ModelError::RaggedMatrix);
        }
        for (row_idx, row) in matrix.iter().enumerate() {
            check_distribution(row).map_err(|e| match e {
                ModelError::NotNormalized { sum } => {
                    ModelError::RowNotStochastic { row: row_idx, sum }
                }
                other => other,
            })?;
        }
        Ok(Self {
            input: Alphabet::new(matrix.len())?,
            output: Alphabet::new(width)?,
            matrix,
        })
    }

    /// Binary symmetric channel with the given crossover probability.
    pub fn bsc(crossover: F) -> Result<Self, ModelError> {
        let q = F::one() - crossover;
        Self::from_matrix(vec![vec![q, crossover], vec![crossover, q]])
    }

    /// Binary erasure channel; column 2 is the erasure symbol.
    pub fn bec(erasure: F) -> Result<Self, ModelError> {
        let keep = F::one() - erasure;
        Self::from_matrix(vec![
            vec![keep, F::zero(), erasure],
            vec![F::zero(), keep, erasure],
        ])
    }

    /// Noiseless channel: the adversary sees `V` exactly.
    pub fn identity(size: usize) -> Result<Self, ModelError> {
        let mut matrix = vec![vec![F::zero(); size]; size];
        for (v, row) in matrix.iter_mut().enumerate() {
            row[v] = F::one();
        }
        Self::from_matrix(matrix)
    }

    /// Channel with a single output symbol: the adversary learns nothing.
    pub fn uninformative(input_size: usize) -> Result<Self, ModelError> {
        Self::from_matrix(vec![vec![F::one()]; input_size])
    }

    pub fn input_alphabet(&self) -> Alphabet {
        self.input
    }

    pub fn output_alphabet(&self) -> Alphabet {
        self.output
    }

    pub fn row(&self, v: usize) -> &[F] {
        &self.matrix[v]
    }

    pub fn prob(&self, v: usize, z: usize) -> F {
        self.matrix[v][z]
    }
}

/// One edge's correlation unit: the shared variable's distribution and the
/// wiretap channel acting on it. Both endpoints observe the identical
/// realization of `V`, so no reconciliation is ever needed.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSource<F> {
    edge: Edge,
    value_dist: Vec<F>,
    channel: WiretapChannel<F>,
}

impl<F: Real> EdgeSource<F> {
    pub fn new(
        edge: Edge,
        value_dist: Vec<F>,
        channel: WiretapChannel<F>,
    ) -> Result<Self, ModelError> {
        if value_dist.len() < 2 {
            return Err(ModelError::AlphabetTooSmall {
                found: value_dist.len(),
                min: 2,
            });
        }
        if value_dist.len() != channel.input_alphabet().size() {
            return Err(ModelError::DistChannelMismatch {
                dist: value_dist.len(),
                input: channel.input_alphabet().size(),
            });
        }
        check_distribution(&value_dist)?;
        Ok(Self {
            edge,
            value_dist,
            channel,
        })
    }

    /// Uniform bit through the given channel; the canonical test source.
    pub fn uniform_bit(edge: Edge, channel: WiretapChannel<F>) -> Result<Self, ModelError> {
        let half = real::<F>(0.5);
        Self::new(edge, vec![half, half], channel)
    }

    pub fn edge(&self) -> Edge {
        self.edge
    }

    pub fn value_dist(&self) -> &[F] {
        &self.value_dist
    }

    pub fn channel(&self) -> &WiretapChannel<F> {
        &self.channel
    }

    pub fn value_alphabet(&self) -> Alphabet {
        self.channel.input_alphabet()
    }
}

/// `H(V|Z)` in bits, computed exactly from the joint table as
/// `H(V,Z) - H(Z)`. Because the adversary's view factors across edges, the
/// per-edge wiretap output is the only part of `Z` correlated with this
/// edge's `V`, so this is also `H(V|Z_full)`.
pub fn conditional_entropy<F: Real>(source: &EdgeSource<F>) -> F {
    let n_v = source.value_alphabet().size();
    let n_z = source.channel().output_alphabet().size();
    let mut joint = Vec::with_capacity(n_v * n_z);
    let mut z_marginal = vec![F::zero(); n_z];
    for v in 0..n_v {
        let pv = source.value_dist[v];
        for (z, marginal) in z_marginal.iter_mut().enumerate() {
            let p = pv * source.channel.prob(v, z);
            joint.push(p);
            *marginal = *marginal + p;
        }
    }
    // Clamp the difference of two float sums at zero for deterministic channels.
    (entropy(&joint) - entropy(&z_marginal)).max(F::zero())
}

/// `H(X_M|Z)` for the whole network: the sum of per-edge conditional
/// entropies, by mutual independence across edges.
pub fn total_conditional_entropy<F: Real>(spec: &TreePinSpec<F>) -> F {
    spec.sources().values().map(conditional_entropy).sum()
}

/// One batch of `n` IID rounds: per-edge value sequences and per-edge
/// adversary sequences, reproducible bit-exactly from the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    n: usize,
    seed: u64,
    values: BTreeMap<Edge, Vec<u8>>,
    wiretaps: BTreeMap<Edge, Vec<u8>>,
}

impl SampleBatch {
    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self, edge: Edge) -> &[u8] {
        &self.values[&edge]
    }

    pub fn wiretaps(&self, edge: Edge) -> &[u8] {
        &self.wiretaps[&edge]
    }
}

fn sample_index<F: Real>(dist: &[F], u: f64) -> usize {
    let mut acc = F::zero();
    let u = real::<F>(u);
    for (idx, &p) in dist.iter().enumerate() {
        acc = acc + p;
        if u < acc {
            return idx;
        }
    }
    dist.len() - 1
}

/// Draws `n` IID rounds for every edge of the spec. Deterministic in
/// `(spec, n, seed)`; edges are visited in sorted order.
pub fn sample<F: Real>(
    spec: &TreePinSpec<F>,
    n: usize,
    seed: u64,
) -> Result<SampleBatch, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroRounds);
    }
    let mut rng = SplitMix64::new(seed);
    let mut values = BTreeMap::new();
    let mut wiretaps = BTreeMap::new();
    for (&edge, source) in spec.sources() {
        let mut v_seq = Vec::with_capacity(n);
        let mut z_seq = Vec::with_capacity(n);
        for _ in 0..n {
            let v = sample_index(source.value_dist(), rng.next_f64());
            let z = sample_index(source.channel().row(v), rng.next_f64());
            v_seq.push(v as u8);
            z_seq.push(z as u8);
        }
        values.insert(edge, v_seq);
        wiretaps.insert(edge, z_seq);
    }
    Ok(SampleBatch {
        n,
        seed,
        values,
        wiretaps,
    })
}

/// One complete joint realization of every edge's value and adversary
/// sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointRealization {
    pub values: BTreeMap<Edge, Vec<u8>>,
    pub wiretaps: BTreeMap<Edge, Vec<u8>>,
}

/// Iterator over every joint realization with its exact probability.
pub struct JointIter<'a, F: Real> {
    spec: &'a TreePinSpec<F>,
    n: usize,
    // Odometer digits: for each edge, n value digits then n wiretap digits.
    digits: Vec<u8>,
    bases: Vec<u8>,
    done: bool,
}

impl<F: Real> JointIter<'_, F> {
    fn realization(&self) -> (JointRealization, F) {
        let mut values = BTreeMap::new();
        let mut wiretaps = BTreeMap::new();
        let mut prob = F::one();
        let mut cursor = 0;
        for (&edge, source) in self.spec.sources() {
            let v_seq = self.digits[cursor..cursor + self.n].to_vec();
            let z_seq = self.digits[cursor + self.n..cursor + 2 * self.n].to_vec();
            cursor += 2 * self.n;
            for t in 0..self.n {
                let v = v_seq[t] as usize;
                let z = z_seq[t] as usize;
                prob = prob * source.value_dist()[v] * source.channel().prob(v, z);
            }
            values.insert(edge, v_seq);
            wiretaps.insert(edge, z_seq);
        }
        (JointRealization { values, wiretaps }, prob)
    }

    fn advance(&mut self) {
        for idx in (0..self.digits.len()).rev() {
            if self.digits[idx] + 1 < self.bases[idx] {
                self.digits[idx] += 1;
                for d in &mut self.digits[idx + 1..] {
                    *d = 0;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl<F: Real> Iterator for JointIter<'_, F> {
    type Item = (JointRealization, F);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.realization();
        self.advance();
        Some(item)
    }
}

/// Number of joint states `Π_edges (|V|·|Z|)^n`, or `None` on overflow.
pub fn joint_state_count<F: Real>(spec: &TreePinSpec<F>, n: usize) -> Option<u128> {
    let mut states: u128 = 1;
    for source in spec.sources().values() {
        let per_round = (source.value_alphabet().size() as u128)
            .checked_mul(source.channel().output_alphabet().size() as u128)?;
        for _ in 0..n {
            states = states.checked_mul(per_round)?;
        }
    }
    Some(states)
}

/// Enumerates every joint realization of all edge value sequences and
/// adversary sequences together with its exact probability. Probabilities
/// sum to 1 (within accumulation error). Refuses state spaces above `cap`.
pub fn enumerate_joint<F: Real>(
    spec: &TreePinSpec<F>,
    n: usize,
    cap: u128,
) -> Result<JointIter<'_, F>, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroRounds);
    }
    let states = joint_state_count(spec, n).ok_or(ModelError::StateSpaceTooLarge {
        states: u128::MAX,
        cap,
    })?;
    if states > cap {
        return Err(ModelError::StateSpaceTooLarge { states, cap });
    }
    let mut bases = Vec::new();
    for source in spec.sources().values() {
        let v = source.value_alphabet().size() as u8;
        let z = source.channel().output_alphabet().size() as u8;
        bases.extend(std::iter::repeat_n(v, n));
        bases.extend(std::iter::repeat_n(z, n));
    }
    Ok(JointIter {
        spec,
        n,
        digits: vec![0; bases.len()],
        bases,
        done: false,
    })
}
