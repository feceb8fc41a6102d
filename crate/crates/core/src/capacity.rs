//! Capacity formulas and bounds for tree-structured pairwise independent
//! networks.
//!
//! The closed form: the wiretap secret-key capacity equals the minimum
//! per-edge conditional entropy over the minimal subtree spanning the target
//! set. Every closed-form quantity here is paired with an independent
//! brute-force route that can be cross-checked numerically: a generic LP
//! over the exponential constraint family for the omniscience rate,
//! exhaustive partition search for the upper bound, and max-flow or
//! spanning-tree packing for the lower bound.
//!
//! All operations run on [`WeightedTreePin`], which carries only the
//! per-edge entropy weights; a fully specified [`TreePinSpec`] (with
//! distributions and wiretap channels) reduces to it by computing
//! `H(V|Z)` per edge. This keeps synthetic-weight sweeps and real
//! channel-backed networks on the same code path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{
    enumerate_constraint_subsets, enumerate_partitions, max_edge_disjoint_paths,
    nash_williams_value, steiner_subtree, Edge, GraphError, Multigraph, NodeId, NodeSet,
    SteinerSubtree, Tree, MAX_PARTITION_NODES,
};
use crate::model::{conditional_entropy, EdgeSource, ModelError};
use crate::scalar::{real, Real};
use crate::simplex::{solve_min_geq, SimplexError};

/// Largest node count accepted by the LP oracle (2^m constraints).
pub const MAX_LP_NODES: usize = 8;

/// Absolute tolerance for feasibility checks of rate vectors.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("target set needs at least 2 terminals, got {0}")]
    TargetTooSmall(usize),
    #[error("edge {0} has no source attached")]
    MissingSource(Edge),
    #[error("source attached to {0}, which is not a tree edge")]
    UnknownSourceEdge(Edge),
    #[error("edge {edge} has negative weight {weight}")]
    NegativeWeight { edge: Edge, weight: f64 },
    #[error("{m} nodes exceeds the LP oracle limit of {limit}")]
    TooManyNodesForLp { m: usize, limit: usize },
    #[error(
        "packing bound is only available for the full terminal set or a pair \
         (got a target set of {0} terminals)"
    )]
    PackingUnavailable(usize),
    #[error("packing bound needs n >= 1")]
    ZeroRounds,
    #[error("LP oracle failed: {0}")]
    Lp(SimplexError),
    #[error("internal invariant violated: {0}")]
    InvariantViolated(String),
}

/// A fully specified Tree-PIN: the tree, one source per edge, and the target
/// terminal set (at least two terminals).
#[derive(Debug, Clone, PartialEq)]
pub struct TreePinSpec<F> {
    tree: Tree,
    sources: BTreeMap<Edge, EdgeSource<F>>,
    targets: Vec<NodeId>,
}

impl<F: Real> TreePinSpec<F> {
    pub fn new(
        tree: Tree,
        sources: Vec<EdgeSource<F>>,
        targets: Vec<NodeId>,
    ) -> Result<Self, CapacityError> {
        let targets = normalize_targets(&tree, targets)?;
        let mut map = BTreeMap::new();
        for source in sources {
            let edge = source.edge();
            if !tree.contains_edge(edge) {
                return Err(CapacityError::UnknownSourceEdge(edge));
            }
            if map.insert(edge, source).is_some() {
                return Err(CapacityError::UnknownSourceEdge(edge));
            }
        }
        for &edge in tree.edges() {
            if !map.contains_key(&edge) {
                return Err(CapacityError::MissingSource(edge));
            }
        }
        Ok(Self {
            tree,
            sources: map,
            targets,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn sources(&self) -> &BTreeMap<Edge, EdgeSource<F>> {
        &self.sources
    }

    pub fn source(&self, edge: Edge) -> Option<&EdgeSource<F>> {
        self.sources.get(&edge)
    }

    /// Reduces to the weight-only view: per-edge `H(V|Z)` in bits.
    pub fn to_weighted(&self) -> WeightedTreePin<F> {
        let weights = self
            .sources
            .iter()
            .map(|(&edge, source)| (edge, conditional_entropy(source)))
            .collect();
        WeightedTreePin {
            tree: self.tree.clone(),
            weights,
            targets: self.targets.clone(),
        }
    }

    pub fn steiner(&self) -> SteinerSubtree {
        steiner_subtree(&self.tree, &self.targets).expect("targets validated at construction")
    }
}

fn normalize_targets(tree: &Tree, mut targets: Vec<NodeId>) -> Result<Vec<NodeId>, CapacityError> {
    targets.sort_unstable();
    targets.dedup();
    for &t in &targets {
        if t < 1 || t > tree.node_count() {
            return Err(GraphError::NodeOutOfRange {
                node: t,
                m: tree.node_count(),
            }
            .into());
        }
    }
    if targets.len() < 2 {
        return Err(CapacityError::TargetTooSmall(targets.len()));
    }
    Ok(targets)
}

/// A Tree-PIN reduced to per-edge entropy weights. Everything the capacity
/// formulas, the LP, and the bounds consume lives here.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTreePin<F> {
    tree: Tree,
    weights: BTreeMap<Edge, F>,
    targets: Vec<NodeId>,
}

impl<F: Real> WeightedTreePin<F> {
    pub fn new(
        tree: Tree,
        weights: BTreeMap<Edge, F>,
        targets: Vec<NodeId>,
    ) -> Result<Self, CapacityError> {
        let targets = normalize_targets(&tree, targets)?;
        for (&edge, &w) in &weights {
            if !tree.contains_edge(edge) {
                return Err(CapacityError::UnknownSourceEdge(edge));
            }
            if w < F::zero() {
                return Err(CapacityError::NegativeWeight {
                    edge,
                    weight: w.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for &edge in tree.edges() {
            if !weights.contains_key(&edge) {
                return Err(CapacityError::MissingSource(edge));
            }
        }
        Ok(Self {
            tree,
            weights,
            targets,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn weight(&self, edge: Edge) -> F {
        self.weights[&edge]
    }

    pub fn weights(&self) -> &BTreeMap<Edge, F> {
        &self.weights
    }

    /// `H(X_M|Z)`: the sum of all edge weights.
    pub fn total_weight(&self) -> F {
        self.weights.values().copied().sum()
    }

    pub fn steiner(&self) -> SteinerSubtree {
        steiner_subtree(&self.tree, &self.targets).expect("targets validated at construction")
    }

    /// The wiretap secret-key capacity: the minimum weight over the edges of
    /// the minimal subtree spanning the targets, with the argmin edge. Ties
    /// break to the lexicographically smallest edge.
    pub fn wsk_capacity(&self) -> (F, Edge) {
        let subtree = self.steiner();
        let mut best: Option<(F, Edge)> = None;
        for &edge in subtree.edges() {
            let w = self.weight(edge);
            if best.is_none_or(|(bw, _)| w < bw) {
                best = Some((w, edge));
            }
        }
        best.expect("targets have at least 2 nodes, so T(A) has at least one edge")
    }

    /// The minimum omniscience communication rate, closed form:
    /// total weight minus the minimum weight over the spanning subtree.
    pub fn r_co_closed_form(&self) -> F {
        self.total_weight() - self.wsk_capacity().0
    }

    /// The private-key capacity with the adversary as a compromised dummy
    /// terminal: `H(X_M|Z) - R_CO`. Equals the WSK capacity on Tree-PINs.
    pub fn pk_capacity(&self) -> F {
        self.total_weight() - self.r_co_closed_form()
    }

    /// The omniscience rate assignment: zero on the argmin edge, and every
    /// other edge's full weight on the component owned by the endpoint
    /// closer to the argmin pair, directed toward the farther endpoint.
    pub fn rate_assignment(&self) -> RateVector<F> {
        let (_, argmin) = self.wsk_capacity();
        // Distances to one designated argmin endpoint orient every edge;
        // edges across the argmin pair see it through the other endpoint.
        let (i_star, _) = argmin.endpoints();
        let dist = self
            .tree
            .distance_map(i_star)
            .expect("argmin endpoint is a tree node");
        let mut components = BTreeMap::new();
        for &edge in self.tree.edges() {
            let (i, j) = edge.endpoints();
            if edge == argmin {
                components.insert((i, j), F::zero());
                components.insert((j, i), F::zero());
                continue;
            }
            // Adjacent nodes differ by exactly one edge in distance to the
            // argmin endpoint, so there is never a tie to break.
            assert_ne!(dist[i], dist[j], "tree distances to {i_star} cannot tie");
            let (closer, farther) = if dist[i] < dist[j] { (i, j) } else { (j, i) };
            components.insert((closer, farther), self.weight(edge));
            components.insert((farther, closer), F::zero());
        }
        RateVector::from_components(self.tree.node_count(), components)
            .expect("assignment components are nonnegative by construction")
    }

    /// Verifies a per-node rate vector against every constraint
    /// `sum_{j in B} R_j >= sum of weights of edges inside B` for the
    /// enumerated subset family. Returns the violated subsets (empty on
    /// pass).
    pub fn check_feasibility(
        &self,
        node_rates: &BTreeMap<NodeId, F>,
    ) -> Result<FeasibilityReport, CapacityError> {
        let tolerance = real::<F>(FEASIBILITY_TOLERANCE);
        let mut violated = Vec::new();
        for subset in enumerate_constraint_subsets(self.tree.node_count(), &self.targets)? {
            let lhs: F = node_rates
                .iter()
                .filter(|(&j, _)| subset.contains(j))
                .map(|(_, &r)| r)
                .sum();
            let rhs = self.internal_weight(&subset);
            if lhs < rhs - tolerance {
                violated.push(subset);
            }
        }
        Ok(FeasibilityReport { violated })
    }

    /// Sum of weights of edges with both endpoints inside the subset.
    fn internal_weight(&self, subset: &NodeSet) -> F {
        self.weights
            .iter()
            .filter(|(edge, _)| {
                let (i, j) = edge.endpoints();
                subset.contains(i) && subset.contains(j)
            })
            .map(|(_, &w)| w)
            .sum()
    }

    /// Brute-force omniscience-rate oracle: minimizes the sum of node rates
    /// over the full enumerated constraint family with a generic dense
    /// simplex solve. Independent of the closed form.
    pub fn r_co_lp(&self) -> Result<LpOutcome<F>, CapacityError> {
        let m = self.tree.node_count();
        if m > MAX_LP_NODES {
            return Err(CapacityError::TooManyNodesForLp {
                m,
                limit: MAX_LP_NODES,
            });
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for subset in enumerate_constraint_subsets(m, &self.targets)? {
            let mut row = vec![F::zero(); m];
            for node in subset.nodes() {
                row[node - 1] = F::one();
            }
            rows.push(row);
            rhs.push(self.internal_weight(&subset));
        }
        let objective = vec![F::one(); m];
        let solution = solve_min_geq(&objective, &rows, &rhs, 50_000).map_err(CapacityError::Lp)?;
        let node_rates = (1..=m).map(|j| (j, solution.x[j - 1])).collect();
        Ok(LpOutcome {
            value: solution.objective,
            node_rates,
        })
    }

    /// The partition upper bound: minimum over partitions (every block
    /// meeting the target set, at least two blocks) of the crossing weight
    /// divided by the number of blocks minus one.
    pub fn partition_upper_bound(&self) -> Result<F, CapacityError> {
        let m = self.tree.node_count();
        let mut best: Option<F> = None;
        for partition in enumerate_partitions(m, &self.targets, 2)? {
            let crossing: F = self
                .weights
                .iter()
                .filter(|(&edge, _)| partition.crosses(edge))
                .map(|(_, &w)| w)
                .sum();
            let value = crossing / real::<F>((partition.block_count() - 1) as f64);
            if best.is_none_or(|b| value < b) {
                best = Some(value);
            }
        }
        best.ok_or_else(|| CapacityError::InvariantViolated("no admissible partition found".into()))
    }

    /// The Steiner-packing lower bound at blocklength `n`: build the
    /// multigraph with `floor(n * weight)` parallel edges per tree edge and
    /// count spanning-tree packings (full target set) or edge-disjoint paths
    /// (pair target set), per round. Flooring only weakens the bound.
    pub fn packing_lower_bound(&self, n: u64) -> Result<PackingBound<F>, CapacityError> {
        if n == 0 {
            return Err(CapacityError::ZeroRounds);
        }
        let m = self.tree.node_count();
        let mut graph = Multigraph::new(m);
        for (&edge, &w) in &self.weights {
            let scaled = (w * real::<F>(n as f64)).floor();
            let multiplicity = scaled.to_f64().unwrap_or(0.0).max(0.0) as u64;
            graph.add_edges(edge, multiplicity)?;
        }
        let trees = if self.targets.len() == m {
            nash_williams_value(&graph)?
        } else if self.targets.len() == 2 {
            max_edge_disjoint_paths(&graph, self.targets[0], self.targets[1])?
        } else {
            return Err(CapacityError::PackingUnavailable(self.targets.len()));
        };
        Ok(PackingBound {
            packed_trees: trees,
            n,
            per_round: real::<F>(trees as f64) / real::<F>(n as f64),
        })
    }

    /// Assembles the full report, cross-checking the internal identities.
    pub fn capacity_report(
        &self,
        options: &ReportOptions,
    ) -> Result<CapacityReport<F>, CapacityError> {
        let (c_wsk, argmin_edge) = self.wsk_capacity();
        let r_co_closed_form = self.r_co_closed_form();
        let c_pk = self.pk_capacity();
        let mut provenance = BTreeMap::new();
        provenance.insert(
            "c_wsk".to_string(),
            "closed form: min weight over the target-spanning subtree".to_string(),
        );
        provenance.insert(
            "r_co_closed_form".to_string(),
            "closed form: total weight minus minimum subtree weight".to_string(),
        );
        provenance.insert(
            "c_pk".to_string(),
            "identity: total conditional entropy minus omniscience rate".to_string(),
        );

        let r_co_lp = if options.verify_lp {
            let outcome = self.r_co_lp()?;
            provenance.insert(
                "r_co_lp".to_string(),
                "simplex over the enumerated subset constraints".to_string(),
            );
            Some(outcome.value)
        } else {
            None
        };

        let partition_bound = if self.tree.node_count() <= MAX_PARTITION_NODES {
            provenance.insert(
                "partition_bound".to_string(),
                "exhaustive partition enumeration".to_string(),
            );
            Some(self.partition_upper_bound()?)
        } else {
            None
        };

        let (packing_bound, packing_n) = match options.packing_n {
            Some(n) => match self.packing_lower_bound(n) {
                Ok(bound) => {
                    provenance.insert(
                        "packing_bound".to_string(),
                        if self.targets.len() == self.tree.node_count() {
                            "spanning-tree packing (partition formula)".to_string()
                        } else {
                            "edge-disjoint paths (max-flow)".to_string()
                        },
                    );
                    (Some(bound.per_round), Some(n))
                }
                Err(CapacityError::PackingUnavailable(_)) => {
                    provenance.insert(
                        "packing_bound".to_string(),
                        "unavailable: target set is neither the full set nor a pair".to_string(),
                    );
                    (None, Some(n))
                }
                Err(other) => return Err(other),
            },
            None => (None, None),
        };

        let report = CapacityReport {
            c_wsk,
            argmin_edge,
            c_pk,
            r_co_closed_form,
            r_co_lp,
            partition_bound,
            packing_bound,
            packing_n,
            provenance,
        };
        report.validate()?;
        Ok(report)
    }
}

/// Outcome of the LP oracle: the optimum and one optimal per-node rate
/// vector.
#[derive(Debug, Clone)]
pub struct LpOutcome<F> {
    pub value: F,
    pub node_rates: BTreeMap<NodeId, F>,
}

/// Result of checking the subset constraints; empty `violated` means pass.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub violated: Vec<NodeSet>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.violated.is_empty()
    }
}

/// Steiner-packing bound value at a given blocklength.
#[derive(Debug, Clone, Copy)]
pub struct PackingBound<F> {
    pub packed_trees: u64,
    pub n: u64,
    pub per_round: F,
}

/// Per-node omniscience rates split into directed per-neighbor components.
/// `rate(j)` is always the sum of `component(j, i)` over the neighbors `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector<F> {
    rates: BTreeMap<NodeId, F>,
    components: BTreeMap<(NodeId, NodeId), F>,
}

impl<F: Real> RateVector<F> {
    /// Builds the vector from directed components `(owner, neighbor) ->
    /// rate`, deriving per-node totals. All components must be nonnegative.
    pub fn from_components(
        m: usize,
        components: BTreeMap<(NodeId, NodeId), F>,
    ) -> Result<Self, CapacityError> {
        let mut rates: BTreeMap<NodeId, F> = (1..=m).map(|j| (j, F::zero())).collect();
        for (&(owner, neighbor), &value) in &components {
            if value < F::zero() {
                return Err(CapacityError::NegativeWeight {
                    edge: Edge::new(owner, neighbor)?,
                    weight: value.to_f64().unwrap_or(f64::NAN),
                });
            }
            let slot = rates
                .get_mut(&owner)
                .ok_or(GraphError::NodeOutOfRange { node: owner, m })?;
            *slot = *slot + value;
        }
        Ok(Self { rates, components })
    }

    pub fn rate(&self, node: NodeId) -> F {
        self.rates.get(&node).copied().unwrap_or_else(F::zero)
    }

    pub fn component(&self, owner: NodeId, neighbor: NodeId) -> F {
        self.components
            .get(&(owner, neighbor))
            .copied()
            .unwrap_or_else(F::zero)
    }

    pub fn node_rates(&self) -> &BTreeMap<NodeId, F> {
        &self.rates
    }

    pub fn components(&self) -> &BTreeMap<(NodeId, NodeId), F> {
        &self.components
    }

    pub fn sum(&self) -> F {
        self.rates.values().copied().sum()
    }
}

/// How a capacity report should be assembled.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    pub verify_lp: bool,
    pub packing_n: Option<u64>,
}

/// Every capacity quantity with the provenance of how it was computed.
#[derive(Debug, Clone)]
pub struct CapacityReport<F> {
    pub c_wsk: F,
    pub argmin_edge: Edge,
    pub c_pk: F,
    pub r_co_closed_form: F,
    pub r_co_lp: Option<F>,
    pub partition_bound: Option<F>,
    pub packing_bound: Option<F>,
    pub packing_n: Option<u64>,
    pub provenance: BTreeMap<String, String>,
}

impl<F: Real> CapacityReport<F> {
    fn validate(&self) -> Result<(), CapacityError> {
        let tol = real::<F>(FEASIBILITY_TOLERANCE);
        if (self.c_wsk - self.c_pk).abs() > tol {
            return Err(CapacityError::InvariantViolated(format!(
                "wsk capacity {} and pk capacity {} disagree",
                self.c_wsk, self.c_pk
            )));
        }
        if let Some(upper) = self.partition_bound {
            if self.c_wsk > upper + tol {
                return Err(CapacityError::InvariantViolated(format!(
                    "capacity {} exceeds partition bound {upper}",
                    self.c_wsk
                )));
            }
        }
        if let Some(lower) = self.packing_bound {
            if lower > self.c_wsk + tol {
                return Err(CapacityError::InvariantViolated(format!(
                    "packing bound {lower} exceeds capacity {}",
                    self.c_wsk
                )));
            }
        }
        Ok(())
    }
}
