//! Undirected trees and multigraphs: unique paths, Steiner subtrees,
//! subset and partition enumeration, and edge-disjoint path counting.
//!
//! Node labels are 1-based everywhere on the public surface, matching the
//! `[m] = {1, ..., m}` convention of the capacity formulas.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// 1-based terminal label.
pub type NodeId = usize;

/// Largest node count accepted by the `2^m` subset enumeration.
pub const MAX_SUBSET_NODES: usize = 20;
/// Largest node count accepted by the Bell-number partition enumeration.
pub const MAX_PARTITION_NODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {node} is outside 1..={m}")]
    NodeOutOfRange { node: NodeId, m: usize },
    #[error("edge endpoints must differ (got {0})")]
    SelfLoop(NodeId),
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("{m} nodes exceeds the enumeration limit of {limit}")]
    TooManyNodes { m: usize, limit: usize },
    #[error("target set must not be empty")]
    EmptyTargets,
    #[error("source and sink must differ")]
    EqualTerminals,
    #[error("partition enumeration needs at least 2 nodes")]
    TooFewNodes,
}

/// Unordered pair of distinct terminals; stored with the smaller label first
/// so that `e_ij == e_ji`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    a: NodeId,
    b: NodeId,
}

impl Edge {
    pub fn new(i: NodeId, j: NodeId) -> Result<Self, GraphError> {
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        Ok(Self {
            a: i.min(j),
            b: i.max(j),
        })
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.a == node || self.b == node
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// An undirected tree on nodes `1..=m`. Construction verifies the edge count,
/// connectivity, and absence of duplicate edges, which together imply
/// acyclicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    m: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<NodeId>>, // index 0 unused
}

impl Tree {
    pub fn new(m: usize, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        if m == 0 {
            return Err(GraphError::NotATree(
                "a tree needs at least one node".into(),
            ));
        }
        if edges.len() != m - 1 {
            return Err(GraphError::NotATree(format!(
                "{} nodes require exactly {} edges, got {}",
                m,
                m - 1,
                edges.len()
            )));
        }
        edges.sort();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(GraphError::NotATree("duplicate edge".into()));
        }
        let mut adjacency = vec![Vec::new(); m + 1];
        for edge in &edges {
            let (i, j) = edge.endpoints();
            for node in [i, j] {
                if node < 1 || node > m {
                    return Err(GraphError::NodeOutOfRange { node, m });
                }
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for neighbors in &mut adjacency {
            neighbors.sort_unstable();
        }
        let tree = Self {
            m,
            edges,
            adjacency,
        };
        let reach = tree.distances_from(1);
        if reach.iter().skip(1).any(|d| d.is_none()) {
            return Err(GraphError::NotATree("edge set is not connected".into()));
        }
        Ok(tree)
    }

    /// Decodes a Prüfer sequence of length `m - 2` into the tree it encodes
    /// (labels 1..=m). The empty sequence gives the unique 2-node tree.
    pub fn from_pruefer(m: usize, sequence: &[NodeId]) -> Result<Self, GraphError> {
        if m < 2 {
            return Err(GraphError::NotATree("Prüfer decoding needs m >= 2".into()));
        }
        if sequence.len() != m - 2 {
            return Err(GraphError::NotATree(format!(
                "Prüfer sequence for {m} nodes must have length {}",
                m - 2
            )));
        }
        for &node in sequence {
            if node < 1 || node > m {
                return Err(GraphError::NodeOutOfRange { node, m });
            }
        }
        let mut degree = vec![1usize; m + 1];
        for &node in sequence {
            degree[node] += 1;
        }
        let mut edges = Vec::with_capacity(m - 1);
        let mut leaf_heap: std::collections::BinaryHeap<std::cmp::Reverse<NodeId>> = (1..=m)
            .filter(|&v| degree[v] == 1)
            .map(std::cmp::Reverse)
            .collect();
        for &node in sequence {
            let std::cmp::Reverse(leaf) = leaf_heap.pop().expect("leaf always exists");
            edges.push(Edge::new(leaf, node).expect("distinct by construction"));
            degree[node] -= 1;
            if degree[node] == 1 {
                leaf_heap.push(std::cmp::Reverse(node));
            }
        }
        let std::cmp::Reverse(u) = leaf_heap.pop().expect("two leaves remain");
        let std::cmp::Reverse(v) = leaf_heap.pop().expect("two leaves remain");
        edges.push(Edge::new(u, v)?);
        Self::new(m, edges)
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.m
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_edge(&self, edge: Edge) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if node < 1 || node > self.m {
            Err(GraphError::NodeOutOfRange { node, m: self.m })
        } else {
            Ok(())
        }
    }

    /// BFS distances from `root`; `None` for unreachable nodes (never happens
    /// on a valid tree, but used during construction).
    fn distances_from(&self, root: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.m + 1];
        dist[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Number of edges on the unique path between two nodes.
    pub fn distance(&self, i: NodeId, j: NodeId) -> Result<usize, GraphError> {
        self.check_node(i)?;
        self.check_node(j)?;
        Ok(self.distances_from(i)[j].expect("tree is connected"))
    }

    /// Distances from every node to `root`, unwrapped.
    pub fn distance_map(&self, root: NodeId) -> Result<Vec<usize>, GraphError> {
        self.check_node(root)?;
        Ok(self
            .distances_from(root)
            .into_iter()
            .map(|d| d.unwrap_or(0))
            .collect())
    }

    /// The unique simple path from `i` to `j` as an ordered edge list.
    /// Reversing the endpoints reverses the list.
    pub fn path(&self, i: NodeId, j: NodeId) -> Result<Vec<Edge>, GraphError> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        // Parent pointers via DFS from the destination, then walk i -> j.
        let mut parent = vec![0usize; self.m + 1];
        let mut seen = vec![false; self.m + 1];
        let mut stack = vec![j];
        seen[j] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        let mut path = Vec::new();
        let mut current = i;
        while current != j {
            let next = parent[current];
            path.push(Edge::new(current, next).expect("tree edges are proper"));
            current = next;
        }
        Ok(path)
    }
}

/// The minimal subtree `T(A)` of a tree spanning a target node set `A`:
/// connected, contains every node of `A`, and every leaf belongs to `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteinerSubtree {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
}

impl SteinerSubtree {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    pub fn contains_edge(&self, edge: Edge) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }
}

/// Computes `T(A)` by repeatedly pruning non-target leaves.
pub fn steiner_subtree(tree: &Tree, targets: &[NodeId]) -> Result<SteinerSubtree, GraphError> {
    if targets.is_empty() {
        return Err(GraphError::EmptyTargets);
    }
    let m = tree.node_count();
    let mut in_target = vec![false; m + 1];
    for &t in targets {
        if t < 1 || t > m {
            return Err(GraphError::NodeOutOfRange { node: t, m });
        }
        in_target[t] = true;
    }
    let mut alive = vec![true; m + 1];
    let mut degree: Vec<usize> = (0..=m)
        .map(|v| if v == 0 { 0 } else { tree.degree(v) })
        .collect();
    let mut queue: VecDeque<NodeId> = tree
        .nodes()
        .filter(|&v| degree[v] <= 1 && !in_target[v])
        .collect();
    while let Some(leaf) = queue.pop_front() {
        if !alive[leaf] || in_target[leaf] || degree[leaf] > 1 {
            continue;
        }
        alive[leaf] = false;
        for &v in tree.neighbors(leaf) {
            if alive[v] {
                degree[v] -= 1;
                if degree[v] <= 1 && !in_target[v] {
                    queue.push_back(v);
                }
            }
        }
    }
    let nodes: Vec<NodeId> = tree.nodes().filter(|&v| alive[v]).collect();
    let edges: Vec<Edge> = tree
        .edges()
        .iter()
        .copied()
        .filter(|e| {
            let (i, j) = e.endpoints();
            alive[i] && alive[j]
        })
        .collect();
    Ok(SteinerSubtree { nodes, edges })
}

/// A subset of `1..=m` packed as a bitmask (bit `k` holds node `k + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet {
    mask: u32,
}

impl NodeSet {
    pub fn from_nodes<I: IntoIterator<Item = NodeId>>(nodes: I) -> Self {
        let mut mask = 0u32;
        for node in nodes {
            assert!(
                (1..=MAX_SUBSET_NODES).contains(&node),
                "node out of mask range"
            );
            mask |= 1 << (node - 1);
        }
        Self { mask }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        (1..=MAX_SUBSET_NODES).contains(&node) && self.mask >> (node - 1) & 1 == 1
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        (1..=MAX_SUBSET_NODES)
            .filter(|&v| self.contains(v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (idx, node) in self.nodes().into_iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{node}")?;
        }
        write!(f, "}}")
    }
}

/// Iterator over every `B` with `∅ ≠ B ⊊ {1..m}` and `A ⊄ B`, i.e. the
/// constraint family of the omniscience linear program.
pub fn enumerate_constraint_subsets(
    m: usize,
    targets: &[NodeId],
) -> Result<impl Iterator<Item = NodeSet>, GraphError> {
    if m > MAX_SUBSET_NODES {
        return Err(GraphError::TooManyNodes {
            m,
            limit: MAX_SUBSET_NODES,
        });
    }
    if targets.is_empty() {
        return Err(GraphError::EmptyTargets);
    }
    for &t in targets {
        if t < 1 || t > m {
            return Err(GraphError::NodeOutOfRange { node: t, m });
        }
    }
    let target_mask = NodeSet::from_nodes(targets.iter().copied()).mask;
    let full: u32 = if m == 32 { u32::MAX } else { (1 << m) - 1 };
    Ok((1..full).filter_map(move |mask| {
        // Skip sets containing all of A.
        if mask & target_mask == target_mask {
            None
        } else {
            Some(NodeSet { mask })
        }
    }))
}

/// A partition of `1..=m` into disjoint nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>, // index 0 unused
    block_count: usize,
}

impl Partition {
    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self, node: NodeId) -> usize {
        self.block_of[node]
    }

    /// Whether the edge's endpoints lie in different blocks.
    pub fn crosses(&self, edge: Edge) -> bool {
        let (i, j) = edge.endpoints();
        self.block_of[i] != self.block_of[j]
    }

    pub fn blocks(&self) -> Vec<Vec<NodeId>> {
        let mut blocks = vec![Vec::new(); self.block_count];
        for (node, &b) in self.block_of.iter().enumerate().skip(1) {
            blocks[b].push(node);
        }
        blocks
    }
}

/// Iterator over partitions of `1..=m` with at least `min_blocks` blocks in
/// which every block intersects the target set. Enumerated via restricted
/// growth strings.
pub struct PartitionIter {
    m: usize,
    min_blocks: usize,
    target_mask: u64,
    rgs: Vec<usize>,
    max_prefix: Vec<usize>,
    done: bool,
}

impl PartitionIter {
    fn current(&self) -> Option<Partition> {
        let block_count = self.rgs.iter().copied().max().unwrap_or(0) + 1;
        if block_count < self.min_blocks {
            return None;
        }
        let mut hit = vec![false; block_count];
        for (idx, &b) in self.rgs.iter().enumerate() {
            if self.target_mask >> idx & 1 == 1 {
                hit[b] = true;
            }
        }
        if hit.iter().any(|&h| !h) {
            return None;
        }
        let mut block_of = vec![0; self.m + 1];
        for (idx, &b) in self.rgs.iter().enumerate() {
            block_of[idx + 1] = b;
        }
        Some(Partition {
            block_of,
            block_count,
        })
    }

    fn advance(&mut self) {
        // Next restricted growth string: rightmost position that can grow.
        for idx in (1..self.m).rev() {
            if self.rgs[idx] <= self.max_prefix[idx - 1] {
                self.rgs[idx] += 1;
                self.max_prefix[idx] = self.max_prefix[idx - 1].max(self.rgs[idx]);
                for k in idx + 1..self.m {
                    self.rgs[k] = 0;
                    self.max_prefix[k] = self.max_prefix[k - 1];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        while !self.done {
            let candidate = self.current();
            self.advance();
            if candidate.is_some() {
                return candidate;
            }
        }
        None
    }
}

/// Enumerates the partitions admitted by the partition upper bound: at least
/// `min_blocks` blocks, every block meeting `targets`.
pub fn enumerate_partitions(
    m: usize,
    targets: &[NodeId],
    min_blocks: usize,
) -> Result<PartitionIter, GraphError> {
    if m > MAX_PARTITION_NODES {
        return Err(GraphError::TooManyNodes {
            m,
            limit: MAX_PARTITION_NODES,
        });
    }
    if m == 0 {
        return Err(GraphError::TooFewNodes);
    }
    if targets.is_empty() {
        return Err(GraphError::EmptyTargets);
    }
    let mut target_mask = 0u64;
    for &t in targets {
        if t < 1 || t > m {
            return Err(GraphError::NodeOutOfRange { node: t, m });
        }
        target_mask |= 1 << (t - 1);
    }
    Ok(PartitionIter {
        m,
        min_blocks,
        target_mask,
        rgs: vec![0; m],
        max_prefix: vec![0; m],
        done: false,
    })
}

/// A multigraph on nodes `1..=m` given by per-pair edge multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    m: usize,
    multiplicities: std::collections::BTreeMap<Edge, u64>,
}

impl Multigraph {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            multiplicities: Default::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn add_edges(&mut self, edge: Edge, count: u64) -> Result<(), GraphError> {
        let (i, j) = edge.endpoints();
        for node in [i, j] {
            if node < 1 || node > self.m {
                return Err(GraphError::NodeOutOfRange { node, m: self.m });
            }
        }
        if count > 0 {
            *self.multiplicities.entry(edge).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn multiplicity(&self, edge: Edge) -> u64 {
        self.multiplicities.get(&edge).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, u64)> + '_ {
        self.multiplicities.iter().map(|(&e, &c)| (e, c))
    }

    /// Total multiplicity of edges whose endpoints lie in different blocks.
    pub fn crossing_multiplicity(&self, partition: &Partition) -> u64 {
        self.edges()
            .filter(|(e, _)| partition.crosses(*e))
            .map(|(_, c)| c)
            .sum()
    }

    /// Degree counting multiplicities.
    pub fn weighted_degree(&self, node: NodeId) -> u64 {
        self.edges()
            .filter(|(e, _)| e.touches(node))
            .map(|(_, c)| c)
            .sum()
    }
}

/// Maximum number of edge-disjoint `s`–`t` paths, counting parallel edges,
/// i.e. the integral max-flow with capacity equal to multiplicity.
/// Disconnected terminals give 0.
pub fn max_edge_disjoint_paths(
    graph: &Multigraph,
    s: NodeId,
    t: NodeId,
) -> Result<u64, GraphError> {
    if s == t {
        return Err(GraphError::EqualTerminals);
    }
    let m = graph.node_count();
    for node in [s, t] {
        if node < 1 || node > m {
            return Err(GraphError::NodeOutOfRange { node, m });
        }
    }
    // Undirected edge {u,v} of multiplicity c becomes arcs u->v and v->u of
    // capacity c; BFS augmentation (Edmonds–Karp) on the residual graph.
    let mut residual = vec![vec![0u64; m + 1]; m + 1];
    for (edge, count) in graph.edges() {
        let (i, j) = edge.endpoints();
        residual[i][j] += count;
        residual[j][i] += count;
    }
    let mut flow = 0u64;
    loop {
        let mut parent = vec![usize::MAX; m + 1];
        parent[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 1..=m {
                if parent[v] == usize::MAX && residual[u][v] > 0 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            return Ok(flow);
        }
        let mut bottleneck = u64::MAX;
        let mut v = t;
        while v != s {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
}

/// Spanning-tree packing number by the Tutte/Nash-Williams formula:
/// `min over partitions P with |P| >= 2 of floor(crossing / (|P| - 1))`.
pub fn nash_williams_value(graph: &Multigraph) -> Result<u64, GraphError> {
    let m = graph.node_count();
    if m < 2 {
        return Err(GraphError::TooFewNodes);
    }
    let all: Vec<NodeId> = (1..=m).collect();
    let mut best = u64::MAX;
    for partition in enumerate_partitions(m, &all, 2)? {
        let crossing = graph.crossing_multiplicity(&partition);
        let value = crossing / (partition.block_count() as u64 - 1);
        best = best.min(value);
    }
    Ok(best)
}
