//! Recombination chain: seed-plan generation, random spanning trees drawn
//! as minimum-weight trees under uniform random edge weights, balanced-cut
//! search, merge-split steps, and the chain driver.
//!
//! Determinism contract: all randomness flows through a caller-seeded
//! [`ChainRng`] (ChaCha8), edges are weighted in canonical order, and ties
//! are broken by edge index, so identical (graph, config, seed) produce an
//! identical plan sequence on every platform. The generator algorithm is
//! part of the output contract and must not change silently.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::DualGraph;
use crate::partition::{check_legality, Assignment, LegalityConfig, PartitionError};

/// The chain's random number generator. ChaCha8: documented algorithm,
/// 64-bit seedable, reproducible across platforms.
pub type ChainRng = rand_chacha::ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("node subset does not induce a connected subgraph")]
    DisconnectedSubset,
    #[error("initial plan is not legal: {0}")]
    IllegalInitialPlan(String),
    #[error(
        "retries exhausted at step {step}: no balanced cut found after \
         {pair_attempts} district pair(s) × {tree_attempts} tree draw(s)"
    )]
    RetriesExhausted {
        step: u64,
        pair_attempts: u32,
        tree_attempts: u32,
    },
    #[error("cannot seed a plan: {0}")]
    SeedInfeasible(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Knobs for one chain run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    /// Number of recombination steps to perform (0 emits only the start).
    pub steps: u64,
    /// Fractional population tolerance shared with the legality predicate.
    pub epsilon: f64,
    /// 64-bit RNG seed.
    pub seed: u64,
    /// Spanning-tree draws allowed per district pair before redrawing the pair.
    pub max_tree_retries: u32,
    /// District-pair draws allowed per step before giving up.
    pub max_pair_retries: u32,
    /// Keep every m-th accepted plan (plan 0 is always kept).
    pub thinning: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 1000,
            epsilon: 0.02,
            seed: 0,
            max_tree_retries: 100,
            max_pair_retries: 100,
            thinning: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(ChainError::InvalidConfig(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if self.max_tree_retries == 0 || self.max_pair_retries == 0 {
            return Err(ChainError::InvalidConfig(
                "retry limits must be positive".to_string(),
            ));
        }
        if self.thinning == 0 {
            return Err(ChainError::InvalidConfig(
                "thinning must be positive".to_string(),
            ));
        }
        if self.steps > 0 && self.thinning > self.steps {
            return Err(ChainError::InvalidConfig(format!(
                "thinning {} exceeds steps {}",
                self.thinning, self.steps
            )));
        }
        Ok(())
    }

    pub fn legality(&self) -> LegalityConfig {
        LegalityConfig {
            epsilon: self.epsilon,
            require_contiguity: true,
        }
    }
}

/// A spanning tree of an induced subgraph, rooted at the subset's first node
/// in canonical order, with per-node subtree populations.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    /// Member graph-node indices, ascending; local index = position here.
    nodes: Vec<usize>,
    /// Local parent per local index; `None` at the root.
    parent: Vec<Option<usize>>,
    /// Local indices in root-first traversal order.
    order: Vec<usize>,
    /// Population of the subtree hanging below each local index.
    subtree_pop: Vec<u64>,
    total_pop: u64,
}

/// A tree edge identified by the child side; cutting it separates the
/// child's subtree from the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutEdge {
    /// Graph index of the child endpoint.
    pub child: usize,
    /// Graph index of the parent endpoint.
    pub parent: usize,
}

impl SpanningTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn total_population(&self) -> u64 {
        self.total_pop
    }

    /// Tree edges as (child, parent) graph-index pairs, in traversal order.
    pub fn edges(&self) -> Vec<CutEdge> {
        self.order
            .iter()
            .filter_map(|&u| {
                self.parent[u].map(|p| CutEdge {
                    child: self.nodes[u],
                    parent: self.nodes[p],
                })
            })
            .collect()
    }

    fn local(&self, graph_node: usize) -> usize {
        self.nodes
            .binary_search(&graph_node)
            .expect("node not in tree")
    }

    /// Population of the component containing `edge.child` after cutting.
    pub fn child_side_population(&self, edge: CutEdge) -> u64 {
        self.subtree_pop[self.local(edge.child)]
    }

    /// Splits the member nodes along a tree edge: (child subtree, rest).
    /// Both sides are returned in ascending graph-index order.
    pub fn split(&self, edge: CutEdge) -> (Vec<usize>, Vec<usize>) {
        let cut_local = self.local(edge.child);
        let mut in_subtree = vec![false; self.nodes.len()];
        // `order` visits parents before children, so membership propagates
        // down in one pass.
        for &u in &self.order {
            if u == cut_local {
                in_subtree[u] = true;
            } else if let Some(p) = self.parent[u] {
                in_subtree[u] = in_subtree[p];
            }
        }
        let mut child_side = Vec::new();
        let mut rest = Vec::new();
        for (u, &inside) in in_subtree.iter().enumerate() {
            if inside {
                child_side.push(self.nodes[u]);
            } else {
                rest.push(self.nodes[u]);
            }
        }
        (child_side, rest)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Draws the minimum-weight spanning tree of the subgraph induced by
/// `subset` under independently drawn uniform(0,1) edge weights.
///
/// Weights are assigned to induced edges in canonical edge order and ties
/// broken by edge position, so the draw is a pure function of (graph,
/// subset, rng state).
pub fn random_spanning_tree(
    g: &DualGraph,
    subset: &[usize],
    rng: &mut ChainRng,
) -> Result<SpanningTree, ChainError> {
    let mut nodes: Vec<usize> = subset.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(ChainError::DisconnectedSubset);
    }
    let local_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &n)| (n, l)).collect();

    // Induced edges in canonical order, each with a fresh uniform weight.
    let mut weighted: Vec<(f64, usize, usize)> = Vec::new();
    for &(u, v) in g.edges() {
        if let (Some(&lu), Some(&lv)) = (local_of.get(&u), local_of.get(&v)) {
            weighted.push((rng.gen::<f64>(), lu, lv));
        }
    }
    let mut order: Vec<usize> = (0..weighted.len()).collect();
    order.sort_by(|&a, &b| {
        weighted[a]
            .0
            .partial_cmp(&weighted[b].0)
            .unwrap()
            .then(a.cmp(&b))
    });

    // Kruskal.
    let n = nodes.len();
    let mut uf = UnionFind::new(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut picked = 0usize;
    for &ei in &order {
        let (_, lu, lv) = weighted[ei];
        if uf.union(lu, lv) {
            adj[lu].push(lv);
            adj[lv].push(lu);
            picked += 1;
            if picked == n - 1 {
                break;
            }
        }
    }
    if picked != n.saturating_sub(1) {
        return Err(ChainError::DisconnectedSubset);
    }

    // Root at the lowest node; record parents and a parent-first order.
    let mut parent = vec![None; n];
    let mut visited = vec![false; n];
    let mut traversal = Vec::with_capacity(n);
    visited[0] = true;
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        traversal.push(u);
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }

    // Subtree populations accumulate child-to-parent in reverse traversal.
    let mut subtree_pop: Vec<u64> = nodes.iter().map(|&i| g.node(i).pop).collect();
    for &u in traversal.iter().rev() {
        if let Some(p) = parent[u] {
            subtree_pop[p] += subtree_pop[u];
        }
    }
    let total_pop = subtree_pop[0];

    Ok(SpanningTree {
        nodes,
        parent,
        order: traversal,
        subtree_pop,
        total_pop,
    })
}

fn within(pop: u64, ideal: f64, epsilon: f64) -> bool {
    (pop as f64 - ideal).abs() <= epsilon * ideal
}

/// Every tree edge whose removal yields two components each within
/// `epsilon * ideal` of `ideal`, found in one traversal via subtree
/// populations. An empty result means the tree admits no balanced cut.
pub fn balanced_cut_edges(tree: &SpanningTree, ideal: f64, epsilon: f64) -> Vec<CutEdge> {
    let total = tree.total_pop;
    let mut cuts = Vec::new();
    for &u in &tree.order {
        if let Some(p) = tree.parent[u] {
            let below = tree.subtree_pop[u];
            let above = total - below;
            if within(below, ideal, epsilon) && within(above, ideal, epsilon) {
                cuts.push(CutEdge {
                    child: tree.nodes[u],
                    parent: tree.nodes[p],
                });
            }
        }
    }
    cuts
}

/// Adjacent district pairs (d1 < d2) sharing at least one graph edge,
/// sorted.
fn adjacent_district_pairs(g: &DualGraph, a: &Assignment) -> Vec<(u32, u32)> {
    let mut pairs = HashSet::new();
    for &(u, v) in g.edges() {
        let (du, dv) = (a.label(u), a.label(v));
        if du != dv {
            pairs.insert((du.min(dv), du.max(dv)));
        }
    }
    let mut out: Vec<(u32, u32)> = pairs.into_iter().collect();
    out.sort_unstable();
    out
}

/// Retry counters accumulated across a run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RetryStats {
    /// Tree draws beyond the first, summed over all steps and pairs.
    pub tree_redraws: u64,
    /// District-pair draws beyond the first, summed over all steps.
    pub pair_redraws: u64,
}

/// One recombination step: pick two adjacent districts uniformly, merge
/// them, re-split along a balanced cut of a fresh random spanning tree, and
/// hand the two parts the old labels in uniformly random order.
///
/// A tree with no balanced cut is redrawn up to `max_tree_retries` times,
/// after which the district pair itself is redrawn up to `max_pair_retries`
/// times. The result is legal by construction: both parts are connected
/// subtrees and the cut predicate enforces the population tolerance.
pub fn recom_step(
    g: &DualGraph,
    a: &Assignment,
    cfg: &ChainConfig,
    rng: &mut ChainRng,
) -> Result<Assignment, ChainError> {
    recom_step_counted(g, a, cfg, rng, &mut RetryStats::default())
}

fn recom_step_counted(
    g: &DualGraph,
    a: &Assignment,
    cfg: &ChainConfig,
    rng: &mut ChainRng,
    stats: &mut RetryStats,
) -> Result<Assignment, ChainError> {
    let pairs = adjacent_district_pairs(g, a);
    if pairs.is_empty() {
        return Err(ChainError::InvalidConfig(
            "plan has no adjacent district pair (k must be ≥ 2)".to_string(),
        ));
    }
    let ideal = g.total_population() as f64 / a.k() as f64;

    for pair_attempt in 0..cfg.max_pair_retries {
        if pair_attempt > 0 {
            stats.pair_redraws += 1;
        }
        let (d1, d2) = pairs[rng.gen_range(0..pairs.len())];
        let subset: Vec<usize> = (0..g.node_count())
            .filter(|&i| a.label(i) == d1 || a.label(i) == d2)
            .collect();

        for tree_attempt in 0..cfg.max_tree_retries {
            if tree_attempt > 0 {
                stats.tree_redraws += 1;
            }
            let tree = random_spanning_tree(g, &subset, rng)?;
            let cuts = balanced_cut_edges(&tree, ideal, cfg.epsilon);
            if cuts.is_empty() {
                continue;
            }
            let cut = cuts[rng.gen_range(0..cuts.len())];
            let (part_a, part_b) = tree.split(cut);
            let (label_a, label_b) = if rng.gen_bool(0.5) { (d1, d2) } else { (d2, d1) };
            return Ok(a.with_regions(g, &part_a, label_a, &part_b, label_b));
        }
    }
    Err(ChainError::RetriesExhausted {
        step: 0,
        pair_attempts: cfg.max_pair_retries,
        tree_attempts: cfg.max_tree_retries,
    })
}

/// Tree draws allowed per split when seeding a plan.
const SEED_TREE_ATTEMPTS: u32 = 100;

/// Seeds a legal k-district plan by recursive tree bipartition: repeatedly
/// draw a random spanning tree of the unassigned region and cut off one
/// district within `epsilon` of the ideal population, keeping the remainder
/// feasible for the districts still to come.
pub fn seed_plan(
    g: &DualGraph,
    k: u32,
    epsilon: f64,
    rng: &mut ChainRng,
) -> Result<Assignment, ChainError> {
    if k == 0 {
        return Err(ChainError::InvalidConfig("k must be at least 1".to_string()));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(ChainError::InvalidConfig(format!(
            "epsilon {epsilon} outside [0, 1)"
        )));
    }
    if !g.is_connected() {
        return Err(ChainError::DisconnectedSubset);
    }
    if (g.node_count() as u64) < k as u64 {
        return Err(ChainError::SeedInfeasible(format!(
            "{} nodes cannot form {k} non-empty districts",
            g.node_count()
        )));
    }
    let mut labels = vec![0u32; g.node_count()];
    if k == 1 {
        labels.fill(1);
        return Ok(Assignment::from_labels(g, labels)?);
    }

    let ideal = g.total_population() as f64 / k as f64;
    let district_range = |pop: u64| within(pop, ideal, epsilon);
    let rest_range = |pop: u64, remaining: u32| {
        let lo = remaining as f64 * ideal * (1.0 - epsilon);
        let hi = remaining as f64 * ideal * (1.0 + epsilon);
        (lo..=hi).contains(&(pop as f64))
    };

    let mut remaining: Vec<usize> = (0..g.node_count()).collect();
    for d in 1..k {
        let left_after = k - d;
        let mut found = false;
        for _ in 0..SEED_TREE_ATTEMPTS {
            let tree = random_spanning_tree(g, &remaining, rng)?;
            // Either side of a cut may serve as the new district, provided
            // the other side stays feasible for the remaining districts.
            let mut candidates: Vec<(CutEdge, bool)> = Vec::new();
            for edge in tree.edges() {
                let below = tree.child_side_population(edge);
                let above = tree.total_population() - below;
                if district_range(below) && rest_range(above, left_after) {
                    candidates.push((edge, true));
                }
                if district_range(above) && rest_range(below, left_after) {
                    candidates.push((edge, false));
                }
            }
            if candidates.is_empty() {
                continue;
            }
            let (edge, child_is_district) = candidates[rng.gen_range(0..candidates.len())];
            let (child_side, rest) = tree.split(edge);
            let (district_nodes, rest_nodes) = if child_is_district {
                (child_side, rest)
            } else {
                (rest, child_side)
            };
            for &i in &district_nodes {
                labels[i] = d;
            }
            remaining = rest_nodes;
            found = true;
            break;
        }
        if !found {
            return Err(ChainError::SeedInfeasible(format!(
                "no balanced split for district {d} after {SEED_TREE_ATTEMPTS} tree draws \
                 (epsilon {epsilon})"
            )));
        }
    }
    for &i in &remaining {
        labels[i] = k;
    }
    Ok(Assignment::from_labels(g, labels)?)
}

/// Receives plans emitted by a chain run (plan 0 is the start).
pub trait PlanSink {
    fn accept(&mut self, step: u64, plan: &Assignment);
}

impl<F: FnMut(u64, &Assignment)> PlanSink for F {
    fn accept(&mut self, step: u64, plan: &Assignment) {
        self(step, plan)
    }
}

/// What a chain run did, serialized as the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub emitted: u64,
    /// Plans distinct as partitions (label permutations identified), via a
    /// SHA-256 hash set over canonical labels.
    pub distinct_plans: u64,
    pub tree_redraws: u64,
    pub pair_redraws: u64,
}

fn partition_digest(a: &Assignment) -> [u8; 16] {
    let mut hasher = Sha256::new();
    for label in a.canonical_labels() {
        hasher.update(label.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

/// Runs `cfg.steps` recombination steps from a legal start, delivering plan
/// 0 and every `thinning`-th accepted plan to the sink.
pub fn run_chain(
    g: &DualGraph,
    a0: &Assignment,
    cfg: &ChainConfig,
    sink: &mut dyn PlanSink,
) -> Result<RunSummary, ChainError> {
    cfg.validate()?;
    let legality = check_legality(g, a0, &cfg.legality())?;
    if !legality.is_legal() {
        return Err(ChainError::IllegalInitialPlan(format!(
            "contiguous={} max_deviation={:.6} (epsilon {})",
            legality.contiguous, legality.max_deviation, cfg.epsilon
        )));
    }

    let mut rng = chain_rng(cfg.seed);
    let mut stats = RetryStats::default();
    let mut distinct: HashSet<[u8; 16]> = HashSet::new();

    let mut emitted = 0u64;
    let mut emit = |step: u64, plan: &Assignment, emitted: &mut u64| {
        distinct.insert(partition_digest(plan));
        sink.accept(step, plan);
        *emitted += 1;
    };

    emit(0, a0, &mut emitted);
    let mut current = a0.clone();
    for step in 1..=cfg.steps {
        current = recom_step_counted(g, &current, cfg, &mut rng, &mut stats).map_err(|e| {
            match e {
                ChainError::RetriesExhausted {
                    pair_attempts,
                    tree_attempts,
                    ..
                } => ChainError::RetriesExhausted {
                    step,
                    pair_attempts,
                    tree_attempts,
                },
                other => other,
            }
        })?;
        if step % cfg.thinning == 0 {
            emit(step, &current, &mut emitted);
        }
    }

    Ok(RunSummary {
        steps: cfg.steps,
        emitted,
        distinct_plans: distinct.len() as u64,
        tree_redraws: stats.tree_redraws,
        pair_redraws: stats.pair_redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::partition::{is_contiguous, population_deviation};

    #[test]
    fn two_node_subset_yields_the_only_tree() {
        let g = generators::grid(1, 2);
        let mut rng = chain_rng(1);
        for _ in 0..5 {
            let tree = random_spanning_tree(&g, &[0, 1], &mut rng).unwrap();
            assert_eq!(tree.edge_count(), 1);
            assert_eq!(tree.nodes(), &[0, 1]);
        }
    }

    #[test]
    fn grid_tree_spans_all_nodes() {
        let g = generators::grid(4, 4);
        let subset: Vec<usize> = (0..16).collect();
        let mut rng = chain_rng(3);
        let tree = random_spanning_tree(&g, &subset, &mut rng).unwrap();
        assert_eq!(tree.node_count(), 16);
        assert_eq!(tree.edge_count(), 15);
        assert_eq!(tree.total_population(), 16);
    }

    #[test]
    fn same_seed_same_tree() {
        let g = generators::grid(4, 4);
        let subset: Vec<usize> = (0..16).collect();
        let edges_with = |seed: u64| {
            let mut rng = chain_rng(seed);
            random_spanning_tree(&g, &subset, &mut rng).unwrap().edges()
        };
        assert_eq!(edges_with(42), edges_with(42));
    }

    #[test]
    fn disconnected_subset_is_rejected() {
        let g = generators::grid(3, 3);
        let mut rng = chain_rng(0);
        // Two opposite corners.
        assert!(matches!(
            random_spanning_tree(&g, &[0, 8], &mut rng),
            Err(ChainError::DisconnectedSubset)
        ));
    }

    #[test]
    fn subtree_populations_sum_correctly() {
        // Randomized populations; the root subtree must hold the total and
        // every subtree the sum of its members.
        let mut rng = chain_rng(11);
        let g = generators::grid_with(3, 4, |r, c| {
            crate::graph::NodeRecord::new(format!("r{r}c{c}"), (r * 7 + c * 3 + 1) as u64)
        });
        let subset: Vec<usize> = (0..12).collect();
        for _ in 0..20 {
            let tree = random_spanning_tree(&g, &subset, &mut rng).unwrap();
            assert_eq!(tree.total_population(), g.total_population());
            for edge in tree.edges() {
                let (child_side, rest) = tree.split(edge);
                let child_pop: u64 = child_side.iter().map(|&i| g.node(i).pop).sum();
                let rest_pop: u64 = rest.iter().map(|&i| g.node(i).pop).sum();
                assert_eq!(child_pop, tree.child_side_population(edge));
                assert_eq!(child_pop + rest_pop, tree.total_population());
            }
        }
    }

    /// Path of four unit-population nodes: only the middle edge splits 2/2.
    #[test]
    fn path_of_four_has_single_balanced_cut() {
        let g = generators::grid(1, 4);
        let mut rng = chain_rng(5);
        let tree = random_spanning_tree(&g, &[0, 1, 2, 3], &mut rng).unwrap();
        let cuts = balanced_cut_edges(&tree, 2.0, 0.0);
        assert_eq!(cuts.len(), 1);
        let cut = cuts[0];
        let (a, b) = tree.split(cut);
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn star_of_five_has_no_balanced_cut() {
        // Center plus four leaves; every cut is 1 vs 4.
        let nodes = ["hub", "n1", "n2", "n3", "n4"]
            .iter()
            .map(|id| crate::graph::NodeRecord::new(*id, 1))
            .collect();
        let edges = (1..=4)
            .map(|i| ("hub".to_string(), format!("n{i}")))
            .collect();
        let g = DualGraph::new(nodes, edges).unwrap();
        let mut rng = chain_rng(9);
        let tree = random_spanning_tree(&g, &[0, 1, 2, 3, 4], &mut rng).unwrap();
        assert!(balanced_cut_edges(&tree, 2.5, 0.1).is_empty());
    }

    #[test]
    fn seed_plan_k1_assigns_everything_to_one_district() {
        let g = generators::grid(3, 3);
        let mut rng = chain_rng(0);
        let a = seed_plan(&g, 1, 0.0, &mut rng).unwrap();
        assert!(a.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn seed_plan_two_nodes_unique_up_to_relabel() {
        let g = generators::grid(1, 2);
        let mut rng = chain_rng(17);
        let a = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        assert_eq!(a.canonical_labels(), vec![1, 2]);
    }

    #[test]
    fn seed_plan_grid_is_legal() {
        let g = generators::grid(4, 4);
        let mut rng = chain_rng(23);
        let a = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        assert_eq!(is_contiguous(&g, &a).unwrap(), vec![true, true]);
        assert_eq!(population_deviation(&g, &a).unwrap(), 0.0);
    }

    #[test]
    fn recom_step_produces_legal_plans() {
        let g = generators::grid(4, 4);
        let cfg = ChainConfig {
            epsilon: 0.0,
            seed: 31,
            ..ChainConfig::default()
        };
        let mut rng = chain_rng(cfg.seed);
        let mut a = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        for _ in 0..200 {
            a = recom_step(&g, &a, &cfg, &mut rng).unwrap();
            assert!(is_contiguous(&g, &a).unwrap().iter().all(|&ok| ok));
            assert_eq!(population_deviation(&g, &a).unwrap(), 0.0);
            assert!(a.cache_is_coherent(&g));
        }
    }

    #[test]
    fn chain_is_deterministic() {
        let g = generators::grid(4, 4);
        let cfg = ChainConfig {
            steps: 50,
            epsilon: 0.0,
            seed: 99,
            ..ChainConfig::default()
        };
        let run = || {
            let mut rng = chain_rng(7);
            let a0 = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
            let mut plans: Vec<Vec<u32>> = Vec::new();
            let mut sink = |_step: u64, a: &Assignment| plans.push(a.labels().to_vec());
            let summary = run_chain(&g, &a0, &cfg, &mut sink).unwrap();
            (plans, summary.distinct_plans)
        };
        let (plans1, d1) = run();
        let (plans2, d2) = run();
        assert_eq!(plans1, plans2);
        assert_eq!(d1, d2);
        assert_eq!(plans1.len(), 51);
    }

    #[test]
    fn zero_step_chain_emits_only_the_start() {
        let g = generators::grid(4, 4);
        let cfg = ChainConfig {
            steps: 0,
            epsilon: 0.0,
            seed: 1,
            ..ChainConfig::default()
        };
        let mut rng = chain_rng(2);
        let a0 = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        let mut received = Vec::new();
        let mut sink = |step: u64, a: &Assignment| received.push((step, a.clone()));
        let summary = run_chain(&g, &a0, &cfg, &mut sink).unwrap();
        assert_eq!(received.len(), 1);
        assert_eq!(received[0].0, 0);
        assert_eq!(received[0].1, a0);
        assert_eq!(summary.emitted, 1);
        assert_eq!(summary.distinct_plans, 1);
    }

    #[test]
    fn chain_moves_between_distinct_plans() {
        let g = generators::grid(4, 4);
        let cfg = ChainConfig {
            steps: 1000,
            epsilon: 0.0,
            seed: 4,
            ..ChainConfig::default()
        };
        let mut rng = chain_rng(4);
        let a0 = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        let mut sink = |_: u64, _: &Assignment| {};
        let summary = run_chain(&g, &a0, &cfg, &mut sink).unwrap();
        assert!(summary.distinct_plans >= 2, "chain appears stuck");
    }

    #[test]
    fn thinning_keeps_every_mth_plan() {
        let g = generators::grid(4, 4);
        let cfg = ChainConfig {
            steps: 10,
            epsilon: 0.0,
            seed: 8,
            thinning: 5,
            ..ChainConfig::default()
        };
        let mut rng = chain_rng(8);
        let a0 = seed_plan(&g, 2, 0.0, &mut rng).unwrap();
        let mut steps = Vec::new();
        let mut sink = |step: u64, _: &Assignment| steps.push(step);
        run_chain(&g, &a0, &cfg, &mut sink).unwrap();
        assert_eq!(steps, vec![0, 5, 10]);
    }

    #[test]
    fn illegal_start_is_rejected() {
        let g = generators::grid(4, 4);
        // 15/1 split grossly violates any reasonable tolerance.
        let mut labels = vec![1u32; 16];
        labels[15] = 2;
        let a0 = Assignment::from_labels(&g, labels).unwrap();
        let cfg = ChainConfig {
            steps: 1,
            epsilon: 0.02,
            ..ChainConfig::default()
        };
        let mut sink = |_: u64, _: &Assignment| {};
        assert!(matches!(
            run_chain(&g, &a0, &cfg, &mut sink),
            Err(ChainError::IllegalInitialPlan(_))
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_eps = ChainConfig {
            epsilon: 1.5,
            ..ChainConfig::default()
        };
        assert!(bad_eps.validate().is_err());
        let bad_thinning = ChainConfig {
            thinning: 0,
            ..ChainConfig::default()
        };
        assert!(bad_thinning.validate().is_err());
        let thinning_over_steps = ChainConfig {
            steps: 5,
            thinning: 10,
            ..ChainConfig::default()
        };
        assert!(thinning_over_steps.validate().is_err());
    }
}
