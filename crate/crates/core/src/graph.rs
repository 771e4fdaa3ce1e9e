//! Precinct dual graph: population units as vertices, edges between
//! neighboring units, with per-node election tallies and the data-cleaning
//! operations (node merges, zero-fill) needed to reconcile raw inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Votes per party label for one node in one contest.
pub type PartyVotes = BTreeMap<String, u64>;
/// All tallies carried by a node: contest name -> party -> votes.
pub type ContestTallies = BTreeMap<String, PartyVotes>;

/// Canonical two-party labels. Other labels are carried through untouched.
pub const PARTY_D: &str = "D";
pub const PARTY_R: &str = "R";
pub const PARTY_I: &str = "I";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("failed to parse graph JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate node id {id:?}")]
    DuplicateNodeId { id: String },
    #[error("edge [{a:?}, {b:?}] references unknown node {unknown:?}")]
    UnknownEdgeEndpoint { a: String, b: String, unknown: String },
    #[error("self-loop on node {id:?}")]
    SelfLoop { id: String },
    #[error("duplicate edge [{a:?}, {b:?}]")]
    DuplicateEdge { a: String, b: String },
    #[error("node {id:?} has negative population {value}")]
    NegativePopulation { id: String, value: i64 },
    #[error("node {id:?} has negative vote count {value} for party {party:?} in contest {contest:?}")]
    NegativeVotes {
        id: String,
        contest: String,
        party: String,
        value: i64,
    },
    #[error("merge set is empty")]
    EmptyMergeSet,
    #[error("merge set references unknown node {id:?}")]
    UnknownMergeNode { id: String },
    #[error("merge set is not connected in the graph")]
    DisconnectedMergeSet,
    #[error("merged node id {id:?} collides with a node outside the merge set")]
    IdCollision { id: String },
    #[error("cleaning script: {0}")]
    CleaningScript(String),
}

/// One population unit: a precinct, ward, or merged town.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: String,
    pub pop: u64,
    pub county: Option<String>,
    pub tallies: ContestTallies,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, pop: u64) -> Self {
        NodeRecord {
            id: id.into(),
            pop,
            county: None,
            tallies: ContestTallies::new(),
        }
    }

    pub fn with_county(mut self, county: impl Into<String>) -> Self {
        self.county = Some(county.into());
        self
    }

    pub fn with_votes(mut self, contest: &str, party: &str, votes: u64) -> Self {
        *self
            .tallies
            .entry(contest.to_string())
            .or_default()
            .entry(party.to_string())
            .or_default() += votes;
        self
    }
}

/// Immutable adjacency graph over population units.
///
/// Node order is the input-file order and serves as the canonical index for
/// compact assignment vectors. Edges are stored deduplicated with each pair
/// ordered by node id and the list sorted lexicographically; this is also the
/// canonical serialization order.
#[derive(Debug, Clone)]
pub struct DualGraph {
    nodes: Vec<NodeRecord>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    total_pop: u64,
}

impl DualGraph {
    /// Builds a graph from node records and id-pair edges, checking all
    /// structural invariants.
    pub fn new(
        nodes: Vec<NodeRecord>,
        edge_ids: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNodeId {
                    id: node.id.clone(),
                });
            }
        }

        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(edge_ids.len());
        for (a, b) in &edge_ids {
            let ia = *index
                .get(a)
                .ok_or_else(|| GraphError::UnknownEdgeEndpoint {
                    a: a.clone(),
                    b: b.clone(),
                    unknown: a.clone(),
                })?;
            let ib = *index
                .get(b)
                .ok_or_else(|| GraphError::UnknownEdgeEndpoint {
                    a: a.clone(),
                    b: b.clone(),
                    unknown: b.clone(),
                })?;
            if ia == ib {
                return Err(GraphError::SelfLoop { id: a.clone() });
            }
            let key = (ia.min(ib), ia.max(ib));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
            edges.push(key);
        }
        // Canonical edge order: pairs ordered by id, list sorted by id pair.
        let id_of = |i: usize| nodes[i].id.as_str();
        for e in edges.iter_mut() {
            if id_of(e.0) > id_of(e.1) {
                *e = (e.1, e.0);
            }
        }
        edges.sort_by(|x, y| (id_of(x.0), id_of(x.1)).cmp(&(id_of(y.0), id_of(y.1))));

        let mut neighbors = vec![Vec::new(); nodes.len()];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for adj in neighbors.iter_mut() {
            adj.sort_unstable();
        }

        let total_pop = nodes.iter().map(|n| n.pop).sum();
        Ok(DualGraph {
            nodes,
            index,
            edges,
            neighbors,
            total_pop,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeRecord {
        &self.nodes[i]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Edges as canonical-index pairs, in canonical (id-lexicographic) order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn total_population(&self) -> u64 {
        self.total_pop
    }

    /// Contest names appearing on at least one node.
    pub fn contests(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .flat_map(|n| n.tallies.keys().cloned())
            .collect()
    }

    /// Connected components as sorted lists of node indices, ordered by
    /// smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let cid = components.len();
            let mut members = vec![start];
            comp[start] = cid;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = cid;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.nodes.is_empty() || self.connected_components().len() == 1
    }

    /// True if the given node indices induce a connected subgraph.
    pub fn is_subset_connected(&self, subset: &[usize]) -> bool {
        if subset.is_empty() {
            return false;
        }
        let members: HashSet<usize> = subset.iter().copied().collect();
        let mut seen = HashSet::with_capacity(members.len());
        let start = subset[0];
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if members.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == members.len()
    }

    /// Returns a copy where every node carries the named contest, inserting
    /// an all-zero (empty) party map where it was missing.
    pub fn zero_fill_contest(&self, contest: &str) -> DualGraph {
        let mut g = self.clone();
        for node in g.nodes.iter_mut() {
            node.tallies.entry(contest.to_string()).or_default();
        }
        g
    }
}

/// Result of `validate_graph`: report-only, never fails.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub connected: bool,
    /// Connected components by node id; a single entry when connected.
    pub components: Vec<Vec<String>>,
    pub zero_population_nodes: Vec<String>,
    pub missing_county_nodes: Vec<String>,
    /// Contest name -> node ids with no entry for that contest.
    pub incomplete_contests: BTreeMap<String, Vec<String>>,
}

impl ValidationReport {
    pub fn zero_population_count(&self) -> usize {
        self.zero_population_nodes.len()
    }

    pub fn is_clean(&self) -> bool {
        self.connected && self.incomplete_contests.is_empty()
    }
}

/// Inspects a graph for the conditions downstream operations rely on:
/// connectivity, zero-population nodes, missing county tags, and contests
/// that do not cover every node.
pub fn validate_graph(g: &DualGraph) -> ValidationReport {
    let components: Vec<Vec<String>> = g
        .connected_components()
        .into_iter()
        .map(|c| c.into_iter().map(|i| g.node(i).id.clone()).collect())
        .collect();
    let connected = components.len() <= 1;

    let zero_population_nodes = g
        .nodes()
        .iter()
        .filter(|n| n.pop == 0)
        .map(|n| n.id.clone())
        .collect();
    let missing_county_nodes = g
        .nodes()
        .iter()
        .filter(|n| n.county.is_none())
        .map(|n| n.id.clone())
        .collect();

    let mut incomplete_contests = BTreeMap::new();
    for contest in g.contests() {
        let missing: Vec<String> = g
            .nodes()
            .iter()
            .filter(|n| !n.tallies.contains_key(&contest))
            .map(|n| n.id.clone())
            .collect();
        if !missing.is_empty() {
            incomplete_contests.insert(contest, missing);
        }
    }

    ValidationReport {
        connected,
        components,
        zero_population_nodes,
        missing_county_nodes,
        incomplete_contests,
    }
}

/// Replaces a connected set of nodes by a single node whose population and
/// per-contest tallies are the element-wise sums. The merged node takes the
/// canonical position of the set's first (lowest-index) member; external
/// adjacencies are unioned with duplicates and self-loops dropped.
///
/// The merged node keeps the county tag iff all members agree on it.
pub fn merge_nodes(g: &DualGraph, ids: &[String], new_id: &str) -> Result<DualGraph, GraphError> {
    if ids.is_empty() {
        return Err(GraphError::EmptyMergeSet);
    }
    let mut members = BTreeSet::new();
    for id in ids {
        let idx = g
            .node_index(id)
            .ok_or_else(|| GraphError::UnknownMergeNode { id: id.clone() })?;
        members.insert(idx);
    }
    let member_list: Vec<usize> = members.iter().copied().collect();
    if !g.is_subset_connected(&member_list) {
        return Err(GraphError::DisconnectedMergeSet);
    }
    for node in g.nodes() {
        if node.id == new_id && !members.contains(&g.node_index(&node.id).unwrap()) {
            return Err(GraphError::IdCollision {
                id: new_id.to_string(),
            });
        }
    }

    let anchor = member_list[0];
    let mut merged = NodeRecord::new(new_id, 0);
    let mut counties: BTreeSet<Option<String>> = BTreeSet::new();
    for &i in &member_list {
        let node = g.node(i);
        merged.pop += node.pop;
        counties.insert(node.county.clone());
        for (contest, votes) in &node.tallies {
            let entry = merged.tallies.entry(contest.clone()).or_default();
            for (party, count) in votes {
                *entry.entry(party.clone()).or_default() += count;
            }
        }
    }
    if counties.len() == 1 {
        merged.county = counties.into_iter().next().unwrap();
    }

    let mut nodes = Vec::with_capacity(g.node_count() - member_list.len() + 1);
    for (i, node) in g.nodes().iter().enumerate() {
        if i == anchor {
            nodes.push(merged.clone());
        } else if !members.contains(&i) {
            nodes.push(node.clone());
        }
    }

    let old_id = |i: usize| -> &str {
        if members.contains(&i) {
            new_id
        } else {
            &g.node(i).id
        }
    };
    let mut edge_ids = Vec::new();
    let mut seen = HashSet::new();
    for &(u, v) in g.edges() {
        let a = old_id(u);
        let b = old_id(v);
        if a == b {
            continue; // internal edge of the merge set
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        if seen.insert(key) {
            edge_ids.push((a.to_string(), b.to_string()));
        }
    }

    DualGraph::new(nodes, edge_ids)
}

/// Per-node vote counts for one named contest.
///
/// May cover only part of a graph until `zero_fill` completes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionTallies {
    contest: String,
    votes: BTreeMap<String, PartyVotes>,
}

impl ElectionTallies {
    pub fn new(contest: impl Into<String>, votes: BTreeMap<String, PartyVotes>) -> Self {
        ElectionTallies {
            contest: contest.into(),
            votes,
        }
    }

    /// Extracts the named contest from the graph's embedded tallies. Nodes
    /// that do not carry the contest are absent from the result.
    pub fn from_graph(g: &DualGraph, contest: &str) -> Self {
        let votes = g
            .nodes()
            .iter()
            .filter_map(|n| {
                n.tallies
                    .get(contest)
                    .map(|v| (n.id.clone(), v.clone()))
            })
            .collect();
        ElectionTallies {
            contest: contest.to_string(),
            votes,
        }
    }

    pub fn contest(&self) -> &str {
        &self.contest
    }

    pub fn node_votes(&self, id: &str) -> Option<&PartyVotes> {
        self.votes.get(id)
    }

    pub fn votes(&self) -> &BTreeMap<String, PartyVotes> {
        &self.votes
    }

    /// Votes for one party at one node; zero when the party is absent. Nodes
    /// with no entry at all also report zero here — use `node_votes` to
    /// distinguish missing from zero.
    pub fn votes_for(&self, id: &str, party: &str) -> u64 {
        self.votes
            .get(id)
            .and_then(|v| v.get(party).copied())
            .unwrap_or(0)
    }

    pub fn statewide_total(&self, party: &str) -> u64 {
        self.votes
            .values()
            .map(|v| v.get(party).copied().unwrap_or(0))
            .sum()
    }

    pub fn covers(&self, g: &DualGraph) -> bool {
        g.nodes().iter().all(|n| self.votes.contains_key(&n.id))
    }

    /// Returns tallies where every node of `g` has an entry; nodes missing
    /// from the source receive all-zero (empty) party maps. Existing entries
    /// and statewide totals are unchanged. Idempotent.
    pub fn zero_fill(&self, g: &DualGraph) -> ElectionTallies {
        let mut votes = self.votes.clone();
        for node in g.nodes() {
            votes.entry(node.id.clone()).or_default();
        }
        ElectionTallies {
            contest: self.contest.clone(),
            votes,
        }
    }
}

/// One step of a cleaning script: declared merges and zero-fills, executed
/// in order. Reassignment judgment calls are expressed as explicit
/// directives rather than inferred.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CleaningDirective {
    Merge { ids: Vec<String>, new_id: String },
    ZeroFill { contest: String },
}

pub fn load_cleaning_script(path: impl AsRef<Path>) -> Result<Vec<CleaningDirective>, GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Applies cleaning directives in order, producing a new graph.
pub fn apply_cleaning(
    g: &DualGraph,
    directives: &[CleaningDirective],
) -> Result<DualGraph, GraphError> {
    let mut graph = g.clone();
    for (i, directive) in directives.iter().enumerate() {
        graph = match directive {
            CleaningDirective::Merge { ids, new_id } => merge_nodes(&graph, ids, new_id)
                .map_err(|e| GraphError::CleaningScript(format!("directive {i}: {e}")))?,
            CleaningDirective::ZeroFill { contest } => graph.zero_fill_contest(contest),
        };
    }
    Ok(graph)
}

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RawNode {
    id: String,
    pop: i64,
    #[serde(default)]
    county: Option<String>,
    #[serde(default)]
    tallies: BTreeMap<String, BTreeMap<String, i64>>,
}

#[derive(Deserialize)]
struct RawGraphFile {
    nodes: Vec<RawNode>,
    edges: Vec<(String, String)>,
}

#[derive(Serialize)]
struct NodeOut<'a> {
    id: &'a str,
    pop: u64,
    county: &'a Option<String>,
    tallies: &'a ContestTallies,
}

#[derive(Serialize)]
struct GraphOut<'a> {
    nodes: Vec<NodeOut<'a>>,
    edges: Vec<(&'a str, &'a str)>,
}

impl DualGraph {
    /// Parses the interchange JSON, reporting negative counts and referential
    /// problems with node/edge context.
    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let raw: RawGraphFile = serde_json::from_str(text)?;
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for rn in raw.nodes {
            if rn.pop < 0 {
                return Err(GraphError::NegativePopulation {
                    id: rn.id,
                    value: rn.pop,
                });
            }
            let mut tallies = ContestTallies::new();
            for (contest, parties) in rn.tallies {
                let mut out = PartyVotes::new();
                for (party, count) in parties {
                    if count < 0 {
                        return Err(GraphError::NegativeVotes {
                            id: rn.id,
                            contest,
                            party,
                            value: count,
                        });
                    }
                    out.insert(party, count as u64);
                }
                tallies.insert(contest, out);
            }
            nodes.push(NodeRecord {
                id: rn.id,
                pop: rn.pop as u64,
                county: rn.county,
                tallies,
            });
        }
        DualGraph::new(nodes, raw.edges)
    }

    /// Canonical serialization: nodes in canonical order, edges as sorted id
    /// pairs in lexicographic order. Load followed by this round-trips
    /// bit-identically on canonical files.
    pub fn to_canonical_json(&self) -> String {
        let out = GraphOut {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeOut {
                    id: &n.id,
                    pop: n.pop,
                    county: &n.county,
                    tallies: &n.tallies,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(u, v)| (self.nodes[u].id.as_str(), self.nodes[v].id.as_str()))
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&out).expect("graph serialization");
        text.push('\n');
        text
    }

    pub fn save_canonical(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let path = path.as_ref();
        fs::write(path, self.to_canonical_json()).map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Loads and validates a dual graph from the interchange JSON format.
pub fn load_graph(path: impl AsRef<Path>) -> Result<DualGraph, GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    DualGraph::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn two_node_json() -> &'static str {
        r#"{
          "nodes": [
            {"id": "a", "pop": 5, "county": null, "tallies": {}},
            {"id": "b", "pop": 5, "county": null, "tallies": {}}
          ],
          "edges": [["a", "b"]]
        }"#
    }

    #[test]
    fn loads_minimal_two_node_graph() {
        let g = DualGraph::from_json_str(two_node_json()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.total_population(), 10);
    }

    #[test]
    fn unknown_edge_endpoint_is_named() {
        let text = r#"{
          "nodes": [{"id": "a", "pop": 1}],
          "edges": [["a", "zz"]]
        }"#;
        let err = DualGraph::from_json_str(text).unwrap_err();
        match err {
            GraphError::UnknownEdgeEndpoint { unknown, .. } => assert_eq!(unknown, "zz"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_population_is_named() {
        let text = r#"{"nodes": [{"id": "a", "pop": -3}], "edges": []}"#;
        match DualGraph::from_json_str(text).unwrap_err() {
            GraphError::NegativePopulation { id, value } => {
                assert_eq!(id, "a");
                assert_eq!(value, -3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_votes_are_named() {
        let text = r#"{
          "nodes": [{"id": "a", "pop": 1, "tallies": {"gov": {"D": -1}}}],
          "edges": []
        }"#;
        match DualGraph::from_json_str(text).unwrap_err() {
            GraphError::NegativeVotes { id, contest, party, .. } => {
                assert_eq!((id.as_str(), contest.as_str(), party.as_str()), ("a", "gov", "D"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_id_rejected() {
        let nodes = vec![NodeRecord::new("a", 1), NodeRecord::new("a", 2)];
        assert!(matches!(
            DualGraph::new(nodes, vec![]),
            Err(GraphError::DuplicateNodeId { .. })
        ));
    }

    // A w×h grid has h·(w−1) horizontal plus w·(h−1) vertical edges.
    #[test]
    fn grid_fixture_has_expected_shape() {
        let g = generators::grid(4, 4);
        assert_eq!(g.node_count(), 16);
        assert_eq!(g.edges().len(), 4 * 3 + 4 * 3);
        assert!(g.is_connected());
    }

    #[test]
    fn validate_reports_components() {
        // Two disjoint edges: a-b and c-d.
        let nodes = ["a", "b", "c", "d"]
            .iter()
            .map(|id| NodeRecord::new(*id, 1))
            .collect();
        let edges = vec![
            ("a".to_string(), "b".to_string()),
            ("c".to_string(), "d".to_string()),
        ];
        let g = DualGraph::new(nodes, edges).unwrap();
        let report = validate_graph(&g);
        assert!(!report.connected);
        assert_eq!(report.components.len(), 2);
        assert_eq!(report.components[0], vec!["a", "b"]);
        assert_eq!(report.components[1], vec!["c", "d"]);
    }

    #[test]
    fn validate_counts_zero_population_nodes() {
        // A third of nodes carry no population, as in sparsely inhabited
        // rural precinct data.
        let mut nodes: Vec<NodeRecord> = Vec::new();
        for i in 0..9 {
            let pop = if i % 3 == 0 { 0 } else { 10 };
            nodes.push(NodeRecord::new(format!("n{i}"), pop));
        }
        let edges = (0..8)
            .map(|i| (format!("n{i}"), format!("n{}", i + 1)))
            .collect();
        let g = DualGraph::new(nodes, edges).unwrap();
        let report = validate_graph(&g);
        assert!(report.connected);
        assert_eq!(report.zero_population_count(), 3);
    }

    #[test]
    fn singleton_merge_is_rename() {
        let g = DualGraph::from_json_str(two_node_json()).unwrap();
        let merged = merge_nodes(&g, &["a".to_string()], "a2").unwrap();
        assert_eq!(merged.node_count(), 2);
        assert_eq!(merged.node(0).id, "a2");
        assert_eq!(merged.node(0).pop, 5);
        assert_eq!(merged.edges().len(), 1);
    }

    #[test]
    fn path_merge_sums_and_rewires() {
        let nodes = vec![
            NodeRecord::new("a", 3).with_votes("gov", "D", 4),
            NodeRecord::new("b", 4).with_votes("gov", "D", 6),
            NodeRecord::new("c", 5),
        ];
        let edges = vec![
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ];
        let g = DualGraph::new(nodes, edges).unwrap();
        let merged = merge_nodes(&g, &["a".to_string(), "b".to_string()], "ab").unwrap();
        assert_eq!(merged.node_count(), 2);
        let ab = merged.node(merged.node_index("ab").unwrap());
        assert_eq!(ab.pop, 7);
        assert_eq!(ab.tallies["gov"]["D"], 10);
        assert_eq!(merged.edges().len(), 1);
    }

    #[test]
    fn ward_merge_preserves_town_population() {
        // Five wards of one town plus two neighbors.
        let ward_pops = [312u64, 887, 454, 209, 1033];
        let mut nodes: Vec<NodeRecord> = ward_pops
            .iter()
            .enumerate()
            .map(|(i, &p)| NodeRecord::new(format!("ward{}", i + 1), p).with_county("rockingham"))
            .collect();
        nodes.push(NodeRecord::new("east", 500).with_county("rockingham"));
        nodes.push(NodeRecord::new("west", 700).with_county("hillsborough"));
        let mut edges: Vec<(String, String)> = (0..4)
            .map(|i| (format!("ward{}", i + 1), format!("ward{}", i + 2)))
            .collect();
        edges.push(("ward1".into(), "east".into()));
        edges.push(("ward5".into(), "east".into()));
        edges.push(("ward3".into(), "west".into()));
        let g = DualGraph::new(nodes, edges).unwrap();
        let ids: Vec<String> = (1..=5).map(|i| format!("ward{i}")).collect();
        let merged = merge_nodes(&g, &ids, "town").unwrap();
        let town = merged.node(merged.node_index("town").unwrap());
        assert_eq!(town.pop, ward_pops.iter().sum::<u64>());
        assert_eq!(town.county.as_deref(), Some("rockingham"));
        assert_eq!(merged.node_count(), 3);
        // town-east deduplicated to one edge, town-west kept.
        assert_eq!(merged.edges().len(), 2);
        assert_eq!(merged.total_population(), g.total_population());
    }

    #[test]
    fn merge_requires_connected_set() {
        let g = generators::grid(3, 3);
        // Opposite corners share no edge.
        let ids = vec![g.node(0).id.clone(), g.node(8).id.clone()];
        assert!(matches!(
            merge_nodes(&g, &ids, "corners"),
            Err(GraphError::DisconnectedMergeSet)
        ));
    }

    #[test]
    fn merge_rejects_id_collision() {
        let g = DualGraph::from_json_str(two_node_json()).unwrap();
        assert!(matches!(
            merge_nodes(&g, &["a".to_string()], "b"),
            Err(GraphError::IdCollision { .. })
        ));
    }

    #[test]
    fn merge_conserves_population_and_votes_randomized() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g = generators::grid_with(4, 4, |r, c| {
                let mut n = NodeRecord::new(format!("r{r}c{c}"), rng.gen_range(0..500));
                n = n.with_votes("gov", "D", rng.gen_range(0..200));
                n.with_votes("gov", "R", rng.gen_range(0..200))
            });
            // Grow a random connected merge set from a random start.
            let start = rng.gen_range(0..g.node_count());
            let mut set = vec![start];
            for _ in 0..rng.gen_range(0..6) {
                let from = set[rng.gen_range(0..set.len())];
                let nbrs = g.neighbors(from);
                let cand = nbrs[rng.gen_range(0..nbrs.len())];
                if !set.contains(&cand) {
                    set.push(cand);
                }
            }
            let ids: Vec<String> = set.iter().map(|&i| g.node(i).id.clone()).collect();
            let merged = merge_nodes(&g, &ids, "merged").unwrap();

            assert_eq!(merged.total_population(), g.total_population());
            for party in ["D", "R"] {
                let before = ElectionTallies::from_graph(&g, "gov").statewide_total(party);
                let after = ElectionTallies::from_graph(&merged, "gov").statewide_total(party);
                assert_eq!(before, after);
            }
            // No self-loops or duplicate edges by construction.
            let mut seen = HashSet::new();
            for &(u, v) in merged.edges() {
                assert_ne!(u, v);
                assert!(seen.insert((u.min(v), u.max(v))));
            }
            assert_eq!(merged.is_connected(), g.is_connected());
        }
    }

    #[test]
    fn zero_fill_completes_and_conserves() {
        let g = generators::grid_with(2, 5, |r, c| {
            let idx = r * 5 + c;
            let mut n = NodeRecord::new(format!("r{r}c{c}"), 10);
            if idx < 7 {
                n = n.with_votes("sen", "D", idx as u64 + 1);
            }
            n
        });
        let partial = ElectionTallies::from_graph(&g, "sen");
        assert!(!partial.covers(&g));
        let before = partial.statewide_total("D");

        let filled = partial.zero_fill(&g);
        assert!(filled.covers(&g));
        assert_eq!(filled.votes().len(), 10);
        assert_eq!(filled.statewide_total("D"), before);
        // Idempotent.
        assert_eq!(filled.zero_fill(&g), filled);
    }

    #[test]
    fn zero_fill_on_empty_tallies() {
        let g = generators::grid(2, 2);
        let empty = ElectionTallies::new("sen", BTreeMap::new());
        let filled = empty.zero_fill(&g);
        assert!(filled.covers(&g));
        assert!(filled.votes().values().all(|v| v.is_empty()));
    }

    #[test]
    fn zero_fill_identity_when_complete() {
        let g = generators::grid_with(2, 2, |r, c| {
            NodeRecord::new(format!("r{r}c{c}"), 1).with_votes("sen", "R", 2)
        });
        let t = ElectionTallies::from_graph(&g, "sen");
        assert_eq!(t.zero_fill(&g), t);
    }

    #[test]
    fn canonical_serialization_round_trips() {
        let g = generators::grid_with(3, 3, |r, c| {
            NodeRecord::new(format!("r{r}c{c}"), (r * 3 + c) as u64)
                .with_county(if c < 2 { "west" } else { "east" })
                .with_votes("gov", "D", r as u64)
                .with_votes("gov", "R", c as u64)
        });
        let text = g.to_canonical_json();
        let reloaded = DualGraph::from_json_str(&text).unwrap();
        assert_eq!(reloaded.to_canonical_json(), text);
    }

    #[test]
    fn cleaning_script_executes_in_order() {
        let script = r#"[
          {"op": "merge", "ids": ["a", "b"], "new_id": "ab"},
          {"op": "zero_fill", "contest": "gov"}
        ]"#;
        let directives: Vec<CleaningDirective> = serde_json::from_str(script).unwrap();
        let nodes = vec![
            NodeRecord::new("a", 1).with_votes("gov", "D", 3),
            NodeRecord::new("b", 2),
            NodeRecord::new("c", 3),
        ];
        let edges = vec![
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ];
        let g = DualGraph::new(nodes, edges).unwrap();
        let cleaned = apply_cleaning(&g, &directives).unwrap();
        assert_eq!(cleaned.node_count(), 2);
        assert!(cleaned.nodes().iter().all(|n| n.tallies.contains_key("gov")));
        let t = ElectionTallies::from_graph(&cleaned, "gov");
        assert!(t.covers(&cleaned));
        assert_eq!(t.statewide_total("D"), 3);
    }
}
