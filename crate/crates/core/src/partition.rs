//! Districting plans over a dual graph, the legality predicates they must
//! satisfy (contiguity, population balance), and county-split accounting.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::graph::DualGraph;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("assignment covers {got} nodes but graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("district label {label} out of range 1..={k}")]
    LabelOutOfRange { label: u32, k: u32 },
    #[error("district {label} is empty")]
    EmptyDistrict { label: u32 },
    #[error("plan assigns no districts")]
    NoDistricts,
    #[error("plan file row {row}: {message}")]
    PlanFile { row: usize, message: String },
    #[error("plan file is missing node {id:?}")]
    MissingNode { id: String },
    #[error("plan file names unknown node {id:?}")]
    UnknownNode { id: String },
    #[error("node {id:?} has no county tag")]
    MissingCounty { id: String },
    #[error("graph has zero total population")]
    ZeroTotalPopulation,
    #[error("plan file csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("plan file io error: {0}")]
    Io(#[from] io::Error),
}

/// A districting plan: a total map from canonical node index to district
/// label 1..=k, with cached district populations.
///
/// Immutable after construction; chain steps produce new values. The label
/// range is contiguous and every district is non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<u32>,
    k: u32,
    district_pops: Vec<u64>,
}

impl Assignment {
    /// Builds a plan from per-node labels in canonical node order, checking
    /// coverage, the 1..=k label range, and non-emptiness of every district.
    pub fn from_labels(g: &DualGraph, labels: Vec<u32>) -> Result<Self, PartitionError> {
        if labels.len() != g.node_count() {
            return Err(PartitionError::SizeMismatch {
                expected: g.node_count(),
                got: labels.len(),
            });
        }
        let k = labels.iter().copied().max().unwrap_or(0);
        if k == 0 {
            return Err(PartitionError::NoDistricts);
        }
        let mut district_pops = vec![0u64; k as usize];
        let mut seen = vec![false; k as usize];
        for (i, &label) in labels.iter().enumerate() {
            if label == 0 || label > k {
                return Err(PartitionError::LabelOutOfRange { label, k });
            }
            district_pops[(label - 1) as usize] += g.node(i).pop;
            seen[(label - 1) as usize] = true;
        }
        if let Some(d) = seen.iter().position(|&s| !s) {
            return Err(PartitionError::EmptyDistrict {
                label: d as u32 + 1,
            });
        }
        Ok(Assignment {
            labels,
            k,
            district_pops,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn label(&self, node: usize) -> u32 {
        self.labels[node]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Cached population of district `d` (1-based label).
    pub fn district_population(&self, d: u32) -> u64 {
        self.district_pops[(d - 1) as usize]
    }

    /// Cached populations indexed by label − 1.
    pub fn district_populations(&self) -> &[u64] {
        &self.district_pops
    }

    pub fn district_nodes(&self, d: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == d)
            .map(|(i, _)| i)
            .collect()
    }

    /// Labels relabeled by first occurrence in canonical node order, so that
    /// plans differing only by a label permutation compare equal.
    pub fn canonical_labels(&self) -> Vec<u32> {
        let mut rename = vec![0u32; self.k as usize + 1];
        let mut next = 0u32;
        let mut out = Vec::with_capacity(self.labels.len());
        for &label in &self.labels {
            let slot = &mut rename[label as usize];
            if *slot == 0 {
                next += 1;
                *slot = next;
            }
            out.push(*slot);
        }
        out
    }

    /// New assignment with the given node sets relabeled; populations of the
    /// two touched districts are recomputed, the rest reuse the cache.
    pub(crate) fn with_regions(
        &self,
        g: &DualGraph,
        part_a: &[usize],
        label_a: u32,
        part_b: &[usize],
        label_b: u32,
    ) -> Assignment {
        let mut labels = self.labels.clone();
        let mut pops = self.district_pops.clone();
        pops[(label_a - 1) as usize] = 0;
        pops[(label_b - 1) as usize] = 0;
        for &i in part_a {
            labels[i] = label_a;
            pops[(label_a - 1) as usize] += g.node(i).pop;
        }
        for &i in part_b {
            labels[i] = label_b;
            pops[(label_b - 1) as usize] += g.node(i).pop;
        }
        let out = Assignment {
            labels,
            k: self.k,
            district_pops: pops,
        };
        debug_assert!(out.cache_is_coherent(g));
        out
    }

    /// True iff the cached district populations equal a recomputation from
    /// scratch.
    pub fn cache_is_coherent(&self, g: &DualGraph) -> bool {
        let mut pops = vec![0u64; self.k as usize];
        for (i, &label) in self.labels.iter().enumerate() {
            pops[(label - 1) as usize] += g.node(i).pop;
        }
        pops == self.district_pops
    }

    /// Reads the plan file format: CSV with header `node_id,district`, one
    /// row per node.
    pub fn read_plan_csv(g: &DualGraph, reader: impl BufRead) -> Result<Self, PartitionError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut labels = vec![0u32; g.node_count()];
        let mut assigned = vec![false; g.node_count()];
        for (row, record) in csv_reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(PartitionError::PlanFile {
                    row: row + 2,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let id = &record[0];
            let node = g
                .node_index(id)
                .ok_or_else(|| PartitionError::UnknownNode { id: id.to_string() })?;
            let district: u32 = record[1].parse().map_err(|_| PartitionError::PlanFile {
                row: row + 2,
                message: format!("district {:?} is not a positive integer", &record[1]),
            })?;
            if district == 0 {
                return Err(PartitionError::PlanFile {
                    row: row + 2,
                    message: "district labels start at 1".to_string(),
                });
            }
            if assigned[node] {
                return Err(PartitionError::PlanFile {
                    row: row + 2,
                    message: format!("node {id:?} assigned twice"),
                });
            }
            assigned[node] = true;
            labels[node] = district;
        }
        if let Some(i) = assigned.iter().position(|&a| !a) {
            return Err(PartitionError::MissingNode {
                id: g.node(i).id.clone(),
            });
        }
        Assignment::from_labels(g, labels)
    }

    /// Writes the plan file format in canonical node order.
    pub fn write_plan_csv(&self, g: &DualGraph, mut writer: impl Write) -> io::Result<()> {
        let mut csv_writer = csv::Writer::from_writer(&mut writer);
        csv_writer.write_record(["node_id", "district"])?;
        for (i, &label) in self.labels.iter().enumerate() {
            csv_writer.write_record([g.node(i).id.as_str(), &label.to_string()])?;
        }
        csv_writer.flush()?;
        Ok(())
    }
}

/// Legality knobs shared by the chain and the report tooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegalityConfig {
    /// Fractional population tolerance: district populations must lie within
    /// epsilon of the ideal (total / k).
    pub epsilon: f64,
    pub require_contiguity: bool,
}

impl Default for LegalityConfig {
    fn default() -> Self {
        LegalityConfig {
            epsilon: 0.02,
            require_contiguity: true,
        }
    }
}

impl LegalityConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        Ok(())
    }
}

/// Per-district contiguity: entry d−1 is true iff the nodes of district d
/// induce a connected subgraph. Single-node districts count as connected.
pub fn is_contiguous(g: &DualGraph, a: &Assignment) -> Result<Vec<bool>, PartitionError> {
    if a.labels().len() != g.node_count() {
        return Err(PartitionError::SizeMismatch {
            expected: g.node_count(),
            got: a.labels().len(),
        });
    }
    let k = a.k() as usize;
    let mut sizes = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &label) in a.labels().iter().enumerate() {
        let d = (label - 1) as usize;
        sizes[d] += 1;
        if first[d] == usize::MAX {
            first[d] = i;
        }
    }
    let mut out = vec![false; k];
    let mut seen = vec![false; g.node_count()];
    for d in 0..k {
        let mut reached = 1usize;
        seen[first[d]] = true;
        let mut queue = VecDeque::from([first[d]]);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if a.label(v) == (d as u32 + 1) && !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        out[d] = reached == sizes[d];
    }
    Ok(out)
}

/// Maximum fractional deviation from the ideal district population:
/// max over districts of |pop − ideal| / ideal with ideal = total / k.
pub fn population_deviation(g: &DualGraph, a: &Assignment) -> Result<f64, PartitionError> {
    if g.total_population() == 0 {
        return Err(PartitionError::ZeroTotalPopulation);
    }
    let ideal = g.total_population() as f64 / a.k() as f64;
    Ok(a.district_populations()
        .iter()
        .map(|&p| (p as f64 - ideal).abs() / ideal)
        .fold(0.0, f64::max))
}

/// County-split accounting for one plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountySplitReport {
    /// Counties intersecting at least two districts.
    pub split_counties: u32,
    /// Sum over counties of (districts intersecting the county − 1).
    pub total_splits: u32,
}

/// Counts county splits: a county wholly inside one district contributes
/// nothing; one intersecting m districts contributes m−1 splits. Errors when
/// a node lacks a county tag, naming the node.
pub fn county_splits(g: &DualGraph, a: &Assignment) -> Result<CountySplitReport, PartitionError> {
    let mut districts_by_county: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (i, node) in g.nodes().iter().enumerate() {
        let county = node
            .county
            .as_deref()
            .ok_or_else(|| PartitionError::MissingCounty {
                id: node.id.clone(),
            })?;
        districts_by_county
            .entry(county)
            .or_default()
            .insert(a.label(i));
    }
    let mut split_counties = 0u32;
    let mut total_splits = 0u32;
    for districts in districts_by_county.values() {
        let m = districts.len() as u32;
        if m > 1 {
            split_counties += 1;
            total_splits += m - 1;
        }
    }
    Ok(CountySplitReport {
        split_counties,
        total_splits,
    })
}

/// Outcome of checking both legality predicates against a config.
#[derive(Debug, Clone, Serialize)]
pub struct LegalityReport {
    pub contiguous: bool,
    pub noncontiguous_districts: Vec<u32>,
    pub max_deviation: f64,
    pub within_tolerance: bool,
}

impl LegalityReport {
    pub fn is_legal(&self) -> bool {
        self.contiguous && self.within_tolerance
    }
}

pub fn check_legality(
    g: &DualGraph,
    a: &Assignment,
    cfg: &LegalityConfig,
) -> Result<LegalityReport, PartitionError> {
    let per_district = if cfg.require_contiguity {
        is_contiguous(g, a)?
    } else {
        vec![true; a.k() as usize]
    };
    let noncontiguous_districts: Vec<u32> = per_district
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(d, _)| d as u32 + 1)
        .collect();
    let max_deviation = population_deviation(g, a)?;
    Ok(LegalityReport {
        contiguous: noncontiguous_districts.is_empty(),
        noncontiguous_districts,
        max_deviation,
        within_tolerance: max_deviation <= cfg.epsilon,
    })
}
