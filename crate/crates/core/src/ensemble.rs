//! Ensemble aggregation: score series, outcome tallies, outcome-restricted
//! filtering, histograms, ranked-share box statistics, percentile placement
//! of an enacted plan, anchor co-membership maps, and the plan-stream
//! interchange format.
//!
//! Aggregators are built for streaming: each holds state independent of the
//! ensemble size (box statistics, which need full per-rank distributions,
//! hold O(plans × districts)). A single pass over a plan stream can feed any
//! number of aggregators.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DualGraph, ElectionTallies};
use crate::metrics::{district_tally, seat_outcome, MetricsError, SeatOutcome};
use crate::partition::{county_splits, Assignment, PartitionError};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("anchor node {id:?} is not in the graph")]
    UnknownAnchor { id: String },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("score series is empty")]
    EmptySeries,
    #[error("score series has {series_len} values but ensemble has {ensemble_len} plans")]
    Misaligned {
        series_len: usize,
        ensemble_len: usize,
    },
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("ensemble line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-plan values of one metric for one contest, aligned with ensemble
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub metric: String,
    pub contest: String,
    pub values: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(metric: impl Into<String>, contest: impl Into<String>) -> Self {
        ScoreSeries {
            metric: metric.into(),
            contest: contest.into(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Co-membership
// ---------------------------------------------------------------------------

/// Fraction of plans in which each node shares a district with the anchor.
#[derive(Debug, Clone)]
pub struct CoMembershipMap {
    pub anchor: String,
    /// By canonical node index; the anchor's own entry is 1.0.
    pub freq: Vec<f64>,
    pub plans: u64,
}

/// Streaming accumulator behind [`co_membership`].
#[derive(Debug, Clone)]
pub struct CoMembership {
    anchor_id: String,
    anchor: usize,
    counts: Vec<u64>,
    plans: u64,
}

impl CoMembership {
    pub fn new(g: &DualGraph, anchor_id: &str) -> Result<Self, EnsembleError> {
        let anchor = g
            .node_index(anchor_id)
            .ok_or_else(|| EnsembleError::UnknownAnchor {
                id: anchor_id.to_string(),
            })?;
        Ok(CoMembership {
            anchor_id: anchor_id.to_string(),
            anchor,
            counts: vec![0; g.node_count()],
            plans: 0,
        })
    }

    pub fn update(&mut self, a: &Assignment) {
        let target = a.label(self.anchor);
        for (i, &label) in a.labels().iter().enumerate() {
            if label == target {
                self.counts[i] += 1;
            }
        }
        self.plans += 1;
    }

    pub fn finish(self) -> Result<CoMembershipMap, EnsembleError> {
        if self.plans == 0 {
            return Err(EnsembleError::EmptyEnsemble);
        }
        let freq = self
            .counts
            .iter()
            .map(|&c| c as f64 / self.plans as f64)
            .collect();
        Ok(CoMembershipMap {
            anchor: self.anchor_id,
            freq,
            plans: self.plans,
        })
    }
}

/// Co-membership frequencies of every node with the anchor across an
/// ensemble. Label-relabeling within any plan leaves the result unchanged.
pub fn co_membership<'a>(
    plans: impl IntoIterator<Item = &'a Assignment>,
    g: &DualGraph,
    anchor_id: &str,
) -> Result<CoMembershipMap, EnsembleError> {
    let mut acc = CoMembership::new(g, anchor_id)?;
    for a in plans {
        acc.update(a);
    }
    acc.finish()
}

// ---------------------------------------------------------------------------
// Outcome tallies and filtering
// ---------------------------------------------------------------------------

/// Counts of plans per seat-outcome class; counts sum to the ensemble size.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutcomeTally {
    pub counts: BTreeMap<SeatOutcome, u64>,
    pub plans: u64,
}

impl OutcomeTally {
    pub fn record(&mut self, outcome: SeatOutcome) {
        *self.counts.entry(outcome).or_default() += 1;
        self.plans += 1;
    }

    pub fn count(&self, outcome: SeatOutcome) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }
}

pub fn outcome_tally<'a>(
    plans: impl IntoIterator<Item = &'a Assignment>,
    g: &DualGraph,
    t: &ElectionTallies,
) -> Result<OutcomeTally, EnsembleError> {
    let mut tally = OutcomeTally::default();
    for a in plans {
        tally.record(seat_outcome(&district_tally(g, a, t)?));
    }
    Ok(tally)
}

/// Restricts a score series to the plans whose seat outcome satisfies the
/// predicate. The series must align one-to-one with the ensemble.
pub fn filter_by_outcome<'a>(
    series: &ScoreSeries,
    plans: impl IntoIterator<Item = &'a Assignment>,
    g: &DualGraph,
    t: &ElectionTallies,
    predicate: impl Fn(&SeatOutcome) -> bool,
) -> Result<ScoreSeries, EnsembleError> {
    let plans: Vec<&Assignment> = plans.into_iter().collect();
    if plans.len() != series.values.len() {
        return Err(EnsembleError::Misaligned {
            series_len: series.values.len(),
            ensemble_len: plans.len(),
        });
    }
    let mut out = ScoreSeries::new(series.metric.clone(), series.contest.clone());
    for (a, &value) in plans.iter().zip(series.values.iter()) {
        let outcome = seat_outcome(&district_tally(g, a, t)?);
        if predicate(&outcome) {
            out.values.push(value);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Histograms and percentiles
// ---------------------------------------------------------------------------

/// Equal-width binned counts over a score series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (
            self.lo + i as f64 * width,
            self.lo + (i + 1) as f64 * width,
        )
    }
}

/// Bins a series over [min, max] (or a caller-specified range, with values
/// outside it clamped into the edge bins so the total always equals the
/// series length). A degenerate range puts everything in the first bin.
pub fn histogram(
    series: &ScoreSeries,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram, EnsembleError> {
    if bins == 0 {
        return Err(EnsembleError::ZeroBins);
    }
    if series.values.is_empty() {
        return Err(EnsembleError::EmptySeries);
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        let lo = series.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = series
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in &series.values {
        let idx = if width > 0.0 {
            (((v - lo) / width) as isize).clamp(0, bins as isize - 1) as usize
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

/// Mid-rank percentile of a value within a series: the fraction strictly
/// below plus half the fraction exactly equal. Monotone in the value and
/// always in [0, 1].
pub fn percentile_of(series: &ScoreSeries, value: f64) -> Result<f64, EnsembleError> {
    if series.values.is_empty() {
        return Err(EnsembleError::EmptySeries);
    }
    let mut below = 0u64;
    let mut equal = 0u64;
    for &v in &series.values {
        if v < value {
            below += 1;
        } else if v == value {
            equal += 1;
        }
    }
    Ok((below as f64 + equal as f64 / 2.0) / series.values.len() as f64)
}

// ---------------------------------------------------------------------------
// Ranked-share box statistics
// ---------------------------------------------------------------------------

/// Five-number summary of one share rank across the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankBoxStats {
    /// 1-based rank: rank 1 is each plan's lowest district D share.
    pub rank: u32,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile between closest ranks (the common
/// "type 7" rule) over an already sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Streaming accumulator behind [`ranked_share_boxstats`]: stores each
/// plan's sorted district D shares per rank.
#[derive(Debug, Clone, Default)]
pub struct RankedShares {
    per_rank: Vec<Vec<f64>>,
}

impl RankedShares {
    pub fn update(&mut self, shares: &[f64]) {
        let mut sorted = shares.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if self.per_rank.len() < sorted.len() {
            self.per_rank.resize(sorted.len(), Vec::new());
        }
        for (rank, value) in sorted.into_iter().enumerate() {
            self.per_rank[rank].push(value);
        }
    }

    pub fn finish(self) -> Result<Vec<RankBoxStats>, EnsembleError> {
        if self.per_rank.is_empty() {
            return Err(EnsembleError::EmptyEnsemble);
        }
        let mut out = Vec::with_capacity(self.per_rank.len());
        for (rank, mut values) in self.per_rank.into_iter().enumerate() {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.push(RankBoxStats {
                rank: rank as u32 + 1,
                min: values[0],
                q1: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q3: quantile_sorted(&values, 0.75),
                max: values[values.len() - 1],
            });
        }
        Ok(out)
    }
}

/// For each plan, sorts district D shares ascending; reports the per-rank
/// five-number summary across the ensemble.
pub fn ranked_share_boxstats<'a>(
    plans: impl IntoIterator<Item = &'a Assignment>,
    g: &DualGraph,
    t: &ElectionTallies,
) -> Result<Vec<RankBoxStats>, EnsembleError> {
    let mut acc = RankedShares::default();
    for a in plans {
        let shares = district_tally(g, a, t)?.d_shares()?;
        acc.update(&shares);
    }
    acc.finish()
}

// ---------------------------------------------------------------------------
// County-split distribution
// ---------------------------------------------------------------------------

/// Distribution of county-split counts across an ensemble.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitDistribution {
    /// Plans per number of split counties.
    pub by_split_counties: BTreeMap<u32, u64>,
    /// Plans per total split count.
    pub by_total_splits: BTreeMap<u32, u64>,
    pub plans: u64,
}

pub fn split_distribution<'a>(
    plans: impl IntoIterator<Item = &'a Assignment>,
    g: &DualGraph,
) -> Result<SplitDistribution, EnsembleError> {
    let mut dist = SplitDistribution::default();
    for a in plans {
        let report = county_splits(g, a)?;
        *dist
            .by_split_counties
            .entry(report.split_counties)
            .or_default() += 1;
        *dist.by_total_splits.entry(report.total_splits).or_default() += 1;
        dist.plans += 1;
    }
    Ok(dist)
}

// ---------------------------------------------------------------------------
// Plan-stream interchange (JSON Lines)
// ---------------------------------------------------------------------------

/// Optional metadata record at the head of an ensemble file, carrying the
/// provenance every output must embed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub manifest_sha256: String,
    pub seed: u64,
    pub epsilon: f64,
    pub steps: u64,
    pub k: u32,
    pub thinning: u64,
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    step: u64,
    assignment: Vec<u32>,
}

pub fn write_ensemble_header(
    mut w: impl Write,
    header: &EnsembleHeader,
) -> Result<(), EnsembleError> {
    serde_json::to_writer(&mut w, header)
        .map_err(|e| EnsembleError::Format {
            line: 1,
            message: e.to_string(),
        })?;
    writeln!(w)?;
    Ok(())
}

/// Writes one plan record: `{"step": n, "assignment": [...]}` with the
/// district labels in canonical node order.
pub fn write_plan_record(mut w: impl Write, step: u64, a: &Assignment) -> Result<(), EnsembleError> {
    let record = PlanRecord {
        step,
        assignment: a.labels().to_vec(),
    };
    serde_json::to_writer(&mut w, &record).map_err(|e| EnsembleError::Format {
        line: 0,
        message: e.to_string(),
    })?;
    writeln!(w)?;
    Ok(())
}

/// Reads an ensemble file, validating each assignment against the graph.
/// Returns the optional header and the plans in file order.
pub fn read_ensemble(
    g: &DualGraph,
    reader: impl BufRead,
) -> Result<(Option<EnsembleHeader>, Vec<(u64, Assignment)>), EnsembleError> {
    let mut header = None;
    let mut plans = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(record) = serde_json::from_str::<PlanRecord>(&line) {
            let assignment =
                Assignment::from_labels(g, record.assignment).map_err(EnsembleError::from)?;
            plans.push((record.step, assignment));
        } else if lineno == 0 {
            header = Some(serde_json::from_str::<EnsembleHeader>(&line).map_err(|e| {
                EnsembleError::Format {
                    line: 1,
                    message: format!("neither a plan record nor a header: {e}"),
                }
            })?);
        } else {
            return Err(EnsembleError::Format {
                line: lineno + 1,
                message: "not a plan record".to_string(),
            });
        }
    }
    Ok((header, plans))
}
