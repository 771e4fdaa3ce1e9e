//! Per-plan partisan metrics: district tallies, efficiency gap, mean-median,
//! partisan bias, seats–votes curves under uniform swing, seat outcomes,
//! independent-vote reallocation, and the population-weighted share
//! histogram.
//!
//! All metrics operate on two-party (D/R) tallies; third parties enter only
//! through explicit reallocation. Conventions (documented because the
//! underlying notions are often stated only verbally):
//!
//! * Efficiency gap = (wasted R − wasted D) / total two-party votes, where a
//!   losing party wastes every vote and a winning party wastes votes above
//!   exactly half the district's two-party total. Positive favors D.
//! * Mean-median = median − mean of district D shares. Positive favors D.
//! * Partisan bias = D seat share at statewide D share 1/2 under uniform
//!   swing, minus 1/2, with ties counted as half-seats. The statewide share
//!   is the unweighted mean of district shares.

use serde::Serialize;
use thiserror::Error;

use crate::graph::{DualGraph, ElectionTallies, PartyVotes, PARTY_D, PARTY_I, PARTY_R};
use crate::partition::Assignment;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("tallies for contest {contest:?} have no entry for node {id:?}")]
    MissingTallyEntry { contest: String, id: String },
    #[error("district tally is empty")]
    EmptyTally,
    #[error("total two-party vote count is zero")]
    ZeroTotalVotes,
    #[error("district {district} has zero two-party votes")]
    ZeroDistrictVotes { district: u32 },
    #[error("curve resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error("histogram needs at least one bin")]
    ZeroBins,
}

/// Two-party vote totals per district for one contest. Districts are indexed
/// by label − 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistrictTally {
    votes_d: Vec<u64>,
    votes_r: Vec<u64>,
}

impl DistrictTally {
    pub fn new(per_district: Vec<(u64, u64)>) -> Self {
        let votes_d = per_district.iter().map(|&(d, _)| d).collect();
        let votes_r = per_district.iter().map(|&(_, r)| r).collect();
        DistrictTally { votes_d, votes_r }
    }

    pub fn k(&self) -> u32 {
        self.votes_d.len() as u32
    }

    /// (D, R) votes for district `d` (1-based label).
    pub fn votes(&self, d: u32) -> (u64, u64) {
        let i = (d - 1) as usize;
        (self.votes_d[i], self.votes_r[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.votes_d
            .iter()
            .zip(self.votes_r.iter())
            .map(|(&d, &r)| (d, r))
    }

    /// District D shares of the two-party vote, erroring on any district
    /// with no two-party votes.
    pub fn d_shares(&self) -> Result<Vec<f64>, MetricsError> {
        if self.votes_d.is_empty() {
            return Err(MetricsError::EmptyTally);
        }
        self.iter()
            .enumerate()
            .map(|(i, (d, r))| {
                let total = d + r;
                if total == 0 {
                    Err(MetricsError::ZeroDistrictVotes {
                        district: i as u32 + 1,
                    })
                } else {
                    Ok(d as f64 / total as f64)
                }
            })
            .collect()
    }

    /// The same tally with D and R swapped everywhere.
    pub fn mirrored(&self) -> DistrictTally {
        DistrictTally {
            votes_d: self.votes_r.clone(),
            votes_r: self.votes_d.clone(),
        }
    }
}

/// Sums D and R votes per district. Party labels other than "D" and "R" are
/// ignored. Errors when the tallies lack an entry for some graph node.
pub fn district_tally(
    g: &DualGraph,
    a: &Assignment,
    t: &ElectionTallies,
) -> Result<DistrictTally, MetricsError> {
    let k = a.k() as usize;
    let mut votes_d = vec![0u64; k];
    let mut votes_r = vec![0u64; k];
    for (i, node) in g.nodes().iter().enumerate() {
        let entry = t
            .node_votes(&node.id)
            .ok_or_else(|| MetricsError::MissingTallyEntry {
                contest: t.contest().to_string(),
                id: node.id.clone(),
            })?;
        let d = (a.label(i) - 1) as usize;
        votes_d[d] += entry.get(PARTY_D).copied().unwrap_or(0);
        votes_r[d] += entry.get(PARTY_R).copied().unwrap_or(0);
    }
    Ok(DistrictTally { votes_d, votes_r })
}

/// Integer seat outcome of one plan: ties are reported, never silently
/// awarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SeatOutcome {
    pub seats_d: u32,
    pub seats_r: u32,
    pub ties: u32,
}

impl SeatOutcome {
    pub fn k(&self) -> u32 {
        self.seats_d + self.seats_r + self.ties
    }

    /// True when both parties win at least one seat outright.
    pub fn is_split(&self) -> bool {
        self.seats_d >= 1 && self.seats_r >= 1
    }

    /// D seats with ties counted as half.
    pub fn d_seats_with_half_ties(&self) -> f64 {
        self.seats_d as f64 + self.ties as f64 / 2.0
    }
}

pub fn seat_outcome(dt: &DistrictTally) -> SeatOutcome {
    let mut outcome = SeatOutcome {
        seats_d: 0,
        seats_r: 0,
        ties: 0,
    };
    for (d, r) in dt.iter() {
        if d > r {
            outcome.seats_d += 1;
        } else if r > d {
            outcome.seats_r += 1;
        } else {
            outcome.ties += 1;
        }
    }
    outcome
}

/// Efficiency gap, computed exactly in half-vote integer units so that
/// plans with identical statewide totals and a sweeping winner produce
/// bit-identical values.
pub fn efficiency_gap(dt: &DistrictTally) -> Result<f64, MetricsError> {
    let mut wasted_diff_halves: i128 = 0; // wasted_R − wasted_D, in half-votes
    let mut total: u128 = 0;
    for (d, r) in dt.iter() {
        let (d, r) = (d as i128, r as i128);
        let district_total = d + r;
        total += district_total as u128;
        let (wasted_d, wasted_r) = if d > r {
            // Winner wastes votes above half the two-party total; loser
            // wastes everything.
            (2 * d - district_total, 2 * r)
        } else if r > d {
            (2 * d, 2 * r - district_total)
        } else {
            (0, 0) // tied: both sit exactly at half
        };
        wasted_diff_halves += wasted_r - wasted_d;
    }
    if total == 0 {
        return Err(MetricsError::ZeroTotalVotes);
    }
    Ok(wasted_diff_halves as f64 / (2 * total) as f64)
}

/// Median minus mean of district D shares; positive indicates Democratic
/// advantage. Identically zero for two districts.
pub fn mean_median(dt: &DistrictTally) -> Result<f64, MetricsError> {
    let shares = dt.d_shares()?;
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    let mut sorted = shares;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(median - mean)
}

/// D seat share (ties as half-seats) after a uniform swing bringing the
/// statewide D share — the unweighted mean of district shares — to `v`.
/// Each district share is shifted by the same delta and clamped to [0, 1].
pub fn swing_seat_share(dt: &DistrictTally, v: f64) -> Result<f64, MetricsError> {
    let shares = dt.d_shares()?;
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    let delta = v - mean;
    let mut seats = 0.0;
    for s in &shares {
        let swung = (s + delta).clamp(0.0, 1.0);
        if swung > 0.5 {
            seats += 1.0;
        } else if swung == 0.5 {
            seats += 0.5;
        }
    }
    Ok(seats / shares.len() as f64)
}

/// Partisan bias with its degeneracy flag: when every district has the same
/// share, the post-swing comparison is all ties by symmetry and the bias is
/// reported as exactly zero with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasResult {
    pub value: f64,
    pub degenerate: bool,
}

/// Seat share above one-half when the statewide vote is swung to exactly
/// one-half. Identically zero for two districts with distinct shares.
pub fn partisan_bias(dt: &DistrictTally) -> Result<BiasResult, MetricsError> {
    let shares = dt.d_shares()?;
    let degenerate = shares.windows(2).all(|w| w[0] == w[1]);
    if degenerate {
        return Ok(BiasResult {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(BiasResult {
        value: swing_seat_share(dt, 0.5)? - 0.5,
        degenerate: false,
    })
}

/// Seats–votes curve sampled under uniform swing.
#[derive(Debug, Clone, Serialize)]
pub struct SeatsVotesCurve {
    /// (statewide D share, D seat share) points on a uniform grid over [0, 1].
    pub points: Vec<(f64, f64)>,
    /// Exact statewide shares at which each district flips (`mean + 1/2 −
    /// share`), sorted ascending; values outside [0, 1] belong to districts
    /// that never flip within the feasible range.
    pub breakpoints: Vec<f64>,
}

/// Samples the seats–votes function at `resolution` evenly spaced statewide
/// shares from 0 to 1 inclusive (`resolution` ≥ 2).
pub fn seats_votes_curve(
    dt: &DistrictTally,
    resolution: usize,
) -> Result<SeatsVotesCurve, MetricsError> {
    if resolution < 2 {
        return Err(MetricsError::InvalidResolution(resolution));
    }
    let shares = dt.d_shares()?;
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    let mut points = Vec::with_capacity(resolution);
    for j in 0..resolution {
        let v = j as f64 / (resolution - 1) as f64;
        points.push((v, swing_seat_share(dt, v)?));
    }
    let mut breakpoints: Vec<f64> = shares.iter().map(|s| mean + 0.5 - s).collect();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SeatsVotesCurve {
        points,
        breakpoints,
    })
}

/// The two major parties, as written in tally party labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorParty {
    Democratic,
    Republican,
}

impl MajorParty {
    pub fn label(&self) -> &'static str {
        match self {
            MajorParty::Democratic => PARTY_D,
            MajorParty::Republican => PARTY_R,
        }
    }
}

impl std::str::FromStr for MajorParty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" | "d" => Ok(MajorParty::Democratic),
            "R" | "r" => Ok(MajorParty::Republican),
            other => Err(format!("unknown party {other:?}, expected D or R")),
        }
    }
}

/// Scenario transform: every node's "I" votes move to the target party and
/// the "I" count drops to zero. Per-node totals are conserved; nodes without
/// an "I" entry are unchanged.
pub fn reallocate_independents(t: &ElectionTallies, target: MajorParty) -> ElectionTallies {
    let votes = t
        .votes()
        .iter()
        .map(|(id, parties)| {
            let mut out: PartyVotes = parties.clone();
            if let Some(independent) = out.get_mut(PARTY_I) {
                let moved = *independent;
                *independent = 0;
                *out.entry(target.label().to_string()).or_default() += moved;
            }
            (id.clone(), out)
        })
        .collect();
    ElectionTallies::new(t.contest().to_string(), votes)
}

/// Population-weighted histogram of per-node two-party D shares over equal
/// bins spanning [0, 1]. Nodes with no two-party votes accumulate into a
/// separate no-vote bucket, so bar heights plus the bucket sum to the total
/// population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightedShareHistogram {
    /// Population per bin; bin i covers [i/bins, (i+1)/bins), with the final
    /// bin closed at 1.
    pub bins: Vec<u64>,
    pub no_vote_population: u64,
}

impl WeightedShareHistogram {
    pub fn total_population(&self) -> u64 {
        self.bins.iter().sum::<u64>() + self.no_vote_population
    }
}

pub fn weighted_share_histogram(
    g: &DualGraph,
    t: &ElectionTallies,
    bins: usize,
) -> Result<WeightedShareHistogram, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    let mut hist = WeightedShareHistogram {
        bins: vec![0u64; bins],
        no_vote_population: 0,
    };
    for node in g.nodes() {
        let (d, r) = match t.node_votes(&node.id) {
            Some(parties) => (
                parties.get(PARTY_D).copied().unwrap_or(0),
                parties.get(PARTY_R).copied().unwrap_or(0),
            ),
            None => (0, 0),
        };
        if d + r == 0 {
            hist.no_vote_population += node.pop;
            continue;
        }
        let share = d as f64 / (d + r) as f64;
        let idx = ((share * bins as f64) as usize).min(bins - 1);
        hist.bins[idx] += node.pop;
    }
    Ok(hist)
}
