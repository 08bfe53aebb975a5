//! Spatial homophily graph. Agents within geographic reach of each other
//! become candidates; a candidate pair ties with probability equal to its
//! demographic similarity. The graph is built once per replicate and never
//! mutated afterwards.
//!
//! Distances are normalized per dimension by the population's own spread,
//! so the similarity of a pair depends on who else exists. Dimensions with
//! zero spread carry no information and contribute nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Demographics, Population};
use crate::seeds;
use rand::Rng;

/// Which radius gates candidacy for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReachRule {
    /// Candidates iff distance <= max of the two radii.
    MaxRadius,
    /// Candidates iff distance <= min of the two radii (mutual reach).
    MinRadius,
}

/// What the pairwise distance is normalized by when converting to a tie
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormScope {
    /// Largest distance over all agent pairs.
    AllPairs,
    /// Largest distance over candidate pairs only.
    CandidatePairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub reach_rule: ReachRule,
    pub norm_scope: NormScope,
    /// Multiplies every radius before the reach test.
    pub radius_scale: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            reach_rule: ReachRule::MaxRadius,
            norm_scope: NormScope::AllPairs,
            radius_scale: 1.0,
        }
    }
}

/// Per-dimension spreads and the global maximum pairwise distance of one
/// population. Built once; similarity queries against a different
/// population are detected through the `max_delta` bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySpace {
    dim_ranges: [f64; 6],
    max_delta: f64,
}

impl SimilaritySpace {
    /// Scans the population (needs at least two agents). O(n^2) over pairs
    /// for the global maximum distance.
    pub fn build(pop: &Population) -> Result<SimilaritySpace> {
        if pop.len() < 2 {
            return Err(Error::Invalid(
                "similarity space needs at least two agents".into(),
            ));
        }
        let positions: Vec<[f64; 6]> = pop.agents.iter().map(|a| a.demographics.position()).collect();
        let mut dim_ranges = [0.0f64; 6];
        for m in 0..6 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &positions {
                lo = lo.min(p[m]);
                hi = hi.max(p[m]);
            }
            dim_ranges[m] = hi - lo;
        }
        let mut space = SimilaritySpace {
            dim_ranges,
            max_delta: 0.0,
        };
        let mut max_delta = 0.0f64;
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                max_delta = max_delta.max(space.distance(&positions[i], &positions[j]));
            }
        }
        space.max_delta = max_delta;
        Ok(space)
    }

    pub fn max_delta(&self) -> f64 {
        self.max_delta
    }

    pub fn dim_ranges(&self) -> &[f64; 6] {
        &self.dim_ranges
    }

    fn distance(&self, a: &[f64; 6], b: &[f64; 6]) -> f64 {
        let mut sum = 0.0;
        for m in 0..6 {
            if self.dim_ranges[m] > 0.0 {
                let d = (a[m] - b[m]) / self.dim_ranges[m];
                sum += d * d;
            }
        }
        sum.sqrt()
    }
}

/// Normalized demographic distance of two agents under `space`. Zero for
/// identical profiles, at most sqrt(6) when both ends span every dimension.
pub fn similarity(a: &Demographics, b: &Demographics, space: &SimilaritySpace) -> f64 {
    space.distance(&a.position(), &b.position())
}

/// Converts a distance to a tie probability: 1 at distance zero, 0 at the
/// population maximum. A population with no demographic spread at all has
/// `max_delta == 0`; every pair is then maximally similar.
pub fn tie_weight(delta: f64, space: &SimilaritySpace) -> Result<f64> {
    if space.max_delta == 0.0 {
        return Ok(1.0);
    }
    if delta > space.max_delta {
        return Err(Error::SpaceMismatch {
            delta,
            max_delta: space.max_delta,
        });
    }
    Ok(1.0 - delta / space.max_delta)
}

/// Undirected social graph with sorted adjacency lists. Immutable after
/// build; the engine only reads it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl SocialGraph {
    pub fn agent_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as (i, j) with i < j, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor ids; empty slice for isolated agents.
    pub fn neighbors(&self, id: usize) -> Result<&[usize]> {
        self.adjacency
            .get(id)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownAgent(id))
    }

    pub fn degree(&self, id: usize) -> Result<usize> {
        Ok(self.neighbors(id)?.len())
    }

    /// Plain "i j" lines, one edge each, ascending.
    pub fn write_edge_list(&self, mut w: impl std::io::Write) -> Result<()> {
        for &(i, j) in &self.edges {
            writeln!(w, "{} {}", i, j)?;
        }
        Ok(())
    }
}

/// Builds the homophily graph. Candidate pairs are visited in ascending
/// (i, j) order and consume exactly one uniform draw each, so the edge set
/// is a pure function of (population, config, seed).
pub fn build_graph(pop: &Population, cfg: &GraphConfig, seed: u64) -> Result<SocialGraph> {
    if !(cfg.radius_scale.is_finite() && cfg.radius_scale >= 0.0) {
        return Err(Error::Invalid(format!(
            "radius scale {} must be non-negative",
            cfg.radius_scale
        )));
    }
    let space = SimilaritySpace::build(pop)?;
    let n = pop.len();

    // Pass 1: candidacy and distances, fixed order.
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&pop.agents[i], &pop.agents[j]);
            let dist = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            let reach = match cfg.reach_rule {
                ReachRule::MaxRadius => a.radius.max(b.radius),
                ReachRule::MinRadius => a.radius.min(b.radius),
            } * cfg.radius_scale;
            if dist <= reach {
                candidates.push((i, j, similarity(&a.demographics, &b.demographics, &space)));
            }
        }
    }

    let norm = match cfg.norm_scope {
        NormScope::AllPairs => space.max_delta,
        NormScope::CandidatePairs => candidates
            .iter()
            .map(|&(_, _, d)| d)
            .fold(0.0, f64::max),
    };

    // Pass 2: one draw per candidate pair, same order.
    let mut rng = seeds::stream(seed, seeds::GRAPH, 0);
    let mut adjacency = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for (i, j, delta) in candidates {
        let weight = if norm == 0.0 { 1.0 } else { 1.0 - delta / norm };
        let r: f64 = rng.gen();
        if r < weight {
            adjacency[i].push(j);
            adjacency[j].push(i);
            edges.push((i, j));
        }
    }
    // Neighbors of i<j arrive in ascending j already; pushes at j keep
    // ascending i. Sorted lists hold by construction, asserted in tests.
    Ok(SocialGraph { adjacency, edges })
}
