//! Bottom-up proposal generation: farthest point sampling and vote
//! clustering over seed points carried with per-point feature rows.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum ProposalError {
    #[error("K = {k} out of range for {n} points")]
    BadK { k: usize, n: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("first index {index} out of range for {n} points")]
    InvalidFirst { index: usize, n: usize },
}

/// How the first FPS sample is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstPoint {
    Index(usize),
    Seeded(u64),
}

/// Down-sampled points with context features, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub positions: Vec<Vec3>,
    pub features: Array2<f64>,
}

impl SeedSet {
    pub fn new(positions: Vec<Vec3>, features: Array2<f64>) -> Result<Self, ProposalError> {
        if positions.len() != features.nrows() || features.ncols() == 0 {
            return Err(ProposalError::ShapeMismatch {
                expected: format!("{} x (>=1)", positions.len()),
                got: format!("{} x {}", features.nrows(), features.ncols()),
            });
        }
        Ok(SeedSet { positions, features })
    }
}

/// Seeds shifted by per-point offsets of position and feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteSet {
    pub positions: Vec<Vec3>,
    pub features: Array2<f64>,
}

/// Whether a proposal set describes objects or layout quads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Object,
    Quad,
}

/// K proposals: a position plus a feature row each.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub positions: Vec<Vec3>,
    pub features: Array2<f64>,
    pub kind: ProposalKind,
}

fn resolve_first(first: FirstPoint, n: usize) -> Result<usize, ProposalError> {
    match first {
        FirstPoint::Index(i) => {
            if i >= n {
                Err(ProposalError::InvalidFirst { index: i, n })
            } else {
                Ok(i)
            }
        }
        FirstPoint::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(rng.random_range(0..n))
        }
    }
}

/// Greedy max-min sampling: each selected index maximizes the minimum
/// distance to the already-selected set, ties broken by lowest index.
/// Squared distances are cached; they order identically to the metric.
pub fn fps(points: &[Vec3], k: usize, first: FirstPoint) -> Result<Vec<usize>, ProposalError> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(ProposalError::BadK { k, n });
    }
    let start = resolve_first(first, n)?;
    let mut selected = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut cur = start;
    selected.push(cur);
    min_d2[cur] = f64::NEG_INFINITY;
    for _ in 1..k {
        let p = points[cur];
        let mut best = 0;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, q) in points.iter().enumerate() {
            let d2 = p.distance_sq(*q);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if min_d2[i] > best_d2 {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        cur = best;
        selected.push(cur);
        min_d2[cur] = f64::NEG_INFINITY;
    }
    Ok(selected)
}

/// Shift seed positions by the first three offset columns and seed features
/// by the rest.
pub fn apply_votes(seeds: &SeedSet, offsets: &Array2<f64>) -> Result<VoteSet, ProposalError> {
    let m = seeds.positions.len();
    let c = seeds.features.ncols();
    if offsets.nrows() != m || offsets.ncols() != 3 + c {
        return Err(ProposalError::ShapeMismatch {
            expected: format!("{} x {}", m, 3 + c),
            got: format!("{} x {}", offsets.nrows(), offsets.ncols()),
        });
    }
    let positions = seeds
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| *p + Vec3::new(offsets[[i, 0]], offsets[[i, 1]], offsets[[i, 2]]))
        .collect();
    let mut features = seeds.features.clone();
    for i in 0..m {
        for j in 0..c {
            features[[i, j]] += offsets[[i, 3 + j]];
        }
    }
    Ok(VoteSet { positions, features })
}

/// FPS over vote positions picks cluster centers; every vote within
/// `radius` of a center joins that cluster (a center always contains at
/// least itself). Proposals carry the mean position and mean feature of
/// their members.
pub fn cluster_votes(
    votes: &VoteSet,
    k1: usize,
    radius: f64,
    first: FirstPoint,
) -> Result<ProposalSet, ProposalError> {
    let centers = fps(&votes.positions, k1, first)?;
    let c = votes.features.ncols();
    let mut positions = Vec::with_capacity(k1);
    let mut features = Array2::zeros((k1, c));
    let r2 = radius * radius;
    for (row, &ci) in centers.iter().enumerate() {
        let center = votes.positions[ci];
        let mut sum_pos = Vec3::ZERO;
        let mut sum_feat = Array1::<f64>::zeros(c);
        let mut count = 0.0;
        for (i, p) in votes.positions.iter().enumerate() {
            if center.distance_sq(*p) <= r2 {
                sum_pos = sum_pos + *p;
                sum_feat += &votes.features.row(i);
                count += 1.0;
            }
        }
        positions.push(sum_pos / count);
        features.row_mut(row).assign(&(sum_feat / count));
    }
    Ok(ProposalSet { positions, features, kind: ProposalKind::Object })
}

/// Quad proposals are the FPS-selected seeds themselves.
pub fn quad_proposals(
    seeds: &SeedSet,
    k2: usize,
    first: FirstPoint,
) -> Result<ProposalSet, ProposalError> {
    let picked = fps(&seeds.positions, k2, first)?;
    let positions = picked.iter().map(|&i| seeds.positions[i]).collect();
    let features = seeds.features.select(Axis(0), &picked);
    Ok(ProposalSet { positions, features, kind: ProposalKind::Quad })
}
