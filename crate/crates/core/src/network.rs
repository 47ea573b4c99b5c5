//! Temporal emotion networks `C (I + ΔA) C⁺` and out-expected-influence
//! centrality.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{ClusterParameters, Emotion, EMOTION_DIM};

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RELATIVE_TOL: f64 = 1e-12;

/// Days per network step (one week).
pub const DAYS_PER_WEEK: f64 = 7.0;

/// Moore–Penrose pseudoinverse via SVD.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return DMatrix::zeros(c, r);
    }
    let cutoff = PINV_RELATIVE_TOL * smax;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let inv = svd
        .singular_values
        .map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
    v_t.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// `C (I + δA) C⁺`, with `δ` in the model's time unit.
pub fn transition_matrix(params: &ClusterParameters, delta: f64) -> DMatrix<f64> {
    let c = &params.emission;
    let step = crate::lgssm::step_transition(&params.generator, delta);
    c * step * pseudoinverse(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalNetwork {
    pub nodes: Vec<Emotion>,
    /// `weights[(r, c)]` is the influence of emotion `c` at one step on
    /// emotion `r` at the next.
    pub weights: DMatrix<f64>,
    pub delta_weeks: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: Emotion,
    pub to: Emotion,
    pub weight: f64,
}

pub fn build_network(weights: DMatrix<f64>, delta_weeks: f64) -> Result<TemporalNetwork> {
    if weights.shape() != (EMOTION_DIM, EMOTION_DIM) {
        return Err(Error::DimensionMismatch {
            context: "network weights".into(),
            expected: EMOTION_DIM,
            found: weights.nrows().max(weights.ncols()),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("network weights"));
    }
    Ok(TemporalNetwork {
        nodes: Emotion::ALL.to_vec(),
        weights,
        delta_weeks,
    })
}

/// Network for a fitted cluster with days as the model time unit.
pub fn cluster_network(params: &ClusterParameters, delta_weeks: f64) -> Result<TemporalNetwork> {
    build_network(
        transition_matrix(params, delta_weeks * DAYS_PER_WEEK),
        delta_weeks,
    )
}

impl TemporalNetwork {
    /// All edges, self-loops included, optionally dropping `|w| < threshold`.
    /// Zero weights are never listed.
    pub fn edges(&self, threshold: Option<f64>) -> Vec<Edge> {
        let mut out = Vec::new();
        for c in 0..EMOTION_DIM {
            for r in 0..EMOTION_DIM {
                let w = self.weights[(r, c)];
                if w == 0.0 || threshold.is_some_and(|t| w.abs() < t) {
                    continue;
                }
                out.push(Edge {
                    from: self.nodes[c],
                    to: self.nodes[r],
                    weight: w,
                });
            }
        }
        out
    }
}

/// Signed sum of each node's outgoing cross-edges.
pub fn out_expected_influence(net: &TemporalNetwork) -> Vec<f64> {
    out_expected_influence_matrix(&net.weights)
}

pub fn out_expected_influence_matrix(w: &DMatrix<f64>) -> Vec<f64> {
    (0..w.ncols())
        .map(|c| (0..w.nrows()).filter(|&r| r != c).map(|r| w[(r, c)]).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Node indices, most central first.
    pub order: Vec<usize>,
    /// 1-based rank of each node.
    pub ranks: Vec<usize>,
}

/// Descending ranking; ties keep the lower index first.
pub fn rank_scores(scores: &[f64]) -> Ranking {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ranking { order, ranks }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityComparison {
    pub rankings: Vec<Ranking>,
    /// `rank_deltas[l][i]` = rank of node `i` in cluster `l` minus its rank
    /// in cluster 0.
    pub rank_deltas: Vec<Vec<i64>>,
}

pub fn centrality_ranking(scores: &[Vec<f64>]) -> CentralityComparison {
    let rankings: Vec<Ranking> = scores.iter().map(|s| rank_scores(s)).collect();
    let rank_deltas = rankings
        .iter()
        .map(|r| {
            r.ranks
                .iter()
                .zip(&rankings[0].ranks)
                .map(|(&a, &b)| a as i64 - b as i64)
                .collect()
        })
        .collect();
    CentralityComparison {
        rankings,
        rank_deltas,
    }
}

pub fn write_edges_csv<W: Write>(
    out: W,
    networks: &[TemporalNetwork],
    threshold: Option<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "from_emotion", "to_emotion", "weight"])?;
    for (l, net) in networks.iter().enumerate() {
        for e in net.edges(threshold) {
            w.write_record([
                l.to_string(),
                e.from.name().to_string(),
                e.to.name().to_string(),
                e.weight.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("edge list", e))?;
    Ok(())
}

pub fn write_centrality_csv<W: Write>(out: W, networks: &[TemporalNetwork]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "emotion", "out_expected_influence", "rank"])?;
    for (l, net) in networks.iter().enumerate() {
        let scores = out_expected_influence(net);
        let ranking = rank_scores(&scores);
        for &i in &ranking.order {
            w.write_record([
                l.to_string(),
                net.nodes[i].name().to_string(),
                scores[i].to_string(),
                ranking.ranks[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("centrality table", e))?;
    Ok(())
}
