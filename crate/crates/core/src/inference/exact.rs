use crate::graph::{CliqueGraph, Partition};
use crate::{Error, Result};

use super::{clique_log_odds, full_probs, log_sigmoid, MarginalEstimates, TrustScores};

/// Largest number of unknown statements [`exact_marginals`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub marginals: MarginalEstimates,
    /// Aligned with `partition.unknown`.
    pub probs: Vec<f64>,
    /// `ln Σ_{S^U} Π_c ψ_c`, each clique potential normalized over its two
    /// labels, clamped statements fixed at their expert labels.
    pub log_likelihood: f64,
}

/// Enumerates every labeling of the unknown statements. Trust, when given,
/// is held fixed.
pub fn exact_marginals(graph: &CliqueGraph, partition: &Partition, eta: &[f64], trust: Option<&TrustScores>) -> Result<ExactResult> {
    let u = partition.unknown.len();
    if u > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBound {
            unknowns: u,
            limit: ENUMERATION_LIMIT,
        });
    }
    // Per-statement log-potential sums for label 1 and label 0.
    let sums: Vec<(f64, f64)> = (0..graph.statements().len())
        .map(|s| {
            graph.statement_cliques(s).iter().fold((0.0, 0.0), |(l1, l0), &c| {
                let a = clique_log_odds(eta[c], trust.map(|t| t.scores[graph.cliques()[c].user]));
                (l1 + log_sigmoid(a), l0 + log_sigmoid(-a))
            })
        })
        .collect();
    let clamped: f64 = partition
        .labeled
        .iter()
        .map(|&s| if partition.clamped[s] == Some(true) { sums[s].0 } else { sums[s].1 })
        .sum();

    let terms: Vec<(f64, f64)> = partition.unknown.iter().map(|&s| sums[s]).collect();
    let peak: f64 = terms.iter().map(|(a, b)| a.max(*b)).sum();
    let mut z = 0.0;
    let mut num = vec![0.0; u];
    for mask in 0u64..(1u64 << u) {
        let lw: f64 = terms
            .iter()
            .enumerate()
            .map(|(k, (l1, l0))| if mask >> k & 1 == 1 { *l1 } else { *l0 })
            .sum();
        let w = (lw - peak).exp();
        z += w;
        for (k, n) in num.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                *n += w;
            }
        }
    }
    let probs: Vec<f64> = num.iter().map(|n| n / z).collect();
    let all = full_probs(partition, &probs);
    Ok(ExactResult {
        marginals: MarginalEstimates::from_probs(graph, partition, &all, 0, 0),
        probs,
        log_likelihood: clamped + peak + z.ln(),
    })
}
