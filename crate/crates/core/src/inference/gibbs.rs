use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{CliqueGraph, Partition};
use crate::matrix::sigmoid;

use super::{MarginalEstimates, TrustScores};

/// Current label of every statement; clamped statements keep their expert
/// label. The chain persists across EM iterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelState {
    pub labels: Vec<bool>,
}

impl LabelState {
    /// Expert labels for clamped statements, fair coins for unknowns.
    pub fn init(partition: &Partition, rng: &mut ChaCha8Rng) -> Self {
        let labels = partition
            .clamped
            .iter()
            .map(|l| match l {
                Some(y) => *y,
                None => rng.random::<bool>(),
            })
            .collect();
        Self { labels }
    }
}

/// `burn_in` sweeps, then `sweeps` collection sweeps over the unknown
/// statements in ascending index order. Returns per-unknown frequencies of
/// label 1, aligned with `partition.unknown`. Trust, when given, is held
/// fixed for the whole chain.
pub(crate) fn sample(
    graph: &CliqueGraph,
    partition: &Partition,
    eta: &[f64],
    trust: Option<&TrustScores>,
    burn_in: usize,
    sweeps: usize,
    state: &mut LabelState,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut counts = vec![0u64; partition.unknown.len()];
    if partition.unknown.is_empty() {
        return Vec::new();
    }
    let offset: Vec<f64> = match trust {
        Some(t) => graph.cliques().iter().map(|c| t.logit(c.user)).collect(),
        None => vec![0.0; graph.num_cliques()],
    };
    for sweep in 0..burn_in + sweeps {
        for (k, &s) in partition.unknown.iter().enumerate() {
            let a: f64 = graph.statement_cliques(s).iter().map(|&c| eta[c] + offset[c]).sum();
            let y = rng.random::<f64>() < sigmoid(a);
            state.labels[s] = y;
            if sweep >= burn_in && y {
                counts[k] += 1;
            }
        }
    }
    counts.into_iter().map(|c| c as f64 / sweeps as f64).collect()
}

/// Gibbs E-step with clamped expert labels.
pub fn e_step(
    graph: &CliqueGraph,
    partition: &Partition,
    eta: &[f64],
    trust: Option<&TrustScores>,
    burn_in: usize,
    sweeps: usize,
    state: &mut LabelState,
    rng: &mut ChaCha8Rng,
) -> MarginalEstimates {
    let unknown = sample(graph, partition, eta, trust, burn_in, sweeps, state, rng);
    let probs = super::full_probs(partition, &unknown);
    MarginalEstimates::from_probs(graph, partition, &probs, burn_in, sweeps)
}
