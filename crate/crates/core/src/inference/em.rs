use serde::Serialize;

use crate::features::Standardizer;
use crate::graph::{CliqueGraph, Partition};
use crate::matrix::{dot, FeatureMatrix};
use crate::optim::{tron, Bias, Logistic, Problem, SolverConfig};
use crate::par::{self, Parallelism};
use crate::{seed, Result};

use super::exact::exact_marginals;
use super::gibbs::{sample, LabelState};
use super::model::PotentialModel;
use super::{compute_trust_labeled, compute_trust_soft, full_probs, EStepKind, MarginalEstimates, TrainConfig, TrustScores};

/// One EM iteration. The likelihood fields are filled in exact mode and
/// refer to the weights the iteration started from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmRecord {
    pub iteration: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub max_weight_change: f64,
    pub log_likelihood: Option<f64>,
    pub penalized_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: PotentialModel,
    pub trust: TrustScores,
    pub marginals: MarginalEstimates,
    pub history: Vec<EmRecord>,
    pub converged: bool,
    /// Exact mode only: likelihood at the returned weights.
    pub final_log_likelihood: Option<f64>,
    pub final_penalized_log_likelihood: Option<f64>,
}

pub(crate) fn compute_eta(x: &FeatureMatrix, weights: &[f64], bias: f64, par: Parallelism) -> Vec<f64> {
    par::map_range(par, x.rows(), |i| dot(weights, x.row(i)) + bias)
}

fn bias_mode(config: &TrainConfig, partition: &Partition) -> Bias {
    if !config.with_bias {
        Bias::Absent
    } else if partition.has_both_classes() {
        Bias::Free
    } else {
        log::warn!("labeled statements do not cover both classes; penalizing the bias with lambda");
        Bias::Penalized(config.lambda)
    }
}

fn penalty(config: &TrainConfig, bias: Bias, weights: &[f64], b: f64) -> f64 {
    let s = match bias {
        Bias::Penalized(s) => s,
        _ => 0.0,
    };
    0.5 * config.lambda * dot(weights, weights) + 0.5 * s * b * b
}

/// Fractionally weighted L2-regularized logistic fit over cliques. Each
/// clique targets its statement's probability of credibility (`probs`,
/// indexed by statement); in trust mode the author's `logit t_k` enters as a
/// fixed offset. Warm-starts from `init`.
pub fn m_step(
    graph: &CliqueGraph,
    x: &FeatureMatrix,
    probs: &[f64],
    trust: Option<&TrustScores>,
    lambda: f64,
    bias: Bias,
    init: (&[f64], f64),
    solver: &SolverConfig,
    par: Parallelism,
) -> Result<(Vec<f64>, f64)> {
    let q: Vec<f64> = graph.cliques().iter().map(|c| probs[c.statement]).collect();
    let offset: Option<Vec<f64>> = trust.map(|t| graph.cliques().iter().map(|c| t.logit(c.user)).collect());
    let mut problem = Problem::new(x, &q, Logistic, lambda, bias);
    problem.offset = offset.as_deref();
    problem.par = par;
    let mut theta = init.0.to_vec();
    if !matches!(bias, Bias::Absent) {
        theta.push(init.1);
    }
    let sol = tron(&problem, &theta, solver)?;
    let d = x.cols();
    let b = if matches!(bias, Bias::Absent) { 0.0 } else { sol.theta[d] };
    Ok((sol.theta[..d].to_vec(), b))
}

/// Semi-supervised EM: weights start at zero and unknown labels at fair
/// coins; each iteration estimates trust from the previous iteration's
/// marginals (expected tallies; the expert labels alone before the first
/// iteration), runs the E-step (Gibbs or exact
/// enumeration) under that trust, then the M-step, until no weight moves by more than
/// `config.tol` or `config.max_iter` iterations have run.
pub fn fit(graph: &CliqueGraph, partition: &Partition, config: &TrainConfig, par: Parallelism) -> Result<FitResult> {
    config.validate()?;
    let standardizer = Standardizer::fit(graph.features())?;
    let x = standardizer.transform(graph.features());
    let d = x.cols();
    let bias = bias_mode(config, partition);
    let solver = SolverConfig {
        tol: config.newton_tol,
        max_iter: config.newton_max_iter,
        ..SolverConfig::default()
    };
    let trust_on = config.trust.is_on();

    let mut weights = vec![0.0; d];
    let mut b = 0.0;
    let mut state = LabelState::init(partition, &mut seed::rng(config.seed, "label-init", 0));
    let mut probs: Vec<f64> = state.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut history = Vec::new();
    let mut converged = false;

    for iteration in 0..config.max_iter {
        let eta = compute_eta(&x, &weights, b, par);
        let t = trust_on.then(|| {
            if iteration == 0 {
                compute_trust_labeled(graph, partition)
            } else {
                compute_trust_soft(graph, &probs)
            }
        });
        let (unknown, ll) = match config.e_step {
            EStepKind::Gibbs => {
                let mut rng = seed::rng(config.seed, "gibbs", iteration as u64);
                let u = sample(graph, partition, &eta, t.as_ref(), config.burn_in, config.sweeps, &mut state, &mut rng);
                (u, None)
            }
            EStepKind::Exact => {
                let r = exact_marginals(graph, partition, &eta, t.as_ref())?;
                (r.probs, Some(r.log_likelihood))
            }
        };
        probs = full_probs(partition, &unknown);
        let (w_new, b_new) = m_step(graph, &x, &probs, None, config.lambda, bias, (&weights, b), &solver, par)?;
        let change = w_new
            .iter()
            .zip(&weights)
            .map(|(a, c)| (a - c).abs())
            .chain(std::iter::once((b_new - b).abs()))
            .fold(0.0, f64::max);
        history.push(EmRecord {
            iteration,
            weights: weights.clone(),
            bias: b,
            max_weight_change: change,
            log_likelihood: ll,
            penalized_log_likelihood: ll.map(|l| l - penalty(config, bias, &weights, b)),
        });
        log::debug!("em iteration {iteration}: max weight change {change:.3e}");
        weights = w_new;
        b = b_new;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EM stopped at the iteration cap ({}) before reaching tolerance", config.max_iter);
    }

    let (final_ll, final_pen) = if config.e_step == EStepKind::Exact {
        let t = trust_on.then(|| compute_trust_soft(graph, &probs));
        let r = exact_marginals(graph, partition, &compute_eta(&x, &weights, b, par), t.as_ref())?;
        (Some(r.log_likelihood), Some(r.log_likelihood - penalty(config, bias, &weights, b)))
    } else {
        (None, None)
    };

    Ok(FitResult {
        model: PotentialModel {
            standardizer,
            weights,
            bias: b,
            trust_mode: config.trust,
        },
        trust: compute_trust_soft(graph, &probs),
        marginals: MarginalEstimates::from_probs(graph, partition, &probs, config.burn_in, config.sweeps),
        history,
        converged,
        final_log_likelihood: final_ll,
        final_penalized_log_likelihood: final_pen,
    })
}
