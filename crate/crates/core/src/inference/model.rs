use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureLayout, Standardizer};
use crate::graph::{CliqueGraph, Partition};
use crate::matrix::{dot, sigmoid};
use crate::par::Parallelism;
use crate::{seed, tsv, Error, Result};

use super::em::compute_eta;
use super::gibbs::{sample, LabelState};
use super::{compute_trust_labeled, compute_trust_soft, full_probs, MarginalEstimates, TrainConfig, TrustMode, TrustScores};

/// Learned clique weights over the standardized feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trust_mode: TrustMode,
}

impl PotentialModel {
    pub fn zeros(standardizer: Standardizer, trust_mode: TrustMode) -> Self {
        let d = standardizer.dim();
        Self {
            standardizer,
            weights: vec![0.0; d],
            bias: 0.0,
            trust_mode,
        }
    }

    /// `w·std(x) + b` for a raw clique vector.
    pub fn eta(&self, raw: &[f64]) -> f64 {
        let mut x = raw.to_vec();
        self.standardizer.transform_row(&mut x);
        dot(&self.weights, &x) + self.bias
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.weights.len() || cols != self.standardizer.dim() {
            return Err(Error::Invalid(format!(
                "model has {} weights but features have {cols} columns",
                self.weights.len()
            )));
        }
        Ok(())
    }
}

/// Marginals for the unknown statements of a graph under a fixed model, and
/// the resulting expected-tally trust scores. With trust on, trust and the
/// Gibbs E-step alternate as in training (weights held fixed) until no
/// trust score moves by more than `config.tol` or `config.max_iter` rounds
/// have run.
pub fn predict(
    graph: &CliqueGraph,
    partition: &Partition,
    model: &PotentialModel,
    config: &TrainConfig,
    par: Parallelism,
) -> Result<(MarginalEstimates, TrustScores)> {
    model.check_dim(graph.features().cols())?;
    let x = model.standardizer.transform(graph.features());
    let eta = compute_eta(&x, &model.weights, model.bias, par);
    let mut state = LabelState::init(partition, &mut seed::rng(config.seed, "label-init", 0));
    let mut probs: Vec<f64> = state.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let rounds = if model.trust_mode.is_on() { config.max_iter.max(1) } else { 1 };
    for round in 0..rounds {
        let t = model.trust_mode.is_on().then(|| {
            if round == 0 {
                compute_trust_labeled(graph, partition)
            } else {
                compute_trust_soft(graph, &probs)
            }
        });
        let mut rng = seed::rng(config.seed, "predict", round as u64);
        let unknown = sample(graph, partition, &eta, t.as_ref(), config.burn_in, config.sweeps, &mut state, &mut rng);
        probs = full_probs(partition, &unknown);
        if let Some(t) = t {
            let next = compute_trust_soft(graph, &probs);
            let moved = t.scores.iter().zip(&next.scores).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved < config.tol {
                break;
            }
        }
    }
    Ok((
        MarginalEstimates::from_probs(graph, partition, &probs, config.burn_in, config.sweeps),
        compute_trust_soft(graph, &probs),
    ))
}

fn ranked(mut items: Vec<(String, f64)>) -> Vec<(String, f64)> {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items
}

/// Descending by marginal, ties by id, optionally restricted to a set.
pub fn rank_statements(marginals: &MarginalEstimates, restrict: Option<&BTreeSet<String>>) -> Vec<(String, f64)> {
    ranked(
        marginals
            .marginals
            .iter()
            .filter(|(id, _)| restrict.is_none_or(|r| r.contains(*id)))
            .map(|(id, p)| (id.clone(), *p))
            .collect(),
    )
}

/// Descending by trust, ties by id, excluded ids removed.
pub fn rank_users(trust: &BTreeMap<String, f64>, exclude: &BTreeSet<String>) -> Vec<(String, f64)> {
    ranked(
        trust
            .iter()
            .filter(|(id, _)| !exclude.contains(*id))
            .map(|(id, t)| (id.clone(), *t))
            .collect(),
    )
}

/// `σ(w·x + b)` where `x` is the standardized post-language block of a raw
/// clique-layout vector with the user block set to zero after
/// standardization.
pub fn post_objectivity(model: &PotentialModel, layout: &FeatureLayout, raw: &[f64]) -> f64 {
    let mut x = raw.to_vec();
    model.standardizer.transform_row(&mut x);
    for v in &mut x[layout.user_block()] {
        *v = 0.0;
    }
    sigmoid(dot(&model.weights, &x) + model.bias)
}

/// On-disk model: one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_kind: String,
    pub version: String,
    pub layout: FeatureLayout,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default)]
    pub trust_mode: Option<TrustMode>,
    #[serde(default)]
    pub trust: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl ModelFile {
    pub fn crf(layout: FeatureLayout, model: &PotentialModel, trust: BTreeMap<String, f64>, config: &TrainConfig) -> Result<Self> {
        Ok(Self {
            model_kind: "crf".into(),
            version: crate::VERSION.into(),
            layout,
            standardizer: model.standardizer.clone(),
            weights: model.weights.clone(),
            bias: model.bias,
            trust_mode: Some(model.trust_mode),
            trust,
            config: serde_json::to_value(config)?,
            seed: config.seed,
        })
    }

    pub fn potential_model(&self) -> Result<PotentialModel> {
        let Some(trust_mode) = self.trust_mode else {
            return Err(Error::Invalid(format!("model kind {:?} is not a CRF model", self.model_kind)));
        };
        Ok(PotentialModel {
            standardizer: self.standardizer.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            trust_mode,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(serde_json::from_value(self.config.clone())?)
    }

    pub fn render(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        tsv::write_file(path, &self.render()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marg(items: &[(&str, f64)]) -> MarginalEstimates {
        MarginalEstimates {
            marginals: items.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            burn_in: 0,
            sweeps: 0,
        }
    }

    #[test]
    fn statement_ranking() {
        let m = marg(&[("A", 0.9), ("B", 0.2), ("C", 0.9)]);
        let ids: Vec<String> = rank_statements(&m, None).into_iter().map(|x| x.0).collect();
        assert_eq!(ids, ["A", "C", "B"]);
        let only_b: BTreeSet<String> = ["B".to_string()].into();
        assert_eq!(rank_statements(&m, Some(&only_b)), vec![("B".to_string(), 0.2)]);
        assert!(rank_statements(&m, Some(&BTreeSet::new())).is_empty());
    }

    #[test]
    fn user_ranking() {
        let t: BTreeMap<String, f64> = [("u1".to_string(), 0.9), ("u2".to_string(), 0.7)].into();
        let ids = |v: Vec<(String, f64)>| v.into_iter().map(|x| x.0).collect::<Vec<_>>();
        assert_eq!(ids(rank_users(&t, &BTreeSet::new())), ["u1", "u2"]);
        assert_eq!(ids(rank_users(&t, &["u1".to_string()].into())), ["u2"]);
        let tie: BTreeMap<String, f64> = [("b".to_string(), 0.5), ("a".to_string(), 0.5)].into();
        assert_eq!(ids(rank_users(&tie, &BTreeSet::new())), ["a", "b"]);
    }

    #[test]
    fn objectivity_scores() {
        let layout = FeatureLayout {
            stylistic: vec!["a".into()],
            affective: vec!["b".into()],
            user: vec!["c".into()],
        };
        let st = Standardizer {
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
        };
        let zero = PotentialModel::zeros(st.clone(), TrustMode::None);
        assert_eq!(post_objectivity(&zero, &layout, &[0.3, 0.1, 9.0]), 0.5);
        let m = PotentialModel {
            weights: vec![1.0, 0.0, 5.0],
            ..zero
        };
        let lo = post_objectivity(&m, &layout, &[0.1, 0.0, 9.0]);
        let hi = post_objectivity(&m, &layout, &[0.2, 0.0, -9.0]);
        assert!(hi > lo);
        assert_eq!(lo, sigmoid(0.1));
    }
}
