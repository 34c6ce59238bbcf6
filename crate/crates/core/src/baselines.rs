//! Comparison systems: frequency ranking, a linear classifier over
//! per-statement mean-pooled vectors, and a distant-supervision linear
//! classifier over clique vectors with majority voting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureLayout, Standardizer};
use crate::graph::{CliqueGraph, Partition};
use crate::inference::ModelFile;
use crate::matrix::{dot, FeatureMatrix};
use crate::optim::{l1_coordinate_descent, tron, Bias, Logistic, LossKind, Penalty, Problem, SolverConfig, SquaredHinge};
use crate::par::Parallelism;
use crate::{Error, Result};

/// Statements by clique count, descending, ties by id.
pub fn frequency_rank(graph: &CliqueGraph) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = graph
        .statements()
        .iter()
        .enumerate()
        .map(|(s, id)| (id.clone(), graph.statement_cliques(s).len()))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Median clique count over all statements of the graph.
pub fn median_count(graph: &CliqueGraph) -> f64 {
    let mut c: Vec<usize> = (0..graph.statements().len()).map(|s| graph.statement_cliques(s).len()).collect();
    if c.is_empty() {
        return 0.0;
    }
    c.sort_unstable();
    let n = c.len();
    if n % 2 == 1 {
        c[n / 2] as f64
    } else {
        (c[n / 2 - 1] + c[n / 2]) as f64 / 2.0
    }
}

/// Credible when the statement's count is strictly above the median.
pub fn frequency_predict(graph: &CliqueGraph) -> BTreeMap<String, bool> {
    let m = median_count(graph);
    frequency_rank(graph).into_iter().map(|(id, n)| (id, n as f64 > m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Aggregate,
    Distant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub loss: LossKind,
    pub penalty: Penalty,
    pub lambda: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Pass budget of the L1 coordinate-descent solver.
    pub cd_max_passes: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::SquaredHinge,
            penalty: Penalty::L2,
            lambda: 1.0,
            newton_tol: 1e-6,
            newton_max_iter: 1000,
            cd_max_passes: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LinearConfig,
    /// Number of training examples used.
    pub examples: usize,
}

/// Mean of each statement's raw clique vectors, one row per statement index.
pub fn aggregate_vectors(graph: &CliqueGraph) -> FeatureMatrix {
    let f = graph.features();
    let mut m = FeatureMatrix::zeros(graph.statements().len(), f.cols());
    for s in 0..graph.statements().len() {
        let cl = graph.statement_cliques(s);
        let row = m.row_mut(s);
        for &c in cl {
            row.iter_mut().zip(f.row(c)).for_each(|(a, x)| *a += x);
        }
        row.iter_mut().for_each(|a| *a /= cl.len() as f64);
    }
    m
}

fn train(x: &FeatureMatrix, labels: &[bool], kind: LinearKind, config: &LinearConfig, par: Parallelism) -> Result<LinearModel> {
    let pos = labels.iter().filter(|&&y| y).count();
    if labels.len() < 2 || pos == 0 || pos == labels.len() {
        return Err(Error::Invalid(format!(
            "linear baseline needs both classes among >= 2 labeled examples ({pos} positive of {})",
            labels.len()
        )));
    }
    if !(config.lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda must be > 0, got {}", config.lambda)));
    }
    let standardizer = Standardizer::fit(x)?;
    let xs = standardizer.transform(x);
    let d = xs.cols();
    let solver = SolverConfig {
        tol: config.newton_tol,
        max_iter: config.newton_max_iter,
        ..SolverConfig::default()
    };
    let init = vec![0.0; d + 1];
    let sol = match config.loss {
        LossKind::SquaredHinge => {
            let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
            solve(Problem::new(&xs, &y, SquaredHinge, 0.0, Bias::Free), config, &init, &solver, par)?
        }
        LossKind::Logistic => {
            let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
            solve(Problem::new(&xs, &y, Logistic, 0.0, Bias::Free), config, &init, &solver, par)?
        }
    };
    Ok(LinearModel {
        kind,
        standardizer,
        weights: sol[..d].to_vec(),
        bias: sol[d],
        config: config.clone(),
        examples: labels.len(),
    })
}

fn solve<L: crate::optim::Loss>(
    mut p: Problem<'_, L>,
    config: &LinearConfig,
    init: &[f64],
    solver: &SolverConfig,
    par: Parallelism,
) -> Result<Vec<f64>> {
    p.par = par;
    Ok(match config.penalty {
        Penalty::L2 => {
            p.l2 = config.lambda;
            tron(&p, init, solver)?.theta
        }
        Penalty::L1 => {
            let cd = SolverConfig {
                max_iter: config.cd_max_passes,
                ..*solver
            };
            l1_coordinate_descent(&p, config.lambda, init, &cd)?.theta
        }
    })
}

/// One mean-pooled example per labeled statement.
pub fn train_linear_aggregate(graph: &CliqueGraph, partition: &Partition, config: &LinearConfig, par: Parallelism) -> Result<LinearModel> {
    let agg = aggregate_vectors(graph);
    let x = agg.select(&partition.labeled);
    let y: Vec<bool> = partition.labeled.iter().map(|&s| partition.clamped[s] == Some(true)).collect();
    train(&x, &y, LinearKind::Aggregate, config, par)
}

/// One example per clique of a labeled statement, carrying that statement's
/// label.
pub fn train_linear_distant(graph: &CliqueGraph, partition: &Partition, config: &LinearConfig, par: Parallelism) -> Result<LinearModel> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &s in &partition.labeled {
        for &c in graph.statement_cliques(s) {
            rows.push(c);
            y.push(partition.clamped[s] == Some(true));
        }
    }
    let x = graph.features().select(&rows);
    train(&x, &y, LinearKind::Distant, config, par)
}

/// Strict majority of votes; ties are negative.
pub fn majority_vote(votes: &[bool]) -> bool {
    let pos = votes.iter().filter(|&&v| v).count();
    2 * pos > votes.len()
}

impl LinearModel {
    pub fn score_raw(&self, raw: &[f64]) -> f64 {
        let mut x = raw.to_vec();
        self.standardizer.transform_row(&mut x);
        dot(&self.weights, &x) + self.bias
    }

    /// Score and predicted label of one statement. Aggregate models score the
    /// mean-pooled vector; distant models report the fraction of positive
    /// clique votes and the majority label.
    pub fn predict_statement(&self, graph: &CliqueGraph, statement: usize) -> (f64, bool) {
        let cl = graph.statement_cliques(statement);
        match self.kind {
            LinearKind::Aggregate => {
                let mut mean = vec![0.0; graph.features().cols()];
                for &c in cl {
                    mean.iter_mut().zip(graph.features().row(c)).for_each(|(a, x)| *a += x);
                }
                mean.iter_mut().for_each(|a| *a /= cl.len() as f64);
                let z = self.score_raw(&mean);
                (z, z > 0.0)
            }
            LinearKind::Distant => {
                let votes: Vec<bool> = cl.iter().map(|&c| self.score_raw(graph.features().row(c)) > 0.0).collect();
                let frac = votes.iter().filter(|&&v| v).count() as f64 / votes.len() as f64;
                (frac, majority_vote(&votes))
            }
        }
    }

    /// Predictions for the given statement indices.
    pub fn predict(&self, graph: &CliqueGraph, statements: &[usize]) -> BTreeMap<String, (f64, bool)> {
        statements
            .iter()
            .map(|&s| (graph.statements()[s].clone(), self.predict_statement(graph, s)))
            .collect()
    }

    pub fn model_kind(&self) -> &'static str {
        match (self.kind, self.config.penalty) {
            (LinearKind::Aggregate, Penalty::L2) => "svm",
            (LinearKind::Aggregate, Penalty::L1) => "svm-l1",
            (LinearKind::Distant, Penalty::L2) => "svm-ds",
            (LinearKind::Distant, Penalty::L1) => "svm-ds-l1",
        }
    }

    pub fn to_file(&self, layout: FeatureLayout, seed: u64) -> Result<ModelFile> {
        Ok(ModelFile {
            model_kind: self.model_kind().into(),
            version: crate::VERSION.into(),
            layout,
            standardizer: self.standardizer.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            trust_mode: None,
            trust: BTreeMap::new(),
            config: serde_json::to_value(&self.config)?,
            seed,
        })
    }
}
