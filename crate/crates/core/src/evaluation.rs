//! Classification metrics, ranking metrics, and the repeated stratified
//! split protocol comparing the CRF with the baselines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::{frequency_predict, train_linear_aggregate, train_linear_distant, LinearConfig};
use crate::graph::{CliqueGraph, Partition};
use crate::inference::{fit, TrainConfig};
use crate::optim::Penalty;
use crate::par::{self, Parallelism};
use crate::{seed, tsv, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    /// Tally `(truth, predicted)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut cm = Self::default();
        for (t, p) in pairs {
            match (t, p) {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fp += 1,
                (true, false) => cm.fn_ += 1,
            }
        }
        cm
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassificationMetrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Accuracy, sensitivity and specificity; each is absent when its
/// denominator is zero.
pub fn confusion_metrics(cm: &ConfusionMatrix) -> ClassificationMetrics {
    ClassificationMetrics {
        accuracy: ratio(cm.tp + cm.tn, cm.tp + cm.tn + cm.fp + cm.fn_),
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
    }
}

/// Fraction of rare statements predicted credible. Rare statements without
/// a prediction are ignored; absent when none remain.
pub fn rare_recall(predictions: &BTreeMap<String, bool>, rare: &BTreeSet<String>) -> Option<f64> {
    let hits: Vec<bool> = rare.iter().filter_map(|id| predictions.get(id).copied()).collect();
    ratio(hits.iter().filter(|&&p| p).count() as u64, hits.len() as u64)
}

fn dcg(rel: &[f64]) -> f64 {
    rel.iter()
        .enumerate()
        .map(|(i, r)| if i == 0 { *r } else { r / ((i + 1) as f64).log2() })
        .sum()
}

/// `DCG / IDCG` with `DCG = rel_1 + Σ_{i≥2} rel_i / log₂ i`. Zero when no
/// item is relevant (or the list is empty).
pub fn ndcg(rel: &[f64]) -> f64 {
    let mut ideal = rel.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal);
    if idcg <= 0.0 {
        0.0
    } else {
        dcg(rel) / idcg
    }
}

/// Cohen's kappa of two binary judgment lists. Absent when chance agreement
/// is 1 (both judges constant and equal).
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<Option<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Invalid(format!(
            "judgment lists must have equal non-zero length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if pe >= 1.0 {
        return Ok(None);
    }
    Ok(Some((agree - pe) / (1.0 - pe)))
}

/// Reads `item_id<TAB>judge_a<TAB>judge_b` rows.
pub fn read_judgments(path: &Path) -> Result<Vec<(String, bool, bool)>> {
    tsv::read_records(path)?
        .into_iter()
        .map(|(line, f)| {
            if f.len() < 3 {
                return Err(Error::parse(path, line, "expected item_id<TAB>judge_a<TAB>judge_b"));
            }
            let p = |s: &str| crate::corpus::parse_bool(s).ok_or_else(|| Error::parse(path, line, format!("bad judgment {s:?}")));
            Ok((f[0].clone(), p(&f[1])?, p(&f[2])?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Common,
    LessCommon,
    Rare,
    Unobserved,
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "common" => Ok(Tier::Common),
            "less_common" => Ok(Tier::LessCommon),
            "rare" => Ok(Tier::Rare),
            "unobserved" => Ok(Tier::Unobserved),
            other => Err(format!("unknown tier {other:?}")),
        }
    }
}

/// Reads `statement_id<TAB>tier` rows.
pub fn read_tiers(path: &Path) -> Result<BTreeMap<String, Tier>> {
    let mut out = BTreeMap::new();
    for (line, f) in tsv::read_records(path)? {
        if f.len() < 2 {
            return Err(Error::parse(path, line, "expected statement_id<TAB>tier"));
        }
        let t = f[1].parse().map_err(|e: String| Error::parse(path, line, e))?;
        if out.insert(f[0].clone(), t).is_some() {
            return Err(Error::parse(path, line, format!("duplicate statement {:?}", f[0])));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    I,
    II,
}

impl Setting {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Setting::I),
            2 => Ok(Setting::II),
            _ => Err(Error::Invalid(format!("setting must be 1 or 2, got {n}"))),
        }
    }

    /// Setting I: only common effects are positive. Setting II: common and
    /// less common are positive.
    pub fn is_positive(self, tier: Tier) -> bool {
        match self {
            Setting::I => tier == Tier::Common,
            Setting::II => matches!(tier, Tier::Common | Tier::LessCommon),
        }
    }

    /// Binary labels plus the rare statements tracked for rare recall
    /// (setting II only).
    pub fn labels(self, tiers: &BTreeMap<String, Tier>) -> (BTreeMap<String, bool>, BTreeSet<String>) {
        let labels = tiers.iter().map(|(id, &t)| (id.clone(), self.is_positive(t))).collect();
        let rare = match self {
            Setting::I => BTreeSet::new(),
            Setting::II => tiers.iter().filter(|(_, &t)| t == Tier::Rare).map(|(id, _)| id.clone()).collect(),
        };
        (labels, rare)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Freq,
    Svm,
    SvmL1,
    SvmDs,
    SvmDsL1,
    Crf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Freq,
        Algorithm::Svm,
        Algorithm::SvmL1,
        Algorithm::SvmDs,
        Algorithm::SvmDsL1,
        Algorithm::Crf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Freq => "freq",
            Algorithm::Svm => "svm",
            Algorithm::SvmL1 => "svm-l1",
            Algorithm::SvmDs => "svm-ds",
            Algorithm::SvmDsL1 => "svm-ds-l1",
            Algorithm::Crf => "crf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

pub const METRICS: [&str; 4] = ["accuracy", "sensitivity", "specificity", "rare_recall"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    pub crf: TrainConfig,
    pub linear: LinearConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            train_fraction: 0.8,
            repeats: 20,
            seed: 0,
            crf: TrainConfig::default(),
            linear: LinearConfig::default(),
        }
    }
}

/// Stratified split of labeled statements: within each class,
/// `max(1, round(f · n_c))` go to training. Returns (train, test) ids, sorted.
pub fn stratified_split(labels: &BTreeMap<String, bool>, fraction: f64, seed: u64, repeat: u64) -> Result<(Vec<String>, Vec<String>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, stream) in [(true, "split-pos"), (false, "split-neg")] {
        let mut ids: Vec<&String> = labels.iter().filter(|(_, &y)| y == class).map(|(id, _)| id).collect();
        if ids.is_empty() {
            return Err(Error::Stratification(format!(
                "no labeled statements of class {class}; both classes are required"
            )));
        }
        ids.shuffle(&mut seed::rng(seed, stream, repeat));
        let n_train = ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len());
        train.extend(ids[..n_train].iter().map(|s| s.to_string()));
        test.extend(ids[n_train..].iter().map(|s| s.to_string()));
    }
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Metric values of one algorithm in one repeat.
pub type RepeatMetrics = BTreeMap<(Algorithm, &'static str), f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub algorithm: Algorithm,
    pub metric: &'static str,
    pub mean: f64,
    pub stddev: f64,
    /// Repeats in which the metric was defined.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<MetricRow>,
    pub repeats: Vec<RepeatMetrics>,
    /// Trust scores of the CRF fit in each repeat (empty when the CRF is not run).
    pub crf_trust: Vec<BTreeMap<String, f64>>,
}

impl ExperimentResult {
    pub fn get(&self, algorithm: Algorithm, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.metric == metric)
    }

    /// `algorithm<TAB>metric<TAB>mean<TAB>stddev` with a header line.
    pub fn render(&self) -> String {
        let mut out = String::from("algorithm\tmetric\tmean\tstddev\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\n", r.algorithm, r.metric, r.mean, r.stddev));
        }
        out
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn train_partition(graph: &CliqueGraph, train: &[String], labels: &BTreeMap<String, bool>) -> Partition {
    let mut clamped = vec![None; graph.statements().len()];
    for id in train {
        if let Some(s) = graph.statement_index(id) {
            clamped[s] = Some(labels[id]);
        }
    }
    let unknown = (0..clamped.len()).filter(|&s| clamped[s].is_none()).collect();
    let labeled = (0..clamped.len()).filter(|&s| clamped[s].is_some()).collect();
    Partition {
        clamped,
        unknown,
        labeled,
        ignored: Vec::new(),
    }
}

struct RepeatOutcome {
    metrics: RepeatMetrics,
    trust: Option<BTreeMap<String, f64>>,
}

fn run_repeat(
    graph: &CliqueGraph,
    labels: &BTreeMap<String, bool>,
    rare: &BTreeSet<String>,
    config: &ExperimentConfig,
    repeat: usize,
    par: Parallelism,
) -> Result<RepeatOutcome> {
    let (train, test) = stratified_split(labels, config.train_fraction, config.seed, repeat as u64)?;
    let part = train_partition(graph, &train, labels);
    let test_idx: Vec<usize> = test.iter().filter_map(|id| graph.statement_index(id)).collect();
    let mut metrics = RepeatMetrics::new();
    let mut trust = None;
    for &alg in &config.algorithms {
        let predictions: BTreeMap<String, bool> = match alg {
            Algorithm::Freq => {
                let all = frequency_predict(graph);
                test_idx.iter().map(|&s| (graph.statements()[s].clone(), all[&graph.statements()[s]])).collect()
            }
            Algorithm::Svm | Algorithm::SvmL1 | Algorithm::SvmDs | Algorithm::SvmDsL1 => {
                let lc = LinearConfig {
                    penalty: if matches!(alg, Algorithm::SvmL1 | Algorithm::SvmDsL1) { Penalty::L1 } else { Penalty::L2 },
                    ..config.linear.clone()
                };
                let model = if matches!(alg, Algorithm::Svm | Algorithm::SvmL1) {
                    train_linear_aggregate(graph, &part, &lc, par)?
                } else {
                    train_linear_distant(graph, &part, &lc, par)?
                };
                model.predict(graph, &test_idx).into_iter().map(|(id, (_, y))| (id, y)).collect()
            }
            Algorithm::Crf => {
                let cfg = TrainConfig {
                    seed: seed::derive(config.seed, "crf", repeat as u64),
                    ..config.crf.clone()
                };
                let r = fit(graph, &part, &cfg, par)?;
                trust = Some(r.trust.to_map(graph));
                test_idx
                    .iter()
                    .map(|&s| {
                        let id = &graph.statements()[s];
                        (id.clone(), r.marginals.predicted(id).unwrap_or(false))
                    })
                    .collect()
            }
        };
        let cm = ConfusionMatrix::from_pairs(predictions.iter().map(|(id, &p)| (labels[id], p)));
        let m = confusion_metrics(&cm);
        let rare_test: BTreeSet<String> = rare.iter().filter(|id| predictions.contains_key(*id)).cloned().collect();
        for (name, v) in METRICS.iter().zip([m.accuracy, m.sensitivity, m.specificity, rare_recall(&predictions, &rare_test)]) {
            if let Some(v) = v {
                metrics.insert((alg, name), v);
            }
        }
    }
    Ok(RepeatOutcome { metrics, trust })
}

/// Repeated stratified train/test splits of the labeled statements. Every
/// algorithm sees the same splits; the CRF additionally sees the graph's
/// unlabeled statements as unknowns. Labeled ids absent from the graph are
/// dropped with a warning.
pub fn run_experiment(
    graph: &CliqueGraph,
    labels: &BTreeMap<String, bool>,
    rare: &BTreeSet<String>,
    config: &ExperimentConfig,
    par: Parallelism,
) -> Result<ExperimentResult> {
    if config.repeats == 0 {
        return Err(Error::Invalid("repeats must be >= 1".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::Invalid(format!("train fraction must be in (0, 1), got {}", config.train_fraction)));
    }
    let present: BTreeMap<String, bool> = labels
        .iter()
        .filter(|(id, _)| graph.statement_index(id).is_some())
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    if present.len() < labels.len() {
        log::warn!("{} labeled statement(s) have no clique and are ignored", labels.len() - present.len());
    }
    // Repeats run concurrently; each repeat runs its own work sequentially.
    let inner = if par.is_parallel() { Parallelism::SEQUENTIAL } else { par };
    let outcomes = par.install(|| par::map_range(par, config.repeats, |r| run_repeat(graph, &present, rare, config, r, inner)));
    let outcomes: Vec<RepeatOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &alg in &config.algorithms {
        for metric in METRICS {
            let vals: Vec<f64> = outcomes.iter().filter_map(|o| o.metrics.get(&(alg, metric)).copied()).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, stddev) = mean_std(&vals);
            rows.push(MetricRow {
                algorithm: alg,
                metric,
                mean,
                stddev,
                n: vals.len(),
            });
        }
    }
    let crf_trust = outcomes.iter().filter_map(|o| o.trust.clone()).collect();
    Ok(ExperimentResult {
        rows,
        repeats: outcomes.into_iter().map(|o| o.metrics).collect(),
        crf_trust,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let m = confusion_metrics(&ConfusionMatrix::new(8, 7, 2, 3));
        assert_eq!(m.accuracy, Some(0.75));
        assert!((m.sensitivity.unwrap() - 8.0 / 11.0).abs() < 1e-15);
        assert!((m.specificity.unwrap() - 7.0 / 9.0).abs() < 1e-15);
        let perfect = confusion_metrics(&ConfusionMatrix::new(3, 4, 0, 0));
        assert_eq!(perfect.accuracy, Some(1.0));
        assert_eq!(perfect.sensitivity, Some(1.0));
        let no_pos = confusion_metrics(&ConfusionMatrix::new(0, 4, 1, 0));
        assert_eq!(no_pos.sensitivity, None);
        assert!(no_pos.specificity.is_some());
    }

    #[test]
    fn rare_recall_examples() {
        let rare: BTreeSet<String> = ["a", "b", "c", "d"].map(String::from).into();
        let mut p: BTreeMap<String, bool> = rare.iter().map(|r| (r.clone(), true)).collect();
        assert_eq!(rare_recall(&p, &rare), Some(1.0));
        p.insert("d".into(), false);
        assert_eq!(rare_recall(&p, &rare), Some(0.75));
        p.values_mut().for_each(|v| *v = false);
        assert_eq!(rare_recall(&p, &rare), Some(0.0));
        assert_eq!(rare_recall(&p, &BTreeSet::new()), None);
    }

    #[test]
    fn ndcg_examples() {
        let v = ndcg(&[1.0, 0.0, 1.0]);
        // 1 + 1/log2(3) over 2
        assert!((v - (1.0 + 1.0 / 3f64.log2()) / 2.0).abs() < 1e-15);
        assert_eq!(ndcg(&[1.0; 5]), 1.0);
        assert_eq!(ndcg(&[0.0; 3]), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, n) in [(true, true, 40), (true, false, 10), (false, true, 5), (false, false, 45)] {
            a.extend(std::iter::repeat_n(x, n));
            b.extend(std::iter::repeat_n(y, n));
        }
        let k = cohen_kappa(&a, &b).unwrap().unwrap();
        assert!((k - 0.70).abs() < 1e-10);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), Some(1.0));
        assert_eq!(cohen_kappa(&[true, true, false, false], &[true, false, true, false]).unwrap(), Some(0.0));
        assert!(cohen_kappa(&[true], &[true, false]).is_err());
        assert_eq!(cohen_kappa(&[true, true], &[true, true]).unwrap(), None);
    }

    #[test]
    fn split_is_stratified() {
        let labels: BTreeMap<String, bool> = (0..25).map(|i| (format!("s{i:02}"), i < 10)).collect();
        let (train, test) = stratified_split(&labels, 0.8, 1, 0).unwrap();
        assert_eq!(train.iter().filter(|id| labels[*id]).count(), 8);
        assert_eq!(train.len(), 20);
        assert_eq!(test.len(), 5);
        assert_eq!(stratified_split(&labels, 0.8, 1, 0).unwrap(), (train.clone(), test));
        assert_ne!(stratified_split(&labels, 0.8, 1, 1).unwrap().0, train);
        let one: BTreeMap<String, bool> = [("a".to_string(), true)].into();
        assert!(matches!(stratified_split(&one, 0.8, 1, 0), Err(Error::Stratification(_))));
    }

    #[test]
    fn settings_map_tiers() {
        let tiers: BTreeMap<String, Tier> = [
            ("a".to_string(), Tier::Common),
            ("b".to_string(), Tier::LessCommon),
            ("c".to_string(), Tier::Rare),
            ("d".to_string(), Tier::Unobserved),
        ]
        .into();
        let (l1, r1) = Setting::I.labels(&tiers);
        assert_eq!(l1.values().copied().collect::<Vec<_>>(), [true, false, false, false]);
        assert!(r1.is_empty());
        let (l2, r2) = Setting::II.labels(&tiers);
        assert_eq!(l2.values().copied().collect::<Vec<_>>(), [true, true, false, false]);
        assert_eq!(r2.into_iter().collect::<Vec<_>>(), ["c"]);
    }

    #[test]
    fn sample_stddev() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
