//! Command-line front end. Every subcommand reads its inputs, writes its
//! artifacts plus a `manifest.json` into `--out`, and reports failures as a
//! single `error<TAB>kind=...<TAB>message=...` line on stderr.
//!
//! Manifests record the command, the resolved configuration, the seed, the
//! library version, and the file name and SHA-256 of every input. They do
//! not record absolute paths or the worker count, so identical runs in
//! different directories or with different `--workers` produce identical
//! bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{frequency_predict, frequency_rank, train_linear_aggregate, train_linear_distant, LinearConfig};
use crate::corpus::{load_corpus, Corpus, StatementCatalog, StatementInstance};
use crate::evaluation::{read_tiers, run_experiment, Algorithm, ExperimentConfig, Setting};
use crate::features::{
    build_clique_vectors, helpfulness_regression, post_language_vector, AffectiveLexicon, FeatureExtractor, StylisticLexicon,
};
use crate::graph::{build_graph, partition, CliqueGraph};
use crate::inference::{
    exact_marginals, fit, post_objectivity, predict, rank_statements, rank_users, EStepKind, MarginalEstimates, ModelFile,
    TrainConfig, TrustMode, TrustScores,
};
use crate::optim::{LossKind, Penalty};
use crate::par::Parallelism;
use crate::synth::{generate, SynthConfig};
use crate::{tsv, Error, Result};

const USAGE_EXIT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "credence", version, about = "Statement credibility, post objectivity and user trust inference")]
struct Cli {
    /// Master seed; every random component derives its stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for feature extraction, gradient reductions and
    /// evaluation repeats. Output does not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate a corpus; writes report.json.
    Ingest(CorpusArgs),
    /// Match catalog statements in posts; writes instances.tsv.
    Match(CorpusArgs),
    /// Clique feature vectors; writes features.tsv and graph.tsv.
    Features(CorpusArgs),
    /// Train the CRF; writes model.json, marginals.tsv, trust.tsv, history.json.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Apply a trained CRF; writes marginals.tsv, trust.tsv, objectivity.tsv.
    Predict {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Rank statements by marginal; writes ranked_statements.tsv.
    RankStatements {
        #[arg(long)]
        marginals: PathBuf,
        /// Keep only the statement ids listed in this file.
        #[arg(long)]
        restrict: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank users by trust; writes ranked_users.tsv.
    RankUsers {
        #[arg(long)]
        trust: PathBuf,
        /// Drop the user ids listed in this file.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Baseline classifiers.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Repeated stratified train/test evaluation; writes results.tsv.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// 1: only common effects are credible; 2: common and less common.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        setting: u8,
        /// Expert frequency tiers (`id<TAB>common|less_common|rare|unobserved`);
        /// without it the labels file is used as is.
        #[arg(long)]
        tiers: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Comma-separated subset of freq,svm,svm-l1,svm-ds,svm-ds-l1,crf.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        linear: LinearArgs,
    },
    /// Generate a planted-truth corpus.
    Synth(SynthArgs),
    /// Ridge regression of helpfulness on pooled user language; writes helpfulness.tsv.
    AnalyzeHelpfulness {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Exact marginals by enumeration (at most 20 unknown statements).
    Oracle {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// CRF model supplying weights and trust; zero weights without trust otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BaselineCommand {
    /// Rank by number of cliques; predicts credible above the median count.
    Freq(CorpusArgs),
    /// Linear classifier on per-statement mean vectors.
    Svm {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        linear: LinearArgs,
    },
    /// Linear classifier on every clique (distant supervision) with majority vote.
    SvmDs {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        linear: LinearArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct CorpusArgs {
    /// Directory with users.jsonl, posts.jsonl, labels.tsv and catalog.tsv.
    #[arg(long)]
    corpus: PathBuf,
    /// Labels file overriding <corpus>/labels.tsv.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Catalog file overriding <corpus>/catalog.tsv.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Stylistic lexicon (`category<TAB>word,word,...`) replacing the bundled one.
    #[arg(long)]
    stylistic_lexicon: Option<PathBuf>,
    /// Affective lexicon (`word<TAB>category,...`) replacing the bundled one.
    #[arg(long)]
    affective_lexicon: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EStepArg {
    Gibbs,
    Exact,
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    /// JSON training configuration; individual flags override it.
    #[arg(long)]
    train_config: Option<PathBuf>,
    /// L2 strength on the CRF weights [default: 1.0].
    #[arg(long)]
    lambda: Option<f64>,
    /// Gibbs burn-in sweeps per E-step [default: 100].
    #[arg(long)]
    burn_in: Option<usize>,
    /// Gibbs collection sweeps per E-step [default: 400].
    #[arg(long)]
    sweeps: Option<usize>,
    /// EM iteration cap [default: 50].
    #[arg(long)]
    max_iter: Option<usize>,
    /// EM stops when no weight moves by more than this [default: 1e-4].
    #[arg(long)]
    tol: Option<f64>,
    /// Trust-modified potentials [default: on].
    #[arg(long)]
    trust: Option<OnOff>,
    /// E-step method; exact enumeration allows at most 20 unknowns [default: gibbs].
    #[arg(long)]
    e_step: Option<EStepArg>,
    /// Learn a clique bias weight.
    #[arg(long)]
    bias: Option<OnOff>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    SquaredHinge,
    Logistic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PenaltyArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Args)]
struct LinearArgs {
    /// Linear baseline loss.
    #[arg(long, default_value = "squared-hinge")]
    svm_loss: LossArg,
    /// Linear baseline penalty; `eval` ignores it and uses the penalty each
    /// algorithm name implies.
    #[arg(long, default_value = "l2")]
    svm_penalty: PenaltyArg,
    /// Linear baseline penalty strength.
    #[arg(long, default_value_t = 1.0)]
    svm_lambda: f64,
}

#[derive(Debug, Clone, Args)]
struct SynthArgs {
    /// JSON generator configuration; individual flags override it.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    statements: Option<usize>,
    #[arg(long)]
    trustworthy_fraction: Option<f64>,
    #[arg(long)]
    t_high: Option<f64>,
    #[arg(long)]
    t_low: Option<f64>,
    #[arg(long)]
    credible_fraction: Option<f64>,
    #[arg(long)]
    labeled_fraction: Option<f64>,
    #[arg(long)]
    posts_min: Option<usize>,
    #[arg(long)]
    posts_max: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            report("usage", first.trim_start_matches("error: "));
            return USAGE_EXIT;
        }
    };
    if cli.workers == 0 {
        report("usage", "--workers must be at least 1");
        return USAGE_EXIT;
    }
    let par = Parallelism::new(cli.workers);
    match par.install(|| dispatch(&cli, par)) {
        Ok(()) => 0,
        Err(e) => {
            report(e.kind(), &e.to_string());
            e.exit_code()
        }
    }
}

fn report(kind: &str, message: &str) {
    let clean: String = message.chars().map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c }).collect();
    eprintln!("error\tkind={kind}\tmessage={clean}");
}

/// Inputs read and outputs written by one run.
struct Run {
    command: &'static str,
    seed: u64,
    out: PathBuf,
    inputs: BTreeMap<String, Value>,
    input_paths: Vec<PathBuf>,
    outputs: Vec<(String, String)>,
}

impl Run {
    fn new(command: &'static str, seed: u64, out: &Path) -> Self {
        Self {
            command,
            seed,
            out: out.to_path_buf(),
            inputs: BTreeMap::new(),
            input_paths: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records an input file's name and digest and returns its path.
    fn input(&mut self, role: &str, path: &Path) -> Result<PathBuf> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.insert(
            role.to_string(),
            json!({ "file": name, "sha256": hex::encode(Sha256::digest(&bytes)) }),
        );
        self.input_paths.push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    fn output(&mut self, name: &str, contents: String) {
        self.outputs.push((name.to_string(), contents));
    }

    /// Writes the outputs and the manifest. Refuses to overwrite an input.
    fn finish(self, config: Value) -> Result<()> {
        let inputs: BTreeSet<PathBuf> = self.input_paths.iter().filter_map(|p| p.canonicalize().ok()).collect();
        let mut names: Vec<&str> = self.outputs.iter().map(|(n, _)| n.as_str()).collect();
        names.push("manifest.json");
        for name in &names {
            if let Ok(c) = self.out.join(name).canonicalize() {
                if inputs.contains(&c) {
                    return Err(Error::Invalid(format!("output {} would overwrite an input file", c.display())));
                }
            }
        }
        for (name, contents) in &self.outputs {
            tsv::write_file(&self.out.join(name), contents)?;
        }
        let manifest = json!({
            "command": self.command,
            "version": crate::VERSION,
            "seed": self.seed,
            "config": config,
            "inputs": self.inputs,
            "outputs": self.outputs.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        tsv::write_file(&self.out.join("manifest.json"), &text)
    }
}

struct Loaded {
    corpus: Corpus,
    instances: Vec<StatementInstance>,
    extractor: FeatureExtractor,
}

impl Loaded {
    fn graph(&self, par: Parallelism) -> Result<CliqueGraph> {
        let vectors = build_clique_vectors(&self.corpus, &self.instances, &self.extractor, par);
        build_graph(&self.instances, &vectors)
    }
}

fn load(run: &mut Run, args: &CorpusArgs, need_catalog: bool) -> Result<Loaded> {
    let dir = &args.corpus;
    let users = run.input("users", &dir.join("users.jsonl"))?;
    let posts = run.input("posts", &dir.join("posts.jsonl"))?;
    let labels = run.input("labels", args.labels.as_deref().unwrap_or(&dir.join("labels.tsv")))?;
    let (mut corpus, report) = load_corpus(&users, &posts, &labels)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let stylistic = match &args.stylistic_lexicon {
        Some(p) => StylisticLexicon::load(&run.input("stylistic_lexicon", p)?)?,
        None => StylisticLexicon::default(),
    };
    let affective = match &args.affective_lexicon {
        Some(p) => AffectiveLexicon::load(&run.input("affective_lexicon", p)?)?,
        None => AffectiveLexicon::default(),
    };
    let (catalog, instances) = if need_catalog {
        let path = run.input("catalog", args.catalog.as_deref().unwrap_or(&dir.join("catalog.tsv")))?;
        let catalog = StatementCatalog::load(&path)?;
        let instances = corpus.match_statements(&catalog)?;
        (Some(catalog), instances)
    } else {
        (None, Vec::new())
    };
    Ok(Loaded {
        corpus,
        instances,
        extractor: FeatureExtractor::new(stylistic, affective, catalog),
    })
}

fn train_config(args: &TrainArgs, run: &mut Run, seed: u64) -> Result<TrainConfig> {
    let mut c = match &args.train_config {
        Some(p) => {
            let p = run.input("train_config", p)?;
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(&p, e.line(), e.to_string()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.lambda {
        c.lambda = v;
    }
    if let Some(v) = args.burn_in {
        c.burn_in = v;
    }
    if let Some(v) = args.sweeps {
        c.sweeps = v;
    }
    if let Some(v) = args.max_iter {
        c.max_iter = v;
    }
    if let Some(v) = args.tol {
        c.tol = v;
    }
    if let Some(v) = args.trust {
        c.trust = match v {
            OnOff::On => TrustMode::Multiplicative,
            OnOff::Off => TrustMode::None,
        };
    }
    if let Some(v) = args.e_step {
        c.e_step = match v {
            EStepArg::Gibbs => EStepKind::Gibbs,
            EStepArg::Exact => EStepKind::Exact,
        };
    }
    if let Some(v) = args.bias {
        c.with_bias = matches!(v, OnOff::On);
    }
    c.seed = seed;
    c.validate()?;
    Ok(c)
}

fn linear_config(args: &LinearArgs) -> Result<LinearConfig> {
    if !(args.svm_lambda > 0.0 && args.svm_lambda.is_finite()) {
        return Err(Error::Invalid(format!("--svm-lambda must be positive, got {}", args.svm_lambda)));
    }
    Ok(LinearConfig {
        loss: match args.svm_loss {
            LossArg::SquaredHinge => LossKind::SquaredHinge,
            LossArg::Logistic => LossKind::Logistic,
        },
        penalty: match args.svm_penalty {
            PenaltyArg::L1 => Penalty::L1,
            PenaltyArg::L2 => Penalty::L2,
        },
        lambda: args.svm_lambda,
        ..LinearConfig::default()
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn render_map(map: &BTreeMap<String, f64>) -> String {
    tsv::render_scores(map.iter().map(|(k, v)| (k.as_str(), *v)))
}

fn render_ranking(rows: &[(String, f64)]) -> String {
    tsv::render_scores(rows.iter().map(|(k, v)| (k.as_str(), *v)))
}

fn render_instances(instances: &[StatementInstance]) -> String {
    instances
        .iter()
        .map(|i| format!("{}\t{}\t{}\n", i.statement_id, i.post_id, i.user_id))
        .collect()
}

fn dispatch(cli: &Cli, par: Parallelism) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Ingest(args) => {
            let mut run = Run::new("ingest", seed, &args.out);
            let loaded = load(&mut run, args, false)?;
            let c = &loaded.corpus;
            let report = json!({
                "users": c.num_users(),
                "posts": c.num_posts(),
                "labels": c.labels().len(),
                "labeled_credible": c.labels().labeled.values().filter(|&&v| v).count(),
            });
            run.output("report.json", format!("{}\n", serde_json::to_string_pretty(&report)?));
            run.finish(json!({}))
        }
        Command::Match(args) => {
            let mut run = Run::new("match", seed, &args.out);
            let loaded = load(&mut run, args, true)?;
            run.output("instances.tsv", render_instances(&loaded.instances));
            run.finish(json!({}))
        }
        Command::Features(args) => {
            let mut run = Run::new("features", seed, &args.out);
            let loaded = load(&mut run, args, true)?;
            let graph = loaded.graph(par)?;
            let names = loaded.extractor.layout().names();
            let mut text = format!("statement_id\tpost_id\tuser_id\t{}\n", names.join("\t"));
            for c in graph.cliques() {
                let row: Vec<String> = graph.features().row(c.index).iter().map(|v| v.to_string()).collect();
                text.push_str(&format!("{}\t{}\t{}\t{}\n", c.statement_id, c.post_id, c.user_id, row.join("\t")));
            }
            run.output("features.tsv", text);
            run.output("graph.tsv", graph.render_dump());
            run.finish(to_value(&loaded.extractor.layout())?)
        }
        Command::Train { corpus, train } => {
            let mut run = Run::new("train", seed, &corpus.out);
            let config = train_config(train, &mut run, seed)?;
            let loaded = load(&mut run, corpus, true)?;
            let graph = loaded.graph(par)?;
            let part = partition(&graph, loaded.corpus.labels());
            let result = fit(&graph, &part, &config, par)?;
            let trust = result.trust.to_map(&graph);
            let model = ModelFile::crf(loaded.extractor.layout(), &result.model, trust.clone(), &config)?;
            run.output("model.json", model.render()?);
            run.output("marginals.tsv", render_map(&result.marginals.marginals));
            run.output("trust.tsv", render_map(&trust));
            let history = json!({ "converged": result.converged, "iterations": result.history });
            run.output("history.json", format!("{}\n", serde_json::to_string_pretty(&history)?));
            run.finish(to_value(&config)?)
        }
        Command::Predict { corpus, model } => {
            let mut run = Run::new("predict", seed, &corpus.out);
            let file = ModelFile::load(&run.input("model", model)?)?;
            let pm = file.potential_model()?;
            let mut config = file.train_config()?;
            config.seed = seed;
            let loaded = load(&mut run, corpus, true)?;
            if loaded.extractor.layout() != file.layout {
                return Err(Error::Invalid("model feature layout differs from the lexicons in use".into()));
            }
            let graph = loaded.graph(par)?;
            let part = partition(&graph, loaded.corpus.labels());
            let (marginals, trust) = predict(&graph, &part, &pm, &config, par)?;
            let objectivity: BTreeMap<String, f64> = loaded
                .corpus
                .posts()
                .map(|p| {
                    let raw = post_language_vector(&loaded.extractor, &p.text);
                    (p.id.clone(), post_objectivity(&pm, &file.layout, &raw))
                })
                .collect();
            run.output("marginals.tsv", render_map(&marginals.marginals));
            run.output("trust.tsv", render_map(&trust.to_map(&graph)));
            run.output("objectivity.tsv", render_map(&objectivity));
            run.finish(to_value(&config)?)
        }
        Command::RankStatements { marginals, restrict, out } => {
            let mut run = Run::new("rank-statements", seed, out);
            let m = MarginalEstimates {
                marginals: tsv::read_scores(&run.input("marginals", marginals)?)?.into_iter().collect(),
                burn_in: 0,
                sweeps: 0,
            };
            let restrict = match restrict {
                Some(p) => Some(tsv::read_id_list(&run.input("restrict", p)?)?.into_iter().collect::<BTreeSet<_>>()),
                None => None,
            };
            run.output("ranked_statements.tsv", render_ranking(&rank_statements(&m, restrict.as_ref())));
            run.finish(json!({ "restricted": restrict.is_some() }))
        }
        Command::RankUsers { trust, exclude, out } => {
            let mut run = Run::new("rank-users", seed, out);
            let t: BTreeMap<String, f64> = tsv::read_scores(&run.input("trust", trust)?)?.into_iter().collect();
            let exclude: BTreeSet<String> = match exclude {
                Some(p) => tsv::read_id_list(&run.input("exclude", p)?)?.into_iter().collect(),
                None => BTreeSet::new(),
            };
            run.output("ranked_users.tsv", render_ranking(&rank_users(&t, &exclude)));
            run.finish(json!({ "excluded": exclude.len() }))
        }
        Command::Baseline(b) => baseline(b, seed, par),
        Command::Eval {
            corpus,
            setting,
            tiers,
            repeats,
            train_fraction,
            algorithms,
            train,
            linear,
        } => {
            let mut run = Run::new("eval", seed, &corpus.out);
            let crf = train_config(train, &mut run, seed)?;
            let setting = Setting::from_number(*setting)?;
            let loaded = load(&mut run, corpus, true)?;
            let (labels, rare) = match tiers {
                Some(p) => setting.labels(&read_tiers(&run.input("tiers", p)?)?),
                None => {
                    if setting == Setting::II {
                        log::warn!("setting 2 without a tiers file: using the labels file, rare recall unavailable");
                    }
                    (loaded.corpus.labels().labeled.clone(), BTreeSet::new())
                }
            };
            let graph = loaded.graph(par)?;
            let config = ExperimentConfig {
                algorithms: algorithms.clone().unwrap_or_else(|| Algorithm::ALL.to_vec()),
                train_fraction: *train_fraction,
                repeats: *repeats,
                seed,
                crf,
                linear: linear_config(linear)?,
            };
            let result = run_experiment(&graph, &labels, &rare, &config, par)?;
            run.output("results.tsv", result.render());
            run.finish(json!({
                "setting": setting,
                "algorithms": config.algorithms,
                "train_fraction": config.train_fraction,
                "repeats": config.repeats,
                "crf": config.crf,
                "linear": config.linear,
            }))
        }
        Command::Synth(args) => {
            let mut run = Run::new("synth", seed, &args.out);
            let mut c = match &args.synth_config {
                Some(p) => {
                    let p = run.input("synth_config", p)?;
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::parse(&p, e.line(), e.to_string()))?
                }
                None => SynthConfig::default(),
            };
            macro_rules! set {
                ($($f:ident),*) => { $(if let Some(v) = args.$f { c.$f = v; })* };
            }
            set!(users, statements, trustworthy_fraction, t_high, t_low, credible_fraction, labeled_fraction, posts_min, posts_max);
            c.seed = seed;
            let world = generate(&c)?;
            let mut files = Vec::new();
            let tmp = OutputDir::new();
            world.write(tmp.path())?;
            for entry in std::fs::read_dir(tmp.path()).map_err(|e| Error::io(tmp.path(), e))? {
                let p = entry.map_err(|e| Error::io(tmp.path(), e))?.path();
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                files.push((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), text));
            }
            files.sort();
            for (name, text) in files {
                run.output(&name, text);
            }
            run.finish(to_value(&c)?)
        }
        Command::AnalyzeHelpfulness { corpus, lambda } => {
            let mut run = Run::new("analyze-helpfulness", seed, &corpus.out);
            let loaded = load(&mut run, corpus, false)?;
            let report = helpfulness_regression(&loaded.corpus, &loaded.extractor, *lambda)?;
            run.output("helpfulness.tsv", report.render());
            run.finish(json!({ "lambda": lambda, "users": report.users.len() }))
        }
        Command::Oracle { corpus, model } => {
            let mut run = Run::new("oracle", seed, &corpus.out);
            let file = match model {
                Some(p) => Some(ModelFile::load(&run.input("model", p)?)?),
                None => None,
            };
            let loaded = load(&mut run, corpus, true)?;
            let graph = loaded.graph(par)?;
            let part = partition(&graph, loaded.corpus.labels());
            let (eta, trust) = match &file {
                Some(f) => {
                    let pm = f.potential_model()?;
                    let eta: Vec<f64> = graph.features().iter_rows().map(|r| pm.eta(r)).collect();
                    let trust = pm.trust_mode.is_on().then(|| {
                        let scores: Vec<f64> = graph.users().iter().map(|u| f.trust.get(u).copied().unwrap_or(0.5)).collect();
                        let n = scores.len();
                        TrustScores {
                            scores,
                            positive: vec![0.0; n],
                            total: vec![0.0; n],
                        }
                    });
                    (eta, trust)
                }
                None => (vec![0.0; graph.num_cliques()], None),
            };
            let r = exact_marginals(&graph, &part, &eta, trust.as_ref())?;
            run.output("marginals.tsv", render_map(&r.marginals.marginals));
            run.output(
                "likelihood.json",
                format!("{}\n", serde_json::to_string_pretty(&json!({ "log_likelihood": r.log_likelihood }))?),
            );
            run.finish(json!({ "model": file.is_some(), "trust": trust.is_some() }))
        }
    }
}

fn baseline(cmd: &BaselineCommand, seed: u64, par: Parallelism) -> Result<()> {
    match cmd {
        BaselineCommand::Freq(args) => {
            let mut run = Run::new("baseline-freq", seed, &args.out);
            let loaded = load(&mut run, args, true)?;
            let graph = loaded.graph(par)?;
            let ranked: String = frequency_rank(&graph).into_iter().map(|(id, n)| format!("{id}\t{n}\n")).collect();
            let predicted: String = frequency_predict(&graph).into_iter().map(|(id, y)| format!("{id}\t{y}\n")).collect();
            run.output("frequency.tsv", ranked);
            run.output("predictions.tsv", predicted);
            run.finish(json!({}))
        }
        BaselineCommand::Svm { corpus, linear } | BaselineCommand::SvmDs { corpus, linear } => {
            let distant = matches!(cmd, BaselineCommand::SvmDs { .. });
            let mut run = Run::new(if distant { "baseline-svm-ds" } else { "baseline-svm" }, seed, &corpus.out);
            let config = linear_config(linear)?;
            let loaded = load(&mut run, corpus, true)?;
            let graph = loaded.graph(par)?;
            let part = partition(&graph, loaded.corpus.labels());
            let model = if distant {
                train_linear_distant(&graph, &part, &config, par)?
            } else {
                train_linear_aggregate(&graph, &part, &config, par)?
            };
            let predictions: String = model
                .predict(&graph, &part.unknown)
                .into_iter()
                .map(|(id, (score, y))| format!("{id}\t{}\t{y}\n", tsv::fmt_score(score)))
                .collect();
            run.output("model.json", model.to_file(loaded.extractor.layout(), seed)?.render()?);
            run.output("predictions.tsv", predictions);
            run.finish(to_value(&config)?)
        }
    }
}

/// Scratch directory removed on drop.
struct OutputDir(PathBuf);

impl OutputDir {
    fn new() -> Self {
        use std::sync::atomic::{AtomicU64, Ordering};
        static NEXT: AtomicU64 = AtomicU64::new(0);
        let n = NEXT.fetch_add(1, Ordering::Relaxed);
        Self(std::env::temp_dir().join(format!("credence-{}-{n}", std::process::id())))
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["credence", "no-such-command"]), 2);
        assert_eq!(run(["credence", "train", "--corpus", "x"]), 2);
        assert_eq!(run(["credence", "--workers", "0", "synth", "--out", "x"]), 2);
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = std::env::temp_dir().join("credence-missing-test");
        let code = run(["credence", "ingest", "--corpus", dir.join("nope").to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 3);
    }
}
