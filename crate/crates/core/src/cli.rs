//! Command-line front end. Settings come from an optional flat config file
//! (`key = value` lines or a JSON object) overridden by flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::corpus::{read_parses, read_relations, Branch, ParseIndex};
use crate::embeddings::{ClusterModel, EmbeddingTable, DEFAULT_CLUSTERS};
use crate::evalscore::{
    ablation_report, feature_ablation, read_predictions, report_table, score_all, write_predictions,
};
use crate::features::{FeatureFamily, SentimentLexicon};
use crate::hyperopt::{format_named_values, parse_named_values, SearchSpace, DEFAULT_BUDGET};
use crate::neural::{Hyperparams, ModelParams};
use crate::pipeline::{predict_relations, train_branch, tune_branch, Dataset, Resources, TrainSpec};

#[derive(Debug, Parser)]
#[command(name = "discsense", version, about = "Discourse relation sense classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the classifier for one branch.
    Train(Common),
    /// Search hyperparameters for one branch.
    Tune(Common),
    /// Predict senses with one or two branch models.
    Predict(Common),
    /// Score predictions against gold relations.
    Evaluate(Common),
    /// Cluster the embeddings of corpus words with k-means.
    ClusterEmbeddings(Common),
    /// Incremental feature ablation on the dev set.
    Ablate(Common),
}

#[derive(Debug, Default, Args)]
pub struct Common {
    /// Relations file (training data or prediction input).
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Parses file for the relations.
    #[arg(long)]
    pub parses: Option<PathBuf>,
    #[arg(long)]
    pub dev_relations: Option<PathBuf>,
    #[arg(long)]
    pub dev_parses: Option<PathBuf>,
    /// Word embeddings in binary word2vec layout.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Sentiment lexicon (`word<TAB>polarity` lines).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Word-cluster file written by `cluster-embeddings`.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Model file; repeat to predict with both branches.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    /// explicit or nonexplicit.
    #[arg(long)]
    pub branch: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Main output file of the command.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Predictions file to evaluate.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Also write a JSON version of the report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Hyperparameter override, e.g. `--hp lstm1=259`.
    #[arg(long = "hp", value_name = "NAME=VALUE")]
    pub hp: Vec<String>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Upper bound on every layer size.
    #[arg(long)]
    pub hidden_cap: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Comma-separated feature families (default: all for the branch).
    #[arg(long)]
    pub features: Option<String>,
    /// Number of tuning trials.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Tuner output: best configuration file.
    #[arg(long)]
    pub best_config: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

/// Flag values layered over config-file values.
struct Settings<'a> {
    flags: &'a Common,
    file: BTreeMap<String, String>,
}

impl<'a> Settings<'a> {
    fn load(flags: &'a Common) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_named_values(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings { flags, file })
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.file.get(key).map(PathBuf::from))
    }

    fn require_path(&self, flag: &Option<PathBuf>, key: &str) -> anyhow::Result<PathBuf> {
        self.path(flag, key)
            .ok_or_else(|| anyhow!("--{} is required", key.replace('_', "-")))
    }

    fn num<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("config key {key}: invalid value {v:?}")),
            None => Ok(None),
        }
    }

    fn seed(&self) -> anyhow::Result<u64> {
        Ok(self.num(self.flags.seed, "seed")?.unwrap_or(0))
    }

    fn branch(&self) -> anyhow::Result<Branch> {
        let s = self
            .flags
            .branch
            .clone()
            .or_else(|| self.file.get("branch").cloned())
            .ok_or_else(|| anyhow!("--branch is required (explicit or nonexplicit)"))?;
        Branch::parse(&s).ok_or_else(|| anyhow!("unknown branch {s:?}; expected explicit or nonexplicit"))
    }

    /// Config-file hyperparameters, then `--hp` overrides, bounds-checked.
    fn hyperparams(&self) -> anyhow::Result<Hyperparams> {
        let mut entries = self.file.clone();
        for kv in &self.flags.hp {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--hp expects NAME=VALUE, got {kv:?}"))?;
            let k = k.trim();
            if SearchSpace::classifier().dim(k).is_none() && k != "lr" {
                bail!("--hp: unknown hyperparameter {k:?}");
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Hyperparams::from_config(&entries)?.0)
    }

    fn train_spec(&self, branch: Branch) -> anyhow::Result<TrainSpec> {
        let mut spec = TrainSpec::new(branch);
        spec.hyper = self.hyperparams()?;
        spec.seed = self.seed()?;
        let f = self.flags;
        if let Some(n) = self.num(f.max_epochs, "max_epochs")? {
            spec.opts.max_epochs = n;
        }
        if let Some(n) = self.num(f.batch_size, "batch_size")? {
            spec.opts.batch_size = n;
        }
        if let Some(n) = self.num(f.patience, "patience")? {
            spec.opts.patience = n;
        }
        spec.opts.hidden_cap = self.num(f.hidden_cap, "hidden_cap")?;
        if let Some(n) = self.num(f.min_count, "min_count")? {
            spec.min_count = n;
        }
        let features = f.features.clone().or_else(|| self.file.get("features").cloned());
        if let Some(list) = features {
            spec.families = parse_families(&list)?;
        }
        Ok(spec)
    }
}

fn parse_families(list: &str) -> anyhow::Result<Vec<FeatureFamily>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(|s| s.parse::<FeatureFamily>().map_err(anyhow::Error::from))
        .collect()
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_parses(path: Option<&Path>) -> anyhow::Result<Option<ParseIndex>> {
    path.map(|p| read_parses(open(p)?).with_context(|| format!("reading parses {}", p.display())))
        .transpose()
}

fn load_dataset(relations: &Path, parses: Option<&Path>) -> anyhow::Result<Dataset> {
    let rels =
        read_relations(open(relations)?).with_context(|| format!("reading relations {}", relations.display()))?;
    Ok(Dataset::new(rels, load_parses(parses)?))
}

struct Loaded {
    table: EmbeddingTable,
    lexicon: Option<SentimentLexicon>,
    clusters: Option<ClusterModel>,
}

impl Loaded {
    fn new(s: &Settings<'_>) -> anyhow::Result<Self> {
        let emb = s.require_path(&s.flags.embeddings, "embeddings")?;
        let table = EmbeddingTable::load_binary(open(&emb)?)
            .with_context(|| format!("reading embeddings {}", emb.display()))?;
        let lexicon = s
            .path(&s.flags.lexicon, "lexicon")
            .map(|p| SentimentLexicon::load(open(&p)?).with_context(|| format!("reading lexicon {}", p.display())))
            .transpose()?;
        let clusters = s
            .path(&s.flags.clusters, "clusters")
            .map(|p| ClusterModel::load(open(&p)?).with_context(|| format!("reading clusters {}", p.display())))
            .transpose()?;
        Ok(Loaded {
            table,
            lexicon,
            clusters,
        })
    }

    fn resources(&self) -> Resources<'_> {
        Resources {
            embeddings: &self.table,
            lexicon: self.lexicon.as_ref(),
            clusters: self.clusters.as_ref(),
        }
    }
}

/// Training and dev data for a branch command. Non-explicit training needs
/// parses for its syntactic features.
fn train_dev(s: &Settings<'_>, branch: Branch) -> anyhow::Result<(Dataset, Dataset)> {
    let rel = s.require_path(&s.flags.relations, "relations")?;
    let parses = s.path(&s.flags.parses, "parses");
    if branch == Branch::NonExplicit && parses.is_none() {
        bail!("parses required for the nonexplicit branch (--parses)");
    }
    let train = load_dataset(&rel, parses.as_deref())?;
    let dev = match s.path(&s.flags.dev_relations, "dev_relations") {
        Some(p) => {
            let dev_parses = s.path(&s.flags.dev_parses, "dev_parses");
            if branch == Branch::NonExplicit && dev_parses.is_none() {
                bail!("parses required for the nonexplicit dev set (--dev-parses)");
            }
            load_dataset(&p, dev_parses.as_deref())?
        }
        None => Dataset::default(),
    };
    Ok((train, dev))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_train(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let branch = s.branch()?;
    let spec = s.train_spec(branch)?;
    let model_path = s
        .flags
        .model
        .first()
        .cloned()
        .or_else(|| s.file.get("model").map(PathBuf::from))
        .ok_or_else(|| anyhow!("--model is required (output model file)"))?;
    let (train, dev) = train_dev(&s, branch)?;
    let loaded = Loaded::new(&s)?;
    let trained = train_branch(&train, &dev, &loaded.resources(), &spec)?;
    let mut w = create(&model_path)?;
    trained.model.save(&mut w)?;
    w.flush()?;
    let log = s
        .path(&c.out, "out")
        .unwrap_or_else(|| PathBuf::from(format!("{}.log.jsonl", model_path.display())));
    write_jsonl(&log, &trained.outcome.trace)?;
    eprintln!(
        "trained {branch} model: {} epochs, best dev loss {:.6} at epoch {}",
        trained.outcome.trace.len(),
        trained.outcome.best_dev_loss,
        trained.outcome.best_epoch
    );
    Ok(())
}

fn cmd_tune(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let branch = s.branch()?;
    let spec = s.train_spec(branch)?;
    let budget = s.num(c.budget, "budget")?.unwrap_or(DEFAULT_BUDGET);
    let out = s.require_path(&c.out, "out")?;
    let best_path = s
        .path(&c.best_config, "best_config")
        .unwrap_or_else(|| PathBuf::from(format!("{}.best.json", out.display())));
    let (train, dev) = train_dev(&s, branch)?;
    let loaded = Loaded::new(&s)?;
    let result = tune_branch(&train, &dev, &loaded.resources(), &spec, budget, |t, best| {
        eprintln!(
            "trial {}: objective {:.6}, best so far {:.6}",
            t.index,
            t.objective.unwrap_or(f64::INFINITY),
            best
        );
    })?;
    let space = SearchSpace::classifier();
    let mut w = create(&out)?;
    result.write_trace(&space, &mut w)?;
    w.flush()?;
    let best = result.best_trial();
    let mut bw = create(&best_path)?;
    serde_json::to_writer_pretty(&mut bw, &space.values_to_json(&best.values))?;
    bw.write_all(b"\n")?;
    bw.flush()?;
    eprint!(
        "best trial {}:\n{}",
        best.index,
        format_named_values(&space, &best.values)
    );
    Ok(())
}

fn cmd_predict(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let mut model_paths = c.model.clone();
    if model_paths.is_empty() {
        if let Some(m) = s.file.get("model") {
            model_paths.push(PathBuf::from(m));
        }
    }
    if model_paths.is_empty() {
        bail!("--model is required");
    }
    let models = model_paths
        .iter()
        .map(|p| ModelParams::load(open(p)?).with_context(|| format!("reading model {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for m in &models {
        if !seen.insert(m.branch) {
            bail!("two models for the {} branch", m.branch);
        }
    }
    let rel = s.require_path(&c.relations, "relations")?;
    let data = load_dataset(&rel, s.path(&c.parses, "parses").as_deref())?;
    let loaded = Loaded::new(&s)?;
    let refs: Vec<&ModelParams> = models.iter().collect();
    let preds = predict_relations(&refs, &data, &loaded.resources())?;
    let out = s.require_path(&c.out, "out")?;
    write_predictions(&preds, create(&out)?)?;
    Ok(())
}

fn cmd_evaluate(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let gold_path = s.require_path(&c.relations, "relations")?;
    let gold =
        read_relations(open(&gold_path)?).with_context(|| format!("reading relations {}", gold_path.display()))?;
    let pred_path = s.require_path(&c.predictions, "predictions")?;
    let preds = read_predictions(open(&pred_path)?)?;
    let reports = score_all(&preds, &gold)?;
    let text: String = reports.iter().map(report_table).collect::<Vec<_>>().join("\n");
    match s.path(&c.out, "out") {
        Some(p) => {
            let mut w = create(&p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    if let Some(p) = s.path(&c.json, "json") {
        let mut w = create(&p)?;
        serde_json::to_writer_pretty(&mut w, &reports)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_cluster(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let emb = s.require_path(&c.embeddings, "embeddings")?;
    let table =
        EmbeddingTable::load_binary(open(&emb)?).with_context(|| format!("reading embeddings {}", emb.display()))?;
    let k = s.num(c.k, "k")?.unwrap_or(DEFAULT_CLUSTERS);
    let max_iters = s.num(c.max_iters, "max_iters")?.unwrap_or(100);
    let seed = s.seed()?;
    let words: BTreeSet<String> = match s.path(&c.relations, "relations") {
        Some(p) => {
            let data = load_dataset(&p, s.path(&c.parses, "parses").as_deref())?;
            data.relations
                .iter()
                .flat_map(|r| r.arg1_tokens.iter().chain(&r.arg2_tokens).chain(&r.connective_tokens))
                .map(|t| t.surface.clone())
                .collect()
        }
        None => table.words().iter().cloned().collect(),
    };
    let model = ClusterModel::fit(&table, words.iter().map(String::as_str), k, seed, max_iters)?;
    let out = s.require_path(&c.out, "out")?;
    model.save(create(&out)?)?;
    eprintln!(
        "clustered {} words into {k} clusters, SSE {:.6}",
        model.assignment().len(),
        model.sse(&table)
    );
    Ok(())
}

fn cmd_ablate(c: &Common) -> anyhow::Result<()> {
    let s = Settings::load(c)?;
    let branch = s.branch()?;
    let spec = s.train_spec(branch)?;
    let schedule = match &c.features {
        Some(list) => parse_families(list)?,
        None => FeatureFamily::ablation_schedule(branch),
    };
    let (train, dev) = train_dev(&s, branch)?;
    let dev = if dev.relations.is_empty() { train.clone() } else { dev };
    let loaded = Loaded::new(&s)?;
    let rows = feature_ablation(&train, &dev, &loaded.resources(), &schedule, &spec)?;
    let text = ablation_report(&rows);
    match s.path(&c.out, "out") {
        Some(p) => {
            let mut w = create(&p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    if let Some(p) = s.path(&c.json, "json") {
        let mut w = create(&p)?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Tune(c) => cmd_tune(c),
        Command::Predict(c) => cmd_predict(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::ClusterEmbeddings(c) => cmd_cluster(c),
        Command::Ablate(c) => cmd_ablate(c),
    }
}
