//! Glue between the corpus, features and the network: building examples,
//! training one branch, predicting and tuning.

use std::collections::BTreeSet;

use crate::corpus::{attach_parses, Branch, ParseIndex, Relation, Token};
use crate::embeddings::{ClusterModel, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evalscore::Prediction;
use crate::features::{
    active_columns, extract, fit_vocab, FeatureContext, FeatureFamily, FeatureVocab, SentimentLexicon,
    SparseFeatureVector,
};
use crate::hyperopt::{run_search_with, SearchResult, SearchSpace, Trial};
use crate::neural::encoder::truncate;
use crate::neural::{architecture, train, Example, Hyperparams, KeepEnd, ModelParams, TrainOptions, TrainOutcome, OOV};

/// Relations with their (optional) parses; parses are attached on
/// construction so tokens carry parser surfaces and tags.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub relations: Vec<Relation>,
    pub parses: Option<ParseIndex>,
}

impl Dataset {
    pub fn new(mut relations: Vec<Relation>, parses: Option<ParseIndex>) -> Self {
        if let Some(p) = &parses {
            attach_parses(&mut relations, p);
        }
        Dataset { relations, parses }
    }

    pub fn branch(&self, branch: Branch) -> Vec<&Relation> {
        self.relations.iter().filter(|r| r.branch() == branch).collect()
    }
}

/// Read-only lexical resources shared by every step.
#[derive(Clone, Copy, Debug)]
pub struct Resources<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub lexicon: Option<&'a SentimentLexicon>,
    pub clusters: Option<&'a ClusterModel>,
}

#[derive(Clone, Debug)]
pub struct TrainSpec {
    pub branch: Branch,
    pub hyper: Hyperparams,
    pub opts: TrainOptions,
    /// Surface-feature families to use; empty means distributed-only.
    pub families: Vec<FeatureFamily>,
    /// Features seen in fewer training relations are dropped.
    pub min_count: usize,
    pub seed: u64,
}

impl TrainSpec {
    pub fn new(branch: Branch) -> Self {
        TrainSpec {
            branch,
            hyper: Hyperparams::default(),
            opts: TrainOptions::default(),
            families: FeatureFamily::ablation_schedule(branch),
            min_count: 1,
            seed: 0,
        }
    }
}

/// Every sense attested in the relations, sorted.
pub fn label_set<'a, I: IntoIterator<Item = &'a Relation>>(relations: I) -> Vec<String> {
    let set: BTreeSet<&str> = relations
        .into_iter()
        .flat_map(|r| r.senses.iter().map(String::as_str))
        .collect();
    set.into_iter().map(str::to_string).collect()
}

/// Index of the first gold sense present in `labels`.
pub fn gold_index(r: &Relation, labels: &[String]) -> Option<usize> {
    r.senses.iter().find_map(|s| labels.iter().position(|l| l == s))
}

/// Embedding rows for the kept end of an argument.
pub fn token_ids(tokens: &[Token], table: &EmbeddingTable, max_len: usize, keep: KeepEnd) -> Vec<u32> {
    truncate(tokens, max_len, keep)
        .iter()
        .map(|t| table.resolve(&t.surface).map_or(OOV, |i| i as u32))
        .collect()
}

pub fn featurize(
    relations: &[&Relation],
    parses: Option<&ParseIndex>,
    res: &Resources<'_>,
    families: &[FeatureFamily],
) -> Result<Vec<SparseFeatureVector>> {
    let ctx = FeatureContext {
        lexicon: res.lexicon,
        clusters: res.clusters,
        parses,
    };
    let families: BTreeSet<FeatureFamily> = families.iter().copied().collect();
    relations.iter().map(|r| extract(r, &ctx, &families)).collect()
}

/// One example per relation; `gold` is 0 where the relation carries no
/// label from `labels`.
pub fn build_examples(
    relations: &[&Relation],
    features: &[SparseFeatureVector],
    table: &EmbeddingTable,
    vocab: &FeatureVocab,
    labels: &[String],
    max_len: usize,
) -> Vec<Example> {
    relations
        .iter()
        .zip(features)
        .map(|(r, f)| Example {
            arg1: token_ids(&r.arg1_tokens, table, max_len, KeepEnd::Tail),
            arg2: token_ids(&r.arg2_tokens, table, max_len, KeepEnd::Head),
            surface: active_columns(f, vocab),
            gold: gold_index(r, labels).unwrap_or(0),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: ModelParams,
    pub outcome: TrainOutcome,
}

/// Train the classifier for `spec.branch`. Dev relations whose senses are
/// all unseen in training are left out of the dev loss.
pub fn train_branch(
    train_data: &Dataset,
    dev_data: &Dataset,
    res: &Resources<'_>,
    spec: &TrainSpec,
) -> Result<Trained> {
    spec.hyper.validate()?;
    let train_rels: Vec<&Relation> = train_data
        .branch(spec.branch)
        .into_iter()
        .filter(|r| !r.senses.is_empty())
        .collect();
    if train_rels.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no labelled {} relations for training",
            spec.branch
        )));
    }
    let labels = label_set(train_rels.iter().copied());
    let train_feats = featurize(&train_rels, train_data.parses.as_ref(), res, &spec.families)?;
    let vocab = fit_vocab(&train_feats, spec.min_count.max(1));
    let max_len = spec.opts.max_len;
    let train_set = build_examples(&train_rels, &train_feats, res.embeddings, &vocab, &labels, max_len);

    let dev_rels: Vec<&Relation> = dev_data
        .branch(spec.branch)
        .into_iter()
        .filter(|r| gold_index(r, &labels).is_some())
        .collect();
    let dev_feats = featurize(&dev_rels, dev_data.parses.as_ref(), res, &spec.families)?;
    let dev_set = build_examples(&dev_rels, &dev_feats, res.embeddings, &vocab, &labels, max_len);

    let arch = architecture(
        &spec.hyper,
        res.embeddings.dim(),
        vocab.dim(),
        labels.len(),
        spec.opts.hidden_cap,
    );
    let outcome = train(
        &arch,
        &train_set,
        &dev_set,
        res.embeddings,
        spec.hyper.learning_rate,
        &spec.opts,
        spec.seed,
    )?;
    let model = ModelParams {
        branch: spec.branch,
        network: outcome.network.clone(),
        label_set: labels,
        feature_vocab: vocab,
        families: spec.families.clone(),
        max_len,
    };
    Ok(Trained { model, outcome })
}

/// Predict with one model; every relation must belong to its branch.
pub fn predict_branch(
    model: &ModelParams,
    relations: &[&Relation],
    parses: Option<&ParseIndex>,
    res: &Resources<'_>,
) -> Result<Vec<Prediction>> {
    if let Some(r) = relations.iter().find(|r| r.branch() != model.branch) {
        return Err(Error::WrongBranch(format!(
            "relation {}/{} is {} but the model is {}",
            r.doc_id,
            r.rel_id,
            r.branch(),
            model.branch
        )));
    }
    if res.embeddings.dim() != model.network.arg1.input_dim() {
        return Err(Error::Dimension(format!(
            "embeddings have dimension {}, model expects {}",
            res.embeddings.dim(),
            model.network.arg1.input_dim()
        )));
    }
    let feats = featurize(relations, parses, res, &model.families)?;
    let examples = build_examples(
        relations,
        &feats,
        res.embeddings,
        &model.feature_vocab,
        &[],
        model.max_len,
    );
    relations
        .iter()
        .zip(&examples)
        .map(|(r, ex)| {
            let label = model.network.predict(ex, res.embeddings)?;
            Ok(Prediction {
                doc_id: r.doc_id.clone(),
                rel_id: r.rel_id,
                sense: model.label_set[label].clone(),
            })
        })
        .collect()
}

/// Route each relation to the model of its branch. Output follows input
/// order, one prediction per relation.
pub fn predict_relations(models: &[&ModelParams], data: &Dataset, res: &Resources<'_>) -> Result<Vec<Prediction>> {
    let mut missing: BTreeSet<&str> = BTreeSet::new();
    for r in &data.relations {
        if !models.iter().any(|m| m.branch == r.branch()) {
            missing.insert(r.branch().as_str());
        }
    }
    if !missing.is_empty() {
        let list: Vec<&str> = missing.into_iter().collect();
        return Err(Error::WrongBranch(format!(
            "no model loaded for branch: {}",
            list.join(", ")
        )));
    }
    let mut out: Vec<Option<Prediction>> = vec![None; data.relations.len()];
    for m in models {
        let (idx, rels): (Vec<usize>, Vec<&Relation>) = data
            .relations
            .iter()
            .enumerate()
            .filter(|(_, r)| r.branch() == m.branch)
            .unzip();
        for (i, p) in idx
            .into_iter()
            .zip(predict_branch(m, &rels, data.parses.as_ref(), res)?)
        {
            out[i] = Some(p);
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every branch has a model")).collect())
}

/// Search hyperparameters for one branch, minimizing the best dev
/// cross-entropy of a full training run per trial.
pub fn tune_branch<G>(
    train_data: &Dataset,
    dev_data: &Dataset,
    res: &Resources<'_>,
    base: &TrainSpec,
    budget: usize,
    on_trial: G,
) -> Result<SearchResult>
where
    G: FnMut(&Trial, f64),
{
    let space = SearchSpace::classifier();
    let mut objective = |t: &Trial| -> Result<f64> {
        let hyper = Hyperparams::from_named(t.values.iter().map(|(n, v)| (n.as_str(), *v)))?;
        let spec = TrainSpec { hyper, ..base.clone() };
        Ok(train_branch(train_data, dev_data, res, &spec)?.outcome.best_dev_loss)
    };
    run_search_with(&mut objective, &space, budget, base.seed, on_trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RelType;

    fn rel(id: i64, t: RelType, a1: &[&str], a2: &[&str], sense: &str) -> Relation {
        let toks = |ws: &[&str], s: usize| -> Vec<Token> {
            ws.iter().enumerate().map(|(i, w)| Token::new(*w, "NN", s, i)).collect()
        };
        Relation {
            doc_id: "doc".into(),
            rel_id: id,
            arg1_tokens: toks(a1, 0),
            arg2_tokens: toks(a2, 1),
            connective_tokens: if t == RelType::Explicit {
                toks(&["but"], 1)
            } else {
                vec![]
            },
            connective_raw: if t == RelType::Explicit {
                "but".into()
            } else {
                String::new()
            },
            rel_type: t,
            senses: vec![sense.into()],
        }
    }

    #[test]
    fn labels_and_token_ids() {
        let table = EmbeddingTable::from_entries(2, vec![("the".to_string(), vec![1.0, 0.0])]).unwrap();
        let r = rel(1, RelType::Implicit, &["The", "cat"], &["sat"], "B");
        let r2 = rel(2, RelType::Implicit, &["x"], &["y"], "A");
        assert_eq!(label_set([&r, &r2]), vec!["A", "B"]);
        assert_eq!(token_ids(&r.arg1_tokens, &table, 80, KeepEnd::Tail), vec![0, OOV]);
        assert_eq!(gold_index(&r, &["A".into(), "B".into()]), Some(1));
        assert_eq!(gold_index(&r, &["A".into()]), None);
    }

    #[test]
    fn routing_requires_every_branch() {
        let table = EmbeddingTable::from_entries(2, vec![("a".to_string(), vec![1.0, 0.0])]).unwrap();
        let res = Resources {
            embeddings: &table,
            lexicon: None,
            clusters: None,
        };
        let data = Dataset::new(
            vec![
                rel(1, RelType::Explicit, &["a"], &["a"], "X"),
                rel(2, RelType::Implicit, &["a"], &["a"], "Y"),
            ],
            None,
        );
        let mut spec = TrainSpec::new(Branch::Explicit);
        spec.opts.hidden_cap = Some(2);
        spec.opts.max_epochs = 1;
        let trained = train_branch(&data, &Dataset::default(), &res, &spec).unwrap();
        let err = predict_relations(&[&trained.model], &data, &res).unwrap_err();
        assert!(err.to_string().contains("nonexplicit"), "{err}");
        let only_explicit = Dataset::new(vec![data.relations[0].clone()], None);
        let preds = predict_relations(&[&trained.model], &only_explicit, &res).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].sense, "X");
    }
}
