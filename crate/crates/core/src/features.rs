//! Surface features for explicit and non-explicit relations.
//!
//! Every feature is binary and lives in a namespace given by its prefix:
//!
//! | prefix  | family                         | branch       |
//! |---------|--------------------------------|--------------|
//! | `conn=` | connective text                | explicit     |
//! | `sent=` | sentiment agreement            | explicit     |
//! | `tri1=` | last three tokens of arg1      | both         |
//! | `tri2=` | first three tokens of arg2     | both         |
//! | `wp=`   | word-cluster pairs             | non-explicit |
//! | `pp=`   | part-of-speech pairs           | non-explicit |
//! | `pr=`   | production-rule pairs          | non-explicit |
//! | `adv=`  | adverb pairs                   | non-explicit |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::corpus::{argument_production_rules, Branch, ParseIndex, Relation, Token};
use crate::embeddings::ClusterModel;
use crate::error::{Error, Result};

const NEGATORS: [&str; 4] = ["not", "never", "no", "n't"];
const ADVERB_TAGS: [&str; 3] = ["RB", "RBR", "RBS"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureFamily {
    Connective,
    Sentiment,
    Arg1Last3,
    Arg2First3,
    WordPairs,
    PosPairs,
    ProductionRules,
    Adverbs,
    /// Placeholder with no defined features; keeps the ablation schedule's
    /// shape.
    Inquirer,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 9] = [
        FeatureFamily::Connective,
        FeatureFamily::Sentiment,
        FeatureFamily::Arg1Last3,
        FeatureFamily::Arg2First3,
        FeatureFamily::WordPairs,
        FeatureFamily::PosPairs,
        FeatureFamily::ProductionRules,
        FeatureFamily::Adverbs,
        FeatureFamily::Inquirer,
    ];

    pub fn prefix(self) -> Option<&'static str> {
        match self {
            FeatureFamily::Connective => Some("conn="),
            FeatureFamily::Sentiment => Some("sent="),
            FeatureFamily::Arg1Last3 => Some("tri1="),
            FeatureFamily::Arg2First3 => Some("tri2="),
            FeatureFamily::WordPairs => Some("wp="),
            FeatureFamily::PosPairs => Some("pp="),
            FeatureFamily::ProductionRules => Some("pr="),
            FeatureFamily::Adverbs => Some("adv="),
            FeatureFamily::Inquirer => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::Connective => "connective",
            FeatureFamily::Sentiment => "sentiment",
            FeatureFamily::Arg1Last3 => "arg1-last3",
            FeatureFamily::Arg2First3 => "arg2-first3",
            FeatureFamily::WordPairs => "word-pairs",
            FeatureFamily::PosPairs => "pos-pairs",
            FeatureFamily::ProductionRules => "production-rules",
            FeatureFamily::Adverbs => "adverbs",
            FeatureFamily::Inquirer => "inquirer",
        }
    }

    /// Row label used in ablation reports.
    pub fn display_label(self) -> &'static str {
        match self {
            FeatureFamily::Connective => "Connective",
            FeatureFamily::Sentiment => "Sentiment",
            FeatureFamily::Arg1Last3 => "Argument 1 last 3",
            FeatureFamily::Arg2First3 => "Argument 2 first 3",
            FeatureFamily::WordPairs => "Word Pairs",
            FeatureFamily::PosPairs => "Parts of Speech",
            FeatureFamily::ProductionRules => "Production Rule",
            FeatureFamily::Adverbs => "Adverbs",
            FeatureFamily::Inquirer => "Inquirer",
        }
    }

    /// Incremental ablation order for a branch.
    pub fn ablation_schedule(branch: Branch) -> Vec<FeatureFamily> {
        use FeatureFamily::*;
        match branch {
            Branch::Explicit => vec![Connective, Sentiment, Arg2First3, Arg1Last3],
            Branch::NonExplicit => vec![
                Arg2First3,
                Arg1Last3,
                WordPairs,
                PosPairs,
                Adverbs,
                Inquirer,
                ProductionRules,
            ],
        }
    }

    /// Every family that applies to a branch.
    pub fn for_branch(branch: Branch) -> BTreeSet<FeatureFamily> {
        Self::ablation_schedule(branch).into_iter().collect()
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature family {s:?}")))
    }
}

/// A set of binary features keyed by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseFeatureVector {
    entries: BTreeMap<String, f64>,
}

impl SparseFeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        self.entries.insert(name.into(), 1.0);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Keep only features belonging to the given families.
    pub fn restrict(&self, families: &BTreeSet<FeatureFamily>) -> SparseFeatureVector {
        let prefixes: Vec<&str> = families.iter().filter_map(|f| f.prefix()).collect();
        SparseFeatureVector {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }
}

/// Word polarities in [-1, 1], keyed by lowercased word.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentimentLexicon {
    polarity: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut polarity = HashMap::new();
        for (i, (w, p)) in entries.into_iter().enumerate() {
            if !p.is_finite() || !(-1.0..=1.0).contains(&p) {
                return Err(Error::Lexicon {
                    line: i + 1,
                    message: format!("polarity {p} outside [-1, 1]"),
                });
            }
            polarity.insert(w.as_ref().to_lowercase(), p);
        }
        Ok(SentimentLexicon { polarity })
    }

    /// `word<TAB>polarity` per line; blank lines and `#` comments skipped.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (word, value) = trimmed.split_once('\t').ok_or_else(|| Error::Lexicon {
                line: i + 1,
                message: "expected word<TAB>polarity".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| Error::Lexicon {
                line: i + 1,
                message: format!("bad polarity {value:?}"),
            })?;
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(Error::Lexicon {
                    line: i + 1,
                    message: format!("polarity {value} outside [-1, 1]"),
                });
            }
            entries.push((word.to_string(), value));
        }
        SentimentLexicon::new(entries)
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.polarity.get(word).copied()
    }
}

/// Sum of lexicon polarities over lowercased tokens; a negator among the two
/// preceding tokens flips a token's polarity.
pub fn sentiment_score(tokens: &[Token], lex: &SentimentLexicon) -> f64 {
    let lowered: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let mut score = 0.0;
    for (i, w) in lowered.iter().enumerate() {
        let Some(p) = lex.polarity(w) else { continue };
        let negated = lowered[i.saturating_sub(2)..i]
            .iter()
            .any(|prev| NEGATORS.contains(&prev.as_str()));
        score += if negated { -p } else { p };
    }
    score
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn join_surfaces(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join("_")
}

fn trigram_features(r: &Relation, out: &mut SparseFeatureVector) {
    let a1 = &r.arg1_tokens;
    let tail = &a1[a1.len().saturating_sub(3)..];
    out.insert(format!("tri1={}", join_surfaces(tail)));
    let a2 = &r.arg2_tokens;
    out.insert(format!("tri2={}", join_surfaces(&a2[..a2.len().min(3)])));
}

fn connective_text(r: &Relation) -> String {
    let raw = if r.connective_raw.trim().is_empty() {
        r.connective_tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        r.connective_raw.clone()
    };
    raw.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase()
}

pub fn explicit_features(r: &Relation, lex: &SentimentLexicon) -> Result<SparseFeatureVector> {
    if r.branch() != Branch::Explicit {
        return Err(Error::WrongBranch(format!(
            "relation {} is {}, not explicit",
            r.rel_id,
            r.rel_type.as_str()
        )));
    }
    let mut out = SparseFeatureVector::new();
    out.insert(format!("conn={}", connective_text(r)));
    let same = sign(sentiment_score(&r.arg1_tokens, lex)) == sign(sentiment_score(&r.arg2_tokens, lex));
    out.insert(if same { "sent=same" } else { "sent=diff" });
    trigram_features(r, &mut out);
    Ok(out)
}

fn pair_features<A: fmt::Display, B: fmt::Display>(
    prefix: &str,
    left: &BTreeSet<A>,
    right: &BTreeSet<B>,
    out: &mut SparseFeatureVector,
) {
    for a in left {
        for b in right {
            out.insert(format!("{prefix}{a}|{b}"));
        }
    }
}

fn adverbs(tokens: &[Token]) -> BTreeSet<String> {
    tokens
        .iter()
        .filter(|t| ADVERB_TAGS.contains(&t.pos.as_str()))
        .map(|t| t.surface.to_lowercase())
        .collect()
}

pub fn nonexplicit_features(
    r: &Relation,
    clusters: Option<&ClusterModel>,
    parses: Option<&ParseIndex>,
) -> Result<SparseFeatureVector> {
    if r.branch() != Branch::NonExplicit {
        return Err(Error::WrongBranch(format!("relation {} is explicit", r.rel_id)));
    }
    let mut out = SparseFeatureVector::new();
    trigram_features(r, &mut out);

    if let Some(clusters) = clusters {
        let ids =
            |toks: &[Token]| -> BTreeSet<usize> { toks.iter().map(|t| clusters.cluster_of(&t.surface)).collect() };
        pair_features("wp=", &ids(&r.arg1_tokens), &ids(&r.arg2_tokens), &mut out);
    }

    let tags = |toks: &[Token]| -> BTreeSet<String> {
        toks.iter()
            .filter(|t| !t.pos.is_empty())
            .map(|t| t.pos.clone())
            .collect()
    };
    pair_features("pp=", &tags(&r.arg1_tokens), &tags(&r.arg2_tokens), &mut out);

    let doc = parses.and_then(|p| p.get(&r.doc_id)).map(Vec::as_slice);
    let rules1 = argument_production_rules(&r.arg1_tokens, doc);
    let rules2 = argument_production_rules(&r.arg2_tokens, doc);
    pair_features("pr=", &rules1, &rules2, &mut out);

    let adv1 = adverbs(&r.arg1_tokens);
    let adv2 = adverbs(&r.arg2_tokens);
    let none: BTreeSet<String> = ["NONE".to_string()].into_iter().collect();
    match (adv1.is_empty(), adv2.is_empty()) {
        (false, false) => pair_features("adv=", &adv1, &adv2, &mut out),
        (false, true) => pair_features("adv=", &adv1, &none, &mut out),
        (true, false) => pair_features("adv=", &none, &adv2, &mut out),
        (true, true) => {}
    }
    Ok(out)
}

/// Shared inputs for feature extraction.
#[derive(Clone, Copy, Debug, Default)]
pub struct FeatureContext<'a> {
    pub lexicon: Option<&'a SentimentLexicon>,
    pub clusters: Option<&'a ClusterModel>,
    pub parses: Option<&'a ParseIndex>,
}

/// Extract the branch-appropriate features and keep the requested families.
pub fn extract(
    r: &Relation,
    ctx: &FeatureContext<'_>,
    families: &BTreeSet<FeatureFamily>,
) -> Result<SparseFeatureVector> {
    let empty = SentimentLexicon::default();
    let all = match r.branch() {
        Branch::Explicit => explicit_features(r, ctx.lexicon.unwrap_or(&empty))?,
        Branch::NonExplicit => nonexplicit_features(r, ctx.clusters, ctx.parses)?,
    };
    Ok(all.restrict(families))
}

/// Feature name → column, fitted on training vectors and frozen afterwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

impl FeatureVocab {
    /// Build from names already in column order.
    pub fn from_names(names: Vec<String>, min_count: usize) -> Result<Self> {
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != names.len() {
            return Err(Error::Config("duplicate feature names in vocabulary".into()));
        }
        Ok(FeatureVocab {
            names,
            index,
            min_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Index features seen in at least `min_count` vectors, in lexicographic
/// order.
pub fn fit_vocab<'a, I>(vectors: I, min_count: usize) -> FeatureVocab
where
    I: IntoIterator<Item = &'a SparseFeatureVector>,
{
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in vectors {
        for name in v.names() {
            *counts.entry(name).or_default() += 1;
        }
    }
    let names = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(n, _)| n.to_string())
        .collect();
    FeatureVocab::from_names(names, min_count).expect("counted names are unique")
}

/// Dense 0/1 encoding; unknown features are ignored.
pub fn vectorize(v: &SparseFeatureVector, vocab: &FeatureVocab) -> Vec<f64> {
    let mut out = vec![0.0; vocab.dim()];
    for (name, value) in v.iter() {
        if let Some(c) = vocab.column(name) {
            out[c] = value;
        }
    }
    out
}

/// Sorted active columns of [`vectorize`]'s output.
pub fn active_columns(v: &SparseFeatureVector, vocab: &FeatureVocab) -> Vec<usize> {
    let mut cols: Vec<usize> = v.names().filter_map(|n| vocab.column(n)).collect();
    cols.sort_unstable();
    cols
}
