//! Shared-task relation and parse file ingestion.

mod ptb;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use ptb::{parse_ptb, production_rules, ParseTree};

/// Placeholder surface used when a relation file's raw text does not align
/// with its token list and no parse is available to supply the words.
pub const UNKNOWN_SURFACE: &str = "<unk>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelType {
    Explicit,
    Implicit,
    EntRel,
    AltLex,
}

impl RelType {
    pub fn parse(s: &str) -> Option<RelType> {
        match s {
            "Explicit" => Some(RelType::Explicit),
            "Implicit" => Some(RelType::Implicit),
            "EntRel" => Some(RelType::EntRel),
            "AltLex" => Some(RelType::AltLex),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelType::Explicit => "Explicit",
            RelType::Implicit => "Implicit",
            RelType::EntRel => "EntRel",
            RelType::AltLex => "AltLex",
        }
    }

    pub fn branch(self) -> Branch {
        match self {
            RelType::Explicit => Branch::Explicit,
            RelType::Implicit | RelType::EntRel | RelType::AltLex => Branch::NonExplicit,
        }
    }
}

/// Which classifier a relation is routed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Explicit,
    NonExplicit,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Explicit => "explicit",
            Branch::NonExplicit => "nonexplicit",
        }
    }

    pub fn parse(s: &str) -> Option<Branch> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "explicit" => Some(Branch::Explicit),
            "nonexplicit" => Some(Branch::NonExplicit),
            _ => None,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub pos: String,
    pub sent_index: usize,
    pub tok_index: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: impl Into<String>, sent_index: usize, tok_index: usize) -> Self {
        Token {
            surface: surface.into(),
            pos: pos.into(),
            sent_index,
            tok_index,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub doc_id: String,
    pub rel_id: i64,
    pub arg1_tokens: Vec<Token>,
    pub arg2_tokens: Vec<Token>,
    pub connective_tokens: Vec<Token>,
    /// Raw connective text as given in the relations file.
    pub connective_raw: String,
    pub rel_type: RelType,
    /// Gold senses; empty for unannotated (prediction-time) input.
    pub senses: Vec<String>,
}

impl Relation {
    pub fn branch(&self) -> Branch {
        self.rel_type.branch()
    }

    /// Serialize in the relations-file layout. Character offsets are not
    /// tracked and are written as zero.
    pub fn to_json(&self) -> Value {
        fn span(tokens: &[Token], raw: Option<&str>) -> Value {
            let list: Vec<Value> = tokens
                .iter()
                .map(|t| json!([0, 0, 0, t.sent_index, t.tok_index]))
                .collect();
            let raw = match raw {
                Some(r) => r.to_string(),
                None => tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
            };
            json!({ "TokenList": list, "RawText": raw })
        }
        json!({
            "DocID": self.doc_id,
            "ID": self.rel_id,
            "Arg1": span(&self.arg1_tokens, None),
            "Arg2": span(&self.arg2_tokens, None),
            "Connective": span(&self.connective_tokens, Some(&self.connective_raw)),
            "Sense": self.senses,
            "Type": self.rel_type.as_str(),
        })
    }
}

#[derive(Deserialize)]
struct RawSpan {
    #[serde(rename = "TokenList", default)]
    token_list: Vec<Vec<i64>>,
    #[serde(rename = "RawText", default)]
    raw_text: String,
}

#[derive(Deserialize)]
struct RawRelation {
    #[serde(rename = "DocID")]
    doc_id: String,
    #[serde(rename = "ID")]
    id: i64,
    #[serde(rename = "Arg1")]
    arg1: RawSpan,
    #[serde(rename = "Arg2")]
    arg2: RawSpan,
    #[serde(rename = "Connective", default)]
    connective: Option<RawSpan>,
    #[serde(rename = "Sense", default)]
    sense: Vec<String>,
    #[serde(rename = "Type")]
    rel_type: String,
}

fn span_tokens(span: &RawSpan, line: usize) -> Result<Vec<Token>> {
    let words: Vec<&str> = span.raw_text.split_whitespace().collect();
    let aligned = words.len() == span.token_list.len();
    span.token_list
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            if entry.len() < 2 || entry[entry.len() - 2] < 0 || entry[entry.len() - 1] < 0 {
                return Err(Error::MalformedLine {
                    line,
                    message: format!("bad TokenList entry {entry:?}"),
                });
            }
            let surface = if aligned { words[i] } else { UNKNOWN_SURFACE };
            Ok(Token::new(
                surface,
                "",
                entry[entry.len() - 2] as usize,
                entry[entry.len() - 1] as usize,
            ))
        })
        .collect()
}

fn parse_relation_line(text: &str, line: usize) -> Result<Relation> {
    let raw: RawRelation = serde_json::from_str(text).map_err(|e| Error::MalformedLine {
        line,
        message: e.to_string(),
    })?;
    let rel_type = RelType::parse(&raw.rel_type).ok_or_else(|| Error::MalformedLine {
        line,
        message: format!("unknown relation type {:?}", raw.rel_type),
    })?;
    let arg1_tokens = span_tokens(&raw.arg1, line)?;
    let arg2_tokens = span_tokens(&raw.arg2, line)?;
    if arg1_tokens.is_empty() {
        return Err(Error::EmptyArgument {
            rel_id: raw.id,
            which: "Arg1",
        });
    }
    if arg2_tokens.is_empty() {
        return Err(Error::EmptyArgument {
            rel_id: raw.id,
            which: "Arg2",
        });
    }
    let (connective_tokens, connective_raw) = match &raw.connective {
        Some(span) => (span_tokens(span, line)?, span.raw_text.clone()),
        None => (Vec::new(), String::new()),
    };
    if rel_type == RelType::Explicit && connective_tokens.is_empty() {
        return Err(Error::MissingConnective { rel_id: raw.id });
    }
    Ok(Relation {
        doc_id: raw.doc_id,
        rel_id: raw.id,
        arg1_tokens,
        arg2_tokens,
        connective_tokens,
        connective_raw,
        rel_type,
        senses: raw.sense,
    })
}

/// Read one relation per non-blank line. Line numbers in errors are 1-based.
pub fn read_relations<R: BufRead>(reader: R) -> Result<Vec<Relation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_relation_line(&line, i + 1)?);
    }
    Ok(out)
}

/// One sentence of a parses document.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceParse {
    /// `None` for the format's empty-parse marker.
    pub tree: Option<ParseTree>,
    /// (surface, POS) per token; POS may be empty.
    pub words: Vec<(String, String)>,
}

/// doc_id → sentences.
pub type ParseIndex = BTreeMap<String, Vec<SentenceParse>>;

fn is_empty_parse(s: &str) -> bool {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    compact.is_empty() || compact == "(())"
}

fn parse_sentence(doc_id: &str, index: usize, sentence: &Value) -> Result<SentenceParse> {
    let tree_str = sentence.get("parsetree").and_then(Value::as_str).unwrap_or("");
    let tree = if is_empty_parse(tree_str) {
        None
    } else {
        Some(parse_ptb(tree_str).map_err(|e| Error::SentenceParse {
            doc_id: doc_id.to_string(),
            sentence: index,
            source: Box::new(e),
        })?)
    };
    let tree_words = tree.as_ref().map(ParseTree::tagged_words).unwrap_or_default();
    let words = match sentence.get("words").and_then(Value::as_array) {
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let surface = w
                    .get(0)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .or_else(|| tree_words.get(j).map(|(s, _)| s.clone()))
                    .unwrap_or_default();
                let pos = w
                    .get(1)
                    .and_then(|attrs| attrs.get("PartOfSpeech"))
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .or_else(|| tree_words.get(j).map(|(_, p)| p.clone()))
                    .unwrap_or_default();
                (surface, pos)
            })
            .collect(),
        None => tree_words,
    };
    Ok(SentenceParse { tree, words })
}

/// Read a parses document: `{DocID: {"sentences": [{"parsetree": ..., "words": ...}]}}`.
pub fn read_parses<R: Read>(reader: R) -> Result<ParseIndex> {
    let doc: Value = serde_json::from_reader(reader)?;
    let docs = doc
        .as_object()
        .ok_or_else(|| Error::MalformedParses("top level is not an object".into()))?;
    let mut index = ParseIndex::new();
    for (doc_id, body) in docs {
        let sentences = body
            .get("sentences")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::MalformedParses(format!("document {doc_id} has no sentences array")))?;
        let parsed = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| parse_sentence(doc_id, i, s))
            .collect::<Result<Vec<_>>>()?;
        index.insert(doc_id.clone(), parsed);
    }
    Ok(index)
}

/// Build the parses-file JSON for the given documents.
pub fn parses_to_json(index: &ParseIndex) -> Value {
    let mut docs = serde_json::Map::new();
    for (doc_id, sentences) in index {
        let sents: Vec<Value> = sentences
            .iter()
            .map(|s| {
                let tree = match &s.tree {
                    Some(t) => format!("( {t} )"),
                    None => "(())".to_string(),
                };
                let words: Vec<Value> = s.words.iter().map(|(w, p)| json!([w, { "PartOfSpeech": p }])).collect();
                json!({ "parsetree": tree, "words": words })
            })
            .collect();
        docs.insert(doc_id.clone(), json!({ "sentences": sents }));
    }
    Value::Object(docs)
}

/// Counters from [`attach_parses`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AttachStats {
    pub tokens: usize,
    pub pos_misses: usize,
}

/// Fill token surfaces and POS tags from the parses by (sentence, token)
/// coordinates. Tokens that cannot be found keep their surface and get an
/// empty POS tag.
pub fn attach_parses(relations: &mut [Relation], parses: &ParseIndex) -> AttachStats {
    let mut stats = AttachStats::default();
    for rel in relations.iter_mut() {
        let doc = parses.get(&rel.doc_id);
        for tok in rel
            .arg1_tokens
            .iter_mut()
            .chain(rel.arg2_tokens.iter_mut())
            .chain(rel.connective_tokens.iter_mut())
        {
            stats.tokens += 1;
            let word = doc
                .and_then(|d| d.get(tok.sent_index))
                .and_then(|s| s.words.get(tok.tok_index));
            match word {
                Some((surface, pos)) => {
                    if !surface.is_empty() {
                        tok.surface = surface.clone();
                    }
                    tok.pos = pos.clone();
                    if pos.is_empty() {
                        stats.pos_misses += 1;
                    }
                }
                None => {
                    tok.pos.clear();
                    stats.pos_misses += 1;
                }
            }
        }
    }
    stats
}

/// Production rules of an argument: for each sentence the argument touches,
/// the rules of the minimal subtree covering the argument's tokens there.
pub fn argument_production_rules(tokens: &[Token], doc: Option<&[SentenceParse]>) -> BTreeSet<String> {
    let mut rules = BTreeSet::new();
    let Some(doc) = doc else {
        return rules;
    };
    let mut spans: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for t in tokens {
        let e = spans.entry(t.sent_index).or_insert((t.tok_index, t.tok_index));
        e.0 = e.0.min(t.tok_index);
        e.1 = e.1.max(t.tok_index);
    }
    for (sent, (first, last)) in spans {
        let Some(tree) = doc.get(sent).and_then(|s| s.tree.as_ref()) else {
            continue;
        };
        if let Some(sub) = tree.covering_subtree(first, last) {
            rules.extend(production_rules(sub));
        }
    }
    rules
}
