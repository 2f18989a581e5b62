//! Synthetic corpora for integration tests.
//!
//! Every relation lives in its own document: sentence 0 holds arg1,
//! sentence 1 holds the connective (explicit only) followed by arg2. The
//! sense is revealed by a cue token `cue<k>` at the start of arg2.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use discsense::corpus::{read_parses, read_relations, ParseIndex, Relation};
use discsense::embeddings::EmbeddingTable;
use discsense::features::SentimentLexicon;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const SENSES: [&str; 4] = [
    "Comparison.Contrast",
    "Contingency.Cause.Result",
    "Expansion.Conjunction",
    "Temporal.Asynchronous.Precedence",
];

pub const FILLER: [&str; 16] = [
    "the", "market", "price", "rose", "fell", "good", "bad", "not", "company", "said", "shares", "quickly", "year",
    "profit", "loss", "also",
];

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    /// Fraction of explicit relations.
    pub explicit_share: f64,
    pub senses: usize,
    /// Place the cue token at the start of arg2; otherwise no cue at all.
    pub cue: bool,
    /// Follow the cue with a fixed `the market` so arg2's first three
    /// tokens are the same for every relation of a sense.
    pub fixed_prefix: bool,
}

impl SynthSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthSpec {
            n,
            seed,
            explicit_share: 0.5,
            senses: 3,
            cue: true,
            fixed_prefix: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Synth {
    pub relations_jsonl: String,
    pub parses: Value,
}

fn tag(word: &str) -> &'static str {
    match word {
        "quickly" | "also" | "not" => "RB",
        "rose" | "fell" | "said" => "VBD",
        "the" => "DT",
        "good" | "bad" => "JJ",
        _ => "NN",
    }
}

/// `(ROOT (S (NP ..) (VP ..)))` over the words with fixed tags.
pub fn tree_for(words: &[String]) -> String {
    let leaf = |w: &String| format!("({} {})", tag(w), w);
    match words.len() {
        0 => "(())".to_string(),
        1 => format!("( (S (NP {})) )", leaf(&words[0])),
        2 => format!("( (S (NP {}) (VP {})) )", leaf(&words[0]), leaf(&words[1])),
        _ => {
            let rest: Vec<String> = words[2..].iter().map(leaf).collect();
            format!(
                "( (S (NP {}) (VP {} (NP {}))) )",
                leaf(&words[0]),
                leaf(&words[1]),
                rest.join(" ")
            )
        }
    }
}

fn span(words: &[String], sent: usize, start: usize) -> Value {
    let list: Vec<Value> = (0..words.len()).map(|i| json!([0, 0, 0, sent, start + i])).collect();
    json!({ "TokenList": list, "RawText": words.join(" ") })
}

pub fn synth(spec: &SynthSpec) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut lines = Vec::with_capacity(spec.n);
    let mut docs = serde_json::Map::new();
    for i in 0..spec.n {
        let sense = i % spec.senses;
        let explicit = rng.gen::<f64>() < spec.explicit_share;
        let rel_type = if explicit {
            "Explicit"
        } else {
            ["Implicit", "EntRel", "AltLex"][i % 3]
        };
        let mut pick = |n: usize| -> Vec<String> {
            (0..n)
                .map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string())
                .collect()
        };
        let len1 = 2 + (i * 7) % 5;
        let len2 = 2 + (i * 5) % 4;
        let arg1 = pick(len1);
        let mut arg2 = pick(len2);
        if spec.fixed_prefix {
            arg2.splice(0..0, ["the".to_string(), "market".to_string()]);
        }
        if spec.cue {
            arg2.insert(0, format!("cue{sense}"));
        }
        let conn: Vec<String> = if explicit {
            vec![["but", "because", "and", "then"][sense % 4].to_string()]
        } else {
            vec![]
        };
        let doc_id = format!("syn{:04}", i);
        let mut s1 = conn.clone();
        s1.extend(arg2.iter().cloned());
        let rel = json!({
            "DocID": doc_id,
            "ID": 1000 + i,
            "Arg1": span(&arg1, 0, 0),
            "Arg2": span(&arg2, 1, conn.len()),
            "Connective": span(&conn, 1, 0),
            "Sense": [SENSES[sense]],
            "Type": rel_type,
        });
        lines.push(rel.to_string());
        let sentence = |ws: &[String]| {
            json!({
                "parsetree": tree_for(ws),
                "words": ws.iter().map(|w| json!([w, {"PartOfSpeech": tag(w)}])).collect::<Vec<_>>(),
            })
        };
        docs.insert(doc_id, json!({ "sentences": [sentence(&arg1), sentence(&s1)] }));
    }
    Synth {
        relations_jsonl: lines.join("\n") + "\n",
        parses: Value::Object(docs),
    }
}

impl Synth {
    pub fn relations(&self) -> Vec<Relation> {
        read_relations(self.relations_jsonl.as_bytes()).expect("synthetic relations parse")
    }

    pub fn parse_index(&self) -> ParseIndex {
        read_parses(self.parses.to_string().as_bytes()).expect("synthetic parses parse")
    }
}

/// Every word the generator can emit.
pub fn vocabulary() -> Vec<String> {
    let mut v: Vec<String> = FILLER.iter().map(|s| s.to_string()).collect();
    v.extend((0..SENSES.len()).map(|k| format!("cue{k}")));
    v.extend(["but", "because", "and", "then"].iter().map(|s| s.to_string()));
    v
}

/// Seeded random embeddings for [`vocabulary`].
pub fn embeddings(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<(String, Vec<f32>)> = vocabulary()
        .into_iter()
        .map(|w| (w, (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()))
        .collect();
    EmbeddingTable::from_entries(dim, entries).expect("valid table")
}

pub fn lexicon() -> SentimentLexicon {
    SentimentLexicon::load("good\t1\nbad\t-1\nprofit\t1\nloss\t-1\n".as_bytes()).expect("valid lexicon")
}

pub struct Fixture {
    pub relations: PathBuf,
    pub parses: PathBuf,
    pub embeddings: PathBuf,
    pub lexicon: PathBuf,
}

/// Write a corpus, its parses, embeddings and a lexicon under `dir` with
/// file names prefixed by `name`.
pub fn write_fixture(dir: &Path, name: &str, spec: &SynthSpec, dim: usize) -> Fixture {
    let s = synth(spec);
    let f = Fixture {
        relations: dir.join(format!("{name}.relations.jsonl")),
        parses: dir.join(format!("{name}.parses.json")),
        embeddings: dir.join("embeddings.bin"),
        lexicon: dir.join("lexicon.tsv"),
    };
    fs::write(&f.relations, &s.relations_jsonl).unwrap();
    fs::write(&f.parses, s.parses.to_string()).unwrap();
    let mut buf = Vec::new();
    embeddings(dim, 99).write_binary(&mut buf).unwrap();
    fs::write(&f.embeddings, buf).unwrap();
    fs::write(&f.lexicon, "good\t1\nbad\t-1\nprofit\t1\nloss\t-1\n").unwrap();
    f
}
