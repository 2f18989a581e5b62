//! Sense-classification scoring: micro-averaged and per-sense precision,
//! recall and F1 over explicit, non-explicit or all relations.

mod ablation;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Branch, Relation};
use crate::error::{Error, Result};

pub use ablation::{ablation_report, feature_ablation, AblationRow};
pub use report::{parse_report_table, report_table, ParsedReport, ParsedRow};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "DocID")]
    pub doc_id: String,
    #[serde(rename = "ID")]
    pub rel_id: i64,
    #[serde(rename = "Sense")]
    pub sense: String,
}

/// One JSON object per line; blank lines are skipped.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction =
            serde_json::from_str(&line).map_err(|e| Error::Scoring(format!("predictions line {}: {e}", i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(preds: &[Prediction], mut w: W) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    All,
    Explicit,
    NonExplicit,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::All, Partition::Explicit, Partition::NonExplicit];

    pub fn contains(self, r: &Relation) -> bool {
        match self {
            Partition::All => true,
            Partition::Explicit => r.branch() == Branch::Explicit,
            Partition::NonExplicit => r.branch() == Branch::NonExplicit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Partition::All => "All",
            Partition::Explicit => "Explicit",
            Partition::NonExplicit => "NonExplicit",
        }
    }

    pub fn parse(s: &str) -> Option<Partition> {
        Partition::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl From<Branch> for Partition {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Explicit => Partition::Explicit,
            Branch::NonExplicit => Partition::NonExplicit,
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Precision is 1 when nothing was predicted; recall is 0 when nothing
    /// was expected.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        Prf {
            precision,
            recall,
            // count form is exact when fp == fn, where p == r
            f1: if 2 * tp + fp + fn_ == 0 {
                harmonic(precision, recall)
            } else {
                (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
            },
        }
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SenseScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold relations in the partition carrying this sense.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub partition: Partition,
    pub micro: Prf,
    pub per_sense: BTreeMap<String, SenseScore>,
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

/// Score predictions against gold relations restricted to `partition`.
///
/// A prediction is correct when its sense is among the relation's gold
/// senses. A wrong prediction is a false positive for the predicted sense
/// and a false negative for every gold sense; an unpredicted relation is a
/// false negative for every gold sense. Rows are kept for every sense seen
/// anywhere in `gold`, so partitions line up.
pub fn score(predictions: &[Prediction], gold: &[Relation], partition: Partition) -> Result<ScoreReport> {
    let mut by_id: HashMap<(&str, i64), &Relation> = HashMap::new();
    for r in gold {
        if by_id.insert((r.doc_id.as_str(), r.rel_id), r).is_some() {
            return Err(Error::Scoring(format!(
                "duplicate gold relation {}/{}",
                r.doc_id, r.rel_id
            )));
        }
    }
    let mut seen: HashSet<(&str, i64)> = HashSet::new();
    let mut per_sense: BTreeMap<String, SenseScore> = BTreeMap::new();
    for r in gold {
        for s in &r.senses {
            per_sense.entry(s.clone()).or_default();
        }
    }
    let (mut predicted, mut correct) = (0, 0);
    for p in predictions {
        let key = (p.doc_id.as_str(), p.rel_id);
        let r = by_id
            .get(&key)
            .ok_or_else(|| Error::Scoring(format!("prediction for unknown relation {}/{}", p.doc_id, p.rel_id)))?;
        if !seen.insert(key) {
            return Err(Error::Scoring(format!(
                "duplicate prediction for relation {}/{}",
                p.doc_id, p.rel_id
            )));
        }
        if !partition.contains(r) {
            continue;
        }
        predicted += 1;
        if r.senses.iter().any(|s| s == &p.sense) {
            correct += 1;
            per_sense.entry(p.sense.clone()).or_default().tp += 1;
        } else {
            per_sense.entry(p.sense.clone()).or_default().fp += 1;
            for s in dedup(&r.senses) {
                per_sense.entry(s.to_string()).or_default().fn_ += 1;
            }
        }
    }
    let mut n_gold = 0;
    for r in gold.iter().filter(|r| partition.contains(r)) {
        n_gold += 1;
        for s in dedup(&r.senses) {
            per_sense.entry(s.to_string()).or_default().support += 1;
        }
        if !seen.contains(&(r.doc_id.as_str(), r.rel_id)) {
            for s in dedup(&r.senses) {
                per_sense.entry(s.to_string()).or_default().fn_ += 1;
            }
        }
    }
    for s in per_sense.values_mut() {
        let prf = Prf::from_counts(s.tp, s.fp, s.fn_);
        s.precision = prf.precision;
        s.recall = prf.recall;
        s.f1 = prf.f1;
    }
    let precision = if predicted == 0 {
        1.0
    } else {
        correct as f64 / predicted as f64
    };
    let recall = if n_gold == 0 {
        0.0
    } else {
        correct as f64 / n_gold as f64
    };
    Ok(ScoreReport {
        partition,
        micro: Prf {
            precision,
            recall,
            // exact when predicted == gold, where p == r
            f1: if predicted + n_gold == 0 {
                harmonic(precision, recall)
            } else {
                (2 * correct) as f64 / (predicted + n_gold) as f64
            },
        },
        per_sense,
        gold: n_gold,
        predicted,
        correct,
    })
}

fn dedup(senses: &[String]) -> BTreeSet<&str> {
    senses.iter().map(String::as_str).collect()
}

/// Reports for All, Explicit and NonExplicit.
pub fn score_all(predictions: &[Prediction], gold: &[Relation]) -> Result<Vec<ScoreReport>> {
    Partition::ALL.iter().map(|&p| score(predictions, gold, p)).collect()
}
