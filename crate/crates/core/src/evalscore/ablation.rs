use serde::Serialize;

use super::{score, Partition};
use crate::error::Result;
use crate::features::FeatureFamily;
use crate::pipeline::{predict_branch, train_branch, Dataset, Resources, TrainSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub families: Vec<String>,
    pub dev_f1: f64,
}

/// Train one model per prefix of `schedule`, starting from the
/// distributed-only model, and score each on the dev relations of the
/// branch. Prefix `i` trains with seed `base.seed + i`.
pub fn feature_ablation(
    train: &Dataset,
    dev: &Dataset,
    res: &Resources<'_>,
    schedule: &[FeatureFamily],
    base: &TrainSpec,
) -> Result<Vec<AblationRow>> {
    let dev_rels = dev.branch(base.branch);
    let gold: Vec<_> = dev_rels.iter().map(|r| (*r).clone()).collect();
    let mut rows = Vec::with_capacity(schedule.len() + 1);
    for i in 0..=schedule.len() {
        let families = schedule[..i].to_vec();
        let spec = TrainSpec {
            families: families.clone(),
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let trained = train_branch(train, dev, res, &spec)?;
        let preds = predict_branch(&trained.model, &dev_rels, dev.parses.as_ref(), res)?;
        let report = score(&preds, &gold, Partition::from(base.branch))?;
        let label = if i == 0 {
            "Distributed only".to_string()
        } else {
            format!("+ {}", schedule[i - 1].display_label())
        };
        rows.push(AblationRow {
            label,
            families: families.iter().map(|f| f.name().to_string()).collect(),
            dev_f1: report.micro.f1,
        });
    }
    Ok(rows)
}

/// Two-column text table of feature set and dev F1 (4 decimals).
pub fn ablation_report(rows: &[AblationRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.len())
        .chain(["Features".len()])
        .max()
        .unwrap_or(0)
        + 2;
    let mut out = format!("{:<width$}{:>8}\n", "Features", "Dev F1");
    for r in rows {
        out.push_str(&format!("{:<width$}{:>8.4}\n", r.label, r.dev_f1));
    }
    out
}
