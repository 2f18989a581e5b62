mod common;

use common::*;
use discsense::corpus::Branch;
use discsense::evalscore::{ablation_report, feature_ablation};
use discsense::features::FeatureFamily;
use discsense::pipeline::{Dataset, Resources, TrainSpec};

fn tiny(branch: Branch) -> TrainSpec {
    let mut spec = TrainSpec::new(branch);
    spec.opts.hidden_cap = Some(2);
    spec.opts.max_epochs = 3;
    spec
}

#[test]
fn one_row_per_schedule_prefix() {
    let s = synth(&SynthSpec::new(40, 13));
    let data = Dataset::new(s.relations(), Some(s.parse_index()));
    let table = embeddings(4, 2);
    let lex = lexicon();
    let res = Resources {
        embeddings: &table,
        lexicon: Some(&lex),
        clusters: None,
    };
    for (branch, rows_expected) in [(Branch::Explicit, 5), (Branch::NonExplicit, 8)] {
        let schedule = FeatureFamily::ablation_schedule(branch);
        let rows = feature_ablation(&data, &data, &res, &schedule, &tiny(branch)).unwrap();
        assert_eq!(rows.len(), rows_expected);
        assert_eq!(rows[0].label, "Distributed only");
        assert!(rows[0].families.is_empty());
        assert_eq!(rows.last().unwrap().families.len(), schedule.len());
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.dev_f1)));
        assert_eq!(ablation_report(&rows).lines().count(), rows_expected + 1);
    }
}

#[test]
fn connective_family_beats_distributed_only() {
    // The synthetic connective is tied to the sense; a small encoder trained
    // briefly on random embeddings is not.
    let mut spec = SynthSpec::new(90, 17);
    spec.explicit_share = 1.0;
    let s = synth(&spec);
    let data = Dataset::new(s.relations(), None);
    let table = embeddings(4, 8);
    let res = Resources {
        embeddings: &table,
        lexicon: None,
        clusters: None,
    };
    let mut base = TrainSpec::new(Branch::Explicit);
    base.opts.hidden_cap = Some(8);
    base.opts.max_epochs = 5;
    let rows = feature_ablation(&data, &data, &res, &[FeatureFamily::Connective], &base).unwrap();
    assert!(rows[1].dev_f1 > rows[0].dev_f1 + 0.2, "{rows:?}");
}

#[test]
fn arg2_trigram_family_beats_distributed_only() {
    // arg2 opens with `cue<k> the market`, so its first-three trigram names
    // the sense; every layer is capped at two units.
    let mut spec = SynthSpec::new(90, 19);
    spec.explicit_share = 0.0;
    spec.fixed_prefix = true;
    let s = synth(&spec);
    let data = Dataset::new(s.relations(), Some(s.parse_index()));
    let table = embeddings(4, 8);
    let res = Resources { embeddings: &table, lexicon: None, clusters: None };
    let mut base = TrainSpec::new(Branch::NonExplicit);
    base.opts.hidden_cap = Some(2);
    base.opts.max_epochs = 5;
    let rows = feature_ablation(&data, &data, &res, &[FeatureFamily::Arg2First3], &base).unwrap();
    assert!(rows[1].dev_f1 > rows[0].dev_f1 + 0.2, "{rows:?}");
}
