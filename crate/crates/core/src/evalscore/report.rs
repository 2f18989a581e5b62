use super::{Partition, Prf, ScoreReport};
use crate::error::{Error, Result};

const MICRO_LABEL: &str = "Micro-Average";
const HEADER: [&str; 4] = ["Precision", "Recall", "F1", "Support"];
const NUM_WIDTH: usize = 11;

fn label_width(report: &ScoreReport) -> usize {
    report
        .per_sense
        .keys()
        .map(|s| s.chars().count())
        .chain([MICRO_LABEL.len(), "Sense".len()])
        .max()
        .unwrap_or(0)
        + 2
}

fn row(out: &mut String, width: usize, label: &str, cells: &[String]) {
    out.push_str(&format!("{label:<width$}"));
    for c in cells {
        out.push_str(&format!("{c:>NUM_WIDTH$}"));
    }
    out.push('\n');
}

/// Fixed-width table: a partition line, a header, the micro-average row and
/// one row per sense in lexicographic order. Senses without support in the
/// partition show `-`.
pub fn report_table(report: &ScoreReport) -> String {
    let width = label_width(report);
    let mut out = format!("Partition: {}\n", report.partition);
    row(&mut out, width, "Sense", &HEADER.map(String::from));
    let m = &report.micro;
    row(
        &mut out,
        width,
        MICRO_LABEL,
        &[
            format!("{:.4}", m.precision),
            format!("{:.4}", m.recall),
            format!("{:.4}", m.f1),
            report.gold.to_string(),
        ],
    );
    for (sense, s) in &report.per_sense {
        let cells = if s.support == 0 {
            ["-", "-", "-", "0"].map(String::from)
        } else {
            [
                format!("{:.4}", s.precision),
                format!("{:.4}", s.recall),
                format!("{:.4}", s.f1),
                s.support.to_string(),
            ]
        };
        row(&mut out, width, sense, &cells);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub sense: String,
    /// `None` for a `-` row.
    pub scores: Option<Prf>,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedReport {
    pub partition: Partition,
    pub micro: Prf,
    pub gold: usize,
    pub rows: Vec<ParsedRow>,
}

/// Read back a table produced by [`report_table`].
pub fn parse_report_table(text: &str) -> Result<ParsedReport> {
    let bad = |m: String| Error::Report(m);
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| bad("empty table".into()))?;
    let name = first
        .strip_prefix("Partition: ")
        .ok_or_else(|| bad("missing partition line".into()))?;
    let partition = Partition::parse(name.trim()).ok_or_else(|| bad(format!("unknown partition {name:?}")))?;
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 5 || header[0] != "Sense" || header[1..] != HEADER {
        return Err(bad("bad header".into()));
    }
    let mut micro = None;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad(format!("row {}: expected 5 fields", i + 1)));
        }
        let support: usize = fields[4]
            .parse()
            .map_err(|_| bad(format!("row {}: bad support {:?}", i + 1, fields[4])))?;
        let scores = if fields[1..4] == ["-", "-", "-"] {
            None
        } else {
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: bad number {s:?}", i + 1)))
            };
            Some(Prf {
                precision: num(fields[1])?,
                recall: num(fields[2])?,
                f1: num(fields[3])?,
            })
        };
        if i == 0 {
            if fields[0] != MICRO_LABEL {
                return Err(bad("first row must be the micro average".into()));
            }
            micro = Some((scores.ok_or_else(|| bad("micro row has no values".into()))?, support));
        } else {
            rows.push(ParsedRow {
                sense: fields[0].to_string(),
                scores,
                support,
            });
        }
    }
    let (micro, gold) = micro.ok_or_else(|| bad("missing micro row".into()))?;
    Ok(ParsedReport {
        partition,
        micro,
        gold,
        rows,
    })
}
