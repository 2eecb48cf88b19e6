//! Tab-separated result tables.
//!
//! Every table starts with a header row. Numbers use Rust's shortest
//! round-trip formatting, so tables are byte-stable for equal results.
//!
//! - predictions: `index truth predicted p_<class>...` (class names)
//! - confusion: a `counts` block and a `row_normalized` block, each with a
//!   `truth` column followed by one column per predicted class, then a
//!   `per_class` block (`class recall f1`) and a `macro_f1` line
//! - sweep: `alpha fold macro_f1 recall_<class>... support_<class>...`
//! - saliency: `position_s p_<class>... se_<class>...`, with a first row
//!   named `baseline` for the unmodified epoch

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, Evaluation, SweepRow};
use crate::saliency::SaliencyMap;

fn row(fields: impl IntoIterator<Item = String>) -> String {
    let mut s = fields.into_iter().collect::<Vec<_>>().join("\t");
    s.push('\n');
    s
}

fn prefixed<'a>(prefix: &'a str, vocab: &'a [String]) -> impl Iterator<Item = String> + 'a {
    vocab.iter().map(move |v| format!("{prefix}{v}"))
}

pub fn predictions_table(ev: &Evaluation, vocab: &[String]) -> String {
    let mut out = row(["index", "truth", "predicted"].map(String::from).into_iter().chain(prefixed("p_", vocab)));
    for (i, p) in ev.predictions.iter().enumerate() {
        out += &row(
            [i.to_string(), vocab[p.truth].clone(), vocab[p.predicted].clone()]
                .into_iter()
                .chain(p.probabilities.iter().map(f64::to_string)),
        );
    }
    out
}

pub fn confusion_table(m: &ConfusionMatrix, vocab: &[String]) -> String {
    let header = |title: &str| {
        format!("# {title}\n") + &row(std::iter::once("truth".to_string()).chain(vocab.iter().cloned()))
    };
    let mut out = header("counts");
    for (t, r) in m.rows().iter().enumerate() {
        out += &row(std::iter::once(vocab[t].clone()).chain(r.iter().map(u64::to_string)));
    }
    out += &header("row_normalized");
    for (t, r) in m.row_normalized().iter().enumerate() {
        out += &row(std::iter::once(vocab[t].clone()).chain(r.iter().map(f64::to_string)));
    }
    out += "# per_class\n";
    out += &row(["class", "recall", "f1"].map(String::from));
    for (c, (r, f)) in m.recall().iter().zip(m.f1()).enumerate() {
        out += &row([vocab[c].clone(), r.to_string(), f.to_string()]);
    }
    out += &row(["macro_f1".to_string(), m.macro_f1().to_string()]);
    out
}

pub fn sweep_header(vocab: &[String]) -> String {
    row(["alpha", "fold", "macro_f1"]
        .map(String::from)
        .into_iter()
        .chain(prefixed("recall_", vocab))
        .chain(prefixed("support_", vocab)))
}

pub fn sweep_table(rows: &[SweepRow], vocab: &[String]) -> String {
    let mut out = sweep_header(vocab);
    for r in rows {
        out += &row(
            [r.alpha.to_string(), r.fold.to_string(), r.macro_f1.to_string()]
                .into_iter()
                .chain(r.per_class_recall.iter().map(f64::to_string))
                .chain(r.support.iter().map(u64::to_string)),
        );
    }
    out
}

/// Parses a sweep table back into rows and the class names from its header.
pub fn parse_sweep_table(text: &str) -> Result<(Vec<String>, Vec<SweepRow>)> {
    let bad = |m: String| Error::Format(format!("sweep table: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty".into()))?.split('\t').collect();
    if header.len() < 3 || header[..3] != ["alpha", "fold", "macro_f1"] || (header.len() - 3) % 2 != 0 {
        return Err(bad("unexpected header".into()));
    }
    let k = (header.len() - 3) / 2;
    let vocab: Vec<String> = header[3..3 + k]
        .iter()
        .map(|h| h.strip_prefix("recall_").map(String::from).ok_or_else(|| bad(format!("column `{h}`"))))
        .collect::<Result<_>>()?;
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != header.len() {
                return Err(bad(format!("row has {} fields, header {}", f.len(), header.len())));
            }
            Ok(SweepRow {
                alpha: num(f[0])?,
                fold: f[1].parse().map_err(|e| bad(format!("fold `{}`: {e}", f[1])))?,
                macro_f1: num(f[2])?,
                per_class_recall: f[3..3 + k].iter().map(|s| num(s)).collect::<Result<_>>()?,
                support: f[3 + k..]
                    .iter()
                    .map(|s| s.parse().map_err(|e| bad(format!("support `{s}`: {e}"))))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((vocab, rows))
}

pub fn saliency_table(map: &SaliencyMap, vocab: &[String]) -> String {
    let mut out = row(std::iter::once("position_s".to_string())
        .chain(prefixed("p_", vocab))
        .chain(prefixed("se_", vocab)));
    out += &row(std::iter::once("baseline".to_string())
        .chain(map.baseline_probabilities.iter().map(f64::to_string))
        .chain(map.baseline_probabilities.iter().map(|_| "0".to_string())));
    for ((pos, p), se) in map.positions.iter().zip(&map.mean_probabilities).zip(&map.standard_errors) {
        out += &row(std::iter::once(pos.to_string())
            .chain(p.iter().map(f64::to_string))
            .chain(se.iter().map(f64::to_string)));
    }
    out
}
