use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{EvalError, MergedReport, TopicReport};
use crate::fsutil::write_atomic;

fn io_err(path: &Path, e: impl ToString) -> EvalError {
    EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Validation(format!("{}: {e}", path.display())))
}

/// Reads a topic report and checks it against its own scores.
pub fn read_topic_report(path: &Path) -> Result<TopicReport, EvalError> {
    let r: TopicReport = read_json(path)?;
    r.validate()?;
    Ok(r)
}

pub fn read_merged_report(path: &Path) -> Result<MergedReport, EvalError> {
    let r: MergedReport = read_json(path)?;
    r.validate()?;
    Ok(r)
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

/// Aligned text table: one row per topic with F1, Ma-F1, AUC, Acc, then the
/// micro-F1 when given.
pub fn render_table(reports: &[TopicReport], micro_f1: Option<f64>) -> String {
    let mut rows: Vec<[String; 5]> = vec![["Topic".into(), "F1".into(), "Ma-F1".into(), "AUC".into(), "Acc".into()]];
    for r in reports {
        rows.push([
            r.topic.display_name().to_string(),
            pct(Some(r.f1)),
            pct(Some(r.macro_f1)),
            pct(r.auc),
            pct(Some(r.acc)),
        ]);
    }
    let mut widths = [0usize; 5];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (cell, w) in row.iter().zip(widths).skip(1) {
            let _ = write!(line, "  {cell:>w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if let Some(m) = micro_f1 {
        let _ = writeln!(out, "Micro F1: {m:.2}");
    }
    out
}

/// CSV with one row per topic at full precision, plus a `micro` row.
pub fn render_csv(reports: &[TopicReport], micro_f1: Option<f64>) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| EvalError::Validation(e.to_string());
    w.write_record(["topic", "f1", "macro_f1", "auc", "acc", "tp", "fp", "fn", "tn"]).map_err(fail)?;
    for r in reports {
        w.write_record([
            r.topic.as_str().to_string(),
            r.f1.to_string(),
            r.macro_f1.to_string(),
            r.auc.map(|a| a.to_string()).unwrap_or_default(),
            r.acc.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.fn_.to_string(),
            r.counts.tn.to_string(),
        ])
        .map_err(fail)?;
    }
    if let Some(m) = micro_f1 {
        w.write_record(["micro", &m.to_string(), "", "", "", "", "", "", ""]).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{StanceLabel, Topic};
    use crate::evaluation::{merge_micro_f1, ScoredExample};

    fn report(topic: Topic) -> TopicReport {
        let scores = (0..4)
            .map(|i| ScoredExample {
                id: format!("{topic}-{i}"),
                prob_support: [0.9, 0.2, 0.6, 0.1][i],
                gold: if i < 2 { StanceLabel::Support } else { StanceLabel::Oppose },
            })
            .collect();
        TopicReport::from_scores(topic, scores).unwrap()
    }

    #[test]
    fn table_layout() {
        let r = report(Topic::GunControl);
        let t = render_table(&[r], Some(50.0));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Topic           F1  Ma-F1    AUC    Acc");
        assert_eq!(lines[1], "Gun Control  50.00  50.00  75.00  50.00");
        assert_eq!(lines[2], "Micro F1: 50.00");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let merged = merge_micro_f1(&[report(Topic::GunControl), report(Topic::Abortion)]).unwrap();
        let csv = render_csv(&merged.topics, Some(merged.micro_f1)).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("topic,f1,macro_f1,auc,acc,tp,fp,fn,tn\ngun_control,50,50,75,50,1,1,1,1\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("merged.json");
        write_json(&path, &merged).unwrap();
        assert_eq!(read_merged_report(&path).unwrap(), merged);
        std::fs::write(&path, r#"{"topics":[],"pooled":{"tp":0,"fp":0,"fn":0,"tn":0},"micro_f1":0,"extra":1}"#).unwrap();
        assert!(read_merged_report(&path).is_err());
    }
}
