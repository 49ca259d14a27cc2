//! Run records, CSV output, and nearest-rank aggregation.
//!
//! Every CSV starts with the same fixed header, [`RECORD_HEADER`]. Values
//! are written with Rust's shortest round-trip float formatting, so a
//! re-run with the same config and seed produces byte-identical files.
//! Non-finite values appear as `inf`, `-inf`, or `NaN`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{LabError, Result};

pub const RECORD_HEADER: [&str; 6] = ["experiment", "seed", "method", "step", "metric", "value"];
pub const AGGREGATE_HEADER: [&str; 7] = ["experiment", "method", "step", "metric", "median", "q25", "q75"];

/// Which seed a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SeedLabel {
    Seed(u64),
    /// A cross-seed summary row.
    All,
}

impl fmt::Display for SeedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedLabel::Seed(s) => write!(f, "{s}"),
            SeedLabel::All => f.write_str("all"),
        }
    }
}

/// One metric value of one run at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub seed: SeedLabel,
    pub method: String,
    pub step: usize,
    pub metric: String,
    pub value: f64,
}

impl RunRecord {
    pub fn new(
        experiment: &str,
        seed: SeedLabel,
        method: &str,
        step: usize,
        metric: &str,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            method: method.to_string(),
            step,
            metric: metric.to_string(),
            value,
        }
    }

    fn fields(&self) -> [String; 6] {
        [
            self.experiment.clone(),
            self.seed.to_string(),
            self.method.clone(),
            self.step.to_string(),
            self.metric.clone(),
            format_value(self.value),
        ]
    }
}

pub fn format_value(value: f64) -> String {
    format!("{value}")
}

pub fn flag(value: bool) -> f64 {
    if value {
        1.0
    } else {
        0.0
    }
}

/// Serializes records, header first, in the order given.
pub fn to_csv_bytes(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RECORD_HEADER)?;
    for record in records {
        writer.write_record(record.fields())?;
    }
    writer
        .into_inner()
        .map_err(|e| LabError::Csv(e.into_error().into()))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let bytes = to_csv_bytes(records)?;
    std::fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

/// Nearest-rank quantile of a sorted, non-empty slice: the element at index
/// `ceil(p * n) - 1`, clamped to the slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Median and quartiles of one (method, step, metric) cell across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub experiment: String,
    pub method: String,
    pub step: usize,
    pub metric: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Groups per-seed records by (method, step, metric) and reduces each group
/// with [`nearest_rank`]. Summary rows (`SeedLabel::All`) are skipped. Rows
/// come out with methods in first-seen order, then by step and metric.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut method_order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize, &str), (&str, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.seed != SeedLabel::All) {
        let m = match method_order.iter().position(|m| *m == r.method) {
            Some(i) => i,
            None => {
                method_order.push(&r.method);
                method_order.len() - 1
            }
        };
        groups
            .entry((m, r.step, &r.metric))
            .or_insert_with(|| (&r.experiment, Vec::new()))
            .1
            .push(r.value);
    }
    groups
        .into_iter()
        .map(|((m, step, metric), (experiment, mut values))| {
            values.sort_by(f64::total_cmp);
            AggregateRow {
                experiment: experiment.to_string(),
                method: method_order[m].to_string(),
                step,
                metric: metric.to_string(),
                median: nearest_rank(&values, 0.5),
                q25: nearest_rank(&values, 0.25),
                q75: nearest_rank(&values, 0.75),
            }
        })
        .collect()
}

pub fn aggregate_to_csv_bytes(rows: &[AggregateRow]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(AGGREGATE_HEADER)?;
    for row in rows {
        writer.write_record([
            row.experiment.clone(),
            row.method.clone(),
            row.step.to_string(),
            row.metric.clone(),
            format_value(row.median),
            format_value(row.q25),
            format_value(row.q75),
        ])?;
    }
    writer
        .into_inner()
        .map_err(|e| LabError::Csv(e.into_error().into()))
}

/// Looks up the aggregate row of `(method, step, metric)`.
pub fn find_aggregate<'a>(
    rows: &'a [AggregateRow],
    method: &str,
    step: usize,
    metric: &str,
) -> Option<&'a AggregateRow> {
    rows.iter()
        .find(|r| r.method == method && r.step == step && r.metric == metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_rule() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(nearest_rank(&v, 0.5), 3.0);
        assert_eq!(nearest_rank(&v, 0.25), 2.0);
        assert_eq!(nearest_rank(&v, 0.75), 4.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&v, 1.0), 5.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert_eq!(nearest_rank(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn csv_header_and_formatting() {
        let records = [
            RunRecord::new("aliasing", SeedLabel::Seed(3), "mnm", 0, "success", 1.0),
            RunRecord::new("aliasing", SeedLabel::All, "mnm", 0, "steps", f64::INFINITY),
            RunRecord::new("aliasing", SeedLabel::Seed(3), "mnm", 10, "return", 0.1 + 0.2),
        ];
        let text = String::from_utf8(to_csv_bytes(&records).unwrap()).unwrap();
        assert_eq!(
            text,
            "experiment,seed,method,step,metric,value\n\
             aliasing,3,mnm,0,success,1\n\
             aliasing,all,mnm,0,steps,inf\n\
             aliasing,3,mnm,10,return,0.30000000000000004\n"
        );
    }

    #[test]
    fn aggregation_groups_by_method_step_metric() {
        let mut records = Vec::new();
        for (seed, v) in [(0, 5.0), (1, 1.0), (2, 3.0), (3, f64::INFINITY)] {
            records.push(RunRecord::new("x", SeedLabel::Seed(seed), "q-learning", 10, "return", v));
            records.push(RunRecord::new("x", SeedLabel::Seed(seed), "mnm", 10, "return", 2.0 * v));
        }
        records.push(RunRecord::new("x", SeedLabel::All, "mnm", 10, "return", -1.0));
        let rows = aggregate(&records);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, "q-learning");
        assert_eq!((rows[0].q25, rows[0].median, rows[0].q75), (1.0, 3.0, 5.0));
        assert_eq!(rows[1].median, 6.0);
        let text = String::from_utf8(aggregate_to_csv_bytes(&rows).unwrap()).unwrap();
        assert!(text.starts_with("experiment,method,step,metric,median,q25,q75\nx,q-learning,10,return,3,1,5\n"));
    }
}
