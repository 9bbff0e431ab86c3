//! Batch reports and the ablation table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::run::{Method, RunSummary};
use super::PipelineError;

/// Dataset label used for inputs directly inside the batch directory.
pub const ROOT_DATASET: &str = ".";
/// Label of the all-images aggregate.
pub const TOTAL_LABEL: &str = "Total";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub name: String,
    pub input_score: f64,
    pub input_mask_loss: f64,
    pub input_total: f64,
    pub optimized_score: f64,
    pub optimized_mask_loss: f64,
    pub optimized_total: f64,
    pub evaluations: usize,
}

impl ReportRow {
    pub fn from_summary(dataset: &str, summary: &RunSummary) -> Self {
        Self {
            dataset: dataset.to_string(),
            name: summary.scene.clone(),
            input_score: summary.input.score,
            input_mask_loss: summary.input.mask_loss,
            input_total: summary.input.total,
            optimized_score: summary.optimized.score,
            optimized_mask_loss: summary.optimized.mask_loss,
            optimized_total: summary.optimized.total,
            evaluations: summary.evaluations,
        }
    }
}

/// Means over the rows of one dataset, or over all rows for [`TOTAL_LABEL`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetAggregate {
    pub dataset: String,
    pub images: usize,
    pub input_score: f64,
    pub input_mask_loss: f64,
    pub input_total: f64,
    pub optimized_score: f64,
    pub optimized_mask_loss: f64,
    pub optimized_total: f64,
    pub evaluations: f64,
}

impl DatasetAggregate {
    fn of(dataset: &str, rows: &[&ReportRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            dataset: dataset.to_string(),
            images: rows.len(),
            input_score: mean(|r| r.input_score),
            input_mask_loss: mean(|r| r.input_mask_loss),
            input_total: mean(|r| r.input_total),
            optimized_score: mean(|r| r.optimized_score),
            optimized_mask_loss: mean(|r| r.optimized_mask_loss),
            optimized_total: mean(|r| r.optimized_total),
            evaluations: mean(|r| r.evaluations as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub dataset: String,
    pub name: String,
    pub kind: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRecord {
    pub dataset: String,
    pub name: String,
    pub wall_time_secs: f64,
}

/// Per-image rows plus per-dataset means. Wall times are kept out of the
/// report so that it is reproducible byte for byte; they live in `timings.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<DatasetAggregate>,
    pub failures: Vec<FailureRecord>,
}

/// Groups items by dataset, datasets in sorted order.
fn group<T>(items: &[T], dataset: impl Fn(&T) -> &str) -> BTreeMap<&str, Vec<&T>> {
    let mut map: BTreeMap<&str, Vec<&T>> = BTreeMap::new();
    for it in items {
        map.entry(dataset(it)).or_default().push(it);
    }
    map
}

#[derive(Serialize)]
struct CsvLine<'a> {
    kind: &'a str,
    dataset: &'a str,
    name: &'a str,
    images: Option<usize>,
    input_score: Option<f64>,
    input_mask_loss: Option<f64>,
    input_total: Option<f64>,
    optimized_score: Option<f64>,
    optimized_mask_loss: Option<f64>,
    optimized_total: Option<f64>,
    evaluations: Option<f64>,
    error: &'a str,
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::output(path, e)
}

impl RunReport {
    pub fn new(rows: Vec<ReportRow>, failures: Vec<FailureRecord>) -> Self {
        let mut aggregates: Vec<DatasetAggregate> = group(&rows, |r| r.dataset.as_str())
            .into_iter()
            .map(|(d, rs)| DatasetAggregate::of(d, &rs))
            .collect();
        if !rows.is_empty() {
            let all: Vec<&ReportRow> = rows.iter().collect();
            aggregates.push(DatasetAggregate::of(TOTAL_LABEL, &all));
        }
        Self {
            rows,
            aggregates,
            failures,
        }
    }

    /// One CSV table: `image` rows, then `mean` rows, then `failure` rows.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvLine {
                kind: "image",
                dataset: &r.dataset,
                name: &r.name,
                images: None,
                input_score: Some(r.input_score),
                input_mask_loss: Some(r.input_mask_loss),
                input_total: Some(r.input_total),
                optimized_score: Some(r.optimized_score),
                optimized_mask_loss: Some(r.optimized_mask_loss),
                optimized_total: Some(r.optimized_total),
                evaluations: Some(r.evaluations as f64),
                error: "",
            })?;
        }
        for a in &self.aggregates {
            w.serialize(CsvLine {
                kind: "mean",
                dataset: &a.dataset,
                name: "",
                images: Some(a.images),
                input_score: Some(a.input_score),
                input_mask_loss: Some(a.input_mask_loss),
                input_total: Some(a.input_total),
                optimized_score: Some(a.optimized_score),
                optimized_mask_loss: Some(a.optimized_mask_loss),
                optimized_total: Some(a.optimized_total),
                evaluations: Some(a.evaluations),
                error: "",
            })?;
        }
        for f in &self.failures {
            w.serialize(CsvLine {
                kind: "failure",
                dataset: &f.dataset,
                name: &f.name,
                images: None,
                input_score: None,
                input_mask_loss: None,
                input_total: None,
                optimized_score: None,
                optimized_mask_loss: None,
                optimized_total: None,
                evaluations: None,
                error: &f.error,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::output(dir, e))?;
        let path = dir.join("report.csv");
        let text = self.to_csv().map_err(|e| csv_error(&path, e))?;
        std::fs::write(&path, text).map_err(|e| PipelineError::output(&path, e))?;
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(self).map_err(|e| PipelineError::output(&path, e))?;
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| PipelineError::output(&path, e))
    }
}

pub fn write_timings(dir: &Path, timings: &[TimingRecord]) -> Result<(), PipelineError> {
    let path = dir.join("timings.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in timings {
        w.serialize(t).map_err(|e| csv_error(&path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_error(&path, e.into_error()))?;
    std::fs::write(&path, bytes).map_err(|e| PipelineError::output(&path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub method: Method,
    /// Mean best total per dataset, in the table's dataset order.
    pub cells: Vec<f64>,
    /// Image-weighted mean over every dataset.
    pub total: f64,
}

/// Rows are methods, columns are datasets plus an all-images column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationTable {
    pub datasets: Vec<String>,
    pub rows: Vec<AblationRow>,
    pub failures: Vec<FailureRecord>,
}

impl AblationTable {
    /// Builds the table from per-image best totals in [`Method::ALL`] order.
    pub fn from_images(images: &[(String, [f64; 4])], failures: Vec<FailureRecord>) -> Self {
        let groups = group(images, |(d, _)| d.as_str());
        let datasets: Vec<String> = groups.keys().map(|d| d.to_string()).collect();
        let mean = |items: &[&(String, [f64; 4])], m: usize| {
            items.iter().map(|(_, v)| v[m]).sum::<f64>() / items.len() as f64
        };
        let all: Vec<&(String, [f64; 4])> = images.iter().collect();
        let rows = Method::ALL
            .iter()
            .enumerate()
            .map(|(m, &method)| AblationRow {
                method,
                cells: groups.values().map(|items| mean(items, m)).collect(),
                total: if all.is_empty() { f64::NAN } else { mean(&all, m) },
            })
            .collect();
        Self {
            datasets,
            rows,
            failures,
        }
    }

    pub fn row(&self, method: Method) -> &AblationRow {
        self.rows.iter().find(|r| r.method == method).expect("every method has a row")
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.datasets.iter().cloned());
        header.push(TOTAL_LABEL.to_string());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.method.label().to_string()];
            rec.extend(r.cells.iter().map(|v| v.to_string()));
            rec.push(r.total.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Plain-text table with right-aligned numeric columns, four decimals.
    pub fn to_text(&self) -> String {
        let mut header = vec!["method".to_string()];
        header.extend(self.datasets.iter().cloned());
        header.push(TOTAL_LABEL.to_string());
        let mut lines: Vec<Vec<String>> = vec![header];
        for r in &self.rows {
            let mut line = vec![r.method.label().to_string()];
            line.extend(r.cells.iter().map(|v| format!("{v:.4}")));
            line.push(format!("{:.4}", r.total));
            lines.push(line);
        }
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, line) in lines.iter().enumerate() {
            let mut text = format!("{:<w$}", line[0], w = widths[0]);
            for c in 1..cols {
                let _ = write!(text, "  {:>w$}", line[c], w = widths[c]);
            }
            out.push_str(text.trim_end());
            out.push('\n');
            if i == 0 {
                let rule: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
                out.push_str(&"-".repeat(rule));
                out.push('\n');
            }
        }
        out
    }

    /// Writes `ablation.csv`, `ablation.txt` and `ablation.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::output(dir, e))?;
        let path = dir.join("ablation.csv");
        let csv = self.to_csv().map_err(|e| csv_error(&path, e))?;
        std::fs::write(&path, csv).map_err(|e| PipelineError::output(&path, e))?;
        let path = dir.join("ablation.txt");
        std::fs::write(&path, self.to_text()).map_err(|e| PipelineError::output(&path, e))?;
        let path = dir.join("ablation.json");
        let mut json = serde_json::to_string_pretty(self).map_err(|e| PipelineError::output(&path, e))?;
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| PipelineError::output(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: &str, name: &str, input: f64, optimized: f64) -> ReportRow {
        ReportRow {
            dataset: dataset.into(),
            name: name.into(),
            input_score: input,
            input_mask_loss: 0.0,
            input_total: input,
            optimized_score: optimized,
            optimized_mask_loss: 0.0,
            optimized_total: optimized,
            evaluations: 10,
        }
    }

    #[test]
    fn aggregates_are_row_means() {
        let report = RunReport::new(
            vec![row("b", "x", 1.0, 2.0), row("a", "y", 0.5, 0.75), row("b", "z", 2.0, 3.0)],
            vec![],
        );
        let names: Vec<&str> = report.aggregates.iter().map(|a| a.dataset.as_str()).collect();
        assert_eq!(names, ["a", "b", TOTAL_LABEL]);
        assert_eq!(report.aggregates[1].input_total, 1.5);
        assert!((report.aggregates[2].optimized_total - 5.75 / 3.0).abs() < 1e-12);
        assert_eq!(report.aggregates[2].images, 3);
    }

    #[test]
    fn csv_lists_rows_means_and_failures() {
        let report = RunReport::new(
            vec![row(".", "x", 1.0, 2.0)],
            vec![FailureRecord {
                dataset: ".".into(),
                name: "bad".into(),
                kind: "unreadable_input".into(),
                error: "broken, badly".into(),
            }],
        );
        let csv = report.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("kind,dataset,name,images,"));
        assert!(lines[1].starts_with("image,.,x,,1.0,"));
        assert!(lines[4].starts_with("failure,.,bad,") && lines[4].ends_with("\"broken, badly\""));
    }

    #[test]
    fn single_image_table_is_four_by_one_and_echoes_values() {
        let t = AblationTable::from_images(&[(".".into(), [0.5, 0.75, 1.25, 1.5])], vec![]);
        assert_eq!(t.datasets, ["."]);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.row(Method::Cma).cells, vec![1.25]);
        assert_eq!(t.row(Method::CmaScaling).total, 1.5);
        let text = t.to_text();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(5).unwrap().starts_with("CMA-ES + scaling"));
        assert_eq!(t.to_csv().unwrap().lines().next(), Some("method,.,Total"));
    }
}
