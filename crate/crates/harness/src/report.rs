//! Merges study outputs into one summary table, with imported reference
//! rows for context and the distance of each (MAE, 0-1) pair from the origin.

use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::output::{optional, Table};
use crate::study::RESULTS_HEADER;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_SCATTER_FILE: &str = "report_scatter.csv";

pub const SUMMARY_HEADER: [&str; 11] = [
    "provenance",
    "algo",
    "dataset",
    "set_label",
    "k",
    "mae",
    "cmae",
    "zero_one",
    "precision",
    "recall",
    "distance",
];

/// Probabilistic NMF test-set figures at k = 6, imported as published and
/// never recomputed.
pub const QUOTED_PNMF: [QuotedRow; 2] = [
    QuotedRow {
        dataset: "movielens_1m",
        mae: 0.664,
        cmae: 0.526,
        zero_one: 0.270,
    },
    QuotedRow {
        dataset: "movielens_10m",
        mae: 0.676,
        cmae: 0.542,
        zero_one: 0.284,
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotedRow {
    pub dataset: &'static str,
    pub mae: f64,
    pub cmae: f64,
    pub zero_one: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Measured,
    Quoted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Quoted => "quoted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub provenance: Provenance,
    pub algo: String,
    pub dataset: String,
    pub set_label: String,
    pub k: String,
    pub mae: f64,
    pub cmae: Option<f64>,
    pub zero_one: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl SummaryRow {
    /// Euclidean distance of (MAE, 0-1) from the origin.
    pub fn distance(&self) -> f64 {
        self.mae.hypot(self.zero_one)
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.provenance.as_str().to_string(),
            self.algo.clone(),
            self.dataset.clone(),
            self.set_label.clone(),
            self.k.clone(),
            self.mae.to_string(),
            optional(self.cmae),
            self.zero_one.to_string(),
            optional(self.precision),
            optional(self.recall),
            self.distance().to_string(),
        ]
    }
}

impl From<&QuotedRow> for SummaryRow {
    fn from(q: &QuotedRow) -> Self {
        SummaryRow {
            provenance: Provenance::Quoted,
            algo: "pnmf".into(),
            dataset: q.dataset.into(),
            set_label: "theta20".into(),
            k: "6".into(),
            mae: q.mae,
            cmae: Some(q.cmae),
            zero_one: q.zero_one,
            precision: None,
            recall: None,
        }
    }
}

/// Reads the rows of a `results.csv`.
pub fn read_results(path: &Path) -> Result<Vec<SummaryRow>> {
    if !path.is_file() {
        return Err(HarnessError::Config(format!(
            "missing study output {}",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(HarnessError::csv(path))?;
    let header = reader.headers().map_err(HarnessError::csv(path))?.clone();
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("no {name} column"),
        })
    };
    let cols: Vec<usize> = RESULTS_HEADER
        .iter()
        .map(|name| column(name))
        .collect::<Result<_>>()?;
    let [algo, dataset, set_label, k, _, mae, cmae, zero_one, precision, recall, _] =
        cols[..] else { unreachable!() };

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(HarnessError::csv(path))?;
        let line = n + 2;
        let text = |c: usize| record.get(c).unwrap_or("").to_string();
        let number = |c: usize| -> Result<Option<f64>> {
            match record.get(c).unwrap_or("") {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| HarnessError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("not a number: {v:?}"),
                }),
            }
        };
        let required = |c: usize| {
            number(c)?.ok_or_else(|| HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("empty {} field", header.get(c).unwrap_or("?")),
            })
        };
        rows.push(SummaryRow {
            provenance: Provenance::Measured,
            algo: text(algo),
            dataset: text(dataset),
            set_label: text(set_label),
            k: text(k),
            mae: required(mae)?,
            cmae: number(cmae)?,
            zero_one: required(zero_one)?,
            precision: number(precision)?,
            recall: number(recall)?,
        });
    }
    Ok(rows)
}

/// Merges the test-set rows of `inputs` with the quoted rows, sorted by 0-1
/// loss. When no input has test-set rows, every row is kept.
pub fn merge(inputs: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("no study outputs given".into()));
    }
    let mut measured = Vec::new();
    for path in inputs {
        measured.extend(read_results(path)?);
    }
    if measured.iter().any(|r| r.set_label == "theta20") {
        measured.retain(|r| r.set_label == "theta20");
    }
    measured.extend(QUOTED_PNMF.iter().map(SummaryRow::from));
    measured.sort_by(|a, b| a.zero_one.total_cmp(&b.zero_one));
    Ok(measured)
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub rows: Vec<SummaryRow>,
    pub summary: PathBuf,
    pub scatter: PathBuf,
}

/// Writes `summary.csv` and `report_scatter.csv` into `out_dir`.
pub fn render_report(inputs: &[PathBuf], out_dir: &Path) -> Result<ReportOutput> {
    let rows = merge(inputs)?;
    let mut summary = Table::new(SUMMARY_HEADER);
    let mut scatter = Table::new(["provenance", "algo", "dataset", "k", "mae", "zero_one", "distance"]);
    for row in &rows {
        summary.row(row.fields());
        scatter.row([
            row.provenance.as_str().to_string(),
            row.algo.clone(),
            row.dataset.clone(),
            row.k.clone(),
            row.mae.to_string(),
            row.zero_one.to_string(),
            row.distance().to_string(),
        ]);
    }
    let summary_path = out_dir.join(SUMMARY_FILE);
    let scatter_path = out_dir.join(REPORT_SCATTER_FILE);
    summary.write(&summary_path)?;
    scatter.write(&scatter_path)?;
    Ok(ReportOutput {
        rows,
        summary: summary_path,
        scatter: scatter_path,
    })
}
