use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Written as the first line of every CSV report.
pub const CSV_PREAMBLE: &str =
    "# psnr_db pools squared error over all channels and pixels of [0,1]-clamped images; ssim is per-channel mean";

pub const CSV_COLUMNS: [&str; 7] = ["scene_id", "task", "method", "sigma_y", "seed", "psnr_db", "ssim"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scene_id: String,
    pub task: String,
    pub method: String,
    pub sigma_y: f64,
    pub seed: u64,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub count: usize,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

/// Rows kept in canonical order: scene id, then method, then seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    rows: Vec<MetricRow>,
}

fn canonical(a: &MetricRow, b: &MetricRow) -> std::cmp::Ordering {
    (&a.scene_id, &a.method, a.seed).cmp(&(&b.scene_id, &b.method, b.seed))
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(mut rows: Vec<MetricRow>) -> Self {
        rows.sort_by(canonical);
        Self { rows }
    }

    pub fn push(&mut self, row: MetricRow) {
        let at = self.rows.partition_point(|r| canonical(r, &row).is_le());
        self.rows.insert(at, row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = MetricRow>) {
        for r in rows {
            self.push(r);
        }
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean PSNR and SSIM per method, in method order.
    pub fn summaries(&self) -> Vec<MethodSummary> {
        let mut acc: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(&r.method).or_default();
            e.0 += 1;
            e.1 += r.psnr_db;
            e.2 += r.ssim;
        }
        acc.into_iter()
            .map(|(m, (n, p, s))| MethodSummary {
                method: m.to_string(),
                count: n,
                mean_psnr_db: p / n as f64,
                mean_ssim: s / n as f64,
            })
            .collect()
    }

    pub fn mean_psnr(&self, method: &str) -> Option<f64> {
        self.summaries()
            .into_iter()
            .find(|s| s.method == method)
            .map(|s| s.mean_psnr_db)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Protocol(e.to_string()))?;
        Ok(format!(
            "{CSV_PREAMBLE}\n{}",
            String::from_utf8(body).expect("csv is utf-8")
        ))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            psnr_convention: &'a str,
            rows: &'a [MetricRow],
            summary: Vec<MethodSummary>,
        }
        serde_json::to_string_pretty(&Doc {
            psnr_convention: "flattened",
            rows: &self.rows,
            summary: self.summaries(),
        })
        .expect("report serializes")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_csv()?;
        write_atomic(path.as_ref(), |w| std::io::Write::write_all(w, text.as_bytes()))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_json();
        write_atomic(path.as_ref(), |w| std::io::Write::write_all(w, text.as_bytes()))
    }

    /// CSV at `path` and JSON next to it with a `.json` extension.
    pub fn write_both(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        self.write_csv(csv_path)?;
        self.write_json(csv_path.with_extension("json"))
    }
}
