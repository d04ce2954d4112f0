use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Campaign, RunRecord, Variant};
use crate::error::{Error, Result};
use crate::metrics::{box_stats, nrmse_ratio, BoxStats};

/// Which cells of a table row carry the better value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marks {
    pub mlp_nrmse: bool,
    pub mlp_nmae: bool,
    pub pmlp_nrmse: bool,
    pub pmlp_nmae: bool,
}

/// One row of the minima or means table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub mlp_nrmse: f64,
    pub mlp_nmae: f64,
    pub pruning_ratio: f64,
    pub pmlp_nrmse: f64,
    pub pmlp_nmae: f64,
    pub marks: Marks,
}

/// Value as shown in the text table.
fn display(x: f64) -> String {
    format!("{x:.3}")
}

/// `(a marked, b marked)`: the lower displayed value wins, equal values both.
fn better(a: f64, b: f64) -> (bool, bool) {
    let ra: f64 = display(a).parse().unwrap_or(a);
    let rb: f64 = display(b).parse().unwrap_or(b);
    (ra <= rb, rb <= ra)
}

impl TableRow {
    pub fn new(
        mlp_nrmse: f64,
        mlp_nmae: f64,
        pruning_ratio: f64,
        pmlp_nrmse: f64,
        pmlp_nmae: f64,
    ) -> Self {
        let (a, b) = better(mlp_nrmse, pmlp_nrmse);
        let (c, d) = better(mlp_nmae, pmlp_nmae);
        Self {
            mlp_nrmse,
            mlp_nmae,
            pruning_ratio,
            pmlp_nrmse,
            pmlp_nmae,
            marks: Marks {
                mlp_nrmse: a,
                mlp_nmae: c,
                pmlp_nrmse: b,
                pmlp_nmae: d,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub series: String,
    pub data: String,
    pub site: String,
    pub minima: TableRow,
    pub means: TableRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantBox {
    /// `MLP`, `pMLP`, or `ratio` for the MLP/pMLP nRMSE ratio.
    pub label: String,
    pub stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub series: String,
    pub run: usize,
    /// MLP nRMSE over pMLP nRMSE.
    pub ratio: f64,
}

/// Test-window measurements and predictions of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub series: String,
    pub run: usize,
    pub measured: Vec<f64>,
    pub mlp: Vec<f64>,
    pub pmlp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub series: Vec<SeriesSummary>,
    pub boxes: Vec<VariantBox>,
    pub ratios: Vec<RatioPoint>,
    /// Mean over series of the per-series mean pruning ratio.
    pub grand_mean_pruning_ratio: f64,
    /// Mean of the per-run nRMSE ratio sequence.
    pub grand_mean_nrmse_ratio: f64,
    pub traces: Vec<Trace>,
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Default)]
struct Cells {
    data: String,
    site: String,
    runs: BTreeMap<(usize, Variant), (f64, f64, f64)>,
}

/// Summarize records per series, in order of first appearance.
///
/// Every series needs both variants for the same set of runs.
pub fn aggregate(records: &[RunRecord], traces: Vec<Trace>) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::EmptyData("no run records"));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_series: BTreeMap<String, Cells> = BTreeMap::new();
    for r in records {
        let cells = by_series.entry(r.series.clone()).or_insert_with(|| {
            order.push(r.series.clone());
            Cells {
                data: r.data.clone(),
                site: r.site.clone(),
                ..Default::default()
            }
        });
        if cells
            .runs
            .insert((r.run, r.variant), (r.nrmse, r.nmae, r.pruning_ratio))
            .is_some()
        {
            return Err(Error::InvariantViolation(format!(
                "duplicate record for {} run {} {}",
                r.series, r.run, r.variant
            )));
        }
    }

    let mut series = Vec::new();
    let mut ratios = Vec::new();
    let mut all = [Vec::new(), Vec::new()];
    for key in &order {
        let cells = &by_series[key];
        let column = |v: Variant, f: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
            cells
                .runs
                .iter()
                .filter(|((_, var), _)| *var == v)
                .map(|(_, c)| f(c))
                .collect()
        };
        let runs_of = |v: Variant| -> Vec<usize> {
            cells
                .runs
                .keys()
                .filter(|(_, var)| *var == v)
                .map(|(r, _)| *r)
                .collect()
        };
        if runs_of(Variant::Mlp) != runs_of(Variant::Pmlp) {
            return Err(Error::InvariantViolation(format!(
                "series {key} lacks a matching record for every run and variant"
            )));
        }
        let (m_rmse, m_mae) = (column(Variant::Mlp, |c| c.0), column(Variant::Mlp, |c| c.1));
        let (p_rmse, p_mae) = (
            column(Variant::Pmlp, |c| c.0),
            column(Variant::Pmlp, |c| c.1),
        );
        let ratio = mean(&column(Variant::Pmlp, |c| c.2));
        series.push(SeriesSummary {
            series: key.clone(),
            data: cells.data.clone(),
            site: cells.site.clone(),
            minima: TableRow::new(min(&m_rmse), min(&m_mae), ratio, min(&p_rmse), min(&p_mae)),
            means: TableRow::new(
                mean(&m_rmse),
                mean(&m_mae),
                ratio,
                mean(&p_rmse),
                mean(&p_mae),
            ),
        });
        for (run, r) in runs_of(Variant::Mlp)
            .into_iter()
            .zip(nrmse_ratio(&m_rmse, &p_rmse)?)
        {
            ratios.push(RatioPoint {
                series: key.clone(),
                run,
                ratio: r,
            });
        }
        all[0].extend(m_rmse);
        all[1].extend(p_rmse);
    }

    let ratio_values: Vec<f64> = ratios.iter().map(|r| r.ratio).collect();
    let boxes = vec![
        VariantBox {
            label: Variant::Mlp.label().into(),
            stats: box_stats(&all[0])?,
        },
        VariantBox {
            label: Variant::Pmlp.label().into(),
            stats: box_stats(&all[1])?,
        },
        VariantBox {
            label: "ratio".into(),
            stats: box_stats(&ratio_values)?,
        },
    ];
    let pruning: Vec<f64> = series.iter().map(|s| s.means.pruning_ratio).collect();
    Ok(AggregateReport {
        grand_mean_pruning_ratio: mean(&pruning),
        grand_mean_nrmse_ratio: mean(&ratio_values),
        series,
        boxes,
        ratios,
        traces,
    })
}

/// Output flavour of the minima and means tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    /// Column-aligned, rounded to three decimals.
    AlignedText,
    /// Full precision, better cells suffixed with `*`.
    Csv,
    /// Full precision with boolean marks.
    Json,
}

impl TableFormat {
    pub const ALL: [TableFormat; 3] = [
        TableFormat::AlignedText,
        TableFormat::Csv,
        TableFormat::Json,
    ];

    pub fn extension(&self) -> &'static str {
        match self {
            TableFormat::AlignedText => "txt",
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned-text" | "text" | "txt" => Ok(TableFormat::AlignedText),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown table format {other:?}"
            ))),
        }
    }
}

const HEADER: [&str; 7] = [
    "data",
    "series",
    "MLP nRMSE",
    "MLP nMAE",
    "pruning ratio",
    "pMLP nRMSE",
    "pMLP nMAE",
];
const CSV_HEADER: [&str; 7] = [
    "data",
    "series",
    "mlp_nrmse",
    "mlp_nmae",
    "pruning_ratio",
    "pmlp_nrmse",
    "pmlp_nmae",
];

fn cells(s: &SeriesSummary, row: &TableRow, fmt: fn(f64) -> String) -> [String; 7] {
    let star = |v: f64, marked: bool| format!("{}{}", fmt(v), if marked { "*" } else { "" });
    [
        s.data.clone(),
        s.site.clone(),
        star(row.mlp_nrmse, row.marks.mlp_nrmse),
        star(row.mlp_nmae, row.marks.mlp_nmae),
        fmt(row.pruning_ratio),
        star(row.pmlp_nrmse, row.marks.pmlp_nrmse),
        star(row.pmlp_nmae, row.marks.pmlp_nmae),
    ]
}

/// Render one table. `pick` selects the minima or means row.
pub fn render_table(
    report: &AggregateReport,
    format: TableFormat,
    pick: fn(&SeriesSummary) -> &TableRow,
) -> Result<String> {
    match format {
        TableFormat::AlignedText => {
            let rows: Vec<[String; 7]> = report
                .series
                .iter()
                .map(|s| cells(s, pick(s), display))
                .collect();
            let mut widths = HEADER.map(str::len);
            for row in &rows {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cols: Vec<&str>| {
                let padded: Vec<String> = cols
                    .iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                padded.join("  ").trim_end().to_string() + "\n"
            };
            let mut out = line(HEADER.to_vec());
            for row in &rows {
                out += &line(row.iter().map(String::as_str).collect());
            }
            Ok(out)
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::InvariantViolation(e.to_string());
            w.write_record(CSV_HEADER).map_err(io)?;
            for s in &report.series {
                w.write_record(cells(s, pick(s), |v| v.to_string()))
                    .map_err(io)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::InvariantViolation(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                data: &'a str,
                series: &'a str,
                #[serde(flatten)]
                row: &'a TableRow,
            }
            let rows: Vec<Row> = report
                .series
                .iter()
                .map(|s| Row {
                    data: &s.data,
                    series: &s.site,
                    row: pick(s),
                })
                .collect();
            Ok(serde_json::to_string_pretty(&rows).expect("table rows serialize") + "\n")
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write `minima_table.<ext>` and `means_table.<ext>`.
pub fn emit_tables(
    report: &AggregateReport,
    format: TableFormat,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let ext = format.extension();
    Ok(vec![
        write(
            dir,
            &format!("minima_table.{ext}"),
            &render_table(report, format, |s| &s.minima)?,
        )?,
        write(
            dir,
            &format!("means_table.{ext}"),
            &render_table(report, format, |s| &s.means)?,
        )?,
    ])
}

fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::InvariantViolation(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvariantViolation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write `boxstats.csv`, `boxstats.json`, `ratios.csv` and one
/// `trace_<series>.csv` per series.
pub fn emit_plot_data(report: &AggregateReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let boxes = csv_string(
        &[
            "label",
            "q1",
            "median",
            "q3",
            "whisker_low",
            "whisker_high",
            "outliers",
        ],
        report.boxes.iter().map(|b| {
            let s = &b.stats;
            let outliers: Vec<String> = s.outliers.iter().map(f64::to_string).collect();
            vec![
                b.label.clone(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.whisker_low.to_string(),
                s.whisker_high.to_string(),
                outliers.join(";"),
            ]
        }),
    )?;
    written.push(write(dir, "boxstats.csv", &boxes)?);
    let json = serde_json::to_string_pretty(&report.boxes).expect("box stats serialize") + "\n";
    written.push(write(dir, "boxstats.json", &json)?);

    let ratios = csv_string(
        &["index", "series", "run", "ratio", "reference"],
        report.ratios.iter().enumerate().map(|(i, r)| {
            vec![
                i.to_string(),
                r.series.clone(),
                r.run.to_string(),
                r.ratio.to_string(),
                "1".into(),
            ]
        }),
    )?;
    written.push(write(dir, "ratios.csv", &ratios)?);

    for t in &report.traces {
        let rows = (0..t.measured.len()).map(|i| {
            vec![
                i.to_string(),
                t.measured[i].to_string(),
                t.mlp[i].to_string(),
                t.pmlp[i].to_string(),
            ]
        });
        let body = csv_string(&["hour", "measured", "mlp", "pmlp"], rows)?;
        written.push(write(dir, &format!("trace_{}.csv", t.series), &body)?);
    }
    Ok(written)
}

/// Write every run record to `runs.csv`.
pub fn emit_records(records: &[RunRecord], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let body = csv_string(
        &[
            "series",
            "data",
            "site",
            "run",
            "variant",
            "nrmse",
            "nmae",
            "pruning_ratio",
            "seed",
            "iterations",
            "termination",
        ],
        records.iter().map(|r| {
            vec![
                r.series.clone(),
                r.data.clone(),
                r.site.clone(),
                r.run.to_string(),
                r.variant.to_string(),
                r.nrmse.to_string(),
                r.nmae.to_string(),
                r.pruning_ratio.to_string(),
                r.seed.to_string(),
                r.iterations.to_string(),
                r.termination.to_string(),
            ]
        }),
    )?;
    write(dir, "runs.csv", &body)
}

/// Write the grand means to `summary.json`.
pub fn emit_summary(report: &AggregateReport, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let summary = serde_json::json!({
        "n_series": report.series.len(),
        "n_ratios": report.ratios.len(),
        "grand_mean_pruning_ratio": report.grand_mean_pruning_ratio,
        "grand_mean_nrmse_ratio": report.grand_mean_nrmse_ratio,
    });
    write(
        dir,
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )
}

/// Tables in every format, plot data, run records and the summary.
pub fn write_outputs(campaign: &Campaign, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for format in TableFormat::ALL {
        written.extend(emit_tables(&campaign.report, format, dir)?);
    }
    written.extend(emit_plot_data(&campaign.report, dir)?);
    written.push(emit_records(&campaign.records, dir)?);
    written.push(emit_summary(&campaign.report, dir)?);
    Ok(written)
}
