//! Time series ingestion, lag embedding and chronological splitting.
//!
//! Inputs of a lag-embedded sample are ordered most recent first: the row for
//! target `x[t]` is `[x[t-1], x[t-2], ..., x[t-p]]`. Series and datasets are
//! never rescaled in place; a [`Scaler`] produces a transformed copy.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// A named univariate series of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    name: String,
    values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyData("series has no observations"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("non-finite value {}", values[i]),
            });
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero-mean, unit-variance copy plus the `(mean, sd)` used.
    ///
    /// Not used by any of the default experiment paths.
    pub fn standardized(&self) -> (Series, f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        let values = self.values.iter().map(|v| (v - mean) / sd).collect();
        (
            Series {
                name: self.name.clone(),
                values,
            },
            mean,
            sd,
        )
    }
}

/// Supervised pairs: `n_samples` rows of `p` inputs, one target each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    /// Build from explicit rows. An empty row set yields an empty dataset of width 0.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::InputShape {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let p = rows.first().map_or(0, Vec::len);
        let mut inputs = Vec::with_capacity(rows.len() * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::InputShape {
                    expected: p,
                    got: row.len(),
                });
            }
            inputs.extend_from_slice(row);
        }
        Ok(Self { p, inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Number of inputs per sample.
    pub fn lag_order(&self) -> usize {
        self.p
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.p..(i + 1) * self.p]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.input(i), self.targets[i]))
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.p);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            p: self.p,
            inputs,
            targets,
        }
    }

    fn range(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            p: self.p,
            inputs: self.inputs[start * self.p..end * self.p].to_vec(),
            targets: self.targets[start..end].to_vec(),
        }
    }
}

/// Affine map applied to network inputs and targets before training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Train on raw values.
    None,
    /// Map the training range onto `[-1, 1]`.
    #[default]
    MinMax,
}

/// `scaled = (raw - offset) / scale`, shared by every input lag and the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub offset: f64,
    pub scale: f64,
}

impl Default for Scaler {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler {
        offset: 0.0,
        scale: 1.0,
    };

    /// Fit on every input and target value of `dataset`.
    pub fn fit(scaling: Scaling, dataset: &Dataset) -> Result<Self> {
        match scaling {
            Scaling::None => Ok(Self::IDENTITY),
            Scaling::MinMax => {
                if dataset.is_empty() {
                    return Err(Error::EmptyData("cannot fit a scaler on an empty dataset"));
                }
                let (lo, hi) = dataset
                    .inputs
                    .iter()
                    .chain(&dataset.targets)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                        (lo.min(x), hi.max(x))
                    });
                let half = (hi - lo) / 2.0;
                if half > 0.0 {
                    Ok(Self {
                        offset: lo + half,
                        scale: half,
                    })
                } else {
                    Err(Error::ZeroNormalizer(hi - lo))
                }
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.offset.is_finite() && self.scale.is_finite() && self.scale > 0.0
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }

    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        Dataset {
            p: dataset.p,
            inputs: dataset.inputs.iter().map(|&x| self.forward(x)).collect(),
            targets: dataset.targets.iter().map(|&x| self.forward(x)).collect(),
        }
    }
}

/// Turn a series into `len - p` samples predicting `x[t]` from the `p` previous values.
pub fn embed_lags(series: &Series, p: usize) -> Result<Dataset> {
    if p == 0 {
        return Err(Error::InvalidConfig("lag order must be at least 1".into()));
    }
    let x = series.values();
    if x.len() <= p {
        return Err(Error::InsufficientData {
            needed: p + 1,
            available: x.len(),
        });
    }
    let n = x.len() - p;
    let mut inputs = Vec::with_capacity(n * p);
    for t in p..x.len() {
        inputs.extend((1..=p).map(|lag| x[t - lag]));
    }
    Ok(Dataset {
        p,
        inputs,
        targets: x[p..].to_vec(),
    })
}

/// Chronological train/test sizes, counted in embedded samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_train: 3200,
            n_test: 400,
        }
    }
}

/// First `n_train` samples train, the next `n_test` test; the rest is dropped.
pub fn split(dataset: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::InvalidSplit(format!(
            "both parts must be non-empty, got train {} / test {}",
            spec.n_train, spec.n_test
        )));
    }
    let needed = spec.n_train + spec.n_test;
    if needed > dataset.len() {
        return Err(Error::InsufficientData {
            needed,
            available: dataset.len(),
        });
    }
    Ok((
        dataset.range(0, spec.n_train),
        dataset.range(spec.n_train, needed),
    ))
}

/// Which CSV column to read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "#{i}"),
            ColumnSelector::Name(n) => f.write_str(n),
        }
    }
}

/// Read one numeric column of a comma-separated file.
///
/// A header line is assumed when the first record holds no numeric field;
/// selecting by name requires one. Row numbers in errors count data rows from 1.
pub fn load_csv(path: impl AsRef<Path>, column: &ColumnSelector) -> Result<Series> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| csv_error(1, e))?,
        None => return Err(Error::EmptyData("csv file has no rows")),
    };
    let has_header = first.iter().all(|f| f.parse::<f64>().is_err());
    let col = match column {
        ColumnSelector::Index(i) => *i,
        ColumnSelector::Name(name) => {
            if !has_header {
                return Err(Error::ColumnNotFound(format!(
                    "{name} (file has no header)"
                )));
            }
            first
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::ColumnNotFound(name.clone()))?
        }
    };
    if col >= first.len() {
        return Err(Error::ColumnNotFound(column.to_string()));
    }

    let mut values = Vec::new();
    let data = std::iter::once(Ok(first))
        .filter(|_| !has_header)
        .chain(records);
    for (i, rec) in data.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(row, e))?;
        let cell = rec.get(col).ok_or_else(|| Error::Parse {
            row,
            message: format!("missing column {column}"),
        })?;
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            message: format!("non-numeric cell {cell:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("non-finite cell {cell:?}"),
            });
        }
        values.push(v);
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    Series::new(format!("{stem}:{column}"), values)
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::Parse {
        row,
        message: e.to_string(),
    }
}

/// Write `hour,value` rows with a header line.
pub fn write_csv(series: &Series, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(series.len() * 16);
    out.push_str("hour,value\n");
    for (t, v) in series.values().iter().enumerate() {
        out.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Meteorological variable imitated by [`synth_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Temperature,
    Humidity,
    WindSpeed,
    WindDirection,
    GlobalRadiation,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 5] = [
        SeriesKind::WindDirection,
        SeriesKind::WindSpeed,
        SeriesKind::GlobalRadiation,
        SeriesKind::Humidity,
        SeriesKind::Temperature,
    ];

    /// Short label used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            SeriesKind::WindDirection => "WD",
            SeriesKind::WindSpeed => "WS",
            SeriesKind::GlobalRadiation => "Glo",
            SeriesKind::Humidity => "Hum",
            SeriesKind::Temperature => "Tem",
        }
    }

    /// A noise level of the same order as hour-to-hour variability for the kind.
    pub fn default_noise_sd(&self) -> f64 {
        match self {
            SeriesKind::Temperature => 0.8,
            SeriesKind::Humidity => 0.04,
            SeriesKind::WindSpeed => 1.2,
            SeriesKind::WindDirection => 25.0,
            SeriesKind::GlobalRadiation => 60.0,
        }
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "temperature" | "tem" => Ok(SeriesKind::Temperature),
            "humidity" | "hum" => Ok(SeriesKind::Humidity),
            "wind_speed" | "ws" => Ok(SeriesKind::WindSpeed),
            "wind_direction" | "wd" => Ok(SeriesKind::WindDirection),
            "global_radiation" | "glo" => Ok(SeriesKind::GlobalRadiation),
            other => Err(Error::InvalidConfig(format!(
                "unknown series kind {other:?}"
            ))),
        }
    }
}

const AR_COEF: f64 = 0.8;
const HOURS_PER_YEAR: f64 = 24.0 * 365.0;

/// Seeded hourly series with a daily cycle, a seasonal drift and AR(1) noise.
///
/// `noise_sd` is the stationary standard deviation of the AR(1) term, in the
/// kind's native unit. The seed also picks the starting day of year.
pub fn synth_series(kind: SeriesKind, length: usize, noise_sd: f64, seed: u64) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_day = (seed % 365) as f64;
    let innovation_sd = noise_sd * (1.0 - AR_COEF * AR_COEF).sqrt();
    let mut noise = if noise_sd > 0.0 {
        noise_sd * standard_normal(&mut rng)
    } else {
        0.0
    };

    let values = (0..length)
        .map(|t| {
            if t > 0 && noise_sd > 0.0 {
                noise = AR_COEF * noise + innovation_sd * standard_normal(&mut rng);
            }
            let hours = t as f64 + start_day * 24.0;
            let hour_of_day = hours % 24.0;
            let daily = 2.0 * PI * hour_of_day / 24.0;
            let season = (2.0 * PI * hours / HOURS_PER_YEAR).sin();
            kind_value(kind, hour_of_day, daily, season, noise)
        })
        .collect();
    Series {
        name: format!("{}:{}", kind.label(), seed),
        values,
    }
}

fn kind_value(kind: SeriesKind, hour: f64, daily: f64, season: f64, noise: f64) -> f64 {
    // daily term peaks mid-afternoon
    let afternoon = (daily - 15.0 / 24.0 * 2.0 * PI).cos();
    match kind {
        SeriesKind::Temperature => 15.0 + 6.0 * season + 4.0 * afternoon + noise,
        SeriesKind::Humidity => (0.70 + 0.05 * season - 0.15 * afternoon + noise).clamp(0.0, 1.0),
        SeriesKind::WindSpeed => (5.0 + 1.0 * season + 2.0 * afternoon + noise).max(0.0),
        SeriesKind::WindDirection => {
            (200.0 + 60.0 * season + 40.0 * afternoon + noise).rem_euclid(360.0)
        }
        SeriesKind::GlobalRadiation => {
            if (6.0..=18.0).contains(&hour) {
                let elevation = (PI * (hour - 6.0) / 12.0).sin();
                let clear_sky = (700.0 + 250.0 * season) * elevation;
                (clear_sky + noise * elevation).max(0.0)
            } else {
                0.0
            }
        }
    }
}
