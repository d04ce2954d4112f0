//! MLP versus pruned-MLP campaigns.
//!
//! A campaign trains both variants on every configured series for a number of
//! runs, scores them on a held-out test window in the original units, and
//! aggregates the results into minima and means tables, box statistics, the
//! per-run nRMSE ratio sequence and prediction traces.

mod config;
mod model;
mod report;

pub use config::{ExperimentConfig, SeriesSource, TopologySpec};
pub use model::{load_model, save_model, Model, MODEL_FORMAT_VERSION};
pub use report::{
    aggregate, emit_plot_data, emit_records, emit_summary, emit_tables, render_table,
    write_outputs, AggregateReport, Marks, RatioPoint, SeriesSummary, TableFormat, TableRow, Trace,
    VariantBox,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ErrorSummary;
use crate::optim::Termination;
use crate::par::map_indexed;
use crate::prune::{classical_train, two_stage_train, TwoStageConfig};
use crate::rng::{derive_path, label_tag};
use crate::series::{embed_lags, split, Dataset, Scaler};

/// Which network a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "pMLP")]
    Pmlp,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Mlp, Variant::Pmlp];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Mlp => "MLP",
            Variant::Pmlp => "pMLP",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            Variant::Mlp => 0,
            Variant::Pmlp => 1,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One trained and scored network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Unique series key, also used in output file names.
    pub series: String,
    /// Variable label, e.g. `Tem`.
    pub data: String,
    /// Location label.
    pub site: String,
    pub run: usize,
    pub variant: Variant,
    pub nrmse: f64,
    pub nmae: f64,
    /// Fraction of parameters pruned; 0 for the fully connected network.
    pub pruning_ratio: f64,
    pub seed: u64,
    pub iterations: usize,
    pub termination: Termination,
}

/// A series after ingestion, embedding and splitting.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    pub key: String,
    pub data: String,
    pub site: String,
    /// Raw training samples.
    pub train: Dataset,
    /// Raw test samples.
    pub test: Dataset,
    /// Fitted on `train`.
    pub scaler: Scaler,
}

/// Load, embed and split every configured series. The first failure aborts
/// with the offending series named.
pub fn prepare(config: &ExperimentConfig) -> Result<Vec<PreparedSeries>> {
    config.validate()?;
    let p = config.topology.n_inputs;
    config
        .resolved_series()
        .iter()
        .map(|source| {
            let (data, site) = source.labels();
            let key = source.key();
            let wrap = |e: Error| Error::Ingest {
                series: key.clone(),
                source: Box::new(e),
            };
            let series = source.load(config).map_err(wrap)?;
            let ds = embed_lags(&series, p).map_err(wrap)?;
            let (train, test) = split(&ds, config.split).map_err(wrap)?;
            let scaler = Scaler::fit(config.scaling, &train).map_err(wrap)?;
            Ok(PreparedSeries {
                key: key.clone(),
                data,
                site,
                train,
                test,
                scaler,
            })
        })
        .collect()
}

/// Seed of one campaign cell. The classical and pruned variants draw from
/// disjoint streams.
pub fn cell_seed(master_seed: u64, series: &str, run: usize, variant: Variant) -> u64 {
    derive_path(
        master_seed,
        &[label_tag(series), run as u64, variant.stream()],
    )
}

/// Train one variant on a prepared series and score it on the test window.
pub fn run_cell(
    config: &ExperimentConfig,
    series: &PreparedSeries,
    run: usize,
    variant: Variant,
) -> Result<(RunRecord, Vec<f64>)> {
    let topology = config.topology.build()?;
    let seed = cell_seed(config.master_seed, &series.key, run, variant);
    let train = series.scaler.apply(&series.train);
    let (network, outcome, pruning_ratio) = match variant {
        Variant::Mlp => {
            let (net, out) = classical_train(&topology, &train, &config.lm, seed)?;
            (net, out, 0.0)
        }
        Variant::Pmlp => {
            let out = two_stage_train(&topology, &train, &config.two_stage_config(), seed)?;
            (out.network, out.outcome, out.report.pruning_ratio)
        }
    };
    let model = Model {
        network,
        scaler: series.scaler,
    };
    let pred = model.predict(&series.test)?;
    let errors = ErrorSummary::compute(&pred, series.test.targets(), config.normalizer)?;
    let record = RunRecord {
        series: series.key.clone(),
        data: series.data.clone(),
        site: series.site.clone(),
        run,
        variant,
        nrmse: errors.nrmse,
        nmae: errors.nmae,
        pruning_ratio,
        seed,
        iterations: outcome.iterations,
        termination: outcome.termination,
    };
    Ok((record, pred))
}

/// Records and aggregate of a finished campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    /// Ordered by series, then run, then variant.
    pub records: Vec<RunRecord>,
    pub report: AggregateReport,
}

/// Run every (series, run, variant) cell and aggregate.
///
/// Cells execute according to `config.exec`; the result does not depend on it.
pub fn run_campaign(config: &ExperimentConfig) -> Result<Campaign> {
    let prepared = prepare(config)?;
    let n_runs = config.n_runs;
    let per_series = 2 * n_runs;
    let cells = map_indexed(prepared.len() * per_series, config.exec, |c| {
        let series = &prepared[c / per_series];
        let run = (c / 2) % n_runs;
        run_cell(config, series, run, Variant::BOTH[c % 2])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let traces = prepared
        .iter()
        .enumerate()
        .map(|(s, series)| Trace {
            series: series.key.clone(),
            run: 0,
            measured: series.test.targets().to_vec(),
            mlp: cells[s * per_series].1.clone(),
            pmlp: cells[s * per_series + 1].1.clone(),
        })
        .collect();
    let records: Vec<RunRecord> = cells.into_iter().map(|(r, _)| r).collect();
    let report = aggregate(&records, traces)?;
    Ok(Campaign { records, report })
}

impl ExperimentConfig {
    /// Nested pruning settings, carrying this config's execution mode.
    pub fn two_stage_config(&self) -> TwoStageConfig {
        let mut stage1 = self.stage1;
        stage1.exec = self.exec;
        let mut bootstrap = self.bootstrap;
        bootstrap.exec = self.exec;
        TwoStageConfig {
            stage1,
            bootstrap,
            lm: self.lm,
            stage2_init: self.stage2_init,
        }
    }
}
