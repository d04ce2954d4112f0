use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Normalizer;
use crate::net::Topology;
use crate::optim::LmConfig;
use crate::par::Exec;
use crate::prune::{BootstrapConfig, Stage1Config, Stage2Init};
use crate::rng::{derive_seed, label_tag};
use crate::series::{
    load_csv, synth_series, ColumnSelector, Scaling, Series, SeriesKind, SplitSpec,
};

/// Number of synthetic sites per kind in the default campaign.
const DEFAULT_SITES: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    /// Lag order `p`.
    pub n_inputs: usize,
    pub n_hidden: usize,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            n_inputs: 7,
            n_hidden: 2,
        }
    }
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology> {
        Topology::new(self.n_inputs, self.n_hidden)
    }
}

/// Where a campaign series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesSource {
    /// Output of [`synth_series`] for a kind at a numbered site.
    Synthetic {
        kind: SeriesKind,
        site: u64,
        /// Defaults to exactly what the split needs.
        #[serde(default)]
        length: Option<usize>,
        /// Defaults to the kind's typical noise level.
        #[serde(default)]
        noise_sd: Option<f64>,
    },
    /// One numeric column of a CSV file.
    Csv {
        path: PathBuf,
        /// Defaults to the column named `value`.
        #[serde(default)]
        column: Option<ColumnSelector>,
        /// Variable label; defaults to `csv`.
        #[serde(default)]
        data: Option<String>,
        /// Location label; defaults to the file stem.
        #[serde(default)]
        name: Option<String>,
    },
}

impl SeriesSource {
    pub fn synthetic(kind: SeriesKind, site: u64) -> Self {
        SeriesSource::Synthetic {
            kind,
            site,
            length: None,
            noise_sd: None,
        }
    }

    /// `(data, site)` labels shown in the report tables.
    pub fn labels(&self) -> (String, String) {
        match self {
            SeriesSource::Synthetic { kind, site, .. } => {
                (kind.label().to_string(), format!("S{site}"))
            }
            SeriesSource::Csv {
                path, data, name, ..
            } => (
                data.clone().unwrap_or_else(|| "csv".into()),
                name.clone().unwrap_or_else(|| {
                    path.file_stem()
                        .map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
                }),
            ),
        }
    }

    /// `data_site`, restricted to characters safe in file names.
    pub fn key(&self) -> String {
        let (data, site) = self.labels();
        format!("{data}_{site}")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }

    pub(crate) fn load(&self, config: &ExperimentConfig) -> Result<Series> {
        match self {
            SeriesSource::Synthetic {
                kind,
                site,
                length,
                noise_sd,
            } => {
                let length = length.unwrap_or(
                    config.split.n_train + config.split.n_test + config.topology.n_inputs,
                );
                let noise_sd = noise_sd.unwrap_or(kind.default_noise_sd());
                if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "noise_sd must be >= 0, got {noise_sd}"
                    )));
                }
                Ok(synth_series(
                    *kind,
                    length,
                    noise_sd,
                    synth_seed(*kind, *site),
                ))
            }
            SeriesSource::Csv { path, column, .. } => {
                let column = column
                    .clone()
                    .unwrap_or_else(|| ColumnSelector::Name("value".into()));
                load_csv(path, &column)
            }
        }
    }
}

/// Data seed of a synthetic site; independent of the campaign seed.
pub(crate) fn synth_seed(kind: SeriesKind, site: u64) -> u64 {
    derive_seed(site, label_tag(kind.label()))
}

/// Everything a campaign depends on. Loaded from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n_runs: usize,
    pub topology: TopologySpec,
    pub split: SplitSpec,
    pub scaling: Scaling,
    pub normalizer: Normalizer,
    /// Classical training and the second stage of the pruned pipeline.
    pub lm: LmConfig,
    pub stage1: Stage1Config,
    pub bootstrap: BootstrapConfig,
    pub stage2_init: Stage2Init,
    /// Empty means the default grid of five kinds at five synthetic sites.
    pub series: Vec<SeriesSource>,
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_runs: 7,
            topology: TopologySpec::default(),
            split: SplitSpec::default(),
            scaling: Scaling::default(),
            normalizer: Normalizer::default(),
            lm: LmConfig::default(),
            stage1: Stage1Config::default(),
            bootstrap: BootstrapConfig::default(),
            stage2_init: Stage2Init::default(),
            series: Vec::new(),
            output_dir: None,
            exec: Exec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parse a config file. Relative CSV paths are taken relative to the file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for source in &mut config.series {
            if let SeriesSource::Csv { path, .. } = source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        if let Some(dir) = &mut config.output_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be >= 1".into()));
        }
        self.topology.build()?;
        if self.split.n_train == 0 || self.split.n_test == 0 {
            return Err(Error::InvalidSplit(format!(
                "both parts must be non-empty, got train {} / test {}",
                self.split.n_train, self.split.n_test
            )));
        }
        self.lm.validate()?;
        self.stage1.validate()?;
        self.bootstrap.validate()?;
        let sources = self.resolved_series();
        let mut keys: Vec<String> = sources.iter().map(SeriesSource::key).collect();
        keys.sort();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!("duplicate series {}", w[0])));
        }
        Ok(())
    }

    /// Configured series, or the default five-by-five synthetic grid.
    pub fn resolved_series(&self) -> Vec<SeriesSource> {
        if !self.series.is_empty() {
            return self.series.clone();
        }
        SeriesKind::ALL
            .iter()
            .flat_map(|&kind| {
                (1..=DEFAULT_SITES).map(move |site| SeriesSource::synthetic(kind, site))
            })
            .collect()
    }
}
