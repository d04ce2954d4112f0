//! Two-stage training: an ensemble of small LM solves estimates a distribution
//! for every weight and bias, a bootstrap percentile interval on each
//! parameter's mean decides which connections to cancel, and the pruned
//! network is then trained on the full training set.
//!
//! Every random draw is derived from the caller's seed and a fixed stream
//! path, so results are identical whether the ensemble runs sequentially or
//! in parallel.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{jarque_bera, quantile_sorted, sorted_copy, JarqueBera};
use crate::net::{ConnectionMask, Network, ParameterVector, Topology};
use crate::optim::{initialize, train, LmConfig, Termination, TrainOutcome};
use crate::par::{map_indexed, Exec};
use crate::rng::{derive_path, derive_seed};
use crate::series::Dataset;

const STREAM_POOL: u64 = 1;
const STREAM_SYSTEM: u64 = 2;
const STREAM_STAGE1: u64 = 10;
const STREAM_BOOTSTRAP: u64 = 11;
const STREAM_STAGE2: u64 = 12;

/// Solve attempts per system before the ensemble gives up.
const ATTEMPTS_PER_SYSTEM: usize = 5;

/// Whether each small system samples from one shared pool or draws its own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Fixed,
    Redraw,
}

/// How the hidden-node symmetries of a solution are resolved before it is
/// stored as an ensemble row.
///
/// A tanh network computes the same function after negating a hidden node's
/// incoming weights, bias and outgoing weight, or after permuting hidden
/// nodes. Independent solves land on arbitrary members of these orbits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// Store solutions as returned by the solver.
    Raw,
    /// Flip every hidden node to a non-negative output weight, then order
    /// hidden nodes by decreasing output weight.
    #[default]
    Canonical,
    /// Canonical form, then match every row's hidden nodes (with sign) to
    /// an ensemble median reference.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    /// Number of small systems; `None` picks `max(30, pool / system_size)`.
    pub n_systems: Option<usize>,
    /// Equations per system; `None` uses the parameter count.
    pub system_size: Option<usize>,
    /// Fraction of the training set eligible for sampling.
    pub subset_fraction: f64,
    pub pool_mode: PoolMode,
    pub symmetry: Symmetry,
    pub lm: LmConfig,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            n_systems: None,
            system_size: None,
            subset_fraction: 0.10,
            pool_mode: PoolMode::Fixed,
            symmetry: Symmetry::Canonical,
            lm: LmConfig {
                max_iters: 10,
                ..LmConfig::default()
            },
            exec: Exec::default(),
        }
    }
}

/// Sizes resolved against a concrete topology and dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage1Plan {
    pub pool_size: usize,
    pub system_size: usize,
    pub n_systems: usize,
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stage1: subset_fraction must lie in (0, 1], got {}",
                self.subset_fraction
            )));
        }
        if matches!(self.n_systems, Some(n) if n < 2) {
            return Err(Error::InvalidConfig(
                "stage1: n_systems must be >= 2".into(),
            ));
        }
        if self.system_size == Some(0) {
            return Err(Error::InvalidConfig(
                "stage1: system_size must be >= 1".into(),
            ));
        }
        self.lm.validate()
    }

    pub fn plan(&self, topology: &Topology, n_samples: usize) -> Result<Stage1Plan> {
        self.validate()?;
        let system_size = self.system_size.unwrap_or(topology.n_params());
        if n_samples < system_size {
            return Err(Error::InsufficientData {
                needed: system_size,
                available: n_samples,
            });
        }
        let pool_size = ((self.subset_fraction * n_samples as f64).ceil() as usize).min(n_samples);
        if pool_size < system_size {
            return Err(Error::InsufficientData {
                needed: system_size,
                available: pool_size,
            });
        }
        let n_systems = self
            .n_systems
            .unwrap_or_else(|| (pool_size / system_size).max(30));
        Ok(Stage1Plan {
            pool_size,
            system_size,
            n_systems,
        })
    }
}

/// `N × m` matrix of stage-1 solutions, one row per system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSampleMatrix {
    n_params: usize,
    rows: Vec<ParameterVector>,
}

impl WeightSampleMatrix {
    pub fn from_rows(rows: Vec<ParameterVector>) -> Result<Self> {
        let n_params = rows.first().map_or(0, ParameterVector::len);
        if n_params == 0 {
            return Err(Error::EmptyData("weight sample matrix has no rows"));
        }
        for r in &rows {
            if r.len() != n_params {
                return Err(Error::InputShape {
                    expected: n_params,
                    got: r.len(),
                });
            }
            if !r.is_finite() {
                return Err(Error::InvariantViolation("non-finite ensemble row".into()));
            }
        }
        Ok(Self { n_params, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn rows(&self) -> &[ParameterVector] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.0[j]).collect()
    }

    pub fn column_means(&self) -> ParameterVector {
        let n = self.rows.len() as f64;
        ParameterVector(
            (0..self.n_params)
                .map(|j| self.rows.iter().map(|r| r.0[j]).sum::<f64>() / n)
                .collect(),
        )
    }

    /// Jarque-Bera diagnostic per column; `None` where it is undefined.
    pub fn normality(&self) -> Vec<Option<JarqueBera>> {
        (0..self.n_params)
            .map(|j| jarque_bera(&self.column(j)).ok())
            .collect()
    }
}

/// Map a solution onto its canonical representative under hidden-node
/// sign flips and permutations. The network function is unchanged.
pub fn canonicalize(topology: &Topology, params: &ParameterVector) -> ParameterVector {
    let (ni, nh) = (topology.n_inputs(), topology.n_hidden());
    let v = &params.0;
    let mut nodes: Vec<(Vec<f64>, f64, f64)> = (0..nh)
        .map(|j| {
            let row = v[topology.w1_index(j, 0)..topology.w1_index(j, 0) + ni].to_vec();
            let (b1, w2) = (v[topology.b1_index(j)], v[topology.w2_index(j)]);
            if w2 < 0.0 {
                (row.iter().map(|w| -w).collect(), -b1, -w2)
            } else {
                (row, b1, w2)
            }
        })
        .collect();
    nodes.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut out = vec![0.0; topology.n_params()];
    for (j, (row, b1, w2)) in nodes.into_iter().enumerate() {
        out[topology.w1_index(j, 0)..topology.w1_index(j, 0) + ni].copy_from_slice(&row);
        out[topology.b1_index(j)] = b1;
        out[topology.w2_index(j)] = w2;
    }
    out[topology.b2_index()] = v[topology.b2_index()];
    ParameterVector(out)
}

/// Solve `N` small systems drawn from a random slice of the training set.
pub fn stage1_ensemble(
    topology: &Topology,
    dataset: &Dataset,
    config: &Stage1Config,
    seed: u64,
) -> Result<WeightSampleMatrix> {
    let plan = config.plan(topology, dataset.len())?;
    if dataset.lag_order() != topology.n_inputs() {
        return Err(Error::InputShape {
            expected: topology.n_inputs(),
            got: dataset.lag_order(),
        });
    }
    let draw_pool = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        sample_indices(&mut rng, dataset.len(), plan.pool_size).into_vec()
    };
    let shared_pool = draw_pool(derive_seed(seed, STREAM_POOL));

    let solve = |system: usize| -> Option<ParameterVector> {
        for attempt in 0..ATTEMPTS_PER_SYSTEM {
            let s = derive_path(seed, &[STREAM_SYSTEM, system as u64, attempt as u64]);
            let redrawn;
            let pool = match config.pool_mode {
                PoolMode::Fixed => &shared_pool,
                PoolMode::Redraw => {
                    redrawn = draw_pool(derive_seed(s, STREAM_POOL));
                    &redrawn
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let picks: Vec<usize> = sample_indices(&mut rng, pool.len(), plan.system_size)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            let system = dataset.subset(&picks);
            let init_seed: u64 = rng.random();
            let Ok(net) = Network::dense(*topology, initialize(topology, init_seed)) else {
                continue;
            };
            match train(&net, &system, &config.lm) {
                Ok(out) if out.termination != Termination::Diverged && out.params.is_finite() => {
                    return Some(match config.symmetry {
                        Symmetry::Raw => out.params,
                        Symmetry::Canonical | Symmetry::Aligned => {
                            canonicalize(topology, &out.params)
                        }
                    });
                }
                _ => continue,
            }
        }
        None
    };

    let solved = map_indexed(plan.n_systems, config.exec, solve);
    let ok = solved.iter().filter(|r| r.is_some()).count();
    if ok < plan.n_systems {
        return Err(Error::Stage1Failure {
            solved: ok,
            requested: plan.n_systems,
            attempts: ATTEMPTS_PER_SYSTEM * plan.n_systems,
        });
    }
    let mut rows: Vec<ParameterVector> = solved.into_iter().flatten().collect();
    if config.symmetry == Symmetry::Aligned {
        rows = align_rows(topology, rows);
    }
    WeightSampleMatrix::from_rows(rows)
}

fn node(topology: &Topology, p: &ParameterVector, j: usize) -> Vec<f64> {
    let ni = topology.n_inputs();
    let mut v = p.0[topology.w1_index(j, 0)..topology.w1_index(j, 0) + ni].to_vec();
    v.push(p.0[topology.b1_index(j)]);
    v.push(p.0[topology.w2_index(j)]);
    v
}

/// Relabel the hidden nodes of `p` (with sign) to best match `reference`,
/// greedily pairing the closest nodes first.
fn align_to(
    topology: &Topology,
    reference: &ParameterVector,
    p: &ParameterVector,
) -> ParameterVector {
    let nh = topology.n_hidden();
    let ni = topology.n_inputs();
    let refs: Vec<Vec<f64>> = (0..nh).map(|k| node(topology, reference, k)).collect();
    let nodes: Vec<Vec<f64>> = (0..nh).map(|j| node(topology, p, j)).collect();
    let mut pairs = Vec::new();
    for (k, r) in refs.iter().enumerate() {
        for (j, n) in nodes.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let d: f64 = r.iter().zip(n).map(|(a, b)| (a - sign * b).powi(2)).sum();
                pairs.push((d, k, j, sign));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used_k = vec![false; nh];
    let mut used_j = vec![false; nh];
    let mut out = p.0.clone();
    for (_, k, j, sign) in pairs {
        if used_k[k] || used_j[j] {
            continue;
        }
        used_k[k] = true;
        used_j[j] = true;
        let n = &nodes[j];
        for i in 0..ni {
            out[topology.w1_index(k, i)] = sign * n[i];
        }
        out[topology.b1_index(k)] = sign * n[ni];
        out[topology.w2_index(k)] = sign * n[ni + 1];
    }
    ParameterVector(out)
}

/// Align every row to the elementwise median of the aligned ensemble,
/// refining the reference a few times.
fn align_rows(topology: &Topology, rows: Vec<ParameterVector>) -> Vec<ParameterVector> {
    let mut aligned = rows.clone();
    for _ in 0..5 {
        let m = topology.n_params();
        let reference = ParameterVector(
            (0..m)
                .map(|c| {
                    let col: Vec<f64> = aligned.iter().map(|r| r.0[c]).collect();
                    quantile_sorted(&sorted_copy(&col), 0.5)
                })
                .collect(),
        );
        aligned = rows
            .iter()
            .map(|r| align_to(topology, &reference, r))
            .collect();
    }
    aligned
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    /// Two-sided significance level; the interval spans the `α/2` and
    /// `1 - α/2` quantiles of the resampled means.
    pub alpha: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_resamples: 4000,
            alpha: 0.05,
            exec: Exec::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples < 100 {
            return Err(Error::InvalidConfig(
                "bootstrap: n_resamples must be >= 100".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bootstrap: alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Bootstrap distribution of the mean of `column`, sorted ascending.
pub fn bootstrap_means(column: &[f64], n_resamples: usize, seed: u64) -> Result<Vec<f64>> {
    let n = column.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..n_resamples)
        .map(|_| (0..n).map(|_| column[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    Ok(sorted_copy(&means))
}

/// Percentile interval `(t1, t2)` of the bootstrapped mean.
pub fn bootstrap_ci(column: &[f64], config: &BootstrapConfig, seed: u64) -> Result<(f64, f64)> {
    config.validate()?;
    let means = bootstrap_means(column, config.n_resamples, seed)?;
    Ok(percentile_interval(&means, config.alpha))
}

fn percentile_interval(sorted_means: &[f64], alpha: f64) -> (f64, f64) {
    (
        quantile_sorted(sorted_means, alpha / 2.0),
        quantile_sorted(sorted_means, 1.0 - alpha / 2.0),
    )
}

/// Keep a parameter only when both interval endpoints share a strict sign.
pub fn keeps(t1: f64, t2: f64) -> bool {
    t1 * t2 > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSignificance {
    pub t1: f64,
    pub t2: f64,
    pub keep: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub params: Vec<ParamSignificance>,
    /// Fraction of parameters pruned.
    pub pruning_ratio: f64,
    /// The output bias was pruned, leaving a zero-intercept model.
    pub output_bias_pruned: bool,
}

impl SignificanceReport {
    pub fn n_pruned(&self) -> usize {
        self.params.iter().filter(|p| !p.keep).count()
    }
}

/// Bootstrap every column and mask the parameters whose interval straddles zero.
pub fn build_mask(
    samples: &WeightSampleMatrix,
    config: &BootstrapConfig,
    seed: u64,
) -> Result<(ConnectionMask, SignificanceReport)> {
    config.validate()?;
    let m = samples.n_params();
    let intervals = map_indexed(m, config.exec, |j| {
        bootstrap_ci(&samples.column(j), config, derive_seed(seed, j as u64))
    });
    let params = intervals
        .into_iter()
        .map(|r| {
            r.map(|(t1, t2)| ParamSignificance {
                t1,
                t2,
                keep: keeps(t1, t2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mask = ConnectionMask(params.iter().map(|p| p.keep).collect());
    let pruned = params.iter().filter(|p| !p.keep).count();
    let output_bias_pruned = !params[m - 1].keep;
    Ok((
        mask,
        SignificanceReport {
            params,
            pruning_ratio: pruned as f64 / m as f64,
            output_bias_pruned,
        },
    ))
}

/// Starting point of the second-stage training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Init {
    /// Fresh uniform draws on the active parameters.
    #[default]
    Fresh,
    /// Column means of the stage-1 ensemble.
    EnsembleMean,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageConfig {
    pub stage1: Stage1Config,
    pub bootstrap: BootstrapConfig,
    pub lm: LmConfig,
    pub stage2_init: Stage2Init,
}

#[derive(Debug, Clone)]
pub struct TwoStageOutcome {
    pub network: Network,
    pub report: SignificanceReport,
    pub outcome: TrainOutcome,
    pub samples: WeightSampleMatrix,
}

/// Stage-1 ensemble, bootstrap mask, then batch LM on the pruned network.
pub fn two_stage_train(
    topology: &Topology,
    dataset: &Dataset,
    config: &TwoStageConfig,
    seed: u64,
) -> Result<TwoStageOutcome> {
    let samples = stage1_ensemble(
        topology,
        dataset,
        &config.stage1,
        derive_seed(seed, STREAM_STAGE1),
    )?;
    let (mask, report) = build_mask(
        &samples,
        &config.bootstrap,
        derive_seed(seed, STREAM_BOOTSTRAP),
    )?;
    let init = match config.stage2_init {
        Stage2Init::Fresh => initialize(topology, derive_seed(seed, STREAM_STAGE2)),
        Stage2Init::EnsembleMean => samples.column_means(),
    };
    let net = Network::masked(*topology, init, mask)?;
    let outcome = train(&net, dataset, &config.lm)?;
    let network = net.with_params(outcome.params.clone())?;
    Ok(TwoStageOutcome {
        network,
        report,
        outcome,
        samples,
    })
}

/// Fully connected baseline trained with one batch LM run.
pub fn classical_train(
    topology: &Topology,
    dataset: &Dataset,
    lm: &LmConfig,
    seed: u64,
) -> Result<(Network, TrainOutcome)> {
    let net = Network::dense(*topology, initialize(topology, seed))?;
    let outcome = train(&net, dataset, lm)?;
    Ok((net.with_params(outcome.params.clone())?, outcome))
}
