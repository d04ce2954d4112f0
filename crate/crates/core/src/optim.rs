//! Levenberg-Marquardt training over the active parameters of a [`Network`].
//!
//! Each iteration solves `(JᵀJ + λI) d = -Jᵀr` by Cholesky factorization.
//! A step is accepted only if it strictly lowers the mean squared residual;
//! λ is divided by `lambda_down` on acceptance and multiplied by `lambda_up`
//! on rejection or factorization failure.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{mean_square, ConnectionMask, Network, ParameterVector, Topology};
use crate::series::Dataset;

/// Damping schedule and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    /// Stop when `‖Jᵀr‖∞` falls to this value.
    pub grad_tol: f64,
    /// Stop when `‖d‖∞` falls to this value.
    pub step_tol: f64,
    /// Stop when an accepted step lowers the MSE by at most this fraction.
    pub cost_tol: f64,
    pub lambda_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_iters: 500,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            cost_tol: 1e-12,
            lambda_max: 1e10,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("lm: {msg}")));
        if !(self.lambda0 > 0.0) {
            return bad("lambda0 must be > 0");
        }
        if !(self.lambda_up > 1.0) || !(self.lambda_down > 1.0) {
            return bad("lambda_up and lambda_down must be > 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.grad_tol > 0.0) || !(self.step_tol > 0.0) || !(self.cost_tol >= 0.0) {
            return bad("tolerances must be positive (cost_tol may be 0)");
        }
        if !(self.lambda_max > self.lambda0) {
            return bad("lambda_max must exceed lambda0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    GradSmall,
    StepSmall,
    CostStall,
    MaxIters,
    Diverged,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ParameterVector,
    pub final_mse: f64,
    /// Accepted steps taken.
    pub iterations: usize,
    pub termination: Termination,
    /// MSE at the initial point and after every accepted step.
    pub cost_trace: Vec<f64>,
}

/// Uniform draws in `[-0.5, 0.5]` for every parameter.
pub fn initialize(topology: &Topology, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ParameterVector(
        (0..topology.n_params())
            .map(|_| rng.random_range(-0.5..=0.5))
            .collect(),
    )
}

/// `JᵀJ` and `Jᵀr` restricted to a set of parameter indices.
struct NormalEquations {
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
}

impl NormalEquations {
    fn assemble(net: &Network, dataset: &Dataset, cols: &[usize]) -> Result<(Self, Vec<f64>)> {
        let r = net.residuals(dataset)?;
        let k = cols.len();
        let mut jtj = DMatrix::zeros(k, k);
        let mut jtr = DVector::zeros(k);
        let mut full = vec![0.0; net.topology().n_params()];
        let mut row = vec![0.0; k];
        for ((x, _), &ri) in dataset.rows().zip(&r) {
            net.gradient_row(x, &mut full);
            for (dst, &c) in row.iter_mut().zip(cols) {
                *dst = full[c];
            }
            for a in 0..k {
                let ja = row[a];
                jtr[a] += ja * ri;
                for b in a..k {
                    jtj[(a, b)] += ja * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        Ok((Self { jtj, jtr }, r))
    }

    fn solve(&self, lambda: f64) -> Result<DVector<f64>> {
        damped_solve(&self.jtj, &self.jtr, lambda)
    }
}

/// Solve `(jtj + λI) d = -jtr` by Cholesky.
fn damped_solve(jtj: &DMatrix<f64>, jtr: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = Cholesky::new(a).ok_or(Error::DampingSingular { lambda })?;
    let d = chol.solve(&(-jtr));
    if d.iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::DampingSingular { lambda })
    }
}

/// One damped Gauss-Newton step over the network's active parameters.
pub fn lm_step(net: &Network, dataset: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let cols = net.mask().active_indices();
    let (eq, _) = NormalEquations::assemble(net, dataset, &cols)?;
    Ok(eq.solve(lambda)?.iter().copied().collect())
}

/// Train every active parameter of `net`.
pub fn train(net: &Network, dataset: &Dataset, config: &LmConfig) -> Result<TrainOutcome> {
    let mask = net.mask().clone();
    train_subset(net, dataset, config, &mask)
}

/// Train only the parameters flagged in `trainable`; the rest keep their values.
///
/// `trainable` must not enable parameters that the network's mask prunes.
pub fn train_subset(
    net: &Network,
    dataset: &Dataset,
    config: &LmConfig,
    trainable: &ConnectionMask,
) -> Result<TrainOutcome> {
    config.validate()?;
    if trainable.len() != net.mask().len() {
        return Err(Error::MaskShape {
            expected: net.mask().len(),
            got: trainable.len(),
        });
    }
    if let Some(i) =
        (0..trainable.len()).find(|&i| trainable.is_active(i) && !net.mask().is_active(i))
    {
        return Err(Error::InvariantViolation(format!(
            "parameter {i} is pruned and cannot be trained"
        )));
    }
    let cols = trainable.active_indices();
    let mut current = net.clone();
    let mut mse = current.mse(dataset)?;
    let mut trace = vec![mse];
    let mut lambda = config.lambda0;
    let mut accepted = 0usize;

    let termination = 'outer: loop {
        if accepted >= config.max_iters {
            break Termination::MaxIters;
        }
        let (eq, _) = NormalEquations::assemble(&current, dataset, &cols)?;
        if eq.jtr.amax() <= config.grad_tol {
            break Termination::GradSmall;
        }
        let base: Vec<f64> = cols.iter().map(|&c| current.params().0[c]).collect();
        loop {
            let step = match eq.solve(lambda) {
                Ok(d) => d,
                Err(Error::DampingSingular { .. }) => {
                    lambda *= config.lambda_up;
                    if lambda > config.lambda_max {
                        break 'outer stalled(accepted);
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            if step.amax() <= config.step_tol {
                break 'outer Termination::StepSmall;
            }
            let trial_vals: Vec<f64> = base.iter().zip(step.iter()).map(|(w, d)| w + d).collect();
            let mut trial = current.clone();
            trial.set_active(&cols, &trial_vals);
            let trial_mse = mean_square(&trial.residuals(dataset)?);
            if trial_mse.is_finite() && trial_mse < mse {
                let rel = (mse - trial_mse) / mse;
                current = trial;
                mse = trial_mse;
                trace.push(mse);
                accepted += 1;
                lambda /= config.lambda_down;
                if rel <= config.cost_tol {
                    break 'outer Termination::CostStall;
                }
                break;
            }
            lambda *= config.lambda_up;
            if lambda > config.lambda_max {
                break 'outer stalled(accepted);
            }
        }
    };

    Ok(TrainOutcome {
        params: current.params().clone(),
        final_mse: mse,
        iterations: accepted,
        termination,
        cost_trace: trace,
    })
}

/// λ ran past its ceiling: a divergence if nothing was ever accepted,
/// otherwise the cost has stopped improving.
fn stalled(accepted: usize) -> Termination {
    if accepted == 0 {
        Termination::Diverged
    } else {
        Termination::CostStall
    }
}
