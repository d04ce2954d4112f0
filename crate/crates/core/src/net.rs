//! Single-hidden-layer perceptron with a connection mask.
//!
//! The model is `out = W2 · tanh(W1 · x + B1) + B2` with a linear output node.
//! All weights and biases live in one flat [`ParameterVector`] whose layout is
//! fixed: `W1` row-major by hidden node, then `B1`, then `W2`, then `B2`.
//! A [`ConnectionMask`] marks parameters as active or pruned; pruned entries
//! are stored as exact zeros and excluded from the Jacobian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Dataset;

/// Network shape: `n_inputs` lag inputs, `n_hidden` tanh nodes, one linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    n_inputs: usize,
    n_hidden: usize,
}

impl Topology {
    pub fn new(n_inputs: usize, n_hidden: usize) -> Result<Self> {
        if n_inputs == 0 || n_hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "topology needs at least one input and one hidden node, got {n_inputs}-{n_hidden}-1"
            )));
        }
        Ok(Self { n_inputs, n_hidden })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    /// Total number of weights and biases.
    pub fn n_params(&self) -> usize {
        self.n_hidden * self.n_inputs + 2 * self.n_hidden + 1
    }

    #[inline]
    pub fn w1_index(&self, hidden: usize, input: usize) -> usize {
        debug_assert!(hidden < self.n_hidden && input < self.n_inputs);
        hidden * self.n_inputs + input
    }

    #[inline]
    pub fn b1_index(&self, hidden: usize) -> usize {
        self.n_hidden * self.n_inputs + hidden
    }

    #[inline]
    pub fn w2_index(&self, hidden: usize) -> usize {
        self.n_hidden * self.n_inputs + self.n_hidden + hidden
    }

    #[inline]
    pub fn b2_index(&self) -> usize {
        self.n_hidden * self.n_inputs + 2 * self.n_hidden
    }

    /// Human-readable name of a canonical parameter index, e.g. `W1[0][2]`.
    pub fn param_name(&self, index: usize) -> String {
        let w1_end = self.n_hidden * self.n_inputs;
        if index < w1_end {
            format!("W1[{}][{}]", index / self.n_inputs, index % self.n_inputs)
        } else if index < w1_end + self.n_hidden {
            format!("B1[{}]", index - w1_end)
        } else if index < w1_end + 2 * self.n_hidden {
            format!("W2[{}]", index - w1_end - self.n_hidden)
        } else {
            "B2".to_string()
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-1", self.n_inputs, self.n_hidden)
    }
}

/// Flat weights and biases in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(topology: &Topology) -> Self {
        Self(vec![0.0; topology.n_params()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Per-parameter active flags aligned with [`ParameterVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConnectionMask(pub Vec<bool>);

impl ConnectionMask {
    pub fn all_active(topology: &Topology) -> Self {
        Self(vec![true; topology.n_params()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn n_active(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    /// Canonical indices of active parameters, in order.
    pub fn active_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    /// Zero every pruned entry of `params`.
    pub fn apply(&self, params: &mut ParameterVector) {
        for (v, &a) in params.0.iter_mut().zip(&self.0) {
            if !a {
                *v = 0.0;
            }
        }
    }
}

/// Layer matrices of an unpacked network.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    /// `n_hidden` rows of `n_inputs` weights.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Pack layer matrices into canonical order.
pub fn pack(layers: &Layers) -> Result<(Topology, ParameterVector)> {
    let n_hidden = layers.w1.len();
    let n_inputs = layers.w1.first().map_or(0, Vec::len);
    let topology = Topology::new(n_inputs, n_hidden)?;
    for row in &layers.w1 {
        if row.len() != n_inputs {
            return Err(Error::InputShape {
                expected: n_inputs,
                got: row.len(),
            });
        }
    }
    for v in [&layers.b1, &layers.w2] {
        if v.len() != n_hidden {
            return Err(Error::InputShape {
                expected: n_hidden,
                got: v.len(),
            });
        }
    }
    let mut values = Vec::with_capacity(topology.n_params());
    for row in &layers.w1 {
        values.extend_from_slice(row);
    }
    values.extend_from_slice(&layers.b1);
    values.extend_from_slice(&layers.w2);
    values.push(layers.b2);
    Ok((topology, ParameterVector(values)))
}

/// Split a canonical parameter vector back into layer matrices.
pub fn unpack(params: &ParameterVector, topology: &Topology) -> Result<Layers> {
    let m = topology.n_params();
    if params.len() != m {
        return Err(Error::InputShape {
            expected: m,
            got: params.len(),
        });
    }
    let (ni, nh) = (topology.n_inputs, topology.n_hidden);
    let v = params.as_slice();
    Ok(Layers {
        w1: v[..nh * ni].chunks(ni).map(<[f64]>::to_vec).collect(),
        b1: v[topology.b1_index(0)..topology.b1_index(0) + nh].to_vec(),
        w2: v[topology.w2_index(0)..topology.w2_index(0) + nh].to_vec(),
        b2: v[topology.b2_index()],
    })
}

/// A masked perceptron. Pruned parameters are always exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    topology: Topology,
    params: ParameterVector,
    mask: ConnectionMask,
}

impl Network {
    /// Build a network, rejecting shape errors and nonzero values at pruned indices.
    pub fn new(topology: Topology, params: ParameterVector, mask: ConnectionMask) -> Result<Self> {
        check_shapes(&topology, &params, &mask)?;
        if let Some(i) = (0..params.len()).find(|&i| !mask.0[i] && params.0[i] != 0.0) {
            return Err(Error::InvariantViolation(format!(
                "parameter {} ({}) is masked but holds {}",
                i,
                topology.param_name(i),
                params.0[i]
            )));
        }
        Ok(Self {
            topology,
            params,
            mask,
        })
    }

    /// Build a network, forcing pruned parameters to zero.
    pub fn masked(
        topology: Topology,
        mut params: ParameterVector,
        mask: ConnectionMask,
    ) -> Result<Self> {
        check_shapes(&topology, &params, &mask)?;
        mask.apply(&mut params);
        Ok(Self {
            topology,
            params,
            mask,
        })
    }

    /// Fully connected network.
    pub fn dense(topology: Topology, params: ParameterVector) -> Result<Self> {
        let mask = ConnectionMask::all_active(&topology);
        Self::new(topology, params, mask)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    pub fn mask(&self) -> &ConnectionMask {
        &self.mask
    }

    /// Copy with a new parameter vector under the same mask.
    pub fn with_params(&self, params: ParameterVector) -> Result<Self> {
        Self::masked(self.topology, params, self.mask.clone())
    }

    /// Copy with a different mask; newly pruned parameters are zeroed.
    pub fn with_mask(&self, mask: ConnectionMask) -> Result<Self> {
        Self::masked(self.topology, self.params.clone(), mask)
    }

    /// Overwrite active parameters from a reduced (active-only) vector.
    pub(crate) fn set_active(&mut self, active: &[usize], values: &[f64]) {
        for (&i, &v) in active.iter().zip(values) {
            self.params.0[i] = v;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.topology.n_inputs {
            return Err(Error::InputShape {
                expected: self.topology.n_inputs,
                got: input.len(),
            });
        }
        Ok(self.eval(input))
    }

    #[inline]
    fn hidden_activation(&self, hidden: usize, input: &[f64]) -> f64 {
        let t = &self.topology;
        let p = self.params.as_slice();
        let row = &p[t.w1_index(hidden, 0)..t.w1_index(hidden, 0) + t.n_inputs];
        let u = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + p[t.b1_index(hidden)];
        u.tanh()
    }

    #[inline]
    fn eval(&self, input: &[f64]) -> f64 {
        let t = &self.topology;
        let p = self.params.as_slice();
        let mut out = p[t.b2_index()];
        for j in 0..t.n_hidden {
            out += p[t.w2_index(j)] * self.hidden_activation(j, input);
        }
        out
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.is_empty() {
            return Err(Error::EmptyData("dataset has no samples"));
        }
        if dataset.lag_order() != self.topology.n_inputs {
            return Err(Error::InputShape {
                expected: self.topology.n_inputs,
                got: dataset.lag_order(),
            });
        }
        Ok(())
    }

    /// Predictions for every sample of `dataset`.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(dataset)?;
        Ok(dataset.rows().map(|(x, _)| self.eval(x)).collect())
    }

    /// `prediction - target` per sample.
    pub fn residuals(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(dataset)?;
        Ok(dataset.rows().map(|(x, y)| self.eval(x) - y).collect())
    }

    /// Mean squared residual.
    pub fn mse(&self, dataset: &Dataset) -> Result<f64> {
        let r = self.residuals(dataset)?;
        Ok(mean_square(&r))
    }

    /// Analytic Jacobian of the residuals over active parameters.
    ///
    /// Row `i` is the gradient of `r_i`; columns follow canonical order
    /// restricted to active entries.
    pub fn jacobian(&self, dataset: &Dataset) -> Result<DMatrix<f64>> {
        self.check_dataset(dataset)?;
        let active = self.mask.active_indices();
        let mut jac = DMatrix::zeros(dataset.len(), active.len());
        let mut full = vec![0.0; self.topology.n_params()];
        for (i, (x, _)) in dataset.rows().enumerate() {
            self.gradient_row(x, &mut full);
            for (col, &k) in active.iter().enumerate() {
                jac[(i, col)] = full[k];
            }
        }
        Ok(jac)
    }

    /// Gradient of the network output with respect to every canonical parameter.
    pub(crate) fn gradient_row(&self, input: &[f64], out: &mut [f64]) {
        let t = &self.topology;
        let p = self.params.as_slice();
        for j in 0..t.n_hidden {
            let h = self.hidden_activation(j, input);
            let w2 = p[t.w2_index(j)];
            let dh = w2 * (1.0 - h * h);
            for (k, &x) in input.iter().enumerate() {
                out[t.w1_index(j, k)] = dh * x;
            }
            out[t.b1_index(j)] = dh;
            out[t.w2_index(j)] = h;
        }
        out[t.b2_index()] = 1.0;
    }
}

fn check_shapes(
    topology: &Topology,
    params: &ParameterVector,
    mask: &ConnectionMask,
) -> Result<()> {
    let m = topology.n_params();
    if params.len() != m {
        return Err(Error::InputShape {
            expected: m,
            got: params.len(),
        });
    }
    if mask.len() != m {
        return Err(Error::MaskShape {
            expected: m,
            got: mask.len(),
        });
    }
    Ok(())
}

pub(crate) fn mean_square(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_one_one(w1: f64, b1: f64, w2: f64, b2: f64) -> Network {
        let topo = Topology::new(1, 1).unwrap();
        Network::dense(topo, ParameterVector(vec![w1, b1, w2, b2])).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(Topology::new(1, 1).unwrap().n_params(), 4);
        assert_eq!(Topology::new(7, 2).unwrap().n_params(), 19);
        assert_eq!(Topology::new(15, 15).unwrap().n_params(), 256);
        assert!(Topology::new(0, 2).is_err());
        assert!(Topology::new(7, 0).is_err());
    }

    #[test]
    fn output_bias_only() {
        let topo = Topology::new(3, 2).unwrap();
        let mut p = ParameterVector::zeros(&topo);
        p.0[topo.b2_index()] = 0.5;
        let net = Network::dense(topo, p).unwrap();
        assert_eq!(net.forward(&[1.0, -4.0, 9.0]).unwrap(), 0.5);
        assert_eq!(net.forward(&[0.0, 0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn scalar_forward_cases() {
        assert_eq!(
            one_one_one(1.0, 0.0, 1.0, 0.0).forward(&[0.0]).unwrap(),
            0.0
        );
        // 3 tanh(1) + 0.5, tanh(1) = 0.76159415595576488812 (50-digit reference)
        let y = one_one_one(2.0, -1.0, 3.0, 0.5).forward(&[1.0]).unwrap();
        assert!((y - 2.784_782_467_867_294_7).abs() < 1e-12, "{y}");
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = one_one_one(1.0, 0.0, 1.0, 0.0);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::InputShape {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn residual_sign_and_empty() {
        let topo = Topology::new(1, 1).unwrap();
        let net = Network::dense(topo, ParameterVector(vec![0.0, 0.0, 0.0, 1.0])).unwrap();
        let ds = Dataset::from_rows(vec![vec![3.0], vec![-2.0]], vec![0.0, 2.0]).unwrap();
        assert_eq!(net.residuals(&ds).unwrap(), vec![1.0, -1.0]);
        let empty = Dataset::from_rows(Vec::new(), Vec::new()).unwrap();
        assert!(matches!(net.residuals(&empty), Err(Error::EmptyData(_))));
        assert!(matches!(net.jacobian(&empty), Err(Error::EmptyData(_))));
    }

    #[test]
    fn exact_fit_has_zero_residual() {
        let net = one_one_one(2.0, -1.0, 3.0, 0.5);
        let ds = Dataset::from_rows(vec![vec![1.0]], vec![2.784_782_467_867_294_7]).unwrap();
        assert!(net.residuals(&ds).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn jacobian_simple_columns() {
        let topo = Topology::new(2, 2).unwrap();
        let p = ParameterVector(vec![0.3, -0.2, 0.7, 0.1, 0.05, -0.4, 1.2, -0.8, 0.25]);
        let net = Network::dense(topo, p).unwrap();
        let ds = Dataset::from_rows(
            vec![vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.0, 0.0]],
            vec![0.0; 3],
        )
        .unwrap();
        let jac = net.jacobian(&ds).unwrap();
        for (i, (x, _)) in ds.rows().enumerate() {
            assert_eq!(jac[(i, topo.b2_index())], 1.0);
            for j in 0..2 {
                assert_eq!(jac[(i, topo.w2_index(j))], net.hidden_activation(j, x));
            }
        }
    }

    #[test]
    fn jacobian_drops_masked_columns() {
        let topo = Topology::new(2, 1).unwrap();
        let mask = ConnectionMask(vec![true, false, true, true, true]);
        let net = Network::masked(topo, ParameterVector(vec![0.5; 5]), mask).unwrap();
        assert_eq!(net.params().0[1], 0.0);
        let ds = Dataset::from_rows(vec![vec![1.0, 1.0]; 4], vec![0.0; 4]).unwrap();
        let jac = net.jacobian(&ds).unwrap();
        assert_eq!(jac.ncols(), 4);
        // last active column is B2
        assert!(jac.column(3).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mask_invariant_enforced() {
        let topo = Topology::new(1, 1).unwrap();
        let mask = ConnectionMask(vec![true, false, true, true]);
        let err = Network::new(
            topo,
            ParameterVector(vec![1.0, 0.1, 1.0, 0.0]),
            mask.clone(),
        );
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
        let short = Network::new(
            topo,
            ParameterVector(vec![0.0; 4]),
            ConnectionMask(vec![true; 3]),
        );
        assert!(matches!(
            short,
            Err(Error::MaskShape {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn mask_application_is_idempotent() {
        let topo = Topology::new(3, 2).unwrap();
        let p = ParameterVector((0..topo.n_params()).map(|i| i as f64 * 0.1 - 0.4).collect());
        let mask = ConnectionMask((0..topo.n_params()).map(|i| i % 3 != 0).collect());
        let once = Network::masked(topo, p.clone(), mask.clone()).unwrap();
        let twice = once.with_mask(mask).unwrap();
        assert_eq!(once, twice);
        let dense = Network::dense(topo, p.clone()).unwrap();
        let full = Network::masked(topo, p, ConnectionMask::all_active(&topo)).unwrap();
        let x = [0.3, -1.1, 2.0];
        assert_eq!(
            dense.forward(&x).unwrap().to_bits(),
            full.forward(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn pack_rejects_ragged() {
        let layers = Layers {
            w1: vec![vec![1.0, 2.0], vec![3.0]],
            b1: vec![0.0, 0.0],
            w2: vec![0.0, 0.0],
            b2: 0.0,
        };
        assert!(matches!(pack(&layers), Err(Error::InputShape { .. })));
        let topo = Topology::new(2, 2).unwrap();
        assert!(unpack(&ParameterVector(vec![0.0; 3]), &topo).is_err());
    }

    #[test]
    fn param_names() {
        let topo = Topology::new(7, 2).unwrap();
        assert_eq!(topo.param_name(2), "W1[0][2]");
        assert_eq!(topo.param_name(14), "B1[0]");
        assert_eq!(topo.param_name(17), "W2[1]");
        assert_eq!(topo.param_name(18), "B2");
    }
}
