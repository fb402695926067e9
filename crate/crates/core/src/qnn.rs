//! Variational quantum classifier.
//!
//! Angle embedding, `L` strongly entangling layers, per-qubit ⟨Z⟩ readout and
//! a single dense unit with a sigmoid. Quantum-parameter gradients use the
//! two-point parameter-shift rule; the readout gradients are analytic.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par::map_indexed;
use crate::prep::{check_binary_labels, stratified_split};
use crate::qsim::{Circuit, Gate, NoiseModel, RotationBlock, SelWiring, StateVector};
use crate::rng::task_rng;

/// Probabilities are clipped to `[EPS, 1 - EPS]` inside the loss.
pub const LOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QnnParams {
    pub theta: RotationBlock,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl QnnParams {
    pub fn zeros(layers: usize, n_qubits: usize) -> Self {
        Self { theta: RotationBlock::zeros(layers, n_qubits), weights: vec![0.0; n_qubits], bias: 0.0 }
    }

    /// θ uniform in [0, 2π); readout weights and bias start at zero.
    pub fn init<R: Rng + ?Sized>(layers: usize, n_qubits: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(layers, n_qubits);
        for a in p.theta.as_mut_slice() {
            *a = rng.random_range(0.0..TAU);
        }
        p
    }

    pub fn n_qubits(&self) -> usize {
        self.weights.len()
    }

    pub fn layers(&self) -> usize {
        self.theta.layers()
    }

    /// Total parameter count: θ entries, then weights, then bias.
    pub fn len(&self) -> usize {
        self.theta.len() + self.weights.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(self.theta.as_slice());
        v.extend_from_slice(&self.weights);
        v.push(self.bias);
        v
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: flat.len() });
        }
        let nt = self.theta.len();
        let nw = self.weights.len();
        self.theta.as_mut_slice().copy_from_slice(&flat[..nt]);
        self.weights.copy_from_slice(&flat[nt..nt + nw]);
        self.bias = flat[nt + nw];
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.qubits() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.theta.qubits(), actual: self.weights.len() });
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("qnn parameters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub n_qubits: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Share of the training rows held out for the validation curve.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_qubits: 13,
            layers: 7,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 100,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Serializable trained classifier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QnnModel {
    pub config: TrainConfig,
    pub params: QnnParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnnOutput {
    pub logit: f64,
    pub prob: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn check_input(x: &[f64], params: &QnnParams) -> Result<()> {
    if x.len() != params.n_qubits() {
        return Err(Error::DimensionMismatch { expected: params.n_qubits(), actual: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("qnn input"));
    }
    Ok(())
}

fn ansatz(params: &QnnParams) -> Result<Circuit> {
    SelWiring::ring(params.n_qubits(), params.layers()).circuit(&params.theta)
}

fn readout(z: &[f64], params: &QnnParams) -> QnnOutput {
    let logit = params.weights.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + params.bias;
    QnnOutput { logit, prob: sigmoid(logit) }
}

/// Per-qubit ⟨Zᵢ⟩ after embedding and ansatz.
pub fn expectations(x: &[f64], params: &QnnParams) -> Result<Vec<f64>> {
    check_input(x, params)?;
    let mut circuit = Circuit::angle_embedding(x)?;
    circuit.append(&ansatz(params)?)?;
    Ok(circuit.run()?.expectations_z())
}

/// Trajectory mean of ⟨Zᵢ⟩ with `noise` after every gate, embedding included.
pub fn expectations_noisy<R: Rng + ?Sized>(
    x: &[f64],
    params: &QnnParams,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if noise.is_trivial() {
        return expectations(x, params);
    }
    check_input(x, params)?;
    let mut circuit = Circuit::angle_embedding(x)?;
    circuit.append(&ansatz(params)?)?;
    let mut acc = vec![0.0; params.n_qubits()];
    for _ in 0..noise.trajectories {
        let mut s = StateVector::zero(params.n_qubits())?;
        circuit.apply_noisy(&mut s, &noise.channel, rng)?;
        for (a, z) in acc.iter_mut().zip(s.expectations_z()) {
            *a += z;
        }
    }
    let t = noise.trajectories as f64;
    Ok(acc.into_iter().map(|a| a / t).collect())
}

pub fn qnn_forward(x: &[f64], params: &QnnParams) -> Result<QnnOutput> {
    Ok(readout(&expectations(x, params)?, params))
}

pub fn qnn_forward_noisy<R: Rng + ?Sized>(
    x: &[f64],
    params: &QnnParams,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<QnnOutput> {
    Ok(readout(&expectations_noisy(x, params, noise, rng)?, params))
}

/// Forward pass over every row. With noise, row i draws from stream i of `seed`.
pub fn qnn_predict(x: &Matrix, params: &QnnParams, noise: Option<&NoiseModel>, seed: u64) -> Result<Vec<QnnOutput>> {
    params.validate()?;
    map_indexed(x.n_rows(), |i| match noise {
        None => qnn_forward(x.row(i), params),
        Some(n) => qnn_forward_noisy(x.row(i), params, n, &mut task_rng(seed, i as u64)),
    })
    .into_iter()
    .collect()
}

pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), actual: labels.len() });
    }
    if probs.is_empty() {
        return Err(Error::Empty("probabilities"));
    }
    check_binary_labels(labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            if y == 1 {
                -libm::log(p)
            } else {
                -libm::log(1.0 - p)
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

// Gradient of the per-sample BCE. The embedded state and every gate prefix
// are shared between the ± shifts of a rotation.
fn sample_gradient(x: &[f64], params: &QnnParams, label: u8) -> Result<Vec<f64>> {
    check_input(x, params)?;
    let n = params.n_qubits();
    let circuit = ansatz(params)?;
    let gates = circuit.gates();

    let mut prefix = StateVector::zero(n)?;
    Circuit::angle_embedding(x)?.apply(&mut prefix)?;
    let mut full = prefix.clone();
    circuit.apply(&mut full)?;
    let z = full.expectations_z();
    let out = readout(&z, params);
    let dlogit = out.prob - f64::from(label);

    let mut grad = vec![0.0; params.len()];
    let nt = params.theta.len();
    // Gates are emitted per layer as X, Y, Z on each qubit in order, so the
    // k-th rotation gate is θ entry k.
    let mut theta_idx = 0;
    let contributes = params.weights.iter().any(|&w| w != 0.0) && dlogit != 0.0;
    for (g_idx, gate) in gates.iter().enumerate() {
        if let Gate::Rotation { axis, qubit, angle } = *gate {
            if contributes {
                let mut dz = 0.0;
                for (shift, sign) in [(FRAC_PI_2, 1.0), (-FRAC_PI_2, -1.0)] {
                    let mut s = prefix.clone();
                    s.apply_rotation(qubit, axis, angle + shift)?;
                    circuit.apply_range(&mut s, g_idx + 1, gates.len());
                    let zs = s.expectations_z();
                    dz += sign * params.weights.iter().zip(&zs).map(|(w, z)| w * z).sum::<f64>();
                }
                grad[theta_idx] = dlogit * dz / 2.0;
            }
            theta_idx += 1;
        }
        circuit.apply_range(&mut prefix, g_idx, g_idx + 1);
    }
    debug_assert_eq!(theta_idx, nt);
    for (q, zq) in z.iter().enumerate() {
        grad[nt + q] = dlogit * zq;
    }
    grad[nt + n] = dlogit;
    Ok(grad)
}

/// ∂BCE/∂params for one sample, laid out like `params`.
pub fn parameter_shift_grad(x: &[f64], params: &QnnParams, label: u8) -> Result<QnnParams> {
    check_binary_labels(&[label])?;
    let sg = sample_gradient(x, params, label)?;
    let mut g = params.clone();
    g.copy_from_flat(&sg)?;
    Ok(g)
}

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update; increments `state.t` first.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), actual: grads.len() });
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(AdamState::BETA1, t);
    let c2 = 1.0 - libm::pow(AdamState::BETA2, t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = AdamState::BETA1 * state.m[i] + (1.0 - AdamState::BETA1) * g;
        state.v[i] = AdamState::BETA2 * state.v[i] + (1.0 - AdamState::BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + AdamState::EPS);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

fn loss_and_accuracy(x: &Matrix, y: &[u8], idx: &[usize], params: &QnnParams) -> Result<(f64, f64)> {
    let probs: Vec<f64> = map_indexed(idx.len(), |k| qnn_forward(x.row(idx[k]), params).map(|o| o.prob))
        .into_iter()
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
    let loss = bce_loss(&probs, &labels)?;
    let correct = probs.iter().zip(&labels).filter(|(p, y)| u8::from(**p >= 0.5) == **y).count();
    Ok((loss, correct as f64 / idx.len() as f64))
}

/// Mini-batch Adam on mean parameter-shift gradients.
///
/// A stratified `validation_fraction` of the rows is held out for the
/// validation curve when each class can spare at least one sample.
pub fn train_qnn(x: &Matrix, y: &[u8], config: &TrainConfig) -> Result<(QnnParams, TrainHistory)> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), actual: y.len() });
    }
    if x.n_cols() != config.n_qubits {
        return Err(Error::DimensionMismatch { expected: config.n_qubits, actual: x.n_cols() });
    }
    check_binary_labels(y)?;
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    if config.batch_size == 0 || config.layers == 0 {
        return Err(Error::InvalidArgument("batch size and layer count must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::InvalidArgument("validation fraction must be in [0, 1)".into()));
    }

    let (mut train_idx, val_idx) = if config.validation_fraction > 0.0 {
        match stratified_split(y, 1.0 - config.validation_fraction, config.seed) {
            Ok((t, v)) if !v.is_empty() => (t, v),
            _ => ((0..y.len()).collect(), Vec::new()),
        }
    } else {
        ((0..y.len()).collect(), Vec::new())
    };

    let mut init_rng = task_rng(config.seed, 1);
    let mut shuffle_rng = task_rng(config.seed, 2);
    let mut params = QnnParams::init(config.layers, config.n_qubits, &mut init_rng);
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(flat.len());
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut shuffle_rng);
        for batch in train_idx.chunks(config.batch_size) {
            let grads = map_indexed(batch.len(), |k| sample_gradient(x.row(batch[k]), &params, y[batch[k]]));
            let mut mean = vec![0.0; flat.len()];
            for g in grads {
                for (m, v) in mean.iter_mut().zip(g?) {
                    *m += v;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
            adam_step(&mut flat, &mean, &mut adam, config.learning_rate)?;
            params.copy_from_flat(&flat)?;
        }
        let (train_loss, train_accuracy) = loss_and_accuracy(x, y, &train_idx, &params)?;
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, a) = loss_and_accuracy(x, y, &val_idx, &params)?;
            (Some(l), Some(a))
        };
        log::debug!("qnn epoch {epoch}: loss {train_loss:.5} acc {train_accuracy:.4}");
        history.epochs.push(EpochRecord { epoch: epoch + 1, train_loss, train_accuracy, val_loss, val_accuracy });
    }
    params.validate()?;
    Ok((params, history))
}
