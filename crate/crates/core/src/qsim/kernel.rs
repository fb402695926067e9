use rand::Rng;

use super::circuit::Circuit;
use super::noise::NoiseModel;
use super::state::StateVector;
use crate::error::{Error, Result};

fn kernel_circuit(x: &[f64], y: &[f64]) -> Result<Circuit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    let mut c = Circuit::angle_embedding(x)?;
    c.append(&Circuit::angle_embedding(y)?.adjoint())?;
    Ok(c)
}

/// |⟨0|U†(y)U(x)|0⟩|², the all-zero probability of the kernel circuit.
pub fn fidelity_kernel_value(x: &[f64], y: &[f64]) -> Result<f64> {
    let state = kernel_circuit(x, y)?.run()?;
    Ok(state.probability(0))
}

/// Trajectory mean of the all-zero probability with `noise` after every gate.
pub fn fidelity_kernel_noisy<R: Rng + ?Sized>(x: &[f64], y: &[f64], noise: &NoiseModel, rng: &mut R) -> Result<f64> {
    let circuit = kernel_circuit(x, y)?;
    if noise.is_trivial() {
        return Ok(circuit.run()?.probability(0));
    }
    let mut acc = 0.0;
    for _ in 0..noise.trajectories {
        let mut s = StateVector::zero(circuit.n_qubits())?;
        circuit.apply_noisy(&mut s, &noise.channel, rng)?;
        acc += s.probability(0);
    }
    Ok(acc / noise.trajectories as f64)
}

/// Finite-shot estimate of a probability: the fraction of `shots` Bernoulli
/// draws that land on the outcome.
pub fn sample_zero_probability<R: Rng + ?Sized>(p: f64, shots: u32, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    if !(0.0..=1.0 + 1e-12).contains(&p) {
        return Err(Error::Probability(p));
    }
    let hits = (0..shots).filter(|_| rng.random::<f64>() < p).count();
    Ok(hits as f64 / shots as f64)
}
