use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::noise::{apply_channel_trajectory_unchecked, NoiseChannel};
use super::state::{Axis, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rotation { axis: Axis, qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

/// A validated gate list on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    /// Angle-embedding feature map: R_Y(xᵢ) on qubit i.
    pub fn angle_embedding(x: &[f64]) -> Result<Self> {
        let mut c = Self::new(x.len());
        for (q, &angle) in x.iter().enumerate() {
            c.rotation(q, Axis::Y, angle)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn rotation(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<&mut Self> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit, n_qubits: self.n_qubits });
        }
        if !angle.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        self.gates.push(Gate::Rotation { axis, qubit, angle });
        Ok(self)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        for q in [control, target] {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
        }
        if control == target {
            return Err(Error::SameQubit(control));
        }
        self.gates.push(Gate::Cnot { control, target });
        Ok(self)
    }

    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: other.n_qubits });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(self)
    }

    /// U†: gates reversed, rotation angles negated. CNOT is self-inverse.
    pub fn adjoint(&self) -> Circuit {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| match *g {
                Gate::Rotation { axis, qubit, angle } => Gate::Rotation { axis, qubit, angle: -angle },
                cnot => cnot,
            })
            .collect();
        Circuit { n_qubits: self.n_qubits, gates }
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: state.n_qubits() });
        }
        Ok(())
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        self.check_state(state)?;
        for g in &self.gates {
            apply_gate(state, g);
        }
        Ok(())
    }

    /// One noisy trajectory: after every gate, `channel` is sampled on each
    /// qubit the gate touched (control before target for CNOT).
    pub fn apply_noisy<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        channel: &NoiseChannel,
        rng: &mut R,
    ) -> Result<()> {
        self.check_state(state)?;
        for g in &self.gates {
            apply_gate(state, g);
            match *g {
                Gate::Rotation { qubit, .. } => apply_channel_trajectory_unchecked(state, channel, qubit, rng),
                Gate::Cnot { control, target } => {
                    apply_channel_trajectory_unchecked(state, channel, control, rng);
                    apply_channel_trajectory_unchecked(state, channel, target, rng);
                }
            }
        }
        Ok(())
    }

    /// Applies `gates[from..to]` without re-validating the state.
    pub(crate) fn apply_range(&self, state: &mut StateVector, from: usize, to: usize) {
        for g in &self.gates[from..to] {
            apply_gate(state, g);
        }
    }

    pub fn run(&self) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n_qubits)?;
        self.apply(&mut s)?;
        Ok(s)
    }
}

fn apply_gate(state: &mut StateVector, g: &Gate) {
    match *g {
        Gate::Rotation { axis, qubit, angle } => state.apply_matrix_unchecked(qubit, &axis.rotation(angle)),
        Gate::Cnot { control, target } => state.apply_cnot_unchecked(control, target),
    }
}

/// Rotation angles θ[layer][qubit][axis] for the strongly entangling ansatz,
/// axis index 0 = X, 1 = Y, 2 = Z.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotationBlock {
    layers: usize,
    qubits: usize,
    angles: Vec<f64>,
}

impl RotationBlock {
    pub fn zeros(layers: usize, qubits: usize) -> Self {
        Self { layers, qubits, angles: vec![0.0; layers * qubits * 3] }
    }

    pub fn from_vec(layers: usize, qubits: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = layers * qubits * 3;
        if angles.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: angles.len() });
        }
        Ok(Self { layers, qubits, angles })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    #[inline]
    pub fn index(&self, layer: usize, qubit: usize, axis: usize) -> usize {
        (layer * self.qubits + qubit) * 3 + axis
    }

    pub fn get(&self, layer: usize, qubit: usize, axis: usize) -> f64 {
        self.angles[self.index(layer, qubit, axis)]
    }

    pub fn set(&mut self, layer: usize, qubit: usize, axis: usize, v: f64) {
        let i = self.index(layer, qubit, axis);
        self.angles[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Entangler layout of the ansatz: per layer, the ordered CNOT pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelWiring {
    n_qubits: usize,
    layers: Vec<Vec<(usize, usize)>>,
}

impl SelWiring {
    /// Range-1 ring `i → (i+1) mod n` on every layer; no entanglers when n = 1.
    pub fn ring(n_qubits: usize, n_layers: usize) -> Self {
        let ring: Vec<(usize, usize)> =
            if n_qubits < 2 { Vec::new() } else { (0..n_qubits).map(|i| (i, (i + 1) % n_qubits)).collect() };
        Self { n_qubits, layers: vec![ring; n_layers] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &[(usize, usize)] {
        &self.layers[l]
    }

    /// Ansatz circuit: per layer, R_X, R_Y, R_Z on each qubit, then the ring.
    pub fn circuit(&self, theta: &RotationBlock) -> Result<Circuit> {
        if theta.layers() != self.n_layers() {
            return Err(Error::DimensionMismatch { expected: self.n_layers(), actual: theta.layers() });
        }
        if theta.qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: theta.qubits() });
        }
        let mut c = Circuit::new(self.n_qubits);
        for (l, pairs) in self.layers.iter().enumerate() {
            for q in 0..self.n_qubits {
                for (k, axis) in Axis::ALL.into_iter().enumerate() {
                    c.rotation(q, axis, theta.get(l, q, k))?;
                }
            }
            for &(control, target) in pairs {
                c.cnot(control, target)?;
            }
        }
        Ok(c)
    }
}

pub fn apply_sel_ansatz(state: &mut StateVector, theta: &RotationBlock, wiring: &SelWiring) -> Result<()> {
    wiring.circuit(theta)?.apply(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::angle_embed;
    use core::f64::consts::PI;
    use num_complex::Complex64;
    use rand::SeedableRng;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> =
            (0..1 << n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        StateVector::from_amplitudes(amps).unwrap()
    }

    // Explicit permutation matrix of the CNOT ring product, built from bit
    // arithmetic rather than the simulator.
    fn ring_permutation(n: usize) -> Vec<usize> {
        let dim = 1 << n;
        let mut perm: Vec<usize> = (0..dim).collect();
        for i in 0..n {
            let (c, t) = (i, (i + 1) % n);
            perm = perm.into_iter().map(|k| if k >> c & 1 == 1 { k ^ (1 << t) } else { k }).collect();
        }
        perm
    }

    #[test]
    fn ring_wiring_covers_every_qubit() {
        let w = SelWiring::ring(4, 2);
        assert_eq!(w.layer(0), &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(w.layer(1), w.layer(0));
        assert!(SelWiring::ring(1, 3).layer(0).is_empty());
    }

    #[test]
    fn zero_angles_equal_explicit_cnot_ring() {
        for n in 1..=4 {
            let w = SelWiring::ring(n, 1);
            let theta = RotationBlock::zeros(1, n);
            let input = random_state(n, 100 + n as u64);
            let mut s = input.clone();
            apply_sel_ansatz(&mut s, &theta, &w).unwrap();
            let perm = if n == 1 { vec![0, 1] } else { ring_permutation(n) };
            let mut expected = vec![Complex64::new(0.0, 0.0); 1 << n];
            for (k, a) in input.amplitudes().iter().enumerate() {
                expected[perm[k]] = *a;
            }
            for (a, b) in s.amplitudes().iter().zip(&expected) {
                assert!((a - b).norm() < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn zero_angles_on_ground_state_is_identity() {
        let w = SelWiring::ring(3, 2);
        let mut s = StateVector::zero(3).unwrap();
        apply_sel_ansatz(&mut s, &RotationBlock::zeros(2, 3), &w).unwrap();
        assert!((s.probability(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_qubit_y_pi_flips() {
        let w = SelWiring::ring(1, 1);
        let theta = RotationBlock::from_vec(1, 1, vec![0.0, PI, 0.0]).unwrap();
        let mut s = StateVector::zero(1).unwrap();
        apply_sel_ansatz(&mut s, &theta, &w).unwrap();
        assert!((s.probability(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_order_is_x_then_y_then_z() {
        // R_Z R_Y R_X |0⟩ with θ = (π/2, π/2, 0): R_X(π/2)|0⟩ then R_Y(π/2).
        let theta = RotationBlock::from_vec(1, 1, vec![PI / 2.0, PI / 2.0, 0.0]).unwrap();
        let mut s = StateVector::zero(1).unwrap();
        apply_sel_ansatz(&mut s, &theta, &SelWiring::ring(1, 1)).unwrap();
        let mut manual = StateVector::zero(1).unwrap();
        manual.apply_rotation(0, Axis::X, PI / 2.0).unwrap();
        manual.apply_rotation(0, Axis::Y, PI / 2.0).unwrap();
        for (a, b) in s.amplitudes().iter().zip(manual.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
        // the reverse order gives a different state
        let mut reversed = StateVector::zero(1).unwrap();
        reversed.apply_rotation(0, Axis::Y, PI / 2.0).unwrap();
        reversed.apply_rotation(0, Axis::X, PI / 2.0).unwrap();
        let gap: f64 = s.amplitudes().iter().zip(reversed.amplitudes()).map(|(a, b)| (a - b).norm()).sum();
        assert!(gap > 0.1);
    }

    #[test]
    fn random_ansatz_preserves_norm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let angles = (0..2 * 3 * 3).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let theta = RotationBlock::from_vec(2, 3, angles).unwrap();
        let mut s = angle_embed(&[0.3, -1.1, 2.0], 3).unwrap();
        apply_sel_ansatz(&mut s, &theta, &SelWiring::ring(3, 2)).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let w = SelWiring::ring(3, 2);
        let mut s = StateVector::zero(3).unwrap();
        assert!(apply_sel_ansatz(&mut s, &RotationBlock::zeros(1, 3), &w).is_err());
        assert!(apply_sel_ansatz(&mut s, &RotationBlock::zeros(2, 2), &w).is_err());
    }

    #[test]
    fn adjoint_undoes_circuit() {
        let mut c = Circuit::angle_embedding(&[0.4, -0.9, 1.3]).unwrap();
        c.cnot(0, 2).unwrap().rotation(1, Axis::X, 0.77).unwrap();
        let mut full = c.clone();
        full.append(&c.adjoint()).unwrap();
        let s = full.run().unwrap();
        assert!((s.probability(0) - 1.0).abs() < 1e-12);
    }
}
