use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (2^26 amplitudes, 1 GiB).
pub const MAX_QUBITS: usize = 26;

/// Row-major 2×2 complex matrix.
pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Matrix of `exp(-i·angle·P/2)`.
    pub fn rotation(self, angle: f64) -> Mat2 {
        let (s, c) = libm::sincos(angle / 2.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Axis::X => {
                [[Complex64::new(c, 0.0), Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), Complex64::new(c, 0.0)]]
            }
            Axis::Y => {
                [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
            }
            Axis::Z => [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::RegisterSize(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the caller is
    /// responsible for normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(alloc::format!("amplitude count {len} is not a power of two >= 2")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterSize(n_qubits));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    /// Applies an arbitrary 2×2 operator to `qubit` (not necessarily unitary).
    pub fn apply_matrix(&mut self, qubit: usize, m: &Mat2) -> Result<()> {
        self.check_qubit(qubit)?;
        self.apply_matrix_unchecked(qubit, m);
        Ok(())
    }

    pub(crate) fn apply_matrix_unchecked(&mut self, qubit: usize, m: &Mat2) {
        let mask = 1usize << qubit;
        let len = self.amps.len();
        let mut block = 0;
        while block < len {
            for i in block..block + mask {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
            block += mask << 1;
        }
    }

    pub fn apply_rotation(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        self.apply_matrix_unchecked(qubit, &axis.rotation(angle));
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameQubit(control));
        }
        self.apply_cnot_unchecked(control, target);
        Ok(())
    }

    pub(crate) fn apply_cnot_unchecked(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            // visit each swapped pair once, from its target-bit-clear member
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// ⟨Z⟩ on `qubit`, computed exactly from the amplitudes.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let mut acc = 0.0;
        for (k, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if k & mask == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }

    /// ⟨Z_i⟩ for every qubit in one pass over the amplitudes.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_qubits];
        for (k, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, zq) in z.iter_mut().enumerate() {
                if k >> q & 1 == 0 {
                    *zq += p;
                } else {
                    *zq -= p;
                }
            }
        }
        z
    }

    /// Single-qubit reduced density matrix ρ[a][b] of `qubit`.
    pub(crate) fn reduced_density(&self, qubit: usize) -> Mat2 {
        let mask = 1usize << qubit;
        let mut r00 = 0.0;
        let mut r11 = 0.0;
        let mut r01 = Complex64::new(0.0, 0.0);
        let len = self.amps.len();
        let mut block = 0;
        while block < len {
            for i in block..block + mask {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                r00 += a0.norm_sqr();
                r11 += a1.norm_sqr();
                r01 += a0 * a1.conj();
            }
            block += mask << 1;
        }
        [[Complex64::new(r00, 0.0), r01], [r01.conj(), Complex64::new(r11, 0.0)]]
    }
}

/// ⊗ᵢ R_Y(xᵢ)|0⟩ with feature i on qubit i.
pub fn angle_embed(x: &[f64], n_qubits: usize) -> Result<StateVector> {
    if x.len() != n_qubits {
        return Err(Error::DimensionMismatch { expected: n_qubits, actual: x.len() });
    }
    let mut state = StateVector::zero(n_qubits)?;
    for (q, &angle) in x.iter().enumerate() {
        state.apply_rotation(q, Axis::Y, angle)?;
    }
    Ok(state)
}
