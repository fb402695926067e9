//! Exact dense statevector simulation.
//!
//! Qubit 0 is the least-significant bit of the basis index. Rotations follow
//! `R_P(θ) = exp(-iθP/2)`.

mod circuit;
mod kernel;
mod noise;
mod state;

pub use circuit::{apply_sel_ansatz, Circuit, Gate, RotationBlock, SelWiring};
pub use kernel::{fidelity_kernel_noisy, fidelity_kernel_value, sample_zero_probability};
pub use noise::{apply_channel_trajectory, NoiseChannel, NoiseKind, NoiseModel};
pub use state::{angle_embed, Axis, Mat2, StateVector, MAX_QUBITS};

pub use num_complex::Complex64;
