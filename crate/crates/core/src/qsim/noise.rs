//! Single-qubit Kraus channels and their Monte-Carlo trajectory unraveling.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use super::state::{Mat2, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    AmplitudeDamping,
    BitFlip,
    PhaseFlip,
    PhaseDamping,
    Depolarizing,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::AmplitudeDamping,
        NoiseKind::BitFlip,
        NoiseKind::PhaseFlip,
        NoiseKind::PhaseDamping,
        NoiseKind::Depolarizing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::AmplitudeDamping => "amplitude_damping",
            NoiseKind::BitFlip => "bit_flip",
            NoiseKind::PhaseFlip => "phase_flip",
            NoiseKind::PhaseDamping => "phase_damping",
            NoiseKind::Depolarizing => "depolarizing",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown noise channel '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    kind: NoiseKind,
    p: f64,
}

impl NoiseChannel {
    pub fn new(kind: NoiseKind, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability(p));
        }
        Ok(Self { kind, p })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Kraus set of the channel. The first operator is the "no error" branch,
    /// so at p = 0 it is the identity and every other operator is zero.
    ///
    /// Damping channels use γ = p:
    /// amplitude `{[[1,0],[0,√(1−γ)]], [[0,√γ],[0,0]]}`,
    /// phase `{[[1,0],[0,√(1−γ)]], [[0,0],[0,√γ]]}`.
    pub fn kraus_operators(&self) -> Vec<Mat2> {
        let r = |v: f64| Complex64::new(v, 0.0);
        let z = r(0.0);
        let p = self.p;
        let id = [[r(1.0), z], [z, r(1.0)]];
        let x = [[z, r(1.0)], [r(1.0), z]];
        let y = [[z, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), z]];
        let zz = [[r(1.0), z], [z, r(-1.0)]];
        let scaled = |m: Mat2, w: f64| -> Mat2 { [[m[0][0] * w, m[0][1] * w], [m[1][0] * w, m[1][1] * w]] };
        match self.kind {
            NoiseKind::BitFlip => vec![scaled(id, libm::sqrt(1.0 - p)), scaled(x, libm::sqrt(p))],
            NoiseKind::PhaseFlip => vec![scaled(id, libm::sqrt(1.0 - p)), scaled(zz, libm::sqrt(p))],
            NoiseKind::Depolarizing => {
                let w = libm::sqrt(p / 3.0);
                vec![scaled(id, libm::sqrt(1.0 - p)), scaled(x, w), scaled(y, w), scaled(zz, w)]
            }
            NoiseKind::AmplitudeDamping => {
                vec![[[r(1.0), z], [z, r(libm::sqrt(1.0 - p))]], [[z, r(libm::sqrt(p))], [z, z]]]
            }
            NoiseKind::PhaseDamping => {
                vec![[[r(1.0), z], [z, r(libm::sqrt(1.0 - p))]], [[z, z], [z, r(libm::sqrt(p))]]]
            }
        }
    }
}

/// A channel plus the number of trajectories averaged per noisy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub channel: NoiseChannel,
    pub trajectories: usize,
}

impl NoiseModel {
    pub const DEFAULT_TRAJECTORIES: usize = 256;

    pub fn new(channel: NoiseChannel, trajectories: usize) -> Result<Self> {
        if trajectories == 0 {
            return Err(Error::InvalidArgument("trajectory count must be positive".into()));
        }
        Ok(Self { channel, trajectories })
    }

    /// A zero-probability channel never changes the state, so callers can take
    /// the exact noiseless path instead of averaging identical trajectories.
    pub fn is_trivial(&self) -> bool {
        self.channel.p() == 0.0
    }
}

/// Samples Kraus operator Kᵢ with probability ‖Kᵢ|ψ⟩‖², applies it to `qubit`
/// and renormalizes.
pub fn apply_channel_trajectory<R: Rng + ?Sized>(
    state: &mut StateVector,
    channel: &NoiseChannel,
    qubit: usize,
    rng: &mut R,
) -> Result<()> {
    if qubit >= state.n_qubits() {
        return Err(Error::QubitOutOfRange { qubit, n_qubits: state.n_qubits() });
    }
    apply_channel_trajectory_unchecked(state, channel, qubit, rng);
    Ok(())
}

pub(crate) fn apply_channel_trajectory_unchecked<R: Rng + ?Sized>(
    state: &mut StateVector,
    channel: &NoiseChannel,
    qubit: usize,
    rng: &mut R,
) {
    if channel.p() == 0.0 {
        return;
    }
    let rho = state.reduced_density(qubit);
    let ops = channel.kraus_operators();
    // ‖K|ψ⟩‖² = Tr(K†K ρ)
    let weights: Vec<f64> = ops
        .iter()
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    let kdk = k[0][a].conj() * k[0][b] + k[1][a].conj() * k[1][b];
                    acc += kdk * rho[b][a];
                }
            }
            acc.re.max(0.0)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut chosen = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && u < acc {
            chosen = i;
            break;
        }
    }
    state.apply_matrix_unchecked(qubit, &ops[chosen]);
    let w = weights[chosen];
    if w > 0.0 {
        state.scale(1.0 / libm::sqrt(w));
    }
}
