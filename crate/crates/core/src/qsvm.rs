//! Quantum-kernel SVM: fidelity Gram matrices, an SMO dual solver on the
//! precomputed kernel, and Platt probability calibration.
//!
//! Labels are `{0, 1}` at the API boundary and `{-1, +1}` inside the solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::par::map_indexed;
use crate::prep::{check_binary_labels, stratified_folds};
use crate::qsim::{fidelity_kernel_noisy, fidelity_kernel_value, NoiseModel};
use crate::rng::task_rng;

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;
const TAU: f64 = 1e-12;

fn check_cols(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.n_cols() != b.n_cols() {
        return Err(Error::DimensionMismatch { expected: a.n_cols(), actual: b.n_cols() });
    }
    Ok(())
}

/// `K[i][j] = k(a_i, b_j)` for every row pair.
pub fn compute_kernel_block(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_cols(a, b)?;
    let rows = map_indexed(a.n_rows(), |i| {
        b.rows().map(|bj| fidelity_kernel_value(a.row(i), bj)).collect::<Result<Vec<f64>>>()
    });
    let data = rows.into_iter().collect::<Result<Vec<_>>>()?.concat();
    Matrix::from_vec(a.n_rows(), b.n_rows(), data)
}

/// Gram matrix of `a` with itself. Only the upper triangle is evaluated.
pub fn compute_kernel_matrix(a: &Matrix) -> Result<KernelMatrix> {
    let m = a.n_rows();
    let upper =
        map_indexed(m, |i| (i..m).map(|j| fidelity_kernel_value(a.row(i), a.row(j))).collect::<Result<Vec<f64>>>());
    let mut k = Matrix::zeros(m, m);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            k.set(i, i + off, v);
            k.set(i + off, i, v);
        }
    }
    KernelMatrix::new(k)
}

/// Kernel block with every entry estimated under `noise`. Entry `(i, j)`
/// draws from its own stream so results do not depend on scheduling.
pub fn compute_kernel_block_noisy(a: &Matrix, b: &Matrix, noise: &NoiseModel, seed: u64) -> Result<Matrix> {
    if noise.is_trivial() {
        return compute_kernel_block(a, b);
    }
    check_cols(a, b)?;
    let nb = b.n_rows();
    let rows = map_indexed(a.n_rows(), |i| {
        (0..nb)
            .map(|j| {
                let mut rng = task_rng(seed, (i * nb + j) as u64);
                fidelity_kernel_noisy(a.row(i), b.row(j), noise, &mut rng)
            })
            .collect::<Result<Vec<f64>>>()
    });
    let data = rows.into_iter().collect::<Result<Vec<_>>>()?.concat();
    Matrix::from_vec(a.n_rows(), nb, data)
}

/// Square kernel matrix checked for symmetry and positive semi-definiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    matrix: Matrix,
}

impl KernelMatrix {
    /// Rejects non-square, non-finite or asymmetric input. Eigenvalues below
    /// `-PSD_TOL` are clipped to zero and the matrix rebuilt.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::DimensionMismatch { expected: matrix.n_rows(), actual: matrix.n_cols() });
        }
        if matrix.is_empty() {
            return Err(Error::Empty("kernel matrix"));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("kernel matrix"));
        }
        let (gap, row, col) = matrix.max_asymmetry();
        if gap > SYMMETRY_TOL {
            return Err(Error::KernelAsymmetric { row, col, gap });
        }
        let eig = SymmetricEigen::new(&matrix)?;
        let min = eig.min_value();
        if min < -PSD_TOL {
            log::warn!("kernel matrix has eigenvalue {min:e}; clipping negative spectrum");
            return Ok(Self { matrix: eig.reconstruct_with(|v| v.max(0.0)) });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Principal submatrix; stays symmetric PSD without re-checking.
    pub fn principal(&self, idx: &[usize]) -> KernelMatrix {
        KernelMatrix { matrix: self.matrix.select(idx, idx) }
    }
}

fn signed(y: &[u8]) -> Result<Vec<f64>> {
    check_binary_labels(y)?;
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    /// Iteration cap as a multiple of the training-set size.
    pub max_passes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { c: 10.0, tol: 1e-3, max_passes: 10_000 }
    }
}

/// Dual solution on a fixed training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    /// ±1 per training sample.
    pub signs: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub iterations: usize,
}

impl SvmModel {
    /// αᵢyᵢ per training sample.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alphas.iter().zip(&self.signs).map(|(a, s)| a * s).collect()
    }

    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.alphas.len()).filter(|&i| self.alphas[i] > 0.0).collect()
    }

    /// Σα − ½ Σᵢⱼ αᵢαⱼyᵢyⱼKᵢⱼ.
    pub fn dual_objective(&self, k: &KernelMatrix) -> f64 {
        dual_objective(&self.alphas, &self.signs, k.matrix())
    }
}

pub fn dual_objective(alphas: &[f64], signs: &[f64], k: &Matrix) -> f64 {
    let mut quad = 0.0;
    for i in 0..alphas.len() {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..alphas.len() {
            quad += alphas[i] * alphas[j] * signs[i] * signs[j] * k.get(i, j);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// SMO with maximal-violating-pair selection. Stops once the KKT gap
/// `max_{I_up} -yG - min_{I_low} -yG` drops below `tol`.
pub fn smo_solve(k: &KernelMatrix, y: &[u8], config: &SmoConfig) -> Result<SvmModel> {
    let m = k.size();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: y.len() });
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(config.c) || !positive(config.tol) {
        return Err(Error::InvalidArgument("C and tol must be positive".into()));
    }
    let s = signed(y)?;
    let c = config.c;
    let kk = k.matrix();
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let max_iter = config.max_passes.saturating_mul(m.max(1));
    let mut iter = 0;
    loop {
        let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..m {
            let v = -s[t] * grad[t];
            let up = if s[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            let low = if s[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < config.tol {
            break;
        }
        if iter >= max_iter {
            log::warn!("smo: iteration cap {max_iter} reached with gap {:e}", gmax - gmin);
            break;
        }
        iter += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let kij = kk.get(i, j);
        let quad = {
            let q = kk.get(i, i) + kk.get(j, j) - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if s[i] != s[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..m {
            grad[t] += s[t] * (s[i] * kk.get(t, i) * di + s[j] * kk.get(t, j) * dj);
        }
    }

    // b from free vectors, else the middle of the feasible interval
    let (mut sum, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..m {
        let v = -s[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += v;
            n_free += 1;
        } else if (alpha[t] == 0.0) == (s[t] > 0.0) {
            // b ≥ v keeps these bound vectors KKT-feasible
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    let bias = if n_free > 0 {
        sum / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    Ok(SvmModel { alphas: alpha, signs: s, bias, c, iterations: iter })
}

/// Σⱼ αⱼyⱼ K[i][j] + b for each row of a test-by-train kernel block.
pub fn decision_values(model: &SvmModel, k_test_train: &Matrix) -> Result<Vec<f64>> {
    if k_test_train.n_cols() != model.alphas.len() {
        return Err(Error::DimensionMismatch { expected: model.alphas.len(), actual: k_test_train.n_cols() });
    }
    let coef = model.coefficients();
    Ok(k_test_train.rows().map(|r| r.iter().zip(&coef).map(|(k, a)| k * a).sum::<f64>() + model.bias).collect())
}

/// Largest KKT violation over the training set, measured on `y f(x)`.
pub fn kkt_max_violation(model: &SvmModel, k: &KernelMatrix) -> Result<f64> {
    let f = decision_values(model, k.matrix())?;
    let mut worst: f64 = 0.0;
    for (t, ft) in f.iter().enumerate() {
        let margin = model.signs[t] * ft;
        let a = model.alphas[t];
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// `p = σ(A·f + B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, f: f64) -> f64 {
        crate::qnn::sigmoid(self.a * f + self.b)
    }
}

// -log σ(z), computed without overflow.
fn neg_log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        libm::log1p(libm::exp(-z))
    } else {
        -z + libm::log1p(libm::exp(z))
    }
}

/// Maximum-likelihood sigmoid fit on decision values with Platt's smoothed
/// targets, by Newton's method with backtracking.
pub fn platt_calibrate(decision: &[f64], labels: &[u8]) -> Result<Platt> {
    if decision.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: decision.len(), actual: labels.len() });
    }
    if decision.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("decision values"));
    }
    signed(labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = labels.iter().map(|&y| if y == 1 { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = a * f + b;
                ti * neg_log_sigmoid(z) + (1.0 - ti) * neg_log_sigmoid(-z)
            })
            .sum()
    };

    let (mut a, mut b) = (0.0, libm::log((n_pos + 1.0) / (n_neg + 1.0)));
    let mut fval = objective(a, b);
    const RIDGE: f64 = 1e-12;
    for _ in 0..100 {
        let (mut ga, mut gb, mut h11, mut h22, mut h21) = (0.0, 0.0, RIDGE, RIDGE, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let p = crate::qnn::sigmoid(a * f + b);
            let d = p - ti;
            let w = p * (1.0 - p);
            ga += d * f;
            gb += d;
            h11 += w * f * f;
            h22 += w;
            h21 += w * f;
        }
        if ga.abs() < 1e-5 && gb.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * ga - h21 * gb) / det;
        let db = -(-h21 * ga + h11 * gb) / det;
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * slope {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            log::debug!("platt: line search stalled");
            break;
        }
    }
    Ok(Platt { a, b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct QsvmConfig {
    pub smo: SmoConfig,
    /// Folds used to produce out-of-fold margins for the Platt fit.
    pub platt_folds: usize,
    pub seed: u64,
}

impl Default for QsvmConfig {
    fn default() -> Self {
        Self { smo: SmoConfig::default(), platt_folds: 3, seed: 0 }
    }
}

/// Trained classifier: support vectors with their αᵢyᵢ, bias and Platt map.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QsvmModel {
    pub c: f64,
    pub bias: f64,
    pub support: Matrix,
    pub coefficients: Vec<f64>,
    pub platt: Platt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsvmOutput {
    pub margin: Vec<f64>,
    pub prob: Vec<f64>,
}

impl QsvmModel {
    pub fn n_features(&self) -> usize {
        self.support.n_cols()
    }

    fn margins_from_block(&self, block: &Matrix) -> Vec<f64> {
        block.rows().map(|r| r.iter().zip(&self.coefficients).map(|(k, a)| k * a).sum::<f64>() + self.bias).collect()
    }

    pub fn decision_function(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.margins_from_block(&compute_kernel_block(x, &self.support)?))
    }

    /// Margins with the kernel evaluated under `noise`.
    pub fn decision_function_noisy(&self, x: &Matrix, noise: &NoiseModel, seed: u64) -> Result<Vec<f64>> {
        Ok(self.margins_from_block(&compute_kernel_block_noisy(x, &self.support, noise, seed)?))
    }

    pub fn predict(&self, x: &Matrix, noise: Option<(&NoiseModel, u64)>) -> Result<QsvmOutput> {
        let margin = match noise {
            Some((model, seed)) => self.decision_function_noisy(x, model, seed)?,
            None => self.decision_function(x)?,
        };
        let prob = margin.iter().map(|&f| self.platt.probability(f)).collect();
        Ok(QsvmOutput { margin, prob })
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.support.n_rows() {
            return Err(Error::DimensionMismatch { expected: self.support.n_rows(), actual: self.coefficients.len() });
        }
        let finite = self.bias.is_finite()
            && self.platt.a.is_finite()
            && self.platt.b.is_finite()
            && self.support.is_finite()
            && self.coefficients.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("qsvm model"));
        }
        Ok(())
    }
}

/// Out-of-fold decision values on the training set: each fold is scored by
/// a model trained on the remaining folds.
pub fn out_of_fold_margins(k: &KernelMatrix, y: &[u8], smo: &SmoConfig, folds: usize, seed: u64) -> Result<Vec<f64>> {
    let fold = stratified_folds(y, folds, seed)?;
    let parts = map_indexed(folds, |f| -> Result<Vec<(usize, f64)>> {
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == f).collect();
        if test.is_empty() {
            return Ok(Vec::new());
        }
        let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let model = smo_solve(&k.principal(&train), &yt, smo)?;
        let block = k.matrix().select(&test, &train);
        Ok(test.into_iter().zip(decision_values(&model, &block)?).collect())
    });
    let mut out = vec![0.0; y.len()];
    for part in parts {
        for (i, v) in part? {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Solver diagnostics recorded at training time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QsvmAudit {
    pub n_train: usize,
    pub iterations: usize,
    pub n_support: usize,
    pub n_free: usize,
    pub n_at_bound: usize,
    pub dual_objective: f64,
    pub alpha_balance: f64,
    pub kkt_max_violation: f64,
    pub tol: f64,
    pub kkt_passed: bool,
}

pub fn train_qsvm(x: &Matrix, y: &[u8], config: &QsvmConfig) -> Result<QsvmModel> {
    train_qsvm_audited(x, y, config).map(|(m, _)| m)
}

/// Trains and also returns the KKT audit of the full-data dual solution.
pub fn train_qsvm_audited(x: &Matrix, y: &[u8], config: &QsvmConfig) -> Result<(QsvmModel, QsvmAudit)> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), actual: y.len() });
    }
    signed(y)?;
    let k = compute_kernel_matrix(x)?;
    let svm = smo_solve(&k, y, &config.smo)?;
    log::debug!("qsvm: {} iterations, {} support vectors", svm.iterations, svm.support_indices().len());
    let positives = y.iter().filter(|&&v| v == 1).count();
    let smallest = positives.min(y.len() - positives);
    let margins = if smallest >= config.platt_folds {
        out_of_fold_margins(&k, y, &config.smo, config.platt_folds, config.seed)?
    } else {
        log::warn!("qsvm: a class has {smallest} samples, fitting Platt on in-sample margins");
        decision_values(&svm, k.matrix())?
    };
    let platt = platt_calibrate(&margins, y)?;
    let sv = svm.support_indices();
    let coef = svm.coefficients();
    let model = QsvmModel {
        c: svm.c,
        bias: svm.bias,
        support: x.select_rows(&sv),
        coefficients: sv.iter().map(|&i| coef[i]).collect(),
        platt,
    };
    model.validate()?;
    let kkt = kkt_max_violation(&svm, &k)?;
    let n_free = svm.alphas.iter().filter(|&&a| a > 0.0 && a < svm.c).count();
    let audit = QsvmAudit {
        n_train: y.len(),
        iterations: svm.iterations,
        n_support: sv.len(),
        n_free,
        n_at_bound: sv.len() - n_free,
        dual_objective: svm.dual_objective(&k),
        alpha_balance: coef.iter().sum(),
        kkt_max_violation: kkt,
        tol: config.smo.tol,
        kkt_passed: kkt <= config.smo.tol,
    };
    if !audit.kkt_passed {
        log::warn!("qsvm: KKT violation {kkt:e} exceeds tol {:e}", config.smo.tol);
    }
    Ok((model, audit))
}
