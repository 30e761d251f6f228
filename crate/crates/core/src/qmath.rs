//! Small dense complex linear algebra and two-qubit entanglement metrics.
//!
//! Everything here works on 4×4 (one degree of freedom, two modes) or 16×16
//! (polarization ⊗ frequency-bin) matrices. The global basis ordering is
//! polarization ⊗ frequency, with the photon in spatial mode 3 written first
//! inside each factor:
//!
//! * polarization: `HH, HV, VH, VV` (mode 3, mode 4)
//! * frequency:    `ss, si, is, ii` (`s` = signal bin, `i` = idler bin)
//!
//! so global index = `4 * pol + freq`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance accepted by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance accepted by [`DensityMatrix::new`].
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue still considered physical.
pub const PSD_TOL: f64 = 1e-10;

pub const POL_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];
pub const FREQ_LABELS: [&str; 4] = ["ss", "si", "is", "ii"];

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmathError {
    #[error("matrix is not Hermitian (max |A - A†| = {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("matrix has negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),
    #[error("unsupported dimension {rows}x{cols}; expected {expected}")]
    Dimension {
        rows: usize,
        cols: usize,
        expected: &'static str,
    },
    #[error("state vector has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("cannot project the zero matrix onto the physical states")]
    ZeroMatrix,
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
}

/// Which factor of the 16-dimensional space to keep in [`partial_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Polarization,
    Frequency,
}

impl std::str::FromStr for Subsystem {
    type Err = QmathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "polarization" | "pol" => Ok(Subsystem::Polarization),
            "frequency" | "freq" => Ok(Subsystem::Frequency),
            other => Err(QmathError::UnknownSubsystem(other.to_string())),
        }
    }
}

/// Hermitian, positive-semidefinite, unit-trace matrix of dimension 4 or 16.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    labels: Vec<String>,
}

impl DensityMatrix {
    /// Validates `matrix` against the physicality tolerances.
    pub fn new(matrix: ComplexMatrix, labels: Vec<String>) -> Result<Self, QmathError> {
        check_dims(&matrix)?;
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(QmathError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QmathError::BadTrace(tr.re));
        }
        let min_eig = hermitian_eigenvalues(&matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(QmathError::NegativeEigenvalue(min_eig));
        }
        let labels = if labels.len() == matrix.nrows() {
            labels
        } else {
            default_labels(matrix.nrows())
        };
        Ok(Self { matrix, labels })
    }

    /// Builds a density matrix with the default labels for its dimension.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self, QmathError> {
        Self::new(matrix, Vec::new())
    }

    /// Like [`DensityMatrix::from_matrix`] but first symmetrizes and rescales
    /// the trace, absorbing quadrature round-off.
    pub fn from_unnormalized(matrix: ComplexMatrix) -> Result<Self, QmathError> {
        check_dims(&matrix)?;
        let herm = (&matrix + matrix.adjoint()).scale(0.5);
        let tr = herm.trace().re;
        if tr <= 0.0 {
            return Err(QmathError::ZeroMatrix);
        }
        Self::from_matrix(herm.unscale(tr))
    }

    pub fn pure(state: &[Complex64]) -> Result<Self, QmathError> {
        let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QmathError::NotNormalized(norm));
        }
        let v = nalgebra::DVector::from_column_slice(state);
        Self::from_unnormalized(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, QmathError> {
        Self::from_matrix(ComplexMatrix::identity(dim, dim).unscale(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Self {
        if labels.len() == self.dim() {
            self.labels = labels.iter().map(|s| s.to_string()).collect();
        }
        self
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, QmathError> {
        DensityMatrix::from_unnormalized(self.matrix.kronecker(&other.matrix))
    }

    /// `U ρ U†` for a unitary of matching dimension.
    pub fn conjugate_by(&self, unitary: &ComplexMatrix) -> Result<DensityMatrix, QmathError> {
        let out = unitary * &self.matrix * unitary.adjoint();
        DensityMatrix::from_unnormalized(out).map(|d| DensityMatrix {
            labels: self.labels.clone(),
            ..d
        })
    }

    /// Frobenius distance to another matrix.
    pub fn distance(&self, other: &ComplexMatrix) -> f64 {
        (&self.matrix - other).norm()
    }
}

fn check_dims(m: &ComplexMatrix) -> Result<(), QmathError> {
    let (r, c) = m.shape();
    if r != c || !(r == 4 || r == 16) {
        return Err(QmathError::Dimension {
            rows: r,
            cols: c,
            expected: "4x4 or 16x16",
        });
    }
    Ok(())
}

fn default_labels(dim: usize) -> Vec<String> {
    if dim == 4 {
        POL_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        POL_LABELS
            .iter()
            .flat_map(|p| FREQ_LABELS.iter().map(move |f| format!("{p}|{f}")))
            .collect()
    }
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigen-decomposition of a Hermitian matrix: `(eigenvalues, eigenvectors as columns)`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Rebuilds `V diag(values) V†`.
pub fn from_eigen(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// Pure two-qubit state `a|00⟩ + b|01⟩ + c|10⟩ + d|11⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState2Q([Complex64; 4]);

impl PureState2Q {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self, QmathError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QmathError::NotNormalized(norm));
        }
        Ok(Self(amplitudes))
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(amplitudes: [Complex64; 4]) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Self(amplitudes.map(|a| a / norm))
    }

    /// (|00⟩ + |11⟩)/√2, i.e. Φ⁺ = (|HH⟩ + |VV⟩)/√2.
    pub fn phi_plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self([C1 * r, C0, C0, C1 * r])
    }

    /// (|01⟩ + |10⟩)/√2.
    pub fn psi_plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self([C0, C1 * r, C1 * r, C0])
    }

    /// (|01⟩ − |10⟩)/√2; in the frequency basis this is (|ωsωi⟩ − |ωiωs⟩)/√2.
    pub fn psi_minus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self([C0, C1 * r, -C1 * r, C0])
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.0
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::pure(&self.0).expect("normalized by construction")
    }
}

const EIGEN_NOISE: f64 = 1e-14;

/// Wootters concurrence of a two-qubit density matrix.
///
/// Uses `λᵢ = sqrt(eig(√ρ ρ̃ √ρ))`, which has the same spectrum as `ρ ρ̃` but
/// only needs Hermitian eigen-solves.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64, QmathError> {
    if rho.dim() != 4 {
        return Err(QmathError::Dimension {
            rows: rho.dim(),
            cols: rho.dim(),
            expected: "4x4",
        });
    }
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    if let Some(&min) = vals.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -PSD_TOL {
            return Err(QmathError::NegativeEigenvalue(min));
        }
    }
    // Eigenvalues at round-off level would otherwise leak ~1e-8 through sqrt.
    let floor = |v: f64, scale: f64| {
        if v <= EIGEN_NOISE * scale {
            0.0
        } else {
            v.sqrt()
        }
    };
    let sqrt_vals: Vec<f64> = vals.iter().map(|&v| floor(v, 1.0)).collect();
    let sqrt_rho = from_eigen(&sqrt_vals, &vecs);
    let yy = sigma_y().kronecker(&sigma_y());
    let flipped = &yy * rho.matrix().map(|z| z.conj()) * &yy;
    let m = &sqrt_rho * flipped * &sqrt_rho;
    let m = (&m + m.adjoint()).scale(0.5);
    let mu = hermitian_eigenvalues(&m);
    let top = mu.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut lambdas: Vec<f64> = mu.into_iter().map(|v| floor(v, top)).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩` for a pure target of matching dimension.
pub fn fidelity_to_pure(rho: &DensityMatrix, target: &[Complex64]) -> Result<f64, QmathError> {
    if target.len() != rho.dim() {
        return Err(QmathError::Dimension {
            rows: target.len(),
            cols: 1,
            expected: "target length equal to the density-matrix dimension",
        });
    }
    let psi = nalgebra::DVector::from_column_slice(target);
    let value = (psi.adjoint() * rho.matrix() * &psi)[(0, 0)];
    assert!(
        value.im.abs() < 1e-10,
        "⟨ψ|ρ|ψ⟩ has imaginary part {}",
        value.im
    );
    Ok(value.re.clamp(0.0, 1.0))
}

/// Reduces a 16-dimensional pol ⊗ freq state to one of its 4-dimensional factors.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix, QmathError> {
    if rho.dim() != 16 {
        return Err(QmathError::Dimension {
            rows: rho.dim(),
            cols: rho.dim(),
            expected: "16x16",
        });
    }
    let m = rho.matrix();
    let reduced = ComplexMatrix::from_fn(4, 4, |i, j| match keep {
        Subsystem::Polarization => (0..4).map(|f| m[(4 * i + f, 4 * j + f)]).sum(),
        Subsystem::Frequency => (0..4).map(|p| m[(4 * p + i, 4 * p + j)]).sum(),
    });
    let labels: &[&str] = match keep {
        Subsystem::Polarization => &POL_LABELS,
        Subsystem::Frequency => &FREQ_LABELS,
    };
    Ok(DensityMatrix::from_unnormalized(reduced)?.with_labels(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveplateKind {
    Half,
    Quarter,
}

/// Jones matrix of a wave plate with its fast axis at `theta` from H.
///
/// Conventions: `HWP(θ) = [[cos2θ, sin2θ], [sin2θ, −cos2θ]]` (det −1) and
/// `QWP(θ) = R(θ) diag(1, i) R(θ)ᵀ`, with `R(θ)` the usual counter-clockwise
/// rotation. Only `|⟨·|·⟩|²` enters the tomography, so the global phase is
/// fixed once here and never revisited.
pub fn waveplate(kind: WaveplateKind, theta: f64) -> ComplexMatrix {
    match kind {
        WaveplateKind::Half => {
            let (s, c) = (2.0 * theta).sin_cos();
            ComplexMatrix::from_row_slice(2, 2, &[C1 * c, C1 * s, C1 * s, -C1 * c])
        }
        WaveplateKind::Quarter => {
            let r = rotation(theta);
            let d = ComplexMatrix::from_row_slice(2, 2, &[C1, C0, C0, CI]);
            &r * d * r.transpose()
        }
    }
}

/// Real rotation `[[cos t, −sin t], [sin t, cos t]]` as a complex matrix.
pub fn rotation(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[C1 * c, -C1 * s, C1 * s, C1 * c])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[C0, -CI, CI, C0])
}

/// Pauli matrices `[I, X, Y, Z]`.
pub fn paulis() -> [ComplexMatrix; 4] {
    [
        ComplexMatrix::identity(2, 2),
        ComplexMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0]),
        sigma_y(),
        ComplexMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1]),
    ]
}

/// Nearest (Frobenius) density matrix to a Hermitian matrix.
///
/// Eigenvalues are projected onto the probability simplex (sort, find the
/// water level, clip), eigenvectors are kept.
pub fn project_to_physical(h: &ComplexMatrix) -> Result<DensityMatrix, QmathError> {
    check_dims(h)?;
    if max_abs(h) == 0.0 {
        return Err(QmathError::ZeroMatrix);
    }
    let herm = (h + h.adjoint()).scale(0.5);
    let (vals, vecs) = hermitian_eigen(&herm);
    let clipped = project_to_simplex(&vals);
    DensityMatrix::from_unnormalized(from_eigen(&clipped, &vecs))
}

/// Euclidean projection of `v` onto `{x : x ≥ 0, Σx = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut level = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            level = candidate;
        }
    }
    v.iter().map(|x| (x - level).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(d: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d.len(),
            d.iter().map(|&x| c(x, 0.0)),
        ))
    }

    #[test]
    fn bell_state_is_maximally_entangled() {
        let rho = PureState2Q::psi_plus().density();
        assert!((concurrence(&rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_has_zero_concurrence() {
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        assert_eq!(concurrence(&rho).unwrap(), 0.0);
        assert!(
            (fidelity_to_pure(&rho, PureState2Q::phi_plus().amplitudes()).unwrap() - 0.25).abs()
                < 1e-15
        );
    }

    #[test]
    fn concurrence_rejects_wrong_dimension() {
        let rho = DensityMatrix::maximally_mixed(16).unwrap();
        assert!(matches!(
            concurrence(&rho),
            Err(QmathError::Dimension { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::from_matrix(diag(&[0.5, 0.5, 0.5, 0.0])),
            Err(QmathError::BadTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::from_matrix(diag(&[1.2, -0.2, 0.0, 0.0])),
            Err(QmathError::NegativeEigenvalue(_))
        ));
        let mut m = diag(&[0.5, 0.5, 0.0, 0.0]);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::from_matrix(m),
            Err(QmathError::NotHermitian(_))
        ));
        assert!(matches!(
            DensityMatrix::from_matrix(ComplexMatrix::identity(3, 3)),
            Err(QmathError::Dimension { .. })
        ));
    }

    #[test]
    fn half_wave_plate_conventions() {
        let h0 = waveplate(WaveplateKind::Half, 0.0);
        assert_eq!(h0, diag(&[1.0, -1.0]));
        let hwp = waveplate(WaveplateKind::Half, FRAC_PI_8);
        let out = &hwp * nalgebra::DVector::from_column_slice(&[C1, C0]);
        assert!((out[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let det = hwp[(0, 0)] * hwp[(1, 1)] - hwp[(0, 1)] * hwp[(1, 0)];
        assert!((det + C1).norm() < 1e-15);
    }

    #[test]
    fn quarter_wave_plate_makes_circular_light() {
        let q0 = waveplate(WaveplateKind::Quarter, 0.0);
        assert!((q0 - ComplexMatrix::from_row_slice(2, 2, &[C1, C0, C0, CI])).norm() < 1e-15);
        let out = waveplate(WaveplateKind::Quarter, FRAC_PI_4)
            * nalgebra::DVector::from_column_slice(&[C1, C0]);
        // Equal weights with a quarter-cycle relative phase. With diag(1, i)
        // at θ = 0 the fast axis at +45° gives the (|H⟩ − i|V⟩)/√2 hand.
        assert!((out[0].norm_sqr() - 0.5).abs() < 1e-15);
        assert!((out[1].norm_sqr() - 0.5).abs() < 1e-15);
        let rel = out[1] / out[0];
        assert!((rel - c(0.0, -1.0)).norm() < 1e-14);
        let out = waveplate(WaveplateKind::Quarter, -FRAC_PI_4)
            * nalgebra::DVector::from_column_slice(&[C1, C0]);
        assert!((out[1] / out[0] - CI).norm() < 1e-14);
    }

    #[test]
    fn waveplates_are_unitary() {
        for k in 0..50 {
            let theta = -PI + k as f64 * 0.13;
            for kind in [WaveplateKind::Half, WaveplateKind::Quarter] {
                let u = waveplate(kind, theta);
                let err = (&u * u.adjoint() - ComplexMatrix::identity(2, 2)).norm();
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn projection_keeps_physical_states() {
        let rho = PureState2Q::phi_plus().density();
        let p = project_to_physical(rho.matrix()).unwrap();
        assert!(p.distance(rho.matrix()) < 1e-12);
    }

    #[test]
    fn projection_clips_negative_weight() {
        let p = project_to_physical(&diag(&[1.2, -0.2, 0.0, 0.0])).unwrap();
        assert!(p.distance(&diag(&[1.0, 0.0, 0.0, 0.0])) < 1e-12);

        let p = project_to_physical(&diag(&[0.5, 0.5, 0.25, -0.25])).unwrap();
        assert!((p.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(p.eigenvalues()[0] >= 0.0);
    }

    #[test]
    fn projection_matches_grid_search_over_diagonals() {
        // Brute force: nearest trace-one non-negative diagonal on a 0.01 grid.
        let target = [1.2, -0.2, 0.0, 0.0];
        let mut best = (f64::INFINITY, [0.0; 4]);
        for a in 0..=100 {
            for b in 0..=(100 - a) {
                for cc in 0..=(100 - a - b) {
                    let d = [
                        a as f64 / 100.0,
                        b as f64 / 100.0,
                        cc as f64 / 100.0,
                        (100 - a - b - cc) as f64 / 100.0,
                    ];
                    let dist: f64 = d.iter().zip(target).map(|(x, t)| (x - t).powi(2)).sum();
                    if dist < best.0 {
                        best = (dist, d);
                    }
                }
            }
        }
        assert_eq!(best.1, [1.0, 0.0, 0.0, 0.0]);
        let p = project_to_physical(&diag(&target)).unwrap();
        for (k, v) in best.1.iter().enumerate() {
            assert!((p.get(k, k).re - v).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_rejects_zero() {
        assert_eq!(
            project_to_physical(&ComplexMatrix::zeros(4, 4)),
            Err(QmathError::ZeroMatrix)
        );
    }

    #[test]
    fn partial_trace_of_product_and_mixture() {
        let rp = PureState2Q::phi_plus().density();
        let rf = DensityMatrix::from_matrix(diag(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let joint = rp.tensor(&rf).unwrap();
        let kp = partial_trace(&joint, Subsystem::Polarization).unwrap();
        let kf = partial_trace(&joint, Subsystem::Frequency).unwrap();
        assert!(kp.distance(rp.matrix()) < 1e-12);
        assert!(kf.distance(rf.matrix()) < 1e-12);

        // ½(|HV, si⟩⟨·| + |VH, is⟩⟨·|)
        let mut m = ComplexMatrix::zeros(16, 16);
        m[(4 + 1, 4 + 1)] = c(0.5, 0.0);
        m[(8 + 2, 8 + 2)] = c(0.5, 0.0);
        let mix = DensityMatrix::from_matrix(m).unwrap();
        let kp = partial_trace(&mix, Subsystem::Polarization).unwrap();
        assert!(kp.distance(&diag(&[0.0, 0.5, 0.5, 0.0])) < 1e-15);
        assert_eq!(kp.labels()[1], "HV");
    }

    #[test]
    fn subsystem_parsing() {
        assert_eq!("pol".parse::<Subsystem>().unwrap(), Subsystem::Polarization);
        assert!(matches!(
            "spin".parse::<Subsystem>(),
            Err(QmathError::UnknownSubsystem(_))
        ));
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(16).unwrap();
        assert!(fidelity_to_pure(&rho, PureState2Q::phi_plus().amplitudes()).is_err());
    }
}
