//! Two-qubit polarization tomography, the frequency-bin estimator built from
//! HOMI results, and the global-fidelity bound.

mod sdp;

pub use sdp::{global_fidelity_lower_bound, solve_fidelity_sdp, SdpOptions, SdpSolution};

use crate::qmath::{
    fidelity_to_pure, paulis, project_to_physical, waveplate, ComplexMatrix, DensityMatrix,
    QmathError, WaveplateKind, FREQ_LABELS,
};
use crate::sampling::poisson_counts;
use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error(transparent)]
    Qmath(#[from] QmathError),
    #[error("dataset has no counts")]
    NoCounts,
    #[error("invalid dataset: {0}")]
    BadDataset(String),
    #[error("unknown analyzer basis `{0}`")]
    UnknownBasis(String),
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("invalid estimate: {0}")]
    BadEstimate(String),
    #[error("SDP did not reach tolerance: residual {residual:.3e} after {iterations} iterations")]
    SdpNotConverged { residual: f64, iterations: usize },
}

/// Single-photon analyzer states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolBasis {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolBasis {
    pub const ALL: [PolBasis; 6] = [
        PolBasis::H,
        PolBasis::V,
        PolBasis::D,
        PolBasis::A,
        PolBasis::R,
        PolBasis::L,
    ];

    /// Waveplate angles realizing this analyzer.
    ///
    /// With `HWP(θ) = [[cos2θ, sin2θ], [sin2θ, −cos2θ]]` and
    /// `QWP(θ) = R(θ)·diag(1, i)·R(θ)ᵀ`, the analyzed state
    /// `HWP†·QWP†·|H⟩` is `(|H⟩ + i|V⟩)/√2` for `R` and `(|H⟩ − i|V⟩)/√2` for `L`.
    pub fn setting(self) -> AnalyzerSetting {
        let (hwp, qwp) = match self {
            PolBasis::H => (0.0, 0.0),
            PolBasis::V => (FRAC_PI_4, 0.0),
            PolBasis::D => (FRAC_PI_8, 0.0),
            PolBasis::A => (-FRAC_PI_8, 0.0),
            PolBasis::R => (0.0, -FRAC_PI_4),
            PolBasis::L => (0.0, FRAC_PI_4),
        };
        AnalyzerSetting {
            label: self,
            hwp_angle: hwp,
            qwp_angle: qwp,
        }
    }

    /// Pauli index `(1, 2, 3)` = `(X, Y, Z)` measured by this basis and the
    /// eigenvalue of its state.
    fn pauli(self) -> (usize, f64) {
        match self {
            PolBasis::H => (3, 1.0),
            PolBasis::V => (3, -1.0),
            PolBasis::D => (1, 1.0),
            PolBasis::A => (1, -1.0),
            PolBasis::R => (2, 1.0),
            PolBasis::L => (2, -1.0),
        }
    }
}

impl fmt::Display for PolBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PolBasis::H => "H",
            PolBasis::V => "V",
            PolBasis::D => "D",
            PolBasis::A => "A",
            PolBasis::R => "R",
            PolBasis::L => "L",
        };
        f.write_str(s)
    }
}

impl FromStr for PolBasis {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolBasis::ALL
            .into_iter()
            .find(|b| b.to_string() == s)
            .ok_or_else(|| TomoError::UnknownBasis(s.to_string()))
    }
}

/// Waveplate angles of one analyzer arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting {
    pub label: PolBasis,
    pub hwp_angle: f64,
    pub qwp_angle: f64,
}

impl AnalyzerSetting {
    /// `HWP(θ_h)†·QWP(θ_q)†·|H⟩`.
    pub fn state(&self) -> [Complex64; 2] {
        let h = waveplate(WaveplateKind::Half, self.hwp_angle);
        let q = waveplate(WaveplateKind::Quarter, self.qwp_angle);
        let psi = h.adjoint()
            * q.adjoint()
            * DVector::from_column_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        [psi[0], psi[1]]
    }
}

/// Rank-1 projector of an analyzer arm.
pub fn analyzer_projector(setting: &AnalyzerSetting) -> ComplexMatrix {
    let psi = DVector::from_column_slice(&setting.state());
    &psi * psi.adjoint()
}

/// The 36 ordered basis pairs `(mode 3, mode 4)`.
pub fn tomography_settings() -> Vec<(PolBasis, PolBasis)> {
    PolBasis::ALL
        .iter()
        .flat_map(|&a| PolBasis::ALL.iter().map(move |&b| (a, b)))
        .collect()
}

fn pair_projector(a: PolBasis, b: PolBasis) -> ComplexMatrix {
    analyzer_projector(&a.setting()).kronecker(&analyzer_projector(&b.setting()))
}

/// `tr(ρ·Π_a⊗Π_b)` for every tomography setting.
pub fn setting_probabilities(rho: &DensityMatrix) -> Vec<f64> {
    tomography_settings()
        .into_iter()
        .map(|(a, b)| (rho.matrix() * pair_projector(a, b)).trace().re.max(0.0))
        .collect()
}

/// Coincidence counts for all 36 settings.
#[derive(Debug, Clone, PartialEq)]
pub struct QstDataset {
    pub settings: Vec<(PolBasis, PolBasis)>,
    pub counts: Vec<f64>,
    pub pairs_per_setting: f64,
    pub seed: u64,
}

impl QstDataset {
    pub fn validate(&self) -> Result<(), TomoError> {
        if self.settings.len() != 36 || self.counts.len() != 36 {
            return Err(TomoError::BadDataset(format!(
                "expected 36 settings, got {} settings and {} counts",
                self.settings.len(),
                self.counts.len()
            )));
        }
        if self.counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(TomoError::BadDataset("counts must be non-negative".into()));
        }
        let mut seen = self.settings.clone();
        seen.sort_by_key(|(a, b)| (*a as u8, *b as u8));
        seen.dedup();
        if seen.len() != 36 {
            return Err(TomoError::BadDataset("repeated settings".into()));
        }
        Ok(())
    }

    fn count(&self, a: PolBasis, b: PolBasis) -> f64 {
        self.settings
            .iter()
            .position(|&s| s == (a, b))
            .map(|i| self.counts[i])
            .unwrap_or(0.0)
    }
}

/// Poisson counts with means `N·tr(ρ·Π_a⊗Π_b)`.
pub fn simulate_qst_counts(rho: &DensityMatrix, pairs_per_setting: f64, seed: u64) -> QstDataset {
    QstDataset {
        settings: tomography_settings(),
        counts: poisson_counts(&setting_probabilities(rho), pairs_per_setting, seed),
        pairs_per_setting,
        seed,
    }
}

/// Dataset holding the expected counts.
pub fn expected_qst_counts(rho: &DensityMatrix, pairs_per_setting: f64) -> QstDataset {
    QstDataset {
        settings: tomography_settings(),
        counts: setting_probabilities(rho)
            .into_iter()
            .map(|p| p * pairs_per_setting)
            .collect(),
        pairs_per_setting,
        seed: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconstructOptions {
    /// Maximum-likelihood refinement iterations after linear inversion; 0 disables.
    pub ml_iterations: usize,
}

/// Linear inversion over the Pauli basis followed by projection onto the
/// physical set, optionally refined by maximum likelihood.
pub fn reconstruct(
    dataset: &QstDataset,
    options: ReconstructOptions,
) -> Result<DensityMatrix, TomoError> {
    dataset.validate()?;
    if dataset.counts.iter().all(|&c| c == 0.0) {
        return Err(TomoError::NoCounts);
    }
    let linear = project_to_physical(&linear_inversion(dataset))?;
    if options.ml_iterations == 0 {
        return Ok(linear);
    }
    Ok(maximum_likelihood(dataset, linear, options.ml_iterations)?)
}

/// Unconstrained Hermitian estimate `¼ Σ T_ij σ_i⊗σ_j`.
pub fn linear_inversion(dataset: &QstDataset) -> ComplexMatrix {
    // Each correlator is averaged over every basis pair that measures it.
    let mut sums = [[0.0f64; 4]; 4];
    let mut weights = [[0.0f64; 4]; 4];
    let pairs = [
        (PolBasis::D, PolBasis::A),
        (PolBasis::R, PolBasis::L),
        (PolBasis::H, PolBasis::V),
    ];
    for &(p1, m1) in &pairs {
        for &(p2, m2) in &pairs {
            let outcomes = [(p1, p2), (p1, m2), (m1, p2), (m1, m2)];
            let counts: Vec<f64> = outcomes.iter().map(|&(a, b)| dataset.count(a, b)).collect();
            let total: f64 = counts.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let (i, _) = p1.pauli();
            let (j, _) = p2.pauli();
            let mut e_ij = 0.0;
            let mut e_i0 = 0.0;
            let mut e_0j = 0.0;
            for (&(a, b), &c) in outcomes.iter().zip(&counts) {
                let (_, sa) = a.pauli();
                let (_, sb) = b.pauli();
                e_ij += sa * sb * c / total;
                e_i0 += sa * c / total;
                e_0j += sb * c / total;
            }
            sums[i][j] += e_ij;
            weights[i][j] += 1.0;
            sums[i][0] += e_i0;
            weights[i][0] += 1.0;
            sums[0][j] += e_0j;
            weights[0][j] += 1.0;
        }
    }
    let sigma = paulis();
    let mut rho = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let t = if i == 0 && j == 0 {
                1.0
            } else if weights[i][j] > 0.0 {
                sums[i][j] / weights[i][j]
            } else {
                0.0
            };
            rho += sigma[i].kronecker(&sigma[j]).scale(0.25 * t);
        }
    }
    rho
}

fn log_likelihood(projectors: &[ComplexMatrix], counts: &[f64], rho: &ComplexMatrix) -> f64 {
    projectors
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0.0)
        .map(|(p, &c)| c * (rho * p).trace().re.max(1e-300).ln())
        .sum()
}

/// Diluted `RρR` iterations; a step is kept only if it raises the likelihood,
/// and the result is never less likely than the starting point.
fn maximum_likelihood(
    dataset: &QstDataset,
    start: DensityMatrix,
    iterations: usize,
) -> Result<DensityMatrix, QmathError> {
    let projectors: Vec<ComplexMatrix> = dataset
        .settings
        .iter()
        .map(|&(a, b)| pair_projector(a, b))
        .collect();
    let counts = &dataset.counts;
    let total: f64 = counts.iter().sum();
    let start_ll = log_likelihood(&projectors, counts, start.matrix());
    // Full-rank seed so that the multiplicative update can reach every direction.
    let mut rho = start.matrix().scale(0.99) + ComplexMatrix::identity(4, 4).scale(0.0025);
    let mut ll = log_likelihood(&projectors, counts, &rho);
    let mut epsilon = 1.0;
    let identity = ComplexMatrix::identity(4, 4);
    for _ in 0..iterations {
        let mut r = ComplexMatrix::zeros(4, 4);
        // The 36 projectors sum to 9·I, so the normalized probability is tr(ρΠ)/9.
        for (p, &c) in projectors.iter().zip(counts) {
            if c > 0.0 {
                let prob = (&rho * p).trace().re.max(1e-300) / 9.0;
                r += p.scale(c / total / prob / 9.0);
            }
        }
        let mut accepted = false;
        while epsilon > 1e-6 {
            let m = &identity + r.scale(epsilon);
            let next = &m * &rho * m.adjoint();
            let tr = next.trace().re;
            let next = next.unscale(tr);
            let next = (&next + next.adjoint()).scale(0.5);
            let next_ll = log_likelihood(&projectors, counts, &next);
            if next_ll > ll {
                rho = next;
                ll = next_ll;
                accepted = true;
                epsilon = (epsilon * 1.5).min(1.0);
                break;
            }
            epsilon *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if ll >= start_ll {
        DensityMatrix::from_unnormalized(rho)
    } else {
        Ok(start)
    }
}

/// Inputs of the frequency-bin density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqEstimate {
    pub visibility: f64,
    pub phi_freq: f64,
    /// Probability of `|ωs⟩₃|ωi⟩₄`.
    pub p_omega: f64,
}

/// Frequency-bin density matrix with populations `(0, p, 1−p, 0)` and
/// coherence `(V/2)e^{iφ}` in the `(si, is)` entry. Projected onto the
/// physical set when the visibility exceeds `2√(p(1−p))`.
pub fn freq_rho_from_homi(est: &FreqEstimate) -> Result<DensityMatrix, TomoError> {
    if !(0.0..=1.0).contains(&est.p_omega) {
        return Err(TomoError::OutOfRange {
            name: "p_omega",
            value: est.p_omega,
        });
    }
    if !(est.visibility.is_finite() && est.visibility >= 0.0) || !est.phi_freq.is_finite() {
        return Err(TomoError::BadEstimate(format!(
            "visibility {} / phase {}",
            est.visibility, est.phi_freq
        )));
    }
    let mut m = ComplexMatrix::zeros(4, 4);
    let p = est.p_omega;
    m[(1, 1)] = Complex64::new(p, 0.0);
    m[(2, 2)] = Complex64::new(1.0 - p, 0.0);
    let c = Complex64::from_polar(est.visibility / 2.0, est.phi_freq);
    m[(1, 2)] = c;
    m[(2, 1)] = c.conj();
    let rho = if est.visibility <= 2.0 * (p * (1.0 - p)).sqrt() {
        DensityMatrix::from_matrix(m)?
    } else {
        project_to_physical(&m)?
    };
    Ok(rho.with_labels(&FREQ_LABELS))
}

/// Fidelity of a two-qubit state to `|Φ⁺⟩`.
pub fn fidelity_phi_plus(rho: &DensityMatrix) -> Result<f64, TomoError> {
    Ok(fidelity_to_pure(
        rho,
        crate::qmath::PureState2Q::phi_plus().amplitudes(),
    )?)
}
