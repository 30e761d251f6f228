//! Hong-Ou-Mandel interference of the two output modes.

mod fit;

pub use fit::{fit_scan, HomiFit, FIT_MAX_ITERATIONS};

use crate::sampling::poisson_counts;
use crate::source::{SpectralBiphotonState, StateBasis};
use crate::spectral::{sinc, FilterSpec};
use num_complex::Complex64;
use thiserror::Error;

/// Largest accepted quadrature error estimate.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;
/// Counts above `1.5 · N` are flagged as implausible.
pub const COUNT_FLAG_FACTOR: f64 = 1.5;

#[derive(Debug, Error)]
pub enum HomiError {
    #[error("visibility {0} outside [0, 1]")]
    BadVisibility(f64),
    #[error("invalid scan: {0}")]
    BadScan(String),
    #[error("expected a two-mode state")]
    WrongBasis,
    #[error("quadrature error estimate {estimate:.3e} exceeds {QUADRATURE_TOLERANCE:e}")]
    GridTooCoarse { estimate: f64 },
    #[error("scan is degenerate: {0}")]
    Degenerate(String),
    #[error("fit did not converge after {iterations} iterations (last V = {v:.6}, phi = {phi:.6})", v = .last.visibility, phi = .last.phi_freq)]
    NoConvergence {
        iterations: usize,
        last: Box<HomiFit>,
    },
}

/// Parameters of the closed-form interference pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomiParams {
    pub visibility: f64,
    pub phi_freq: f64,
    pub omega0: f64,
    pub delta_omega: f64,
}

impl HomiParams {
    pub fn new(visibility: f64, phi_freq: f64, filter: &FilterSpec) -> Result<Self, HomiError> {
        let p = Self {
            visibility,
            phi_freq,
            omega0: filter.omega0(),
            delta_omega: filter.delta_omega(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HomiError> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(HomiError::BadVisibility(self.visibility));
        }
        Ok(())
    }
}

/// `½ − (V/2)·sinc(δω·τ)·cos(2ω₀τ − φ)` with `sinc(x) = sin(x)/x`.
pub fn coincidence_probability_closed(tau: f64, params: &HomiParams) -> f64 {
    let p = pattern(
        tau,
        params.visibility,
        params.phi_freq,
        params.omega0,
        params.delta_omega,
    );
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
    p
}

pub(crate) fn pattern(tau: f64, v: f64, phi: f64, omega0: f64, delta_omega: f64) -> f64 {
    0.5 - 0.5 * v * sinc(delta_omega * tau) * (2.0 * omega0 * tau - phi).cos()
}

/// Swaps H and V of the mode-4 photon (the polarization controller before the
/// beamsplitter).
pub fn rotate_mode4(state: &SpectralBiphotonState) -> Result<SpectralBiphotonState, HomiError> {
    if state.basis() != StateBasis::TwoMode {
        return Err(HomiError::WrongBasis);
    }
    Ok(state.swap_second_polarization())
}

/// Coincidence probability behind the beamsplitter at delay `tau`:
/// `½ − ½·Re Σ_ab ∫ g*(b, a, −ν) g(a, b, ν) e^{2iντ} dν`.
///
/// The exchange term pairs each component with its polarization-swapped
/// mirror, so partially distinguishable polarizations are weighted by their
/// overlap instead of being rejected. Amplitudes are taken as constant on each
/// grid cell and the phase factor is integrated exactly across it.
pub fn coincidence_probability_numeric(
    state: &SpectralBiphotonState,
    tau: f64,
) -> Result<f64, HomiError> {
    Ok(coincidence_curve(state, &[tau])?[0])
}

/// [`coincidence_probability_numeric`] on many delays, reusing the overlap.
pub fn coincidence_curve(
    state: &SpectralBiphotonState,
    delays: &[f64],
) -> Result<Vec<f64>, HomiError> {
    if state.basis() != StateBasis::TwoMode {
        return Err(HomiError::WrongBasis);
    }
    let estimate = quadrature_error_estimate(state);
    if estimate > QUADRATURE_TOLERANCE {
        return Err(HomiError::GridTooCoarse { estimate });
    }
    let grid = state.grid();
    let h = grid.spacing();
    let overlap: Vec<(f64, Complex64)> = (0..grid.len())
        .filter_map(|k| {
            let m = grid.mirror(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += state.amplitudes(b, a)[m].conj() * state.amplitudes(a, b)[k];
                }
            }
            (acc.norm_sqr() > 0.0).then_some((grid.detuning(k), acc))
        })
        .collect();
    Ok(delays
        .iter()
        .map(|&tau| {
            let cell = h * sinc(h * tau);
            let exchange: f64 = overlap
                .iter()
                .map(|(nu, o)| (o * Complex64::from_polar(cell, 2.0 * nu * tau)).re)
                .sum();
            0.5 - 0.5 * exchange
        })
        .collect())
}

/// `Σ h·|Δg|²/12` over neighbouring cells inside the support: the mean square
/// error of treating each cell as flat.
pub fn quadrature_error_estimate(state: &SpectralBiphotonState) -> f64 {
    let h = state.grid().spacing();
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let amps = state.amplitudes(a, b);
            for w in amps.windows(2) {
                if w[0].norm_sqr() > 0.0 && w[1].norm_sqr() > 0.0 {
                    total += h * (w[1] - w[0]).norm_sqr() / 12.0;
                }
            }
        }
    }
    total
}

/// Delay scan with counts per point. Counts are stored as `f64` so that
/// expectation-valued (noiseless) scans share the type.
#[derive(Debug, Clone, PartialEq)]
pub struct HomiScan {
    pub delays: Vec<f64>,
    pub counts: Vec<f64>,
    pub pairs_per_point: f64,
    pub seed: u64,
}

impl HomiScan {
    pub fn new(
        delays: Vec<f64>,
        counts: Vec<f64>,
        pairs_per_point: f64,
        seed: u64,
    ) -> Result<Self, HomiError> {
        let scan = Self {
            delays,
            counts,
            pairs_per_point,
            seed,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<(), HomiError> {
        if self.delays.len() != self.counts.len() {
            return Err(HomiError::BadScan(format!(
                "{} delays but {} counts",
                self.delays.len(),
                self.counts.len()
            )));
        }
        if !(self.pairs_per_point > 0.0 && self.pairs_per_point.is_finite()) {
            return Err(HomiError::BadScan(
                "pairs per point must be positive".into(),
            ));
        }
        if self.counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(HomiError::BadScan("counts must be non-negative".into()));
        }
        if self.delays.iter().any(|d| !d.is_finite()) {
            return Err(HomiError::BadScan("non-finite delay".into()));
        }
        Ok(())
    }

    /// Indices whose counts exceed `1.5 · N`.
    pub fn flagged_points(&self) -> Vec<usize> {
        let limit = COUNT_FLAG_FACTOR * self.pairs_per_point;
        (0..self.counts.len())
            .filter(|&k| self.counts[k] > limit)
            .collect()
    }
}

/// `n` evenly spaced delays from `-half_range` to `half_range`.
pub fn delay_grid(half_range: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let step = 2.0 * half_range / (n - 1) as f64;
    (0..n).map(|k| -half_range + k as f64 * step).collect()
}

/// Poisson scan of the closed-form pattern.
pub fn simulate_scan(
    delays: &[f64],
    params: &HomiParams,
    pairs_per_point: f64,
    seed: u64,
) -> Result<HomiScan, HomiError> {
    params.validate()?;
    let probs: Vec<f64> = delays
        .iter()
        .map(|&t| coincidence_probability_closed(t, params))
        .collect();
    simulate_scan_from_probabilities(delays, &probs, pairs_per_point, seed)
}

/// Poisson scan of arbitrary per-delay coincidence probabilities.
pub fn simulate_scan_from_probabilities(
    delays: &[f64],
    probabilities: &[f64],
    pairs_per_point: f64,
    seed: u64,
) -> Result<HomiScan, HomiError> {
    if delays.len() != probabilities.len() {
        return Err(HomiError::BadScan(
            "delay/probability length mismatch".into(),
        ));
    }
    let counts = poisson_counts(probabilities, pairs_per_point, seed);
    HomiScan::new(delays.to_vec(), counts, pairs_per_point, seed)
}

/// Scan holding expected counts instead of samples.
pub fn expected_scan(
    delays: &[f64],
    probabilities: &[f64],
    pairs_per_point: f64,
) -> Result<HomiScan, HomiError> {
    if delays.len() != probabilities.len() {
        return Err(HomiError::BadScan(
            "delay/probability length mismatch".into(),
        ));
    }
    let counts = probabilities.iter().map(|p| p * pairs_per_point).collect();
    HomiScan::new(delays.to_vec(), counts, pairs_per_point, 0)
}
