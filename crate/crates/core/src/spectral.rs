//! Frequency grids and the two-bin waveshaper filter.
//!
//! All frequencies are angular (rad/s). Downstream code works in detuning
//! coordinates, measured from the degeneracy frequency `ω_p / 2`.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Pump wavelength (m).
pub const PUMP_WAVELENGTH: f64 = 778e-9;
/// Degeneracy wavelength of the type-II process (m).
pub const DEGENERACY_WAVELENGTH: f64 = 1556e-9;
/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 2048;
pub const MIN_GRID_POINTS: usize = 64;

/// 2π × `thz` × 10¹².
pub fn thz(thz: f64) -> f64 {
    TAU * thz * 1e12
}

/// Angular-frequency width of a wavelength band `nm` wide centered on the
/// degeneracy wavelength.
pub fn bandwidth_from_nm(nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT * nm * 1e-9 / (DEGENERACY_WAVELENGTH * DEGENERACY_WAVELENGTH)
}

/// Physical constants of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConstants {
    pub pump_wavelength: f64,
    pub degeneracy_wavelength: f64,
    pub speed_of_light: f64,
}

impl Default for SourceConstants {
    fn default() -> Self {
        Self {
            pump_wavelength: PUMP_WAVELENGTH,
            degeneracy_wavelength: DEGENERACY_WAVELENGTH,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

impl SourceConstants {
    pub fn pump_omega(&self) -> f64 {
        TAU * self.speed_of_light / self.pump_wavelength
    }

    /// `ω_p / 2` as set by the quasi-phase-matching (192.67 THz).
    pub fn degeneracy_omega(&self) -> f64 {
        TAU * self.speed_of_light / self.degeneracy_wavelength
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("bins overlap: omega0 = {omega0:.4e} must exceed delta_omega / 2 = {half_width:.4e}")]
    OverlappingBins { omega0: f64, half_width: f64 },
    #[error("bin width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("channel {0} does not exist (expected 1..=4)")]
    UnknownChannel(u32),
    #[error("grid needs an even number of points >= {MIN_GRID_POINTS}, got {0}")]
    BadGridSize(usize),
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
}

/// Uniform grid of detunings, symmetric about the degeneracy frequency.
///
/// Points sit at cell centers `ω_k = (k + ½ − n/2)·h`, so zero is a cell
/// boundary, `ω_{n−1−k} = −ω_k`, and the grid is exactly mirror-symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    center: f64,
    spacing: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(center: f64, span: f64, n_points: usize) -> Result<Self, SpectralError> {
        if n_points < MIN_GRID_POINTS || !n_points.is_multiple_of(2) {
            return Err(SpectralError::BadGridSize(n_points));
        }
        let spacing = span / n_points as f64;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(SpectralError::BadSpacing(spacing));
        }
        Ok(Self {
            center,
            spacing,
            n_points,
        })
    }

    /// Grid matched to a filter: the finest spacing `δω/m` whose bins land on
    /// cell boundaries and whose half-span still covers both bins.
    ///
    /// Falls back to the finest covering spacing when no aligned spacing
    /// exists (incommensurate `ω₀/δω`); cell-center sampling is then used.
    pub fn for_filter(
        filter: &FilterSpec,
        center: f64,
        n_points: usize,
    ) -> Result<Self, SpectralError> {
        if n_points < MIN_GRID_POINTS || !n_points.is_multiple_of(2) {
            return Err(SpectralError::BadGridSize(n_points));
        }
        let half = (n_points / 2) as f64;
        let reach = filter.omega0 + 0.5 * filter.delta_omega;
        let m_max = (half * filter.delta_omega / reach).floor() as i64;
        let m_max = m_max.max(1);
        // Inner bin edge (ω₀ − δω/2) in units of δω/m must be an integer.
        let inner = filter.omega0 / filter.delta_omega - 0.5;
        let aligned = (0..256)
            .map(|d| m_max - d)
            .take_while(|&m| m >= 1)
            .find(|&m| {
                let edge = inner * m as f64;
                (edge - edge.round()).abs() < 1e-6
            })
            .unwrap_or(m_max);
        let spacing = filter.delta_omega / aligned as f64;
        Self::new(center, spacing * n_points as f64, n_points)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn span(&self) -> f64 {
        self.spacing * self.n_points as f64
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Detuning of point `k`.
    pub fn detuning(&self, k: usize) -> f64 {
        (k as f64 + 0.5 - 0.5 * self.n_points as f64) * self.spacing
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.detuning(k))
    }

    /// Index of `−ω_k`.
    pub fn mirror(&self, k: usize) -> usize {
        self.n_points - 1 - k
    }

    /// Indices with positive detuning.
    pub fn positive_half(&self) -> std::ops::Range<usize> {
        self.n_points / 2..self.n_points
    }

    /// Midpoint-rule integral of samples on this grid.
    pub fn integrate(&self, samples: impl IntoIterator<Item = f64>) -> f64 {
        samples.into_iter().sum::<f64>() * self.spacing
    }
}

/// Two rectangular bins at `±ω₀` of width `δω`, with `e^{iφ_freq}` on the
/// negative-detuning bin (the signal photon in mode 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    omega0: f64,
    delta_omega: f64,
    phi_freq: f64,
}

impl FilterSpec {
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    pub fn phi_freq(&self) -> f64 {
        self.phi_freq
    }

    /// Same bins with another spectral phase.
    pub fn with_phase(self, phi_freq: f64) -> Self {
        Self { phi_freq, ..self }
    }

    /// In-band amplitude `1/√(2δω)`.
    pub fn amplitude(&self) -> f64 {
        (2.0 * self.delta_omega).recip().sqrt()
    }

    /// One contiguous band of total width `width` centered at degeneracy,
    /// expressed as two touching bins `[0, width/2]` and `[−width/2, 0]`.
    pub fn centered_band(width: f64, phi_freq: f64) -> Result<Self, SpectralError> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(SpectralError::BadWidth(width));
        }
        Ok(Self {
            omega0: 0.25 * width,
            delta_omega: 0.5 * width,
            phi_freq,
        })
    }

    pub fn in_positive_bin(&self, omega: f64) -> bool {
        (omega - self.omega0).abs() <= 0.5 * self.delta_omega
    }

    pub fn in_negative_bin(&self, omega: f64) -> bool {
        (omega + self.omega0).abs() <= 0.5 * self.delta_omega
    }
}

pub fn make_two_bin_filter(
    omega0: f64,
    delta_omega: f64,
    phi_freq: f64,
) -> Result<FilterSpec, SpectralError> {
    if !(delta_omega > 0.0 && delta_omega.is_finite()) {
        return Err(SpectralError::BadWidth(delta_omega));
    }
    if !(omega0 > 0.5 * delta_omega) {
        return Err(SpectralError::OverlappingBins {
            omega0,
            half_width: 0.5 * delta_omega,
        });
    }
    Ok(FilterSpec {
        omega0,
        delta_omega,
        phi_freq,
    })
}

/// Frequency-bin channels 1–4: ±0.4n THz detuning, 0.4 THz passband.
pub fn channel(n: u32) -> Result<FilterSpec, SpectralError> {
    if !(1..=4).contains(&n) {
        return Err(SpectralError::UnknownChannel(n));
    }
    make_two_bin_filter(thz(0.4 * n as f64), thz(0.4), 0.0)
}

/// Filter amplitude at a detuning. Bin edges belong to the bin; where two
/// touching bins share an edge, the positive bin wins.
pub fn transmission(filter: &FilterSpec, omega_detuning: f64) -> Complex64 {
    if filter.in_positive_bin(omega_detuning) {
        Complex64::new(filter.amplitude(), 0.0)
    } else if filter.in_negative_bin(omega_detuning) {
        Complex64::from_polar(filter.amplitude(), filter.phi_freq)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `sin(x)/x`, continuous at zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest signed difference between two angles, in `(−π, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_table() {
        let c1 = channel(1).unwrap();
        assert!((c1.omega0() - TAU * 0.4e12).abs() < 1.0);
        assert!((c1.delta_omega() - TAU * 0.4e12).abs() < 1.0);
        let c4 = channel(4).unwrap();
        assert!((c4.omega0() - TAU * 1.6e12).abs() < 1.0);
        assert_eq!(channel(5), Err(SpectralError::UnknownChannel(5)));
        assert_eq!(channel(0), Err(SpectralError::UnknownChannel(0)));
    }

    #[test]
    fn overlapping_bins_rejected() {
        let w = thz(0.4);
        assert!(matches!(
            make_two_bin_filter(w / 4.0, w, 0.0),
            Err(SpectralError::OverlappingBins { .. })
        ));
        assert!(make_two_bin_filter(w, -1.0, 0.0).is_err());
    }

    #[test]
    fn transmission_piecewise_values() {
        let f = make_two_bin_filter(thz(0.4), thz(0.4), std::f64::consts::PI).unwrap();
        let a = f.amplitude();
        assert_eq!(transmission(&f, thz(0.45)), Complex64::new(a, 0.0));
        let neg = transmission(&f, -thz(0.45));
        assert!((neg - Complex64::new(-a, 0.0)).norm() < 1e-15 * a);
        assert_eq!(transmission(&f, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(transmission(&f, thz(0.1)), Complex64::new(0.0, 0.0));
        let half = 0.5 * f.delta_omega();
        for s in [-1.0, 1.0] {
            assert_eq!(
                transmission(&f, f.omega0() + s * half * (1.0 - 1e-12)).re,
                a
            );
            assert_eq!(
                transmission(&f, f.omega0() + s * half * (1.0 + 1e-9)).re,
                0.0
            );
        }
    }

    #[test]
    fn zero_phase_filter_is_even() {
        let f = channel(2).unwrap();
        for k in 0..200 {
            let w = -thz(1.5) + k as f64 * thz(0.015);
            assert_eq!(transmission(&f, w), transmission(&f, -w));
        }
    }

    #[test]
    fn filter_is_normalized_on_grid() {
        let constants = SourceConstants::default();
        for n in 1..=4 {
            for points in [512, 2048] {
                let f = channel(n).unwrap();
                let g =
                    FrequencyGrid::for_filter(&f, constants.degeneracy_omega(), points).unwrap();
                let norm = g.integrate(g.detunings().map(|w| transmission(&f, w).norm_sqr()));
                assert!(
                    (norm - 1.0).abs() < 1e-6,
                    "channel {n}, {points} points: {norm}"
                );
            }
        }
    }

    #[test]
    fn phase_shift_is_homogeneous() {
        let f = channel(1).unwrap().with_phase(0.3);
        let g = f.with_phase(0.3 + 1.1);
        let w = -thz(0.35);
        let ratio = transmission(&g, w) / transmission(&f, w);
        assert!((ratio - Complex64::from_polar(1.0, 1.1)).norm() < 1e-14);
        assert_eq!(transmission(&g, -w), transmission(&f, -w));
    }

    #[test]
    fn grid_is_symmetric() {
        let g = FrequencyGrid::new(1.0, 2.0, 64).unwrap();
        for k in 0..64 {
            assert_eq!(g.detuning(k), -g.detuning(g.mirror(k)));
        }
        assert!(FrequencyGrid::new(1.0, 2.0, 63).is_err());
        assert!(FrequencyGrid::new(1.0, 2.0, 32).is_err());
        assert!(FrequencyGrid::new(1.0, 0.0, 64).is_err());
    }

    #[test]
    fn constants_are_consistent() {
        let c = SourceConstants::default();
        let ratio = c.pump_omega() / (2.0 * c.degeneracy_omega());
        assert!((ratio - 1.0).abs() < 1e-3);
        assert!((c.degeneracy_omega() / TAU / 1e12 - 192.67).abs() < 0.01);
    }

    #[test]
    fn centered_band_covers_degeneracy() {
        let f = FilterSpec::centered_band(bandwidth_from_nm(1.0), 0.0).unwrap();
        let g = FrequencyGrid::for_filter(&f, 0.0, 256).unwrap();
        let norm = g.integrate(g.detunings().map(|w| transmission(&f, w).norm_sqr()));
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(FilterSpec::centered_band(0.0, 0.0).is_err());
    }

    #[test]
    fn phase_helpers() {
        assert!((wrap_phase(-0.1) - (TAU - 0.1)).abs() < 1e-15);
        assert!((phase_distance(0.05, TAU - 0.05) - 0.1).abs() < 1e-12);
    }
}
