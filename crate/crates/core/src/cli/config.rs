//! JSON run configuration. Every physical key carries its unit in the name.

use crate::source::{SourceConfig, SpliceErrors, DEFAULT_N_EFF, PMF_BEAT_LENGTH};
use crate::spectral::{
    bandwidth_from_nm, channel, make_two_bin_filter, thz, FilterSpec, SourceConstants,
    DEFAULT_GRID_POINTS, DEGENERACY_WAVELENGTH, MIN_GRID_POINTS,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub grid_points: usize,
    pub source: SourceSection,
    pub filter: FilterSection,
    pub homi: HomiSection,
    pub qst: QstSection,
    pub joint: JointSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: "out".into(),
            grid_points: DEFAULT_GRID_POINTS,
            source: SourceSection::default(),
            filter: FilterSection::default(),
            homi: HomiSection::default(),
            qst: QstSection::default(),
            joint: JointSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub l1_m: f64,
    pub l2_m: f64,
    pub alpha1_mm: f64,
    pub alpha2_mm: f64,
    pub splice_ppsf_to_l1_deg: f64,
    pub splice_l1_to_l1p_deg: f64,
    pub splice_l1p_to_pbs_deg: f64,
    pub splice_ppsf_to_l2_deg: f64,
    pub splice_l2_to_l2p_deg: f64,
    pub splice_l2p_to_pbs_deg: f64,
    pub pump_split: f64,
    pub pump_phase1_rad: f64,
    pub pump_phase2_rad: f64,
    pub birefringence: f64,
    pub n_eff: f64,
    pub degeneracy_wavelength_nm: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            l1_m: 1.0,
            l2_m: 1.0,
            alpha1_mm: 0.0,
            alpha2_mm: 0.0,
            splice_ppsf_to_l1_deg: 0.0,
            splice_l1_to_l1p_deg: 0.0,
            splice_l1p_to_pbs_deg: 0.0,
            splice_ppsf_to_l2_deg: 0.0,
            splice_l2_to_l2p_deg: 0.0,
            splice_l2p_to_pbs_deg: 0.0,
            pump_split: 0.5,
            pump_phase1_rad: 0.0,
            pump_phase2_rad: 0.0,
            birefringence: DEGENERACY_WAVELENGTH / PMF_BEAT_LENGTH,
            n_eff: DEFAULT_N_EFF,
            degeneracy_wavelength_nm: DEGENERACY_WAVELENGTH * 1e9,
        }
    }
}

impl SourceSection {
    pub fn to_source(&self) -> Result<SourceConfig, CliError> {
        let constants = SourceConstants {
            degeneracy_wavelength: self.degeneracy_wavelength_nm * 1e-9,
            ..SourceConstants::default()
        };
        let cfg = SourceConfig {
            l1: self.l1_m,
            l2: self.l2_m,
            alpha1: self.alpha1_mm * 1e-3,
            alpha2: self.alpha2_mm * 1e-3,
            splice: SpliceErrors {
                ppsf_to_l1: self.splice_ppsf_to_l1_deg.to_radians(),
                l1_to_l1p: self.splice_l1_to_l1p_deg.to_radians(),
                l1p_to_pbs: self.splice_l1p_to_pbs_deg.to_radians(),
                ppsf_to_l2: self.splice_ppsf_to_l2_deg.to_radians(),
                l2_to_l2p: self.splice_l2_to_l2p_deg.to_radians(),
                l2p_to_pbs: self.splice_l2p_to_pbs_deg.to_radians(),
            },
            pump_split: self.pump_split,
            pump_phase1: self.pump_phase1_rad,
            pump_phase2: self.pump_phase2_rad,
            birefringence: self.birefringence,
            n_eff: self.n_eff,
            degeneracy_omega: constants.degeneracy_omega(),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("source: {e}")))?;
        Ok(cfg)
    }
}

/// Either a channel of the reference table or an explicit two-bin filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub channel: Option<u32>,
    pub detuning_thz: Option<f64>,
    pub bandwidth_thz: Option<f64>,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            channel: Some(1),
            detuning_thz: None,
            bandwidth_thz: None,
        }
    }
}

impl FilterSection {
    /// Filters to run, at `φ_freq = 0`.
    pub fn to_filter(&self) -> Result<FilterSpec, CliError> {
        let err = |e: crate::spectral::SpectralError| CliError::Config(format!("filter: {e}"));
        match (self.channel, self.detuning_thz, self.bandwidth_thz) {
            (Some(n), None, None) => channel(n).map_err(err),
            (None, Some(d), Some(b)) => make_two_bin_filter(thz(d), thz(b), 0.0).map_err(err),
            _ => Err(CliError::Config(
                "filter: give either `channel` or both `detuning_thz` and `bandwidth_thz`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomiSection {
    pub delay_half_range_ps: f64,
    pub delay_points: usize,
    pub pairs_per_point: f64,
    pub phases_rad: Vec<f64>,
    /// Multiplies the source model's interference term; stands in for
    /// imperfections that the model does not contain.
    pub visibility_scale: f64,
}

impl Default for HomiSection {
    fn default() -> Self {
        Self {
            delay_half_range_ps: 10.0,
            delay_points: 81,
            pairs_per_point: 1000.0,
            phases_rad: vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0],
            visibility_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QstSection {
    pub pairs_per_setting: f64,
    pub channels: Vec<u32>,
    pub phases_rad: Vec<f64>,
    pub ml_iterations: usize,
}

impl Default for QstSection {
    fn default() -> Self {
        Self {
            pairs_per_setting: 1000.0,
            channels: vec![1, 2, 3, 4],
            phases_rad: (0..8).map(|k| k as f64 * PI / 4.0).collect(),
            ml_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointSection {
    pub phase_rad: f64,
    pub pairs_per_point: f64,
    pub pairs_per_setting: f64,
    /// Coincidences split between `ωs ωi` and `ωi ωs` for the `p_ω` estimate.
    pub bin_pairs: f64,
    pub visibility_scale: f64,
    pub ml_iterations: usize,
}

impl Default for JointSection {
    fn default() -> Self {
        Self {
            phase_rad: PI,
            pairs_per_point: 1000.0,
            pairs_per_setting: 1000.0,
            bin_pairs: 2000.0,
            visibility_scale: 1.0,
            ml_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl LinRange {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let t = k as f64 / last;
                self.start * (1.0 - t) + self.stop * t
            })
            .collect()
    }

    pub fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::Config(format!("sweep.{name}: non-finite bound")));
        }
        if self.points == 0 || (self.points > 1 && self.start == self.stop) {
            return Err(CliError::Config(format!(
                "sweep.{name}: the axis grid has zero width"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Applied to both `α1` and `α2`.
    pub length_mm: LinRange,
    /// Applied to both cross-splice errors.
    pub angle_deg: LinRange,
    pub pump_split: LinRange,
    pub bandwidth_thz: LinRange,
    /// Detuning and width of the two-bin filter used by the non-bandwidth axes.
    pub detuning_thz: f64,
    pub bandwidth_nm: f64,
    /// Fit the birefringence to the reported length-mismatch degradations
    /// before sweeping.
    pub calibrate_birefringence: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            length_mm: LinRange {
                start: -10.0,
                stop: 10.0,
                points: 21,
            },
            angle_deg: LinRange {
                start: -6.0,
                stop: 6.0,
                points: 13,
            },
            pump_split: LinRange {
                start: 0.3,
                stop: 0.7,
                points: 21,
            },
            bandwidth_thz: LinRange {
                start: 0.1,
                stop: 2.0,
                points: 20,
            },
            detuning_thz: 3.3,
            bandwidth_nm: 1.0,
            calibrate_birefringence: true,
        }
    }
}

impl SweepSection {
    pub fn filter(&self) -> Result<FilterSpec, CliError> {
        make_two_bin_filter(
            thz(self.detuning_thz),
            bandwidth_from_nm(self.bandwidth_nm),
            0.0,
        )
        .map_err(|e| CliError::Config(format!("sweep filter: {e}")))
    }
}

impl RunConfig {
    /// Parses and validates a JSON document. Unknown keys are rejected and
    /// parse errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid_points < MIN_GRID_POINTS || !self.grid_points.is_multiple_of(2) {
            return bad(format!(
                "grid_points must be even and at least {MIN_GRID_POINTS}"
            ));
        }
        self.source.to_source()?;
        self.filter.to_filter()?;
        let h = &self.homi;
        if h.delay_points == 0 {
            return bad("homi.delay_points: the delay grid is empty".into());
        }
        if !(h.delay_half_range_ps > 0.0 && h.delay_half_range_ps.is_finite()) {
            return bad("homi.delay_half_range_ps must be positive".into());
        }
        for (name, n) in [
            ("homi.pairs_per_point", h.pairs_per_point),
            ("qst.pairs_per_setting", self.qst.pairs_per_setting),
            ("joint.pairs_per_point", self.joint.pairs_per_point),
            ("joint.pairs_per_setting", self.joint.pairs_per_setting),
            ("joint.bin_pairs", self.joint.bin_pairs),
        ] {
            if !(n > 0.0 && n.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if h.phases_rad.is_empty() || self.qst.phases_rad.is_empty() {
            return bad("phase lists must not be empty".into());
        }
        if h.phases_rad
            .iter()
            .chain(&self.qst.phases_rad)
            .chain(std::iter::once(&self.joint.phase_rad))
            .any(|p| !p.is_finite())
        {
            return bad("phases must be finite".into());
        }
        for (name, s) in [
            ("homi.visibility_scale", h.visibility_scale),
            ("joint.visibility_scale", self.joint.visibility_scale),
        ] {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.qst.channels.is_empty() {
            return bad("qst.channels must not be empty".into());
        }
        for &c in &self.qst.channels {
            channel(c).map_err(|e| CliError::Config(format!("qst.channels: {e}")))?;
        }
        let s = &self.sweep;
        s.length_mm.validate("length_mm")?;
        s.angle_deg.validate("angle_deg")?;
        s.pump_split.validate("pump_split")?;
        s.bandwidth_thz.validate("bandwidth_thz")?;
        if s.bandwidth_thz.values().iter().any(|w| *w <= 0.0) {
            return bad("sweep.bandwidth_thz: widths must be positive".into());
        }
        if s.pump_split
            .values()
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return bad("sweep.pump_split: values must lie in [0, 1]".into());
        }
        s.filter()?;
        Ok(())
    }
}
