use super::config::RunConfig;
use super::{csv_bytes, matrix_json, numerical, AxisKind, Bundle, CliError, RunOptions};
use crate::homi::{
    coincidence_curve, delay_grid, expected_scan, fit_scan, rotate_mode4,
    simulate_scan_from_probabilities, HomiFit, HomiScan,
};
use crate::qmath::{concurrence, partial_trace, DensityMatrix, Subsystem, POL_LABELS};
use crate::sampling::{derive_seed, poisson_counts};
use crate::source::{
    calibrate_birefringence, output_state, sweep_concurrence, SourceConfig, SpectralBiphotonState,
    SweepAxis, LENGTH_MISMATCH_ANCHORS,
};
use crate::spectral::{channel, thz, FilterSpec, FrequencyGrid};
use crate::tomo::{
    expected_qst_counts, fidelity_phi_plus, freq_rho_from_homi, global_fidelity_lower_bound,
    reconstruct, simulate_qst_counts, FreqEstimate, QstDataset, ReconstructOptions,
};
use rayon::prelude::*;
use serde_json::json;

const PS: f64 = 1e-12;

fn state_for(
    cfg: &RunConfig,
    source: &SourceConfig,
    filter: &FilterSpec,
) -> Result<SpectralBiphotonState, CliError> {
    let grid = FrequencyGrid::for_filter(filter, source.degeneracy_omega, cfg.grid_points)
        .map_err(numerical)?;
    output_state(source, filter, &grid).map_err(numerical)
}

/// Coincidence probabilities on the configured delay grid, with the
/// interference term scaled by `visibility_scale`.
fn homi_probabilities(
    state: &SpectralBiphotonState,
    delays: &[f64],
    visibility_scale: f64,
) -> Result<Vec<f64>, CliError> {
    let rotated = rotate_mode4(state).map_err(numerical)?;
    Ok(coincidence_curve(&rotated, delays)
        .map_err(numerical)?
        .into_iter()
        .map(|p| (0.5 + visibility_scale * (p - 0.5)).clamp(0.0, 1.0))
        .collect())
}

fn make_scan(
    delays: &[f64],
    probs: &[f64],
    pairs: f64,
    seed: u64,
    noiseless: bool,
) -> Result<HomiScan, CliError> {
    if noiseless {
        expected_scan(delays, probs, pairs).map_err(numerical)
    } else {
        simulate_scan_from_probabilities(delays, probs, pairs, seed).map_err(numerical)
    }
}

fn scan_csv(scan: &HomiScan) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["tau_ps", "counts", "expected_pairs"],
        scan.delays.iter().zip(&scan.counts).map(|(t, c)| {
            vec![
                (t / PS).to_string(),
                c.to_string(),
                scan.pairs_per_point.to_string(),
            ]
        }),
    )
}

fn fit_json(fit: &HomiFit) -> serde_json::Value {
    json!({
        "V": fit.visibility,
        "V_sigma": fit.visibility_sigma(),
        "phi_freq": fit.phi_freq,
        "phi_freq_sigma": fit.phi_sigma(),
        "chi2_reduced": fit.chi2_reduced,
        "above_unity": fit.above_unity,
    })
}

fn dataset_csv(data: &QstDataset) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["setting_a", "setting_b", "counts", "expected_pairs"],
        data.settings.iter().zip(&data.counts).map(|((a, b), c)| {
            vec![
                a.to_string(),
                b.to_string(),
                c.to_string(),
                data.pairs_per_setting.to_string(),
            ]
        }),
    )
}

fn qst_dataset(rho: &DensityMatrix, pairs: f64, seed: u64, noiseless: bool) -> QstDataset {
    if noiseless {
        expected_qst_counts(rho, pairs)
    } else {
        simulate_qst_counts(rho, pairs, seed)
    }
}

fn delays(cfg: &RunConfig) -> Vec<f64> {
    delay_grid(cfg.homi.delay_half_range_ps * PS, cfg.homi.delay_points)
}

/// HOMI scans and fits for every configured `φ_freq`.
pub fn cmd_homi_scan(cfg: &RunConfig, opts: RunOptions) -> Result<Bundle, CliError> {
    let source = cfg.source.to_source()?;
    let base = cfg.filter.to_filter()?;
    let delays = delays(cfg);
    let mut bundle = Bundle::new(opts, cfg);
    let results: Vec<(HomiScan, HomiFit)> = cfg
        .homi
        .phases_rad
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let filter = base.with_phase(phi);
            let state = state_for(cfg, &source, &filter)?;
            let probs = homi_probabilities(&state, &delays, cfg.homi.visibility_scale)?;
            let seed = derive_seed(opts.seed, &format!("homi-scan/phase{k}"));
            let scan = make_scan(
                &delays,
                &probs,
                cfg.homi.pairs_per_point,
                seed,
                opts.noiseless,
            )?;
            let fit = fit_scan(&scan, filter.omega0(), filter.delta_omega()).map_err(numerical)?;
            Ok((scan, fit))
        })
        .collect::<Result<_, CliError>>()?;
    let mut rows = Vec::new();
    for (k, (scan, fit)) in results.iter().enumerate() {
        bundle.add(format!("homi_scan_phase{k}.csv"), scan_csv(scan)?);
        bundle.add_json(format!("homi_fit_phase{k}.json"), &fit_json(fit));
        rows.push(vec![
            cfg.homi.phases_rad[k].to_string(),
            fit.visibility.to_string(),
            fit.visibility_sigma().to_string(),
            fit.phi_freq.to_string(),
            fit.phi_sigma().to_string(),
            fit.chi2_reduced.to_string(),
        ]);
    }
    bundle.add(
        "homi_fits.csv",
        csv_bytes(
            &[
                "phi_target_rad",
                "V",
                "V_sigma",
                "phi_freq",
                "phi_freq_sigma",
                "chi2_reduced",
            ],
            rows,
        )?,
    );
    let v: Vec<f64> = results.iter().map(|(_, f)| f.visibility).collect();
    let phi: Vec<f64> = results.iter().map(|(_, f)| f.phi_freq).collect();
    bundle.add_json("summary.json", &json!({ "V": v, "phi_freq": phi }));
    Ok(bundle)
}

/// Polarization tomography over channels and waveshaper phases.
pub fn cmd_qst(cfg: &RunConfig, opts: RunOptions) -> Result<Bundle, CliError> {
    let source = cfg.source.to_source()?;
    let cells: Vec<(u32, usize, f64)> = cfg
        .qst
        .channels
        .iter()
        .flat_map(|&c| {
            cfg.qst
                .phases_rad
                .iter()
                .enumerate()
                .map(move |(k, &phi)| (c, k, phi))
        })
        .collect();
    let options = ReconstructOptions {
        ml_iterations: cfg.qst.ml_iterations,
    };
    let results: Vec<(QstDataset, f64)> = cells
        .par_iter()
        .map(|&(c, k, phi)| {
            let filter = channel(c)
                .map_err(|e| CliError::Config(e.to_string()))?
                .with_phase(phi);
            let state = state_for(cfg, &source, &filter)?;
            let global = state.global_density().map_err(numerical)?;
            let rho = partial_trace(&global, Subsystem::Polarization).map_err(numerical)?;
            let seed = derive_seed(opts.seed, &format!("qst/ch{c}/phase{k}"));
            let data = qst_dataset(&rho, cfg.qst.pairs_per_setting, seed, opts.noiseless);
            let estimate = reconstruct(&data, options).map_err(numerical)?;
            let c_pol = concurrence(&estimate).map_err(numerical)?;
            Ok((data, c_pol))
        })
        .collect::<Result<_, CliError>>()?;
    let mut bundle = Bundle::new(opts, cfg);
    let mut rows = Vec::new();
    for (&(c, k, phi), (data, c_pol)) in cells.iter().zip(&results) {
        bundle.add(format!("qst_ch{c}_phase{k}.csv"), dataset_csv(data)?);
        rows.push(vec![c.to_string(), phi.to_string(), c_pol.to_string()]);
    }
    bundle.add(
        "qst_concurrence.csv",
        csv_bytes(&["channel", "phi_freq_rad", "C_pol"], rows)?,
    );
    let c: Vec<f64> = results.iter().map(|(_, c)| *c).collect();
    let c_min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    bundle.add_json("summary.json", &json!({ "C_pol": c, "C_pol_min": c_min }));
    Ok(bundle)
}

/// HOMI fit, frequency-bin estimate, polarization tomography of the
/// anti-bunched pairs, and the global-fidelity bound.
pub fn cmd_joint(cfg: &RunConfig, opts: RunOptions) -> Result<Bundle, CliError> {
    let j = &cfg.joint;
    let source = cfg.source.to_source()?;
    let filter = cfg.filter.to_filter()?.with_phase(j.phase_rad);
    let state = state_for(cfg, &source, &filter)?;
    let mut bundle = Bundle::new(opts, cfg);

    let delays = delays(cfg);
    let probs = homi_probabilities(&state, &delays, j.visibility_scale)?;
    let scan = make_scan(
        &delays,
        &probs,
        j.pairs_per_point,
        derive_seed(opts.seed, "joint/homi"),
        opts.noiseless,
    )?;
    let fit = fit_scan(&scan, filter.omega0(), filter.delta_omega()).map_err(numerical)?;
    bundle.add("joint_homi_scan.csv", scan_csv(&scan)?);
    bundle.add_json("joint_homi_fit.json", &fit_json(&fit));

    // Bin-resolved coincidences for p_ω.
    let global = state.global_density().map_err(numerical)?;
    let rho_freq_model = partial_trace(&global, Subsystem::Frequency).map_err(numerical)?;
    let bin_probs = [rho_freq_model.get(1, 1).re, rho_freq_model.get(2, 2).re];
    let bins = if opts.noiseless {
        bin_probs.iter().map(|p| p * j.bin_pairs).collect()
    } else {
        poisson_counts(
            &bin_probs,
            j.bin_pairs,
            derive_seed(opts.seed, "joint/bins"),
        )
    };
    let total = bins[0] + bins[1];
    if total <= 0.0 {
        return Err(CliError::Numerical("no bin-resolved coincidences".into()));
    }
    let p_omega = bins[0] / total;
    bundle.add(
        "joint_bins.csv",
        csv_bytes(
            &["bins", "counts", "expected_pairs"],
            [("si", bins[0]), ("is", bins[1])]
                .iter()
                .map(|(n, c)| vec![n.to_string(), c.to_string(), j.bin_pairs.to_string()]),
        )?,
    );

    let rho_freq = freq_rho_from_homi(&FreqEstimate {
        visibility: fit.visibility,
        phi_freq: fit.phi_freq,
        p_omega,
    })
    .map_err(numerical)?;
    let c_freq = concurrence(&rho_freq).map_err(numerical)?;
    bundle.add_json("joint_rho_freq.json", &matrix_json(&rho_freq));

    let rotated = rotate_mode4(&state).map_err(numerical)?;
    let rho_pol_model = partial_trace(
        &rotated.global_density().map_err(numerical)?,
        Subsystem::Polarization,
    )
    .map_err(numerical)?;
    let data = qst_dataset(
        &rho_pol_model,
        j.pairs_per_setting,
        derive_seed(opts.seed, "joint/qst"),
        opts.noiseless,
    );
    let rho_pol = reconstruct(
        &data,
        ReconstructOptions {
            ml_iterations: j.ml_iterations,
        },
    )
    .map_err(numerical)?
    .with_labels(&POL_LABELS);
    let c_pol = concurrence(&rho_pol).map_err(numerical)?;
    let f_p = fidelity_phi_plus(&rho_pol)
        .map_err(numerical)?
        .clamp(0.0, 1.0);
    bundle.add("joint_qst.csv", dataset_csv(&data)?);
    bundle.add_json("joint_rho_pol.json", &matrix_json(&rho_pol));

    let f_omega = fit.visibility.clamp(0.0, 1.0);
    let f_bound = global_fidelity_lower_bound(f_p, f_omega).map_err(numerical)?;
    bundle.add_json(
        "summary.json",
        &json!({
            "C_pol": c_pol,
            "C_freq": c_freq,
            "V": fit.visibility,
            "phi_freq": fit.phi_freq,
            "p_omega": p_omega,
            "F_p": f_p,
            "F_omega": f_omega,
            "F_bound": f_bound,
        }),
    );
    Ok(bundle)
}

/// Concurrence over one parameter axis.
pub fn cmd_sweep(cfg: &RunConfig, opts: RunOptions) -> Result<Bundle, CliError> {
    let kind = opts
        .axis
        .ok_or_else(|| CliError::Config("sweep needs an axis".into()))?;
    let s = &cfg.sweep;
    let mut source = cfg.source.to_source()?;
    let filter = s.filter()?;
    if s.calibrate_birefringence {
        source.birefringence = calibrate_birefringence(&source, &filter, &LENGTH_MISMATCH_ANCHORS)
            .map_err(numerical)?;
    }
    let (axis, names, to_units): (SweepAxis, Vec<&str>, fn(f64) -> f64) = match kind {
        AxisKind::Length => {
            let v: Vec<f64> = s.length_mm.values().iter().map(|x| x * 1e-3).collect();
            (
                SweepAxis::Length {
                    alpha1: v.clone(),
                    alpha2: v,
                },
                vec!["alpha1_mm", "alpha2_mm"],
                |x| x * 1e3,
            )
        }
        AxisKind::Angle => {
            let v: Vec<f64> = s
                .angle_deg
                .values()
                .iter()
                .map(|x| x.to_radians())
                .collect();
            (
                SweepAxis::Angle {
                    t1: v.clone(),
                    t2: v,
                },
                vec!["t1_deg", "t2_deg"],
                f64::to_degrees,
            )
        }
        AxisKind::Pump => (
            SweepAxis::Pump {
                split: s.pump_split.values(),
            },
            vec!["pump_split"],
            |x| x,
        ),
        AxisKind::Bandwidth => (
            SweepAxis::Bandwidth {
                widths: s.bandwidth_thz.values().into_iter().map(thz).collect(),
            },
            vec!["bandwidth_thz"],
            |x| x / thz(1.0),
        ),
    };
    let cells = sweep_concurrence(&source, &filter, &axis).map_err(numerical)?;
    let mut bundle = Bundle::new(opts, cfg);
    let mut header: Vec<&str> = vec!["index"];
    header.extend(&names);
    header.push("C_pol");
    bundle.add(
        format!("sweep_{kind}.csv"),
        csv_bytes(
            &header,
            cells.iter().map(|c| {
                let mut row = vec![c.index.to_string()];
                row.extend(c.params.iter().map(|p| to_units(*p).to_string()));
                row.push(c.concurrence.to_string());
                row
            }),
        )?,
    );
    let (rows, cols) = axis.shape();
    let table_header: Vec<String> = if cols == 1 {
        vec![names[0].to_string(), "C_pol".to_string()]
    } else {
        std::iter::once(format!("{}\\{}", names[0], names[1]))
            .chain((0..cols).map(|c| to_units(cells[c].params[1]).to_string()))
            .collect()
    };
    let header_refs: Vec<&str> = table_header.iter().map(String::as_str).collect();
    bundle.add(
        format!("sweep_{kind}_table.csv"),
        csv_bytes(
            &header_refs,
            (0..rows).map(|r| {
                let first = &cells[r * cols];
                std::iter::once(to_units(first.params[0]).to_string())
                    .chain((0..cols).map(|c| cells[r * cols + c].concurrence.to_string()))
                    .collect::<Vec<_>>()
            }),
        )?,
    );
    let c: Vec<f64> = cells.iter().map(|c| c.concurrence).collect();
    bundle.add_json(
        "summary.json",
        &json!({
            "axis": kind.to_string(),
            "birefringence": source.birefringence,
            "C_pol_min": c.iter().cloned().fold(f64::INFINITY, f64::min),
            "C_pol_max": c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }),
    );
    Ok(bundle)
}
