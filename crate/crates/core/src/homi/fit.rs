//! Weighted least-squares fit of `(V, φ_freq)` to a delay scan.

use super::{pattern, HomiError, HomiScan};
use crate::spectral::{sinc, wrap_phase};
use std::f64::consts::{FRAC_PI_2, PI};

pub const FIT_MAX_ITERATIONS: usize = 500;
const V_MAX: f64 = 1.05;
const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct HomiFit {
    pub visibility: f64,
    /// In `[0, 2π)`.
    pub phi_freq: f64,
    /// Covariance of `(V, φ)` from the inverse weighted normal matrix.
    pub covariance: [[f64; 2]; 2],
    pub chi2_reduced: f64,
    pub iterations: usize,
    /// The raw estimate exceeded 1.
    pub above_unity: bool,
}

impl HomiFit {
    pub fn visibility_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn phi_sigma(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

struct Problem<'a> {
    delays: &'a [f64],
    y: Vec<f64>,
    w: Vec<f64>,
    omega0: f64,
    delta_omega: f64,
}

impl Problem<'_> {
    fn chi2(&self, v: f64, phi: f64) -> f64 {
        self.delays
            .iter()
            .zip(self.y.iter().zip(&self.w))
            .map(|(&t, (&y, &w))| {
                w * (y - pattern(t, v, phi, self.omega0, self.delta_omega)).powi(2)
            })
            .sum()
    }

    /// Normal matrix `JᵀWJ` and gradient term `JᵀW r`.
    fn normal(&self, v: f64, phi: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for (&t, (&y, &w)) in self.delays.iter().zip(self.y.iter().zip(&self.w)) {
            let s = sinc(self.delta_omega * t);
            let theta = 2.0 * self.omega0 * t - phi;
            let j = [-0.5 * s * theta.cos(), -0.5 * v * s * theta.sin()];
            let r = y - pattern(t, v, phi, self.omega0, self.delta_omega);
            for p in 0..2 {
                g[p] += w * j[p] * r;
                for q in 0..2 {
                    a[p][q] += w * j[p] * j[q];
                }
            }
        }
        (a, g)
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

fn invert2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det <= 0.0 || !det.is_finite() {
        return [[f64::INFINITY, 0.0], [0.0, f64::INFINITY]];
    }
    [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ]
}

struct Outcome {
    v: f64,
    phi: f64,
    chi2: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg(problem: &Problem, v0: f64, phi0: f64) -> Outcome {
    let (mut v, mut phi) = (v0, phi0);
    let mut chi2 = problem.chi2(v, phi);
    let mut lambda = 1e-3;
    for it in 1..=FIT_MAX_ITERATIONS {
        let (a, g) = problem.normal(v, phi);
        let damped = [
            [a[0][0] * (1.0 + lambda), a[0][1]],
            [a[1][0], a[1][1] * (1.0 + lambda)],
        ];
        let Some(mut step) = solve2(damped, g) else {
            return Outcome {
                v,
                phi,
                chi2,
                iterations: it,
                converged: true,
            };
        };
        // V pinned at a bound: move φ alone.
        if (v >= V_MAX && step[0] > 0.0) || (v <= 0.0 && step[0] < 0.0) {
            step = [0.0, g[1] / damped[1][1]];
        }
        let v_new = (v + step[0]).clamp(0.0, V_MAX);
        let phi_new = phi + step[1];
        let chi2_new = problem.chi2(v_new, phi_new);
        if chi2_new <= chi2 {
            let small = (v_new - v).abs() < 1e-12 && (phi_new - phi).abs() < 1e-12;
            let stalled = chi2 - chi2_new <= 1e-15 * chi2.max(1e-300);
            v = v_new;
            phi = phi_new;
            chi2 = chi2_new;
            lambda = (lambda * 0.1).max(1e-12);
            if small || (stalled && lambda <= 1e-6) {
                return Outcome {
                    v,
                    phi,
                    chi2,
                    iterations: it,
                    converged: true,
                };
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                return Outcome {
                    v,
                    phi,
                    chi2,
                    iterations: it,
                    converged: true,
                };
            }
        }
    }
    Outcome {
        v,
        phi,
        chi2,
        iterations: FIT_MAX_ITERATIONS,
        converged: false,
    }
}

/// Fits the closed-form pattern to `counts / N` with Poisson weights
/// `N² / max(counts, 1)`, from four starting phases.
pub fn fit_scan(scan: &HomiScan, omega0: f64, delta_omega: f64) -> Result<HomiFit, HomiError> {
    scan.validate()?;
    let n = scan.delays.len();
    if n < MIN_POINTS {
        return Err(HomiError::Degenerate(format!(
            "{n} delay points, need at least {MIN_POINTS}"
        )));
    }
    let (lo, hi) = scan
        .delays
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| {
            (l.min(t), h.max(t))
        });
    if hi - lo < PI / omega0 {
        return Err(HomiError::Degenerate(
            "delays span less than one fringe period".into(),
        ));
    }
    if scan.counts.iter().all(|&c| c == scan.counts[0]) {
        return Err(HomiError::Degenerate("all counts are equal".into()));
    }
    let big_n = scan.pairs_per_point;
    let problem = Problem {
        delays: &scan.delays,
        y: scan.counts.iter().map(|c| c / big_n).collect(),
        w: scan
            .counts
            .iter()
            .map(|&c| big_n * big_n / c.max(1.0))
            .collect(),
        omega0,
        delta_omega,
    };
    let best = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]
        .iter()
        .map(|&phi0| levenberg(&problem, 0.9, phi0))
        .min_by(|a, b| a.chi2.total_cmp(&b.chi2))
        .expect("four starts");
    let (a, _) = problem.normal(best.v, best.phi);
    let fit = HomiFit {
        visibility: best.v,
        phi_freq: wrap_phase(best.phi),
        covariance: invert2(a),
        chi2_reduced: best.chi2 / (n - 2) as f64,
        iterations: best.iterations,
        above_unity: best.v > 1.0,
    };
    if !best.converged {
        return Err(HomiError::NoConvergence {
            iterations: best.iterations,
            last: Box::new(fit),
        });
    }
    Ok(fit)
}
