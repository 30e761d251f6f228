//! Lower bound on the global fidelity to `|Φ⁺⟩_p ⊗ |Ψ⁻⟩_ω` given the
//! fidelities of the two reduced states.
//!
//! Solved as
//!
//! ```text
//! min  ⟨T, ρ⟩
//! s.t. tr ρ = 1,  ⟨Φ⁺⊗I, ρ⟩ = F_p,  ⟨I⊗Ψ⁻, ρ⟩ − s = F_ω,
//!      ⟨I⊗|ss⟩⟨ss|, ρ⟩ = ⟨I⊗|ii⟩⟨ii|, ρ⟩ = 0,  ρ ⪰ 0,  s ≥ 0
//! ```
//!
//! by ADMM: alternate projections onto the affine set and the cone, with a
//! running dual correction.

use super::TomoError;
use crate::qmath::{from_eigen, hermitian_eigen, ComplexMatrix, DensityMatrix, PureState2Q};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Stopping threshold on the primal and dual residuals.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// ADMM penalty.
    pub rho: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200_000,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Objective at the final cone iterate.
    pub raw_objective: f64,
    /// `raw_objective` restricted to `[max(0, F_p + F_ω − 1), min(F_p, F_ω)]`,
    /// an interval that provably contains the exact minimum.
    pub bound: f64,
    /// Largest violation of the affine constraints at the final cone iterate.
    pub constraint_residual: f64,
    pub iterations: usize,
    pub minimizer: DensityMatrix,
}

struct Constraint {
    matrix: ComplexMatrix,
    slack: f64,
    rhs: f64,
}

/// Inner product `Re tr(A B)` for Hermitian arguments.
fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn projector(v: &[Complex64]) -> ComplexMatrix {
    let v = DVector::from_column_slice(v);
    &v * v.adjoint()
}

fn basis_projector(index: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(index, index)] = Complex64::new(1.0, 0.0);
    m
}

fn project_psd(m: &ComplexMatrix) -> ComplexMatrix {
    let herm = (m + m.adjoint()).scale(0.5);
    let (vals, vecs) = hermitian_eigen(&herm);
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    from_eigen(&clipped, &vecs)
}

/// Full solve with diagnostics.
pub fn solve_fidelity_sdp(
    f_p: f64,
    f_omega: f64,
    options: SdpOptions,
) -> Result<SdpSolution, TomoError> {
    for (name, value) in [("F_p", f_p), ("F_omega", f_omega)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(TomoError::OutOfRange { name, value });
        }
    }
    let phi = projector(PureState2Q::phi_plus().amplitudes());
    let psi = projector(PureState2Q::psi_minus().amplitudes());
    // Ψ⁻ in the frequency labels (ss, si, is, ii) coincides with the
    // two-qubit singlet in (00, 01, 10, 11).
    let id = ComplexMatrix::identity(4, 4);
    let target = phi.kronecker(&psi);
    let constraints = [
        Constraint {
            matrix: ComplexMatrix::identity(DIM, DIM),
            slack: 0.0,
            rhs: 1.0,
        },
        Constraint {
            matrix: phi.kronecker(&id),
            slack: 0.0,
            rhs: f_p,
        },
        Constraint {
            matrix: id.kronecker(&psi),
            slack: -1.0,
            rhs: f_omega,
        },
        Constraint {
            matrix: id.kronecker(&basis_projector(0)),
            slack: 0.0,
            rhs: 0.0,
        },
        Constraint {
            matrix: id.kronecker(&basis_projector(3)),
            slack: 0.0,
            rhs: 0.0,
        },
    ];
    let n = constraints.len();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        inner(&constraints[i].matrix, &constraints[j].matrix)
            + constraints[i].slack * constraints[j].slack
    });
    let gram_inv = gram
        .try_inverse()
        .expect("constraint operators are linearly independent");
    let residuals = |x: &ComplexMatrix, s: f64| -> DVector<f64> {
        DVector::from_iterator(
            n,
            constraints
                .iter()
                .map(|c| inner(&c.matrix, x) + c.slack * s - c.rhs),
        )
    };
    let project_affine = |x: &mut ComplexMatrix, s: &mut f64| {
        let mu = &gram_inv * residuals(x, *s);
        for (c, m) in constraints.iter().zip(mu.iter()) {
            *x -= c.matrix.scale(*m);
            *s -= c.slack * m;
        }
    };

    let rho_pen = options.rho;
    let mut z = ComplexMatrix::identity(DIM, DIM).unscale(DIM as f64);
    let mut zs = 0.0;
    let mut u = ComplexMatrix::zeros(DIM, DIM);
    let mut us = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut x = &z - &u - target.unscale(rho_pen);
        let mut xs = zs - us;
        project_affine(&mut x, &mut xs);
        let z_prev = z.clone();
        let zs_prev = zs;
        z = project_psd(&(&x + &u));
        zs = (xs + us).max(0.0);
        u += &x - &z;
        us += xs - zs;
        let primal = ((&x - &z).norm_squared() + (xs - zs).powi(2)).sqrt();
        let dual = rho_pen * ((&z - &z_prev).norm_squared() + (zs - zs_prev).powi(2)).sqrt();
        if primal < options.tolerance && dual < options.tolerance {
            converged = true;
            break;
        }
    }
    let residual = residuals(&z, zs).amax();
    if !converged && residual > 1e-4 {
        return Err(TomoError::SdpNotConverged {
            residual,
            iterations,
        });
    }
    let raw = inner(&target, &z);
    let lower = (f_p + f_omega - 1.0).max(0.0);
    let upper = f_p.min(f_omega);
    let minimizer = crate::qmath::project_to_physical(&z)?;
    Ok(SdpSolution {
        raw_objective: raw,
        bound: raw.clamp(lower, upper),
        constraint_residual: residual,
        iterations,
        minimizer,
    })
}

/// Minimum fidelity of a 16-dimensional state to `|Φ⁺⟩⊗|Ψ⁻⟩` consistent with
/// polarization fidelity `F_p` and frequency fidelity at least `F_ω`.
pub fn global_fidelity_lower_bound(f_p: f64, f_omega: f64) -> Result<f64, TomoError> {
    Ok(solve_fidelity_sdp(f_p, f_omega, SdpOptions::default())?.bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_inputs_force_the_product_state() {
        let sol = solve_fidelity_sdp(1.0, 1.0, SdpOptions::default()).unwrap();
        assert!(
            (sol.raw_objective - 1.0).abs() < 1e-8,
            "{}",
            sol.raw_objective
        );
        assert_eq!(sol.bound, 1.0);
    }

    #[test]
    fn reported_subspace_fidelities() {
        let sol = solve_fidelity_sdp(0.997, 0.988, SdpOptions::default()).unwrap();
        assert!(
            (sol.raw_objective - 0.985).abs() < 1e-3,
            "{}",
            sol.raw_objective
        );
        assert!(sol.constraint_residual < 1e-8);
    }

    #[test]
    fn weak_inputs_allow_zero() {
        let sol = solve_fidelity_sdp(0.6, 0.3, SdpOptions::default()).unwrap();
        assert!(sol.raw_objective.abs() < 1e-6, "{}", sol.raw_objective);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(global_fidelity_lower_bound(1.01, 0.5).is_err());
        assert!(global_fidelity_lower_bound(0.5, -0.1).is_err());
    }
}
