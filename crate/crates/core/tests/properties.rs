use hyperpair::homi::{coincidence_probability_closed, HomiParams};
use hyperpair::qmath::{
    concurrence, fidelity_to_pure, partial_trace, project_to_physical, project_to_simplex,
    ComplexMatrix, DensityMatrix, PureState2Q, Subsystem,
};
use hyperpair::spectral::channel;
use hyperpair::tomo::{
    expected_qst_counts, freq_rho_from_homi, linear_inversion, solve_fidelity_sdp, FreqEstimate,
    SdpOptions,
};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn ginibre(n: usize, parts: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |r, c| {
        let k = 2 * (r * n + c);
        Complex64::new(parts[k], parts[k + 1])
    })
}

fn density(n: usize, parts: &[f64]) -> DensityMatrix {
    let g = ginibre(n, parts);
    DensityMatrix::from_unnormalized(&g * g.adjoint() + ComplexMatrix::identity(n, n).scale(1e-3))
        .unwrap()
}

fn su2(a: f64, b: f64, c: f64) -> ComplexMatrix {
    let e = |x: f64| Complex64::from_polar(1.0, x);
    let (s, co) = (b / 2.0).sin_cos();
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            e(-(a + c) / 2.0) * co,
            -e(-(a - c) / 2.0) * s,
            e((a - c) / 2.0) * s,
            e((a + c) / 2.0) * co,
        ],
    )
}

fn amplitudes(parts: &[f64]) -> [Complex64; 4] {
    [0, 1, 2, 3].map(|k| Complex64::new(parts[2 * k], parts[2 * k + 1]))
}

fn nonzero(parts: &[f64]) -> bool {
    parts.iter().map(|x| x * x).sum::<f64>() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn concurrence_local_unitary_invariance(
        parts in prop::collection::vec(-1.0..1.0f64, 32),
        angles in prop::collection::vec(0.0..2.0 * PI, 6),
    ) {
        let rho = density(4, &parts);
        let u = su2(angles[0], angles[1], angles[2]).kronecker(&su2(angles[3], angles[4], angles[5]));
        let c0 = concurrence(&rho).unwrap();
        let c1 = concurrence(&rho.conjugate_by(&u).unwrap()).unwrap();
        prop_assert!((c0 - c1).abs() < 1e-9, "{c0} vs {c1}");
    }

    #[test]
    fn pure_state_concurrence_matches_determinant(
        parts in prop::collection::vec(-1.0..1.0f64, 8).prop_filter("nonzero", |p| nonzero(p)),
    ) {
        let psi = PureState2Q::normalized(amplitudes(&parts));
        let [a, b, c, d] = *psi.amplitudes();
        let expected = 2.0 * (a * d - b * c).norm();
        let got = concurrence(&psi.density()).unwrap();
        prop_assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn fidelity_one_only_for_own_state(
        p in prop::collection::vec(-1.0..1.0f64, 8).prop_filter("nonzero", |p| nonzero(p)),
        q in prop::collection::vec(-1.0..1.0f64, 8).prop_filter("nonzero", |p| nonzero(p)),
    ) {
        let psi = PureState2Q::normalized(amplitudes(&p));
        let phi = PureState2Q::normalized(amplitudes(&q));
        let own = fidelity_to_pure(&psi.density(), psi.amplitudes()).unwrap();
        prop_assert!((own - 1.0).abs() < 1e-12);
        let overlap: Complex64 = psi
            .amplitudes()
            .iter()
            .zip(phi.amplitudes())
            .map(|(x, y)| x.conj() * y)
            .sum();
        let cross = fidelity_to_pure(&phi.density(), psi.amplitudes()).unwrap();
        prop_assert!((cross - overlap.norm_sqr()).abs() < 1e-12);
        if overlap.norm_sqr() < 1.0 - 1e-6 {
            prop_assert!(cross < 1.0 - 1e-7);
        }
    }

    #[test]
    fn partial_trace_of_product(
        a in prop::collection::vec(-1.0..1.0f64, 32),
        b in prop::collection::vec(-1.0..1.0f64, 32),
    ) {
        let pol = density(4, &a);
        let freq = density(4, &b);
        let joint = pol.tensor(&freq).unwrap();
        let back_pol = partial_trace(&joint, Subsystem::Polarization).unwrap();
        let back_freq = partial_trace(&joint, Subsystem::Frequency).unwrap();
        prop_assert!(back_pol.distance(pol.matrix()) < 1e-12);
        prop_assert!(back_freq.distance(freq.matrix()) < 1e-12);
    }

    #[test]
    fn projection_fixes_physical_states(parts in prop::collection::vec(-1.0..1.0f64, 32)) {
        let rho = density(4, &parts);
        let projected = project_to_physical(rho.matrix()).unwrap();
        prop_assert!(projected.distance(rho.matrix()) < 1e-10);
    }

    #[test]
    fn projection_is_idempotent(parts in prop::collection::vec(-1.0..1.0f64, 32)) {
        let g = ginibre(4, &parts);
        let h = (&g + g.adjoint()).scale(0.5) + ComplexMatrix::identity(4, 4);
        let once = project_to_physical(&h).unwrap();
        let twice = project_to_physical(once.matrix()).unwrap();
        prop_assert!(twice.distance(once.matrix()) < 1e-10);
        prop_assert!(once.eigenvalues().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn simplex_projection_lands_on_simplex(v in prop::collection::vec(-2.0..2.0f64, 1..12)) {
        let p = project_to_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_inversion_recovers_expected_counts(parts in prop::collection::vec(-1.0..1.0f64, 32)) {
        let rho = density(4, &parts);
        let est = linear_inversion(&expected_qst_counts(&rho, 500.0));
        prop_assert!((est - rho.matrix()).norm() < 1e-9);
    }

    #[test]
    fn homi_pattern_parity_and_range(
        tau in -20e-12..20e-12f64,
        v in 0.0..=1.0f64,
        phi in -PI..PI,
        ch in 1u32..=4,
    ) {
        let f = channel(ch).unwrap();
        let p = coincidence_probability_closed(tau, &HomiParams::new(v, phi, &f).unwrap());
        let mirrored = coincidence_probability_closed(-tau, &HomiParams::new(v, -phi, &f).unwrap());
        prop_assert!((p - mirrored).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!(p >= 0.5 * (1.0 - v) - 1e-12 && p <= 0.5 * (1.0 + v) + 1e-12);
    }

    #[test]
    fn frequency_concurrence_ignores_phase(
        v in 0.0..=1.0f64,
        phi in -PI..PI,
        p_omega in 0.05..0.95f64,
    ) {
        let est = |phi_freq| FreqEstimate { visibility: v, phi_freq, p_omega };
        let c = concurrence(&freq_rho_from_homi(&est(phi)).unwrap()).unwrap();
        let c0 = concurrence(&freq_rho_from_homi(&est(0.0)).unwrap()).unwrap();
        prop_assert!((c - c0).abs() < 1e-12, "{c} vs {c0}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sdp_bound_is_monotone(f_p in 0.5..0.95f64, f_w in 0.5..1.0f64, step in 0.01..0.05f64) {
        let opts = SdpOptions::default();
        let lo = solve_fidelity_sdp(f_p, f_w, opts).unwrap();
        let hi = solve_fidelity_sdp(f_p + step, f_w, opts).unwrap();
        prop_assert!(hi.bound >= lo.bound - 1e-6, "{} < {}", hi.bound, lo.bound);
        prop_assert!(lo.bound >= (f_p + f_w - 1.0).max(0.0) && lo.bound <= f_p.min(f_w));
    }
}
