use phasediff::calculus::{apply_diffusion, diffusion_propagate_exact, Transport};
use phasediff::dynamics::{evolve_full, EvolutionConfig};
use phasediff::field::dist_sq;
use phasediff::observables::{delta_e_n, invert_lamb_shift, thermal_params, PhysicalConstants};
use phasediff::quantization::{extract, lift, project_p0, rho_phase};
use phasediff::states::{random_config_field, random_phase_field};
use phasediff::{inner, norm_sq, HamiltonianSpec, ModelParams, PhaseGrid};
use proptest::prelude::*;

fn grid() -> PhaseGrid {
    PhaseGrid::square(1, 64, 1.0).unwrap()
}

fn params(a: f64, b: f64) -> ModelParams {
    ModelParams::new(1.0, 1.0, a, b, 1).unwrap()
}

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 12, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn lift_is_isometric_left_inverse(seed in 0u64..1000, a in 0.6f64..1.5, b in 0.8f64..2.5) {
        let p = params(a, b);
        let psi = random_config_field(grid().config(), 3, 0.6, 1.0, seed);
        let phi = lift(&psi, &p).unwrap();
        prop_assert!((norm_sq(&phi) - norm_sq(&psi)).abs() < 1e-10);
        let back = extract(&phi, &p);
        prop_assert!(dist_sq(&back, &psi).sqrt() < 1e-10);
    }

    #[test]
    fn projector_idempotent_and_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
        let p = params(1.0, 2.0);
        let f = random_phase_field(grid(), 3, 0.7, s1);
        let g = random_phase_field(grid(), 3, 0.7, s2);
        let pf = project_p0(&f, &p);
        prop_assert!(dist_sq(&project_p0(&pf, &p), &pf).sqrt() < 1e-10);
        let lhs = inner(&pf, &g).unwrap();
        let rhs = inner(&f, &project_p0(&g, &p)).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn diffusion_symmetric_nonpositive(s1 in 0u64..1000, s2 in 0u64..1000) {
        let p = params(1.0, 2.0);
        let f = random_phase_field(grid(), 2, 0.6, s1);
        let g = random_phase_field(grid(), 2, 0.6, s2);
        let df = apply_diffusion(&f, &p);
        let dg = apply_diffusion(&g, &p);
        let scale = norm_sq(&df).sqrt() * norm_sq(&g).sqrt();
        prop_assert!((inner(&df, &g).unwrap() - inner(&f, &dg).unwrap()).norm() < 1e-10 * scale);
        prop_assert!(inner(&df, &f).unwrap().re <= 1e-10 * scale);
    }

    #[test]
    fn transport_antisymmetric(s1 in 0u64..1000, s2 in 0u64..1000, omega in 0.3f64..1.5) {
        let p = params(1.0, 2.0);
        let t = Transport::new(grid(), &HamiltonianSpec::harmonic(1.0, omega), &p);
        let f = random_phase_field(grid(), 2, 0.6, s1);
        let g = random_phase_field(grid(), 2, 0.6, s2);
        let lhs = inner(&t.apply(&f), &g).unwrap();
        let rhs = inner(&f, &t.apply(&g)).unwrap();
        prop_assert!((lhs + rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn propagator_semigroup(seed in 0u64..1000, t1 in 0.01f64..0.3, t2 in 0.01f64..0.3) {
        let p = params(1.0, 2.0);
        let f = random_phase_field(grid(), 2, 0.6, seed);
        let a = diffusion_propagate_exact(&diffusion_propagate_exact(&f, t1, &p).unwrap(), t2, &p).unwrap();
        let b = diffusion_propagate_exact(&f, t1 + t2, &p).unwrap();
        prop_assert!(dist_sq(&a, &b).sqrt() < 1e-10);
        prop_assert!(norm_sq(&b) <= norm_sq(&f) + 1e-12);
    }

    #[test]
    fn eta_bounded_and_norm_decreasing(seed in 0u64..1000) {
        let p = params(1.0, 2.0);
        let f = random_phase_field(grid(), 2, 0.6, seed);
        let cfg = EvolutionConfig { dt: 0.004, t_end: 0.2, record_every: 5, ..Default::default() };
        let tr = evolve_full(&f, &HamiltonianSpec::harmonic(1.0, 1.0), &p, &cfg).unwrap();
        let mut prev = norm_sq(&f);
        for s in &tr.states {
            let n = norm_sq(s);
            let eta = norm_sq(&project_p0(s, &p)) / n;
            prop_assert!((0.0..=1.0 + 1e-10).contains(&eta));
            prop_assert!(n <= prev + 1e-10);
            prev = n;
        }
    }

    #[test]
    fn rho_nonnegative(seed in 0u64..1000, b in 0.8f64..3.0) {
        let p = params(1.0, b);
        let psi = random_config_field(grid().config(), 3, 0.6, 1.0, seed);
        let rho = rho_phase(&psi, &p).unwrap();
        let max = rho.values.iter().cloned().fold(0.0, f64::max);
        prop_assert!(rho.values.iter().all(|v| *v >= -1e-12 * max));
    }

    #[test]
    fn shift_inversion_round_trip(ab in 1e2f64..1e6, n in 1u32..9) {
        let k = PhysicalConstants::CGS;
        let e = delta_e_n(n, ab, &k).unwrap();
        let back = phasediff::observables::invert_level_shift(-e, n, &k).unwrap();
        prop_assert!((back / ab - 1.0).abs() < 1e-12);
        if n == 2 {
            prop_assert!((invert_lamb_shift(-e, &k).unwrap() / ab - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_algebra(t in 0.01f64..1e4, ab in 1e2f64..1e6) {
        let k = PhysicalConstants::CGS;
        let th = thermal_params(t, ab, &k).unwrap();
        prop_assert!(((th.a_sq * th.b_sq).sqrt() / (k.k_b * 1e-7 * t) - 1.0).abs() < 1e-12);
        prop_assert!((th.a_over_b * th.gamma * k.m_e * 1e-3 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lifted_states_are_stationary() {
    let p = params(1.0, 2.0);
    let psi = random_config_field(grid().config(), 2, 0.6, 1.0, 5);
    let phi = lift(&psi, &p).unwrap();
    let d = apply_diffusion(&phi, &p);
    assert!(norm_sq(&d).sqrt() < 1e-8 * p.rate());
}
