use coherent_control::classical_control::{self, GaussianPulse, PulsePair};
use coherent_control::cli::ScenarioConfig;
use coherent_control::collision::{self, ChannelSpace, SecondProcessTensor};
use coherent_control::fock::{FieldState, ModeState};
use coherent_control::incoherent_control as inc;
use coherent_control::measures::{self, ProjectorSet};
use coherent_control::quantum_control as qc;
use coherent_control::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn u_in_unit_interval_and_scale_free(seed in any::<u64>(), dim in 2usize..10, s1 in 0.1f64..10.0, s2 in 0.1f64..10.0, ph in 0.0f64..6.3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b) = measures::random_commuting_sets(dim, &mut rng);
        let p1 = measures::random_state(dim, &mut rng);
        let p2 = measures::random_state(dim, &mut rng);
        let u = measures::indistinguishability(&p1, &p2, &a).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&u));
        let k = Complex64::from_polar(s1, ph);
        let q1: Vec<_> = p1.iter().map(|z| z * k).collect();
        let q2: Vec<_> = p2.iter().map(|z| z * s2).collect();
        let us = measures::indistinguishability(&q1, &q2, &a).unwrap();
        prop_assert!((u - us).abs() < 1e-10);
        let r = measures::verify_bound(&p1, &p2, &a, &b).unwrap();
        prop_assert!(r.holds);
    }

    #[test]
    fn u_is_one_for_states_equal_up_to_phase(seed in any::<u64>(), dim in 1usize..10, ph in 0.0f64..6.3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = measures::random_state(dim, &mut rng);
        let q: Vec<_> = p.iter().map(|z| z * Complex64::from_polar(2.0, ph)).collect();
        let u = measures::indistinguishability(&p, &q, &ProjectorSet::computational(dim)).unwrap();
        prop_assert!((u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn annihilation_norm_is_mean_number(re in -1.5f64..1.5, im in -1.5f64..1.5, n in 0u32..4) {
        let psi = FieldState::product_auto(&[ModeState::Coherent(c(re, im)), ModeState::Fock(n)], 1e-13, 80).unwrap();
        for mode in 0..2 {
            let mean: f64 = psi.number_distribution(mode).unwrap().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            let a = psi.annihilate(mode).unwrap();
            prop_assert!((a.norm_sqr() - mean).abs() < 1e-9 * (1.0 + mean));
        }
    }

    #[test]
    fn coherent_is_eigenstate(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let alpha = c(re, im);
        let psi = FieldState::coherent_auto(&[alpha], 1e-14, 80).unwrap();
        let r = psi.annihilate(0).unwrap().add_scaled(-alpha, &psi).unwrap().norm();
        prop_assert!(r < 1e-6);
        prop_assert!((psi.mean_field(0).unwrap() - alpha).norm() < 1e-6);
    }

    #[test]
    fn cat_state_parity(alpha in 0.05f64..2.5) {
        let e = FieldState::even_coherent(alpha, 0, 1, 60, 1e-12).unwrap();
        let o = FieldState::odd_coherent(alpha, 0, 1, 60, 1e-12).unwrap();
        let pe = e.number_distribution(0).unwrap();
        let po = o.number_distribution(0).unwrap();
        prop_assert!(pe.iter().skip(1).step_by(2).all(|&p| p == 0.0));
        prop_assert!(po.iter().step_by(2).all(|&p| p == 0.0));
        prop_assert!(e.mean_field(0).unwrap().norm() < 1e-14);
        prop_assert!(o.mean_field(0).unwrap().norm() < 1e-14);
    }

    #[test]
    fn weighted_annihilation_is_linear(w in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3), v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3), k in (-2.0f64..2.0, -2.0f64..2.0)) {
        let psi = FieldState::product_auto(&[ModeState::Coherent(c(0.4, 0.1)), ModeState::Even(0.7), ModeState::Fock(2)], 1e-12, 60).unwrap();
        let w: Vec<_> = w.into_iter().map(|(a, b)| c(a, b)).collect();
        let v: Vec<_> = v.into_iter().map(|(a, b)| c(a, b)).collect();
        let k = c(k.0, k.1);
        let combined: Vec<_> = w.iter().zip(&v).map(|(a, b)| a + k * b).collect();
        let lhs = psi.annihilate_weighted(&combined).unwrap();
        let rhs = psi.annihilate_weighted(&w).unwrap().add_scaled(k, &psi.annihilate_weighted(&v).unwrap()).unwrap();
        prop_assert!(lhs.add_scaled(c(-1.0, 0.0), &rhs).unwrap().norm() < 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn random_second_process_is_hermitian_and_bounded(seed in any::<u64>()) {
        let space = ChannelSpace::uniform(2, 2, 2, 1, 4);
        let s = collision::build_smatrix(&space, seed, true, false).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let t = SecondProcessTensor::random(&space, &mut rng);
        prop_assert!(t.hermiticity_error() < 1e-14);
        let p = collision::target_probability(&s, &t).unwrap();
        let all = collision::target_probability(&s, &SecondProcessTensor::identity(&space)).unwrap();
        prop_assert!(p >= -1e-14 && p <= all + 1e-14);
        prop_assert!((all - s.total_probability()).abs() < 1e-12);
    }

    #[test]
    fn classical_scan_is_periodic(shift in 0.0f64..30.0) {
        let cfg = ScenarioConfig::default();
        let mol = cfg.molecule.build().unwrap();
        let tau = cfg.scan.delay_start + shift;
        let period = qc::delay_period(&mol);
        let t = classical_control::delay_scan(&mol, &cfg.pulse_pair(), &[tau, tau + period]).unwrap();
        for g in mol.groups() {
            let v: Vec<f64> = t.channel_rows(&g).map(|r| r.total).collect();
            prop_assert!((v[0] - v[1]).abs() < 1e-9 * v[0].abs().max(v[1].abs()));
        }
    }

    #[test]
    fn incoherent_probability_ignores_mode_phases(phases in proptest::collection::vec(0.0f64..6.3, 21)) {
        let ic = ScenarioConfig::default().incoherent;
        let mol = ic.molecule(0.0).unwrap();
        let grid = ic.grid(ic.epsilon_rel).unwrap();
        let psi = ic.families().unwrap().remove(0).1;
        let scan = inc::phase_insensitivity_scan(&mol, &grid, &psi, ic.energy, &[vec![0.0; 21], phases]).unwrap();
        prop_assert!(scan.relative_spread() < 1e-10);
    }
}

#[test]
fn doubling_the_preparation_amplitude_quadruples_the_cross_term() {
    let cfg = ScenarioConfig::default();
    let mol = cfg.molecule.build().unwrap();
    let base = cfg.pulse_pair();
    let twice = PulsePair { x: GaussianPulse { amplitude: 2.0 * base.x.amplitude, ..base.x }, d: base.d };
    let e = mol.continuum()[5];
    let i1 = classical_control::channel_probability(&mol, &base, e, 0).unwrap().interference;
    let i2 = classical_control::channel_probability(&mol, &twice, e, 0).unwrap().interference;
    assert!((i2 - 4.0 * i1).abs() < 1e-12 * i1.abs());
}
