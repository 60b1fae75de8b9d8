//! Property checks over the public API with randomized parameters.

use proptest::prelude::*;
use vibronica::analytic::{analytic_absorption_spectrum, analytic_emission_spectrum, steady_population};
use vibronica::cavity::{polaritons, transmission_analytic};
use vibronica::fock::FockSpace;
use vibronica::franck_condon::{fc_series, FcKind, DEFAULT_TAIL_TOL};
use vibronica::ladder::Ladder;
use vibronica::lindblad::{evolve, molecule_liouvillian, numeric_steady_population, DensityMatrix};
use vibronica::model::{CavityParams, MoleculeParams};
use vibronica::spectrum::linspace;

fn molecule(lambda1: f64, nu_e: f64) -> MoleculeParams {
    MoleculeParams::new(1.0, nu_e, lambda1)
        .unwrap()
        .with_rates(0.01, 0.1)
        .unwrap()
        .with_drive(0.005, 0.0)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fc_sum_rules(lambda1 in 0.0f64..2.0, nu_e in 0.5f64..3.0) {
        let p = molecule(lambda1, nu_e);
        for kind in [FcKind::Emission, FcKind::Absorption] {
            let s = fc_series(&p, kind, DEFAULT_TAIL_TOL).unwrap();
            prop_assert!(s.weights.iter().all(|&w| w >= 0.0));
            let sum = s.sum();
            prop_assert!((1.0 - 1e-8..=1.0 + 1e-12).contains(&sum), "{kind:?} sum {sum}");
        }
    }

    #[test]
    fn fc_ignores_sign_of_lambda1(lambda1 in 0.0f64..2.0, nu_e in 0.5f64..3.0) {
        let a = fc_series(&molecule(lambda1, nu_e), FcKind::Emission, DEFAULT_TAIL_TOL).unwrap();
        let b = fc_series(&molecule(-lambda1, nu_e), FcKind::Emission, DEFAULT_TAIL_TOL).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn no_squeezing_means_mirror_weights(lambda1 in 0.0f64..2.0) {
        let p = molecule(lambda1, 1.0);
        let em = fc_series(&p, FcKind::Emission, DEFAULT_TAIL_TOL).unwrap();
        let ab = fc_series(&p, FcKind::Absorption, DEFAULT_TAIL_TOL).unwrap();
        for (x, y) in em.weights.iter().zip(&ab.weights) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn spectra_and_population_are_physical(lambda1 in 0.0f64..1.5, nu_e in 0.7f64..2.5, detuning in -1.0f64..3.0) {
        let p = molecule(lambda1, nu_e);
        let grid = linspace(-4.0, 6.0, 101);
        for s in [analytic_absorption_spectrum(&p, &grid).unwrap(), analytic_emission_spectrum(&p, &grid).unwrap()] {
            prop_assert!(s.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
        let pe = steady_population(&p.with_drive(0.02, detuning).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&pe));
    }

    #[test]
    fn ladder_generator_conserves(lambda1 in 0.0f64..1.5, nu_e in 0.7f64..2.5, big_gamma in 0.02f64..1.0) {
        let p = molecule(lambda1, nu_e).with_rates(0.01, big_gamma).unwrap();
        let l = Ladder::new(&p).unwrap();
        prop_assert!(l.column_sum_defect() < 1e-14);
        prop_assert_eq!(l.negativity(), 0.0);
    }

    #[test]
    fn empty_cavity_is_a_lorentzian(k1 in 0.1f64..1.0, k2 in 0.1f64..1.0, w in -3.0f64..3.0) {
        let c = CavityParams { omega_c: 0.0, g: 0.0, kappa1: k1, kappa2: k2, eta_c: 1e-3, n_molecules: 1 };
        let t = transmission_analytic(&molecule(1.0, 2.0), &c, &[w]).unwrap().t_power[0];
        let k = k1 + k2;
        prop_assert!((t - 4.0 * k1 * k2 / (k * k + w * w)).abs() < 1e-12);
    }
}

#[test]
fn uncoupled_polaritons_are_the_bare_modes() {
    let p = molecule(1.0, 2.0);
    let c = CavityParams {
        omega_c: 0.0,
        g: 1e-7,
        kappa1: 0.5,
        kappa2: 0.5,
        eta_c: 1e-3,
        n_molecules: 1,
    };
    let pol = polaritons(&p, &c).unwrap();
    let mut widths = [pol.gamma_plus, pol.gamma_minus];
    widths.sort_by(f64::total_cmp);
    let mut want = [pol.gamma_eff, c.kappa()];
    want.sort_by(f64::total_cmp);
    for (a, b) in widths.iter().zip(&want) {
        assert!((a - b).abs() < 1e-9, "{widths:?} vs {want:?}");
    }
}

#[test]
fn trajectories_stay_physical() {
    let p = molecule(0.8, 1.5).with_drive(0.02, 0.0).unwrap();
    let space = FockSpace::new(8).unwrap();
    let l = molecule_liouvillian(&p, space).unwrap();
    let rho0 = DensityMatrix::basis(0, &[2, space.dim()]).unwrap();
    for (_, rho) in evolve(&l, &rho0, 100.0, 1e-9).unwrap() {
        assert!(rho.check().passes());
    }
}

#[test]
fn weak_drive_population_agrees_with_rate_formula() {
    let p = molecule(0.5, 1.3).with_drive(0.001, 0.0).unwrap();
    let numeric = numeric_steady_population(&p, FockSpace::new(10).unwrap()).unwrap();
    let analytic = steady_population(&p).unwrap();
    assert!((numeric - analytic).abs() < 0.05 * analytic, "{numeric} vs {analytic}");
}
