//! Energy and gradient checked against independent references: a direct loop
//! over every lattice point near each cell (with its own kernel formula), and
//! central finite differences.

mod common;

use common::{direct_energy, random_pair};
use nlsurf::energy::{
    energy_gradient, inhomogeneity, total_energy, truncate, DomainMode, EnergyParams,
};
use nlsurf::fields::{
    make_grid, sample_kernel, BoundaryMode, FieldKind, KernelSpec, Potential, ScalarField,
};
use nlsurf::optimize::grad_check;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_direct_double_loop_1d_and_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (1, vec![2.0], vec![40], vec![BoundaryMode::Periodic], 0.31, DomainMode::Interior),
        (1, vec![3.0], vec![64], vec![BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }], 0.4, DomainMode::Extended),
        (1, vec![1.0], vec![17], vec![BoundaryMode::Open], 0.2, DomainMode::Extended),
        (2, vec![1.0, 1.5], vec![12, 18], vec![BoundaryMode::Periodic, BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }], 0.26, DomainMode::Extended),
        (2, vec![1.0, 1.0], vec![16, 16], vec![BoundaryMode::Open, BoundaryMode::Periodic], 0.2, DomainMode::Interior),
    ];
    for (dim, ext, cells, bnd, eps, mode) in cases {
        let g = make_grid(dim, &ext, &cells, &bnd).unwrap();
        for spec in [KernelSpec::gaussian(0.5), KernelSpec::tophat(0.6), KernelSpec::exponential(0.3)] {
            let k = sample_kernel(&spec, &g, eps).unwrap();
            let (u, rho) = random_pair(&g, &mut rng, 1.5, 2.0);
            let p = EnergyParams::exact(eps, mode);
            let fast = total_energy(&u, &rho, &k, &Potential::QuarticDoubleWell, &p).unwrap();
            let slow = direct_energy(&u, &rho, &spec, &p);
            for (a, b) in [
                (fast.potential, slow[0]),
                (fast.exchange, slow[1]),
                (fast.surfactant, slow[2]),
            ] {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn inhomogeneity_matches_direct_loop_with_smoothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = make_grid(2, &[1.0, 1.0], &[10, 14], &[BoundaryMode::Periodic, BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }]).unwrap();
    let spec = KernelSpec::gaussian(0.4);
    let k = sample_kernel(&spec, &g, 0.3).unwrap();
    let (u, rho) = random_pair(&g, &mut rng, 1.0, 1.0);
    let p = EnergyParams::smoothed(0.3, 0.05, DomainMode::Extended);
    let fast = total_energy(&u, &rho, &k, &Potential::QuarticDoubleWell, &p).unwrap();
    let slow = direct_energy(&u, &rho, &spec, &p);
    assert!((fast.surfactant - slow[2]).abs() <= 1e-12 * slow[2]);
    assert!((fast.exchange - slow[1]).abs() <= 1e-12 * slow[1]);
    let i = inhomogeneity(&u, &k, &p).unwrap();
    assert!(i.values().iter().all(|v| *v >= 0.0));
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (dim, cells) in [(1usize, vec![48usize]), (2, vec![10, 12])] {
        let g = if dim == 1 {
            make_grid(1, &[2.0], &cells, &[BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }]).unwrap()
        } else {
            make_grid(2, &[1.0, 1.2], &cells, &[BoundaryMode::Periodic, BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }]).unwrap()
        };
        let k = sample_kernel(&KernelSpec::gaussian(0.5), &g, 0.4).unwrap();
        for mode in [DomainMode::Interior, DomainMode::Extended] {
            let p = EnergyParams::smoothed(0.4, 1e-2, mode);
            let (u, rho) = random_pair(&g, &mut rng, 1.0, 1.0);
            let err = grad_check(&u, &rho, &k, &Potential::QuarticDoubleWell, &p, 1e-6, 9).unwrap();
            assert!(err < 1e-5, "dim {dim} {mode:?}: {err}");
        }
    }
}

#[test]
fn grad_check_constant_state_and_step_trend() {
    let g = make_grid(1, &[2.0], &[32], &[BoundaryMode::Periodic]).unwrap();
    let k = sample_kernel(&KernelSpec::gaussian(0.3), &g, 0.5).unwrap();
    let p = EnergyParams::smoothed(0.5, 1e-2, DomainMode::Interior);
    let one = ScalarField::constant(&g, 1.0, FieldKind::OrderParameter).unwrap();
    let zero = ScalarField::constant(&g, 0.0, FieldKind::Density).unwrap();
    let err = grad_check(&one, &zero, &k, &Potential::QuarticDoubleWell, &p, 1e-6, 1).unwrap();
    assert!(err < 1e-8, "{err}");

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (u, rho) = random_pair(&g, &mut rng, 1.0, 1.0);
    let errs: Vec<f64> = [1e-3, 1e-2, 1e-1]
        .iter()
        .map(|h| grad_check(&u, &rho, &k, &Potential::QuarticDoubleWell, &p, *h, 4).unwrap())
        .collect();
    assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
}

#[test]
fn odd_profile_gives_antisymmetric_u_gradient() {
    // periodic grid, u odd about the midpoint between cells n/2-1 and n/2
    let n = 32;
    let g = make_grid(1, &[2.0], &[n], &[BoundaryMode::Periodic]).unwrap();
    let k = sample_kernel(&KernelSpec::gaussian(0.2), &g, 0.5).unwrap();
    let p = EnergyParams::smoothed(0.5, 1e-2, DomainMode::Interior);
    let u = ScalarField::from_fn(&g, FieldKind::OrderParameter, |x| (3.0 * (x[0] - 1.0)).tanh() * 0.9).unwrap();
    let rho = ScalarField::constant(&g, 0.3, FieldKind::Density).unwrap();
    let (gu, grho) = energy_gradient(&u, &rho, &k, &Potential::QuarticDoubleWell, &p).unwrap();
    for i in 0..n {
        let j = n - 1 - i;
        let (a, b) = (gu.values()[i], gu.values()[j]);
        assert!((a + b).abs() <= 1e-12 * (a.abs() + 1.0), "gu {i}: {a} {b}");
        let (a, b) = (grho.values()[i], grho.values()[j]);
        assert!((a - b).abs() <= 1e-12 * (a.abs() + 1.0), "grho {i}: {a} {b}");
    }
}

#[test]
fn truncation_never_increases_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g = make_grid(1, &[2.0], &[40], &[BoundaryMode::Periodic]).unwrap();
    let k = sample_kernel(&KernelSpec::gaussian(0.3), &g, 0.4).unwrap();
    let p = EnergyParams::exact(0.4, DomainMode::Interior);
    for _ in 0..100 {
        let (u, rho) = random_pair(&g, &mut rng, 3.0, 3.0);
        let before = total_energy(&u, &rho, &k, &Potential::QuarticDoubleWell, &p).unwrap().total;
        let (ut, rt) = truncate(&u, &rho, &k, &p).unwrap();
        let after = total_energy(&ut, &rt, &k, &Potential::QuarticDoubleWell, &p).unwrap().total;
        assert!(after <= before + 1e-12, "{after} > {before}");
    }
}

fn field_strategy(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn terms_nonnegative_and_sign_symmetric(
        u in field_strategy(24, -2.0, 2.0),
        r in field_strategy(24, 0.0, 3.0),
        eps in 0.2f64..1.0,
        delta in prop_oneof![Just(0.0), 0.001f64..0.1],
    ) {
        let g = make_grid(1, &[3.0], &[24], &[BoundaryMode::Periodic]).unwrap();
        let k = sample_kernel(&KernelSpec::gaussian(0.4), &g, eps).unwrap();
        let p = EnergyParams::smoothed(eps, delta, DomainMode::Interior);
        let uf = ScalarField::new(g.clone(), u.clone(), FieldKind::OrderParameter).unwrap();
        let neg = ScalarField::new(g.clone(), u.iter().map(|v| -v).collect(), FieldKind::OrderParameter).unwrap();
        let rf = ScalarField::new(g.clone(), r, FieldKind::Density).unwrap();
        let e = total_energy(&uf, &rf, &k, &Potential::QuarticDoubleWell, &p).unwrap();
        let en = total_energy(&neg, &rf, &k, &Potential::QuarticDoubleWell, &p).unwrap();
        prop_assert!(e.potential >= 0.0 && e.exchange >= 0.0 && e.surfactant >= 0.0);
        prop_assert_eq!(e.total, e.potential + e.exchange + e.surfactant);
        prop_assert_eq!(e.total, en.total);
    }

    #[test]
    fn smoothing_changes_terms_within_explicit_bound(
        u in field_strategy(20, -1.0, 1.0),
        r in field_strategy(20, 0.0, 3.0),
        delta in 0.001f64..0.2,
    ) {
        let eps = 0.5;
        let g = make_grid(1, &[2.0], &[20], &[BoundaryMode::Periodic]).unwrap();
        let k = sample_kernel(&KernelSpec::gaussian(0.4), &g, eps).unwrap();
        let uf = ScalarField::new(g.clone(), u, FieldKind::OrderParameter).unwrap();
        let rf = ScalarField::new(g.clone(), r, FieldKind::Density).unwrap();
        let exact = EnergyParams::exact(eps, DomainMode::Interior);
        let smooth = exact.with_smoothing(delta);
        let e0 = total_energy(&uf, &rf, &k, &Potential::QuarticDoubleWell, &exact).unwrap();
        let ed = total_energy(&uf, &rf, &k, &Potential::QuarticDoubleWell, &smooth).unwrap();
        let i0 = inhomogeneity(&uf, &k, &exact).unwrap();
        let id = inhomogeneity(&uf, &k, &smooth).unwrap();
        let vol = g.cell_volume();
        let m0 = k.m0();
        let ex_bound = 2.0 * delta * i0.integral();
        let mut surf_bound = 0.0;
        for ((a, b), rho) in i0.values().iter().zip(id.values()).zip(rf.values()) {
            prop_assert!((a - b).abs() <= m0 * delta / eps + 1e-12);
            surf_bound += m0 * delta * ((a - rho).abs() + (b - rho).abs()) * vol;
        }
        prop_assert!(e0.exchange - ed.exchange >= -1e-12);
        prop_assert!(e0.exchange - ed.exchange <= ex_bound + 1e-12);
        prop_assert!((e0.surfactant - ed.surfactant).abs() <= surf_bound + 1e-12);
    }
}
