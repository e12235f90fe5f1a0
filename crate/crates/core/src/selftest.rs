//! Bundled suite of small closed-form checks, run by the `selftest` command.

use std::f64::consts::PI;

use crate::cell::{
    build_strip, sigma_lookup, sigma_table, solve_cell, CellProblem, SurfaceTensionTable, TableEntry,
};
use crate::energy::{inhomogeneity, smoothed_abs, total_energy, truncate, DomainMode, EnergyParams};
use crate::fields::{
    kernel_moments, make_grid, sample_kernel, BoundaryMode, DiscreteKernel, FieldKind, KernelSpec, Potential,
    ScalarField,
};
use crate::gamma::{
    compactness_diagnostic, recovery_fields, total_variation, weak_star_pairing, CellProfile, RecoveryConfig,
    RecoveryDomain,
};
use crate::optimize::{
    grad_check, minimize, minimize_objective, project_box, project_density, ConstraintSet, MassMode,
    MinimizeOptions, Objective,
};
use crate::sharp::{facet_density_from_measure, limit_energy, DiracMass, Facet, PolyhedralPhase};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T>(r: crate::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn grid_arithmetic() -> Result<(), String> {
    let g = ok(make_grid(1, &[1.0], &[4], &[BoundaryMode::Periodic]))?;
    ensure!(g.spacing()[0] == 0.25 && g.cell_volume() == 0.25, "1D spacing {:?}", g.spacing());
    let g = ok(make_grid(2, &[1.0, 2.0], &[4, 8], &[BoundaryMode::Periodic, BoundaryMode::clamped(1.0)]))?;
    ensure!(g.cell_volume() == 0.0625, "2D cell volume {}", g.cell_volume());
    ensure!(make_grid(1, &[1.0], &[1], &[BoundaryMode::Open]).is_err(), "single-cell grid accepted");
    Ok(())
}

fn tophat_stencil() -> Result<(), String> {
    let g = ok(make_grid(1, &[4.0], &[8], &[BoundaryMode::Periodic]))?;
    let k = ok(sample_kernel(&KernelSpec::tophat(1.0), &g, 1.0))?;
    let mut offs: Vec<isize> = k.offsets().iter().map(|o| o[0]).collect();
    offs.sort();
    ensure!(offs == vec![-2, -1, 1, 2], "offsets {offs:?}");
    ensure!(k.weights().iter().all(|w| *w == k.weights()[0]), "unequal weights {:?}", k.weights());
    Ok(())
}

fn support_scales_with_epsilon() -> Result<(), String> {
    let g = ok(make_grid(1, &[8.0], &[64], &[BoundaryMode::Periodic]))?;
    let reach = |eps: f64| -> Result<isize, String> {
        let k = ok(sample_kernel(&KernelSpec::tophat(1.0), &g, eps))?;
        Ok(k.offsets().iter().map(|o| o[0]).max().unwrap_or(0))
    };
    let (a, b) = (reach(1.0)?, reach(0.5)?);
    ensure!(a == 8 && b == 4, "reach {a} then {b}");
    ensure!(reach(0.125)? >= 1, "stencil at ε = h is empty");
    Ok(())
}

fn moments_of_explicit_stencils() -> Result<(), String> {
    let g = ok(make_grid(1, &[4.0], &[4], &[BoundaryMode::Periodic]))?;
    let k = ok(DiscreteKernel::from_parts(&g, 1.0, vec![[1, 0], [-1, 0]], vec![0.5, 0.5]))?;
    ensure!(kernel_moments(&k) == (1.0, 1.0), "moments {:?}", kernel_moments(&k));
    let z = ok(DiscreteKernel::from_parts(&g, 1.0, vec![[1, 0], [-1, 0]], vec![0.0, 0.0]))?;
    ensure!(kernel_moments(&z) == (0.0, 0.0), "zero moments {:?}", kernel_moments(&z));
    Ok(())
}

fn smoothed_abs_values() -> Result<(), String> {
    ensure!(smoothed_abs(0.0, 0.3) == 0.0, "at 0");
    ensure!(smoothed_abs(3.0, 0.0) == 3.0, "exact branch");
    ensure!(close(smoothed_abs(1.0, 1.0), 2f64.sqrt() - 1.0, 1e-15), "closed form");
    Ok(())
}

fn line(n: usize, extent: f64) -> Result<crate::fields::Grid, String> {
    ok(make_grid(1, &[extent], &[n], &[BoundaryMode::Periodic]))
}

fn constant_states() -> Result<(), String> {
    let g = line(16, 1.0)?;
    let k = ok(sample_kernel(&KernelSpec::gaussian(0.25), &g, 0.5))?;
    let p = EnergyParams::exact(0.5, DomainMode::Interior);
    let w = Potential::QuarticDoubleWell;
    let rho0 = ok(ScalarField::constant(&g, 0.0, FieldKind::Density))?;
    let one = ok(ScalarField::constant(&g, 1.0, FieldKind::OrderParameter))?;
    let zero = ok(ScalarField::constant(&g, 0.0, FieldKind::OrderParameter))?;
    let i = ok(inhomogeneity(&one, &k, &p))?;
    ensure!(i.values().iter().all(|v| *v == 0.0), "inhomogeneity of a constant");
    let e = ok(total_energy(&one, &rho0, &k, &w, &p))?;
    ensure!(e.total == 0.0 && e.potential == 0.0 && e.exchange == 0.0 && e.surfactant == 0.0, "{e:?}");
    let e = ok(total_energy(&zero, &rho0, &k, &w, &p))?;
    ensure!(close(e.potential, 2.0, 1e-12) && e.exchange == 0.0 && e.surfactant == 0.0, "{e:?}");
    let ps = EnergyParams::smoothed(0.5, 1e-2, DomainMode::Interior);
    let (gu, grho) = ok(crate::energy::energy_gradient(&one, &rho0, &k, &w, &ps))?;
    ensure!(gu.values().iter().chain(grho.values()).all(|v| *v == 0.0), "gradient at pure phase");
    let err = ok(grad_check(&one, &rho0, &k, &w, &ps, 1e-6, 0))?;
    ensure!(err < 1e-8, "grad_check at pure phase {err}");
    let (ut, rt) = ok(truncate(&one, &rho0, &k, &p))?;
    ensure!(ut == one && rt == rho0, "truncate moved a fixed point");
    Ok(())
}

fn projections() -> Result<(), String> {
    let g = line(2, 2.0)?;
    let u = ok(ScalarField::new(g.clone(), vec![0.5, 1.7], FieldKind::OrderParameter))?;
    let pu = ok(project_box(&u, &ConstraintSet::default()))?;
    ensure!(pu.values() == [0.5, 1.0], "box {:?}", pu.values());
    let c = ConstraintSet::with_mass(2.0, MassMode::Exactly);
    for (start, want) in [([1.0, 1.0], [1.0, 1.0]), ([3.0, 1.0], [2.0, 0.0]), ([0.0, 0.0], [1.0, 1.0])] {
        let r = ok(ScalarField::new(g.clone(), start.to_vec(), FieldKind::Density))?;
        let p = ok(project_density(&r, &c))?;
        ensure!(
            p.values().iter().zip(want).all(|(a, b)| close(*a, b, 1e-12)),
            "density {start:?} -> {:?}",
            p.values()
        );
    }
    Ok(())
}

struct Bowl;

impl Objective for Bowl {
    fn value(&self, u: &[f64], rho: &[f64]) -> f64 {
        u.iter().map(|a| (a - 0.25).powi(2)).sum::<f64>() + rho.iter().map(|r| (r - 0.5).powi(2)).sum::<f64>()
    }
    fn gradient(&self, u: &[f64], rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (u.iter().map(|a| 2.0 * (a - 0.25)).collect(), rho.iter().map(|r| 2.0 * (r - 0.5)).collect())
    }
}

fn descent_sanity() -> Result<(), String> {
    let g = line(4, 1.0)?;
    let d = ok(minimize_objective(&Bowl, &g, &[0.9; 4], &[0.0; 4], &ConstraintSet::default(), &MinimizeOptions::default()))?;
    ensure!(d.u.iter().chain(&d.rho).zip([0.25; 4].iter().chain(&[0.5; 4])).all(|(a, b)| close(*a, *b, 1e-6)), "bowl minimizer");

    let g = line(16, 1.0)?;
    let k = ok(sample_kernel(&KernelSpec::gaussian(0.25), &g, 0.5))?;
    let one = ok(ScalarField::constant(&g, 1.0, FieldKind::OrderParameter))?;
    let rho0 = ok(ScalarField::constant(&g, 0.0, FieldKind::Density))?;
    let p = EnergyParams::smoothed(0.5, 1e-2, DomainMode::Interior);
    let r = ok(minimize(&one, &rho0, &k, &Potential::QuarticDoubleWell, &p, &ConstraintSet::default(), &MinimizeOptions::default()))?;
    ensure!(r.energy.total == 0.0, "pure phase drifted to {}", r.energy.total);
    Ok(())
}

fn strip_geometry() -> Result<(), String> {
    let mut cp = CellProblem::new(1, KernelSpec::gaussian(0.5), 0.0);
    cp.clamp_width = Some(2.0);
    let s = ok(build_strip(&cp))?;
    let frozen = s.constraints.frozen.as_ref().unwrap();
    for (t, f) in s.t.iter().zip(frozen) {
        let want = if *t >= 8.0 {
            Some(1.0)
        } else if *t <= -8.0 {
            Some(-1.0)
        } else {
            None
        };
        ensure!(*f == want, "cell at t = {t}: {f:?}");
    }
    let cp2 = CellProblem::new(2, KernelSpec::gaussian(0.5), 0.0);
    let s2 = ok(build_strip(&cp2))?;
    ensure!(s2.grid.boundary()[0] == BoundaryMode::Periodic && s2.grid.extents()[0] == 1.0, "lateral axis");
    let mut short = CellProblem::new(1, KernelSpec::gaussian(1.0), 0.0);
    short.half_length = 3.0;
    ensure!(build_strip(&short).is_err(), "short strip accepted");
    Ok(())
}

fn small_cell() -> CellProblem {
    let mut cp = CellProblem::new(1, KernelSpec::gaussian(0.5), 0.0);
    cp.half_length = 6.0;
    cp.resolution = 8.0;
    cp.starts = 1;
    cp
}

fn cell_reflection_and_single_entry_table() -> Result<(), String> {
    let cp = small_cell();
    let a = ok(solve_cell(&cp))?;
    let b = ok(solve_cell(&cp.clone().with_angle(PI)))?;
    ensure!(close(a.sigma, b.sigma, 1e-6), "σ(e) {} vs σ(−e) {}", a.sigma, b.sigma);
    let t = ok(sigma_table(&[0.0], &[0.0], &cp))?;
    ensure!(t.sigma(0, 0) == a.sigma, "table {} vs solve {}", t.sigma(0, 0), a.sigma);
    Ok(())
}

fn entry(s: f64) -> TableEntry {
    TableEntry { sigma: s, raw_sigma: s, valid: true, spread: 0.0, converged: true, error: None }
}

fn lookup_rules() -> Result<(), String> {
    let t = ok(SurfaceTensionTable::new(1, vec![0.0, PI], vec![0.0, 1.0], vec![vec![entry(2.0), entry(1.0)]; 2]))?;
    ensure!(ok(sigma_lookup(&t, [1.0, 0.0], 1.0))? == 1.0, "node value");
    ensure!(ok(sigma_lookup(&t, [1.0, 0.0], 0.5))? == 1.5, "midpoint");
    ensure!(ok(sigma_lookup(&t, [-1.0, 0.0], 7.0))? == 1.0, "clamp above");
    Ok(())
}

fn sharp_sums() -> Result<(), String> {
    let t = ok(SurfaceTensionTable::new(
        2,
        vec![0.0, 0.5 * PI, PI, 1.5 * PI],
        vec![0.0],
        vec![vec![entry(3.0)]; 4],
    ))?;
    let empty = ok(PolyhedralPhase::new(2, vec![], vec![]))?;
    ensure!(ok(limit_energy(&empty, &t))?.total == 0.0, "empty phase");
    let a = Facet::new([0.0, 1.0], 2.0, 0.0);
    let b = Facet::new([1.0, 0.0], 0.5, 0.0).at([5.0, 0.0]);
    let one = ok(PolyhedralPhase::new(2, vec![a.clone()], vec![]))?;
    ensure!(ok(limit_energy(&one, &t))?.total == 6.0, "single facet");
    let two = ok(PolyhedralPhase::new(2, vec![a, b], vec![]))?;
    ensure!(ok(limit_energy(&two, &t))?.total == 7.5, "two facets");
    let f = [Facet::new([0.0, 1.0], 1.0, 0.0), Facet::new([0.0, 1.0], 1.0, 0.0), Facet::new([0.0, 1.0], 1.5, 0.0)];
    let g: Vec<f64> = ok(facet_density_from_measure(&f, &[2.0, 0.0, 3.0]))?.iter().map(|f| f.gamma).collect();
    ensure!(g == vec![2.0, 0.0, 2.0], "densities {g:?}");
    Ok(())
}

fn degenerate_recovery() -> Result<(), String> {
    let cp = CellProblem::new(1, KernelSpec::gaussian(1.0), 0.0);
    let profile = ok(CellProfile::sharp_step(cp))?;
    let rc = RecoveryConfig {
        facet: Facet::new([1.0, 0.0], 1.0, 0.0),
        profile,
        epsilons: vec![0.25],
        diracs: vec![],
        domain: RecoveryDomain { lateral: None, lateral_periodic: false, longitudinal: [-1.0, 1.0], mode: DomainMode::Interior },
    };
    let (u, rho) = ok(recovery_fields(&rc, 0.25))?;
    for c in 0..u.grid().len() {
        let x = u.grid().center(c)[0];
        ensure!(u.values()[c] == x.signum(), "u({x}) = {}", u.values()[c]);
    }
    ensure!(rho.values().iter().all(|v| *v == 0.0), "ρ not identically 0");
    let mut bad = rc.clone();
    bad.domain.longitudinal = [0.5, 0.5];
    ensure!(recovery_fields(&bad, 0.25).is_err(), "zero-length domain accepted");
    Ok(())
}

fn constant_diagnostics() -> Result<(), String> {
    let g = line(16, 1.0)?;
    let one = ok(ScalarField::constant(&g, 1.0, FieldKind::OrderParameter))?;
    ensure!(total_variation(&one) == 0.0, "tv of a constant");
    let k = ok(sample_kernel(&KernelSpec::gaussian(0.25), &g, 0.5))?;
    let rho = ok(ScalarField::constant(&g, 0.5, FieldKind::Density))?;
    let p = EnergyParams::smoothed(0.5, 1e-2, DomainMode::Interior);
    let c = ConstraintSet::with_mass(0.5, MassMode::Exactly);
    let r = ok(minimize(&one, &rho, &k, &Potential::QuarticDoubleWell, &p, &c, &MinimizeOptions { max_iters: 10, ..Default::default() }))?;
    let rows = ok(compactness_diagnostic(&[(0.5, r)]))?;
    ensure!(rows[0].tv_u == 0.0 && close(rows[0].rho_mass, 0.5, 1e-12), "{:?}", rows[0]);

    let zero = ok(ScalarField::constant(&g, 0.0, FieldKind::Density))?;
    let target = ok(PolyhedralPhase::new(1, vec![], vec![DiracMass { location: [0.5, 0.0], mass: 1.0 }]))?;
    let gap = ok(weak_star_pairing(&zero, &target))?;
    ensure!(gap > 0.0, "pairing gap {gap}");
    Ok(())
}

pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("grid arithmetic", grid_arithmetic as Check),
        ("tophat stencil", tophat_stencil),
        ("kernel support scales with ε", support_scales_with_epsilon),
        ("kernel moments", moments_of_explicit_stencils),
        ("smoothed absolute value", smoothed_abs_values),
        ("constant states", constant_states),
        ("projections", projections),
        ("descent sanity", descent_sanity),
        ("strip geometry", strip_geometry),
        ("cell reflection and single-entry table", cell_reflection_and_single_entry_table),
        ("table lookup rules", lookup_rules),
        ("sharp energy sums", sharp_sums),
        ("degenerate recovery", degenerate_recovery),
        ("constant-phase diagnostics", constant_diagnostics),
    ]
}

pub fn run_selftest() -> Vec<CheckOutcome> {
    checks()
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(()) => CheckOutcome { name, passed: true, detail: String::new() },
            Err(detail) => CheckOutcome { name, passed: false, detail },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn bundled_suite_passes() {
        for c in super::run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
