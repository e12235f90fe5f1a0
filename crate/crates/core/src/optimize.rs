//! Projected gradient descent on `(u, ρ)` under the box constraint `u ∈ [−1, 1]`,
//! optional frozen cells, `ρ ≥ 0`, and an optional total-mass constraint.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_unchecked, gradient_unchecked, EnergyBreakdown, EnergyParams};
use crate::error::{invalid_param, Error, Result};
use crate::fields::{DiscreteKernel, FieldKind, Grid, Potential, ScalarField};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
const WATER_FILL_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    AtMost,
    Exactly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassConstraint {
    pub target: f64,
    pub mode: MassMode,
}

/// Feasible set for `(u, ρ)`. `u ∈ [−1, 1]` and `ρ ≥ 0` always apply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    /// Per-cell frozen values of `u` (`None` = free).
    pub frozen: Option<Vec<Option<f64>>>,
    pub mass: Option<MassConstraint>,
}

impl ConstraintSet {
    pub fn with_mass(target: f64, mode: MassMode) -> Self {
        ConstraintSet { frozen: None, mass: Some(MassConstraint { target, mode }) }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if let Some(mask) = &self.frozen {
            if mask.len() != grid.len() {
                return Err(Error::InvalidConstraint(format!(
                    "frozen mask has {} entries for {} cells",
                    mask.len(),
                    grid.len()
                )));
            }
            if mask.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::InvalidConstraint("frozen values must lie in [-1, 1]".into()));
            }
        }
        if let Some(m) = &self.mass {
            if !(m.target.is_finite() && m.target >= 0.0) {
                return Err(Error::InvalidConstraint(format!("mass target must be ≥ 0, got {}", m.target)));
            }
        }
        Ok(())
    }

    fn is_frozen(&self, i: usize) -> bool {
        self.frozen.as_ref().is_some_and(|m| m[i].is_some())
    }
}

fn project_box_in_place(u: &mut [f64], c: &ConstraintSet) {
    for v in u.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    if let Some(mask) = &c.frozen {
        for (v, f) in u.iter_mut().zip(mask) {
            if let Some(x) = f {
                *v = *x;
            }
        }
    }
}

/// Euclidean projection onto `{ρ ≥ 0, Σρ·vol = M}` by water-filling:
/// `ρ' = max(ρ − λ, 0)`, `λ` bisected and then solved exactly on its active set.
fn project_mass_exact(rho: &mut [f64], vol: f64, target: f64) {
    let n = rho.len();
    if n == 0 {
        return;
    }
    let per_cell = target / vol;
    let mass_at = |lam: f64| rho.iter().map(|r| (r - lam).max(0.0)).sum::<f64>();
    let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if per_cell == 0.0 {
        rho.iter_mut().for_each(|r| *r = 0.0);
        return;
    }
    let (mut lo, mut hi) = (min - per_cell / n as f64, max);
    for _ in 0..WATER_FILL_ITERS {
        let mid = 0.5 * (lo + hi);
        if mass_at(mid) > per_cell {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lam = 0.5 * (lo + hi);
    // exact λ on the active set found by bisection
    let (mut sum, mut count) = (0.0, 0usize);
    for r in rho.iter() {
        if *r > lam {
            sum += r;
            count += 1;
        }
    }
    if count > 0 {
        let exact = (sum - per_cell) / count as f64;
        let consistent = rho.iter().all(|r| (*r > lam) == (*r > exact) || (r - exact).abs() < 1e-15);
        if consistent {
            lam = exact;
        }
    }
    for r in rho.iter_mut() {
        *r = (*r - lam).max(0.0);
    }
}

fn project_density_in_place(rho: &mut [f64], vol: f64, c: &ConstraintSet) {
    match c.mass {
        None => {
            for r in rho.iter_mut() {
                *r = r.max(0.0);
            }
        }
        Some(MassConstraint { target, mode: MassMode::AtMost }) => {
            for r in rho.iter_mut() {
                *r = r.max(0.0);
            }
            let mass: f64 = rho.iter().sum::<f64>() * vol;
            if mass > target {
                project_mass_exact(rho, vol, target);
            }
        }
        Some(MassConstraint { target, mode: MassMode::Exactly }) => project_mass_exact(rho, vol, target),
    }
}

/// Clamps `u` to `[−1, 1]` and restores frozen cells.
pub fn project_box(u: &ScalarField, c: &ConstraintSet) -> Result<ScalarField> {
    c.validate(u.grid())?;
    let mut v = u.values().to_vec();
    project_box_in_place(&mut v, c);
    ScalarField::new(u.grid().clone(), v, u.kind())
}

/// Projects `ρ` onto the nonnegative densities satisfying the mass constraint of `c`.
pub fn project_density(rho: &ScalarField, c: &ConstraintSet) -> Result<ScalarField> {
    c.validate(rho.grid())?;
    let mut v = rho.values().to_vec();
    project_density_in_place(&mut v, rho.grid().cell_volume(), c);
    ScalarField::new(rho.grid().clone(), v, FieldKind::Density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub tol: f64,
    /// First trial step; later trials use the Barzilai–Borwein step.
    pub step0: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iters: 5000, tol: 1e-6, step0: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

/// A smooth objective in `(u, ρ)` with its Euclidean gradient.
pub trait Objective: Sync {
    fn value(&self, u: &[f64], rho: &[f64]) -> f64;
    fn gradient(&self, u: &[f64], rho: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// The discrete energy as an [`Objective`].
pub struct EnergyObjective<'a> {
    pub grid: &'a Grid,
    pub kernel: &'a DiscreteKernel,
    pub potential: &'a Potential,
    pub params: EnergyParams,
}

impl Objective for EnergyObjective<'_> {
    fn value(&self, u: &[f64], rho: &[f64]) -> f64 {
        energy_unchecked(self.grid, u, rho, self.kernel, self.potential, &self.params).total
    }

    fn gradient(&self, u: &[f64], rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        gradient_unchecked(self.grid, u, rho, self.kernel, self.potential, &self.params)
    }
}

/// Raw output of [`minimize_objective`].
#[derive(Debug, Clone)]
pub struct Descent {
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub stop: StopReason,
    pub trace: Vec<TraceRow>,
}

fn projected_gradient_norm(
    u: &[f64],
    rho: &[f64],
    gu: &[f64],
    grho: &[f64],
    vol: f64,
    c: &ConstraintSet,
) -> f64 {
    let mut tu: Vec<f64> = u.iter().zip(gu).map(|(x, g)| x - g / vol).collect();
    let mut tr: Vec<f64> = rho.iter().zip(grho).map(|(x, g)| x - g / vol).collect();
    project_box_in_place(&mut tu, c);
    project_density_in_place(&mut tr, vol, c);
    let a = u.iter().zip(&tu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let b = rho.iter().zip(&tr).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    a.max(b)
}

/// Projected gradient descent with Armijo backtracking along the projection arc.
///
/// Steps are taken in the cell-volume-weighted metric (`x ← P(x − τ g / vol)`),
/// which makes step sizes independent of the grid resolution.
pub fn minimize_objective(
    obj: &dyn Objective,
    grid: &Grid,
    u0: &[f64],
    rho0: &[f64],
    c: &ConstraintSet,
    opts: &MinimizeOptions,
) -> Result<Descent> {
    c.validate(grid)?;
    if u0.len() != grid.len() || rho0.len() != grid.len() {
        return Err(Error::GridMismatch("initial fields do not match the grid".into()));
    }
    if !(opts.step0.is_finite() && opts.step0 > 0.0) {
        return Err(invalid_param("step0", "must be positive"));
    }
    if !(opts.tol.is_finite() && opts.tol >= 0.0) {
        return Err(invalid_param("tol", "must be nonnegative"));
    }
    let vol = grid.cell_volume();
    let mut u = u0.to_vec();
    let mut rho = rho0.to_vec();
    project_box_in_place(&mut u, c);
    project_density_in_place(&mut rho, vol, c);

    let mut f = obj.value(&u, &rho);
    let (mut gu, mut grho) = obj.gradient(&u, &rho);
    if !f.is_finite() {
        return Err(Error::Optimizer("objective is not finite at the initial point".into()));
    }
    let mut step = opts.step0;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut pg = projected_gradient_norm(&u, &rho, &gu, &grho, vol, c);
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        if pg <= opts.tol {
            stop = StopReason::Converged;
            break;
        }
        let mut tau = step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut nu: Vec<f64> = u.iter().zip(&gu).map(|(x, g)| x - tau * g / vol).collect();
            let mut nr: Vec<f64> = rho.iter().zip(&grho).map(|(x, g)| x - tau * g / vol).collect();
            project_box_in_place(&mut nu, c);
            project_density_in_place(&mut nr, vol, c);
            let dot: f64 = nu.iter().zip(&u).zip(&gu).map(|((a, b), g)| g * (a - b)).sum::<f64>()
                + nr.iter().zip(&rho).zip(&grho).map(|((a, b), g)| g * (a - b)).sum::<f64>();
            if dot < 0.0 {
                let fnew = obj.value(&nu, &nr);
                if fnew.is_finite() && fnew <= f + ARMIJO_C * dot {
                    accepted = Some((nu, nr, fnew));
                    break;
                }
            }
            tau *= SHRINK;
        }
        let Some((nu, nr, fnew)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        let (ngu, ngrho) = obj.gradient(&nu, &nr);

        // Barzilai–Borwein step in the weighted metric
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..u.len() {
            if c.is_frozen(i) {
                continue;
            }
            let s = nu[i] - u[i];
            ss += s * s;
            sy += s * (ngu[i] - gu[i]) / vol;
        }
        for i in 0..rho.len() {
            let s = nr[i] - rho[i];
            ss += s * s;
            sy += s * (ngrho[i] - grho[i]) / vol;
        }
        step = if sy > 0.0 { ss / sy } else { 2.0 * tau };
        step = step.clamp(1e-10, 1e10);

        u = nu;
        rho = nr;
        f = fnew;
        gu = ngu;
        grho = ngrho;
        pg = projected_gradient_norm(&u, &rho, &gu, &grho, vol, c);
        iterations = iter + 1;
        trace.push(TraceRow { iter: iterations, energy: f, grad_norm: pg, step: tau });
    }
    if stop == StopReason::MaxIterations && pg <= opts.tol {
        stop = StopReason::Converged;
    }
    Ok(Descent { u, rho, value: f, iterations, gradient_norm: pg, stop, trace })
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub u: ScalarField,
    pub rho: ScalarField,
    /// Breakdown at the returned point, evaluated with the same smoothing as the descent.
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub stop: StopReason,
    pub trace: Vec<TraceRow>,
}

/// Minimizes the smoothed discrete energy from `(u0, ρ0)` over the constraint set.
///
/// A failed line search is not an error: the last accepted iterate is returned
/// with `converged = false` and `stop = LineSearchFailed`.
pub fn minimize(
    u0: &ScalarField,
    rho0: &ScalarField,
    k: &DiscreteKernel,
    w: &Potential,
    p: &EnergyParams,
    c: &ConstraintSet,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    if p.smoothing <= 0.0 {
        return Err(invalid_param("smoothing", "minimization requires a positive smoothing parameter"));
    }
    crate::energy::total_energy(u0, &project_density(rho0, c)?, k, w, p)?;
    let grid = u0.grid();
    let obj = EnergyObjective { grid, kernel: k, potential: w, params: *p };
    let d = minimize_objective(&obj, grid, u0.values(), rho0.values(), c, opts)?;
    let u = ScalarField::new(grid.clone(), d.u, FieldKind::OrderParameter)?;
    let rho = ScalarField::new(grid.clone(), d.rho, FieldKind::Density)?;
    let energy = crate::energy::total_energy(&u, &rho, k, w, p)?;
    Ok(MinimizeResult {
        u,
        rho,
        energy,
        iterations: d.iterations,
        converged: d.stop == StopReason::Converged,
        gradient_norm: d.gradient_norm,
        stop: d.stop,
        trace: d.trace,
    })
}

/// Largest discrepancy between the analytic gradient and central differences
/// on a seeded sample of at least 64 coordinates (all of them when fewer exist).
///
/// Each coordinate's error is relative to `max(|analytic|, |fd|, 1e-3·‖analytic‖∞)`.
/// When the analytic gradient vanishes identically the error is absolute.
pub fn grad_check(
    u: &ScalarField,
    rho: &ScalarField,
    k: &DiscreteKernel,
    w: &Potential,
    p: &EnergyParams,
    fd_step: f64,
    seed: u64,
) -> Result<f64> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(invalid_param("fd_step", "must be positive"));
    }
    let (gu, grho) = crate::energy::energy_gradient(u, rho, k, w, p)?;
    let grid = u.grid();
    let n = grid.len();
    let analytic: Vec<f64> = gu.values().iter().chain(grho.values()).cloned().collect();
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<usize> = if 2 * n <= 64 {
        (0..2 * n).collect()
    } else {
        let mut v = sample(&mut rng, 2 * n, 64).into_vec();
        v.sort_unstable();
        v
    };

    let mut uv = u.values().to_vec();
    let mut rv = rho.values().to_vec();
    let mut worst = 0.0f64;
    for c in coords {
        let eval = |uv: &[f64], rv: &[f64]| energy_unchecked(grid, uv, rv, k, w, p).total;
        let (plus, minus) = if c < n {
            let orig = uv[c];
            uv[c] = orig + fd_step;
            let a = eval(&uv, &rv);
            uv[c] = orig - fd_step;
            let b = eval(&uv, &rv);
            uv[c] = orig;
            (a, b)
        } else {
            let i = c - n;
            let orig = rv[i];
            rv[i] = orig + fd_step;
            let a = eval(&uv, &rv);
            rv[i] = orig - fd_step;
            let b = eval(&uv, &rv);
            rv[i] = orig;
            (a, b)
        };
        let fd = (plus - minus) / (2.0 * fd_step);
        let err = (fd - analytic[c]).abs();
        let rel = if scale == 0.0 {
            err
        } else {
            err / analytic[c].abs().max(fd.abs()).max(1e-3 * scale)
        };
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_grid, BoundaryMode};

    fn grid(n: usize, extent: f64) -> Grid {
        make_grid(1, &[extent], &[n], &[BoundaryMode::Open]).unwrap()
    }

    #[test]
    fn box_projection() {
        let g = grid(4, 4.0);
        let u = ScalarField::new(g.clone(), vec![0.5, 1.7, -3.0, -0.2], FieldKind::OrderParameter).unwrap();
        let c = ConstraintSet::default();
        assert_eq!(project_box(&u, &c).unwrap().values(), &[0.5, 1.0, -1.0, -0.2]);
        let inside = ScalarField::new(g.clone(), vec![0.5, 0.1, -1.0, 1.0], FieldKind::OrderParameter).unwrap();
        assert_eq!(project_box(&inside, &c).unwrap(), inside);
        let frozen = ConstraintSet { frozen: Some(vec![Some(-1.0), None, None, Some(1.0)]), mass: None };
        assert_eq!(project_box(&u, &frozen).unwrap().values(), &[-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn density_projection_examples() {
        let g = grid(2, 2.0);
        let c = ConstraintSet::with_mass(2.0, MassMode::Exactly);
        let p = |v: Vec<f64>| {
            let f = ScalarField::new(g.clone(), v, FieldKind::OrderParameter).unwrap();
            project_density(&f, &c).unwrap().into_values()
        };
        assert_eq!(p(vec![1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(p(vec![3.0, 1.0]), vec![2.0, 0.0]);
        assert_eq!(p(vec![0.0, 0.0]), vec![1.0, 1.0]);
        let at_most = ConstraintSet::with_mass(2.0, MassMode::AtMost);
        let f = ScalarField::new(g.clone(), vec![0.5, 0.25], FieldKind::Density).unwrap();
        assert_eq!(project_density(&f, &at_most).unwrap(), f);
        let neg = ScalarField::new(g.clone(), vec![0.5, 0.25], FieldKind::Density).unwrap();
        assert!(project_density(&neg, &ConstraintSet::with_mass(-1.0, MassMode::Exactly)).is_err());
    }

    struct Quadratic {
        target_u: Vec<f64>,
        target_rho: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, u: &[f64], rho: &[f64]) -> f64 {
            u.iter().zip(&self.target_u).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                + rho.iter().zip(&self.target_rho).map(|(a, b)| 2.0 * (a - b).powi(2)).sum::<f64>()
        }
        fn gradient(&self, u: &[f64], rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
            (
                u.iter().zip(&self.target_u).map(|(a, b)| 2.0 * (a - b)).collect(),
                rho.iter().zip(&self.target_rho).map(|(a, b)| 4.0 * (a - b)).collect(),
            )
        }
    }

    #[test]
    fn quadratic_harness_reaches_constrained_minimizer() {
        let g = grid(4, 4.0);
        let obj = Quadratic { target_u: vec![0.3, 2.0, -5.0, 0.0], target_rho: vec![1.0, 3.0, -1.0, 0.0] };
        let c = ConstraintSet::with_mass(2.0, MassMode::Exactly);
        let d = minimize_objective(&obj, &g, &[0.0; 4], &[0.5; 4], &c, &MinimizeOptions::default()).unwrap();
        assert_eq!(d.stop, StopReason::Converged);
        let expect_u = [0.3, 1.0, -1.0, 0.0];
        // water-filling of (1, 3, -1, 0) to mass 2: λ = 1 gives (0, 2, 0, 0)
        let expect_rho = [0.0, 2.0, 0.0, 0.0];
        for (a, b) in d.u.iter().zip(expect_u) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (a, b) in d.rho.iter().zip(expect_rho) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(d.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
    }
}
