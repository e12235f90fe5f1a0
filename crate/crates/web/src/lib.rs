//! Three demo operations on 1D strips, cheap enough to run on the page's
//! main thread: a minimizing interface profile, `σ(γ)` and recovery ratios.

use nlsurf::cell::{solve_cell, CellProblem, SurfaceTensionTable, TableEntry};
use nlsurf::energy::DomainMode;
use nlsurf::fields::KernelSpec;
use nlsurf::gamma::{epsilon_scan, CellProfile, RecoveryConfig, RecoveryDomain, ScanOptions};
use nlsurf::optimize::MinimizeOptions;
use nlsurf::sharp::{DiracMass, Facet};
use wasm_bindgen::prelude::*;

fn strip(width: f64, gamma: f64) -> CellProblem {
    let mut cp = CellProblem::new(1, KernelSpec::gaussian(width), gamma);
    cp.resolution = 16.0;
    cp.half_length = (4.0 * width + 1.0).max(1.5) * 2.0;
    cp.starts = 1;
    cp.options = MinimizeOptions { max_iters: 3000, ..Default::default() };
    cp
}

/// Minimizing profile of one strip problem.
#[wasm_bindgen]
pub struct Profile {
    sigma: f64,
    t: Vec<f64>,
    u: Vec<f64>,
    rho: Vec<f64>,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.rho.clone()
    }
}

pub fn solve_profile(width: f64, gamma: f64) -> nlsurf::Result<Profile> {
    let cp = strip(width, gamma);
    let sol = solve_cell(&cp)?;
    let g = sol.u_star.grid();
    Ok(Profile {
        sigma: sol.sigma,
        t: (0..g.len()).map(|c| g.center(c)[0]).collect(),
        u: sol.u_star.values().to_vec(),
        rho: sol.rho_star.values().to_vec(),
    })
}

pub fn sigma_values(width: f64, gammas: &[f64]) -> nlsurf::Result<Vec<f64>> {
    gammas.iter().map(|g| solve_cell(&strip(width, *g)).map(|s| s.sigma)).collect()
}

/// Diffuse/sharp ratio of the recovery energy for each `ε`, on `[-4, 4]` with the
/// interface at 0 and a point mass `dirac` at 3 (none if zero).
pub fn recovery_ratios(width: f64, gamma: f64, dirac: f64, epsilons: &[f64]) -> nlsurf::Result<Vec<f64>> {
    let cp = strip(width, gamma);
    let sol = solve_cell(&cp)?;
    let entry = TableEntry {
        sigma: sol.sigma,
        raw_sigma: sol.sigma,
        valid: true,
        spread: sol.spread,
        converged: sol.converged,
        error: None,
    };
    let table = SurfaceTensionTable::new(1, vec![0.0], vec![gamma], vec![vec![entry]])?;
    let rc = RecoveryConfig {
        facet: Facet::new([1.0, 0.0], 1.0, gamma),
        profile: CellProfile::from_solution(&cp, &sol)?,
        epsilons: epsilons.to_vec(),
        diracs: if dirac > 0.0 { vec![DiracMass { location: [3.0, 0.0], mass: dirac }] } else { vec![] },
        domain: RecoveryDomain { lateral: None, lateral_periodic: false, longitudinal: [-4.0, 4.0], mode: DomainMode::Interior },
    };
    let report = epsilon_scan(&rc, &table, &ScanOptions::default())?;
    Ok(report.rows.iter().map(|r| r.ratio).collect())
}

fn js(e: nlsurf::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = cellProfile)]
pub fn cell_profile(width: f64, gamma: f64) -> Result<Profile, JsError> {
    solve_profile(width, gamma).map_err(js)
}

#[wasm_bindgen(js_name = sigmaCurve)]
pub fn sigma_curve(width: f64, gammas: Vec<f64>) -> Result<Vec<f64>, JsError> {
    sigma_values(width, &gammas).map_err(js)
}

#[wasm_bindgen(js_name = recoveryRatios)]
pub fn recovery_ratio_curve(width: f64, gamma: f64, dirac: f64, epsilons: Vec<f64>) -> Result<Vec<f64>, JsError> {
    recovery_ratios(width, gamma, dirac, &epsilons).map_err(js)
}
