use std::fs;
use std::path::PathBuf;

use nlsurf::cell::{angle_of, sigma_table, solve_cell, CellProblem, CellSolution, SurfaceTensionTable, TableEntry};
use nlsurf::config::{FieldSource, RunConfig};
use nlsurf::energy::{inhomogeneity, total_energy, DEFAULT_SMOOTHING};
use nlsurf::fields::{sample_kernel, ScalarField};
use nlsurf::gamma::{
    dirac_contribution, epsilon_scan, recovery_energy, recovery_fields_with, total_variation, CellProfile,
    ScanMode,
};
use nlsurf::io;
use nlsurf::optimize::{self, grad_check};
use nlsurf::sharp::limit_energy;
use serde::Serialize;
use serde_json::json;

pub enum Failure {
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Domain(String),
}

impl From<nlsurf::Error> for Failure {
    fn from(e: nlsurf::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Output directory bookkeeping for one run.
pub struct Context {
    dir: PathBuf,
    digits: usize,
    outputs: Vec<String>,
    summary: serde_json::Value,
}

impl Context {
    pub fn new(dir: PathBuf, cfg: &RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| Failure::Domain(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Context { dir, digits: cfg.run.precision, outputs: Vec::new(), summary: json!({}) })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome {
        let p = self.path(name);
        io::write_json(&p, value)?;
        Ok(())
    }

    fn field(&mut self, name: &str, f: &ScalarField) -> Outcome {
        let p = self.path(name);
        io::write_field_csv(&p, f, self.digits)?;
        Ok(())
    }

    fn table(&mut self, t: &SurfaceTensionTable) -> Outcome {
        let p = self.path("sigma_table.csv");
        io::write_sigma_table_csv(&p, t, self.digits)?;
        self.json("sigma_table.json", t)
    }

    pub fn finish(mut self, command: &str, argv: &[String], cfg: &RunConfig, version: &str) -> Outcome {
        let resolved = cfg.to_toml();
        let cfg_path = self.path("config.toml");
        fs::write(&cfg_path, &resolved).map_err(|e| Failure::Domain(e.to_string()))?;
        let manifest = json!({
            "tool": "nlsurf",
            "version": version,
            "command": command,
            "argv": argv,
            "rerun": format!("nlsurf {command} --config config.toml"),
            "config": cfg,
            "outputs": self.outputs,
            "summary": self.summary,
        });
        io::write_json(&self.dir.join("manifest.json"), &manifest)?;
        println!("{}", serde_json::to_string_pretty(&self.summary).unwrap());
        Ok(())
    }
}

/// Makes every path in the config absolute so the stored copy re-runs from anywhere.
pub fn absolutize_paths(cfg: &mut RunConfig) {
    let base = cfg.clone();
    if let Some(f) = &mut cfg.fields {
        for src in [&mut f.u, &mut f.rho] {
            if let FieldSource::Csv { path } | FieldSource::Binary { path } = src {
                *path = base.resolve_path(path);
            }
        }
    }
    if let Some(t) = &mut cfg.table {
        if let Some(p) = &mut t.path {
            *p = base.resolve_path(p);
        }
    }
    if let Some(p) = &mut cfg.run.output_dir {
        *p = base.resolve_path(p);
    }
}

pub fn energy(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let grid = cfg.grid()?;
    let p = cfg.energy_params(0.0)?;
    let (u, rho) = cfg.initial_fields(&grid, p.epsilon)?;
    let k = sample_kernel(&cfg.kernel()?, &grid, p.epsilon)?;
    let e = total_energy(&u, &rho, &k, &cfg.potential(), &p)?;
    ctx.summary = json!({ "params": p, "energy": e, "kernel_m0": k.m0(), "kernel_m1": k.m1() });
    let s = ctx.summary.clone();
    ctx.json("energy.json", &s)?;
    ctx.field("inhomogeneity.csv", &inhomogeneity(&u, &k, &p)?)
}

pub fn minimize(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let grid = cfg.grid()?;
    let p = cfg.energy_params(DEFAULT_SMOOTHING)?;
    let (u0, rho0) = cfg.initial_fields(&grid, p.epsilon)?;
    let c = cfg.constraints(&u0)?;
    let k = sample_kernel(&cfg.kernel()?, &grid, p.epsilon)?;
    let w = cfg.potential();
    let r = optimize::minimize(&u0, &rho0, &k, &w, &p, &c, &cfg.optimize())?;
    let exact = total_energy(&r.u, &r.rho, &k, &w, &p.with_smoothing(0.0))?;
    ctx.summary = json!({
        "params": p,
        "energy": r.energy,
        "exact_energy": exact,
        "iterations": r.iterations,
        "converged": r.converged,
        "stop": r.stop,
        "gradient_norm": r.gradient_norm,
        "rho_mass": r.rho.integral(),
    });
    let s = ctx.summary.clone();
    ctx.json("result.json", &s)?;
    let t = ctx.path("trace.csv");
    io::write_trace_csv(&t, &r.trace, ctx.digits)?;
    ctx.field("u.csv", &r.u)?;
    ctx.field("rho.csv", &r.rho)?;
    for (name, f) in [("u.bin", &r.u), ("rho.bin", &r.rho)] {
        let p = ctx.path(name);
        io::write_field_binary(&p, f)?;
        ctx.outputs.push(format!("{name}.json"));
    }
    Ok(())
}

fn solution_summary(cp: &CellProblem, sol: &CellSolution) -> serde_json::Value {
    json!({
        "problem": cp,
        "sigma": sol.sigma,
        "energy": sol.energy,
        "smoothed_energy": sol.smoothed_energy,
        "mass_used": sol.mass_used,
        "starts": sol.starts,
        "best_start": sol.best_start,
        "spread": sol.spread,
        "spread_flagged": sol.spread_flagged,
        "converged": sol.converged,
    })
}

/// `t, u, ρ` along the strip, averaged over the lateral axis in 2D.
fn write_profile(ctx: &mut Context, sol: &CellSolution) -> Outcome {
    let g = sol.u_star.grid();
    let long = g.cells()[g.dim() - 1];
    let lateral = g.len() / long;
    let mut u = vec![0.0; long];
    let mut rho = vec![0.0; long];
    let mut t = vec![0.0; long];
    for c in 0..g.len() {
        let i = g.unravel(c)[g.dim() - 1];
        u[i] += sol.u_star.values()[c] / lateral as f64;
        rho[i] += sol.rho_star.values()[c] / lateral as f64;
        t[i] = g.center(c)[g.dim() - 1];
    }
    let p = ctx.path("profile.csv");
    let mut text = String::from("t,u,rho\n");
    for i in 0..long {
        text += &format!(
            "{},{},{}\n",
            io::format_real(t[i], ctx.digits),
            io::format_real(u[i], ctx.digits),
            io::format_real(rho[i], ctx.digits)
        );
    }
    fs::write(p, text).map_err(|e| Failure::Domain(e.to_string()))
}

pub fn cell_sigma(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let cp = cfg.cell_problem()?;
    let sol = solve_cell(&cp)?;
    if sol.spread_flagged {
        eprintln!("warning: start energies spread by {:.1}%", 100.0 * sol.spread);
    }
    ctx.summary = solution_summary(&cp, &sol);
    let s = ctx.summary.clone();
    ctx.json("cell.json", &s)?;
    write_profile(ctx, &sol)?;
    ctx.field("u.csv", &sol.u_star)?;
    ctx.field("rho.csv", &sol.rho_star)
}

pub fn cell_table(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let cp = cfg.cell_problem()?;
    let (angles, gammas) = cfg.table_axes(cp.dim)?;
    let t = sigma_table(&angles, &gammas, &cp)?;
    let invalid = t.entries.iter().flatten().filter(|e| !e.valid).count();
    if invalid > 0 {
        eprintln!("warning: {invalid} table entries are invalid");
    }
    ctx.summary = json!({ "directions": t.angles.len(), "gammas": t.gammas, "invalid": invalid });
    ctx.table(&t)
}

fn solve_for_facet(cfg: &RunConfig, normal: [f64; 2], gamma: f64) -> Result<(CellProblem, CellSolution), Failure> {
    let mut cp = cfg.cell_problem()?;
    cp.angle = angle_of(cp.dim, normal);
    cp.gamma = gamma;
    let sol = solve_cell(&cp)?;
    Ok((cp, sol))
}

/// Single-entry table at the facet's direction and load.
fn table_from_solution(cp: &CellProblem, sol: &CellSolution) -> Result<SurfaceTensionTable, Failure> {
    let e = TableEntry {
        sigma: sol.sigma,
        raw_sigma: sol.sigma,
        valid: true,
        spread: sol.spread,
        converged: sol.converged,
        error: None,
    };
    Ok(SurfaceTensionTable::new(cp.dim, vec![cp.angle], vec![cp.gamma], vec![vec![e]])?)
}

pub fn sharp(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let phase = cfg.phase()?;
    let table = match cfg.stored_table(phase.dim)? {
        Some(t) => t,
        None => {
            let cp = cfg.cell_problem()?;
            let angles: Vec<f64> = phase.facets.iter().map(|f| angle_of(phase.dim, f.normal)).collect();
            let (_, mut gammas) = cfg.table_axes(phase.dim)?;
            gammas.extend(phase.facets.iter().map(|f| f.gamma));
            gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            gammas.dedup();
            let t = sigma_table(&angles, &gammas, &cp)?;
            ctx.table(&t)?;
            t
        }
    };
    let e = limit_energy(&phase, &table)?;
    ctx.summary = json!({ "energy": e, "surfactant_mass": phase.surfactant_mass() });
    let s = ctx.summary.clone();
    ctx.json("sharp.json", &s)
}

fn facet_profile(cfg: &RunConfig) -> Result<(CellProblem, CellSolution, CellProfile), Failure> {
    let facet = cfg.recovery_facet()?;
    let (cp, sol) = solve_for_facet(cfg, facet.normal, facet.gamma)?;
    let profile = CellProfile::from_solution(&cp, &sol)?;
    Ok((cp, sol, profile))
}

pub fn recovery(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let (cp, sol, profile) = facet_profile(cfg)?;
    let rc = cfg.recovery_config(profile)?;
    let mut rows = Vec::new();
    for (n, &eps) in rc.epsilons.iter().enumerate() {
        let f = recovery_fields_with(&rc, eps, true)?;
        ctx.field(&format!("u_eps{n}.csv"), &f.u)?;
        ctx.field(&format!("rho_eps{n}.csv"), &f.rho)?;
        rows.push(json!({
            "epsilon": eps,
            "energy": recovery_energy(&rc, eps)?,
            "dirac_contribution": dirac_contribution(&rc, eps)?,
            "layer_height": f.layer_height,
            "rho_mass": f.rho.integral(),
            "tv_u": total_variation(&f.u),
            "u_file": format!("u_eps{n}.csv"),
            "rho_file": format!("rho_eps{n}.csv"),
        }));
    }
    ctx.summary = json!({ "cell": solution_summary(&cp, &sol), "rows": rows });
    let s = ctx.summary.clone();
    ctx.json("recovery.json", &s)
}

pub fn scan_epsilon(ctx: &mut Context, cfg: &RunConfig) -> Outcome {
    let (cp, sol, profile) = facet_profile(cfg)?;
    let rc = cfg.recovery_config(profile)?;
    let opts = cfg.scan_options()?;
    let table = match cfg.stored_table(cp.dim)? {
        Some(t) => t,
        None => table_from_solution(&cp, &sol)?,
    };
    ctx.table(&table)?;
    let report = epsilon_scan(&rc, &table, &opts)?;
    let p = ctx.path("scan.csv");
    io::write_scan_csv(&p, &report, ctx.digits)?;
    ctx.json("scan.json", &report)?;
    ctx.summary = json!({
        "mode": opts.mode,
        "sigma": sol.sigma,
        "ratios": report.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
        "minimized_ratios": if opts.mode == ScanMode::MinimizeEach {
            json!(report.rows.iter().filter_map(|r| r.minimized.map(|m| m.ratio)).collect::<Vec<_>>())
        } else {
            json!(null)
        },
    });
    Ok(())
}

pub fn gradcheck(ctx: &mut Context, cfg: &RunConfig, fd_step: f64) -> Outcome {
    let grid = cfg.grid()?;
    let p = cfg.energy_params(DEFAULT_SMOOTHING)?;
    let (u, rho) = cfg.initial_fields(&grid, p.epsilon)?;
    let k = sample_kernel(&cfg.kernel()?, &grid, p.epsilon)?;
    let err = grad_check(&u, &rho, &k, &cfg.potential(), &p, fd_step, cfg.run.seed)?;
    ctx.summary = json!({ "params": p, "fd_step": fd_step, "max_relative_error": err });
    let s = ctx.summary.clone();
    ctx.json("gradcheck.json", &s)
}
