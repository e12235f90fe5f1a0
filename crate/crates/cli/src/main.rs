use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlsurf::config::RunConfig;

mod commands;

use commands::{Context, Failure};

const OUT_ENV: &str = "NONLOCAL_SURFACTANT_OUT";

#[derive(Parser)]
#[command(name = "nlsurf", version = env!("NLSURF_VERSION"))]
#[command(about = "Non-local phase-field energy with surfactant: cell problems, sharp limits and recovery sequences")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.threads`; 1 gives bit-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (else `run.output_dir`, else $NONLOCAL_SURFACTANT_OUT, else ./out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides any config key, e.g. `--set cell.gamma=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the energy of the configured fields.
    #[command(alias = "eval")]
    Energy,
    /// Minimize from the configured fields under the configured constraints.
    Minimize,
    /// Strip cell problems.
    Cell {
        #[command(subcommand)]
        op: CellOp,
    },
    /// Sharp-interface energy of the configured facets.
    Sharp {
        /// σ table CSV (else `table.path`, else solved on demand).
        #[arg(long, value_name = "CSV")]
        table: Option<PathBuf>,
    },
    /// Write recovery fields for each ε.
    Recovery {
        /// Single ε instead of `scan.epsilons`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Recovery energies against the sharp target across ε.
    ScanEpsilon {
        #[arg(long, value_name = "recovery_only|minimize_each")]
        mode: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        epsilons: Option<Vec<f64>>,
        #[arg(long, value_name = "CSV")]
        table: Option<PathBuf>,
    },
    /// Compare the analytic gradient with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-6)]
        fd_step: f64,
    },
    /// Run the bundled suite of closed-form checks.
    Selftest,
}

#[derive(Subcommand)]
enum CellOp {
    /// Solve one strip problem.
    Sigma {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        angle: Option<f64>,
    },
    /// Solve a direction × γ table.
    Table {
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        angles: Option<Vec<f64>>,
        #[arg(long)]
        directions: Option<usize>,
    },
}

fn toml_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(","))
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Energy => "energy",
            Cmd::Minimize => "minimize",
            Cmd::Cell { op: CellOp::Sigma { .. } } => "cell sigma",
            Cmd::Cell { op: CellOp::Table { .. } } => "cell table",
            Cmd::Sharp { .. } => "sharp",
            Cmd::Recovery { .. } => "recovery",
            Cmd::ScanEpsilon { .. } => "scan-epsilon",
            Cmd::Gradcheck { .. } => "gradcheck",
            Cmd::Selftest => "selftest",
        }
    }

    /// Command flags expressed as config overrides.
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        let mut put = |k: &str, v: String| o.push((k.to_string(), v));
        match self {
            Cmd::Cell { op: CellOp::Sigma { gamma, angle } } => {
                if let Some(g) = gamma {
                    put("cell.gamma", format!("{g:?}"));
                }
                if let Some(a) = angle {
                    put("cell.angle", format!("{a:?}"));
                }
            }
            Cmd::Cell { op: CellOp::Table { gammas, angles, directions } } => {
                if let Some(g) = gammas {
                    put("table.gammas", toml_list(g));
                }
                if let Some(a) = angles {
                    put("table.angles", toml_list(a));
                }
                if let Some(d) = directions {
                    put("table.directions", d.to_string());
                }
            }
            Cmd::Sharp { table: Some(t) } => put("table.path", format!("{:?}", absolute(t).display().to_string())),
            Cmd::Recovery { epsilon: Some(e) } => put("scan.epsilons", toml_list(&[*e])),
            Cmd::ScanEpsilon { mode, epsilons, table } => {
                if let Some(m) = mode {
                    put("scan.mode", format!("{m:?}"));
                }
                if let Some(e) = epsilons {
                    put("scan.epsilons", toml_list(e));
                }
                if let Some(t) = table {
                    put("table.path", format!("{:?}", absolute(t).display().to_string()));
                }
            }
            _ => {}
        }
        o
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn parse_set(s: &str) -> Result<(String, String), Failure> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn output_dir(flag: Option<&PathBuf>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Some(p) = &cfg.run.output_dir {
        return cfg.resolve_path(p);
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

fn selftest() -> ExitCode {
    let results = nlsurf::selftest::run_selftest();
    let mut failed = 0;
    for r in &results {
        if r.passed {
            println!("PASS  {}", r.name);
        } else {
            failed += 1;
            println!("FAIL  {}: {}", r.name, r.detail);
        }
    }
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), Failure> {
    let path = cli
        .global
        .config
        .clone()
        .ok_or_else(|| Failure::Usage(format!("`{}` needs --config PATH", cli.cmd.name())))?;
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    let mut overrides = Vec::new();
    if let Some(s) = cli.global.seed {
        overrides.push(("run.seed".to_string(), s.to_string()));
    }
    if let Some(t) = cli.global.threads {
        overrides.push(("run.threads".to_string(), t.to_string()));
    }
    for s in &cli.global.set {
        overrides.push(parse_set(s)?);
    }
    overrides.extend(cli.cmd.overrides());
    let mut cfg = RunConfig::load(&path, &overrides)?;
    let out = output_dir(cli.global.out.as_ref(), &cfg);
    commands::absolutize_paths(&mut cfg);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| Failure::Domain(format!("thread pool: {e}")))?;
    let mut ctx = Context::new(out, &cfg)?;
    pool.install(|| match &cli.cmd {
        Cmd::Energy => commands::energy(&mut ctx, &cfg),
        Cmd::Minimize => commands::minimize(&mut ctx, &cfg),
        Cmd::Cell { op: CellOp::Sigma { .. } } => commands::cell_sigma(&mut ctx, &cfg),
        Cmd::Cell { op: CellOp::Table { .. } } => commands::cell_table(&mut ctx, &cfg),
        Cmd::Sharp { .. } => commands::sharp(&mut ctx, &cfg),
        Cmd::Recovery { .. } => commands::recovery(&mut ctx, &cfg),
        Cmd::ScanEpsilon { .. } => commands::scan_epsilon(&mut ctx, &cfg),
        Cmd::Gradcheck { fd_step } => commands::gradcheck(&mut ctx, &cfg, *fd_step),
        Cmd::Selftest => unreachable!(),
    })?;
    ctx.finish(cli.cmd.name(), &argv, &cfg, env!("NLSURF_VERSION"))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if matches!(cli.cmd, Cmd::Selftest) {
        return selftest();
    }
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
