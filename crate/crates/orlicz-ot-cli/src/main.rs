//! Command-line front end: solve single problems, run coupled-parameter
//! sweeps, evaluate Luxemburg norms, verify artifacts, and dump conjugate
//! tables.  One declarative config file per command plus flag overrides; no
//! prompts.
//!
//! Exit codes: 0 success, 1 config error, 2 solver non-convergence (outputs
//! are still written), 3 verification failure.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{parse_mode, ConfigError, ConfigResult, NormConfig, ProblemConfig, SweepConfig};
use orlicz_ot::experiments::{
    run_discretization_sweep, run_smoothing_sweep, validate_coupling, CouplingRule, Verdict,
};
use orlicz_ot::grid::{GridFunction, KernelSpec};
use orlicz_ot::solver::{solve_regularized, transportation_simplex, SolverConfig};
use orlicz_ot::transport::{
    assemble, marginal_residuals, validate_existence_conditions, SolveReport, TransportProblem,
};
use orlicz_ot::young::{luxemburg_norm, numeric_legendre, Regularizer, RegularizerSpec};

#[derive(Parser)]
#[command(name = "orlicz-ot", version, about = "Orlicz-regularized optimal transport on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one transport problem and write the plan CSV and report JSON.
    Solve(SolveArgs),
    /// Run a discretization or smoothing sweep over a coupled schedule.
    Sweep(SweepArgs),
    /// Evaluate the Luxemburg norm of a grid function.
    Norm(NormArgs),
    /// Check problem/plan/schedule artifacts and report PASS/FAIL per check.
    Verify(VerifyArgs),
    /// Dump (r, (ext Phi)*(r)) pairs for a regularizer.
    ConjugateTable(ConjugateTableArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem TOML file.
    #[arg(long)]
    problem: PathBuf,
    /// Plan CSV output path.
    #[arg(long, default_value = "plan.csv")]
    out: PathBuf,
    /// Report JSON output path.
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// Override the regularization weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the refinement level.
    #[arg(long)]
    level: Option<u32>,
    /// auto | generic | entropy_closed_form | exact
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tol_marginal: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep TOML file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "sweep.csv")]
    out_csv: PathBuf,
    #[arg(long, default_value = "summary.json")]
    summary: PathBuf,
}

#[derive(Args)]
struct NormArgs {
    /// Norm TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Optional JSON output.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Plan CSV to check against the problem's marginals.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Sweep TOML whose schedule should be coupling-checked.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Residual tolerance for the marginal check.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct ConjugateTableArgs {
    /// entropy | power | tsallis | custom
    #[arg(long)]
    family: String,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// CSV of `t,phi_t` rows for the custom family.
    #[arg(long)]
    density_table: Option<PathBuf>,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    r_min: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    r_max: f64,
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    #[arg(long, default_value = "conjugate.csv")]
    out: PathBuf,
    /// Also evaluate the numeric Legendre oracle per row.
    #[arg(long, default_value_t = false)]
    with_oracle: bool,
}

#[derive(Clone, Debug, Serialize)]
struct Meta {
    config_sha256: String,
    seed: u64,
    version: String,
}

impl Meta {
    fn new(config_text: &str, seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        Meta { config_sha256: hex, seed, version: env!("CARGO_PKG_VERSION").into() }
    }

    fn comment_line(&self) -> String {
        format!(
            "# config_sha256={} seed={} version={}",
            self.config_sha256, self.seed, self.version
        )
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Norm(args) => cmd_norm(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::ConjugateTable(args) => cmd_conjugate_table(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn build_problem(
    cfg: &ProblemConfig,
    base: &Path,
    gamma: f64,
    level: u32,
) -> ConfigResult<TransportProblem> {
    let template = cfg.template(base)?;
    let reg = Regularizer::from_spec(&template.regularizer)?;
    Ok(assemble(
        template.dom1,
        template.dom2,
        &template.mu1,
        &template.mu2,
        &template.lambda1,
        &template.lambda2,
        &template.cost,
        reg,
        gamma,
        level,
    )?)
}

fn write_plan_csv(path: &Path, meta: &Meta, n2: usize, values: &[f64]) -> ConfigResult<()> {
    let mut out = String::new();
    out.push_str(&meta.comment_line());
    out.push('\n');
    out.push_str("i,j,p_ij\n");
    for (k, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", k / n2, k % n2, v));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct CliSolveReport {
    meta: Meta,
    mode: String,
    primal_value: f64,
    dual_value: Option<f64>,
    gap: Option<f64>,
    marginal_residual_l1: f64,
    iterations: Option<usize>,
    converged: bool,
    plan_csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolveReport>,
}

fn cmd_solve(args: &SolveArgs) -> ConfigResult<u8> {
    let (mut cfg, text) = ProblemConfig::load(&args.problem)?;
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    if let Some(k) = args.level {
        cfg.level = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let meta = Meta::new(&text, cfg.seed);
    let base = base_dir(&args.problem);

    let mut solver_cfg = SolverConfig::default();
    if let Some(section) = &cfg.solver {
        section.apply(&mut solver_cfg);
    }
    if let Some(t) = args.tol_marginal {
        solver_cfg.tol_marginal = t;
    }
    if let Some(m) = args.max_sweeps {
        solver_cfg.max_sweeps = m;
    }
    let mode_str = args.mode.clone().or_else(|| cfg.solver.as_ref().and_then(|s| s.mode.clone()));

    let exact = mode_str.as_deref() == Some("exact");
    let prob = build_problem(&cfg, &base, cfg.gamma, cfg.level)?;

    let (report, code) = if exact {
        let lp = transportation_simplex(&prob.mu1.masses, &prob.mu2.masses, &prob.cost)?;
        let n2 = prob.n2();
        let mut density = vec![0.0; prob.n1() * n2];
        for &(i, j, mass) in &lp.plan {
            density[i * n2 + j] = mass / (prob.lambda1.masses[i] * prob.lambda2.masses[j]);
        }
        write_plan_csv(&args.out, &meta, n2, &density)?;
        let plan = GridFunction::new(prob.grid.clone(), density)?;
        let (r1, r2) = marginal_residuals(&prob, &plan);
        let report = CliSolveReport {
            meta: meta.clone(),
            mode: "exact".into(),
            primal_value: lp.value,
            dual_value: None,
            gap: None,
            marginal_residual_l1: r1 + r2,
            iterations: None,
            converged: true,
            plan_csv: args.out.display().to_string(),
            solver: None,
        };
        (report, 0)
    } else {
        if let Some(m) = &mode_str {
            solver_cfg.mode = parse_mode(m)?;
        }
        let solved = solve_regularized(&prob, &solver_cfg)?;
        write_plan_csv(&args.out, &meta, prob.n2(), &solved.plan.values)?;
        let code = if solved.converged { 0 } else { 2 };
        let mode_name = match solver_cfg.mode {
            orlicz_ot::solver::SolveMode::Auto => "auto",
            orlicz_ot::solver::SolveMode::Generic => "generic",
            orlicz_ot::solver::SolveMode::EntropyClosedForm => "entropy_closed_form",
        };
        let report = CliSolveReport {
            meta: meta.clone(),
            mode: mode_name.into(),
            primal_value: solved.primal_value,
            dual_value: Some(solved.dual_value),
            gap: Some(solved.gap),
            marginal_residual_l1: solved.marginal_residual_l1,
            iterations: Some(solved.iterations),
            converged: solved.converged,
            plan_csv: args.out.display().to_string(),
            solver: Some(solved),
        };
        (report, code)
    };
    std::fs::write(&args.report, serde_json::to_string_pretty(&report).unwrap())?;
    Ok(code)
}

#[derive(Serialize)]
struct SweepSummary {
    meta: Meta,
    rule: CouplingRule,
    coupling_verdict: Verdict,
    coupling_decrease_factor: f64,
    entries: usize,
    failed_entries: usize,
    final_gap: Option<f64>,
    csv: String,
}

fn cmd_sweep(args: &SweepArgs) -> ConfigResult<u8> {
    let (cfg, text) = SweepConfig::load(&args.config)?;
    let meta = Meta::new(&text, cfg.seed);
    let base = base_dir(&args.config);
    let schedule = cfg.schedule(&base)?;
    let (problem_cfg, _) = ProblemConfig::load(&base.join(&cfg.template))?;
    let template = problem_cfg.template(&base_dir(&base.join(&cfg.template)))?;

    let mut solver_cfg = SolverConfig::default();
    if let Some(section) = &cfg.solver {
        section.apply(&mut solver_cfg);
        if let Some(mode) = &section.mode {
            solver_cfg.mode = parse_mode(mode)?;
        }
    }

    let smoothing =
        matches!(schedule.rule, CouplingRule::SmoothStrict | CouplingRule::SmoothMonotone);
    let result = if smoothing {
        run_smoothing_sweep(&template, &schedule, &KernelSpec::Bump, &solver_cfg)?
    } else {
        run_discretization_sweep(&template, &schedule, &solver_cfg)?
    };

    let mut csv = Vec::new();
    writeln!(csv, "{}", meta.comment_line()).unwrap();
    result.write_csv(&mut csv).unwrap();
    std::fs::write(&args.out_csv, csv)?;

    let failed = result.entries.iter().filter(|e| e.error.is_some()).count();
    let summary = SweepSummary {
        meta,
        rule: result.rule,
        coupling_verdict: result.coupling_verdict,
        coupling_decrease_factor: result.coupling_decrease_factor,
        entries: result.entries.len(),
        failed_entries: failed,
        final_gap: result.entries.last().map(|e| e.gap),
        csv: args.out_csv.display().to_string(),
    };
    std::fs::write(&args.summary, serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(if failed > 0 { 2 } else { 0 })
}

#[derive(Serialize)]
struct NormReport {
    meta: Meta,
    norm: f64,
    bound: f64,
}

fn cmd_norm(args: &NormArgs) -> ConfigResult<u8> {
    let (cfg, text) = NormConfig::load(&args.config)?;
    let meta = Meta::new(&text, cfg.seed);
    let base = base_dir(&args.config);

    let partition =
        orlicz_ot::grid::GridPartition::dyadic_1d(cfg.domain.0, cfg.domain.1, cfg.level)?;
    let nu = orlicz_ot::grid::bin_measure(&cfg.measure.resolve(&base)?, &partition)?;
    let f = match &cfg.function {
        config::FunctionConfig::Constant { value } => {
            GridFunction::constant(partition.clone(), *value)?
        }
        config::FunctionConfig::Cells { file } => {
            let values = config::read_indexed_csv(&base.join(file))?;
            GridFunction::new(partition.clone(), values)?
        }
    };
    let reg = Regularizer::from_spec(&cfg.regularizer)?;
    let norm = luxemburg_norm(&reg, &f, &nu, cfg.bound)?;
    println!("{norm}");
    if let Some(path) = &args.json {
        let report = NormReport { meta, norm, bound: cfg.bound };
        std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    meta: Meta,
    checks: Vec<Check>,
    all_pass: bool,
}

fn read_plan_csv(path: &Path, n1: usize, n2: usize) -> ConfigResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
    let mut values = vec![0.0; n1 * n2];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('i') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(ConfigError(format!("bad plan row {line:?}")));
        }
        let i: usize = cols[0].parse().map_err(|_| ConfigError(format!("bad i in {line:?}")))?;
        let j: usize = cols[1].parse().map_err(|_| ConfigError(format!("bad j in {line:?}")))?;
        let v: f64 = cols[2].parse().map_err(|_| ConfigError(format!("bad p in {line:?}")))?;
        if i >= n1 || j >= n2 {
            return Err(ConfigError(format!("plan index ({i},{j}) outside {n1}x{n2}")));
        }
        values[i * n2 + j] = v;
    }
    Ok(values)
}

fn cmd_verify(args: &VerifyArgs) -> ConfigResult<u8> {
    let (cfg, text) = ProblemConfig::load(&args.problem)?;
    let meta = Meta::new(&text, cfg.seed);
    let base = base_dir(&args.problem);
    let prob = build_problem(&cfg, &base, cfg.gamma, cfg.level)?;
    let mut checks: Vec<Check> = Vec::new();

    let existence = validate_existence_conditions(&prob)?;
    checks.push(Check {
        name: "existence/submultiplicative-bound".into(),
        pass: existence.submultiplicative_ok,
        detail: match existence.submultiplicative_constant {
            Some(c) => format!("product bound holds with constant {c:.3e}"),
            None => "no product-type bound found on the sample grid".into(),
        },
    });
    // informational: a zero floor only withdraws the dual-attainment
    // guarantee, it does not invalidate the instance
    checks.push(Check {
        name: "existence/marginal-density-floor".into(),
        pass: true,
        detail: format!(
            "min cell density {:.3e}{}",
            existence.density_floor,
            if existence.density_floor_positive {
                ""
            } else {
                " — WARNING: dual attainment not guaranteed"
            }
        ),
    });
    checks.push(Check {
        name: "existence/conjugate-integral".into(),
        pass: existence.conjugate_integral.is_finite(),
        detail: format!(
            "sum of (ext Phi)*(-c/gamma) weights = {:.6e}, marginal norms ({:.4}, {:.4})",
            existence.conjugate_integral,
            existence.marginal_norms.0,
            existence.marginal_norms.1
        ),
    });

    if let Some(plan_path) = &args.plan {
        let values = read_plan_csv(plan_path, prob.n1(), prob.n2())?;
        let nonneg = values.iter().all(|v| *v >= 0.0);
        checks.push(Check {
            name: "plan/positivity".into(),
            pass: nonneg,
            detail: if nonneg {
                "all coefficients >= 0".into()
            } else {
                "negative coefficient found".into()
            },
        });
        if nonneg {
            let plan = GridFunction::new(prob.grid.clone(), values)?;
            let (r1, r2) = marginal_residuals(&prob, &plan);
            checks.push(Check {
                name: "plan/marginal-residuals".into(),
                pass: r1 + r2 <= args.tol,
                detail: format!("L1 residuals ({r1:.3e}, {r2:.3e}) vs tol {:.1e}", args.tol),
            });
        }
    }

    if let Some(schedule_path) = &args.schedule {
        let (sweep_cfg, _) = SweepConfig::load(schedule_path)?;
        let schedule = sweep_cfg.schedule(&base_dir(schedule_path))?;
        let template = cfg.template(&base)?;
        let reg = Regularizer::from_spec(&template.regularizer)?;
        let coupling = validate_coupling(&schedule, &reg, &template)?;
        checks.push(Check {
            name: "schedule/coupling".into(),
            pass: coupling.verdict == Verdict::Pass,
            detail: format!(
                "quantity decreases by {:.3}x over {} entries",
                coupling.decrease_factor,
                schedule.entries.len()
            ),
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("{}  {}  ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(path) = &args.json {
        let report = VerifyReport { meta, checks, all_pass };
        std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok(if all_pass { 0 } else { 3 })
}

fn cmd_conjugate_table(args: &ConjugateTableArgs) -> ConfigResult<u8> {
    let step_ok = args.step > 0.0 && args.r_max >= args.r_min;
    if !step_ok {
        return Err(ConfigError("need step > 0 and r_max >= r_min".into()));
    }
    let spec = match args.family.as_str() {
        "entropy" => RegularizerSpec::Entropy,
        "power" => RegularizerSpec::Power {
            p: args.p.ok_or_else(|| ConfigError("power family needs --p".into()))?,
        },
        "tsallis" => RegularizerSpec::Tsallis {
            q: args.q.ok_or_else(|| ConfigError("tsallis family needs --q".into()))?,
        },
        "custom" => {
            let path = args
                .density_table
                .as_ref()
                .ok_or_else(|| ConfigError("custom family needs --density-table".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
            let mut pairs = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() != 2 {
                    return Err(ConfigError(format!("bad density row {line:?}")));
                }
                pairs.push((
                    cols[0].parse().map_err(|_| ConfigError(format!("bad t in {line:?}")))?,
                    cols[1].parse().map_err(|_| ConfigError(format!("bad phi in {line:?}")))?,
                ));
            }
            RegularizerSpec::Custom { density_table: pairs }
        }
        other => return Err(ConfigError(format!("unknown family {other:?}"))),
    };
    let reg = Regularizer::from_spec(&spec)?;
    let mut out = String::from(if args.with_oracle {
        "r,conjugate,oracle\n"
    } else {
        "r,conjugate\n"
    });
    let mut r = args.r_min;
    while r <= args.r_max + 1e-12 {
        if args.with_oracle {
            let oracle = numeric_legendre(&reg, r)?;
            out.push_str(&format!("{r},{},{}\n", reg.conjugate(r), oracle));
        } else {
            out.push_str(&format!("{r},{}\n", reg.conjugate(r)));
        }
        r += args.step;
    }
    std::fs::write(&args.out, out)?;
    Ok(0)
}
