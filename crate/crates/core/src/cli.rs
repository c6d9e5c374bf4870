//! Command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 self-test failure. Errors are reported as one JSON line on stderr.

use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::{
    displacement_family, exact_stress, verify_weak_solution, yosida_rate_study, DisplacementVariant, OneDScenario,
};
use crate::config::{Mode, Scenario};
use crate::control::{lambda_continuation, ControlProblem, LbfgsOptions, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::fem::ElasticSystem;
use crate::io::{self, Summary};
use crate::mesh::{strain, FieldP0, FieldP1, LoadVector, Mesh};
use crate::solver::{h1_h1_norm, PlasticityModel, SolverConfig, State, Trajectory};
use crate::tensor::{ElasticityTensor, SymTensor};
use crate::yield_set::{RegularizationParams, YieldSet};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_SELF_TEST: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "plasticity-control", version, about = "Regularized perfect plasticity with Dirichlet boundary control")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the mode given in the scenario file.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Runs the built-in quick checks instead of a scenario.
    #[arg(long)]
    pub self_test: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

/// Fully resolved run request.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub scenario: Scenario,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let scenario = match &cli.config {
            Some(p) => Scenario::load(p)?,
            None => Scenario::default(),
        };
        let mode = cli
            .mode
            .or(scenario.mode)
            .ok_or_else(|| Error::Config("no mode given (use --mode or set `mode` in the scenario)".into()))?;
        if cli.config.is_none() && !matches!(mode, Mode::RateStudy | Mode::Oracle1d) {
            return Err(Error::Config(format!("mode {mode} needs --config")));
        }
        if cli.threads == Some(0) {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        scenario.validate(mode)?;
        Ok(RunConfig {
            mode,
            seed: cli.seed.or(scenario.seed).unwrap_or(0),
            scenario,
            out: cli.out.clone(),
            threads: cli.threads,
        })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn report_error(e: &Error) {
    let kind = match exit_code(e) {
        EXIT_CONFIG => "config",
        _ => "solver",
    };
    eprintln!("{}", serde_json::json!({ "error": kind, "message": e.to_string() }));
}

/// Parses the process arguments, runs and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::new().parse_filters(level).try_init();
    if cli.self_test {
        return if self_test(cli.seed.unwrap_or(0)) { 0 } else { EXIT_SELF_TEST };
    }
    let result = RunConfig::from_cli(&cli).and_then(|rc| run(&rc));
    match result {
        Ok(summary) => {
            if let Some(m) = summary.get("manifest") {
                log::info!("wrote {m}");
            }
            0
        }
        Err(e) => {
            report_error(&e);
            exit_code(&e)
        }
    }
}

/// Executes one run, writing all artifacts below `rc.out` plus a manifest.
pub fn run(rc: &RunConfig) -> Result<Summary> {
    std::fs::create_dir_all(&rc.out)?;
    let mut summary = match rc.mode {
        Mode::Simulate => simulate(&rc.scenario, &rc.out)?,
        Mode::Optimize => optimize(&rc.scenario, &rc.out)?,
        Mode::RateStudy => rate_study(&rc.scenario, &rc.out)?,
        Mode::Oracle1d => oracle_1d(&rc.scenario, &rc.out)?,
        Mode::Sweep => sweep(&rc.scenario, &rc.out, rc.threads)?,
    };
    summary.set("seed", rc.seed);
    let mut ordered = Summary::new();
    ordered.set("mode", rc.mode);
    for (k, v) in summary.entries() {
        ordered.set(k, v);
    }
    ordered.write(io::create(&rc.out.join("summary.txt"))?)?;
    let manifest = io::write_manifest(&rc.out)?;
    ordered.set("manifest", manifest.display());
    Ok(ordered)
}

fn build_model(sc: &Scenario) -> Result<PlasticityModel> {
    let mesh = sc.mesh()?;
    let system = ElasticSystem::with_solver(&mesh, sc.elasticity()?, sc.linear_solver())?;
    Ok(PlasticityModel::from_system(system, sc.yield_set()?))
}

fn write_trajectory(out: &Path, mesh: &Mesh, traj: &Trajectory, snapshots: &[usize]) -> Result<()> {
    let d = &traj.diagnostics;
    let times = traj.grid.times();
    let series: [(&str, &[f64]); 4] = [
        ("sigma_rate", &d.sigma_rate),
        ("energy", &d.energy),
        ("dissipation", &d.dissipation),
        ("stress_regularity", &d.stress_regularity),
    ];
    for (name, values) in series {
        let rows: Vec<Vec<f64>> = times.iter().zip(values).map(|(t, v)| vec![*t, *v]).collect();
        io::write_table(io::create(&out.join(format!("diagnostics/{name}.csv")))?, &["time", name], &rows)?;
    }
    let rows: Vec<Vec<f64>> = (0..times.len())
        .map(|k| vec![times[k], d.sigma_rate[k], d.energy[k], d.dissipation[k], d.stress_regularity[k]])
        .collect();
    io::write_table(
        io::create(&out.join("diagnostics.csv"))?,
        &["time", "sigma_rate", "energy", "dissipation", "stress_regularity"],
        &rows,
    )?;
    for &k in snapshots {
        let st = traj
            .states
            .get(k)
            .ok_or_else(|| Error::Config(format!("snapshot {k} beyond the last step {}", traj.grid.steps)))?;
        st.u.check(mesh)?;
        io::write_field_p1(io::create(&out.join(format!("fields/u_{k}.csv")))?, &st.u)?;
        io::write_field_p0(io::create(&out.join(format!("fields/sigma_{k}.csv")))?, &st.sigma)?;
        io::write_field_p0(io::create(&out.join(format!("fields/z_{k}.csv")))?, &st.z)?;
    }
    Ok(())
}

fn trajectory_summary(s: &mut Summary, traj: &Trajectory, cfg: &SolverConfig) {
    let d = &traj.diagnostics;
    s.set("scheme", cfg.scheme)
        .set("lambda", cfg.rp.lambda)
        .set("huber_eps", cfg.rp.huber_eps)
        .set("t_end", traj.grid.t_end)
        .set("steps", traj.grid.steps)
        .set("dt", traj.grid.dt())
        .set("substeps", traj.substeps)
        .set("sigma_rate_l2l2", d.sigma_rate_l2l2)
        .set("stress_regularity_sup", d.stress_regularity_sup)
        .set("energy_final", d.energy.last().copied().unwrap_or(0.0))
        .set("max_trace_z", d.max_trace_z)
        .set("max_yield_excess", d.max_yield_excess)
        .set("min_cell_dissipation", d.min_cell_dissipation);
    if !traj.iterations.is_empty() {
        s.set("max_fixed_point_iterations", traj.iterations.iter().max().unwrap());
    }
}

fn simulate(sc: &Scenario, out: &Path) -> Result<Summary> {
    let model = build_model(sc)?;
    let mesh = model.mesh().clone();
    let grid = sc.grid()?;
    let cfg = sc.solver_config()?;
    let (ud, ell) = sc.paths(&mesh, &grid);
    let init = State::zero(&mesh);
    let traj = model.run_trajectory(&cfg, &grid, &ud, &ell, &init)?;
    let output = sc.output.clone().unwrap_or_default();
    write_trajectory(out, &mesh, &traj, &output.snapshots)?;
    if output.write_mesh {
        io::write_mesh(&mesh, io::create(&out.join("mesh.txt"))?)?;
    }
    let mut s = Summary::new();
    trajectory_summary(&mut s, &traj, &cfg);
    let bound = h1_h1_norm(&mesh, &grid, &ud) / model.elasticity().gamma_a(mesh.dim());
    s.set("apriori_bound", bound);
    Ok(s)
}

/// Targets from a forward run: `mu_k = E du_k/dt`, `v_k = du_k/dt`.
fn targets_from_run(mesh: &Mesh, traj: &Trajectory) -> Result<(Vec<FieldP0>, Vec<FieldP1>)> {
    let dt = traj.grid.dt();
    let mut mu = vec![FieldP0::zeros(mesh)];
    let mut v = vec![FieldP1::zeros(mesh)];
    for k in 1..traj.states.len() {
        let rate = FieldP1 {
            dim: mesh.dim(),
            data: traj.states[k]
                .u
                .data
                .iter()
                .zip(&traj.states[k - 1].u.data)
                .map(|(a, b)| (a - b) / dt)
                .collect(),
        };
        mu.push(strain(mesh, &rate)?);
        v.push(rate);
    }
    Ok((mu, v))
}

fn read_targets(dir: &Path, steps: usize, mesh: &Mesh) -> Result<(Vec<FieldP0>, Vec<FieldP1>)> {
    let open = |name: String| {
        let p = dir.join(&name);
        std::fs::File::open(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
    };
    let mut mu = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let m = io::read_field_p0(open(format!("mu_{k}.csv"))?)?;
        m.check(mesh)?;
        mu.push(m);
        let f = io::read_field_p1(open(format!("v_{k}.csv"))?)?;
        f.check(mesh)?;
        v.push(f);
    }
    Ok((mu, v))
}

fn optimize(sc: &Scenario, out: &Path) -> Result<Summary> {
    let model = build_model(sc)?;
    let mesh = model.mesh().clone();
    let grid = sc.grid()?;
    let solver = sc.solver.expect("validated");
    let ctl = sc.control.clone().expect("validated");
    if !(solver.huber_eps > 0.0) {
        return Err(Error::Config("optimize needs solver.huber_eps > 0 (smoothed flow rule)".into()));
    }
    let rp = RegularizationParams::new(solver.lambda, solver.huber_eps)?;
    let mut spec = ObjectiveSpec::new(&mesh, &grid, rp);
    spec.alpha = ctl.alpha;
    spec.theta = ctl.theta;
    spec.load_rate_weight = ctl.load_rate_weight;
    spec.huber_eps_obj = ctl.huber_eps_obj;
    spec.r_monitor = ctl.r_monitor;
    spec.strain_weight = ctl.strain_weight;
    spec.velocity_weight = ctl.velocity_weight;
    let init = State::zero(&mesh);
    let (ud_truth, ell_truth) = sc.paths(&mesh, &grid);
    let mut summary = Summary::new();
    let (mu, v) = match &ctl.targets {
        Some(dir) => read_targets(dir, grid.steps, &mesh)?,
        None => {
            let mut cfg = SolverConfig::explicit(rp.lambda);
            cfg.rp = rp;
            cfg.smoothed = true;
            let truth = model.run_trajectory(&cfg, &grid, &ud_truth, &ell_truth, &init)?;
            targets_from_run(&mesh, &truth)?
        }
    };
    spec.mu_target = mu;
    spec.v_target = v;
    let problem = ControlProblem::new(model, grid, init, spec).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    })?;
    if ctl.targets.is_none() {
        let truth = crate::control::ControlParam {
            ud: ud_truth,
            ell: ell_truth,
        };
        let j = crate::control::eval_objective(&problem, &truth)?;
        summary.set("objective_truth", j.value);
    }
    let lambdas = ctl.lambdas.clone().unwrap_or_else(|| vec![solver.lambda]);
    let opts = LbfgsOptions {
        max_iter: ctl.max_iter,
        grad_tol: ctl.grad_tol,
        ..Default::default()
    };
    let reports = lambda_continuation(&problem, &problem.initial_control(), &lambdas, &opts)?;
    let mut iter_rows = Vec::new();
    let mut cont_rows = Vec::new();
    for r in &reports {
        for h in &r.history {
            iter_rows.push(vec![
                r.lambda.to_string(),
                h.iteration.to_string(),
                h.objective.to_string(),
                h.grad_norm.to_string(),
                h.backtracks.to_string(),
                h.step.to_string(),
            ]);
        }
        cont_rows.push(vec![
            r.lambda.to_string(),
            r.objective.to_string(),
            r.load_norm.to_string(),
            r.sigma_rate.to_string(),
            r.r_monitor.to_string(),
            r.r_monitor_ok.to_string(),
            r.drift.to_string(),
            r.status.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    io::write_records(
        io::create(&out.join("iterations.csv"))?,
        &["lambda", "iteration", "objective", "grad_norm", "backtracks", "step"],
        &iter_rows,
    )?;
    io::write_records(
        io::create(&out.join("continuation.csv"))?,
        &["lambda", "objective", "load_norm", "sigma_rate", "r_monitor", "r_monitor_ok", "drift", "status", "error"],
        &cont_rows,
    )?;
    if let Some(last) = reports.iter().rev().find(|r| r.error.is_none()) {
        for (k, (u, l)) in last.control.ud.iter().zip(&last.control.ell).enumerate() {
            io::write_field_p1(io::create(&out.join(format!("controls/ud_{k}.csv")))?, u)?;
            io::write_load(io::create(&out.join(format!("controls/ell_{k}.csv")))?, l)?;
        }
        summary
            .set("lambda_final", last.lambda)
            .set("objective_final", last.objective)
            .set("load_norm_final", last.load_norm)
            .set("status_final", last.status)
            .set("r_monitor_final", last.r_monitor)
            .set("r_monitor_ok", reports.iter().all(|r| r.error.is_some() || r.r_monitor_ok));
    }
    summary.set("lambdas", lambdas.len()).set(
        "failed_lambdas",
        reports.iter().filter(|r| r.error.is_some()).count(),
    );
    if reports.iter().all(|r| r.error.is_some()) {
        return Err(Error::NotConverged {
            what: "every continuation stage",
            iterations: reports.len(),
            residual: f64::NAN,
        });
    }
    Ok(summary)
}

fn rate_study(sc: &Scenario, out: &Path) -> Result<Summary> {
    let rs = sc.rate_study.clone().unwrap_or_default();
    let study = yosida_rate_study(&rs.lambdas, rs.steps, rs.scheme)?;
    let rows: Vec<Vec<f64>> = study
        .rows
        .iter()
        .map(|r| vec![r.lambda, r.lambda.sqrt(), r.gap, r.bound])
        .collect();
    io::write_table(
        io::create(&out.join("rate_study.csv"))?,
        &["lambda", "sqrt_lambda", "gap", "bound"],
        &rows,
    )?;
    let mut s = Summary::new();
    s.set("scheme", rs.scheme)
        .set("steps", rs.steps)
        .set("fitted_order_sqrt_lambda", study.order)
        .set("residual_norm", study.residual_norm)
        .set("bound_holds", study.rows.iter().all(|r| r.gap <= r.bound));
    Ok(s)
}

fn oracle_1d(sc: &Scenario, out: &Path) -> Result<Summary> {
    let o = sc.oracle.clone().unwrap_or_default();
    let rows = (0..=o.samples)
        .map(|k| {
            let t = k as f64 / o.samples as f64;
            Ok(vec![t, exact_stress(t)?])
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_table(io::create(&out.join("oracle_stress.csv"))?, &["t", "sigma"], &rows)?;
    let variants = [
        DisplacementVariant::Linear,
        DisplacementVariant::TwoPhase { beta: o.beta.max(f64::MIN_POSITIVE) },
        DisplacementVariant::Frozen { alpha: o.alpha, beta: o.beta },
    ];
    for v in &variants {
        v.validate().map_err(|e| Error::Config(e.to_string()))?;
    }
    let mut prof = Vec::new();
    for &t in &o.profile_times {
        for j in 0..=o.resolution {
            let x = j as f64 / o.resolution as f64;
            let mut row = vec![t, x];
            for v in &variants {
                row.push(displacement_family(*v, t, x)?);
            }
            prof.push(row);
        }
    }
    io::write_table(
        io::create(&out.join("displacement_profiles.csv"))?,
        &["t", "x", "linear", "two_phase", "frozen"],
        &prof,
    )?;
    let mut s = Summary::new();
    for (v, name) in variants.iter().zip(["linear", "two_phase", "frozen"]) {
        let rep = verify_weak_solution(*v, o.resolution)?;
        s.set(&format!("violation_{name}"), rep.max_violation());
    }
    Ok(s)
}

fn sweep(sc: &Scenario, out: &Path, threads: Option<usize>) -> Result<Summary> {
    let sw = sc.sweep.clone().expect("validated");
    let base_solver = sc.solver.expect("validated");
    let base_steps = sc.time.expect("validated").steps;
    let steps = if sw.steps.is_empty() { vec![base_steps] } else { sw.steps.clone() };
    let schemes = if sw.schemes.is_empty() { vec![base_solver.scheme] } else { sw.schemes.clone() };
    let mut jobs = Vec::new();
    for &scheme in &schemes {
        for &n in &steps {
            for &lambda in &sw.lambdas {
                let mut s = sc.clone();
                s.sweep = None;
                let solver = s.solver.as_mut().unwrap();
                solver.scheme = scheme;
                solver.lambda = lambda;
                s.time.as_mut().unwrap().steps = n;
                s.validate(Mode::Simulate)?;
                jobs.push(s);
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Summary>> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, s)| simulate(s, &out.join(format!("run_{i:03}"))))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, (job, res)) in jobs.iter().zip(&results).enumerate() {
        let solver = job.solver.unwrap();
        let mut row = vec![
            i.to_string(),
            solver.scheme.to_string(),
            solver.lambda.to_string(),
            job.time.unwrap().steps.to_string(),
        ];
        match res {
            Ok(s) => {
                s.write(io::create(&out.join(format!("run_{i:03}/summary.txt")))?)?;
                row.push(s.get("sigma_rate_l2l2").unwrap_or("").to_string());
                row.push(s.get("max_trace_z").unwrap_or("").to_string());
                row.push("ok".into());
            }
            Err(e) => {
                failures += 1;
                row.push(String::new());
                row.push(String::new());
                row.push(e.to_string());
            }
        }
        rows.push(row);
    }
    io::write_records(
        io::create(&out.join("sweep.csv"))?,
        &["run", "scheme", "lambda", "steps", "sigma_rate_l2l2", "max_trace_z", "status"],
        &rows,
    )?;
    let mut s = Summary::new();
    s.set("runs", jobs.len()).set("failed_runs", failures);
    Ok(s)
}

type Check = Box<dyn Fn() -> Result<bool>>;

/// Fast internal consistency checks; prints one line per check.
pub fn self_test(seed: u64) -> bool {
    let checks: Vec<(&str, Check)> = vec![
        ("bar-benchmark-implicit", Box::new(check_bar)),
        ("patch-test", Box::new(check_patch)),
        ("yosida-properties", Box::new(move || check_yosida(seed))),
        ("oracle-linear-variant", Box::new(|| Ok(verify_weak_solution(DisplacementVariant::Linear, 100)?.max_violation() <= 1e-12))),
    ];
    let mut all = true;
    for (name, check) in checks {
        let ok = matches!(check(), Ok(true));
        all &= ok;
        println!("self-test {name}: {}", if ok { "pass" } else { "FAIL" });
    }
    all
}

fn check_bar() -> Result<bool> {
    let sc = OneDScenario;
    let model = sc.model(8)?;
    let grid = sc.grid(200)?;
    let (ud, ell) = sc.paths(model.mesh(), &grid);
    let tr = model.run_trajectory(&SolverConfig::implicit(0.0), &grid, &ud, &ell, &State::zero(model.mesh()))?;
    let mut err: f64 = 0.0;
    for (k, st) in tr.states.iter().enumerate() {
        let exact = exact_stress(grid.time(k))?;
        for s in &st.sigma.data {
            err = err.max((s.get(0, 0) - exact).abs());
        }
    }
    Ok(err <= 1.5 * grid.dt())
}

fn check_patch() -> Result<bool> {
    let mesh = Mesh::rect(4, 4, &crate::mesh::DirichletRule::all())?;
    let el = ElasticityTensor::new(1.3, 0.7)?;
    let sys = ElasticSystem::new(&mesh, el)?;
    let exact = |x: &[f64]| [0.1 + 0.3 * x[0] - 0.2 * x[1], -0.05 + 0.4 * x[0] + 0.25 * x[1]];
    let ud = FieldP1::interpolate(&mesh, exact);
    let (u, sigma) = sys.solve(&FieldP0::zeros(&mesh), &ud, &LoadVector::zeros(&mesh))?;
    let s_exact = el.apply_c(&SymTensor::from_components(2, &[0.3, 0.25, 0.1])?);
    let du = u.data.iter().zip(&ud.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ds = sigma.data.iter().map(|s| (*s - s_exact).norm()).fold(0.0, f64::max);
    Ok(du <= 1e-10 && ds <= 1e-10)
}

fn check_yosida(seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys = YieldSet::new(1.0)?;
    let rp = RegularizationParams::new(0.1, 0.0)?;
    for dim in 1..=3 {
        for _ in 0..1000 {
            let mut draw = || {
                let c: Vec<f64> = (0..crate::tensor::num_components(dim)).map(|_| rng.gen_range(-3.0..3.0)).collect();
                SymTensor::from_components(dim, &c)
            };
            let (a, b) = (draw()?, draw()?);
            let (ga, gb) = (ys.yosida_deriv(&rp, &a)?, ys.yosida_deriv(&rp, &b)?);
            let mono = (ga - gb).ddot(&(a - b));
            let lip = (ga - gb).norm() <= (a - b).norm() / rp.lambda * (1.0 + 1e-12);
            if mono < -1e-12 || !lip || ga.norm() > a.norm() / rp.lambda * (1.0 + 1e-12) {
                return Ok(false);
            }
            if dim > 1 && ga.trace().abs() > 1e-14 * (1.0 + ga.norm()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_test_passes() {
        assert!(self_test(3));
    }

    #[test]
    fn config_errors_map_to_exit_code_2() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(
            exit_code(&Error::NotConverged {
                what: "x",
                iterations: 1,
                residual: 1.0
            }),
            EXIT_SOLVER
        );
    }

    #[test]
    fn oracle_mode_writes_expected_row() {
        let dir = tempfile::tempdir().unwrap();
        let rc = RunConfig {
            mode: Mode::Oracle1d,
            scenario: Scenario::default(),
            out: dir.path().to_path_buf(),
            seed: 0,
            threads: Some(1),
        };
        let s = run(&rc).unwrap();
        let (_, rows) = io::read_table(std::fs::File::open(dir.path().join("oracle_stress.csv")).unwrap()).unwrap();
        let row = rows.iter().find(|r| r[0] == 0.75).unwrap();
        assert_eq!(row[1], 1.0);
        assert!(s.get("violation_frozen").unwrap().parse::<f64>().unwrap() <= 1e-10);
        assert!(dir.path().join("manifest.txt").exists());
    }
}
