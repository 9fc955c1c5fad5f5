//! Subcommand implementations. Each writes its artifacts under the output directory
//! and returns a short text summary.

use crate::document::Document;
use crate::output::{num, rollout_csv, row, trajectory_csv};
use crate::svg::Plot;
use mobman_core::config::reference_motor;
use mobman_core::config::MotorConfig;
use mobman_core::dynamics::{cross_validate, CrossValidation, GeneralizedForce, Sample};
use mobman_core::motor::{operation_map, torque_envelope, MotorDesign, OperationMap, TorqueEnvelope};
use mobman_core::robot::{RobotModel, RobotState};
use mobman_nlp::Options;
use mobman_plan::codesign::{run_codesign, CodesignResult};
use mobman_plan::planning::{
    plan, plan_sequential, simulate_closed_loop, time_optimal, Metrics, PlanReference, Reference, Rollout, SequentialPlan,
    TrajectorySolution,
};
use mobman_plan::PlanError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

/// Initial final-time guess for the min-time solve when the document gives none.
pub const T_F_GUESS_S: f64 = 4.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Validation(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 70,
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::MaxIterations(_) | PlanError::SolverBreakdown(_) | PlanError::IntegrationDiverged(_) => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub struct Context {
    pub doc: Document,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub opts: Options,
}

impl Context {
    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join(name), body)?;
        Ok(())
    }
}

/// Uniform samples: yaw and joint angles in ±π, base position ±1 m, velocities ±2,
/// base inputs ±20 and rotor torques ±0.5 N·m.
pub fn random_samples(model: &RobotModel, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n;
    (0..count)
        .map(|_| {
            let state = RobotState {
                q1: [rng.gen_range(-PI..PI), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                theta: (0..n).map(|_| rng.gen_range(-PI..PI)).collect(),
                q1_dot: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                theta_dot: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            };
            let mut u: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..20.0)).collect();
            u.extend((0..n).map(|_| rng.gen_range(-0.5..0.5)));
            Sample { state, input: GeneralizedForce::from_vector(&u) }
        })
        .collect()
}

pub fn validate_dynamics(ctx: &Context, samples: usize, threshold_pct: f64) -> Result<(CrossValidation, String), CliError> {
    if !(threshold_pct >= 0.0) {
        return Err(CliError::Usage(format!("threshold {threshold_pct} must be non-negative")));
    }
    let model = ctx.doc.model()?;
    let cv = cross_validate(&model, &random_samples(&model, samples, ctx.seed)).map_err(PlanError::from)?;
    let mut csv = String::from("channel,mean,std,q1,median,q3,max,percent,max_percent,max_rel\n");
    for c in &cv.channels {
        let _ = writeln!(csv, "{},{}", c.name, row(&[c.mean, c.std, c.q1, c.median, c.q3, c.max, c.percent, c.max_percent, c.max_rel]));
    }
    let bad: Vec<&str> = cv.channels.iter().filter(|c| !(c.percent <= threshold_pct)).map(|c| c.name.as_str()).collect();
    let mut text = format!("{} samples, seed {}\n{}", cv.samples, ctx.seed, cv.table());
    let _ = writeln!(text, "worst relative error {:.3e}", cv.worst_rel());
    if bad.is_empty() {
        let _ = writeln!(text, "all channels within {threshold_pct}%");
    } else {
        let _ = writeln!(text, "channels above {threshold_pct}%: {}", bad.join(", "));
    }
    ctx.write("validate_dynamics.csv", &csv)?;
    ctx.write("validate_dynamics.txt", &text)?;
    if bad.is_empty() {
        Ok((cv, text))
    } else {
        Err(CliError::Validation(format!("channels above {threshold_pct}%: {}", bad.join(", "))))
    }
}

#[derive(Clone, Debug)]
pub struct MotorMapArgs {
    /// Arm joint index (0-based) into the document's motors.
    pub joint: usize,
    /// Use the built-in reference motor instead of the document's.
    pub reference: bool,
    pub i_max_a: Option<f64>,
    pub n_omega: usize,
    pub n_tau: usize,
    pub omega_max: Option<f64>,
    pub tau_max: Option<f64>,
}

pub struct MotorMap {
    pub design: MotorDesign,
    pub envelope: TorqueEnvelope,
    pub map: OperationMap,
    /// Largest distance, in τ cells, between the map boundary and the envelope.
    pub max_cell_offset: i64,
}

/// Default plotting range: past the speed ceiling, or three times the last corner speed.
pub fn default_omega_range(env: &TorqueEnvelope) -> f64 {
    if env.omega_max.is_finite() {
        1.2 * env.omega_max
    } else {
        3.0 * env.omega_s.unwrap_or(env.omega_r)
    }
}

/// Envelope τ_max as a τ-grid index per ω column (−1 past the speed ceiling).
pub fn envelope_index(env: &TorqueEnvelope, map: &OperationMap) -> Vec<i64> {
    let dt = map.taus[1] - map.taus[0];
    map.omegas
        .iter()
        .map(|&w| {
            let b = env.bounds(w);
            if b.out_of_range {
                -1
            } else {
                ((b.tau_max / dt).floor() as i64).min(map.taus.len() as i64 - 1)
            }
        })
        .collect()
}

pub fn compute_motor_map(doc: &Document, a: &MotorMapArgs) -> Result<MotorMap, CliError> {
    if a.n_omega < 2 || a.n_tau < 2 {
        return Err(CliError::Usage("the grid needs at least 2 points per axis".into()));
    }
    let mut cfg = if a.reference {
        reference_motor(a.i_max_a.unwrap_or(21.67))
    } else {
        *doc.motors.get(a.joint).ok_or_else(|| CliError::Usage(format!("no motor for joint {}", a.joint)))?
    };
    if let Some(i) = a.i_max_a {
        cfg.i_max_a = i;
    }
    let design = MotorDesign::from(cfg);
    let envelope = torque_envelope(&design).map_err(PlanError::from)?;
    let w_hat = a.omega_max.unwrap_or_else(|| default_omega_range(&envelope));
    let t_hat = a.tau_max.unwrap_or(1.1 * envelope.tau_flat);
    if !(w_hat > 0.0 && t_hat > 0.0) {
        return Err(CliError::Usage("plot ranges must be positive".into()));
    }
    let map = operation_map(&design, a.n_omega, a.n_tau, w_hat, t_hat).map_err(PlanError::from)?;
    let got = map.boundary();
    let max_cell_offset =
        got.iter().zip(envelope_index(&envelope, &map)).map(|(g, e)| (g.map_or(-1, |v| v as i64) - e).abs()).max().unwrap_or(0);
    Ok(MotorMap { design, envelope, map, max_cell_offset })
}

pub fn motor_map(ctx: &Context, a: &MotorMapArgs) -> Result<String, CliError> {
    let m = compute_motor_map(&ctx.doc, a)?;
    let env = &m.envelope;
    let mut grid = String::from("omega_radps,tau_nm,feasible\n");
    for (it, t) in m.map.taus.iter().enumerate() {
        for (iw, w) in m.map.omegas.iter().enumerate() {
            let _ = writeln!(grid, "{},{},{}", num(*w), num(*t), m.map.grid[it][iw]);
        }
    }
    let mut curve = String::from("omega_radps,tau_max_nm,map_boundary_nm\n");
    let boundary = m.map.boundary();
    for (iw, &w) in m.map.omegas.iter().enumerate() {
        let b = boundary[iw].map_or(f64::NAN, |i| m.map.taus[i]);
        let _ = writeln!(curve, "{},{},{}", num(w), num(env.bounds(w).tau_max), num(b));
    }

    let (w_hat, t_hat) = (*m.map.omegas.last().unwrap(), *m.map.taus.last().unwrap());
    let mut plot = Plot::new(800.0, 600.0, (0.0, w_hat), (0.0, t_hat));
    let (dw, dt) = (m.map.omegas[1] - m.map.omegas[0], m.map.taus[1] - m.map.taus[0]);
    for (it, t) in m.map.taus.iter().enumerate() {
        for (iw, w) in m.map.omegas.iter().enumerate() {
            if m.map.grid[it][iw] == 1 {
                plot.cell(w - 0.5 * dw, w + 0.5 * dw, t - 0.5 * dt, t + 0.5 * dt, "#bcd6f0");
            }
        }
    }
    let fine: Vec<(f64, f64)> = (0..=400).map(|i| w_hat * i as f64 / 400.0).map(|w| (w, env.bounds(w).tau_max)).collect();
    plot.polyline(&fine, "#c0392b", false);
    plot.vline(env.omega_r, "#555", "ω_r");
    if let Some(ws) = env.omega_s {
        plot.vline(ws, "#555", "ω_s");
    }
    if env.omega_max.is_finite() && env.omega_max <= w_hat {
        plot.vline(env.omega_max, "#555", "ω_max");
    }
    plot.legend(&[("#bcd6f0", "feasible grid cells"), ("#c0392b", "analytical τ_max")]);
    let title = format!("Operation map ({:?} case, I_max = {} A)", env.case, m.design.i_max);

    let mut text = format!("case {:?}\ntau_flat {:.6} N·m\nomega_r {:.6} rad/s\n", env.case, env.tau_flat, env.omega_r);
    if let Some(ws) = env.omega_s {
        let _ = writeln!(text, "omega_s {ws:.6} rad/s");
    }
    let _ = writeln!(text, "omega_max {} rad/s", if env.omega_max.is_finite() { format!("{:.6}", env.omega_max) } else { "inf".into() });
    let _ = writeln!(text, "grid {}x{}, boundary within {} cell(s) of the envelope", a.n_omega, a.n_tau, m.max_cell_offset);

    ctx.write("motor_map.csv", &grid)?;
    ctx.write("motor_envelope.csv", &curve)?;
    ctx.write("motor_map.svg", &plot.render(&title, "rotor speed ω (rad/s)", "torque τ (N·m)"))?;
    ctx.write("motor_map.txt", &text)?;
    Ok(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Integrated,
    Sequential,
    TimeOptimal,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Integrated => "integrated",
            Mode::Sequential => "sequential",
            Mode::TimeOptimal => "time-optimal",
        }
    }
}

pub enum Planned {
    Collocation(TrajectorySolution),
    Sequential(SequentialPlan),
}

impl Planned {
    pub fn completion_time(&self) -> f64 {
        match self {
            Planned::Collocation(s) => s.t_f(),
            Planned::Sequential(s) => s.completion_time(),
        }
    }

    pub fn planned_effort(&self) -> f64 {
        match self {
            Planned::Collocation(s) => s.effort,
            Planned::Sequential(s) => s.planned_effort(),
        }
    }

    /// The collocation solve behind the plan (the arm phase for sequential).
    pub fn solution(&self) -> &TrajectorySolution {
        match self {
            Planned::Collocation(s) => s,
            Planned::Sequential(s) => &s.arm,
        }
    }
}

pub struct PlanRun {
    pub mode: Mode,
    pub model: RobotModel,
    pub time_optimal_s: Option<f64>,
    pub planned: Planned,
    pub rollout: Rollout,
    pub metrics: Metrics,
}

/// Minimum final time of the document's task.
pub fn minimum_time(doc: &Document, model: &RobotModel, opts: &Options) -> Result<TrajectorySolution, CliError> {
    let s = time_optimal(&doc.planning_problem(model, doc.planning.t_f_s.unwrap_or(T_F_GUESS_S)), opts)?;
    s.check()?;
    Ok(s)
}

/// The document's final time, or `t_f_factor` times the minimum time.
pub fn resolve_t_f(doc: &Document, model: &RobotModel, opts: &Options) -> Result<(f64, Option<f64>), CliError> {
    match doc.planning.t_f_s {
        Some(t) => Ok((t, None)),
        None => {
            let t_star = minimum_time(doc, model, opts)?.t_f();
            Ok((doc.planning.t_f_factor * t_star, Some(t_star)))
        }
    }
}

/// Plans in `mode` and tracks the plan in closed loop (with noise when given a seed).
pub fn run_plan(doc: &Document, mode: Mode, opts: &Options, noise_seed: Option<u64>) -> Result<PlanRun, CliError> {
    let model = doc.model()?;
    let (planned, time_optimal_s) = match mode {
        Mode::TimeOptimal => {
            let s = minimum_time(doc, &model, opts)?;
            let t = s.t_f();
            (Planned::Collocation(s), Some(t))
        }
        Mode::Integrated => {
            let (t_f, t_star) = resolve_t_f(doc, &model, opts)?;
            let s = plan(&doc.planning_problem(&model, t_f), opts)?;
            s.check()?;
            (Planned::Collocation(s), t_star)
        }
        Mode::Sequential => {
            let p = doc.planning_problem(&model, doc.planning.t_f_s.unwrap_or(T_F_GUESS_S));
            let s = plan_sequential(&p, &doc.sequential, opts)?;
            s.arm.check()?;
            (Planned::Sequential(s), None)
        }
    };
    let noise = noise_seed.and_then(|s| doc.noise.spec(s));
    let reference: &dyn Reference = match &planned {
        Planned::Collocation(s) => &PlanReference(&s.trajectory),
        Planned::Sequential(s) => s,
    };
    let t_end = planned.completion_time() + doc.simulation.settle_s;
    let rollout = simulate_closed_loop(&model, reference, &doc.x0(), &doc.pid, noise.as_ref(), doc.simulation.dt_s, t_end)?;
    let metrics = Metrics {
        name: mode.name().into(),
        time_s: planned.completion_time(),
        effort: rollout.effort,
        error_mm: 1e3 * rollout.end_effector_error(&model, doc.planning.target_m),
        success: planned.solution().is_success(),
    };
    Ok(PlanRun { mode, model, time_optimal_s, planned, rollout, metrics })
}

fn xy_path_svg(run: &PlanRun, target: [f64; 3]) -> String {
    let ee = |x: &[f64]| {
        let p = run.model.end_effector_position(&[x[0], x[1], x[2]], &x[3..3 + run.model.n]);
        (p[0], p[1])
    };
    let base: Vec<(f64, f64)> = run.rollout.states.iter().map(|x| (x[1], x[2])).collect();
    let tool: Vec<(f64, f64)> = run.rollout.states.iter().map(|x| ee(x)).collect();
    let planned: Vec<(f64, f64)> = match &run.planned {
        Planned::Collocation(s) => s.trajectory.time_grid().iter().map(|&t| ee(&s.trajectory.state_at(t))).collect(),
        Planned::Sequential(_) => vec![],
    };
    let goal = [(target[0], target[1])];
    let mut plot = Plot::fit(700.0, 700.0, &[&base, &tool, &planned, &goal], true);
    plot.polyline(&base, "#2c7fb8", false);
    plot.polyline(&planned, "#999", true);
    plot.polyline(&tool, "#d95f0e", false);
    plot.marker(target[0], target[1], "#000", "target");
    let mut legend = vec![("#2c7fb8", "base (closed loop)"), ("#d95f0e", "end effector (closed loop)")];
    if !planned.is_empty() {
        legend.push(("#999", "end effector (planned)"));
    }
    plot.legend(&legend);
    plot.render(&format!("XY path, {}", run.mode.name()), "x (m)", "y (m)")
}

fn write_plan_artifacts(ctx: &Context, run: &PlanRun, prefix: &str) -> Result<(), CliError> {
    let n = run.model.n;
    let stride = ((1e-2 / ctx.doc.simulation.dt_s).round() as usize).max(1);
    ctx.write(&format!("{prefix}trajectory.csv"), &trajectory_csv(&run.planned.solution().trajectory, n))?;
    ctx.write(&format!("{prefix}rollout.csv"), &rollout_csv(&run.rollout, n, stride))?;
    ctx.write(&format!("{prefix}metrics.csv"), &format!("{}\n{}\n", Metrics::header(), run.metrics.row()))?;
    ctx.write(&format!("{prefix}xy_path.svg"), &xy_path_svg(run, ctx.doc.planning.target_m))?;
    if let Planned::Sequential(s) = &run.planned {
        let mut csv = String::from("axis,a_m,p_f,t_f1\n");
        for (name, p) in ["x", "y"].iter().zip(&s.profiles) {
            let _ = writeln!(csv, "{name},{}", row(&[p.a_m, p.p_f, p.t_f1]));
        }
        ctx.write(&format!("{prefix}base_profile.csv"), &csv)?;
    }
    Ok(())
}

fn plan_summary(run: &PlanRun) -> String {
    let s = run.planned.solution();
    let mut text = String::new();
    if let Some(t) = run.time_optimal_s {
        let _ = writeln!(text, "minimum time {t:.6} s");
    }
    let _ = writeln!(text, "mode {}", run.mode.name());
    let _ = writeln!(text, "completion time {:.6} s", run.planned.completion_time());
    let _ = writeln!(text, "planned effort {:.6}", run.planned.planned_effort());
    let _ = writeln!(text, "solver {:?} in {} iterations ({:.2} s)", s.status, s.iterations, s.solve_seconds);
    let _ = writeln!(text, "max defect {:.3e}, min slack {:.3e}", s.max_defect, s.min_slack);
    let _ = writeln!(text, "planned terminal error {:.6} mm", 1e3 * s.terminal_error);
    let _ = writeln!(text, "closed-loop effort {:.6}", run.rollout.effort);
    let _ = writeln!(text, "closed-loop terminal error {:.6} mm", run.metrics.error_mm);
    text
}

pub fn plan_command(ctx: &Context, mode: Mode) -> Result<String, CliError> {
    let run = run_plan(&ctx.doc, mode, &ctx.opts, None)?;
    write_plan_artifacts(ctx, &run, "")?;
    let text = plan_summary(&run);
    ctx.write("plan.txt", &text)?;
    Ok(text)
}

/// Repeated noisy rollouts of one plan; trial `i` uses seed `seed + i`.
pub fn simulate_command(ctx: &Context, mode: Mode, trials: usize) -> Result<String, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let mut doc = ctx.doc.clone();
    doc.noise.enabled = true;
    let first = run_plan(&doc, mode, &ctx.opts, Some(ctx.seed))?;
    write_plan_artifacts(ctx, &first, "noisy_")?;
    let reference: &dyn Reference = match &first.planned {
        Planned::Collocation(s) => &PlanReference(&s.trajectory),
        Planned::Sequential(s) => s,
    };
    let t_end = first.planned.completion_time() + doc.simulation.settle_s;
    let mut errors = vec![first.metrics.error_mm];
    let mut efforts = vec![first.rollout.effort];
    for i in 1..trials {
        let noise = doc.noise.spec(ctx.seed.wrapping_add(i as u64));
        let r = simulate_closed_loop(&first.model, reference, &doc.x0(), &doc.pid, noise.as_ref(), doc.simulation.dt_s, t_end)?;
        errors.push(1e3 * r.end_effector_error(&first.model, doc.planning.target_m));
        efforts.push(r.effort);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
    };
    let mut csv = String::from("trial,seed,effort,error_mm\n");
    for i in 0..trials {
        let _ = writeln!(csv, "{i},{},{},{}", ctx.seed.wrapping_add(i as u64), num(efforts[i]), num(errors[i]));
    }
    ctx.write("noisy_trials.csv", &csv)?;
    let (em, es) = stats(&errors);
    let (um, us) = stats(&efforts);
    let mut text = plan_summary(&first);
    let _ = writeln!(text, "{trials} noisy trial(s) from seed {}", ctx.seed);
    let _ = writeln!(text, "terminal error {em:.4} ± {es:.4} mm");
    let _ = writeln!(text, "effort {um:.4} ± {us:.4}");
    ctx.write("simulate.txt", &text)?;
    Ok(text)
}

/// Co-design final time: the codesign value, the planning value, or `t_f_factor`
/// times the minimum time of the seed robot.
pub fn codesign_t_f(doc: &Document, opts: &Options) -> Result<f64, CliError> {
    if let Some(t) = doc.codesign.t_f_s.or(doc.planning.t_f_s) {
        return Ok(t);
    }
    let p = doc.codesign_problem(T_F_GUESS_S)?;
    let s = time_optimal(&p.seeded_problem(), opts)?;
    s.check()?;
    Ok(doc.planning.t_f_factor * s.t_f())
}

pub fn run_codesign_doc(doc: &Document, opts: &Options) -> Result<CodesignResult, CliError> {
    let t_f = codesign_t_f(doc, opts)?;
    Ok(run_codesign(&doc.codesign_problem(t_f)?, opts)?)
}

pub fn codesign_command(ctx: &Context) -> Result<String, CliError> {
    let r = run_codesign_doc(&ctx.doc, &ctx.opts)?;
    let n = r.model.n;
    ctx.write("design_report.txt", &r.report.to_text())?;
    ctx.write("design_report.csv", &r.report.to_csv())?;
    ctx.write("codesign_trajectory.csv", &trajectory_csv(&r.solution.trajectory, n))?;
    ctx.write("seeded_trajectory.csv", &trajectory_csv(&r.seeded.trajectory, n))?;
    let optimized: Vec<_> = r.designs.iter().map(|&d| MotorConfig::from(d)).collect();
    let mut doc = ctx.doc.clone();
    doc.motors = optimized;
    doc.codesign = Default::default();
    ctx.write("optimized.toml", &doc.to_toml())?;
    let mut text = r.report.to_text();
    let _ = writeln!(
        text,
        "seeded solve {} iterations, co-design {} iterations ({:.2} s)",
        r.seeded.iterations, r.solution.iterations, r.solution.solve_seconds
    );
    Ok(text)
}
