//! Integrated base+arm planning, the sequential benchmark and closed-loop PID
//! simulation.

use crate::collocation::{transcribe, Bounds, CollocationScheme, Ocp, TimeMode, Trajectory, Transcription, TranscriptionSpec};
use crate::error::PlanError;
use mobman_core::dynamics::{inverse_dynamics, state_derivative, Acceleration};
use mobman_core::motor::{
    corner_electric_speed, design_inequalities, electromagnetics_unchecked, envelope_from_em, flat_torque, is_strict, MotorConstants,
    MotorDesign, TorqueEnvelope, STRICT_EPS,
};
use mobman_core::robot::{Inertias, RobotModel, RobotState};
use mobman_core::Scalar;
use mobman_nlp::{solve as nlp_solve, NlpProblem, Options, Status};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `∫‖u‖² dt` at a fixed final time.
    MinEffort,
    /// Final time as a decision variable.
    MinTime,
}

/// How motor torque is limited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorqueLimit {
    /// Speed-dependent envelope `|τ| ≤ τ_max(Z·θ̇)`.
    Envelope,
    /// `|τ| ≤ τ_flat` and `|θ̇| ≤ ω_ce/(Z·p)`.
    Flat,
}

#[derive(Clone, Debug)]
pub struct PlanningProblem {
    pub model: RobotModel,
    pub x0: Vec<f64>,
    /// Desired end-effector position (m).
    pub target: [f64; 3],
    /// Final time, or the initial guess in min-time mode.
    pub t_f: f64,
    /// Final-time box in min-time mode.
    pub t_f_bounds: (f64, f64),
    pub n_intervals: usize,
    pub n_p: usize,
    pub state_bounds: Bounds,
    /// Base input box `(τz, fx, fy)`.
    pub base_force_bounds: Bounds,
    pub torque_limit: TorqueLimit,
    pub objective: Objective,
    /// Hold the base (fixed-arm planning).
    pub fixed_base: bool,
}

impl PlanningProblem {
    /// Reach task from rest at `x0` with default bounds: ±10 m and ±π rad positions,
    /// ±2 m/s and ±3 rad/s velocities, ±10 N·m/N base input.
    pub fn new(model: RobotModel, x0: Vec<f64>, target: [f64; 3], t_f: f64) -> Self {
        let n = model.n;
        let pi = std::f64::consts::PI;
        let mut hi = vec![pi, 10.0, 10.0];
        hi.extend(vec![pi; n]);
        hi.extend([3.0, 2.0, 2.0]);
        hi.extend(vec![3.0; n]);
        let lo = hi.iter().map(|v| -v).collect();
        PlanningProblem {
            model,
            x0,
            target,
            t_f,
            t_f_bounds: (0.05, 60.0),
            n_intervals: 20,
            n_p: 1,
            state_bounds: (lo, hi),
            base_force_bounds: (vec![-10.0; 3], vec![10.0; 3]),
            torque_limit: TorqueLimit::Envelope,
            objective: Objective::MinEffort,
            fixed_base: false,
        }
    }

    fn validate(&self) -> Result<(), PlanError> {
        let sd = self.model.state_dim();
        if self.x0.len() != sd {
            return Err(PlanError::Shape(format!("x0 has length {}, expected {sd}", self.x0.len())));
        }
        if !self.target.iter().all(|v| v.is_finite()) {
            return Err(PlanError::InfeasibleBounds("target is not finite".into()));
        }
        if !(self.t_f > 0.0) {
            return Err(PlanError::InfeasibleBounds(format!("final time {}", self.t_f)));
        }
        for (name, b, len) in [("state", &self.state_bounds, sd), ("base input", &self.base_force_bounds, 3)] {
            if b.0.len() != len || b.1.len() != len {
                return Err(PlanError::Shape(format!("{name} bounds must have length {len}")));
            }
            if let Some(i) = (0..len).find(|&i| !(b.0[i] <= b.1[i])) {
                return Err(PlanError::InfeasibleBounds(format!("{name}[{i}]: {} > {}", b.0[i], b.1[i])));
            }
        }
        Ok(())
    }
}

/// Per-motor torque limits at a fixed design.
#[derive(Clone, Debug)]
struct MotorLimit {
    envelope: TorqueEnvelope,
    tau_flat: f64,
    /// Joint-side speed limit `ω_ce/(Z·p)`.
    joint_speed: f64,
}

/// Motor designs as NLP parameters: `β = seed + p ⊙ width`.
#[derive(Clone, Debug)]
pub(crate) struct DesignVars {
    pub seed: Vec<[f64; 7]>,
    pub width: [f64; 7],
    pub v_max: Vec<f64>,
    pub i_max: Vec<f64>,
    /// `(motor, index into design_inequalities)` rows kept in the NLP.
    pub rows: Vec<(usize, usize)>,
}

impl DesignVars {
    pub fn designs<S: Scalar>(&self, p: &[S]) -> Vec<MotorDesign<S>> {
        (0..self.seed.len())
            .map(|r| {
                let beta: Vec<S> = (0..7).map(|i| p[7 * r + i] * self.width[i] + self.seed[r][i]).collect();
                MotorDesign::from_beta(&beta, self.v_max[r], self.i_max[r])
            })
            .collect()
    }
}

/// The robot optimal control problem.
#[derive(Clone, Debug)]
pub struct RobotOcp {
    model: RobotModel,
    inertias: Inertias<f64>,
    limits: Vec<MotorLimit>,
    torque_limit: TorqueLimit,
    objective: Objective,
    target: [f64; 3],
    fixed_base: bool,
    pub(crate) design: Option<DesignVars>,
}

fn lift_inertias<S: Scalar>(i: &Inertias<f64>) -> Inertias<S> {
    let lift = |m: &[[f64; 6]; 6]| m.map(|row| row.map(S::cst));
    Inertias { links: i.links.iter().map(lift).collect(), rotors: i.rotors.iter().map(lift).collect() }
}

impl RobotOcp {
    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn target(&self) -> [f64; 3] {
        self.target
    }

    fn ee<S: Scalar>(&self, x: &[S]) -> [S; 3] {
        self.model.end_effector_position(&[x[0], x[1], x[2]], &x[3..3 + self.model.n])
    }
}

impl Ocp for RobotOcp {
    fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    fn control_dim(&self) -> usize {
        self.model.dof()
    }

    fn param_dim(&self) -> usize {
        self.design.as_ref().map_or(0, |d| 7 * d.seed.len())
    }

    fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], p: &[S]) -> Vec<S> {
        let inertias = match &self.design {
            Some(d) => match self.model.inertias_for_designs(&d.designs(p)) {
                Ok(i) => i,
                Err(_) => return vec![S::cst(f64::NAN); x.len()],
            },
            None => lift_inertias(&self.inertias),
        };
        state_derivative(&self.model, &inertias, x, u, self.fixed_base).unwrap_or_else(|_| vec![S::cst(f64::NAN); x.len()])
    }

    fn running_cost<S: Scalar>(&self, _x: &[S], u: &[S], _p: &[S]) -> S {
        u.iter().fold(S::zero(), |a, &v| a + v * v)
    }

    fn has_running_cost(&self) -> bool {
        self.objective == Objective::MinEffort
    }

    fn terminal_cost<S: Scalar>(&self, _x: &[S], t_f: S, _p: &[S]) -> S {
        match self.objective {
            Objective::MinTime => t_f,
            Objective::MinEffort => S::zero(),
        }
    }

    fn path_constraints<S: Scalar>(&self, x: &[S], u: &[S], p: &[S]) -> Vec<S> {
        let n = self.model.n;
        let dof = self.model.dof();
        let mut g = Vec::with_capacity(4 * n);
        let designs = self.design.as_ref().map(|d| (d, d.designs(p)));
        let pp = MotorConstants::standard().p;
        for r in 0..n {
            let tau = u[3 + r];
            let qd = x[dof + 3 + r];
            let z = self.model.gear_ratios[r];
            match self.torque_limit {
                TorqueLimit::Envelope => {
                    let (tm, _) = self.limits[r].envelope.tau_max(qd * z);
                    g.push(tm - tau);
                    g.push(tm + tau);
                }
                TorqueLimit::Flat => {
                    let (tf, w) = match &designs {
                        Some((d, ds)) => {
                            let em = electromagnetics_unchecked(&ds[r]);
                            (flat_torque(&em, d.i_max[r]), corner_electric_speed(&em, d.v_max[r], d.i_max[r]) / (z * pp))
                        }
                        None => (S::cst(self.limits[r].tau_flat), S::cst(self.limits[r].joint_speed)),
                    };
                    g.push(tf - tau);
                    g.push(tf + tau);
                    g.push(w - qd);
                    g.push(w + qd);
                }
            }
        }
        g
    }

    fn path_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let per = match self.torque_limit {
            TorqueLimit::Envelope => 2,
            TorqueLimit::Flat => 4,
        };
        let m = per * self.model.n;
        (vec![0.0; m], vec![f64::INFINITY; m])
    }

    fn terminal_constraints<S: Scalar>(&self, x: &[S], _p: &[S]) -> Vec<S> {
        let e = self.ee(x);
        (0..3).map(|i| e[i] - self.target[i]).collect()
    }

    fn terminal_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 3], vec![0.0; 3])
    }

    fn param_constraints<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        let Some(d) = &self.design else { return vec![] };
        let ds = d.designs(p);
        let all: Vec<Vec<S>> = ds.iter().map(|x| design_inequalities(x).into_iter().map(|(_, g)| g).collect()).collect();
        d.rows.iter().map(|&(r, i)| all[r][i]).collect()
    }

    fn param_constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let Some(d) = &self.design else { return (vec![], vec![]) };
        let names: Vec<&str> =
            design_inequalities(&MotorDesign::<f64>::from_beta(&d.seed[0], d.v_max[0], d.i_max[0])).into_iter().map(|(n, _)| n).collect();
        let lo = d.rows.iter().map(|&(_, i)| if is_strict(names[i]) { STRICT_EPS } else { 0.0 }).collect();
        (lo, vec![f64::INFINITY; d.rows.len()])
    }
}

pub type RobotNlp = Transcription<RobotOcp>;

fn motor_limits(model: &RobotModel) -> Result<Vec<MotorLimit>, PlanError> {
    let p = MotorConstants::standard().p;
    model
        .motor_em
        .iter()
        .zip(&model.motors)
        .zip(&model.gear_ratios)
        .map(|((em, d), z)| {
            Ok(MotorLimit {
                envelope: envelope_from_em(em, d.v_max, d.i_max)?,
                tau_flat: flat_torque(em, d.i_max),
                joint_speed: corner_electric_speed(em, d.v_max, d.i_max) / (z * p),
            })
        })
        .collect()
}

pub(crate) fn build_with_design(
    problem: &PlanningProblem,
    design: Option<DesignVars>,
    param_bounds: Bounds,
    param_init: Vec<f64>,
) -> Result<RobotNlp, PlanError> {
    problem.validate()?;
    let model = &problem.model;
    let dof = model.dof();
    let ocp = RobotOcp {
        model: model.clone(),
        inertias: model.inertias.clone(),
        limits: motor_limits(model)?,
        torque_limit: problem.torque_limit,
        objective: problem.objective,
        target: problem.target,
        fixed_base: problem.fixed_base,
        design,
    };
    let (mut tlo, mut thi) = problem.state_bounds.clone();
    for i in dof..2 * dof {
        tlo[i] = 0.0;
        thi[i] = 0.0;
    }
    let mut ulo = problem.base_force_bounds.0.clone();
    let mut uhi = problem.base_force_bounds.1.clone();
    if problem.fixed_base {
        ulo = vec![0.0; 3];
        uhi = vec![0.0; 3];
    }
    ulo.extend(vec![f64::NEG_INFINITY; model.n]);
    uhi.extend(vec![f64::INFINITY; model.n]);
    let time = match problem.objective {
        Objective::MinEffort => TimeMode::Fixed(problem.t_f),
        Objective::MinTime => {
            let (lo, hi) = problem.t_f_bounds;
            TimeMode::Free { init: problem.t_f.clamp(lo, hi), lo, hi }
        }
    };
    transcribe(
        ocp,
        TranscriptionSpec {
            n_intervals: problem.n_intervals,
            scheme: CollocationScheme::gauss(problem.n_p)?,
            time,
            x0: problem.x0.clone(),
            state_bounds: problem.state_bounds.clone(),
            terminal_state_bounds: Some((tlo, thi)),
            control_bounds: (ulo, uhi),
            param_bounds,
            param_init,
        },
    )
}

/// Transcribes the integrated planning problem.
pub fn build_integrated_ocp(problem: &PlanningProblem) -> Result<RobotNlp, PlanError> {
    build_with_design(problem, None, (vec![], vec![]), vec![])
}

/// Initial guess: `x0` held at every node, zero controls.
pub fn hold_guess(nlp: &RobotNlp) -> Vec<f64> {
    let mut w = nlp.initial_guess();
    let s = &nlp.spec;
    let sd = s.x0.len();
    for k in 0..=s.n_intervals {
        let js = if k == s.n_intervals { 1 } else { s.scheme.n_p + 1 };
        for j in 0..js {
            let a = nlp.x_index(k, j);
            w[a..a + sd].copy_from_slice(&s.x0);
        }
    }
    w
}

#[derive(Clone, Debug)]
pub struct TrajectorySolution {
    pub trajectory: Trajectory,
    pub status: Status,
    pub objective: f64,
    /// `∫‖u‖² dt` of the planned controls.
    pub effort: f64,
    pub iterations: usize,
    /// Largest defect or continuity residual.
    pub max_defect: f64,
    /// Smallest slack over torque, speed and design rows.
    pub min_slack: f64,
    /// Planned terminal end-effector error (m).
    pub terminal_error: f64,
    pub solve_seconds: f64,
    /// Raw NLP solution vector (for warm starts).
    pub x: Vec<f64>,
}

impl TrajectorySolution {
    pub fn t_f(&self) -> f64 {
        self.trajectory.t_f
    }

    pub fn is_success(&self) -> bool {
        self.status == Status::Success
    }

    /// `Err` unless the solver converged.
    pub fn check(&self) -> Result<(), PlanError> {
        match &self.status {
            Status::Success => Ok(()),
            Status::MaxIterations => Err(PlanError::MaxIterations(self.iterations)),
            Status::Breakdown(m) => Err(PlanError::SolverBreakdown(m.clone())),
        }
    }
}

/// Effort `(t_f/N)·Σ_k ‖u_k‖²` of a collocation trajectory.
pub fn trajectory_effort(t: &Trajectory) -> f64 {
    t.dt() * t.controls.iter().map(|u| u.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
}

/// Solves a transcribed problem from `init` (the hold guess when `None`).
pub fn solve(nlp: &RobotNlp, init: Option<&[f64]>, opts: &Options) -> Result<TrajectorySolution, PlanError> {
    let w0 = match init {
        Some(w) if w.len() != nlp.num_variables() => {
            return Err(PlanError::Shape(format!("initial guess has length {}, expected {}", w.len(), nlp.num_variables())))
        }
        Some(w) => w.to_vec(),
        None => hold_guess(nlp),
    };
    let start = Instant::now();
    let sol = nlp_solve(nlp, &w0, opts);
    let solve_seconds = start.elapsed().as_secs_f64();
    let trajectory = nlp.decode(&sol.x);
    let ocp = &nlp.ocp;
    let ee = ocp.ee(&trajectory.x_final);
    let terminal_error = (0..3).map(|i| (ee[i] - ocp.target[i]).powi(2)).sum::<f64>().sqrt();
    Ok(TrajectorySolution {
        effort: trajectory_effort(&trajectory),
        trajectory,
        status: sol.status,
        objective: sol.objective,
        iterations: sol.iterations,
        max_defect: nlp.max_defect(&sol.x),
        min_slack: nlp.min_slack(&sol.x),
        terminal_error,
        solve_seconds,
        x: sol.x,
    })
}

/// Builds and solves.
pub fn plan(problem: &PlanningProblem, opts: &Options) -> Result<TrajectorySolution, PlanError> {
    solve(&build_integrated_ocp(problem)?, None, opts)
}

/// Solves the min-time variant of `problem`.
pub fn time_optimal(problem: &PlanningProblem, opts: &Options) -> Result<TrajectorySolution, PlanError> {
    let p = PlanningProblem { objective: Objective::MinTime, ..problem.clone() };
    plan(&p, opts)
}

/// One axis of the sequential base motion: piecewise-linear acceleration with
/// peak `a_m`, reaching `p_f` at rest at `t_f1 = √(8·p_f/a_m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseProfile {
    pub a_m: f64,
    pub p_f: f64,
    pub t_f1: f64,
}

impl BaseProfile {
    /// Profile toward `p_f` (either sign) with peak acceleration `a_m > 0`.
    pub fn new(a_m: f64, p_f: f64) -> Self {
        BaseProfile { a_m, p_f, t_f1: (8.0 * p_f.abs() / a_m).sqrt() }
    }

    /// `(a, v, p)` at `t`; constant before 0 and after `t_f1`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let tf = self.t_f1;
        if tf == 0.0 || t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= tf {
            let s = if self.p_f < 0.0 { -1.0 } else { 1.0 };
            return (0.0, 0.0, s * self.a_m * tf * tf / 8.0);
        }
        let piece = if t <= tf / 4.0 {
            0
        } else if t <= 3.0 * tf / 4.0 {
            1
        } else {
            2
        };
        self.eval_piece(piece, t)
    }

    /// Polynomial piece 0, 1 or 2 evaluated at any `t`.
    pub fn eval_piece(&self, piece: usize, t: f64) -> (f64, f64, f64) {
        let tf = self.t_f1;
        let am = self.a_m;
        let s = if self.p_f < 0.0 { -1.0 } else { 1.0 };
        let (a, v, p) = match piece {
            0 => (4.0 * am / tf * t, 2.0 * am / tf * t * t, 2.0 * am / (3.0 * tf) * t.powi(3)),
            1 => {
                let h = t - 0.5 * tf;
                (
                    -4.0 * am / tf * t + 2.0 * am,
                    -2.0 * am / tf * h * h + am * tf / 4.0,
                    -2.0 * am / (3.0 * tf) * h.powi(3) + (4.0 * am * tf * t - am * tf * tf) / 16.0,
                )
            }
            _ => {
                let h = t - tf;
                (4.0 * am / tf * t - 4.0 * am, 2.0 * am / tf * h * h, 2.0 * am / (3.0 * tf) * h.powi(3) + am * tf * tf / 8.0)
            }
        };
        (s * a, s * v, s * p)
    }
}

/// Independent x/y profiles for the first sequential phase.
pub fn sequential_base_trajectory(a_m: [f64; 2], p_f: [f64; 2]) -> [BaseProfile; 2] {
    [BaseProfile::new(a_m[0], p_f[0]), BaseProfile::new(a_m[1], p_f[1])]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialOptions {
    /// Peak base acceleration per axis (m/s²).
    pub a_m: [f64; 2],
    /// Horizontal distance between the base stop and the target projection (m).
    /// When unset, the smallest reach error along the approach line decides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standoff_m: Option<f64>,
}

impl Default for SequentialOptions {
    fn default() -> Self {
        SequentialOptions { a_m: [0.25, 0.25], standoff_m: None }
    }
}

/// Two-phase plan: base profile with the arm held, then a fixed-base arm motion.
#[derive(Clone, Debug)]
pub struct SequentialPlan {
    pub profiles: [BaseProfile; 2],
    pub q1_start: [f64; 3],
    pub theta0: Vec<f64>,
    /// Gravity-compensating arm torque held during phase 1.
    pub hold_torque: Vec<f64>,
    pub total_mass: f64,
    pub t_f1: f64,
    pub arm: TrajectorySolution,
}

impl SequentialPlan {
    pub fn completion_time(&self) -> f64 {
        self.t_f1 + self.arm.t_f()
    }

    /// Planned effort: phase-1 feedforward plus the phase-2 plan.
    pub fn planned_effort(&self) -> f64 {
        let steps = 4000;
        let h = self.t_f1 / steps as f64;
        let th: f64 = self.hold_torque.iter().map(|v| v * v).sum();
        let mut e = 0.0;
        for i in 0..steps {
            let t = (i as f64 + 0.5) * h;
            let ax = self.profiles[0].eval(t).0 * self.total_mass;
            let ay = self.profiles[1].eval(t).0 * self.total_mass;
            e += h * (ax * ax + ay * ay + th);
        }
        e + self.arm.effort
    }
}

/// Arm configuration closest to `target` with the base fixed at `q1`
/// (damped Gauss-Newton from `theta`). Returns it with the remaining distance.
pub fn arm_ik(model: &RobotModel, q1: [f64; 3], theta: &[f64], target: [f64; 3]) -> (Vec<f64>, f64) {
    let n = theta.len();
    let resid = |th: &[f64]| {
        let p = model.end_effector_position(&q1, th);
        [p[0] - target[0], p[1] - target[1], p[2] - target[2]]
    };
    let norm = |r: &[f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let mut th = theta.to_vec();
    let mut r = resid(&th);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        if norm(&r) < 1e-13 {
            break;
        }
        let h = 1e-7;
        let mut jac = vec![[0.0; 3]; n];
        for c in 0..n {
            let mut a = th.clone();
            let mut b = th.clone();
            a[c] += h;
            b[c] -= h;
            let (ra, rb) = (resid(&a), resid(&b));
            for i in 0..3 {
                jac[c][i] = (ra[i] - rb[i]) / (2.0 * h);
            }
        }
        let mut jtj = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut jtr = nalgebra::DVector::<f64>::zeros(n);
        for a in 0..n {
            for b in 0..n {
                jtj[(a, b)] = (0..3).map(|i| jac[a][i] * jac[b][i]).sum();
            }
            jtr[a] = (0..3).map(|i| jac[a][i] * r[i]).sum();
        }
        let mut improved = false;
        while lambda < 1e8 {
            let mut m = jtj.clone();
            for a in 0..n {
                m[(a, a)] += lambda * (1.0 + jtj[(a, a)]);
            }
            let Some(step) = m.lu().solve(&jtr) else { break };
            let cand: Vec<f64> = th.iter().zip(step.iter()).map(|(t, d)| t - d).collect();
            let rc = resid(&cand);
            if norm(&rc) < norm(&r) {
                th = cand;
                r = rc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (th, norm(&r))
}

/// Standoff in `[0, dist]` minimizing the arm's reach error, by golden-section search.
fn reach_standoff(model: &RobotModel, start: &RobotState, dir: [f64; 2], target: [f64; 3], dist: f64) -> f64 {
    let err = |s: f64| {
        let t = dist - s;
        let q1 = [start.q1[0], start.q1[1] + t * dir[0], start.q1[2] + t * dir[1]];
        arm_ik(model, q1, &start.theta, target).1
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, dist);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (err(c), err(d));
    while b - a > 1e-9 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = err(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = err(d);
        }
    }
    0.5 * (a + b)
}

/// Plans the sequential benchmark for `problem` (its base must start at rest).
pub fn plan_sequential(problem: &PlanningProblem, seq: &SequentialOptions, opts: &Options) -> Result<SequentialPlan, PlanError> {
    problem.validate()?;
    let model = &problem.model;
    let n = model.n;
    let start = RobotState::from_vector(&problem.x0);
    let (bx, by) = (start.q1[1], start.q1[2]);
    let (dx, dy) = (problem.target[0] - bx, problem.target[1] - by);
    let dist = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = if dist > 0.0 { (dx / dist, dy / dist) } else { (0.0, 0.0) };
    let standoff = match seq.standoff_m {
        Some(s) if s.is_finite() && s >= 0.0 => s,
        Some(s) => return Err(PlanError::Config(format!("standoff_m = {s} must be finite and non-negative"))),
        None => reach_standoff(model, &start, [ux, uy], problem.target, dist),
    };
    let travel = (dist - standoff).max(0.0);
    let profiles = sequential_base_trajectory(seq.a_m, [travel * ux, travel * uy]);
    let t_f1 = profiles[0].t_f1.max(profiles[1].t_f1);

    let mut rest = RobotState { theta_dot: vec![0.0; n], q1_dot: [0.0; 3], ..start.clone() };
    let hold = inverse_dynamics(model, &rest, &Acceleration::zeros(n))?;

    rest.q1 = [start.q1[0], bx + profiles[0].p_f, by + profiles[1].p_f];
    let arm_problem = PlanningProblem { x0: rest.to_vector(), fixed_base: true, objective: Objective::MinTime, ..problem.clone() };
    let arm = plan(&arm_problem, opts)?;
    Ok(SequentialPlan {
        profiles,
        q1_start: start.q1,
        theta0: start.theta.clone(),
        hold_torque: hold.tau,
        total_mass: model.total_mass(),
        t_f1,
        arm,
    })
}

/// Desired state and feedforward input over time.
pub trait Reference {
    fn desired(&self, t: f64) -> (Vec<f64>, Vec<f64>);
}

/// Tracks a collocation trajectory with its controls as feedforward.
pub struct PlanReference<'a>(pub &'a Trajectory);

impl Reference for PlanReference<'_> {
    fn desired(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (self.0.state_at(t), self.0.control_at(t))
    }
}

/// A constant set point with constant feedforward.
pub struct HoldReference {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl Reference for HoldReference {
    fn desired(&self, _t: f64) -> (Vec<f64>, Vec<f64>) {
        (self.x.clone(), self.u.clone())
    }
}

impl Reference for SequentialPlan {
    fn desired(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if t < self.t_f1 {
            let n = self.theta0.len();
            let (ax, vx, px) = self.profiles[0].eval(t);
            let (ay, vy, py) = self.profiles[1].eval(t);
            let s = RobotState {
                q1: [self.q1_start[0], self.q1_start[1] + px, self.q1_start[2] + py],
                theta: self.theta0.clone(),
                q1_dot: [0.0, vx, vy],
                theta_dot: vec![0.0; n],
            };
            let mut u = vec![0.0, self.total_mass * ax, self.total_mass * ay];
            u.extend(&self.hold_torque);
            (s.to_vector(), u)
        } else {
            let tr = &self.arm.trajectory;
            let mut u = tr.control_at(t - self.t_f1);
            u[..3].iter_mut().for_each(|v| *v = 0.0);
            (tr.state_at(t - self.t_f1), u)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub arm_kp: Vec<f64>,
    pub arm_ki: Vec<f64>,
    pub arm_kd: Vec<f64>,
    /// Diagonals for `(θz, x, y)`.
    pub base_kp: [f64; 3],
    pub base_ki: [f64; 3],
    pub base_kd: [f64; 3],
}

impl PidGains {
    /// Hand-tuned gains for the desk model (arm gains act on rotor torque).
    pub fn desk(n: usize) -> Self {
        PidGains {
            arm_kp: vec![2.0; n],
            arm_ki: vec![0.5; n],
            arm_kd: vec![0.15; n],
            base_kp: [20.0, 400.0, 400.0],
            base_ki: [2.0, 40.0, 40.0],
            base_kd: [8.0, 200.0, 200.0],
        }
    }

    pub fn zero(n: usize) -> Self {
        PidGains {
            arm_kp: vec![0.0; n],
            arm_ki: vec![0.0; n],
            arm_kd: vec![0.0; n],
            base_kp: [0.0; 3],
            base_ki: [0.0; 3],
            base_kd: [0.0; 3],
        }
    }

    fn diagonal(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), PlanError> {
        let cat = |b: &[f64; 3], a: &[f64]| b.iter().chain(a).copied().collect::<Vec<f64>>();
        let g = (cat(&self.base_kp, &self.arm_kp), cat(&self.base_ki, &self.arm_ki), cat(&self.base_kd, &self.arm_kd));
        if [&g.0, &g.1, &g.2].iter().any(|v| v.iter().any(|x| !(*x >= 0.0))) {
            return Err(PlanError::Config("PID gains must be non-negative".into()));
        }
        Ok(g)
    }
}

/// Measurement noise variances per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub joint_pos: f64,
    pub joint_vel: f64,
    pub yaw_pos: f64,
    pub yaw_vel: f64,
    pub base_pos: f64,
    pub base_vel: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// The variances used in the noisy tracking experiment.
    pub fn paper(seed: u64) -> Self {
        NoiseSpec { joint_pos: 1e-5, joint_vel: 1e-5, yaw_pos: 5.24e-3, yaw_vel: 1.75e-3, base_pos: 0.02, base_vel: 0.006, seed }
    }

    fn std_devs(&self, n: usize) -> Result<Vec<f64>, PlanError> {
        let v = [self.joint_pos, self.joint_vel, self.yaw_pos, self.yaw_vel, self.base_pos, self.base_vel];
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(PlanError::Config("noise variances must be non-negative".into()));
        }
        let mut s = vec![self.yaw_pos.sqrt(), self.base_pos.sqrt(), self.base_pos.sqrt()];
        s.extend(vec![self.joint_pos.sqrt(); n]);
        s.extend([self.yaw_vel.sqrt(), self.base_vel.sqrt(), self.base_vel.sqrt()]);
        s.extend(vec![self.joint_vel.sqrt(); n]);
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Applied input over `[t_i, t_{i+1})`; one fewer than the states.
    pub controls: Vec<Vec<f64>>,
    /// Applied `∫‖u‖² dt`.
    pub effort: f64,
    /// Largest `‖q − q_des‖∞` over the rollout.
    pub max_tracking_error: f64,
}

impl Rollout {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("rollout has at least one state")
    }

    /// End-effector distance to `target` at the last state (m).
    pub fn end_effector_error(&self, model: &RobotModel, target: [f64; 3]) -> f64 {
        let x = self.final_state();
        let e = model.end_effector_position(&[x[0], x[1], x[2]], &x[3..3 + model.n]);
        (0..3).map(|i| (e[i] - target[i]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Integrates the closed loop `u = u_ff + K_P e + K_I ∫e + K_D ė` with RK4 and a
/// zero-order hold on `u`. With noise, feedback uses the true state plus Gaussian noise.
pub fn simulate_closed_loop(
    model: &RobotModel,
    reference: &dyn Reference,
    x0: &[f64],
    gains: &PidGains,
    noise: Option<&NoiseSpec>,
    dt: f64,
    t_end: f64,
) -> Result<Rollout, PlanError> {
    let dof = model.dof();
    if x0.len() != 2 * dof {
        return Err(PlanError::Shape(format!("x0 has length {}, expected {}", x0.len(), 2 * dof)));
    }
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(PlanError::Config(format!("time step {dt} must be in (0, 1e-3]")));
    }
    let (kp, ki, kd) = gains.diagonal()?;
    if kp.len() != dof || ki.len() != dof || kd.len() != dof {
        return Err(PlanError::Shape(format!("PID gains need {} arm entries", model.n)));
    }
    let mut rng = noise.map(|s| ChaCha8Rng::seed_from_u64(s.seed));
    let sigma = noise.map(|s| s.std_devs(model.n)).transpose()?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let f = |x: &[f64], u: &[f64]| -> Result<Vec<f64>, PlanError> { Ok(state_derivative(model, &model.inertias, x, u, false)?) };

    let steps = (t_end / dt).round() as usize;
    let mut x = x0.to_vec();
    let mut integral = vec![0.0; dof];
    let mut out = Rollout { times: vec![0.0], states: vec![x.clone()], controls: vec![], effort: 0.0, max_tracking_error: 0.0 };
    for s in 0..steps {
        let t = s as f64 * dt;
        let (xd, uff) = reference.desired(t);
        let mut meas = x.clone();
        if let (Some(r), Some(sig)) = (rng.as_mut(), &sigma) {
            for (m, sd) in meas.iter_mut().zip(sig) {
                *m += sd * std_normal.sample(r);
            }
        }
        let mut u = uff.clone();
        let mut track = 0.0f64;
        for i in 0..dof {
            let e = xd[i] - meas[i];
            let ed = xd[dof + i] - meas[dof + i];
            u[i] += kp[i] * e + ki[i] * integral[i] + kd[i] * ed;
            integral[i] += e * dt;
            track = track.max((xd[i] - x[i]).abs());
        }
        out.max_tracking_error = out.max_tracking_error.max(track);
        let k1 = f(&x, &u)?;
        let xa: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = f(&xa, &u)?;
        let xb: Vec<f64> = x.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = f(&xb, &u)?;
        let xc: Vec<f64> = x.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = f(&xc, &u)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
            return Err(PlanError::IntegrationDiverged(t + dt));
        }
        out.effort += dt * u.iter().map(|v| v * v).sum::<f64>();
        out.controls.push(u);
        out.times.push(t + dt);
        out.states.push(x.clone());
    }
    Ok(out)
}

/// Closed-loop metrics of one method, mirroring the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub name: String,
    pub time_s: f64,
    pub effort: f64,
    pub error_mm: f64,
    pub success: bool,
}

impl Metrics {
    pub fn header() -> &'static str {
        "name,time_s,effort,error_mm,success"
    }

    pub fn row(&self) -> String {
        format!("{},{:.16e},{:.16e},{:.16e},{}", self.name, self.time_s, self.effort, self.error_mm, self.success)
    }
}
