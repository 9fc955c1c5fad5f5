//! Simultaneous motor design and motion planning.

use crate::collocation::Ocp;
use crate::error::PlanError;
use crate::planning::{build_with_design, solve, DesignVars, PlanningProblem, RobotNlp, TorqueLimit, TrajectorySolution};
use mobman_core::config::MotorConfig;
use mobman_core::motor::{
    corner_electric_speed, derive_electromagnetics, design_feasibility, design_inequalities, envelope_from_em, flat_torque, MotorConstants,
    MotorDesign, BETA_BOX, BETA_NAMES,
};
use mobman_core::robot::RobotModel;
use mobman_nlp::Options;
use std::fmt::Write as _;

pub type DesignBox = [(f64, f64); 7];

#[derive(Clone, Debug)]
pub struct CodesignProblem {
    /// Reach task; its torque limit is replaced by the flat design-dependent bound.
    pub planning: PlanningProblem,
    /// Initial designs, one per arm motor.
    pub seed: Vec<MotorDesign>,
    /// Per-motor β boxes (mm).
    pub boxes: Vec<DesignBox>,
}

impl CodesignProblem {
    /// Seeds from the motors already in `planning.model`, with the standard boxes.
    pub fn new(planning: PlanningProblem) -> Self {
        let seed = planning.model.motors.clone();
        let boxes = vec![BETA_BOX; seed.len()];
        CodesignProblem { planning, seed, boxes }
    }

    /// Replaces the seed designs and rebuilds the model around them.
    pub fn with_seed(mut self, seed: Vec<MotorDesign>) -> Result<Self, PlanError> {
        let configs: Vec<MotorConfig> = seed.iter().map(|&d| d.into()).collect();
        self.planning.model = self.planning.model.with_motors(&configs)?;
        self.seed = seed;
        Ok(self)
    }

    /// Pins motor `r` at its seed.
    pub fn freeze(&mut self, r: usize) {
        let b = self.seed[r].beta();
        self.boxes[r] = b.map(|v| (v, v));
    }

    pub fn freeze_all(&mut self) {
        for r in 0..self.seed.len() {
            self.freeze(r);
        }
    }

    pub fn is_frozen(&self, r: usize) -> bool {
        self.boxes[r].iter().all(|(lo, hi)| lo == hi)
    }

    /// The seeded planning problem with flat torque limits.
    pub fn seeded_problem(&self) -> PlanningProblem {
        PlanningProblem { torque_limit: TorqueLimit::Flat, ..self.planning.clone() }
    }

    fn validate(&self) -> Result<(), PlanError> {
        let n = self.planning.model.n;
        if self.seed.len() != n || self.boxes.len() != n {
            return Err(PlanError::Shape(format!("expected {n} seed designs and boxes")));
        }
        for r in 0..n {
            if self.planning.model.motors[r].beta() != self.seed[r].beta() {
                return Err(PlanError::InfeasibleSeed(format!("motor {}: model and seed disagree", r + 3)));
            }
            let frozen = self.is_frozen(r);
            let beta = self.seed[r].beta();
            for (i, ((lo, hi), v)) in self.boxes[r].iter().zip(beta).enumerate() {
                let inside = if frozen { v == *lo } else { lo < hi && *lo < v && v < *hi };
                if !inside {
                    return Err(PlanError::InfeasibleSeed(format!(
                        "motor {}: {} = {v} not strictly inside [{lo}, {hi}]",
                        r + 3,
                        BETA_NAMES[i]
                    )));
                }
            }
            let bad = design_feasibility(&self.seed[r]);
            if !bad.is_empty() {
                let ids: Vec<String> = bad.iter().map(|c| format!("{} ({:.3e})", c.id, c.margin)).collect();
                return Err(PlanError::InfeasibleSeed(format!("motor {}: {}", r + 3, ids.join(", "))));
            }
        }
        Ok(())
    }
}

/// Co-design NLP: the flat-limit planning problem with `7n` normalized design
/// parameters appended. Design rows of frozen motors are dropped.
pub fn build_codesign_nlp(problem: &CodesignProblem) -> Result<RobotNlp, PlanError> {
    problem.validate()?;
    let n = problem.seed.len();
    let width: [f64; 7] = std::array::from_fn(|i| BETA_BOX[i].1 - BETA_BOX[i].0);
    let n_rows = design_inequalities(&problem.seed[0]).len();
    let rows = (0..n).filter(|&r| !problem.is_frozen(r)).flat_map(|r| (0..n_rows).map(move |i| (r, i))).collect();
    let design = DesignVars {
        seed: problem.seed.iter().map(|d| d.beta()).collect(),
        width,
        v_max: problem.seed.iter().map(|d| d.v_max).collect(),
        i_max: problem.seed.iter().map(|d| d.i_max).collect(),
        rows,
    };
    let mut lo = Vec::with_capacity(7 * n);
    let mut hi = Vec::with_capacity(7 * n);
    for r in 0..n {
        let beta = problem.seed[r].beta();
        for i in 0..7 {
            let (a, b) = problem.boxes[r][i];
            lo.push((a - beta[i]) / width[i]);
            hi.push((b - beta[i]) / width[i]);
        }
    }
    build_with_design(&problem.seeded_problem(), Some(design), (lo, hi), vec![0.0; 7 * n])
}

/// Designs encoded in a co-design solution vector.
pub fn decode_designs(nlp: &RobotNlp, w: &[f64]) -> Vec<MotorDesign> {
    let d = nlp.ocp.design.as_ref().expect("co-design NLP");
    let p = &w[nlp.param_index()..nlp.param_index() + 7 * d.seed.len()];
    d.designs(p)
}

/// Seed-versus-optimized figures of one motor.
#[derive(Clone, Debug, PartialEq)]
pub struct MotorComparison {
    pub joint: usize,
    pub seed: MotorDesign,
    pub optimized: MotorDesign,
    pub seed_mass: f64,
    pub optimized_mass: f64,
    pub seed_tau_flat: f64,
    pub optimized_tau_flat: f64,
    /// Rotor-side corner speed `ω_ce/p` (rad/s).
    pub seed_corner_speed: f64,
    pub optimized_corner_speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodesignReport {
    pub motors: Vec<MotorComparison>,
    pub seed_motor_mass: f64,
    pub optimized_motor_mass: f64,
    pub seed_effort: f64,
    pub optimized_effort: f64,
    /// Every planned torque also lies inside the full envelope of the optimized design.
    pub envelope_consistent: bool,
}

fn reduction(seed: f64, new: f64) -> f64 {
    if seed == 0.0 {
        0.0
    } else {
        100.0 * (seed - new) / seed
    }
}

impl CodesignReport {
    pub fn mass_reduction_pct(&self) -> f64 {
        reduction(self.seed_motor_mass, self.optimized_motor_mass)
    }

    pub fn effort_reduction_pct(&self) -> f64 {
        reduction(self.seed_effort, self.optimized_effort)
    }

    /// Per-motor rows: β (mm), mass (kg), τ_flat (N·m), ω_ce/p (rad/s).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("joint,quantity,seed,optimized,reduced_by_pct\n");
        for m in &self.motors {
            let (a, b) = (m.seed.beta(), m.optimized.beta());
            let mut rows: Vec<(String, f64, f64)> = (0..7).map(|i| (format!("{}_mm", BETA_NAMES[i]), a[i], b[i])).collect();
            rows.push(("mass_kg".into(), m.seed_mass, m.optimized_mass));
            rows.push(("tau_flat_nm".into(), m.seed_tau_flat, m.optimized_tau_flat));
            rows.push(("corner_speed_radps".into(), m.seed_corner_speed, m.optimized_corner_speed));
            for (q, x, y) in rows {
                let _ = writeln!(s, "{},{q},{x:.16e},{y:.16e},{:.16e}", m.joint, reduction(x, y));
            }
        }
        let _ = writeln!(
            s,
            "all,motor_mass_kg,{:.16e},{:.16e},{:.16e}",
            self.seed_motor_mass,
            self.optimized_motor_mass,
            self.mass_reduction_pct()
        );
        let _ = writeln!(s, "all,effort,{:.16e},{:.16e},{:.16e}", self.seed_effort, self.optimized_effort, self.effort_reduction_pct());
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:<20}{:>14}{:>14}{:>12}", "joint", "quantity", "seed", "optimized", "Reduced by");
        for m in &self.motors {
            let (a, b) = (m.seed.beta(), m.optimized.beta());
            for i in 0..7 {
                let q = format!("{} (mm)", BETA_NAMES[i]);
                let _ = writeln!(s, "{:<8}{q:<20}{:>14.4}{:>14.4}{:>11.2}%", m.joint, a[i], b[i], reduction(a[i], b[i]));
            }
            for (q, x, y) in [
                ("mass (kg)", m.seed_mass, m.optimized_mass),
                ("tau_flat (N m)", m.seed_tau_flat, m.optimized_tau_flat),
                ("w_ce/p (rad/s)", m.seed_corner_speed, m.optimized_corner_speed),
            ] {
                let _ = writeln!(s, "{:<8}{q:<20}{x:>14.4}{y:>14.4}{:>11.2}%", m.joint, reduction(x, y));
            }
        }
        let _ = writeln!(
            s,
            "{:<8}{:<20}{:>14.4}{:>14.4}{:>11.2}%",
            "all",
            "motor mass (kg)",
            self.seed_motor_mass,
            self.optimized_motor_mass,
            self.mass_reduction_pct()
        );
        let _ = writeln!(
            s,
            "{:<8}{:<20}{:>14.4}{:>14.4}{:>11.2}%",
            "all",
            "effort",
            self.seed_effort,
            self.optimized_effort,
            self.effort_reduction_pct()
        );
        s
    }
}

#[derive(Clone, Debug)]
pub struct CodesignResult {
    pub designs: Vec<MotorDesign>,
    /// Model rebuilt with the optimized motors.
    pub model: RobotModel,
    pub solution: TrajectorySolution,
    /// Planning at the seed designs, which also warm-starts the co-design solve.
    pub seeded: TrajectorySolution,
    pub report: CodesignReport,
}

fn motor_figures(d: &MotorDesign) -> Result<(f64, f64, f64), PlanError> {
    let em = derive_electromagnetics(d)?;
    let p = MotorConstants::standard().p;
    Ok((em.m_stator + em.m_rotor, flat_torque(&em, d.i_max), corner_electric_speed(&em, d.v_max, d.i_max) / p))
}

/// Whether every planned torque sits inside the full envelope of `designs`.
fn envelope_check(model: &RobotModel, designs: &[MotorDesign], sol: &TrajectorySolution) -> Result<bool, PlanError> {
    let t = &sol.trajectory;
    let dof = model.dof();
    for (r, d) in designs.iter().enumerate() {
        let em = derive_electromagnetics(d)?;
        let env = envelope_from_em(&em, d.v_max, d.i_max)?;
        let z = model.gear_ratios[r];
        for (k, u) in t.controls.iter().enumerate() {
            for x in &t.states[k][1..] {
                let (tm, _) = env.tau_max(z * x[dof + 3 + r]);
                if u[3 + r].abs() > tm + 1e-8 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Solves the seeded problem, then the co-design problem warm-started from it.
pub fn run_codesign(problem: &CodesignProblem, opts: &Options) -> Result<CodesignResult, PlanError> {
    let nlp = build_codesign_nlp(problem)?;
    let seeded_nlp = crate::planning::build_integrated_ocp(&problem.seeded_problem())?;
    let seeded = solve(&seeded_nlp, None, opts)?;
    seeded.check()?;

    let mut warm = seeded.trajectory.clone();
    warm.params = vec![0.0; nlp.ocp.param_dim()];
    let init = nlp.encode(&warm)?;
    let solution = solve(&nlp, Some(&init), opts)?;
    solution.check()?;

    let designs = decode_designs(&nlp, &solution.x);
    let configs: Vec<MotorConfig> = designs.iter().map(|&d| d.into()).collect();
    let model = problem.planning.model.with_motors(&configs)?;

    let mut motors = Vec::with_capacity(designs.len());
    for (r, (s, o)) in problem.seed.iter().zip(&designs).enumerate() {
        let (sm, st, sw) = motor_figures(s)?;
        let (om, ot, ow) = motor_figures(o)?;
        motors.push(MotorComparison {
            joint: r + 3,
            seed: *s,
            optimized: *o,
            seed_mass: sm,
            optimized_mass: om,
            seed_tau_flat: st,
            optimized_tau_flat: ot,
            seed_corner_speed: sw,
            optimized_corner_speed: ow,
        });
    }
    let report = CodesignReport {
        seed_motor_mass: problem.planning.model.motor_mass(),
        optimized_motor_mass: model.motor_mass(),
        seed_effort: seeded.effort,
        optimized_effort: solution.effort,
        envelope_consistent: envelope_check(&model, &designs, &solution)?,
        motors,
    };
    Ok(CodesignResult { designs, model, solution, seeded, report })
}
