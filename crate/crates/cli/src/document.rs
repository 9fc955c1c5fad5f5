//! The TOML configuration document. Units are part of every key name.

use mobman_core::config::{desk_motors, desk_robot, six_dof_motors, six_dof_robot, MotorConfig, RobotConfig};
use mobman_core::motor::{MotorDesign, BETA_BOX};
use mobman_core::robot::{build_chain, RobotModel};
use mobman_plan::codesign::{CodesignProblem, DesignBox};
use mobman_plan::planning::{NoiseSpec, Objective, PidGains, PlanningProblem, SequentialOptions, TorqueLimit};
use mobman_plan::PlanError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub robot: RobotConfig,
    /// One per arm joint, in joint order.
    pub motors: Vec<MotorConfig>,
    pub planning: PlanningConfig,
    #[serde(default)]
    pub sequential: SequentialOptions,
    #[serde(default)]
    pub simulation: SimulationConfig,
    pub pid: PidGains,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub codesign: CodesignConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningConfig {
    pub target_m: [f64; 3],
    /// Initial state `[q1, θ, q̇1, θ̇]`; all zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Final time. When omitted, `t_f_factor` times the minimum time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f_s: Option<f64>,
    #[serde(default = "default_t_f_factor")]
    pub t_f_factor: f64,
    #[serde(default = "default_t_f_bounds")]
    pub t_f_bounds_s: [f64; 2],
    pub n_intervals: usize,
    pub n_p: usize,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default = "default_torque_limit")]
    pub torque_limit: TorqueLimit,
    #[serde(default = "default_pi")]
    pub yaw_limit_rad: f64,
    #[serde(default = "default_base_limit")]
    pub base_limit_m: f64,
    #[serde(default = "default_pi")]
    pub joint_limit_rad: f64,
    #[serde(default = "default_rate")]
    pub yaw_rate_limit_radps: f64,
    #[serde(default = "default_speed")]
    pub base_speed_limit_mps: f64,
    #[serde(default = "default_rate")]
    pub joint_speed_limit_radps: f64,
    /// Symmetric bounds on `(τz N·m, fx N, fy N)`.
    #[serde(default = "default_base_input")]
    pub base_input_limit: [f64; 3],
}

fn default_t_f_factor() -> f64 {
    1.5
}
fn default_t_f_bounds() -> [f64; 2] {
    [0.05, 60.0]
}
fn default_objective() -> Objective {
    Objective::MinEffort
}
fn default_torque_limit() -> TorqueLimit {
    TorqueLimit::Envelope
}
fn default_pi() -> f64 {
    PI
}
fn default_base_limit() -> f64 {
    10.0
}
fn default_rate() -> f64 {
    3.0
}
fn default_speed() -> f64 {
    2.0
}
fn default_base_input() -> [f64; 3] {
    [10.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt_s: f64,
    /// Extra time simulated after the plan ends, holding the final reference.
    #[serde(default)]
    pub settle_s: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { dt_s: 1e-3, settle_s: 0.0 }
    }
}

/// Measurement noise variances; the seed comes from the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub joint_pos: f64,
    pub joint_vel: f64,
    pub yaw_pos: f64,
    pub yaw_vel: f64,
    pub base_pos: f64,
    pub base_vel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let p = NoiseSpec::paper(0);
        NoiseConfig {
            enabled: false,
            joint_pos: p.joint_pos,
            joint_vel: p.joint_vel,
            yaw_pos: p.yaw_pos,
            yaw_vel: p.yaw_vel,
            base_pos: p.base_pos,
            base_vel: p.base_vel,
        }
    }
}

impl NoiseConfig {
    pub fn spec(&self, seed: u64) -> Option<NoiseSpec> {
        self.enabled.then_some(NoiseSpec {
            joint_pos: self.joint_pos,
            joint_vel: self.joint_vel,
            yaw_pos: self.yaw_pos,
            yaw_vel: self.yaw_vel,
            base_pos: self.base_pos,
            base_vel: self.base_vel,
            seed,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodesignConfig {
    /// Seed designs; the `motors` block when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<MotorConfig>>,
    /// Per-motor `[lo, hi]` boxes (mm) for `l, r_ro, r_so, h_m, h_sy, w_tooth, b0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes_mm: Option<Vec<[[f64; 2]; 7]>>,
    /// Motors pinned at their seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen: Vec<bool>,
    /// Final time of the co-design task; the planning value when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f_s: Option<f64>,
    /// Collocation degree of the co-design solve; the planning value when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> PlanError {
    PlanError::Config(msg.into())
}

impl Document {
    pub fn from_toml(text: &str) -> Result<Self, PlanError> {
        let doc: Document = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("document serializes")
    }

    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), PlanError> {
        let n = self.robot.n;
        if self.robot.joints.len() != n || self.motors.len() != n {
            return Err(config_err(format!("robot.n = {n} needs {n} joints and {n} motors")));
        }
        if self.pid.arm_kp.len() != n || self.pid.arm_ki.len() != n || self.pid.arm_kd.len() != n {
            return Err(config_err(format!("pid arm gains need {n} entries")));
        }
        if let Some(x0) = &self.planning.x0 {
            if x0.len() != 2 * (n + 3) {
                return Err(config_err(format!("planning.x0 needs {} entries", 2 * (n + 3))));
            }
        }
        let c = &self.codesign;
        if c.seed.as_ref().is_some_and(|s| s.len() != n) || c.boxes_mm.as_ref().is_some_and(|b| b.len() != n) {
            return Err(config_err(format!("codesign seed and boxes need {n} entries")));
        }
        if !c.frozen.is_empty() && c.frozen.len() != n {
            return Err(config_err(format!("codesign.frozen needs {n} entries")));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<RobotModel, PlanError> {
        Ok(build_chain(&self.robot, &self.motors)?)
    }

    pub fn x0(&self) -> Vec<f64> {
        self.planning.x0.clone().unwrap_or_else(|| vec![0.0; 2 * (self.robot.n + 3)])
    }

    /// Planning problem at final time `t_f` (the min-time initial guess in min-time mode).
    pub fn planning_problem(&self, model: &RobotModel, t_f: f64) -> PlanningProblem {
        let c = &self.planning;
        let n = model.n;
        let mut p = PlanningProblem::new(model.clone(), self.x0(), c.target_m, t_f);
        let mut hi = vec![c.yaw_limit_rad, c.base_limit_m, c.base_limit_m];
        hi.extend(vec![c.joint_limit_rad; n]);
        hi.extend([c.yaw_rate_limit_radps, c.base_speed_limit_mps, c.base_speed_limit_mps]);
        hi.extend(vec![c.joint_speed_limit_radps; n]);
        p.state_bounds = (hi.iter().map(|v| -v).collect(), hi);
        p.base_force_bounds = (c.base_input_limit.iter().map(|v| -v).collect(), c.base_input_limit.to_vec());
        p.t_f_bounds = (c.t_f_bounds_s[0], c.t_f_bounds_s[1]);
        p.n_intervals = c.n_intervals;
        p.n_p = c.n_p;
        p.objective = c.objective;
        p.torque_limit = c.torque_limit;
        p
    }

    /// Co-design problem at final time `t_f`.
    pub fn codesign_problem(&self, t_f: f64) -> Result<CodesignProblem, PlanError> {
        let c = &self.codesign;
        let seed_cfg = c.seed.clone().unwrap_or_else(|| self.motors.clone());
        let model = build_chain(&self.robot, &seed_cfg)?;
        let mut planning = self.planning_problem(&model, t_f);
        if let Some(n_p) = c.n_p {
            planning.n_p = n_p;
        }
        let mut p = CodesignProblem::new(planning);
        p.seed = seed_cfg.iter().map(|&m| MotorDesign::from(m)).collect();
        if let Some(b) = &c.boxes_mm {
            p.boxes = b.iter().map(|m| -> DesignBox { std::array::from_fn(|i| (m[i][0], m[i][1])) }).collect();
        }
        for (r, f) in c.frozen.iter().enumerate() {
            if *f {
                p.freeze(r);
            }
        }
        Ok(p)
    }

    /// Desk-scale reach task.
    pub fn desk() -> Self {
        let oversized = MotorConfig {
            l_mm: 24.5,
            r_ro_mm: 33.0,
            r_so_mm: 66.5,
            h_m_mm: 1.5,
            h_sy_mm: 9.5,
            w_tooth_mm: 13.5,
            b0_mm: 1.5,
            v_max_v: 48.0,
            i_max_a: 5.0,
        };
        Document {
            robot: desk_robot(),
            motors: desk_motors(),
            planning: PlanningConfig {
                target_m: [1.2, 0.6, 0.5],
                x0: None,
                t_f_s: None,
                t_f_factor: 1.5,
                t_f_bounds_s: default_t_f_bounds(),
                n_intervals: 20,
                n_p: 3,
                objective: Objective::MinEffort,
                torque_limit: TorqueLimit::Envelope,
                yaw_limit_rad: PI,
                base_limit_m: 10.0,
                joint_limit_rad: PI,
                yaw_rate_limit_radps: 3.0,
                base_speed_limit_mps: 2.0,
                joint_speed_limit_radps: 3.0,
                base_input_limit: [10.0; 3],
            },
            sequential: SequentialOptions::default(),
            simulation: SimulationConfig::default(),
            pid: PidGains::desk(2),
            noise: NoiseConfig::default(),
            codesign: CodesignConfig {
                seed: Some(vec![oversized; 2]),
                boxes_mm: Some(vec![BETA_BOX.map(|(a, b)| [a, b]); 2]),
                frozen: vec![false; 2],
                t_f_s: Some(4.0),
                n_p: Some(1),
            },
        }
    }

    /// Six-joint arm on a heavy base; a larger problem for benchmarking.
    pub fn six_dof() -> Self {
        let n = 6;
        let mut pid = PidGains::desk(n);
        pid.arm_kp = vec![4.0; n];
        pid.arm_kd = vec![0.3; n];
        pid.base_kp = [80.0, 1600.0, 1600.0];
        pid.base_ki = [8.0, 160.0, 160.0];
        pid.base_kd = [30.0, 800.0, 800.0];
        Document {
            robot: six_dof_robot(),
            motors: six_dof_motors(),
            planning: PlanningConfig {
                target_m: [2.0, 1.0, 0.5],
                x0: None,
                t_f_s: None,
                t_f_factor: 1.5,
                t_f_bounds_s: default_t_f_bounds(),
                n_intervals: 20,
                n_p: 1,
                objective: Objective::MinEffort,
                torque_limit: TorqueLimit::Envelope,
                yaw_limit_rad: PI,
                base_limit_m: 10.0,
                joint_limit_rad: PI,
                yaw_rate_limit_radps: 3.0,
                base_speed_limit_mps: 2.0,
                joint_speed_limit_radps: 3.0,
                base_input_limit: [40.0, 200.0, 200.0],
            },
            sequential: SequentialOptions::default(),
            simulation: SimulationConfig::default(),
            pid,
            noise: NoiseConfig::default(),
            codesign: CodesignConfig::default(),
        }
    }
}
