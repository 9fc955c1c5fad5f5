//! Serializable robot and motor description. Link geometry in metres and kilograms,
//! motor geometry in millimetres; units are spelled out in every key.

use crate::motor::MotorDesign;
use serde::{Deserialize, Serialize};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    /// Number of revolute arm joints.
    pub n: usize,
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
    pub base: BaseConfig,
    pub mount: MountConfig,
    pub joints: Vec<JointConfig>,
    pub end_effector: EndEffectorConfig,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub mass_kg: f64,
    pub inertia_kgm2: Mat3,
    /// Height of the base centre of mass above the ground.
    pub height_m: f64,
}

/// Link 2, rigidly attached to the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountConfig {
    pub mass_kg: f64,
    pub inertia_kgm2: Mat3,
    /// Position of the mount joint frame in the base frame.
    pub joint_offset_m: [f64; 3],
    /// Position of the mount centre of mass in the mount joint frame.
    pub com_offset_m: [f64; 3],
    /// Where the first arm motor's stator sits, relative to the mount centre of mass.
    /// Defaults to the first arm joint position.
    #[serde(default)]
    pub tip_offset_m: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    /// Unit rotation axis in the joint frame.
    pub axis: [f64; 3],
    /// Linear part of the screw axis (zero when the axis passes through the joint origin).
    #[serde(default)]
    pub screw_linear_m: [f64; 3],
    /// Position of this joint in the previous joint frame.
    pub offset_m: [f64; 3],
    pub gear_ratio: f64,
    /// Rotor frame origin in the joint frame.
    #[serde(default)]
    pub rotor_offset_m: [f64; 3],
    pub link: LinkConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub mass_kg: f64,
    pub inertia_kgm2: Mat3,
    /// Centre of mass in the joint frame.
    pub com_offset_m: [f64; 3],
    /// Where the next motor's stator sits, relative to this link's centre of mass.
    /// Defaults to the next joint position.
    #[serde(default)]
    pub tip_offset_m: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndEffectorConfig {
    /// End-effector point in the last joint frame.
    pub offset_m: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorConfig {
    pub l_mm: f64,
    pub r_ro_mm: f64,
    pub r_so_mm: f64,
    pub h_m_mm: f64,
    pub h_sy_mm: f64,
    pub w_tooth_mm: f64,
    pub b0_mm: f64,
    pub v_max_v: f64,
    pub i_max_a: f64,
}

impl From<MotorConfig> for MotorDesign {
    fn from(c: MotorConfig) -> Self {
        MotorDesign {
            l: c.l_mm,
            r_ro: c.r_ro_mm,
            r_so: c.r_so_mm,
            h_m: c.h_m_mm,
            h_sy: c.h_sy_mm,
            w_tooth: c.w_tooth_mm,
            b0: c.b0_mm,
            v_max: c.v_max_v,
            i_max: c.i_max_a,
        }
    }
}

impl From<MotorDesign> for MotorConfig {
    fn from(d: MotorDesign) -> Self {
        MotorConfig {
            l_mm: d.l,
            r_ro_mm: d.r_ro,
            r_so_mm: d.r_so,
            h_m_mm: d.h_m,
            h_sy_mm: d.h_sy,
            w_tooth_mm: d.w_tooth,
            b0_mm: d.b0,
            v_max_v: d.v_max,
            i_max_a: d.i_max,
        }
    }
}

fn diag(a: f64, b: f64, c: f64) -> Mat3 {
    [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
}

fn rod(mass: f64, len: f64, along: usize) -> Mat3 {
    let t = mass * len * len / 12.0 + 1e-4 * mass;
    let a = 1e-4 * mass * 2.0;
    let mut d = [t; 3];
    d[along] = a;
    diag(d[0], d[1], d[2])
}

/// Desk-scale model: planar base plus a yaw/pitch arm (not a published robot).
pub fn desk_robot() -> RobotConfig {
    RobotConfig {
        n: 2,
        gravity_mps2: 9.81,
        base: BaseConfig { mass_kg: 20.0, inertia_kgm2: diag(0.4, 0.4, 0.6), height_m: 0.15 },
        mount: MountConfig {
            mass_kg: 1.0,
            inertia_kgm2: diag(2e-3, 2e-3, 2e-3),
            joint_offset_m: [0.0, 0.0, 0.15],
            com_offset_m: [0.0, 0.0, 0.05],
            tip_offset_m: None,
        },
        joints: vec![
            JointConfig {
                axis: [0.0, 0.0, 1.0],
                screw_linear_m: [0.0; 3],
                offset_m: [0.0, 0.0, 0.1],
                gear_ratio: 50.0,
                rotor_offset_m: [0.0; 3],
                link: LinkConfig { mass_kg: 1.0, inertia_kgm2: rod(1.0, 0.2, 2), com_offset_m: [0.0, 0.0, 0.1], tip_offset_m: None },
            },
            JointConfig {
                axis: [0.0, 1.0, 0.0],
                screw_linear_m: [0.0; 3],
                offset_m: [0.0, 0.0, 0.2],
                gear_ratio: 50.0,
                rotor_offset_m: [0.0; 3],
                link: LinkConfig { mass_kg: 1.0, inertia_kgm2: rod(1.0, 0.5, 0), com_offset_m: [0.25, 0.0, 0.0], tip_offset_m: None },
            },
        ],
        end_effector: EndEffectorConfig { offset_m: [0.5, 0.0, 0.0] },
    }
}

/// Desk motors: compact designs that satisfy every design constraint.
pub fn desk_motors() -> Vec<MotorConfig> {
    vec![desk_motor(); 2]
}

pub fn desk_motor() -> MotorConfig {
    MotorConfig {
        l_mm: 30.0,
        r_ro_mm: 15.0,
        r_so_mm: 34.0,
        h_m_mm: 2.0,
        h_sy_mm: 5.0,
        w_tooth_mm: 6.5,
        b0_mm: 1.0,
        v_max_v: 48.0,
        i_max_a: 5.0,
    }
}

/// Six-joint arm on a 90 kg base with a 5 kg payload in the last link. Per-link
/// geometry is invented; with motors the arm comes to about 40 kg.
pub fn six_dof_robot() -> RobotConfig {
    let z = [0.0, 0.0, 1.0];
    let y = [0.0, 1.0, 0.0];
    let x = [1.0, 0.0, 0.0];
    let j = |axis: [f64; 3], offset: [f64; 3], mass: f64, com: [f64; 3], inertia: Mat3| JointConfig {
        axis,
        screw_linear_m: [0.0; 3],
        offset_m: offset,
        gear_ratio: 50.0,
        rotor_offset_m: [0.0; 3],
        link: LinkConfig { mass_kg: mass, inertia_kgm2: inertia, com_offset_m: com, tip_offset_m: None },
    };
    RobotConfig {
        n: 6,
        gravity_mps2: 9.81,
        base: BaseConfig { mass_kg: 90.0, inertia_kgm2: diag(3.2, 4.1, 5.6), height_m: 0.25 },
        mount: MountConfig {
            mass_kg: 3.0,
            inertia_kgm2: diag(0.02, 0.02, 0.015),
            joint_offset_m: [0.2, 0.0, 0.25],
            com_offset_m: [0.0, 0.0, 0.05],
            tip_offset_m: None,
        },
        joints: vec![
            j(z, [0.0, 0.0, 0.12], 4.0, [0.0, 0.0, 0.08], diag(0.02, 0.02, 0.012)),
            j(y, [0.0, 0.0, 0.16], 6.5, [0.21, 0.0, 0.0], rod(6.5, 0.42, 0)),
            j(y, [0.42, 0.0, 0.0], 4.5, [0.19, 0.0, 0.0], rod(4.5, 0.39, 0)),
            j(x, [0.39, 0.0, 0.0], 2.5, [0.06, 0.0, 0.0], diag(0.004, 0.006, 0.006)),
            j(y, [0.12, 0.0, 0.0], 2.0, [0.05, 0.0, 0.0], diag(0.003, 0.004, 0.004)),
            // last link carries the 5 kg payload
            j(x, [0.1, 0.0, 0.0], 6.53, [0.08, 0.0, 0.0], diag(0.02, 0.03, 0.03)),
        ],
        end_effector: EndEffectorConfig { offset_m: [0.15, 0.0, 0.0] },
    }
}

/// Six near-limit motors (about 3 kg each) for the six-joint arm.
pub fn six_dof_motors() -> Vec<MotorConfig> {
    vec![
        MotorConfig {
            l_mm: 60.0,
            r_ro_mm: 22.0,
            r_so_mm: 44.0,
            h_m_mm: 2.0,
            h_sy_mm: 7.0,
            w_tooth_mm: 9.5,
            b0_mm: 1.5,
            v_max_v: 48.0,
            i_max_a: 15.0,
        };
        6
    ]
}

/// Reference design for torque-envelope comparisons. `h_m` is tuned so that
/// Φ_pm/L_d = 21.67 A, which puts I_max = 5, 21.67 and 30 A in the three envelope cases.
pub fn reference_motor(i_max_a: f64) -> MotorConfig {
    MotorConfig {
        l_mm: 50.0,
        r_ro_mm: 20.0,
        r_so_mm: 45.0,
        h_m_mm: 2.246044963284028,
        h_sy_mm: 6.0,
        w_tooth_mm: 8.7,
        b0_mm: 1.5,
        v_max_v: 48.0,
        i_max_a,
    }
}
