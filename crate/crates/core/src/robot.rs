//! Kinematic chain: planar base, fixed mount, geared revolute joints with motor rotors.
//!
//! Body indices are zero-based: body 0 is the base (link 1), body 1 the mount (link 2),
//! body `i + 2` the link after arm joint `i`. Rotor `i` belongs to arm joint `i`.

use crate::config::{MotorConfig, RobotConfig};
use crate::error::CoreError;
use crate::motor::{derive_electromagnetics, MotorDesign, MotorElectromagnetics};
use crate::scalar::Scalar;
use crate::spatial::*;

/// Joint kinds along the chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointKind {
    Planar3,
    Fixed,
    Revolute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    pub screw: ScrewAxis<f64>,
    /// `p_{J_{k-1},J_k}`; for the mount joint this is `p_{L1,J2}`.
    pub mount_offset: V3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub mass: f64,
    pub inertia_tensor: M3<f64>,
    /// `p_{Jk,Lk}`.
    pub com_offset: V3<f64>,
    /// Position of the next motor's stator relative to this link's centre of mass.
    pub tip_offset: V3<f64>,
}

/// Spatial inertias for every link and rotor, possibly carrying derivatives.
#[derive(Clone, Debug)]
pub struct Inertias<S> {
    pub links: Vec<M6<S>>,
    pub rotors: Vec<M6<S>>,
}

#[derive(Clone, Debug)]
pub struct RobotModel {
    pub n: usize,
    pub gravity: f64,
    pub base_height: f64,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    pub motors: Vec<MotorDesign>,
    pub motor_em: Vec<MotorElectromagnetics>,
    pub gear_ratios: Vec<f64>,
    /// `T_{J_{n+2},J_e}`.
    pub ee_offset: SpatialTransform<f64>,
    /// `M_{Lk,L_{k-1}}` for bodies 1..n+2 (entry 0 unused, identity).
    pub m_link: Vec<SpatialTransform<f64>>,
    /// `M_{Rk,L_{k-1}}` per arm joint.
    pub m_rotor: Vec<SpatialTransform<f64>>,
    /// `M_{Rk,Jk}` per arm joint.
    pub rotor_joint: Vec<SpatialTransform<f64>>,
    /// `A_{Lk}` per arm joint.
    pub a_link: Vec<V6<f64>>,
    /// `A_{Rk}` per arm joint.
    pub a_rotor: Vec<V6<f64>>,
    /// Unaugmented link inertias `Ĝ`.
    pub g_hat: Vec<M6<f64>>,
    /// Inertias at the configured motor designs.
    pub inertias: Inertias<f64>,
    pub config: RobotConfig,
    pub motor_config: Vec<MotorConfig>,
}

/// Joint positions: base (θz, px, py) and arm angles.
#[derive(Clone, Debug, PartialEq)]
pub struct Positions<S> {
    pub q1: [S; 3],
    pub theta: Vec<S>,
}

/// Full state `x = col{q1, θ, q̇1, θ̇}`; q̇1 is the time derivative of q1.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState<S = f64> {
    pub q1: [S; 3],
    pub theta: Vec<S>,
    pub q1_dot: [S; 3],
    pub theta_dot: Vec<S>,
}

impl<S: Scalar> RobotState<S> {
    pub fn zeros(n: usize) -> Self {
        RobotState { q1: [S::zero(); 3], theta: vec![S::zero(); n], q1_dot: [S::zero(); 3], theta_dot: vec![S::zero(); n] }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn from_vector(x: &[S]) -> Self {
        let n = x.len() / 2 - 3;
        RobotState {
            q1: [x[0], x[1], x[2]],
            theta: x[3..3 + n].to_vec(),
            q1_dot: [x[3 + n], x[4 + n], x[5 + n]],
            theta_dot: x[6 + n..6 + 2 * n].to_vec(),
        }
    }

    pub fn to_vector(&self) -> Vec<S> {
        let mut v = Vec::with_capacity(2 * (self.n() + 3));
        v.extend_from_slice(&self.q1);
        v.extend_from_slice(&self.theta);
        v.extend_from_slice(&self.q1_dot);
        v.extend_from_slice(&self.theta_dot);
        v
    }

    pub fn positions(&self) -> Positions<S> {
        Positions { q1: self.q1, theta: self.theta.clone() }
    }
}

/// Per-body transforms for one configuration.
#[derive(Clone, Debug)]
pub struct ChainTransforms<S> {
    /// `T_{Lk,L_{k-1}}` per body.
    pub link_parent: Vec<SpatialTransform<S>>,
    /// `T_{Rk,L_{k-1}}` per arm joint.
    pub rotor_parent: Vec<SpatialTransform<S>>,
    /// World transforms `T_{Lk}`.
    pub link_world: Vec<SpatialTransform<S>>,
    /// World transforms `T_{Jk}` (base joint frame at ground level for body 0).
    pub joint_world: Vec<SpatialTransform<S>>,
    /// World transforms of rotor frames.
    pub rotor_world: Vec<SpatialTransform<S>>,
}

fn check_inertia(name: &str, m: &M3<f64>) -> Result<(), CoreError> {
    for i in 0..3 {
        for j in 0..3 {
            if !m[i][j].is_finite() {
                return Err(CoreError::Physics(format!("{name}: non-finite inertia")));
            }
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                return Err(CoreError::Physics(format!("{name}: inertia tensor not symmetric")));
            }
        }
    }
    let minors = [
        m[0][0],
        m[1][1],
        m[2][2],
        m[0][0] * m[1][1] - m[0][1] * m[1][0],
        m[0][0] * m[2][2] - m[0][2] * m[2][0],
        m[1][1] * m[2][2] - m[1][2] * m[2][1],
        m3_det(m),
    ];
    let scale = m[0][0].abs().max(m[1][1].abs()).max(m[2][2].abs()).max(1e-300);
    if minors.iter().enumerate().any(|(i, &v)| {
        v < -1e-12
            * scale.powi(if i < 3 {
                1
            } else if i < 6 {
                2
            } else {
                3
            })
    }) {
        return Err(CoreError::Physics(format!("{name}: inertia tensor not positive semidefinite")));
    }
    Ok(())
}

fn spatial_inertia<S: Scalar>(i: &M3<S>, m: S) -> M6<S> {
    let mut g = m6_zero();
    for r in 0..3 {
        for c in 0..3 {
            g[r][c] = i[r][c];
        }
        g[r + 3][r + 3] = m;
    }
    g
}

/// Inertia tensor of a body of revolution with the given axial/transverse moments.
fn axial_tensor<S: Scalar>(axis: &V3<f64>, axial: S, transverse: S) -> M3<S> {
    let mut t = m3_zero();
    for r in 0..3 {
        for c in 0..3 {
            let aa = axis[r] * axis[c];
            let id = if r == c { 1.0 } else { 0.0 };
            t[r][c] = transverse * (id - aa) + axial * aa;
        }
    }
    t
}

fn norm3(v: &V3<f64>) -> f64 {
    dot3(v, v).sqrt()
}

/// Builds the model and all precomputed quantities.
pub fn build_chain(config: &RobotConfig, motors: &[MotorConfig]) -> Result<RobotModel, CoreError> {
    let n = config.n;
    if n == 0 {
        return Err(CoreError::Schema("at least one arm joint is required".into()));
    }
    if config.joints.len() != n {
        return Err(CoreError::Schema(format!("n = {n} but {} joints given", config.joints.len())));
    }
    if motors.len() != n {
        return Err(CoreError::Schema(format!("n = {n} but {} motors given", motors.len())));
    }
    if !(config.base.height_m > 0.0) {
        return Err(CoreError::Physics("base height must be positive".into()));
    }
    check_inertia("base", &config.base.inertia_kgm2)?;
    check_inertia("mount", &config.mount.inertia_kgm2)?;
    if !(config.base.mass_kg > 0.0) || !(config.mount.mass_kg > 0.0) {
        return Err(CoreError::Physics("link masses must be positive".into()));
    }
    let h1 = config.base.height_m;

    let mut joints = vec![
        JointSpec { kind: JointKind::Planar3, screw: ScrewAxis::revolute([0.0, 0.0, 1.0]), mount_offset: [0.0; 3] },
        JointSpec { kind: JointKind::Fixed, screw: ScrewAxis::new([0.0; 3], [0.0; 3]), mount_offset: config.mount.joint_offset_m },
    ];
    let mut links = vec![
        LinkSpec { mass: config.base.mass_kg, inertia_tensor: config.base.inertia_kgm2, com_offset: [0.0, 0.0, h1], tip_offset: [0.0; 3] },
        LinkSpec {
            mass: config.mount.mass_kg,
            inertia_tensor: config.mount.inertia_kgm2,
            com_offset: config.mount.com_offset_m,
            tip_offset: [0.0; 3],
        },
    ];
    let mut gear_ratios = Vec::with_capacity(n);
    for (i, jc) in config.joints.iter().enumerate() {
        let an = norm3(&jc.axis);
        if (an - 1.0).abs() > 1e-9 {
            return Err(CoreError::Schema(format!("joint {}: axis must be a unit vector (norm {an})", i + 3)));
        }
        if !(jc.gear_ratio > 0.0) {
            return Err(CoreError::Physics(format!("joint {}: gear ratio must be positive", i + 3)));
        }
        if !(jc.link.mass_kg > 0.0) {
            return Err(CoreError::Physics(format!("link {}: mass must be positive", i + 3)));
        }
        check_inertia(&format!("link {}", i + 3), &jc.link.inertia_kgm2)?;
        joints.push(JointSpec { kind: JointKind::Revolute, screw: ScrewAxis::new(jc.axis, jc.screw_linear_m), mount_offset: jc.offset_m });
        links.push(LinkSpec {
            mass: jc.link.mass_kg,
            inertia_tensor: jc.link.inertia_kgm2,
            com_offset: jc.link.com_offset_m,
            tip_offset: [0.0; 3],
        });
        gear_ratios.push(jc.gear_ratio);
    }
    // stator positions: next joint relative to the carrying link's centre of mass
    for k in 0..n {
        let carrier = k + 1;
        let next_joint = config.joints[k].offset_m;
        let default = sub3(&next_joint, &links[carrier].com_offset);
        let given = if carrier == 1 { config.mount.tip_offset_m } else { config.joints[k - 1].link.tip_offset_m };
        links[carrier].tip_offset = given.unwrap_or(default);
    }

    let mut m_link = vec![SpatialTransform::identity(); n + 2];
    // M_{L2,L1}
    m_link[1] = SpatialTransform::from_translation(add3(&config.mount.joint_offset_m, &config.mount.com_offset_m)).inverse();
    let mut m_rotor = Vec::with_capacity(n);
    let mut rotor_joint = Vec::with_capacity(n);
    let mut a_link = Vec::with_capacity(n);
    let mut a_rotor = Vec::with_capacity(n);
    for k in 0..n {
        let body = k + 2;
        let prev_joint_to_prev_link = links[body - 1].com_offset;
        let p_prev_this = joints[body].mount_offset;
        let p_this_link = links[body].com_offset;
        // M_{Lk,L_{k-1}} = (M_{J_{k-1},J_k} M_{J_k,L_k})⁻¹ M_{J_{k-1},L_{k-1}}
        let t = sub3(&prev_joint_to_prev_link, &add3(&p_prev_this, &p_this_link));
        m_link[body] = SpatialTransform::from_translation(t);
        let m_jk_lk_inv = SpatialTransform::from_translation(p_this_link).inverse();
        let s = joints[body].screw.to_array();
        a_link.push(m_jk_lk_inv.ad_apply(&s));
        let r_j = SpatialTransform::from_translation(config.joints[k].rotor_offset_m).inverse();
        rotor_joint.push(r_j);
        let m_jk_prev = SpatialTransform::from_translation(sub3(&prev_joint_to_prev_link, &p_prev_this));
        m_rotor.push(r_j.compose(&m_jk_prev));
        a_rotor.push(scale6(&r_j.ad_apply(&s), gear_ratios[k]));
    }

    let mut designs = Vec::with_capacity(n);
    let mut motor_em = Vec::with_capacity(n);
    for (i, mc) in motors.iter().enumerate() {
        let d: MotorDesign = (*mc).into();
        let em = derive_electromagnetics(&d).map_err(|e| CoreError::Physics(format!("motor {}: {e}", i + 3)))?;
        designs.push(d);
        motor_em.push(em);
    }

    let g_hat: Vec<M6<f64>> = links.iter().map(|l| spatial_inertia(&l.inertia_tensor, l.mass)).collect();

    let mut model = RobotModel {
        n,
        gravity: config.gravity_mps2,
        base_height: h1,
        joints,
        links,
        motors: designs,
        motor_em,
        gear_ratios,
        ee_offset: SpatialTransform::from_translation(config.end_effector.offset_m),
        m_link,
        m_rotor,
        rotor_joint,
        a_link,
        a_rotor,
        g_hat,
        inertias: Inertias { links: vec![], rotors: vec![] },
        config: config.clone(),
        motor_config: motors.to_vec(),
    };
    model.inertias = model.inertias_from_em(&model.motor_em.clone());
    Ok(model)
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.n + 3
    }

    pub fn state_dim(&self) -> usize {
        2 * (self.n + 3)
    }

    /// Axis of arm joint `k` (unit, in the joint frame).
    pub fn axis(&self, k: usize) -> V3<f64> {
        self.joints[k + 2].screw.angular
    }

    /// Link and rotor inertias for the given motor electromagnetics.
    pub fn inertias_from_em<S: Scalar>(&self, em: &[MotorElectromagnetics<S>]) -> Inertias<S> {
        let mut links: Vec<M6<S>> = self.g_hat.iter().map(lift_m6).collect();
        let mut rotors = Vec::with_capacity(self.n);
        for (k, e) in em.iter().enumerate() {
            let axis = self.axis(k);
            let carrier = k + 1;
            let d = self.links[carrier].tip_offset;
            let ms = e.m_stator;
            let mut is = axial_tensor(&axis, e.stator_inertia[0], e.stator_inertia[1]);
            let l = [d[1] * d[1] + d[2] * d[2], d[0] * d[0] + d[2] * d[2], d[0] * d[0] + d[1] * d[1]];
            for r in 0..3 {
                is[r][r] += ms * l[r];
            }
            let g = &mut links[carrier];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] += is[r][c];
                }
                g[r + 3][r + 3] += ms;
            }
            let ir = axial_tensor(&axis, e.rotor_inertia[0], e.rotor_inertia[1]);
            rotors.push(spatial_inertia(&ir, e.m_rotor));
        }
        Inertias { links, rotors }
    }

    /// Inertias for designs that may carry derivatives.
    pub fn inertias_for_designs<S: Scalar>(&self, designs: &[MotorDesign<S>]) -> Result<Inertias<S>, CoreError> {
        let em: Result<Vec<_>, _> = designs.iter().map(derive_electromagnetics).collect();
        Ok(self.inertias_from_em(&em?))
    }

    /// Total mass of links, stators and rotors.
    pub fn total_mass(&self) -> f64 {
        self.inertias.links.iter().map(|g| g[3][3]).sum::<f64>() + self.inertias.rotors.iter().map(|g| g[3][3]).sum::<f64>()
    }

    pub fn motor_mass(&self) -> f64 {
        self.motor_em.iter().map(|e| e.m_rotor + e.m_stator).sum()
    }

    /// `T_{L1,L0}(q1)` and the base motion subspace with its θz-derivative.
    pub fn base_transform<S: Scalar>(&self, q1: &[S; 3]) -> SpatialTransform<S> {
        SpatialTransform::rot_z(q1[0], [q1[1], q1[2], S::cst(self.base_height)]).inverse()
    }

    /// Columns of `A_{L1}(θz)` (ω_z, ṗx, ṗy).
    pub fn base_subspace<S: Scalar>(theta_z: S) -> [V6<S>; 3] {
        let (s, c) = (theta_z.sin(), theta_z.cos());
        let z = S::zero();
        [[z, z, S::one(), z, z, z], [z, z, z, c, -s, z], [z, z, z, s, c, z]]
    }

    /// `∂A_{L1}/∂θz`.
    pub fn base_subspace_derivative<S: Scalar>(theta_z: S) -> [V6<S>; 3] {
        let (s, c) = (theta_z.sin(), theta_z.cos());
        let z = S::zero();
        [[z; 6], [z, z, z, -s, -c, z], [z, z, z, c, -s, z]]
    }

    pub fn chain_transforms<S: Scalar>(&self, q1: &[S; 3], theta: &[S]) -> ChainTransforms<S> {
        let nb = self.n + 2;
        let mut link_parent = Vec::with_capacity(nb);
        let mut rotor_parent = Vec::with_capacity(self.n);
        let mut link_world = Vec::with_capacity(nb);
        let mut joint_world = Vec::with_capacity(nb);
        let mut rotor_world = Vec::with_capacity(self.n);
        let t10 = self.base_transform(q1);
        link_parent.push(t10);
        let t_l1 = t10.inverse();
        joint_world.push(SpatialTransform::rot_z(q1[0], [q1[1], q1[2], S::zero()]));
        link_world.push(t_l1);
        let t21 = SpatialTransform::lift(&self.m_link[1]);
        link_parent.push(t21);
        let t_l2 = t_l1.compose(&t21.inverse());
        joint_world.push(t_l2.compose(&SpatialTransform::from_translation(lift3(&self.links[1].com_offset)).inverse()));
        link_world.push(t_l2);
        for k in 0..self.n {
            let body = k + 2;
            let a = ScrewAxis::new(
                [S::cst(-self.a_link[k][0]), S::cst(-self.a_link[k][1]), S::cst(-self.a_link[k][2])],
                [S::cst(-self.a_link[k][3]), S::cst(-self.a_link[k][4]), S::cst(-self.a_link[k][5])],
            );
            let t = screw_exp(&a, theta[k]).compose(&SpatialTransform::lift(&self.m_link[body]));
            let ar = ScrewAxis::new(
                [S::cst(-self.a_rotor[k][0]), S::cst(-self.a_rotor[k][1]), S::cst(-self.a_rotor[k][2])],
                [S::cst(-self.a_rotor[k][3]), S::cst(-self.a_rotor[k][4]), S::cst(-self.a_rotor[k][5])],
            );
            let tr = screw_exp(&ar, theta[k]).compose(&SpatialTransform::lift(&self.m_rotor[k]));
            let parent_world = link_world[body - 1];
            let tw = parent_world.compose(&t.inverse());
            joint_world.push(tw.compose(&SpatialTransform::from_translation(lift3(&self.links[body].com_offset)).inverse()));
            rotor_world.push(parent_world.compose(&tr.inverse()));
            link_world.push(tw);
            link_parent.push(t);
            rotor_parent.push(tr);
        }
        ChainTransforms { link_parent, rotor_parent, link_world, joint_world, rotor_world }
    }

    /// World pose of the end-effector frame.
    pub fn end_effector_transform<S: Scalar>(&self, q1: &[S; 3], theta: &[S]) -> SpatialTransform<S> {
        let ct = self.chain_transforms(q1, theta);
        ct.joint_world[self.n + 1].compose(&SpatialTransform::lift(&self.ee_offset))
    }

    pub fn end_effector_position<S: Scalar>(&self, q1: &[S; 3], theta: &[S]) -> V3<S> {
        self.end_effector_transform(q1, theta).translation
    }

    /// Rebuilds the model with different motors.
    pub fn with_motors(&self, motors: &[MotorConfig]) -> Result<RobotModel, CoreError> {
        build_chain(&self.config, motors)
    }

    /// Rebuilds the model with a different gravity constant.
    pub fn with_gravity(&self, g: f64) -> RobotModel {
        let mut m = self.clone();
        m.gravity = g;
        m.config.gravity_mps2 = g;
        m
    }
}
