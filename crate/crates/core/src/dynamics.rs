//! Motor-augmented inverse (RNEA) and forward (ABA) dynamics.
//!
//! Both algorithms take the inertias explicitly so design-dependent inertias with
//! live derivatives can be passed through. Bodies are indexed as in [`crate::robot`].

use crate::error::CoreError;
use crate::robot::{ChainTransforms, Inertias, RobotModel, RobotState};
use crate::scalar::Scalar;
use crate::spatial::*;
use rayon::prelude::*;

/// `u = col{f1, τ}`: base wrench (τz, fx, fy) in world axes and rotor-side motor torques.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedForce<S = f64> {
    pub f1: [S; 3],
    pub tau: Vec<S>,
}

impl<S: Scalar> GeneralizedForce<S> {
    pub fn zeros(n: usize) -> Self {
        GeneralizedForce { f1: [S::zero(); 3], tau: vec![S::zero(); n] }
    }

    pub fn from_vector(u: &[S]) -> Self {
        GeneralizedForce { f1: [u[0], u[1], u[2]], tau: u[3..].to_vec() }
    }

    pub fn to_vector(&self) -> Vec<S> {
        let mut v = self.f1.to_vec();
        v.extend_from_slice(&self.tau);
        v
    }
}

/// `(q̈1, θ̈)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Acceleration<S = f64> {
    pub q1_dd: [S; 3],
    pub theta_dd: Vec<S>,
}

impl<S: Scalar> Acceleration<S> {
    pub fn zeros(n: usize) -> Self {
        Acceleration { q1_dd: [S::zero(); 3], theta_dd: vec![S::zero(); n] }
    }

    pub fn from_vector(a: &[S]) -> Self {
        Acceleration { q1_dd: [a[0], a[1], a[2]], theta_dd: a[3..].to_vec() }
    }

    pub fn to_vector(&self) -> Vec<S> {
        let mut v = self.q1_dd.to_vec();
        v.extend_from_slice(&self.theta_dd);
        v
    }
}

/// Twists, velocity-product terms and accelerations of every body, in body frames.
#[derive(Clone, Debug)]
pub struct BodyKinematics<S> {
    pub link_twist: Vec<V6<S>>,
    pub link_zeta: Vec<V6<S>>,
    pub link_accel: Vec<V6<S>>,
    pub rotor_twist: Vec<V6<S>>,
    pub rotor_zeta: Vec<V6<S>>,
    pub rotor_accel: Vec<V6<S>>,
}

fn check_dims<S>(model: &RobotModel, state: &RobotState<S>, other: usize, what: &str) -> Result<(), CoreError> {
    let n = model.n;
    if state.theta.len() != n || state.theta_dot.len() != n || other != n {
        return Err(CoreError::Dimension(format!(
            "model has n = {n}, state has {}/{} joints, {what} has {other}",
            state.theta.len(),
            state.theta_dot.len()
        )));
    }
    Ok(())
}

fn base_twist<S: Scalar>(state: &RobotState<S>) -> (V6<S>, V6<S>, [V6<S>; 3]) {
    let a = RobotModel::base_subspace(state.q1[0]);
    let da = RobotModel::base_subspace_derivative(state.q1[0]);
    let mut v = v6_zero();
    let mut zeta = v6_zero();
    for j in 0..3 {
        for r in 0..6 {
            v[r] += a[j][r] * state.q1_dot[j];
            zeta[r] += da[j][r] * state.q1_dot[j] * state.q1_dot[0];
        }
    }
    (v, zeta, a)
}

fn lift_axis<S: Scalar>(a: &V6<f64>) -> V6<S> {
    lift6(a)
}

fn gravity_accel<S: Scalar>(model: &RobotModel) -> V6<S> {
    let z = S::zero();
    [z, z, z, z, z, S::cst(model.gravity)]
}

/// Bias wrench `−ad_Vᵀ G V`.
fn bias<S: Scalar>(g: &M6<S>, v: &V6<S>) -> V6<S> {
    scale6(&ad_transpose_apply(v, &m6_vec(g, v)), S::cst(-1.0))
}

/// Velocity pass shared by both algorithms (accelerations left zero).
fn velocity_pass<S: Scalar>(model: &RobotModel, ct: &ChainTransforms<S>, state: &RobotState<S>) -> BodyKinematics<S> {
    let nb = model.n + 2;
    let (v0, z0, _) = base_twist(state);
    let mut link_twist = vec![v0];
    let mut link_zeta = vec![z0];
    link_twist.push(ct.link_parent[1].ad_apply(&v0));
    link_zeta.push(v6_zero());
    let mut rotor_twist = Vec::with_capacity(model.n);
    let mut rotor_zeta = Vec::with_capacity(model.n);
    for b in 2..nb {
        let k = b - 2;
        let parent = link_twist[b - 1];
        let al = scale6(&lift_axis(&model.a_link[k]), state.theta_dot[k]);
        let v = add6(&ct.link_parent[b].ad_apply(&parent), &al);
        link_zeta.push(ad_apply(&v, &al));
        link_twist.push(v);
        let ar = scale6(&lift_axis(&model.a_rotor[k]), state.theta_dot[k]);
        let vr = add6(&ct.rotor_parent[k].ad_apply(&parent), &ar);
        rotor_zeta.push(ad_apply(&vr, &ar));
        rotor_twist.push(vr);
    }
    BodyKinematics {
        link_twist,
        link_zeta,
        link_accel: vec![v6_zero(); nb],
        rotor_twist,
        rotor_zeta,
        rotor_accel: vec![v6_zero(); model.n],
    }
}

/// Inverse dynamics with explicit inertias.
pub fn inverse_dynamics_with<S: Scalar>(
    model: &RobotModel,
    inertias: &Inertias<S>,
    state: &RobotState<S>,
    accel: &Acceleration<S>,
) -> Result<GeneralizedForce<S>, CoreError> {
    check_dims(model, state, accel.theta_dd.len(), "acceleration")?;
    let ct = model.chain_transforms(&state.q1, &state.theta);
    let (f, _) = rnea_impl(model, inertias, state, accel, &ct);
    Ok(f)
}

fn rnea_impl<S: Scalar>(
    model: &RobotModel,
    inertias: &Inertias<S>,
    state: &RobotState<S>,
    accel: &Acceleration<S>,
    ct: &ChainTransforms<S>,
) -> (GeneralizedForce<S>, BodyKinematics<S>) {
    let nb = model.n + 2;
    let mut kin = velocity_pass(model, ct, state);
    let (_, _, a1) = base_twist(state);
    let mut a0 = add6(&ct.link_parent[0].ad_apply(&gravity_accel(model)), &kin.link_zeta[0]);
    for j in 0..3 {
        a0 = add6(&a0, &scale6(&a1[j], accel.q1_dd[j]));
    }
    kin.link_accel[0] = a0;
    kin.link_accel[1] = ct.link_parent[1].ad_apply(&a0);
    for b in 2..nb {
        let k = b - 2;
        let parent = kin.link_accel[b - 1];
        let al = scale6(&lift_axis(&model.a_link[k]), accel.theta_dd[k]);
        kin.link_accel[b] = add6(&add6(&ct.link_parent[b].ad_apply(&parent), &kin.link_zeta[b]), &al);
        let ar = scale6(&lift_axis(&model.a_rotor[k]), accel.theta_dd[k]);
        kin.rotor_accel[k] = add6(&add6(&ct.rotor_parent[k].ad_apply(&parent), &kin.rotor_zeta[k]), &ar);
    }

    let inertial = |g: &M6<S>, v: &V6<S>, a: &V6<S>| add6(&m6_vec(g, a), &bias(g, v));
    let rotor_force: Vec<V6<S>> = (0..model.n).map(|k| inertial(&inertias.rotors[k], &kin.rotor_twist[k], &kin.rotor_accel[k])).collect();
    let mut force: Vec<V6<S>> = (0..nb).map(|b| inertial(&inertias.links[b], &kin.link_twist[b], &kin.link_accel[b])).collect();
    let mut tau = vec![S::zero(); model.n];
    for b in (1..nb).rev() {
        if b >= 2 {
            let k = b - 2;
            let al = lift_axis(&model.a_link[k]);
            let ar = lift_axis(&model.a_rotor[k]);
            tau[k] = (dot6(&al, &force[b]) + dot6(&ar, &rotor_force[k])) / S::cst(model.gear_ratios[k]);
            let to_parent = add6(&ct.link_parent[b].ad_transpose_apply(&force[b]), &ct.rotor_parent[k].ad_transpose_apply(&rotor_force[k]));
            force[b - 1] = add6(&force[b - 1], &to_parent);
        } else {
            let to_parent = ct.link_parent[1].ad_transpose_apply(&force[1]);
            force[0] = add6(&force[0], &to_parent);
        }
    }
    let f1 = [dot6(&a1[0], &force[0]), dot6(&a1[1], &force[0]), dot6(&a1[2], &force[0])];
    (GeneralizedForce { f1, tau }, kin)
}

/// Inverse dynamics at the model's configured motors.
pub fn inverse_dynamics(model: &RobotModel, state: &RobotState, accel: &Acceleration) -> Result<GeneralizedForce, CoreError> {
    inverse_dynamics_with(model, &model.inertias, state, accel)
}

/// Body kinematics (twists and accelerations) for a given acceleration.
pub fn body_kinematics<S: Scalar>(
    model: &RobotModel,
    inertias: &Inertias<S>,
    state: &RobotState<S>,
    accel: &Acceleration<S>,
) -> BodyKinematics<S> {
    let ct = model.chain_transforms(&state.q1, &state.theta);
    rnea_impl(model, inertias, state, accel, &ct).1
}

const PIVOT_TINY: f64 = 1e-14;

/// Forward dynamics with explicit inertias. With `fixed_base` the base is held
/// (q̈1 = 0) and `u.f1` is ignored.
pub fn forward_dynamics_with<S: Scalar>(
    model: &RobotModel,
    inertias: &Inertias<S>,
    state: &RobotState<S>,
    u: &GeneralizedForce<S>,
    fixed_base: bool,
) -> Result<Acceleration<S>, CoreError> {
    check_dims(model, state, u.tau.len(), "input")?;
    let nb = model.n + 2;
    let ct = model.chain_transforms(&state.q1, &state.theta);
    let kin = velocity_pass(model, &ct, state);

    let mut ia: Vec<M6<S>> = inertias.links.clone();
    let mut pa: Vec<V6<S>> = (0..nb).map(|b| bias(&inertias.links[b], &kin.link_twist[b])).collect();
    // per revolute joint: (U_L, U_R, D, u)
    let mut cache: Vec<(V6<S>, V6<S>, S, S)> = vec![(v6_zero(), v6_zero(), S::zero(), S::zero()); model.n];
    for b in (2..nb).rev() {
        let k = b - 2;
        let al = lift_axis::<S>(&model.a_link[k]);
        let ar = lift_axis::<S>(&model.a_rotor[k]);
        let ir = &inertias.rotors[k];
        let pr = bias(ir, &kin.rotor_twist[k]);
        let ul = m6_vec(&ia[b], &al);
        let ur = m6_vec(ir, &ar);
        let dinv = dot6(&al, &ul) + dot6(&ar, &ur);
        let scale = 1.0 + ia[b][0][0].re().abs() + ia[b][3][3].re().abs();
        if !(dinv.re() > PIVOT_TINY * scale) {
            return Err(CoreError::SingularInertia { body: b + 1 });
        }
        let d = dinv.recip();
        let uu = S::cst(model.gear_ratios[k]) * u.tau[k] - dot6(&al, &pa[b]) - dot6(&ar, &pr);
        let xl = ct.link_parent[b].adjoint();
        let xr = ct.rotor_parent[k].adjoint();
        let w = add6(&m6t_vec(&xl, &ul), &m6t_vec(&xr, &ur));
        let zl = kin.link_zeta[b];
        let zr = kin.rotor_zeta[k];
        let xl_t = m6_transpose(&xl);
        let xr_t = m6_transpose(&xr);
        let mut inc = m6_add(&m6_mul(&xl_t, &m6_mul(&ia[b], &xl)), &m6_mul(&xr_t, &m6_mul(ir, &xr)));
        for r in 0..6 {
            for c in 0..6 {
                inc[r][c] -= w[r] * d * w[c];
            }
        }
        let gain = d * (uu - dot6(&ul, &zl) - dot6(&ur, &zr));
        let pinc = add6(
            &add6(&m6_vec(&xl_t, &add6(&pa[b], &m6_vec(&ia[b], &zl))), &m6_vec(&xr_t, &add6(&pr, &m6_vec(ir, &zr)))),
            &scale6(&w, gain),
        );
        ia[b - 1] = m6_add(&ia[b - 1], &inc);
        pa[b - 1] = add6(&pa[b - 1], &pinc);
        cache[k] = (ul, ur, d, uu);
    }
    // rigid merge of the mount into the base
    let x1 = ct.link_parent[1].adjoint();
    let x1_t = m6_transpose(&x1);
    ia[0] = m6_add(&ia[0], &m6_mul(&x1_t, &m6_mul(&ia[1], &x1)));
    pa[0] = add6(&pa[0], &m6_vec(&x1_t, &pa[1]));

    let (_, _, a1) = base_twist(state);
    let mut a0 = add6(&ct.link_parent[0].ad_apply(&gravity_accel(model)), &kin.link_zeta[0]);
    let mut q1_dd = [S::zero(); 3];
    if !fixed_base {
        let u1: Vec<V6<S>> = a1.iter().map(|c| m6_vec(&ia[0], c)).collect();
        let mut dmat = m3_zero();
        let mut rhs = [S::zero(); 3];
        for i in 0..3 {
            for j in 0..3 {
                dmat[i][j] = dot6(&a1[i], &u1[j]);
            }
            rhs[i] = u.f1[i] - dot6(&a1[i], &pa[0]) - dot6(&u1[i], &a0);
        }
        let inv = m3_inverse(&dmat, PIVOT_TINY * (1.0 + ia[0][3][3].re().abs()).powi(3)).ok_or(CoreError::SingularInertia { body: 1 })?;
        q1_dd = m3_vec(&inv, &rhs);
        for j in 0..3 {
            a0 = add6(&a0, &scale6(&a1[j], q1_dd[j]));
        }
    }
    let mut acc = vec![v6_zero(); nb];
    acc[0] = a0;
    acc[1] = ct.link_parent[1].ad_apply(&a0);
    let mut theta_dd = vec![S::zero(); model.n];
    for b in 2..nb {
        let k = b - 2;
        let (ul, ur, d, uu) = cache[k];
        let parent = acc[b - 1];
        let al_pre = add6(&ct.link_parent[b].ad_apply(&parent), &kin.link_zeta[b]);
        let ar_pre = add6(&ct.rotor_parent[k].ad_apply(&parent), &kin.rotor_zeta[k]);
        let qdd = d * (uu - dot6(&ul, &al_pre) - dot6(&ur, &ar_pre));
        theta_dd[k] = qdd;
        acc[b] = add6(&al_pre, &scale6(&lift_axis(&model.a_link[k]), qdd));
    }
    Ok(Acceleration { q1_dd, theta_dd })
}

/// Forward dynamics at the model's configured motors.
pub fn forward_dynamics(model: &RobotModel, state: &RobotState, u: &GeneralizedForce) -> Result<Acceleration, CoreError> {
    forward_dynamics_with(model, &model.inertias, state, u, false)
}

/// State derivative `ẋ = f_c(x, u)` for `x = col{q1, θ, q̇1, θ̇}`.
pub fn state_derivative<S: Scalar>(
    model: &RobotModel,
    inertias: &Inertias<S>,
    x: &[S],
    u: &[S],
    fixed_base: bool,
) -> Result<Vec<S>, CoreError> {
    let dof = model.dof();
    if x.len() != 2 * dof || u.len() != dof {
        return Err(CoreError::Dimension(format!("expected x of {} and u of {dof}, got {} and {}", 2 * dof, x.len(), u.len())));
    }
    let state = RobotState::from_vector(x);
    let acc = forward_dynamics_with(model, inertias, &state, &GeneralizedForce::from_vector(u), fixed_base)?;
    let mut dx = Vec::with_capacity(2 * dof);
    dx.extend_from_slice(&x[dof..]);
    if fixed_base {
        dx[0] = S::zero();
        dx[1] = S::zero();
        dx[2] = S::zero();
    }
    dx.extend(acc.to_vector());
    Ok(dx)
}

/// Kinetic energy of links and rotors.
pub fn kinetic_energy(model: &RobotModel, state: &RobotState) -> f64 {
    let ct = model.chain_transforms(&state.q1, &state.theta);
    let kin = velocity_pass(model, &ct, state);
    let mut e = 0.0;
    for (g, v) in model.inertias.links.iter().zip(&kin.link_twist) {
        e += 0.5 * dot6(v, &m6_vec(g, v));
    }
    for (g, v) in model.inertias.rotors.iter().zip(&kin.rotor_twist) {
        e += 0.5 * dot6(v, &m6_vec(g, v));
    }
    e
}

/// Gravitational potential energy; each body's mass sits at its frame origin.
pub fn potential_energy(model: &RobotModel, state: &RobotState) -> f64 {
    let ct = model.chain_transforms(&state.q1, &state.theta);
    let links: f64 = model.inertias.links.iter().zip(&ct.link_world).map(|(g, t)| g[3][3] * t.translation[2]).sum();
    let rotors: f64 = model.inertias.rotors.iter().zip(&ct.rotor_world).map(|(g, t)| g[3][3] * t.translation[2]).sum();
    model.gravity * (links + rotors)
}

/// One `(state, input)` pair for cross-validation.
#[derive(Clone, Debug)]
pub struct Sample {
    pub state: RobotState,
    pub input: GeneralizedForce,
}

/// Error statistics of one input channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Mean absolute error as a percentage of the channel's largest magnitude.
    pub percent: f64,
    /// Max absolute error as a percentage of the channel's largest magnitude.
    pub max_percent: f64,
    /// Max of `|u_out − u_in| / (1 + |u_in|)`.
    pub max_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CrossValidation {
    pub channels: Vec<ChannelStats>,
    pub samples: usize,
}

impl CrossValidation {
    pub fn worst_rel(&self) -> f64 {
        self.channels.iter().map(|c| c.max_rel).fold(0.0, f64::max)
    }

    pub fn worst_percent(&self) -> f64 {
        self.channels.iter().map(|c| c.max_percent).fold(0.0, f64::max)
    }

    /// Plain-text table: channel, mean ± std, quartiles, max, percentage.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
            "channel", "mean", "std", "q1", "median", "q3", "max", "percent"
        );
        for c in &self.channels {
            s.push_str(&format!(
                "{:<8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.2e}%\n",
                c.name, c.mean, c.std, c.q1, c.median, c.q3, c.max, c.percent
            ));
        }
        s
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn channel_names(n: usize) -> Vec<String> {
    let mut names = vec!["tau_1z".to_string(), "f_1x".to_string(), "f_1y".to_string()];
    names.extend((0..n).map(|k| format!("tau_{}", k + 3)));
    names
}

/// Forward then inverse dynamics on every sample; statistics of the recovered input.
pub fn cross_validate(model: &RobotModel, samples: &[Sample]) -> Result<CrossValidation, CoreError> {
    if samples.is_empty() {
        return Ok(CrossValidation::default());
    }
    let results: Result<Vec<(Vec<f64>, Vec<f64>)>, CoreError> = samples
        .par_iter()
        .map(|s| {
            let acc = forward_dynamics(model, &s.state, &s.input)?;
            let back = inverse_dynamics(model, &s.state, &acc)?;
            Ok((s.input.to_vector(), back.to_vector()))
        })
        .collect();
    let results = results?;
    let names = channel_names(model.n);
    let mut channels = Vec::with_capacity(names.len());
    for (c, name) in names.into_iter().enumerate() {
        let mut errs: Vec<f64> = results.iter().map(|(a, b)| (b[c] - a[c]).abs()).collect();
        let peak = results.iter().map(|(a, _)| a[c].abs()).fold(0.0, f64::max);
        let max_rel = results.iter().map(|(a, b)| (b[c] - a[c]).abs() / (1.0 + a[c].abs())).fold(0.0, f64::max);
        let m = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / m;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m).sqrt();
        errs.sort_by(|a, b| a.total_cmp(b));
        let max = *errs.last().unwrap();
        let pct = |v: f64| if peak > 0.0 { 100.0 * v / peak } else { 0.0 };
        channels.push(ChannelStats {
            name,
            mean,
            std,
            q1: quantile(&errs, 0.25),
            median: quantile(&errs, 0.5),
            q3: quantile(&errs, 0.75),
            max,
            percent: pct(mean),
            max_percent: pct(max),
            max_rel,
        });
    }
    Ok(CrossValidation { channels, samples: samples.len() })
}
