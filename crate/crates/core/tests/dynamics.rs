use mobman_core::config::*;
use mobman_core::dynamics::*;
use mobman_core::robot::{build_chain, RobotModel, RobotState};
use mobman_core::spatial::*;
use mobman_core::CoreError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk() -> RobotModel {
    build_chain(&desk_robot(), &desk_motors()).unwrap()
}

fn six() -> RobotModel {
    build_chain(&six_dof_robot(), &six_dof_motors()).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> RobotState {
    let pi = std::f64::consts::PI;
    RobotState {
        q1: [rng.gen_range(-pi..pi), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        theta: (0..n).map(|_| rng.gen_range(-pi..pi)).collect(),
        q1_dot: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
        theta_dot: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

/// Joint-space mass matrix and bias from RNEA columns, then a dense solve.
fn mass_matrix_oracle(m: &RobotModel, s: &RobotState, u: &GeneralizedForce) -> Vec<f64> {
    let dof = m.dof();
    let h = inverse_dynamics(m, s, &Acceleration::zeros(m.n)).unwrap().to_vector();
    let still = RobotState { q1_dot: [0.0; 3], theta_dot: vec![0.0; m.n], ..s.clone() };
    let g0 = m.with_gravity(0.0);
    let mut mm = DMatrix::zeros(dof, dof);
    for j in 0..dof {
        let mut e = vec![0.0; dof];
        e[j] = 1.0;
        let col = inverse_dynamics(&g0, &still, &Acceleration::from_vector(&e)).unwrap().to_vector();
        for i in 0..dof {
            mm[(i, j)] = col[i];
        }
    }
    let rhs = DVector::from_iterator(dof, u.to_vector().iter().zip(&h).map(|(a, b)| a - b));
    mm.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn aba_matches_mass_matrix_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for model in [desk(), six()] {
        for _ in 0..20 {
            let s = random_state(&mut rng, model.n);
            let u = GeneralizedForce::from_vector(&(0..model.dof()).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let a = forward_dynamics(&model, &s, &u).unwrap().to_vector();
            let oracle = mass_matrix_oracle(&model, &s, &u);
            for (x, y) in a.iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn mass_matrix_is_symmetric_positive_definite() {
    let m = six().with_gravity(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = RobotState { q1_dot: [0.0; 3], theta_dot: vec![0.0; 6], ..random_state(&mut rng, 6) };
    let dof = m.dof();
    let mut mm = DMatrix::zeros(dof, dof);
    for j in 0..dof {
        let mut e = vec![0.0; dof];
        e[j] = 1.0;
        let col = inverse_dynamics(&m, &s, &Acceleration::from_vector(&e)).unwrap().to_vector();
        for i in 0..dof {
            // motor torques are rotor-side; joint-side rows carry the gear ratio
            let z = if i < 3 { 1.0 } else { m.gear_ratios[i - 3] };
            mm[(i, j)] = z * col[i];
        }
    }
    assert!((&mm - mm.transpose()).amax() < 1e-10);
    assert!(mm.cholesky().is_some());
}

// Plain articulated-body algorithm for a chain without rotors.
fn textbook_aba(m: &RobotModel, s: &RobotState, u: &GeneralizedForce) -> Vec<f64> {
    let ct = m.chain_transforms(&s.q1, &s.theta);
    let nb = m.n + 2;
    let a1 = RobotModel::base_subspace(s.q1[0]);
    let da1 = RobotModel::base_subspace_derivative(s.q1[0]);
    let mut v = vec![[0.0; 6]; nb];
    let mut c = vec![[0.0; 6]; nb];
    for j in 0..3 {
        v[0] = add6(&v[0], &scale6(&a1[j], s.q1_dot[j]));
        c[0] = add6(&c[0], &scale6(&da1[j], s.q1_dot[j] * s.q1_dot[0]));
    }
    v[1] = ct.link_parent[1].ad_apply(&v[0]);
    for b in 2..nb {
        let sq = scale6(&m.a_link[b - 2], s.theta_dot[b - 2]);
        v[b] = add6(&ct.link_parent[b].ad_apply(&v[b - 1]), &sq);
        c[b] = ad_apply(&v[b], &sq);
    }
    let mut ia = m.inertias.links.clone();
    let mut pa: Vec<[f64; 6]> = (0..nb).map(|b| scale6(&ad_transpose_apply(&v[b], &m6_vec(&ia[b], &v[b])), -1.0)).collect();
    let mut uu = vec![[0.0; 6]; nb];
    let mut d = vec![0.0; nb];
    let mut small_u = vec![0.0; nb];
    for b in (2..nb).rev() {
        let sa = m.a_link[b - 2];
        uu[b] = m6_vec(&ia[b], &sa);
        d[b] = dot6(&sa, &uu[b]);
        small_u[b] = m.gear_ratios[b - 2] * u.tau[b - 2] - dot6(&sa, &pa[b]);
        let mut ia_art = ia[b];
        for r in 0..6 {
            for q in 0..6 {
                ia_art[r][q] -= uu[b][r] * uu[b][q] / d[b];
            }
        }
        let pa_art = add6(&add6(&pa[b], &m6_vec(&ia_art, &c[b])), &scale6(&uu[b], small_u[b] / d[b]));
        let x = ct.link_parent[b].adjoint();
        let xt = m6_transpose(&x);
        ia[b - 1] = m6_add(&ia[b - 1], &m6_mul(&xt, &m6_mul(&ia_art, &x)));
        pa[b - 1] = add6(&pa[b - 1], &m6_vec(&xt, &pa_art));
    }
    let x1 = ct.link_parent[1].adjoint();
    let x1t = m6_transpose(&x1);
    ia[0] = m6_add(&ia[0], &m6_mul(&x1t, &m6_mul(&ia[1], &x1)));
    pa[0] = add6(&pa[0], &m6_vec(&x1t, &pa[1]));
    let ag = add6(&ct.link_parent[0].ad_apply(&[0.0, 0.0, 0.0, 0.0, 0.0, m.gravity]), &c[0]);
    let dm = DMatrix::from_fn(3, 3, |i, j| dot6(&a1[i], &m6_vec(&ia[0], &a1[j])));
    let rhs = DVector::from_fn(3, |i, _| u.f1[i] - dot6(&a1[i], &add6(&pa[0], &m6_vec(&ia[0], &ag))));
    let q1dd = dm.lu().solve(&rhs).unwrap();
    let mut acc = vec![[0.0; 6]; nb];
    acc[0] = ag;
    for j in 0..3 {
        acc[0] = add6(&acc[0], &scale6(&a1[j], q1dd[j]));
    }
    acc[1] = ct.link_parent[1].ad_apply(&acc[0]);
    let mut out: Vec<f64> = q1dd.iter().copied().collect();
    for b in 2..nb {
        let pre = add6(&ct.link_parent[b].ad_apply(&acc[b - 1]), &c[b]);
        let qdd = (small_u[b] - dot6(&uu[b], &pre)) / d[b];
        acc[b] = add6(&pre, &scale6(&m.a_link[b - 2], qdd));
        out.push(qdd);
    }
    out
}

#[test]
fn rotorless_chain_matches_textbook_aba() {
    let mut m = six();
    for r in m.inertias.rotors.iter_mut() {
        *r = [[0.0; 6]; 6];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = random_state(&mut rng, 6);
        let u = GeneralizedForce::from_vector(&(0..9).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
        let a = forward_dynamics(&m, &s, &u).unwrap().to_vector();
        let t = textbook_aba(&m, &s, &u);
        for (x, y) in a.iter().zip(&t) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }
}

fn single_link(axis: [f64; 3], offset: [f64; 3], com: [f64; 3], mass: f64) -> RobotConfig {
    let mut c = desk_robot();
    c.n = 1;
    c.joints.truncate(1);
    c.joints[0].axis = axis;
    c.joints[0].offset_m = offset;
    c.joints[0].link.mass_kg = mass;
    c.joints[0].link.com_offset_m = com;
    c.joints[0].link.inertia_kgm2 = [[1e-3, 0.0, 0.0], [0.0, 1e-3, 0.0], [0.0, 0.0, 1e-3]];
    c.end_effector.offset_m = com;
    c
}

#[test]
fn horizontal_pendulum_statics() {
    let (m_link, r) = (2.0, 0.4);
    let cfg = single_link([0.0, 1.0, 0.0], [0.0, 0.0, 0.1], [r, 0.0, 0.0], m_link);
    let model = build_chain(&cfg, &[desk_motor()]).unwrap();
    let f = inverse_dynamics(&model, &RobotState::zeros(1), &Acceleration::zeros(1)).unwrap();
    // the stator sits on the mount and the rotor on the axis: only the link has a moment arm
    let expected = -m_link * 9.81 * r / 50.0;
    assert!((f.tau[0] - expected).abs() < 1e-12, "{} vs {expected}", f.tau[0]);
}

#[test]
fn arm_hanging_about_vertical_axes_needs_no_torque() {
    let mut cfg = desk_robot();
    cfg.joints[1].axis = [0.0, 0.0, 1.0];
    let m = build_chain(&cfg, &desk_motors()).unwrap();
    let mut s = RobotState::zeros(2);
    s.theta = vec![0.7, -1.3];
    let f = inverse_dynamics(&m, &s, &Acceleration::zeros(2)).unwrap();
    for t in f.tau {
        assert!(t.abs() < 1e-12);
    }
}

#[test]
fn base_force_accelerates_total_mass() {
    let mut cfg = desk_robot();
    for j in cfg.joints.iter_mut() {
        j.link.mass_kg = 1e-9;
        j.link.inertia_kgm2 = [[1e-12, 0.0, 0.0], [0.0, 1e-12, 0.0], [0.0, 0.0, 1e-12]];
    }
    let m = build_chain(&cfg, &desk_motors()).unwrap();
    let force = 7.0;
    let a = forward_dynamics(&m, &RobotState::zeros(2), &GeneralizedForce { f1: [0.0, force, 0.0], tau: vec![0.0; 2] }).unwrap();
    // motors stay attached and the arm holds still in translation, so all mass moves together
    assert!((a.q1_dd[1] - force / m.total_mass()).abs() < 1e-10, "{} vs {}", a.q1_dd[1], force / m.total_mass());
    assert!(a.q1_dd[2].abs() < 1e-12);
}

fn rk4(m: &RobotModel, x: &[f64], dt: f64) -> Vec<f64> {
    let u = vec![0.0; m.dof()];
    let f = |x: &[f64]| state_derivative(m, &m.inertias, x, &u, false).unwrap();
    let k1 = f(x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = f(&x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = f(&x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = f(&x4);
    (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

fn energy(m: &RobotModel, x: &[f64]) -> f64 {
    let s = RobotState::from_vector(x);
    kinetic_energy(m, &s) + potential_energy(m, &s)
}

#[test]
fn free_fall_conserves_energy() {
    let m = desk();
    let mut x = RobotState { q1: [0.1, 0.0, 0.0], theta: vec![0.3, 0.9], q1_dot: [0.2, 0.1, -0.1], theta_dot: vec![0.5, -0.4] }.to_vector();
    let e0 = energy(&m, &x);
    for _ in 0..2000 {
        x = rk4(&m, &x, 1e-4);
    }
    let e1 = energy(&m, &x);
    assert!((e1 - e0).abs() <= 1e-5 * e0.abs(), "{e0} -> {e1}");
}

#[test]
fn zero_gravity_kinetic_energy_is_conserved() {
    let m = desk().with_gravity(0.0);
    let mut x = RobotState { q1: [0.0; 3], theta: vec![0.2, -0.5], q1_dot: [0.3, 0.2, -0.1], theta_dot: vec![1.0, -1.5] }.to_vector();
    let e0 = kinetic_energy(&m, &RobotState::from_vector(&x));
    for _ in 0..10_000 {
        x = rk4(&m, &x, 1e-4);
    }
    let e1 = kinetic_energy(&m, &RobotState::from_vector(&x));
    assert!((e1 - e0).abs() <= 1e-6 * e0, "{e0} -> {e1}");
}

#[test]
fn zero_mass_rotor_and_link_is_singular() {
    let mut m = desk();
    let b = 3;
    m.inertias.links[b] = [[0.0; 6]; 6];
    m.inertias.rotors[1] = [[0.0; 6]; 6];
    let r = forward_dynamics(&m, &RobotState::zeros(2), &GeneralizedForce::zeros(2));
    assert!(matches!(r, Err(CoreError::SingularInertia { .. })));
}

#[test]
fn single_link_roundtrip_is_exact() {
    let cfg = single_link([0.0, 1.0, 0.0], [0.0, 0.0, 0.1], [0.3, 0.0, 0.0], 1.5);
    let m = build_chain(&cfg, &[desk_motor()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<Sample> = (0..50)
        .map(|_| Sample {
            state: random_state(&mut rng, 1),
            input: GeneralizedForce::from_vector(&(0..4).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>()),
        })
        .collect();
    let cv = cross_validate(&m, &samples).unwrap();
    for c in &cv.channels {
        assert!(c.max <= 1e-9, "{}: {}", c.name, c.max);
    }
}

#[test]
fn cross_validation_table_has_every_channel() {
    let m = desk();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<Sample> = (0..10)
        .map(|_| Sample { state: random_state(&mut rng, 2), input: GeneralizedForce::from_vector(&[1.0, 2.0, -1.0, 0.05, -0.03]) })
        .collect();
    let cv = cross_validate(&m, &samples).unwrap();
    assert_eq!(cv.channels.len(), 5);
    let t = cv.table();
    for name in ["tau_1z", "f_1x", "f_1y", "tau_3", "tau_4", "percent"] {
        assert!(t.contains(name));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_forward_inverse(seed in any::<u64>()) {
        let m = six();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, 6);
        let a_in: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = inverse_dynamics(&m, &s, &Acceleration::from_vector(&a_in)).unwrap();
        let a_out = forward_dynamics(&m, &s, &f).unwrap().to_vector();
        let scale = 1.0 + a_in.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = a_in.iter().zip(&a_out).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(err / scale <= 1e-6);
    }

    #[test]
    fn planar_translation_leaves_joint_torques_unchanged(dx in -5.0..5.0f64, dy in -5.0..5.0f64, seed in any::<u64>()) {
        let m = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, 2);
        let a = Acceleration::from_vector(&(0..5).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let f0 = inverse_dynamics(&m, &s, &a).unwrap();
        let mut moved = s.clone();
        moved.q1[1] += dx;
        moved.q1[2] += dy;
        let f1 = inverse_dynamics(&m, &moved, &a).unwrap();
        for (x, y) in f0.tau.iter().zip(&f1.tau) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}
