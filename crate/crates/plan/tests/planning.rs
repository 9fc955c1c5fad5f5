use mobman_core::config::{desk_motors, desk_robot};
use mobman_core::dynamics::{inverse_dynamics, kinetic_energy, Acceleration};
use mobman_core::robot::{build_chain, RobotModel, RobotState};
use mobman_nlp::{NlpProblem, Options, Status};
use mobman_plan::collocation::Ocp;
use mobman_plan::planning::*;
use mobman_plan::PlanError;

fn desk() -> RobotModel {
    build_chain(&desk_robot(), &desk_motors()).unwrap()
}

fn reach(model: &RobotModel) -> PlanningProblem {
    let x0 = vec![0.0; model.state_dim()];
    PlanningProblem::new(model.clone(), x0, [1.2, 0.6, 0.5], 4.0)
}

fn gravity_hold(model: &RobotModel, x: &[f64]) -> Vec<f64> {
    let s = RobotState::from_vector(x);
    let g = inverse_dynamics(model, &s, &Acceleration::zeros(model.n)).unwrap();
    let mut u = g.f1.to_vec();
    u.extend(g.tau);
    u
}

#[test]
fn profile_closed_form() {
    let p = BaseProfile::new(0.5, 1.0);
    assert_eq!(p.t_f1, 4.0);
    let tf = p.t_f1;
    assert_eq!(p.eval(0.0), (0.0, 0.0, 0.0));
    let (a, v, x) = p.eval(tf);
    assert_eq!((a, v), (0.0, 0.0));
    assert_eq!(x, 0.5 * tf * tf / 8.0);
    assert!((p.eval(tf / 2.0).1 - 0.5 * tf / 4.0).abs() < 1e-15);
    // pieces meet at their knots
    for (k, t) in [(0, 0.25 * tf), (1, 0.75 * tf)] {
        let (a0, v0, x0) = p.eval_piece(k, t);
        let (a1, v1, x1) = p.eval_piece(k + 1, t);
        assert!((a0 - a1).abs() < 1e-12 && (v0 - v1).abs() < 1e-12 && (x0 - x1).abs() < 1e-12, "knot {k}");
    }
    let (a, v, x) = p.eval_piece(2, tf);
    assert!(a.abs() < 1e-12 && v.abs() < 1e-12 && (x - 1.0).abs() < 1e-12);
    let (a, v, x) = p.eval_piece(0, 0.0);
    assert_eq!((a, v, x), (0.0, 0.0, 0.0));
}

#[test]
fn profile_velocity_integrates_acceleration() {
    let p = BaseProfile::new(0.25, 0.8);
    let m = 20000;
    let h = p.t_f1 / m as f64;
    let (mut v, mut x) = (0.0, 0.0);
    for i in 0..m {
        let t = i as f64 * h;
        let (a0, v0, _) = p.eval(t);
        let (am, vm, _) = p.eval(t + 0.5 * h);
        let (a1, v1, _) = p.eval(t + h);
        v += h / 6.0 * (a0 + 4.0 * am + a1);
        x += h / 6.0 * (v0 + 4.0 * vm + v1);
    }
    assert!(v.abs() < 1e-9 && (x - 0.8).abs() < 1e-9, "{v} {x}");
}

#[test]
fn negative_displacement_mirrors() {
    let [px, py] = sequential_base_trajectory([0.5, 0.25], [-1.0, 0.5]);
    assert_eq!(px.t_f1, 4.0);
    assert_eq!(py.t_f1, 4.0);
    let (a, v, x) = px.eval(1.3);
    let (b, w, y) = BaseProfile::new(0.5, 1.0).eval(1.3);
    assert_eq!((a, v, x), (-b, -w, -y));
    assert_eq!(px.eval(10.0).2, -1.0);
}

#[test]
fn constraint_counts() {
    let model = desk();
    let mut p = reach(&model);
    p.n_intervals = 7;
    p.n_p = 2;
    let nlp = build_integrated_ocp(&p).unwrap();
    let sd = model.state_dim();
    assert_eq!(nlp.num_defects(), 7 * 2 * sd);
    assert_eq!(nlp.num_continuity(), 7 * sd);
    assert_eq!(nlp.num_path(), 7 * 2 * 2 * model.n);
    assert_eq!(nlp.num_terminal(), 3);
    assert_eq!(nlp.num_constraints(), 7 * 2 * sd + 7 * sd + 7 * 2 * 2 * model.n + 3);
    p.torque_limit = TorqueLimit::Flat;
    assert_eq!(build_integrated_ocp(&p).unwrap().num_path(), 7 * 2 * 4 * model.n);
}

#[test]
fn bad_bounds_rejected() {
    let model = desk();
    let mut p = reach(&model);
    p.state_bounds.0[4] = 5.0;
    assert!(matches!(build_integrated_ocp(&p), Err(PlanError::InfeasibleBounds(_))));
    let mut p = reach(&model);
    p.x0.pop();
    assert!(matches!(build_integrated_ocp(&p), Err(PlanError::Shape(_))));
}

#[test]
fn envelope_is_queried_at_rotor_speed() {
    let model = desk();
    let nlp = build_integrated_ocp(&reach(&model)).unwrap();
    let dof = model.dof();
    let mut x = vec![0.0; model.state_dim()];
    x[dof + 3] = 2.5;
    let mut u = vec![0.0; dof];
    u[3] = 0.4;
    let g = nlp.ocp.path_constraints(&x, &u, &[]);
    let env = mobman_core::motor::envelope_from_em(&model.motor_em[0], model.motors[0].v_max, model.motors[0].i_max).unwrap();
    let (tm, _) = env.tau_max(125.0);
    assert_eq!(model.gear_ratios[0], 50.0);
    assert!((g[0] - (tm - 0.4)).abs() < 1e-12 && (g[1] - (tm + 0.4)).abs() < 1e-12);
    // above the corner speed the envelope falls off, so a joint-speed query would differ
    assert!(tm < env.tau_max(2.5).0);
}

#[test]
fn static_target_needs_only_gravity_compensation() {
    let model = desk();
    let mut x0 = vec![0.0; model.state_dim()];
    // horizontal arm: gravity torque is stationary in the pitch angle, and over a
    // short horizon holding beats any excursion
    x0[3] = 0.3;
    let e = model.end_effector_position(&[0.0, 0.0, 0.0], &x0[3..5]);
    let mut p = PlanningProblem::new(model.clone(), x0.clone(), e, 0.2);
    p.n_intervals = 6;
    let s = plan(&p, &Options::default()).unwrap();
    assert_eq!(s.status, Status::Success);
    let hold = gravity_hold(&model, &x0);
    assert!(hold[4].abs() > 1e-3);
    for u in &s.trajectory.controls {
        for (a, b) in u.iter().zip(&hold) {
            assert!((a - b).abs() < 1e-5, "{u:?} vs {hold:?}");
        }
    }
}

#[test]
fn reach_then_infeasible_below_minimum_time() {
    let model = desk();
    let p = reach(&model);
    let opts = Options::default();
    let to = time_optimal(&p, &opts).unwrap();
    assert!(to.is_success(), "{:?}", to.status);
    assert!(to.terminal_error < 1e-6 && to.max_defect < 1e-6 && to.min_slack > -1e-8);
    let t_star = to.t_f();
    assert!(t_star > 1.0 && t_star < 5.0, "{t_star}");

    // every transcribed row holds when re-evaluated from the decoded trajectory
    let nlp = build_integrated_ocp(&PlanningProblem { objective: Objective::MinTime, ..p.clone() }).unwrap();
    let w = nlp.encode(&to.trajectory).unwrap();
    let (lo, hi) = nlp.constraint_bounds();
    for (i, c) in nlp.constraints(&w).iter().enumerate() {
        assert!(*c >= lo[i] - 1e-6 && *c <= hi[i] + 1e-6, "row {i}: {c}");
    }

    let mut slow = p.clone();
    slow.t_f = 1.5 * t_star;
    let s = plan(&slow, &opts).unwrap();
    assert!(s.is_success(), "{:?}", s.status);
    assert!(s.terminal_error < 1e-6 && s.max_defect < 1e-6 && s.min_slack > -1e-8);

    let mut fast = p.clone();
    fast.t_f = 0.9 * t_star;
    let short = Options { max_iter: 300, ..opts };
    let s = plan(&fast, &short).unwrap();
    assert!(!s.is_success() || s.max_defect > 1e-6 || s.terminal_error > 1e-6);
    assert!(s.check().is_err() || s.max_defect > 1e-6);
}

#[test]
fn sequential_plan_reaches_and_is_slower() {
    let model = desk();
    let mut p = reach(&model);
    p.t_f = 4.0;
    let seq = plan_sequential(&p, &SequentialOptions::default(), &Options::default()).unwrap();
    assert!(seq.arm.is_success(), "{:?}", seq.arm.status);
    assert!(seq.arm.terminal_error < 1e-6);
    let expected = (8.0 * seq.profiles[0].p_f.abs() / 0.25).sqrt();
    assert_eq!(seq.profiles[0].t_f1, expected);
    assert!(seq.completion_time() > seq.t_f1);
    // the base stops where the arm can reach the target without moving it
    let x = seq.arm.trajectory.x_final.clone();
    assert!(x[0].abs() < 1e-9 && (x[1] - seq.profiles[0].p_f).abs() < 1e-9 && (x[2] - seq.profiles[1].p_f).abs() < 1e-9);
    assert!(seq.planned_effort() > seq.arm.effort);

    let fixed = SequentialOptions { standoff_m: Some(-1.0), ..SequentialOptions::default() };
    assert!(matches!(plan_sequential(&p, &fixed, &Options::default()), Err(PlanError::Config(_))));
}

#[test]
fn arm_ik_hits_reachable_point() {
    let model = desk();
    let goal = model.end_effector_position(&[0.2, 0.5, -0.3], &[0.7, -0.2]);
    let (th, err) = arm_ik(&model, [0.2, 0.5, -0.3], &[0.0, 0.0], goal);
    assert!(err < 1e-10, "{err} {th:?}");
}

#[test]
fn equilibrium_hold_does_not_drift() {
    let model = desk();
    let mut x0 = vec![0.0; model.state_dim()];
    x0[3] = 0.4;
    x0[4] = 0.3;
    let u = gravity_hold(&model, &x0);
    let r = simulate_closed_loop(&model, &HoldReference { x: x0.clone(), u }, &x0, &PidGains::desk(2), None, 1e-3, 1.0).unwrap();
    let drift = r.final_state().iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-8, "{drift}");
    assert_eq!(r.states.len(), 1001);
}

#[test]
fn free_motion_conserves_energy() {
    let model = desk().with_gravity(0.0);
    let mut x0 = vec![0.0; model.state_dim()];
    let dof = model.dof();
    x0[3] = 0.2;
    x0[dof] = 0.3;
    x0[dof + 1] = 0.2;
    x0[dof + 2] = -0.1;
    x0[dof + 3] = 0.8;
    x0[dof + 4] = -0.5;
    let hold = HoldReference { x: vec![0.0; model.state_dim()], u: vec![0.0; dof] };
    let r = simulate_closed_loop(&model, &hold, &x0, &PidGains::zero(2), None, 1e-4, 1.0).unwrap();
    let e0 = kinetic_energy(&model, &RobotState::from_vector(&x0));
    let e1 = kinetic_energy(&model, &RobotState::from_vector(r.final_state()));
    assert!(((e1 - e0) / e0).abs() <= 1e-6, "{e0} {e1}");
    assert_eq!(r.effort, 0.0);
}

#[test]
fn noisy_rollouts_are_seed_deterministic() {
    let model = desk();
    let x0 = vec![0.0; model.state_dim()];
    let hold = HoldReference { x: x0.clone(), u: gravity_hold(&model, &x0) };
    let run = |seed| simulate_closed_loop(&model, &hold, &x0, &PidGains::desk(2), Some(&NoiseSpec::paper(seed)), 1e-3, 0.5).unwrap();
    let (a, b, c) = (run(7), run(7), run(8));
    assert_eq!(a, b);
    assert_ne!(a.states, c.states);
    let err = a.end_effector_error(&model, model.end_effector_position(&[0.0; 3], &[0.0, 0.0]));
    assert!(err > 0.0 && err < 0.5, "{err}");
}

#[test]
fn simulation_rejects_bad_inputs() {
    let model = desk();
    let x0 = vec![0.0; model.state_dim()];
    let hold = HoldReference { x: x0.clone(), u: vec![0.0; 5] };
    assert!(matches!(simulate_closed_loop(&model, &hold, &x0, &PidGains::desk(2), None, 2e-3, 1.0), Err(PlanError::Config(_))));
    let mut g = PidGains::desk(2);
    g.arm_kp[0] = -1.0;
    assert!(matches!(simulate_closed_loop(&model, &hold, &x0, &g, None, 1e-3, 1.0), Err(PlanError::Config(_))));
    assert!(matches!(simulate_closed_loop(&model, &hold, &x0[1..], &PidGains::desk(2), None, 1e-3, 1.0), Err(PlanError::Shape(_))));
}

#[test]
fn metrics_row_round_trips() {
    let m = Metrics { name: "P1".into(), time_s: 1.0 / 3.0, effort: 2.5, error_mm: 0.1, success: true };
    let row = m.row();
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!(f[1].parse::<f64>().unwrap(), 1.0 / 3.0);
    assert_eq!(Metrics::header().split(',').count(), f.len());
}
