use mobman_core::config::{desk_motor, desk_robot, MotorConfig};
use mobman_core::motor::design_margins;
use mobman_core::robot::build_chain;
use mobman_nlp::{NlpProblem, Options};
use mobman_plan::codesign::*;
use mobman_plan::planning::*;
use mobman_plan::PlanError;

/// Feasible but heavy: about 2.7 kg per motor with a wide rotor.
fn oversized() -> MotorConfig {
    MotorConfig {
        l_mm: 24.5,
        r_ro_mm: 33.0,
        r_so_mm: 66.5,
        h_m_mm: 1.5,
        h_sy_mm: 9.5,
        w_tooth_mm: 13.5,
        b0_mm: 1.5,
        v_max_v: 48.0,
        i_max_a: 5.0,
    }
}

fn problem(motor: MotorConfig, n_intervals: usize) -> CodesignProblem {
    let model = build_chain(&desk_robot(), &[motor, motor]).unwrap();
    let x0 = vec![0.0; model.state_dim()];
    let mut p = PlanningProblem::new(model, x0, [1.2, 0.6, 0.5], 4.0);
    p.n_intervals = n_intervals;
    CodesignProblem::new(p)
}

#[test]
fn infeasible_seeds_rejected() {
    let mut bad = oversized();
    bad.l_mm = 90.0;
    let p = problem(desk_motor(), 4).with_seed(vec![bad.into(); 2]);
    match p {
        Ok(p) => assert!(matches!(build_codesign_nlp(&p), Err(PlanError::InfeasibleSeed(_)))),
        Err(e) => assert!(matches!(e, PlanError::Core(_))),
    }
    let mut p = problem(oversized(), 4);
    p.boxes[0][0] = (24.5, 100.0);
    assert!(matches!(build_codesign_nlp(&p), Err(PlanError::InfeasibleSeed(_))));
    let p = problem(desk_motor(), 4);
    assert!(matches!(build_codesign_nlp(&p), Err(PlanError::InfeasibleSeed(_))));
}

#[test]
fn frozen_design_is_the_flat_planner() {
    let mut p = problem(desk_motor(), 6);
    p.freeze_all();
    let nlp = build_codesign_nlp(&p).unwrap();
    let plain = build_integrated_ocp(&p.seeded_problem()).unwrap();
    assert_eq!(nlp.num_constraints(), plain.num_constraints());
    assert_eq!(nlp.num_variables(), plain.num_variables() + 14);
    let opts = Options::default();
    let a = solve(&nlp, None, &opts).unwrap();
    let b = solve(&plain, None, &opts).unwrap();
    assert!(a.is_success() && b.is_success());
    assert!((a.objective - b.objective).abs() <= 1e-8 * (1.0 + b.objective.abs()), "{} {}", a.objective, b.objective);
    let designs = decode_designs(&nlp, &a.x);
    assert_eq!(designs[0].beta(), p.seed[0].beta());

    // the desk motor sits on the h_sy box edge, so only frozen use is allowed
    let mut one = problem(oversized(), 6);
    one.freeze(1);
    let nlp = build_codesign_nlp(&one).unwrap();
    assert_eq!(nlp.num_param_constraints(), 14);
}

#[test]
fn design_derivatives_match_finite_differences() {
    let p = problem(oversized(), 3);
    let nlp = build_codesign_nlp(&p).unwrap();
    let n = nlp.num_variables();
    let mut w = hold_guess(&nlp);
    for (i, v) in w.iter_mut().enumerate() {
        *v += 0.01 * ((i as f64) * 0.37).sin();
    }
    let p0 = nlp.param_index();
    for v in &mut w[p0..p0 + 14] {
        *v = 0.01;
    }
    let mut jac = std::collections::HashMap::new();
    for ((r, c), v) in nlp.jacobian_structure().into_iter().zip(nlp.jacobian_values(&w)) {
        *jac.entry((r, c)).or_insert(0.0) += v;
    }
    let h = 1e-6;
    let mut nonzero = 0;
    for c in p0..n {
        let mut a = w.clone();
        let mut b = w.clone();
        a[c] += h;
        b[c] -= h;
        let (ga, gb) = (nlp.constraints(&a), nlp.constraints(&b));
        for r in 0..nlp.num_defects() {
            let fd = (ga[r] - gb[r]) / (2.0 * h);
            let an = jac.get(&(r, c)).copied().unwrap_or(0.0);
            assert!((an - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "({r},{c}): {an} vs {fd}");
            if fd.abs() > 1e-8 {
                nonzero += 1;
            }
        }
    }
    assert!(nonzero > 0);
}

#[test]
fn codesign_lightens_an_oversized_seed() {
    let p = problem(oversized(), 8);
    let r = run_codesign(&p, &Options::default()).unwrap();
    let rep = &r.report;
    assert!(rep.optimized_motor_mass < rep.seed_motor_mass, "{}", rep.to_text());
    assert!(r.solution.objective <= r.seeded.objective + 1e-6 * r.seeded.objective.abs());
    assert!(rep.envelope_consistent);
    for d in &r.designs {
        for c in design_margins(d) {
            assert!(c.margin >= -1e-8, "{} {}", c.id, c.margin);
        }
    }
    assert!(rep.to_text().contains("Reduced by"));
    assert_eq!(rep.to_csv().lines().count(), 1 + 2 * 10 + 2);
    assert_eq!(r.model.motors[0].beta(), r.designs[0].beta());
}
