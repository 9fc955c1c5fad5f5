//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use mobman_cli::commands::{compute_motor_map, random_samples, run_codesign_doc, run_plan, Mode, MotorMapArgs};
use mobman_cli::document::Document;
use mobman_core::autodiff::{check_gradient, DiffFn};
use mobman_core::config::reference_motor;
use mobman_core::dynamics::{cross_validate, inverse_dynamics, kinetic_energy, state_derivative, Acceleration};
use mobman_core::motor::{torque_envelope, MotorDesign};
use mobman_core::robot::{RobotModel, RobotState};
use mobman_core::Scalar;
use mobman_nlp::{solve as nlp_solve, Options, Status};
use mobman_plan::codesign::build_codesign_nlp;
use mobman_plan::collocation::{transcribe, CollocationScheme, Ocp, TimeMode, TranscriptionSpec};
use mobman_plan::planning::{
    build_integrated_ocp, sequential_base_trajectory, simulate_closed_loop, solve, HoldReference, NoiseSpec, PidGains,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

fn desk_doc() -> Document {
    Document::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")).expect("desk config")
}

fn six_dof_doc() -> Document {
    Document::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/six_dof.toml")).expect("six-dof config")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: usize, title: &str, f: impl FnOnce() -> Result<Outcome, String>) -> bool {
    let start = Instant::now();
    let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    println!("criterion {id} {}: {title} [{}] ({:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
    o.pass
}

fn c1_dynamics_roundtrip() -> Result<Outcome, String> {
    let doc = six_dof_doc();
    let model = doc.model().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let cv = cross_validate(&model, &random_samples(&model, 100, 1)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let pct = cv.channels.iter().map(|c| c.percent).fold(0.0, f64::max);
    let pass = cv.channels.len() == 9 && cv.worst_rel() <= 1e-6 && pct <= 2.0 && secs <= 10.0;
    Ok(outcome(pass, format!("9 channels, max rel {:.2e}, max percent {:.2e}%, {secs:.2} s", cv.worst_rel(), pct)))
}

fn c2_envelope_vs_map() -> Result<Outcome, String> {
    let start = Instant::now();
    let doc = desk_doc();
    let mut worst_cells = 0;
    let mut worst_jump = 0.0f64;
    for i in [5.0, 21.67, 30.0] {
        let args = MotorMapArgs { joint: 0, reference: true, i_max_a: Some(i), n_omega: 200, n_tau: 200, omega_max: None, tau_max: None };
        let m = compute_motor_map(&doc, &args).map_err(|e| e.to_string())?;
        worst_cells = worst_cells.max(m.max_cell_offset);
        let env = torque_envelope(&MotorDesign::from(reference_motor(i))).map_err(|e| e.to_string())?;
        for w in std::iter::once(env.omega_r).chain(env.omega_s) {
            let jump = (env.tau_max(w * (1.0 - 1e-13)).0 - env.tau_max(w * (1.0 + 1e-13)).0).abs();
            worst_jump = worst_jump.max(jump);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_cells <= 1 && worst_jump <= 1e-9 && secs <= 30.0;
    Ok(outcome(pass, format!("boundary within {worst_cells} cell(s), max jump {worst_jump:.1e} N·m, {secs:.2} s")))
}

/// `f_c(x, u, β)` on the stacked vector `[x, u, β]`.
struct Fc(RobotModel);

impl DiffFn for Fc {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        let m = &self.0;
        let (nx, nu) = (m.state_dim(), m.dof());
        let designs: Vec<MotorDesign<S>> = (0..m.n)
            .map(|k| MotorDesign::from_beta(&z[nx + nu + 7 * k..nx + nu + 7 * k + 7], m.motors[k].v_max, m.motors[k].i_max))
            .collect();
        let g = m.inertias_for_designs(&designs).unwrap();
        state_derivative(m, &g, &z[..nx], &z[nx..nx + nu], false).unwrap()
    }
}

fn c3_jacobians() -> Result<Outcome, String> {
    let model = desk_doc().model().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = Fc(model.clone());
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut z: Vec<f64> = (0..model.state_dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        z.extend((0..model.dof()).map(|_| rng.gen_range(-0.5..0.5)));
        for d in &model.motors {
            z.extend(d.beta().iter().map(|b| b * rng.gen_range(0.97..1.03)));
        }
        let r = check_gradient(&f, &z, 1e-6);
        worst = worst.max(if r.nonsmooth { f64::INFINITY } else { r.max_rel_err });
    }
    Ok(outcome(worst <= 1e-5, format!("20 points, max rel error {worst:.2e}")))
}

struct Decay;

impl Ocp for Decay {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn has_running_cost(&self) -> bool {
        false
    }
    fn dynamics<S: Scalar>(&self, x: &[S], _u: &[S], _p: &[S]) -> Vec<S> {
        vec![-x[0]]
    }
}

fn c4_collocation() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for n_p in 1..=3 {
        let s = CollocationScheme::gauss(n_p).map_err(|e| e.to_string())?;
        for d in 0..=n_p as i32 {
            for i in 0..=n_p {
                let got: f64 = (0..=n_p).map(|j| s.c[j][i] * s.points[j].powi(d)).sum();
                let want = if d == 0 { 0.0 } else { d as f64 * s.points[i].powi(d - 1) };
                worst = worst.max((got - want).abs());
            }
            worst = worst.max(((0..=n_p).map(|j| s.d[j] * s.points[j].powi(d)).sum::<f64>() - 1.0).abs());
        }
        for d in 0..2 * n_p as i32 {
            worst = worst.max(((0..=n_p).map(|j| s.b[j] * s.points[j].powi(d)).sum::<f64>() - 1.0 / (d + 1) as f64).abs());
        }
    }
    let s1 = CollocationScheme::gauss(1).map_err(|e| e.to_string())?;
    let hand = [(s1.b[0], 0.0), (s1.b[1], 1.0), (s1.d[0], -1.0), (s1.d[1], 2.0)];
    let hand_err = hand.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let spec = TranscriptionSpec {
        n_intervals: 10,
        scheme: CollocationScheme::gauss(3).map_err(|e| e.to_string())?,
        time: TimeMode::Fixed(1.0),
        x0: vec![1.0],
        state_bounds: (vec![-1e20], vec![1e20]),
        terminal_state_bounds: None,
        control_bounds: (vec![0.0], vec![0.0]),
        param_bounds: (vec![], vec![]),
        param_init: vec![],
    };
    let tr = transcribe(Decay, spec).map_err(|e| e.to_string())?;
    let sol = nlp_solve(&tr, &tr.initial_guess(), &Options::default());
    let decay_err = (tr.decode(&sol.x).x_final[0] - (-1f64).exp()).abs();
    let pass = sol.status == Status::Success && worst <= 1e-10 && hand_err <= 1e-14 && decay_err <= 1e-8;
    Ok(outcome(pass, format!("exactness residual {worst:.1e}, n_p = 1 values off by {hand_err:.1e}, |x(1) - e^-1| = {decay_err:.1e}")))
}

fn c7_profile() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    let mut exact = true;
    for (a_m, p_f) in [(0.25, 1.0), (0.25, -0.7), (0.5, 2.3), (1.3, 0.01)] {
        let p = &sequential_base_trajectory([a_m, a_m], [p_f, p_f])[0];
        let t = p.t_f1;
        exact &= t == (8.0 * p_f.abs() / a_m).sqrt();
        let sgn = p_f.signum();
        // rest at both ends, the knots at t/4 and 3t/4 from both sides, and p(t_f1)
        let mut errs = vec![];
        let (a0, v0, x0) = p.eval_piece(0, 0.0);
        errs.extend([a0, v0, x0]);
        let (a1, v1, x1) = p.eval_piece(2, t);
        errs.extend([a1, v1, x1 - p_f]);
        for (k, tk) in [(0, t / 4.0), (1, 3.0 * t / 4.0)] {
            let l = p.eval_piece(k, tk);
            let r = p.eval_piece(k + 1, tk);
            errs.extend([l.0 - r.0, l.1 - r.1, l.2 - r.2]);
        }
        errs.push(p.eval_piece(0, t / 4.0).0 - sgn * a_m);
        errs.push(p_f.abs() - a_m * t * t / 8.0);
        worst = worst.max(errs.iter().map(|e| e.abs()).fold(0.0, f64::max));
    }
    Ok(outcome(
        exact && worst <= 1e-12,
        format!("closed-form t_f1 {}, max condition residual {worst:.1e}", if exact { "exact" } else { "inexact" }),
    ))
}

fn c9_closed_loop() -> Result<Outcome, String> {
    let doc = desk_doc();
    let model = doc.model().map_err(|e| e.to_string())?;
    let n = model.n;
    let dof = model.dof();
    let hold_u = |x: &[f64]| -> Result<Vec<f64>, String> {
        let g = inverse_dynamics(&model, &RobotState::from_vector(x), &Acceleration::zeros(n)).map_err(|e| e.to_string())?;
        Ok(g.to_vector())
    };
    let mut x0 = vec![0.0; model.state_dim()];
    x0[4] = 0.3;
    let u = hold_u(&x0)?;
    let r = simulate_closed_loop(&model, &HoldReference { x: x0.clone(), u }, &x0, &doc.pid, None, 1e-3, 1.0).map_err(|e| e.to_string())?;
    let drift = r.final_state().iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let free = model.with_gravity(0.0);
    let mut x1 = vec![0.0; model.state_dim()];
    x1[dof] = 0.4;
    x1[dof + 1] = 0.3;
    x1[dof + 3] = 1.0;
    x1[dof + 4] = -0.5;
    let still = HoldReference { x: vec![0.0; model.state_dim()], u: vec![0.0; dof] };
    let r = simulate_closed_loop(&free, &still, &x1, &PidGains::zero(n), None, 1e-4, 1.0).map_err(|e| e.to_string())?;
    let e0 = kinetic_energy(&free, &RobotState::from_vector(&x1));
    let e1 = kinetic_energy(&free, &RobotState::from_vector(r.final_state()));
    let energy = ((e1 - e0) / e0).abs();

    let start = vec![0.0; model.state_dim()];
    let hold = HoldReference { x: start.clone(), u: hold_u(&start)? };
    let noisy = |seed| simulate_closed_loop(&model, &hold, &start, &doc.pid, Some(&NoiseSpec::paper(seed)), 1e-3, 0.5);
    let (a, b) = (noisy(11).map_err(|e| e.to_string())?, noisy(11).map_err(|e| e.to_string())?);
    let deterministic = a == b && a.states.len() == 501;
    let pass = drift <= 1e-8 && energy <= 1e-6 && deterministic;
    Ok(outcome(pass, format!("hold drift {drift:.1e}, energy drift {energy:.1e}, noisy rollout deterministic: {deterministic}")))
}

fn main() {
    let mut ok = vec![
        report(1, "ABA/RNEA round trip on the six-joint model", c1_dynamics_roundtrip),
        report(2, "analytical envelope vs operation map", c2_envelope_vs_map),
        report(3, "forward-mode Jacobians vs central differences", c3_jacobians),
        report(4, "collocation exactness and decay test", c4_collocation),
    ];

    let doc = desk_doc();
    let opts = Options::default();
    let start = Instant::now();
    let integrated = run_plan(&doc, Mode::Integrated, &opts, None);
    let integrated_secs = start.elapsed().as_secs_f64();
    ok.push(report(5, "desk reach, min effort at 1.5 t_f*", || {
        let r = integrated.as_ref().map_err(|e| e.to_string())?;
        let s = r.planned.solution();
        let t_star = r.time_optimal_s.ok_or("no minimum time")?;
        let pass = s.is_success()
            && (s.t_f() - 1.5 * t_star).abs() <= 1e-9 * t_star
            && s.terminal_error <= 1e-3
            && s.max_defect <= 1e-6
            && s.min_slack >= -1e-8
            && integrated_secs <= 300.0;
        Ok(outcome(
            pass,
            format!(
                "t_f* {t_star:.4} s, t_f {:.4} s, terminal {:.1e} m, defect {:.1e}, slack {:.1e}, {integrated_secs:.1} s",
                s.t_f(),
                s.terminal_error,
                s.max_defect,
                s.min_slack
            ),
        ))
    }));

    ok.push(report(6, "integrated vs sequential at a_m = 0.25", || {
        let i = integrated.as_ref().map_err(|e| e.to_string())?;
        let s = run_plan(&doc, Mode::Sequential, &opts, None).map_err(|e| e.to_string())?;
        let a_m_ok = doc.sequential.a_m == [0.25, 0.25];
        let pass = a_m_ok
            && i.metrics.time_s < s.metrics.time_s
            && i.metrics.effort <= 2.0 * s.metrics.effort
            && s.metrics.error_mm > i.metrics.error_mm;
        Ok(outcome(
            pass,
            format!(
                "time {:.3} vs {:.3} s, effort {:.2} vs {:.2}, closed-loop error {:.4} vs {:.4} mm",
                i.metrics.time_s, s.metrics.time_s, i.metrics.effort, s.metrics.effort, i.metrics.error_mm, s.metrics.error_mm
            ),
        ))
    }));

    ok.push(report(7, "sequential base profile closed form", c7_profile));

    ok.push(report(8, "co-design from an oversized seed", || {
        let r = run_codesign_doc(&doc, &opts).map_err(|e| e.to_string())?;
        let rep = &r.report;
        let margin = r.designs.iter().flat_map(mobman_core::motor::design_margins).map(|c| c.margin).fold(f64::INFINITY, f64::min);
        let effort_ok = r.solution.objective <= r.seeded.objective * (1.0 + 1e-6);
        let feasible = r.solution.is_success() && r.solution.max_defect <= 1e-6 && r.solution.min_slack >= -1e-8 && margin >= -1e-8;

        let t_f = r.solution.t_f();
        let mut frozen = doc.codesign_problem(t_f).map_err(|e| e.to_string())?;
        frozen.freeze_all();
        let a = solve(&build_codesign_nlp(&frozen).map_err(|e| e.to_string())?, None, &opts).map_err(|e| e.to_string())?;
        let b =
            solve(&build_integrated_ocp(&frozen.seeded_problem()).map_err(|e| e.to_string())?, None, &opts).map_err(|e| e.to_string())?;
        let frozen_gap = (a.objective - b.objective).abs();
        let pass = rep.optimized_motor_mass < rep.seed_motor_mass
            && effort_ok
            && feasible
            && rep.envelope_consistent
            && frozen_gap <= 1e-8 * b.objective.abs().max(1.0);
        Ok(outcome(
            pass,
            format!(
                "motor mass {:.3} -> {:.3} kg, effort {:.3} -> {:.3}, min margin {margin:.1e}, frozen gap {frozen_gap:.1e}",
                rep.seed_motor_mass, rep.optimized_motor_mass, r.seeded.objective, r.solution.objective
            ),
        ))
    }));

    ok.push(report(9, "closed-loop simulation", c9_closed_loop));

    let failed = ok.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", ok.len() - failed, ok.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
