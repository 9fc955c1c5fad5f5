//! CSV writers. Floats use 17 significant digits so files parse back exactly.

use mobman_plan::collocation::Trajectory;
use mobman_plan::planning::Rollout;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn row(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

/// `t, q1(3), θ(n), q̇1(3), θ̇(n), u(n+3)`.
pub fn trajectory_header(n: usize) -> String {
    let mut h = vec!["t".to_string(), "theta_z".into(), "p_x".into(), "p_y".into()];
    h.extend((0..n).map(|k| format!("theta_{}", k + 3)));
    h.extend(["dtheta_z".to_string(), "dp_x".into(), "dp_y".into()]);
    h.extend((0..n).map(|k| format!("dtheta_{}", k + 3)));
    h.extend(["tau_z".to_string(), "f_x".into(), "f_y".into()]);
    h.extend((0..n).map(|k| format!("tau_{}", k + 3)));
    h.join(",")
}

/// Planned states at every mesh and collocation point with the interval's control.
pub fn trajectory_csv(t: &Trajectory, n: usize) -> String {
    let mut s = trajectory_header(n);
    s.push('\n');
    let dt = t.dt();
    for (k, states) in t.states.iter().enumerate() {
        for (j, x) in states.iter().enumerate() {
            let mut v = vec![(k as f64 + t.scheme.points[j]) * dt];
            v.extend(x);
            v.extend(&t.controls[k]);
            s.push_str(&row(&v));
            s.push('\n');
        }
    }
    let mut v = vec![t.t_f];
    v.extend(&t.x_final);
    v.extend(t.controls.last().expect("at least one interval"));
    s.push_str(&row(&v));
    s.push('\n');
    s
}

/// Rollout states with the input applied from each sample on (the last row repeats it).
pub fn rollout_csv(r: &Rollout, n: usize, stride: usize) -> String {
    let mut s = trajectory_header(n);
    s.push('\n');
    let last = r.states.len() - 1;
    for i in (0..=last).step_by(stride.max(1)).chain((last % stride.max(1) != 0).then_some(last)) {
        let mut v = vec![r.times[i]];
        v.extend(&r.states[i]);
        match r.controls.get(i).or(r.controls.last()) {
            Some(u) => v.extend(u),
            None => v.extend(vec![0.0; n + 3]),
        }
        s.push_str(&row(&v));
        s.push('\n');
    }
    s
}

/// Parses a numeric CSV body (header skipped).
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, std::num::ParseFloatError> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::parse).collect()).collect()
}
