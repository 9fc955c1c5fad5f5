use mobman_cli::document::Document;
use mobman_cli::output::{parse_csv, trajectory_csv};
use mobman_nlp::Options;
use mobman_plan::planning::plan;
use std::path::{Path, PathBuf};
use std::process::Command;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mobman(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mobman")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn scratch(name: &str) -> String {
    let d = std::env::temp_dir().join(format!("mobman-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d.to_string_lossy().into()
}

#[test]
fn shipped_configs_match_presets() {
    for (file, preset) in [("desk.toml", Document::desk()), ("six_dof.toml", Document::six_dof())] {
        let doc = Document::load(&root().join("configs").join(file)).unwrap();
        assert_eq!(doc, preset, "{file}");
        let again = Document::from_toml(&doc.to_toml()).unwrap();
        assert_eq!(again, doc);
        assert_eq!(again.to_toml(), doc.to_toml());
    }
}

#[test]
fn unknown_keys_and_bad_sizes_rejected() {
    let text = Document::desk().to_toml();
    let extra = text.replacen("[planning]\n", "[planning]\nspeed_of_light = 1.0\n", 1);
    assert!(Document::from_toml(&extra).is_err());
    let mut doc = Document::desk();
    doc.motors.pop();
    assert!(Document::from_toml(&doc.to_toml()).is_err());
    let mut doc = Document::desk();
    doc.planning.x0 = Some(vec![0.0; 3]);
    assert!(Document::from_toml(&doc.to_toml()).is_err());
}

#[test]
fn trajectory_csv_round_trips_exactly() {
    let doc = Document::desk();
    let model = doc.model().unwrap();
    let mut p = doc.planning_problem(&model, 3.0);
    p.n_intervals = 4;
    p.n_p = 1;
    let s = plan(&p, &Options { max_iter: 5, ..Options::default() }).unwrap();
    let rows = parse_csv(&trajectory_csv(&s.trajectory, model.n)).unwrap();
    let t = &s.trajectory;
    assert_eq!(rows.len(), t.n_intervals() * (t.scheme.n_p + 1) + 1);
    assert_eq!(rows[0].len(), 1 + model.state_dim() + model.dof());
    for (k, states) in t.states.iter().enumerate() {
        for (j, x) in states.iter().enumerate() {
            let r = &rows[k * states.len() + j];
            for (a, b) in r[1..1 + x.len()].iter().zip(x) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            assert_eq!(&r[1 + x.len()..], &t.controls[k][..]);
        }
    }
    assert_eq!(rows.last().unwrap()[1..1 + model.state_dim()], t.x_final[..]);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(mobman(&["bogus"]).0, 64);
    assert_eq!(mobman(&["plan", "--mode", "fastest"]).0, 64);
    assert_eq!(mobman(&["--help"]).0, 0);
    assert_eq!(mobman(&["--version"]).0, 0);
    let (code, _, err) = mobman(&["--config", "/nonexistent/mobman.toml", "plan"]);
    assert_eq!(code, 64);
    assert!(err.contains("nonexistent"));
    assert_eq!(mobman(&["--tol", "-1", "validate-dynamics"]).0, 64);
}

#[test]
fn validation_breach_exits_2() {
    let out = scratch("breach");
    let (code, stdout, _) = mobman(&["--out-dir", &out, "validate-dynamics", "--samples", "20"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("tau_4"));
    let (code, _, err) = mobman(&["--out-dir", &out, "validate-dynamics", "--samples", "20", "--threshold", "0"]);
    assert_eq!(code, 2, "{err}");
    let csv = std::fs::read_to_string(Path::new(&out).join("validate_dynamics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
}

#[test]
fn zero_samples_give_an_empty_report() {
    let out = scratch("empty");
    let (code, stdout, _) = mobman(&["--out-dir", &out, "validate-dynamics", "--samples", "0"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("0 samples"));
}

#[test]
fn solver_failure_exits_70() {
    let out = scratch("solver");
    let (code, _, err) = mobman(&["--out-dir", &out, "--max-iter", "2", "plan", "--mode", "time-optimal"]);
    assert_eq!(code, 70, "{err}");
}

#[test]
fn motor_map_writes_grid_and_plot() {
    let out = scratch("map");
    let (code, stdout, _) = mobman(&["--out-dir", &out, "motor-map", "--reference", "--i-max", "30", "--grid", "40"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("case Neg") && stdout.contains("omega_s"));
    let dir = Path::new(&out);
    let grid = std::fs::read_to_string(dir.join("motor_map.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 40 * 40);
    let svg = std::fs::read_to_string(dir.join("motor_map.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("ω_r") && svg.contains("ω_s"));
    assert_eq!(mobman(&["--out-dir", &out, "motor-map", "--joint", "7"]).0, 64);
    assert_eq!(mobman(&["--out-dir", &out, "motor-map", "--grid", "1"]).0, 64);
}

#[test]
fn speed_ceiling_marker_only_when_finite() {
    for (i, marked) in [("5", true), ("21.67", false)] {
        let out = scratch(&format!("marker{i}"));
        assert_eq!(mobman(&["--out-dir", &out, "motor-map", "--reference", "--i-max", i, "--grid", "20"]).0, 0);
        let svg = std::fs::read_to_string(Path::new(&out).join("motor_map.svg")).unwrap();
        assert_eq!(svg.contains("ω_max"), marked, "I_max = {i}");
    }
    let out = scratch("tiny");
    let (code, _, _) = mobman(&["--out-dir", &out, "motor-map", "--grid", "2"]);
    assert_eq!(code, 0);
    let grid = std::fs::read_to_string(Path::new(&out).join("motor_map.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 4);
}

#[test]
fn frozen_codesign_reports_no_reduction() {
    let mut doc = Document::desk();
    doc.planning.n_intervals = 4;
    doc.codesign.seed = None;
    doc.codesign.boxes_mm = Some(
        doc.motors
            .iter()
            .map(|m| {
                let b = [m.l_mm, m.r_ro_mm, m.r_so_mm, m.h_m_mm, m.h_sy_mm, m.w_tooth_mm, m.b0_mm];
                b.map(|v| [v, v])
            })
            .collect(),
    );
    doc.codesign.frozen = vec![true; 2];
    let r = mobman_cli::commands::run_codesign_doc(&doc, &Options::default()).unwrap();
    assert_eq!(r.report.mass_reduction_pct(), 0.0);
    let text = r.report.to_text();
    assert!(text.contains("Reduced by") && text.contains("0.00%"), "{text}");
}

#[test]
fn infeasible_codesign_seed_fails() {
    let mut doc = Document::desk();
    doc.codesign.seed.as_mut().unwrap()[0].l_mm = 90.0;
    let dir = std::env::temp_dir().join(format!("mobman-cli-{}-seed", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, doc.to_toml()).unwrap();
    let (code, _, err) = mobman(&["--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap(), "codesign"]);
    assert_ne!(code, 0);
    assert!(err.contains("seed") || err.contains("geometry") || err.contains("infeasible"), "{err}");
}

#[test]
fn noisy_runs_repeat_for_a_seed() {
    let mut doc = Document::desk();
    doc.planning.t_f_s = Some(4.0);
    doc.planning.n_intervals = 6;
    doc.planning.n_p = 1;
    doc.noise.enabled = true;
    let opts = Options::default();
    let run = |seed| mobman_cli::commands::run_plan(&doc, mobman_cli::commands::Mode::Integrated, &opts, Some(seed)).unwrap();
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.rollout, b.rollout);
    assert_ne!(a.rollout.states, c.rollout.states);
}
