mod common;

use geoctl::controller::cone_margin;
use geoctl::dynamics::RigidBodyState;
use geoctl::geom::{exp_so3, Vec3};
use geoctl::sim::monitor::lyapunov_monitor;
use geoctl::sim::runner::open_loop_records;
use geoctl::sim::{run_scenario, MonitorResult, ScenarioConfig, LYAPUNOV_TOL};
use geoctl::trajectory::{SampledTrajectory, TrajectorySpec};

use common::{config_path, load, load_with};

#[test]
fn hover_equilibrium_stays_put() {
    let run = run_scenario(&load("hover.toml")).unwrap();
    assert_eq!(run.records.len(), 5001);
    for r in &run.records {
        assert!(r.e_x_norm < 1e-9, "t = {}: {}", r.t, r.e_x_norm);
        assert_eq!(r.cos_theta, 1.0);
        assert!(!r.projection_active);
    }
}

#[test]
fn telemetry_is_internally_consistent() {
    let cfg = load_with("circular_roll.toml", &[("run.t_final", "4.0")]);
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.records.len(), cfg.steps() + 1);
    for (k, r) in run.records.iter().enumerate() {
        assert_eq!(r.t, k as f64 * cfg.dt);
        assert!(r.values().iter().all(|v| v.is_finite()), "non-finite at t = {}", r.t);
        assert_eq!(r.cos_theta, cone_margin(&r.f_c).unwrap());
        assert!((r.cos_theta_d - r.cos_theta).abs() < 1e-12, "t = {}", r.t);
        assert!(r.psi >= 0.0 && r.psi < cfg.gains.psi_max);
        assert!((r.c - (1.0 - r.psi / cfg.gains.psi_max)).abs() < 1e-15);
    }
    let s = &run.summary;
    let max_f = run.records.iter().map(|r| r.f_c_norm).fold(0.0, f64::max);
    assert_eq!(s.max_fc_norm, max_f);
    assert_eq!(s.final_ex_norm, run.records.last().unwrap().e_x_norm);
    let settled = s.settled_time.unwrap();
    assert!(run.records.iter().filter(|r| r.t >= settled).all(|r| r.e_x_norm < s.settle_threshold));
    let before = run.records.iter().rev().find(|r| r.t < settled).unwrap();
    assert!(before.e_x_norm >= s.settle_threshold);
}

/// Least-squares slope of `ln V` until `V` falls below `V(0)·1e-6`.
fn log_linear_rate(t: &[f64], v: &[f64]) -> f64 {
    let floor = v[0] * 1e-6;
    let pts: Vec<(f64, f64)> = t.iter().zip(v).take_while(|(_, &v)| v > floor).map(|(&t, &v)| (t, v.ln())).collect();
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    -sxy / sxx
}

#[test]
fn certified_gains_decay_at_least_at_the_certified_rate() {
    let cfg = load_with("hover_certified.toml", &[("run.dt", "0.0005"), ("run.t_final", "25.0")]);
    let run = run_scenario(&cfg).unwrap();
    let rep = run.certification.as_ref().unwrap();
    assert!(rep.certified);
    let verdict = run.summary.initial_region.as_ref().unwrap();
    assert!(verdict.reg_R && verdict.reg_F);
    let t: Vec<f64> = run.records.iter().map(|r| r.t).collect();
    let v: Vec<f64> = run.records.iter().map(|r| r.v_total).collect();
    let rate = log_linear_rate(&t, &v);
    assert!(rate >= rep.decay_rate_bound, "{rate} < {}", rep.decay_rate_bound);
    match run.summary.lyapunov {
        MonitorResult::Monitored { fitted_decay_rate, decay_consistent, certified_decay_rate, .. } => {
            assert!((fitted_decay_rate.unwrap() - rate).abs() < 1e-9 * rate);
            assert_eq!(certified_decay_rate, Some(rep.decay_rate_bound));
            assert_eq!(decay_consistent, Some(true));
        }
        MonitorResult::NotApplicable => panic!("monitor skipped"),
    }
    // The certified region keeps the force within budget.
    assert_eq!(run.summary.force_violations, 0);
}

#[test]
fn open_loop_is_not_monitored() {
    let cfg = load("hover.toml");
    let s0 = RigidBodyState { x: Vec3::zeros(), r: exp_so3(&Vec3::new(0.2, 0.0, 0.0)), v: Vec3::zeros(), omega: Vec3::new(0.0, 1.0, 3.0) };
    let recs = open_loop_records(&cfg.params, &s0, 1e-3, 500).unwrap();
    assert_eq!(recs.len(), 501);
    assert_eq!(lyapunov_monitor(&recs, None, LYAPUNOV_TOL), MonitorResult::NotApplicable);
}

#[test]
fn sampled_table_reproduces_the_analytic_run() {
    let dir = tempfile::tempdir().unwrap();
    let analytic = load_with("circular_roll.toml", &[("run.t_final", "3.0")]);
    let times: Vec<f64> = (0..=3000).map(|k| k as f64 * 1e-3).collect();
    let table = SampledTrajectory::tabulate(&analytic.trajectory, &times).unwrap();
    table.write_csv(std::fs::File::create(dir.path().join("circle.csv")).unwrap()).unwrap();

    let text = std::fs::read_to_string(config_path("circular_roll.toml")).unwrap();
    let start = text.find("[trajectory]").unwrap();
    let end = text.find("[initial]").unwrap();
    let text = format!("{}[trajectory]\nkind = \"sampled\"\npath = \"circle.csv\"\n\n{}", &text[..start], &text[end..]);
    let text = geoctl::sim::config::override_key(&text, "run.t_final", "3.0").unwrap();
    let sampled = ScenarioConfig::parse(&text, Some(dir.path())).unwrap();
    assert!(matches!(sampled.trajectory, TrajectorySpec::Sampled(_)));

    let a = run_scenario(&analytic).unwrap();
    let b = run_scenario(&sampled).unwrap();
    // Knots coincide with the control steps, so the loops see the same commands.
    let worst = a.records.iter().zip(&b.records).map(|(p, q)| (p.x - q.x).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn sampled_table_shorter_than_run_is_rejected_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let analytic = load("circular_roll.toml");
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 1e-2).collect();
    let table = SampledTrajectory::tabulate(&analytic.trajectory, &times).unwrap();
    table.write_csv(std::fs::File::create(dir.path().join("short.csv")).unwrap()).unwrap();
    let text = std::fs::read_to_string(config_path("circular_roll.toml")).unwrap();
    let start = text.find("[trajectory]").unwrap();
    let end = text.find("[initial]").unwrap();
    let text = format!("{}[trajectory]\nkind = \"sampled\"\npath = \"short.csv\"\n\n{}", &text[..start], &text[end..]);
    let cfg = ScenarioConfig::parse(&text, Some(dir.path())).unwrap();
    let err = run_scenario(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
