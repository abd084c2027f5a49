use std::path::{Path, PathBuf};

use lazyflow::error::Error;
use lazyflow::experiments::{
    neuron_cloud, run_teacher_student, summarize, sweep, sweep_width, write_run, write_sweep,
    ExperimentConfig, SweepVariable, Teacher, TeacherSpec,
};
use lazyflow::flow::{integrate_flow, FlowConfig, RecordStride, StepRule, StopRule};
use lazyflow::loss::{scaled_objective, Loss};
use lazyflow::model::{ScaleRule, Symmetrized, TwoLayerNet};
use lazyflow::rng;
use lazyflow::{linalg, ParamVector};
use proptest::prelude::*;

fn small_config() -> ExperimentConfig {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/teacher_student_small.json");
    ExperimentConfig::from_path(&path).unwrap()
}

fn config_error(json: &str) -> (String, String) {
    match ExperimentConfig::from_json_str(json) {
        Err(Error::Config { path, message }) => (path, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

const MINIMAL: &str = r#"{
  "teacher": { "seed": 1 },
  "student": { "width": 4, "input_dim": 3, "init": { "dist": "xavier", "seed": 2 } },
  "data": { "n_train": 5, "seed": 3 },
  "flow": { "steps": 10 }
}"#;

#[test]
fn minimal_config_uses_documented_defaults() {
    let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
    assert_eq!(c.teacher.width, 3);
    assert_eq!(c.data.n_test, 2000);
    assert_eq!(c.flow.alpha, 1.0);
    assert!(c.sweep.is_none() && c.sgd.is_none() && !c.linearized);
    let back = ExperimentConfig::from_json_str(&c.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), c.to_json().unwrap());
}

#[test]
fn schema_errors_carry_field_paths() {
    let (path, _) = config_error(&MINIMAL.replace(r#""width": 4"#, r#""width": "four""#));
    assert_eq!(path, "student.width");
    let (path, msg) = config_error(&MINIMAL.replace(r#""seed": 3"#, r#""seed": 3, "n_tset": 4"#));
    assert_eq!(path, "data.n_tset");
    assert!(msg.contains("n_tset"), "{msg}");
    let (path, _) = config_error(&MINIMAL.replace(r#""width": 4"#, r#""width": 0"#));
    assert_eq!(path, "student.width");
    let (path, _) = config_error(&MINIMAL.replace(
        r#""steps": 10"#,
        r#""steps": 10, "step": {"auto": {"c": 2.0}}"#,
    ));
    assert_eq!(path, "flow");
    let (path, _) = config_error(&MINIMAL.replace(
        r#""flow""#,
        r#""sweep": {"variable": "m", "grid": [4, 2.5]}, "flow""#,
    ));
    assert_eq!(path, "sweep.grid[1]");
    let (path, _) = config_error(&MINIMAL.replace(
        r#""width": 4"#,
        r#""width": 5, "wrappers": ["symmetrized"]"#,
    ));
    assert_eq!(path, "student.width");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn teachers_are_normalized(seed in 0u64..100_000, d in 1usize..50, width in 1usize..6) {
        let t = Teacher::generate(&TeacherSpec { width, input_dim: d, seed }).unwrap();
        for j in 0..width {
            let unit = &t.w[j * (d + 1)..(j + 1) * (d + 1)];
            let prod = linalg::norm(&unit[..d]) * unit[d].abs();
            prop_assert!((prod - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn teacher_as_student_has_zero_loss() {
    let t = Teacher::generate(&TeacherSpec::new(5, 9)).unwrap();
    let train = t.sample(30, &mut rng::stream(1, 2)).unwrap();
    let loss = Loss::from_set(&train).unwrap();
    let eval = scaled_objective(&t.net, &loss, &train, 1.0, &t.w).unwrap();
    assert_eq!(eval.value, 0.0);
    assert!(eval.gradient.iter().all(|g| *g == 0.0));
}

#[test]
fn realizable_start_near_teacher_generalizes() {
    let t = Teacher::generate(&TeacherSpec::new(5, 4)).unwrap();
    let train = t.sample(60, &mut rng::stream(5, 2)).unwrap();
    let test = t.sample(500, &mut rng::stream(5, 3)).unwrap();
    let noise = rng::normal_vec(&mut rng::stream(6, 4), t.w.len(), 0.01);
    let w0 = ParamVector::from(linalg::add(&t.w, &noise));
    let cfg = FlowConfig::new(1.0).with_steps(20_000).with_stop(StopRule {
        grad_rel_below: Some(1e-7),
        ..StopRule::default()
    });
    let traj = integrate_flow(&t.net, &Loss::from_set(&train).unwrap(), &train, &w0, &cfg).unwrap();
    let test_loss = scaled_objective(
        &t.net,
        &Loss::from_set(&test).unwrap(),
        &test,
        1.0,
        &traj.last().w,
    )
    .unwrap()
    .loss;
    assert!(test_loss < 1e-6, "{test_loss}");
}

#[test]
fn small_and_large_tau_both_interpolate_but_move_differently() {
    let base = small_config();
    let rich = run_teacher_student(&base.with_value(SweepVariable::Tau, 0.1), 0).unwrap();
    let lazy = run_teacher_student(&base.with_value(SweepVariable::Tau, 2.0), 0).unwrap();
    assert!(rich.train_loss.unwrap() < 1e-4, "{:?}", rich.train_loss);
    assert!(lazy.train_loss.unwrap() < 1e-4, "{:?}", lazy.train_loss);
    assert!(
        rich.relative_displacement > 0.5,
        "{}",
        rich.relative_displacement
    );
    assert!(
        lazy.relative_displacement < 0.1,
        "{}",
        lazy.relative_displacement
    );
    assert!(lazy.stability.unwrap() > rich.stability.unwrap());
    assert_eq!(rich.seeds, lazy.seeds);
}

fn clouds(tau: f64) -> (Vec<(f64, f64, f64)>, Vec<(f64, f64, f64)>, Teacher) {
    clouds_at(tau, 0, None)
}

fn clouds_at(
    tau: f64,
    repeat: usize,
    steps: Option<usize>,
) -> (Vec<(f64, f64, f64)>, Vec<(f64, f64, f64)>, Teacher) {
    let mut c = small_config().with_value(SweepVariable::Tau, tau);
    if steps.is_some() {
        c.flow.steps = steps;
    }
    let out = run_teacher_student(&c, repeat).unwrap();
    let (student, _) = c.student.build_with_seed(out.seeds.init);
    let pts = neuron_cloud(student.as_ref(), &out.trajectory).unwrap();
    let t0 = out.trajectory.initial().t;
    let t1 = out.trajectory.last().t;
    let pick = |t: f64| {
        pts.iter()
            .filter(|p| p.t == t)
            .map(|p| (p.x, p.y, p.sign))
            .collect::<Vec<_>>()
    };
    let teacher = Teacher::generate(&TeacherSpec {
        width: c.teacher.width,
        input_dim: 2,
        seed: out.seeds.teacher,
    })
    .unwrap();
    (pick(t0), pick(t1), teacher)
}

#[test]
fn symmetrized_clouds_start_in_opposite_pairs() {
    let (start, _, _) = clouds(0.5);
    let m = start.len() / 2;
    for j in 0..m {
        assert_eq!((start[j].0, start[j].1), (start[j + m].0, start[j + m].1));
        assert_eq!(start[j].2, -start[j + m].2);
    }
}

/// Largest angle between a teacher direction and the closest student unit
/// carrying at least a tenth of the largest final norm.
fn worst_alignment(end: &[(f64, f64, f64)], teacher: &Teacher) -> f64 {
    use std::f64::consts::PI;
    let scale = end.iter().map(|p| p.0.hypot(p.1)).fold(0.0, f64::max);
    (0..teacher.net.width)
        .map(|j| {
            let a = &teacher.w[j * 3..j * 3 + 2];
            let dir = a[1].atan2(a[0]);
            end.iter()
                .filter(|p| p.0.hypot(p.1) > 0.1 * scale)
                .map(|p| ((p.1.atan2(p.0) - dir + PI).rem_euclid(2.0 * PI) - PI).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn small_tau_finds_the_teacher_directions() {
    // With 15 samples the interpolating solution is not unique and some seeds
    // settle on nearby directions, so the 0.1 rad check is applied per run
    // and must hold for at least half of the runs. Positions are read at
    // convergence.
    let worst: Vec<f64> = (0..6)
        .map(|r| {
            let (_, end, teacher) = clouds_at(0.1, r, Some(100_000));
            worst_alignment(&end, &teacher)
        })
        .collect();
    let aligned = worst.iter().filter(|g| **g < 0.1).count();
    assert!(aligned >= 3, "worst angle per run: {worst:?}");
}

#[test]
fn large_tau_units_barely_move() {
    let (start, end, _) = clouds(2.0);
    let still = start
        .iter()
        .zip(&end)
        .filter(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1) <= 0.2 * a.0.hypot(a.1))
        .count();
    assert!(
        still as f64 >= 0.9 * start.len() as f64,
        "{still}/{}",
        start.len()
    );
}

#[test]
fn clouds_need_planar_inputs() {
    let net = Symmetrized::new(TwoLayerNet::relu(2, 3));
    let c = small_config();
    let out = run_teacher_student(&c.with_value(SweepVariable::Tau, 0.5), 0).unwrap();
    assert!(neuron_cloud(&net, &out.trajectory).is_err());
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let mut c = small_config();
    c.flow.steps = Some(2000);
    let dirs: Vec<PathBuf> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap().keep();
            let rows = sweep(&c, SweepVariable::Tau, &[0.1, 1.0], 2).unwrap();
            write_sweep(&dir, &c, &rows).unwrap();
            dir
        })
        .collect();
    assert_eq!(read(&dirs[0], "results.csv"), read(&dirs[1], "results.csv"));
    assert_eq!(
        read(&dirs[0], "diagnostics.json"),
        read(&dirs[1], "diagnostics.json")
    );
    for d in dirs {
        std::fs::remove_dir_all(d).unwrap();
    }
}

#[test]
fn run_directory_has_every_artifact() {
    let mut c = small_config();
    c.flow.steps = Some(500);
    let out = run_teacher_student(&c, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &c, &out).unwrap();
    for f in [
        "config-echo.json",
        "results.csv",
        "diagnostics.json",
        "summary.txt",
        "trajectory.csv",
        "snapshots.bin",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let echo = ExperimentConfig::from_path(&dir.path().join("config-echo.json")).unwrap();
    assert_eq!(echo.to_json().unwrap(), c.to_json().unwrap());
    let header = String::from_utf8(read(dir.path(), "results.csv")).unwrap();
    assert!(header.starts_with(
        "variable,value,repeat,teacher_seed,data_seed,init_seed,train_loss,test_loss,best_test_loss,\
         stability,kappa,relative_displacement,step_size,steps,stop_reason,converged"
    ));
}

#[test]
fn sweeps_share_seeds_across_the_grid_and_summarize_in_order() {
    let mut c = small_config();
    c.flow.steps = Some(300);
    let rows = sweep(&c, SweepVariable::Tau, &[2.0, 0.1, 1.0], 3).unwrap();
    assert_eq!(rows.len(), 9);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.outcome.repeat, i % 3);
        assert_eq!(r.outcome.seeds, rows[i % 3].outcome.seeds);
    }
    let summary = summarize(&rows);
    assert_eq!(
        summary.iter().map(|s| s.value).collect::<Vec<_>>(),
        vec![2.0, 0.1, 1.0]
    );
    assert!(summary
        .iter()
        .all(|s| s.runs == 3 && s.std_test_loss >= 0.0));
    assert!(sweep(&c, SweepVariable::Tau, &[], 1).is_err());
}

#[test]
fn width_sweep_covers_every_rule_and_width() {
    let mut c = small_config();
    c.student.wrappers.clear();
    c.flow.steps = Some(200);
    let out = sweep_width(
        &c,
        &[ScaleRule::InvWidth, ScaleRule::InvSqrtWidth],
        &[4, 8],
        2,
    )
    .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].scale_rule, ScaleRule::InvWidth);
    for s in &out {
        assert_eq!(s.rows.len(), 4);
        assert_eq!(
            s.rows.iter().map(|r| r.value).collect::<Vec<_>>(),
            vec![4.0, 4.0, 8.0, 8.0]
        );
    }
    // Same seeds for both normalizations.
    assert_eq!(out[0].rows[3].outcome.seeds, out[1].rows[3].outcome.seeds);
}

#[test]
fn linearized_runs_keep_every_activation() {
    let mut c = small_config().with_value(SweepVariable::Tau, 0.3);
    c.linearized = true;
    c.flow.steps = Some(2000);
    let out = run_teacher_student(&c, 0).unwrap();
    assert_eq!(out.stability, Some(1.0));
}

#[test]
fn sgd_runs_report_holdout_losses() {
    let mut c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
    c.sgd = Some(serde_json::from_str(r#"{"batch_size": 16}"#).unwrap());
    c.data.n_test = 100;
    c.flow = FlowConfig::new(1.0)
        .with_steps(200)
        .with_step(StepRule::Fixed(0.05))
        .with_record(RecordStride::Every(50));
    let out = run_teacher_student(&c, 0).unwrap();
    assert!(out.train_loss.is_none());
    assert_eq!(out.test_loss, out.trajectory.last().loss);
    assert!(out.best_test_loss <= out.test_loss);
}
