//! End-to-end acceptance checks. Each criterion prints one PASS, FAIL or SKIP
//! line; the test fails if any criterion fails.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use oracles::{DualQp, HybridOracle};
use qkml_core::dataset::{fingerprint, load_table, SfePolicy};
use qkml_core::experiment::{run_grid, CellStatus, GridSpec, LabeledData, Protocol, TaskKind};
use qkml_core::featmap::{encode, EntanglementPattern, FeatureMapSpec};
use qkml_core::hybrid::{fit_hybrid, HybridModel, TrainConfig};
use qkml_core::qkernel::gram_matrix;
use qkml_core::qnn::AnsatzSpec;
use qkml_core::svm::{train_svc, train_svr};
use qkml_core::{LabelConvention, Objective, QnnModel, SmoParams, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/synthetic_sfe.csv");

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget_s: u64, detail: String) -> Check {
    ensure(elapsed.as_secs_f64() < budget_s as f64, || {
        format!(
            "{detail}, took {:.1}s against a {budget_s}s budget",
            elapsed.as_secs_f64()
        )
    })?;
    Ok(detail)
}

fn rows(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..3).map(|_| rng.gen_range(0.0..PI)).collect())
        .collect()
}

fn qkml(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qkml"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "qkml {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tmp() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn simulator_identities() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let raw: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut s = StateVector::from_amplitudes(3, raw.into_iter().map(|z| z / norm).collect()).unwrap();
        let mut dense = DVector::from_column_slice(s.amplitudes());
        for _ in 0..rng.gen_range(1..20) {
            match rng.gen_range(0..3) {
                0 => {
                    s.apply_hadamard_all();
                    dense = oracles::all_qubits(&oracles::hadamard(), 3) * dense;
                }
                1 => {
                    let (q, a) = (rng.gen_range(0..3), rng.gen_range(-10.0..10.0));
                    s.apply_ry(q, a).unwrap();
                    dense = oracles::on_qubit(&oracles::ry(a), q, 3) * dense;
                }
                _ => {
                    let c = rng.gen_range(0..3);
                    let t = (c + rng.gen_range(1..3)) % 3;
                    s.apply_cx(c, t).unwrap();
                    dense = oracles::cx(c, t, 3) * dense;
                }
            }
        }
        worst = worst.max((s.norm_sqr() - 1.0).abs());
        let got = DVector::from_column_slice(s.amplitudes());
        worst = worst.max((got - &dense).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let mut hh = s.clone();
        hh.apply_hadamard_all();
        hh.apply_hadamard_all();
        let back = DVector::from_column_slice(hh.amplitudes());
        worst = worst.max((back - dense).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    ensure(worst <= 1e-10, || format!("worst deviation {worst:e}"))?;
    within(
        start.elapsed(),
        5,
        format!("1000 random circuits, worst deviation {worst:.1e}"),
    )
}

fn kernel_properties() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst_min_eig = f64::INFINITY;
    for trial in 0..50 {
        let data = rows(21, &mut rng);
        let spec = FeatureMapSpec::new(3, 1 + trial % 5, EntanglementPattern::ALL[trial % 3]).unwrap();
        let k = gram_matrix(&data, &spec).map_err(|e| e.to_string())?;
        for i in 0..21 {
            ensure((k.get(i, i) - 1.0).abs() <= 1e-10, || {
                format!("trial {trial}: diagonal {}", k.get(i, i))
            })?;
            for j in 0..21 {
                let v = k.get(i, j);
                ensure((-1e-12..=1.0 + 1e-12).contains(&v), || {
                    format!("trial {trial}: entry {v}")
                })?;
            }
        }
        ensure(k.max_asymmetry() <= 1e-10, || format!("trial {trial}: asymmetric"))?;
        let eig = k.min_eigenvalue().map_err(|e| e.to_string())?;
        ensure(eig >= -1e-8, || format!("trial {trial}: eigenvalue {eig:e}"))?;
        worst_min_eig = worst_min_eig.min(eig);
        if trial < 5 {
            let want = oracles::gram(&data, spec.reps(), spec.pattern().as_str());
            for (i, row) in want.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    ensure((k.get(i, j) - w).abs() < 1e-12, || {
                        format!("trial {trial}: oracle mismatch")
                    })?;
                }
            }
        }
    }
    within(
        start.elapsed(),
        30,
        format!("50 Gram matrices 21x21, min eigenvalue {worst_min_eig:.1e}"),
    )
}

fn full_circular_coincidence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = rows(21, &mut rng);
    let mut worst: f64 = 0.0;
    for reps in 1..=5 {
        let f = gram_matrix(&data, &FeatureMapSpec::new(3, reps, EntanglementPattern::Full).unwrap()).unwrap();
        let c = gram_matrix(
            &data,
            &FeatureMapSpec::new(3, reps, EntanglementPattern::Circular).unwrap(),
        )
        .unwrap();
        for i in 0..21 {
            for j in 0..21 {
                worst = worst.max((f.get(i, j) - c.get(i, j)).abs());
            }
        }
        let x = &data[0];
        let sf = encode(x, &FeatureMapSpec::new(3, reps, EntanglementPattern::Full).unwrap()).unwrap();
        let dense = oracles::feature_state(x, reps, "circular");
        let got = DVector::from_column_slice(sf.amplitudes());
        worst = worst.max((got - dense).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:e}"))?;
    Ok(format!("reps 1..5, max difference {worst:.1e}"))
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let pattern = EntanglementPattern::ALL[draw % 3];
        let reps = 1 + draw % 3;
        let q = QnnModel::init(
            FeatureMapSpec::new(3, reps, pattern).unwrap(),
            AnsatzSpec::new(3, reps, pattern).unwrap(),
            None,
            &mut rng,
        )
        .unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..PI)).collect();
        let name = pattern.as_str();
        let fd_w = oracles::central_difference(|t| oracles::qnn_forward(&x, t, reps, name), &q.weights, 1e-5);
        let fd_x = oracles::central_difference(|xx| oracles::qnn_forward(xx, &q.weights, reps, name), &x, 1e-5);
        let gw = q.grad_weights(&x).unwrap();
        let gx = q.grad_inputs(&x).unwrap();
        for (a, b) in gw.iter().chain(&gx).zip(fd_w.iter().chain(&fd_x)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("shift rule deviation {worst:e}"))?;

    let mut hybrid_worst: f64 = 0.0;
    for (objective, classification) in [(Objective::Regression, false), (Objective::Classification, true)] {
        let model = HybridModel::init(
            3,
            FeatureMapSpec::new(3, 2, EntanglementPattern::Full).unwrap(),
            AnsatzSpec::new(3, 2, EntanglementPattern::Full).unwrap(),
            objective,
            &mut rng,
        )
        .unwrap();
        let xs = rows(6, &mut rng);
        let ts: Vec<f64> = (0..6)
            .map(|_| {
                if classification {
                    f64::from(rng.gen_range(0..2u8))
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let oracle = HybridOracle {
            n_in: 3,
            n_q: 3,
            reps: 2,
            pattern: "full",
            classification,
        };
        let params = model.params();
        let lg = model.backward(&xs, &ts).unwrap();
        let fd = oracles::central_difference(|q| oracle.loss(q, &xs, &ts), &params, 1e-5);
        for (a, b) in lg.grad.iter().zip(&fd) {
            hybrid_worst = hybrid_worst.max((a - b).abs());
        }
    }
    ensure(hybrid_worst <= 1e-5, || {
        format!("hybrid gradient deviation {hybrid_worst:e}")
    })?;
    Ok(format!(
        "QNN worst {worst:.1e} over 100 draws, hybrid worst {hybrid_worst:.1e}"
    ))
}

fn smo_against_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let m = rng.gen_range(2..=4);
        let train = rows(m, &mut rng);
        let spec = FeatureMapSpec::new(3, rng.gen_range(1..=3), EntanglementPattern::ALL[rng.gen_range(0..3)]).unwrap();
        let c = [0.1, 1.0, 10.0, 100.0][rng.gen_range(0..4)];
        let k = gram_matrix(&train, &spec).unwrap();
        let kd: Vec<Vec<f64>> = (0..m).map(|i| k.row(i)).collect();
        let gap = if case % 2 == 0 {
            let mut y: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let model = train_svc(&k, &y, &SmoParams::new(c)).map_err(|e| format!("case {case}: {e}"))?;
            let qp = DualQp::svc(&kd, &y, c);
            let alpha: Vec<f64> = model.dual_coefs.iter().zip(&y).map(|(d, y)| d * y).collect();
            (qp.value(&oracles::svc_oracle(&kd, &y, c, 41)) - qp.value(&alpha)).abs()
        } else {
            let t: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eps = [0.01, 0.1][rng.gen_range(0..2)];
            let model = train_svr(&k, &t, eps, &SmoParams::new(c)).map_err(|e| format!("case {case}: {e}"))?;
            let qp = DualQp::svr(&kd, &t, eps, c);
            let a: Vec<f64> = model
                .dual_coefs
                .iter()
                .map(|d| d.max(0.0))
                .chain(model.dual_coefs.iter().map(|d| (-d).max(0.0)))
                .collect();
            (qp.value(&oracles::svr_oracle(&kd, &t, eps, c, 41)) - qp.value(&a)).abs()
        };
        ensure(gap <= 1e-4, || format!("case {case}: objective gap {gap:e}"))?;
        worst = worst.max(gap);
    }
    within(
        start.elapsed(),
        60,
        format!("200 problems, worst objective gap {worst:.1e}"),
    )
}

fn quick_tune(task: &str, out: &Path, extra: &[&str]) -> Result<(), String> {
    let mut args = vec![
        "tune",
        "--task",
        task,
        "--data",
        FIXTURE,
        "--out",
        p(out),
        "--protocol",
        "kfold",
        "--folds",
        "3",
        "--sweeps",
        "1",
        "--quiet",
    ];
    args.extend_from_slice(extra);
    qkml(&args)
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn grid_shapes() -> Check {
    let dir = tmp()?;
    let (svc, svr) = (dir.path().join("svc"), dir.path().join("svr"));
    quick_tune("svc", &svc, &[])?;
    quick_tune("svr", &svr, &[])?;
    let n_svc = read_json(&svc.join("report.json"))?["results"]
        .as_array()
        .map_or(0, Vec::len);
    let n_svr = read_json(&svr.join("report.json"))?["results"]
        .as_array()
        .map_or(0, Vec::len);
    ensure(n_svc == 60 && n_svr == 120, || {
        format!("cells: svc {n_svc}, svr {n_svr}")
    })?;
    let mut heatmaps = 0;
    for d in [&svc, &svr] {
        for entry in fs::read_dir(d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if !path.file_name().unwrap().to_string_lossy().starts_with("heatmap_") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let lines: Vec<&str> = text.lines().collect();
            ensure(
                lines.len() == 6 && lines.iter().all(|l| l.split(',').count() == 5),
                || format!("{} is not 5 reps x 4 C", path.display()),
            )?;
            heatmaps += 1;
        }
    }
    ensure(heatmaps == 9, || format!("{heatmaps} heatmaps"))?;
    Ok("SVC 60 cells, SVR 120 cells, 9 heatmaps of 5x4".into())
}

fn determinism() -> Check {
    let (a, b) = (tmp()?, tmp()?);
    quick_tune("svc", a.path(), &["--seed", "11", "--jobs", "1"])?;
    quick_tune("svc", b.path(), &["--seed", "11", "--jobs", "4"])?;
    let mut n = 0;
    for entry in fs::read_dir(a.path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let x = fs::read(a.path().join(&name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join(&name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name:?} differs"))?;
        n += 1;
    }
    Ok(format!("{n} output files byte-identical across runs and thread counts"))
}

fn toy_regression() -> Check {
    let xs = vec![
        vec![0.2, 0.4, 0.1],
        vec![1.1, 0.6, 2.0],
        vec![2.0, 2.6, 0.8],
        vec![2.9, 1.7, 1.3],
    ];
    let ts = vec![-0.8, -0.2, 0.3, 0.9];
    let config = TrainConfig {
        epochs: 2000,
        learning_rate: 0.05,
        seed: 42,
        ..TrainConfig::default()
    };
    let out = fit_hybrid(
        &xs,
        &ts,
        FeatureMapSpec::new(3, 1, EntanglementPattern::Full).unwrap(),
        AnsatzSpec::new(3, 1, EntanglementPattern::Full).unwrap(),
        Objective::Regression,
        false,
        &config,
    )
    .map_err(|e| e.to_string())?;
    let mse = out.final_loss();
    ensure(mse < 1e-3, || format!("final MSE {mse:e}"))?;
    Ok(format!("final MSE {mse:.2e} after 2000 epochs"))
}

fn best_mean(task: TaskKind, data: &LabeledData, fp: &str, protocol: &Protocol) -> Result<f64, String> {
    let report = run_grid(task, &GridSpec::default_for(task), data, protocol, 0, fp).map_err(|e| e.to_string())?;
    report.best.map(|b| b.mean).ok_or_else(|| "no best cell".to_string())
}

fn reproduction() -> Outcome {
    let Ok(path) = std::env::var("QKML_SFE_TABLE") else {
        return Outcome::Skip("QKML_SFE_TABLE not set".into());
    };
    let run = || -> Check {
        let samples = load_table(&path, SfePolicy::Required).map_err(|e| e.to_string())?;
        let fp = fingerprint(&samples);
        let data = LabeledData::new(&samples, 19.0, LabelConvention::Methods).map_err(|e| e.to_string())?;
        let protocol = Protocol::default();
        let mut failures = Vec::new();

        let qsvc = best_mean(TaskKind::Svc, &data, &fp, &protocol)?;
        if !(0.87..=0.95).contains(&qsvc) {
            failures.push(format!("QSVC {qsvc:.3}"));
        }
        let qsvr = best_mean(TaskKind::Svr, &data, &fp, &protocol)?;
        if !(0.83..=0.93).contains(&qsvr) {
            failures.push(format!("QSVR {qsvr:.3}"));
        }

        let grid = GridSpec::default_for(TaskKind::HybridQnn);
        let classify = run_grid(TaskKind::HybridQnn, &grid, &data, &protocol, 0, &fp).map_err(|e| e.to_string())?;
        let acc = classify
            .full_data
            .iter()
            .find(|f| f.cell.reps == 2 && f.status == CellStatus::Ok)
            .and_then(|f| f.accuracy)
            .ok_or("no depth-2 hybrid classifier")?;
        if (acc - 0.905).abs() > 1.0 / 21.0 {
            failures.push(format!("hybrid accuracy {acc:.3}"));
        }

        let regress_protocol = Protocol {
            objective: Objective::Regression,
            ..protocol
        };
        let regress =
            run_grid(TaskKind::HybridQnn, &grid, &data, &regress_protocol, 0, &fp).map_err(|e| e.to_string())?;
        let pearson: Vec<f64> = regress
            .full_data
            .iter()
            .filter_map(|f| f.r2.map(|r| r.pearson_r2))
            .collect();
        if pearson.len() != 3 || pearson.iter().any(|&r| r < 0.80) {
            failures.push(format!("hybrid Pearson R2 {pearson:?}"));
        }

        let summary = format!(
            "QSVC {qsvc:.3}, QSVR {qsvr:.3}, hybrid accuracy {acc:.3}, hybrid Pearson R2 {:?}",
            pearson.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        );
        if failures.is_empty() {
            Ok(summary)
        } else {
            Err(format!("{summary}; outside band: {}", failures.join(", ")))
        }
    };
    match run() {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    }
}

fn ci_pipelines() -> Check {
    let dir = tmp()?;
    let root = dir.path();
    for task in ["svc", "svr"] {
        quick_tune(task, &root.join(task), &["--reps", "1,2", "--c", "1,10"])?;
    }
    for task in ["qnn", "hybrid-qnn"] {
        for objective in ["classification", "regression"] {
            let out = root.join(format!("{task}-{objective}"));
            quick_tune(task, &out, &["--objective", objective, "--epochs", "5"])?;
            ensure(out.join(format!("scores_{task}.csv")).exists(), || {
                format!("{task} scores missing")
            })?;
        }
    }
    for task in ["svc", "svr", "qnn", "hybrid-qnn"] {
        let m = root.join(format!("model-{task}"));
        qkml(&[
            "train",
            "--task",
            task,
            "--data",
            FIXTURE,
            "--epochs",
            "5",
            "--out",
            p(&m),
            "--quiet",
        ])?;
        let pred = root.join(format!("pred-{task}"));
        qkml(&[
            "predict",
            "--model",
            p(&m.join("model.json")),
            "--data",
            FIXTURE,
            "--out",
            p(&pred),
            "--quiet",
        ])?;
        let n = fs::read_to_string(pred.join("predictions.csv"))
            .map_err(|e| e.to_string())?
            .lines()
            .count();
        ensure(n == 22, || format!("{task}: {n} prediction lines"))?;
    }
    let k = root.join("kernel");
    qkml(&["kernel", "--data", FIXTURE, "--out", p(&k), "--quiet"])?;
    ensure(k.join("kernel.csv").exists(), || "kernel.csv missing".into())?;
    qkml(&["report", "--run", p(&root.join("svc")), "--out", p(&root.join("regen"))])?;
    ensure(root.join("regen/report.json").exists(), || {
        "report did not regenerate".into()
    })?;
    Ok("tune for 4 tasks, train and predict, kernel and report on the fixture".into())
}

type Criterion = Box<dyn Fn() -> Outcome>;

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("simulator identities", Box::new(|| check(simulator_identities()))),
        ("kernel properties", Box::new(|| check(kernel_properties()))),
        (
            "full and circular coincide on 3 qubits",
            Box::new(|| check(full_circular_coincidence())),
        ),
        ("gradients match finite differences", Box::new(|| check(gradients()))),
        ("SMO matches brute-force dual", Box::new(|| check(smo_against_oracle()))),
        ("default grid shapes", Box::new(|| check(grid_shapes()))),
        ("deterministic outputs", Box::new(|| check(determinism()))),
        ("toy regression converges", Box::new(|| check(toy_regression()))),
        ("measured-table scores reproduce", Box::new(reproduction)),
        ("fixture pipelines run end to end", Box::new(|| check(ci_pipelines()))),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        // Bypasses the harness capture so the lines show up in every run.
        let _ = writeln!(
            std::io::stderr().lock(),
            "[{tag}] {:>2}. {name} ({secs:.2}s): {detail}",
            i + 1
        );
        if matches!(outcome, Outcome::Fail(_)) {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn check(r: Check) -> Outcome {
    match r {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    }
}
