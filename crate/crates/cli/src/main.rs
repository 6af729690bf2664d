mod args;
mod model;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use qkml_core::dataset::{fingerprint, load_table, SfePolicy, DEFAULT_SCALE_MAX};
use qkml_core::experiment::{emit_outputs, run_grid, LabeledData, Report, SCHEMA_VERSION};
use qkml_core::qkernel::gram_matrix;
use qkml_core::{FeatureMapSpec, ScalerParams};

use args::{resolve, Cli, Command, KernelArgs, Mode, PredictArgs, ReportArgs, RunArgs};
use model::{train_model, SavedModel, MODEL_SCHEMA_VERSION};

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Fatal(String),
}

impl From<qkml_core::Error> for CliError {
    fn from(e: qkml_core::Error) -> Self {
        CliError::Fatal(e.to_string())
    }
}

struct Progress {
    quiet: bool,
}

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| CliError::Fatal(format!("cannot start worker pool: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Fatal(format!("cannot create {}: {e}", dir.display())))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Fatal(format!("cannot write {}: {e}", path.display())))
}

fn load_labeled(path: &Path, protocol: &qkml_core::experiment::Protocol) -> Result<(LabeledData, String), CliError> {
    let samples = load_table(path, SfePolicy::Required)?;
    let data = LabeledData::new(&samples, protocol.label_threshold, protocol.label_convention)?;
    Ok((data, fingerprint(&samples)))
}

fn cmd_tune(args: &RunArgs) -> Result<u8, CliError> {
    let run = resolve(args, Mode::Tune)?;
    let log = Progress { quiet: run.quiet };
    let (data, fp) = load_labeled(&run.data, &run.protocol)?;
    let n_cells = run.grid.cells(run.task)?.len();
    log.say(format!(
        "tune {}: {} samples, {n_cells} cells, seed {}",
        run.task,
        data.len(),
        run.seed
    ));
    let start = Instant::now();
    let mut report: Report =
        pool(run.jobs)?.install(|| run_grid(run.task, &run.grid, &data, &run.protocol, run.seed, &fp))?;
    report.config = Some(serde_json::to_value(&run.effective).map_err(qkml_core::Error::from)?);
    for r in &report.results {
        match (r.mean, &r.reason) {
            (Some(m), _) => log.say(format!(
                "  {}: mean {m:.4} std {:.4} ({} ms)",
                r.cell,
                r.std.unwrap_or(0.0),
                r.wall_time_ms
            )),
            (None, reason) => log.say(format!(
                "  {}: failed: {}",
                r.cell,
                reason.as_deref().unwrap_or("unknown")
            )),
        }
    }
    if let Some(b) = &report.best {
        log.say(format!("best: {} mean {:.4}", b.cell, b.mean));
    }
    for f in &report.full_data {
        if let Some(a) = f.accuracy {
            log.say(format!("full-data {}: accuracy {a:.4}", f.cell));
        }
        if let Some(r2) = f.r2 {
            log.say(format!(
                "full-data {}: pearson r2 {:.4}, determination {:.4}",
                f.cell, r2.pearson_r2, r2.coefficient_of_determination
            ));
        }
    }
    let written = emit_outputs(&report, &run.out)?;
    log.say(format!(
        "wrote {} files to {} in {:.1} s",
        written.len(),
        run.out.display(),
        start.elapsed().as_secs_f64()
    ));
    Ok(if report.failed_cells() > 0 {
        log.say(format!("{} cells failed", report.failed_cells()));
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

fn cmd_train(args: &RunArgs) -> Result<u8, CliError> {
    let run = resolve(args, Mode::Train)?;
    let log = Progress { quiet: run.quiet };
    let (data, _) = load_labeled(&run.data, &run.protocol)?;
    let cell = run.grid.cells(run.task)?[0];
    log.say(format!("train {} {cell} on {} samples", run.task, data.len()));
    let (saved, outcome) = pool(run.jobs)?.install(|| train_model(run.task, &cell, &data, &run.protocol, run.seed))?;
    let mut json = serde_json::to_vec_pretty(&saved).map_err(qkml_core::Error::from)?;
    json.push(b'\n');
    write_file(&run.out.join("model.json"), &json)?;
    if let Some(out) = outcome {
        write_file(&run.out.join("loss.csv"), out.loss_csv().as_bytes())?;
        log.say(format!("final loss {:.6}", out.final_loss()));
    }
    log.say(format!(
        "training score {:.4}, max residual {:.4}; wrote {}",
        saved.training_score,
        saved.training_max_abs_residual,
        run.out.join("model.json").display()
    ));
    Ok(EXIT_OK)
}

fn cmd_predict(args: &PredictArgs) -> Result<u8, CliError> {
    let log = Progress { quiet: args.quiet };
    let text = fs::read_to_string(&args.model)
        .map_err(|e| CliError::Fatal(format!("cannot read model {}: {e}", args.model.display())))?;
    let saved: SavedModel = serde_json::from_str(&text)
        .map_err(|e| CliError::Fatal(format!("invalid model {}: {e}", args.model.display())))?;
    if saved.schema_version != MODEL_SCHEMA_VERSION {
        return Err(CliError::Fatal(format!(
            "model schema version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
            saved.schema_version
        )));
    }
    let samples = load_table(&args.data, SfePolicy::Optional)?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features()).collect();
    let pred = saved.predict(&rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let column = if saved.is_classification() {
        "predicted_label"
    } else {
        "predicted_sfe_mj_m2"
    };
    let csv_err = |e: csv::Error| CliError::Fatal(e.to_string());
    w.write_record(["element", column]).map_err(csv_err)?;
    for (s, p) in samples.iter().zip(&pred) {
        let value = if saved.is_classification() {
            format!("{}", *p as u8)
        } else {
            p.to_string()
        };
        w.write_record([s.element.as_str(), value.as_str()]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Fatal(e.to_string()))?;
    let path = args.out.join("predictions.csv");
    write_file(&path, &bytes)?;
    log.say(format!("predicted {} rows; wrote {}", pred.len(), path.display()));
    Ok(EXIT_OK)
}

fn cmd_kernel(args: &KernelArgs) -> Result<u8, CliError> {
    let log = Progress { quiet: args.quiet };
    let samples = load_table(&args.data, SfePolicy::Optional)?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features()).collect();
    let scaler = ScalerParams::fit(&rows, args.scale_max.unwrap_or(DEFAULT_SCALE_MAX))?;
    let x = scaler.transform(&rows)?;
    let spec = FeatureMapSpec::new(x[0].len(), args.reps, args.entanglement)?;
    let k = pool(args.jobs)?.install(|| gram_matrix(&x, &spec))?;
    let labels: Vec<String> = samples.iter().map(|s| s.element.clone()).collect();
    let mut bytes = Vec::new();
    k.write_csv(&mut bytes, &labels, &labels)?;
    let path = args.out.join("kernel.csv");
    write_file(&path, &bytes)?;
    log.say(format!(
        "{}x{} kernel (reps {}, {}) written to {}",
        k.nrows(),
        k.ncols(),
        args.reps,
        args.entanglement,
        path.display()
    ));
    Ok(EXIT_OK)
}

fn cmd_report(args: &ReportArgs) -> Result<u8, CliError> {
    let path = args.run.join("report.json");
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::Fatal(format!("cannot read {}: {e}", path.display())))?;
    let report: Report =
        serde_json::from_str(&text).map_err(|e| CliError::Fatal(format!("invalid {}: {e}", path.display())))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(CliError::Fatal(format!(
            "report schema version {} is not supported (expected {SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    let ok = report.results.iter().filter(|r| r.is_ok()).count();
    println!(
        "task {} | dataset {} ({} samples) | seed {} | {} of {} cells ok | metric {}",
        report.task,
        &report.dataset.fingerprint[..report.dataset.fingerprint.len().min(12)],
        report.dataset.n_samples,
        report.seed,
        ok,
        report.results.len(),
        report.metric
    );
    if let Some(b) = &report.best {
        println!("best {} mean {:.4}", b.cell, b.mean);
    }
    for f in &report.full_data {
        match (f.accuracy, f.r2) {
            (Some(a), _) => println!("full-data {} accuracy {a:.4}", f.cell),
            (None, Some(r2)) => println!(
                "full-data {} pearson_r2 {:.4} determination {:.4}",
                f.cell, r2.pearson_r2, r2.coefficient_of_determination
            ),
            _ => println!(
                "full-data {} failed: {}",
                f.cell,
                f.reason.as_deref().unwrap_or("unknown")
            ),
        }
    }
    let out = args.out.as_deref().unwrap_or(&args.run);
    emit_outputs(&report, out)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Tune(a) => cmd_tune(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
