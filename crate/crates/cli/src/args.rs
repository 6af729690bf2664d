use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qkml_core::dataset::{SplitScheme, DEFAULT_SCALE_MAX};
use qkml_core::experiment::{GridSpec, Protocol, TaskKind};
use qkml_core::{EntanglementPattern, LabelConvention, Objective};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "qkml",
    version,
    about = "Quantum-kernel SVMs and QNNs for stacking-fault-energy data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a hyperparameter grid and write report.json plus CSV tables.
    Tune(RunArgs),
    /// Fit one configuration on the full dataset and write model.json.
    Train(RunArgs),
    /// Apply a saved model to a dataset and write predictions.csv.
    Predict(PredictArgs),
    /// Write the quantum-kernel Gram matrix of a dataset.
    Kernel(KernelArgs),
    /// Print a summary of a finished run and regenerate its CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Shuffle,
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Classification,
    Regression,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Classification => Objective::Classification,
            ObjectiveArg::Regression => Objective::Regression,
        }
    }
}

fn parse_reps(s: &str) -> Result<usize, String> {
    let r: usize = s.trim().parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if r < 1 {
        return Err("reps must be an integer and at least 1".into());
    }
    Ok(r)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("`{s}` must be an integer and at least 1")),
    }
}

fn parse_pattern(s: &str) -> Result<EntanglementPattern, String> {
    s.trim().parse().map_err(|e: qkml_core::Error| e.to_string())
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.trim().parse().map_err(|e: qkml_core::Error| e.to_string())
}

fn parse_convention(s: &str) -> Result<LabelConvention, String> {
    s.trim().parse().map_err(|e: qkml_core::Error| e.to_string())
}

/// Flags shared by `tune` and `train`. Every flag overrides the matching
/// field of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// svc, svr, qnn or hybrid-qnn [default: svc]
    #[arg(long, value_parser = parse_task)]
    pub task: Option<TaskKind>,
    /// Dataset CSV (element,bulk_modulus_gpa,volume_a3,electronegativity,sfe_mj_m2)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long, value_parser = parse_count)]
    pub jobs: Option<usize>,
    /// Circuit depths, comma separated [default: 1,2,3,4,5 for SVMs, 1,2,3 for QNNs; train: 1]
    #[arg(long, value_delimiter = ',', value_parser = parse_reps)]
    pub reps: Option<Vec<usize>>,
    /// SVM regularization values [default: 0.1,1,10,100; train: 1]
    #[arg(long = "c", value_delimiter = ',', value_parser = parse_positive)]
    pub c: Option<Vec<f64>>,
    /// SVR tube widths in mJ/m² [default: 0.01,0.001; train: 0.01]
    #[arg(long, value_delimiter = ',', value_parser = parse_non_negative)]
    pub epsilon: Option<Vec<f64>>,
    /// Entanglement patterns [default: circular,full,linear for SVMs, full for QNNs; train: full]
    #[arg(long, value_delimiter = ',', value_parser = parse_pattern)]
    pub entanglement: Option<Vec<EntanglementPattern>>,
    /// methods (SFE <= 19 is class 1) or dataset (SFE >= 19 is class 1) [default: methods]
    #[arg(long, value_parser = parse_convention)]
    pub label_convention: Option<LabelConvention>,
    /// Upper end of the feature scaling range in radians [default: pi]
    #[arg(long, value_parser = parse_positive)]
    pub scale_max: Option<f64>,
    /// Validation protocol [default: shuffle]
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolKind>,
    /// Shuffled 80/20 splits per sweep [default: 20]
    #[arg(long, value_parser = parse_count)]
    pub repeats: Option<usize>,
    /// Folds for the kfold protocol [default: 5]
    #[arg(long, value_parser = parse_count)]
    pub folds: Option<usize>,
    /// Sweeps with consecutive master seeds whose scores are averaged [default: 3]
    #[arg(long, value_parser = parse_count)]
    pub sweeps: Option<usize>,
    /// Training epochs for QNN tasks [default: 100]
    #[arg(long, value_parser = parse_count)]
    pub epochs: Option<usize>,
    /// Adam learning rate for QNN tasks [default: 0.05]
    #[arg(long, value_parser = parse_positive)]
    pub learning_rate: Option<f64>,
    /// Loss of the QNN tasks [default: classification]
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// JSON run configuration; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Suppress progress messages
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// model.json written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV; the sfe_mj_m2 column may be empty
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory [default: out]
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Suppress progress messages
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Dataset CSV; the sfe_mj_m2 column may be empty
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Feature-map depth
    #[arg(long, default_value = "1", value_parser = parse_reps)]
    pub reps: usize,
    /// Entanglement pattern
    #[arg(long, default_value = "full", value_parser = parse_pattern)]
    pub entanglement: EntanglementPattern,
    /// Upper end of the feature scaling range in radians [default: pi]
    #[arg(long, value_parser = parse_positive)]
    pub scale_max: Option<f64>,
    /// Worker threads [default: available parallelism]
    #[arg(long, value_parser = parse_count)]
    pub jobs: Option<usize>,
    /// Suppress progress messages
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory holding report.json
    #[arg(long)]
    pub run: PathBuf,
    /// Where to regenerate the CSV tables [default: the run directory]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file. Field names match the long flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<Vec<EntanglementPattern>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_convention: Option<LabelConvention>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quiet: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Fatal(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Flag values win over file values.
    fn overlay(self, a: &RunArgs) -> Self {
        RunConfig {
            task: a.task.or(self.task),
            data: a.data.clone().or(self.data),
            out: a.out.clone().or(self.out),
            seed: a.seed.or(self.seed),
            jobs: a.jobs.or(self.jobs),
            reps: a.reps.clone().or(self.reps),
            c: a.c.clone().or(self.c),
            epsilon: a.epsilon.clone().or(self.epsilon),
            entanglement: a.entanglement.clone().or(self.entanglement),
            label_convention: a.label_convention.or(self.label_convention),
            scale_max: a.scale_max.or(self.scale_max),
            protocol: a.protocol.or(self.protocol),
            repeats: a.repeats.or(self.repeats),
            folds: a.folds.or(self.folds),
            sweeps: a.sweeps.or(self.sweeps),
            epochs: a.epochs.or(self.epochs),
            learning_rate: a.learning_rate.or(self.learning_rate),
            objective: a.objective.or(self.objective),
            quiet: if a.quiet { Some(true) } else { self.quiet },
        }
    }
}

/// Fully defaulted settings of a `tune` or `train` invocation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub task: TaskKind,
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub grid: GridSpec,
    pub protocol: Protocol,
    pub quiet: bool,
    /// Settings that influence results, for embedding in outputs.
    pub effective: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Tune,
    Train,
}

fn check_list<T>(name: &str, v: &Option<Vec<T>>) -> Result<(), CliError> {
    match v {
        Some(list) if list.is_empty() => Err(CliError::Usage(format!("--{name} needs at least one value"))),
        _ => Ok(()),
    }
}

pub fn resolve(args: &RunArgs, mode: Mode) -> Result<Resolved, CliError> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.overlay(args);
    check_list("reps", &cfg.reps)?;
    check_list("c", &cfg.c)?;
    check_list("epsilon", &cfg.epsilon)?;
    check_list("entanglement", &cfg.entanglement)?;
    if let Some(r) = cfg.reps.as_ref().and_then(|r| r.iter().find(|&&r| r < 1)) {
        return Err(CliError::Usage(format!(
            "reps must be an integer and at least 1, got {r}"
        )));
    }

    let task = cfg.task.unwrap_or(TaskKind::Svc);
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let defaults = match mode {
        Mode::Tune => GridSpec::default_for(task),
        Mode::Train => GridSpec {
            reps: vec![1],
            entanglement: vec![EntanglementPattern::Full],
            c: vec![1.0],
            epsilon: vec![0.01],
        },
    };
    let grid = GridSpec {
        reps: cfg.reps.clone().unwrap_or(defaults.reps),
        entanglement: cfg.entanglement.clone().unwrap_or(defaults.entanglement),
        c: cfg.c.clone().unwrap_or(defaults.c),
        epsilon: cfg.epsilon.clone().unwrap_or(defaults.epsilon),
    };
    if mode == Mode::Train {
        for (name, n) in [
            ("reps", grid.reps.len()),
            ("entanglement", grid.entanglement.len()),
            ("c", grid.c.len()),
            ("epsilon", grid.epsilon.len()),
        ] {
            if n > 1 {
                return Err(CliError::Usage(format!("train takes a single --{name} value, got {n}")));
            }
        }
    }

    let base = Protocol::default();
    let kind = cfg.protocol.unwrap_or(ProtocolKind::Shuffle);
    let scheme = match kind {
        ProtocolKind::Shuffle => SplitScheme::Shuffle {
            fraction: 0.2,
            repeats: cfg.repeats.unwrap_or(20),
        },
        ProtocolKind::Kfold => SplitScheme::KFold {
            k: cfg.folds.unwrap_or(5),
        },
    };
    let mut training = base.training;
    training.epochs = cfg.epochs.unwrap_or(training.epochs);
    training.learning_rate = cfg.learning_rate.unwrap_or(training.learning_rate);
    let protocol = Protocol {
        scheme,
        sweeps: cfg.sweeps.unwrap_or(base.sweeps),
        scale_max: cfg.scale_max.unwrap_or(DEFAULT_SCALE_MAX),
        training,
        objective: cfg.objective.map_or(base.objective, Objective::from),
        label_convention: cfg.label_convention.unwrap_or_default(),
        ..base
    };
    protocol.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    grid.cells(task).map_err(|e| CliError::Usage(e.to_string()))?;
    if matches!(kind, ProtocolKind::Kfold) && protocol_k(&scheme) < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }

    let seed = cfg.seed.unwrap_or(0);
    let effective = RunConfig {
        task: Some(task),
        seed: Some(seed),
        reps: Some(grid.reps.clone()),
        c: Some(grid.c.clone()),
        epsilon: Some(grid.epsilon.clone()),
        entanglement: Some(grid.entanglement.clone()),
        label_convention: Some(protocol.label_convention),
        scale_max: Some(protocol.scale_max),
        protocol: Some(kind),
        repeats: match scheme {
            SplitScheme::Shuffle { repeats, .. } => Some(repeats),
            SplitScheme::KFold { .. } => None,
        },
        folds: match scheme {
            SplitScheme::KFold { k } => Some(k),
            SplitScheme::Shuffle { .. } => None,
        },
        sweeps: Some(protocol.sweeps),
        epochs: Some(protocol.training.epochs),
        learning_rate: Some(protocol.training.learning_rate),
        objective: Some(match protocol.objective {
            Objective::Classification => ObjectiveArg::Classification,
            Objective::Regression => ObjectiveArg::Regression,
        }),
        ..RunConfig::default()
    };
    Ok(Resolved {
        task,
        data,
        out: cfg.out.unwrap_or_else(|| PathBuf::from("out")),
        seed,
        jobs: cfg.jobs,
        grid,
        protocol,
        quiet: cfg.quiet.unwrap_or(false),
        effective,
    })
}

fn protocol_k(scheme: &SplitScheme) -> usize {
    match scheme {
        SplitScheme::KFold { k } => *k,
        SplitScheme::Shuffle { .. } => usize::MAX,
    }
}
