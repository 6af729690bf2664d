use std::fs;
use std::path::{Path, PathBuf};

use super::{CellStatus, Report, TaskKind};
use crate::error::{Error, Result};
use crate::featmap::EntanglementPattern;

fn csv_bytes(header: &[String], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<buffer>"),
        source: e.into_error(),
    })
}

/// Mean scores with rows = reps and columns = C for one entanglement (and
/// one epsilon for SVR). Failed cells are left empty.
pub fn heatmap_csv(report: &Report, entanglement: EntanglementPattern, epsilon: Option<f64>) -> Result<Vec<u8>> {
    let grid = &report.grid;
    let mut header = vec!["reps".to_string()];
    header.extend(grid.c.iter().map(|c| c.to_string()));
    let rows = grid
        .reps
        .iter()
        .map(|&reps| {
            let mut row = vec![reps.to_string()];
            row.extend(grid.c.iter().map(|&c| {
                report
                    .results
                    .iter()
                    .find(|r| {
                        r.cell.reps == reps
                            && r.cell.entanglement == entanglement
                            && r.cell.c == Some(c)
                            && r.cell.epsilon == epsilon
                    })
                    .and_then(|r| r.mean)
                    .map_or(String::new(), |m| m.to_string())
            }));
            row
        })
        .collect();
    csv_bytes(&header, rows)
}

fn render(report: &Report) -> Result<Vec<(String, Vec<u8>)>> {
    if report.results.is_empty() {
        return Err(Error::config("report has no grid results to emit"));
    }
    let mut files = Vec::new();
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    files.push(("report.json".to_string(), json));

    let task = report.task;
    match task {
        TaskKind::Svc => {
            for &ent in &report.grid.entanglement {
                files.push((format!("heatmap_svc_{ent}.csv"), heatmap_csv(report, ent, None)?));
            }
        }
        TaskKind::Svr => {
            for &ent in &report.grid.entanglement {
                for &eps in &report.grid.epsilon {
                    files.push((
                        format!("heatmap_svr_{ent}_eps{eps}.csv"),
                        heatmap_csv(report, ent, Some(eps))?,
                    ));
                }
            }
        }
        TaskKind::Qnn | TaskKind::HybridQnn => {
            let header: Vec<String> = ["reps", "entanglement", "mean", "std", "status"]
                .map(String::from)
                .to_vec();
            let rows = report
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.cell.reps.to_string(),
                        r.cell.entanglement.to_string(),
                        r.mean.map_or(String::new(), |m| m.to_string()),
                        r.std.map_or(String::new(), |s| s.to_string()),
                        match r.status {
                            CellStatus::Ok => "ok".into(),
                            CellStatus::Failed => "failed".into(),
                        },
                    ]
                })
                .collect();
            files.push((format!("scores_{task}.csv"), csv_bytes(&header, rows)?));
        }
    }

    let fits = report.full_data.iter().filter(|f| f.status == CellStatus::Ok);
    let header: Vec<String> = ["reps", "entanglement", "element", "actual", "predicted"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = fits
        .clone()
        .flat_map(|f| {
            f.predictions.iter().map(move |p| {
                vec![
                    f.cell.reps.to_string(),
                    f.cell.entanglement.to_string(),
                    p.element.clone(),
                    p.actual.to_string(),
                    p.predicted.to_string(),
                ]
            })
        })
        .collect();
    files.push(("predictions.csv".into(), csv_bytes(&header, rows)?));

    if task.is_classification(report.protocol.objective) {
        let header: Vec<String> = ["reps", "entanglement", "element", "actual_label", "predicted_label"]
            .map(String::from)
            .to_vec();
        let rows = fits
            .flat_map(|f| {
                f.predictions.iter().map(move |p| {
                    vec![
                        f.cell.reps.to_string(),
                        f.cell.entanglement.to_string(),
                        p.element.clone(),
                        format!("{}", p.actual as u8),
                        format!("{}", p.predicted as u8),
                    ]
                })
            })
            .collect();
        files.push(("classification_bars.csv".into(), csv_bytes(&header, rows)?));
    }
    Ok(files)
}

/// Writes every output file for `report` into `out_dir` and returns their
/// paths. All content is rendered before anything touches the disk, and
/// each file appears through a rename.
pub fn emit_outputs(report: &Report, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let files = render(report)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let tmp = out_dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(Error::io(&tmp, e));
        }
        staged.push((tmp, out_dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dst) in staged {
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
        written.push(dst);
    }
    Ok(written)
}
