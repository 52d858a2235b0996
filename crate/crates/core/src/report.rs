//! CSV exports and imports.

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::classifier::{ErrorMap, ErrorMode};
use crate::ded::TrainReport;
use crate::diffusion::DiffusionEmbedding;
use crate::error::{Result, VadError};
use crate::eval::{GridResult, Metrics, RocCurve};
use crate::persist::write_atomic;
use crate::Real;

fn csv_err(e: csv::Error) -> VadError {
    VadError::Csv(e.to_string())
}

/// Writes rows of string fields atomically.
fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| VadError::Csv(e.to_string()))?;
    write_atomic(path, |f| std::io::Write::write_all(f, &bytes))
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn num<T: Real>(v: T) -> String {
    v.as_f64().to_string()
}

/// `frame_index,label`
pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    write_rows(
        path,
        &strings(&["frame_index", "label"]),
        labels.iter().enumerate().map(|(i, y)| vec![i.to_string(), y.to_string()]),
    )
}

/// Reads a `label` column from any CSV with a header, in row order.
pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let col = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| VadError::Csv(format!("{} has no label column", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let y = match rec.get(col) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(VadError::Csv(format!(
                    "{} row {}: label must be 0 or 1, got {:?}",
                    path.display(),
                    i + 1,
                    other.unwrap_or("")
                )))
            }
        };
        out.push(y);
    }
    Ok(out)
}

/// One row per frame with `f0..f{D-1}` columns and an optional `label`.
pub fn write_features<T: Real>(path: &Path, features: ArrayView2<T>, labels: Option<&[u8]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != features.nrows() {
            return Err(VadError::Dimension(format!("{} labels for {} feature rows", l.len(), features.nrows())));
        }
    }
    let mut header: Vec<String> = (0..features.ncols()).map(|j| format!("f{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    write_rows(
        path,
        &header,
        features.rows().into_iter().enumerate().map(|(i, row)| {
            let mut fields: Vec<String> = row.iter().map(|&v| num(v)).collect();
            if let Some(l) = labels {
                fields.push(l[i].to_string());
            }
            fields
        }),
    )
}

/// Reads a feature dump written by [`write_features`].
pub fn read_features<T: Real>(path: &Path) -> Result<(Array2<T>, Option<Vec<u8>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let label_col = header.iter().position(|h| h == "label");
    let dims = header.len() - label_col.is_some() as usize;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows += 1;
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == label_col {
                labels.push(match field {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(VadError::Csv(format!("row {rows}: bad label {field:?}"))),
                });
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| VadError::Csv(format!("row {rows}: bad number {field:?}")))?;
                values.push(T::lit(v));
            }
        }
    }
    let x = Array2::from_shape_vec((rows, dims), values)
        .map_err(|_| VadError::Csv(format!("{}: ragged rows", path.display())))?;
    Ok((x, label_col.map(|_| labels)))
}

/// `frame_index,label,score`
pub fn write_predictions<T: Real>(path: &Path, labels: &[u8], scores: &[T]) -> Result<()> {
    write_rows(
        path,
        &strings(&["frame_index", "label", "score"]),
        labels
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (y, &s))| vec![i.to_string(), y.to_string(), num(s)]),
    )
}

/// `frame_index,label,e_en0,e_de0,e_en1,e_de1`; encoder columns are empty
/// for realtime maps.
pub fn write_error_map<T: Real>(path: &Path, map: &ErrorMap<T>, labels: &[u8]) -> Result<()> {
    if labels.len() != map.len() {
        return Err(VadError::Dimension(format!("{} labels for {} error coordinates", labels.len(), map.len())));
    }
    write_rows(
        path,
        &strings(&["frame_index", "label", "e_en0", "e_de0", "e_en1", "e_de1"]),
        map.values.rows().into_iter().enumerate().map(|(i, row)| {
            let mut fields = vec![i.to_string(), labels[i].to_string()];
            match map.mode {
                ErrorMode::Realtime => {
                    fields.extend([String::new(), num(row[0]), String::new(), num(row[1])]);
                }
                ErrorMode::Batch => fields.extend(row.iter().map(|&v| num(v))),
            }
            fields
        }),
    )
}

/// `index,m1..md,sm1..smd`
pub fn write_embedding<T: Real>(path: &Path, embedding: &DiffusionEmbedding<T>) -> Result<()> {
    let d = embedding.dim();
    let mut header = vec!["index".to_string()];
    header.extend((1..=d).map(|j| format!("m{j}")));
    header.extend((1..=d).map(|j| format!("sm{j}")));
    write_rows(
        path,
        &header,
        (0..embedding.coords.nrows()).map(|i| {
            let mut fields = vec![i.to_string()];
            fields.extend(embedding.coords.row(i).iter().map(|&v| num(v)));
            fields.extend(embedding.softmax.row(i).iter().map(|&v| num(v)));
            fields
        }),
    )
}

/// `hypothesis,stage,epoch,loss,gradient_norm`
pub fn write_loss_curves(path: &Path, reports: &[TrainReport]) -> Result<()> {
    let mut rows = Vec::new();
    for r in reports {
        for s in &r.stages {
            for (e, (loss, g)) in s.losses.iter().zip(&s.gradient_norms).enumerate() {
                rows.push(vec![
                    r.hypothesis.label().to_string(),
                    s.stage.name().to_string(),
                    (e + 1).to_string(),
                    loss.to_string(),
                    g.to_string(),
                ]);
            }
        }
    }
    write_rows(path, &strings(&["hypothesis", "stage", "epoch", "loss", "gradient_norm"]), rows)
}

/// `threshold,fp,tp`, thresholds decreasing.
pub fn write_roc(path: &Path, curve: &RocCurve) -> Result<()> {
    write_rows(
        path,
        &strings(&["threshold", "fp", "tp"]),
        curve
            .points
            .iter()
            .map(|p| vec![p.threshold.to_string(), p.fp_rate.to_string(), p.tp_rate.to_string()]),
    )
}

/// `fraction,ratio,accuracy,batch_accuracy,rows0,rows1`
pub fn write_grid(path: &Path, grid: &GridResult) -> Result<()> {
    write_rows(
        path,
        &strings(&["fraction", "ratio", "accuracy", "batch_accuracy", "rows0", "rows1"]),
        grid.cells.iter().map(|c| {
            vec![
                c.fraction.to_string(),
                c.ratio.to_string(),
                c.accuracy.to_string(),
                c.batch_accuracy.to_string(),
                c.rows[0].to_string(),
                c.rows[1].to_string(),
            ]
        }),
    )
}

/// `mode,metric,value` rows, one block per `(mode, metrics, auc)` entry.
pub fn write_metrics(path: &Path, entries: &[(&str, &Metrics, Option<f64>)]) -> Result<()> {
    let mut rows = Vec::new();
    for &(mode, m, auc) in entries {
        let mut push = |name: &str, value: String| rows.push(vec![mode.to_string(), name.to_string(), value]);
        push("accuracy", m.accuracy.to_string());
        push("tp_rate", m.tp_rate.to_string());
        push("tn_rate", m.tn_rate.to_string());
        push("fp_rate", m.fp_rate.to_string());
        push("fn_rate", m.fn_rate.to_string());
        push("positives", m.positives.to_string());
        push("negatives", m.negatives.to_string());
        if let Some(a) = auc {
            push("auc", a.to_string());
        }
    }
    write_rows(path, &strings(&["mode", "metric", "value"]), rows)
}
