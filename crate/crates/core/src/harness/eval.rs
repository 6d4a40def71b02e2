use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{argmax, extract_features, PhaserModel};

pub const EVAL_BATCH: usize = 64;

/// Accuracy, mean loss and confusion counts of a set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `NaN` for classes absent from the labels.
    pub per_class: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

/// Mean softmax cross-entropy of one row of logits (log-sum-exp form).
pub fn row_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub fn evaluate_logits(logits: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Evaluation> {
    if logits.len() != labels.len() {
        return Err(Error::Shape(format!("{} logit rows for {} labels", logits.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(Error::LabelOutOfRange {
            sample: i,
            label: l,
            num_classes,
        });
    }
    if let Some(r) = logits.iter().find(|r| r.len() != num_classes) {
        return Err(Error::Shape(format!("logit row of width {}, expected {num_classes}", r.len())));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(labels.len());
    for (row, &y) in logits.iter().zip(labels) {
        let p = argmax(row);
        confusion[y][p] += 1;
        loss += row_cross_entropy(row, y);
        predictions.push(p);
    }
    let n = labels.len() as f64;
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                f64::NAN
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: loss / n,
        per_class,
        confusion,
        predictions,
    })
}

/// Eval-mode metrics of `model` on `ds`.
pub fn evaluate(model: &mut PhaserModel, ds: &LabeledDataset) -> Result<Evaluation> {
    if ds.num_classes() > model.cfg.num_classes {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes, model predicts {}",
            ds.num_classes(),
            model.cfg.num_classes
        )));
    }
    let feats = extract_features(&model.cfg, ds)?;
    let logits = model.predict_logits(&feats, EVAL_BATCH)?;
    evaluate_logits(&logits, ds.labels(), model.cfg.num_classes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub split: String,
    pub accuracy: f64,
    pub loss: f64,
    pub per_class: Vec<f64>,
}

impl MetricsRow {
    pub fn from_eval(scenario: impl Into<String>, seed: u64, split: impl Into<String>, e: &Evaluation) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            split: split.into(),
            accuracy: e.accuracy,
            loss: e.loss,
            per_class: e.per_class.clone(),
        }
    }
}

/// `scenario,seed,split,accuracy,loss,acc_class_0..K-1`.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let k = rows.iter().map(|r| r.per_class.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["scenario", "seed", "split", "accuracy", "loss"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..k).map(|c| format!("acc_class_{c}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.scenario.clone(),
            r.seed.to_string(),
            r.split.clone(),
            r.accuracy.to_string(),
            r.loss.to_string(),
        ];
        rec.extend((0..k).map(|c| r.per_class.get(c).map_or(String::new(), f64::to_string)));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::Malformed(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let labels: Vec<usize> = (0..12).map(|i| i % 6).collect();
        let onehot: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| (0..6).map(|c| if c == y { 5.0 } else { 0.0 }).collect())
            .collect();
        let e = evaluate_logits(&onehot, &labels, 6).unwrap();
        assert_eq!(e.accuracy, 1.0);
        let constant = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; 12];
        let e = evaluate_logits(&constant, &labels, 6).unwrap();
        assert!((e.accuracy - 1.0 / 6.0).abs() < 1e-15);
        let trace: usize = (0..6).map(|c| e.confusion[c][c]).sum();
        assert_eq!(trace as f64 / 12.0, e.accuracy);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            evaluate_logits(&[vec![0.0, 1.0]], &[2], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn csv_header() {
        let row = MetricsRow {
            scenario: "s".into(),
            seed: 1,
            split: "val".into(),
            accuracy: 0.5,
            loss: 0.7,
            per_class: vec![1.0, 0.0],
        };
        let csv = String::from_utf8(metrics_csv(&[row]).unwrap()).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "scenario,seed,split,accuracy,loss,acc_class_0,acc_class_1");
        assert_eq!(csv.lines().nth(1).unwrap(), "s,1,val,0.5,0.7,1,0");
    }
}
