//! Confusion matrices, precision/recall/F1, accuracy and ROC-AUC.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("accuracy of an empty confusion matrix")]
    Empty,
    #[error("binary ROC-AUC needs both classes present")]
    SingleClass,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= k {
                return Err(MetricsError::LabelOutOfRange { label, k });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores with `class` treated as the positive label.
pub fn class_scores(cm: &ConfusionMatrix, class: usize) -> ClassScores {
    let tp = cm.counts[class][class];
    let support: u64 = cm.counts[class].iter().sum();
    let predicted = cm.col_sum(class);
    let mut flag = false;
    let precision = ratio(tp, predicted, &mut flag);
    let recall = ratio(tp, support, &mut flag);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        flag = true;
        0.0
    };
    ClassScores {
        precision,
        recall,
        f1,
        support,
        zero_division: flag,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    Weighted,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: bool,
}

pub fn averaged_scores(cm: &ConfusionMatrix, average: Average) -> AveragedScores {
    let per: Vec<ClassScores> = (0..cm.k()).map(|c| class_scores(cm, c)).collect();
    let total = cm.total();
    let weight = |s: &ClassScores| match average {
        Average::Weighted if total > 0 => s.support as f64 / total as f64,
        Average::Weighted => 0.0,
        Average::Macro => 1.0 / cm.k().max(1) as f64,
    };
    let mut out = AveragedScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        zero_division: false,
    };
    for s in &per {
        let w = weight(s);
        out.precision += w * s.precision;
        out.recall += w * s.recall;
        out.f1 += w * s.f1;
        // A class absent from both truth and predictions carries no weighted mass.
        if s.zero_division && (average == Average::Macro || s.support > 0) {
            out.zero_division = true;
        }
    }
    out
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    match cm.total() {
        0 => Err(MetricsError::Empty),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

/// Support-weighted F1 straight from label vectors.
pub fn weighted_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64, MetricsError> {
    Ok(averaged_scores(&confusion(y_true, y_pred, k)?, Average::Weighted).f1)
}

/// Mann-Whitney AUC with ties credited one half.
pub fn roc_auc_binary(y_true: &[bool], scores: &[f64]) -> Result<f64, MetricsError> {
    if y_true.len() != scores.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), scores.len()));
    }
    let n_pos = y_true.iter().filter(|&&y| y).count() as u64;
    let n_neg = y_true.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the U statistic, kept integral so the result is exact.
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if y_true[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrAuc {
    pub auc: Option<f64>,
    pub per_class: Vec<Option<f64>>,
    /// Classes with no positive (or no negative) rows, left out of the mean.
    pub skipped: Vec<usize>,
}

/// Unweighted mean of one-vs-rest AUCs over classes that have both labels.
pub fn roc_auc_ovr(y_true: &[usize], proba: &[Vec<f64>], k: usize) -> Result<OvrAuc, MetricsError> {
    if y_true.len() != proba.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), proba.len()));
    }
    let mut per_class = Vec::with_capacity(k);
    let mut skipped = Vec::new();
    for c in 0..k {
        let labels: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
        let scores: Vec<f64> = proba.iter().map(|row| row[c]).collect();
        match roc_auc_binary(&labels, &scores) {
            Ok(a) => per_class.push(Some(a)),
            Err(MetricsError::SingleClass) => {
                skipped.push(c);
                per_class.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let auc = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok(OvrAuc { auc, per_class, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassEntry {
    pub class: String,
    #[serde(flatten)]
    pub scores: ClassScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model_id: String,
    pub feature_subset: Vec<String>,
    pub seed: u64,
    pub data_hash: String,
    pub provenance: String,
    pub n_rows: u64,
    pub class_names: Vec<String>,
    pub per_class: Vec<PerClassEntry>,
    pub weighted: AveragedScores,
    #[serde(rename = "macro")]
    pub macro_avg: AveragedScores,
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    /// Why ROC-AUC is absent or partial, if it is.
    pub roc_auc_note: Option<String>,
    pub confusion: ConfusionMatrix,
}

/// Identifying information attached to every report.
#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub model_id: String,
    pub feature_subset: Vec<String>,
    pub seed: u64,
    pub data_hash: String,
    pub provenance: String,
}

pub fn build_report(
    ctx: &ReportContext,
    class_names: &[String],
    y_true: &[usize],
    y_pred: &[usize],
    proba: Option<&[Vec<f64>]>,
) -> Result<EvalReport, MetricsError> {
    let k = class_names.len();
    let cm = confusion(y_true, y_pred, k)?;
    let (roc_auc, roc_auc_note) = match proba {
        None => (None, Some("probabilities unavailable".to_string())),
        Some(p) if k == 2 => {
            let labels: Vec<bool> = y_true.iter().map(|&y| y == 1).collect();
            let scores: Vec<f64> = p.iter().map(|row| row[1]).collect();
            match roc_auc_binary(&labels, &scores) {
                Ok(a) => (Some(a), None),
                Err(MetricsError::SingleClass) => (None, Some("single class in truth".to_string())),
                Err(e) => return Err(e),
            }
        }
        Some(p) => {
            let ovr = roc_auc_ovr(y_true, p, k)?;
            let note = (!ovr.skipped.is_empty()).then(|| {
                let names: Vec<&str> = ovr.skipped.iter().map(|&c| class_names[c].as_str()).collect();
                format!("classes without positives skipped: {}", names.join(", "))
            });
            (ovr.auc, note)
        }
    };
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_id: ctx.model_id.clone(),
        feature_subset: ctx.feature_subset.clone(),
        seed: ctx.seed,
        data_hash: ctx.data_hash.clone(),
        provenance: ctx.provenance.clone(),
        n_rows: cm.total(),
        class_names: class_names.to_vec(),
        per_class: (0..k)
            .map(|c| PerClassEntry {
                class: class_names[c].clone(),
                scores: class_scores(&cm, c),
            })
            .collect(),
        weighted: averaged_scores(&cm, Average::Weighted),
        macro_avg: averaged_scores(&cm, Average::Macro),
        accuracy: if cm.total() > 0 { accuracy(&cm)? } else { 0.0 },
        roc_auc,
        roc_auc_note,
        confusion: cm,
    })
}

/// Writes `<stem>.json` and `<stem>_confusion.csv` into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path, stem: &str) -> Result<(), MetricsError> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}_confusion.csv")))?;
    let mut header = vec!["true\\pred".to_string()];
    header.extend(report.class_names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in report.class_names.iter().zip(&report.confusion.counts) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.trace(), 3);
        assert_eq!(confusion(&[], &[], 2).unwrap().total(), 0);
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn precision_recall_f1_example() {
        // TP=9, FP=1, FN=0 for class 1.
        let mut y_true = vec![1; 9];
        let mut y_pred = vec![1; 9];
        y_true.push(0);
        y_pred.push(1);
        let s = class_scores(&confusion(&y_true, &y_pred, 2).unwrap(), 1);
        assert!((s.precision - 0.9).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 1.8 / 1.9).abs() < 1e-15);
        assert!((s.f1 - 0.9474).abs() < 1e-4);
    }

    #[test]
    fn reported_presence_scores_are_consistent() {
        let f1: f64 = 2.0 * 0.9 * 0.975 / (0.9 + 0.975);
        assert!((f1 - 0.936).abs() < 5e-4);
        assert!((f1 - 0.932).abs() < 0.005);
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let y = [0, 1, 2, 0, 1, 2];
        let cm = confusion(&y, &y, 3).unwrap();
        let w = averaged_scores(&cm, Average::Weighted);
        assert_eq!((w.precision, w.recall, w.f1), (1.0, 1.0, 1.0));
        let cm = confusion(&y, &[0; 6], 3).unwrap();
        assert!((accuracy(&cm).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(averaged_scores(&cm, Average::Macro).zero_division);
    }

    #[test]
    fn accuracy_examples() {
        let cm = ConfusionMatrix { counts: vec![vec![1, 1], vec![1, 1]] };
        assert_eq!(accuracy(&cm).unwrap(), 0.5);
        let cm = ConfusionMatrix { counts: vec![vec![0, 2], vec![0, 2]] };
        assert_eq!(accuracy(&cm).unwrap(), 0.5);
        assert!(accuracy(&ConfusionMatrix { counts: vec![vec![0; 2]; 2] }).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc_binary(&[true, false], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(roc_auc_binary(&[true, false, true, false], &[0.5; 4]).unwrap(), 0.5);
        let a = roc_auc_binary(&[true, false, true, false], &[0.9, 0.8, 0.4, 0.1]).unwrap();
        assert_eq!(a, 0.75);
        assert!(matches!(roc_auc_binary(&[true, true], &[0.1, 0.2]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn ovr_skips_absent_classes() {
        let proba = vec![vec![0.8, 0.1, 0.1], vec![0.2, 0.7, 0.1]];
        let ovr = roc_auc_ovr(&[0, 1], &proba, 3).unwrap();
        assert_eq!(ovr.skipped, vec![2]);
        assert_eq!(ovr.auc, Some(1.0));
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let rep = build_report(&ReportContext::default(), &names, &[0, 1, 1], &[0, 1, 0], None).unwrap();
        assert!(rep.roc_auc.is_none() && rep.roc_auc_note.is_some());
        assert_eq!(rep.accuracy, rep.confusion.trace() as f64 / rep.confusion.total() as f64);
        emit_report(&rep, dir.path(), "r").unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert!(json["weighted"]["f1"].is_number() && json["macro"]["f1"].is_number());
        let csv = std::fs::read_to_string(dir.path().join("r_confusion.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "true\\pred,a,b");
    }
}
