use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Counts with hate as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// [hate, not_hate]
    pub fn class_metrics(&self) -> [ClassMetrics; 2] {
        [
            class_metrics("hate", self.tp, self.fp, self.fn_),
            class_metrics("not_hate", self.tn, self.fn_, self.fp),
        ]
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_metrics(name: &str, tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClassMetrics { class: name.to_string(), precision, recall, f1, support: tp + fn_ }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<EvalReport>,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let classes = confusion.class_metrics();
        let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / 2.0;
        EvalReport {
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            classes: classes.to_vec(),
            confusion,
            folds: Vec::new(),
        }
    }

    pub fn hate(&self) -> &ClassMetrics {
        &self.classes[0]
    }
}

fn by_id<'a>(pairs: &'a [(String, bool)], what: &str) -> Result<HashMap<&'a str, bool>, ModelError> {
    let mut m = HashMap::with_capacity(pairs.len());
    for (id, l) in pairs {
        if m.insert(id.as_str(), *l).is_some() {
            return Err(ModelError::IdMismatch(format!("duplicate {what} id {id}")));
        }
    }
    Ok(m)
}

/// Per-class and macro scores. Predictions and gold must cover the same ids.
pub fn evaluate(predictions: &[(String, bool)], gold: &[(String, bool)]) -> Result<EvalReport, ModelError> {
    let p = by_id(predictions, "prediction")?;
    let g = by_id(gold, "gold")?;
    if p.len() != g.len() {
        return Err(ModelError::IdMismatch(format!("{} predictions for {} gold labels", p.len(), g.len())));
    }
    let mut c = Confusion::default();
    for (id, &truth) in &g {
        let Some(&pred) = p.get(id) else {
            return Err(ModelError::IdMismatch(format!("no prediction for {id}")));
        };
        match (pred, truth) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(EvalReport::from_confusion(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(labels: &[bool]) -> Vec<(String, bool)> {
        labels.iter().enumerate().map(|(i, &l)| (i.to_string(), l)).collect()
    }

    #[test]
    fn textbook_case() {
        // gold 4 hate / 6 not; predicted hate on 3 hate and 1 not
        let gold = pairs(&[true, true, true, true, false, false, false, false, false, false]);
        let pred = pairs(&[true, true, true, false, true, false, false, false, false, false]);
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!(r.confusion, Confusion { tp: 3, fp: 1, fn_: 1, tn: 5 });
        assert!((r.hate().f1 - 0.75).abs() < 1e-12);
        assert!((r.classes[1].f1 - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_division_is_zero() {
        let gold = pairs(&[false, false]);
        let r = evaluate(&gold, &gold).unwrap();
        assert_eq!(r.hate().precision, 0.0);
        assert_eq!(r.hate().f1, 0.0);
        assert_eq!(r.classes[1].f1, 1.0);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn id_mismatch() {
        let gold = pairs(&[true, false]);
        let mut pred = gold.clone();
        pred[1].0 = "x".into();
        assert!(matches!(evaluate(&pred, &gold), Err(ModelError::IdMismatch(_))));
        assert!(matches!(evaluate(&gold[..1], &gold), Err(ModelError::IdMismatch(_))));
    }
}
