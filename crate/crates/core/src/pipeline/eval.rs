use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::label::{Expression, NUM_CLASSES};
use crate::mlp::MlpModel;

use super::LabeledFeatures;

/// Confusion matrix (rows true, columns predicted) and accuracies.
#[derive(Clone, PartialEq, Debug)]
pub struct EvalReport {
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    /// Percent correct per class; `None` for classes absent from the set.
    pub per_class: [Option<f64>; NUM_CLASSES],
    /// Unweighted mean of the per-class percentages over present classes.
    pub average_per_class: f64,
    /// Correct predictions over all samples, percent.
    pub pooled: f64,
}

impl EvalReport {
    pub fn from_predictions(truth: &[Expression], predicted: &[Expression]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::InvalidArgument("evaluation set is empty".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        let mut per_class = [None; NUM_CLASSES];
        for (i, row) in confusion.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > 0 {
                per_class[i] = Some(row[i] as f64 / total as f64 * 100.0);
            }
        }
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let average_per_class = present.iter().sum::<f64>() / present.len() as f64;
        let correct: usize = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            confusion,
            per_class,
            average_per_class,
            pooled: correct as f64 / truth.len() as f64 * 100.0,
        })
    }

    pub fn class_total(&self, e: Expression) -> usize {
        self.confusion[e.index()].iter().sum()
    }

    pub fn class_correct(&self, e: Expression) -> usize {
        self.confusion[e.index()][e.index()]
    }

    /// `Feeling / Correct / Accuracy %` table followed by the averages and
    /// the confusion matrix.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>9} {:>11}", "Feeling", "Correct", "Accuracy %");
        for e in Expression::ALL {
            let acc = match self.per_class[e.index()] {
                Some(a) => format!("{a:.1}"),
                None => "-".into(),
            };
            let frac = format!("{}/{}", self.class_correct(e), self.class_total(e));
            let _ = writeln!(s, "{:<10} {:>9} {:>11}", e.title(), frac, acc);
        }
        let _ = writeln!(
            s,
            "Average per-class accuracy: {:.1}%",
            self.average_per_class
        );
        let _ = writeln!(s, "Pooled accuracy:            {:.1}%", self.pooled);
        let _ = writeln!(s);
        let _ = write!(s, "{:<10}", "true\\pred");
        for e in Expression::ALL {
            let _ = write!(s, " {:>4}", e.jaffe_code());
        }
        let _ = writeln!(s);
        for e in Expression::ALL {
            let _ = write!(s, "{:<10}", e.title());
            for c in self.confusion[e.index()] {
                let _ = write!(s, " {c:>4}");
            }
            let _ = writeln!(s);
        }
        s
    }

    /// One row per true class: predicted counts, totals and accuracy.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label");
        for e in Expression::ALL {
            let _ = write!(s, ",pred_{}", e.as_str());
        }
        s.push_str(",total,correct,accuracy_percent\n");
        for e in Expression::ALL {
            s.push_str(e.as_str());
            for c in self.confusion[e.index()] {
                let _ = write!(s, ",{c}");
            }
            let acc = self.per_class[e.index()]
                .map(|a| format!("{a:.4}"))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                ",{},{},{acc}",
                self.class_total(e),
                self.class_correct(e)
            );
        }
        s
    }
}

/// Classifies every vector with `mlp`; vectors must already be normalized.
pub fn evaluate(mlp: &MlpModel, data: &LabeledFeatures) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let predicted = data
        .features
        .iter()
        .map(|x| mlp.classify(x).map(|(label, _)| label))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(&data.labels, &predicted)
}
