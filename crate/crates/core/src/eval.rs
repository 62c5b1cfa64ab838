//! Extraction metrics, confidence-threshold curves, k-fold cross-validation
//! and report rendering.
//!
//! Precision and recall only count items whose value is not "unbranded":
//! `P = c / n_PB`, `R = c / n_TB`, where `c` counts branded predictions equal
//! to the gold value.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, Template};

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub n_true_branded: usize,
    pub n_predicted_branded: usize,
    pub correct: usize,
    /// `None` when nothing was predicted as branded.
    pub precision: Option<f64>,
    /// `None` when no gold item is branded.
    pub recall: Option<f64>,
    /// `2c / (n_PB + n_TB)`; `None` when both counts are zero.
    pub f1: Option<f64>,
    pub tokens: usize,
    pub correct_tokens: usize,
    /// `None` when no label sequences were given.
    pub label_accuracy: Option<f64>,
}

impl EvaluationReport {
    fn from_counts(n: usize, n_tb: usize, n_pb: usize, c: usize, tokens: usize, correct_tokens: usize) -> Self {
        EvaluationReport {
            n,
            n_true_branded: n_tb,
            n_predicted_branded: n_pb,
            correct: c,
            precision: ratio(c, n_pb),
            recall: ratio(c, n_tb),
            f1: ratio(2 * c, n_pb + n_tb),
            tokens,
            correct_tokens,
            label_accuracy: ratio(correct_tokens, tokens),
        }
    }

    pub fn loss(&self) -> Option<f64> {
        self.f1.map(|f| 1.0 - f)
    }

    /// Sums the counts of several reports.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a EvaluationReport>) -> Self {
        let mut t = (0, 0, 0, 0, 0, 0);
        for r in reports {
            t.0 += r.n;
            t.1 += r.n_true_branded;
            t.2 += r.n_predicted_branded;
            t.3 += r.correct;
            t.4 += r.tokens;
            t.5 += r.correct_tokens;
        }
        Self::from_counts(t.0, t.1, t.2, t.3, t.4, t.5)
    }
}

/// Item-level metrics over aligned gold and predicted values (`None` is
/// unbranded). Label sequences, when given, must align with the values and
/// with each other.
pub fn compute_extraction_metrics(
    gold: &[Option<String>],
    predicted: &[Option<String>],
    gold_labels: Option<&[Vec<Label>]>,
    predicted_labels: Option<&[Vec<Label>]>,
) -> Result<EvaluationReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            what: "predictions",
            expected: gold.len(),
            got: predicted.len(),
        });
    }
    let n_tb = gold.iter().filter(|g| g.is_some()).count();
    let n_pb = predicted.iter().filter(|p| p.is_some()).count();
    let c = gold
        .iter()
        .zip(predicted)
        .filter(|(g, p)| p.is_some() && g == p)
        .count();
    let (mut tokens, mut correct_tokens) = (0, 0);
    match (gold_labels, predicted_labels) {
        (None, None) => {}
        (Some(gl), Some(pl)) => {
            for (what, len) in [("gold label sequences", gl.len()), ("predicted label sequences", pl.len())] {
                if len != gold.len() {
                    return Err(Error::LengthMismatch {
                        what,
                        expected: gold.len(),
                        got: len,
                    });
                }
            }
            for (g, p) in gl.iter().zip(pl) {
                if g.len() != p.len() {
                    return Err(Error::LengthMismatch {
                        what: "labels",
                        expected: g.len(),
                        got: p.len(),
                    });
                }
                tokens += g.len();
                correct_tokens += g.iter().zip(p).filter(|(a, b)| a == b).count();
            }
        }
        _ => return Err(Error::InvalidConfig("label sequences must be given for both gold and predictions".into())),
    }
    Ok(EvaluationReport::from_counts(gold.len(), n_tb, n_pb, c, tokens, correct_tokens))
}

/// One decoded title for threshold analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub gold: Vec<Label>,
    pub predicted: Vec<Label>,
    /// Model probability of `predicted`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub theta: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub points: Vec<ThresholdPoint>,
}

/// `0, 0.01, ..., 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

fn all_outside(y: &[Label]) -> bool {
    y.iter().all(|&l| l == Label::O)
}

/// `P(theta)` and `R(theta)`: a prediction counts when its confidence is at
/// least `theta` and it is not all-O; it is correct when it equals the gold
/// sequence exactly.
pub fn threshold_curve(items: &[ScoredSequence], grid: &[f64]) -> Result<ThresholdCurve> {
    for it in items {
        if !(0.0..=1.0).contains(&it.confidence) {
            return Err(Error::InvalidConfig(format!("confidence {} outside [0, 1]", it.confidence)));
        }
        if it.gold.len() != it.predicted.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: it.gold.len(),
                got: it.predicted.len(),
            });
        }
    }
    let branded_gold = items.iter().filter(|it| !all_outside(&it.gold)).count();
    let points = grid
        .iter()
        .map(|&theta| {
            let kept = items
                .iter()
                .filter(|it| it.confidence >= theta && !all_outside(&it.predicted));
            let (mut den, mut num) = (0, 0);
            for it in kept {
                den += 1;
                num += usize::from(it.predicted == it.gold);
            }
            ThresholdPoint {
                theta,
                precision: ratio(num, den),
                recall: ratio(num, branded_gold),
            }
        })
        .collect();
    Ok(ThresholdCurve { points })
}

/// Sequence-level precision and recall with no threshold.
pub fn sequence_level_metrics(items: &[ScoredSequence]) -> Result<ThresholdPoint> {
    Ok(threshold_curve(items, &[0.0])?.points.remove(0))
}

/// Mean of per-fold values with a margin of two standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub margin: f64,
    /// Folds where the metric was defined.
    pub folds: usize,
}

impl MetricSummary {
    /// `None` when no value is defined.
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return None;
        }
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let margin = if v.len() > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            2.0 * var.sqrt() / k.sqrt()
        } else {
            0.0
        };
        Some(MetricSummary {
            mean,
            margin,
            folds: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<EvaluationReport>,
    pub precision: Option<MetricSummary>,
    pub recall: Option<MetricSummary>,
    pub f1: Option<MetricSummary>,
    pub label_accuracy: Option<MetricSummary>,
}

impl CvSummary {
    pub fn from_folds(k: usize, seed: u64, folds: Vec<EvaluationReport>) -> Self {
        CvSummary {
            k,
            seed,
            precision: MetricSummary::from_values(folds.iter().map(|r| r.precision)),
            recall: MetricSummary::from_values(folds.iter().map(|r| r.recall)),
            f1: MetricSummary::from_values(folds.iter().map(|r| r.f1)),
            label_accuracy: MetricSummary::from_values(folds.iter().map(|r| r.label_accuracy)),
            folds,
        }
    }

    pub fn mean_f1(&self) -> f64 {
        self.f1.map_or(0.0, |s| s.mean)
    }
}

/// Shuffled item indices split into `k` contiguous folds whose sizes differ
/// by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::TooFewItems { len: n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

/// Trains on `k - 1` folds and evaluates on the remaining one, for every
/// fold. Folds run in parallel; results are ordered by fold.
pub fn cross_validate<T, F>(corpus: &[T], k: usize, seed: u64, train_and_evaluate: F) -> Result<CvSummary>
where
    T: Clone + Sync,
    F: Fn(&[T], &[T]) -> Result<EvaluationReport> + Sync,
{
    let folds = fold_assignment(corpus.len(), k, seed)?;
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(j, test_idx)| {
            let test: Vec<T> = test_idx.iter().map(|&i| corpus[i].clone()).collect();
            let train: Vec<T> = folds
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != j)
                .flat_map(|(_, f)| f.iter().map(|&i| corpus[i].clone()))
                .collect();
            train_and_evaluate(&train, &test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_folds(k, seed, reports))
}

/// Trainer used by feature ablation: fits on the first slice with the given
/// templates and evaluates on the second.
pub type AblationTrainer<'a, T> = &'a (dyn Fn(&FeatureConfig, &[T], &[T]) -> Result<EvaluationReport> + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub template: String,
    /// Per model, in the order given.
    pub f1_without: Vec<f64>,
    /// `meanF1(all templates) - meanF1(without this template)`, per model.
    pub delta_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub models: Vec<String>,
    pub full_f1: Vec<f64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// True when dropping any template lowers (or keeps) F1 for every model.
    pub fn all_features_help(&self) -> bool {
        self.rows.iter().all(|r| r.delta_f1.iter().all(|&d| d >= 0.0))
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.template.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:<width$}", "template");
        for m in &self.models {
            let _ = write!(out, " | dF1 {m:>6}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.template);
            for d in &r.delta_f1 {
                let _ = write!(out, " | {d:>10.3}");
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", "(none)");
        for f in &self.full_f1 {
            let _ = write!(out, " | F1 {f:>7.3}");
        }
        out.push('\n');
        let _ = writeln!(out, "every template helps: {}", if self.all_features_help() { "yes" } else { "no" });
        out
    }
}

/// Cross-validated F1 with each template in `templates` turned off in turn,
/// compared with the full configuration.
pub fn ablate_features<T: Clone + Sync>(
    corpus: &[T],
    full: &FeatureConfig,
    templates: &[Template],
    models: &[(String, AblationTrainer<'_, T>)],
    k: usize,
    seed: u64,
) -> Result<AblationTable> {
    if let Some(t) = templates.iter().find(|t| !full.contains(**t)) {
        return Err(Error::UnknownTemplate(t.name().to_string()));
    }
    let run = |cfg: &FeatureConfig| -> Result<Vec<f64>> {
        models
            .iter()
            .map(|(_, train)| Ok(cross_validate(corpus, k, seed, |tr, te| train(cfg, tr, te))?.mean_f1()))
            .collect()
    };
    let full_f1 = run(full)?;
    let rows = templates
        .iter()
        .map(|&t| {
            let without = run(&full.without(t))?;
            Ok(AblationRow {
                template: t.name().to_string(),
                delta_f1: full_f1.iter().zip(&without).map(|(a, b)| a - b).collect(),
                f1_without: without,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable {
        models: models.iter().map(|(n, _)| n.clone()).collect(),
        full_f1,
        rows,
    })
}

/// One row of a model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub precision: Option<MetricSummary>,
    pub recall: Option<MetricSummary>,
    pub f1: Option<MetricSummary>,
    /// `None` for models that do not label tokens.
    pub label_accuracy: Option<MetricSummary>,
}

impl ComparisonRow {
    pub fn from_summary(model: impl Into<String>, cv: &CvSummary) -> Self {
        ComparisonRow {
            model: model.into(),
            precision: cv.precision,
            recall: cv.recall,
            f1: cv.f1,
            label_accuracy: cv.label_accuracy,
        }
    }
}

fn percent(s: &Option<MetricSummary>) -> String {
    match s {
        Some(s) => format!("{:.2}±{:.2}", 100.0 * s.mean, 100.0 * s.margin),
        None => "NA".to_string(),
    }
}

/// Aligned columns: Precision(%), Recall(%), F1(%), Label Accuracy(%).
pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let header = ["Model", "Precision(%)", "Recall(%)", "F1(%)", "Label Accuracy(%)"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                percent(&r.precision),
                percent(&r.recall),
                percent(&r.f1),
                percent(&r.label_accuracy),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cols.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    for row in &cells {
        out.push_str(&line(row));
    }
    out
}

/// One JSON object per row.
pub fn comparison_jsonl(rows: &[ComparisonRow]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{B, I, O};

    fn v(s: &str) -> Option<String> {
        Some(s.to_string())
    }

    /// Ten items: five branded golds, four branded predictions, three right.
    fn hand_case() -> (Vec<Option<String>>, Vec<Option<String>>) {
        let gold = vec![v("a"), v("b"), v("c"), v("d"), v("e"), None, None, None, None, None];
        let pred = vec![v("a"), v("b"), v("c"), v("x"), None, None, None, None, None, None];
        (gold, pred)
    }

    #[test]
    fn hand_constructed_metrics() {
        let (g, p) = hand_case();
        let r = compute_extraction_metrics(&g, &p, None, None).unwrap();
        assert_eq!((r.n, r.n_true_branded, r.n_predicted_branded, r.correct), (10, 5, 4, 3));
        assert_eq!(r.precision, Some(0.75));
        assert_eq!(r.recall, Some(0.6));
        assert_eq!(r.f1, Some(2.0 / 3.0));
        assert_eq!(r.loss(), Some(1.0 - 2.0 / 3.0));
        assert_eq!(r.label_accuracy, None);
    }

    #[test]
    fn undefined_precision() {
        let g = vec![v("a"), None];
        let p = vec![None, None];
        let r = compute_extraction_metrics(&g, &p, None, None).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.f1, Some(0.0));
    }

    #[test]
    fn label_accuracy() {
        let g = vec![vec![B, O, O, O, O], vec![O, O, O, O, O]];
        let mut p = g.clone();
        p[1][4] = B;
        let vals = vec![None, None];
        let r = compute_extraction_metrics(&vals, &vals, Some(&g), Some(&p)).unwrap();
        assert_eq!(r.label_accuracy, Some(0.9));
    }

    #[test]
    fn misaligned_inputs() {
        assert!(compute_extraction_metrics(&[None], &[], None, None).is_err());
        let g = vec![vec![O]];
        assert!(compute_extraction_metrics(&[None], &[None], Some(&g), None).is_err());
        assert!(compute_extraction_metrics(&[None], &[None], Some(&g), Some(&[vec![O, O]])).is_err());
    }

    fn scored(gold: &[Label], pred: &[Label], c: f64) -> ScoredSequence {
        ScoredSequence {
            gold: gold.to_vec(),
            predicted: pred.to_vec(),
            confidence: c,
        }
    }

    #[test]
    fn threshold_at_zero_matches_item_metrics() {
        // Same hand case with sequences: right, right, right, wrong span,
        // missed, then five unbranded.
        let items = vec![
            scored(&[B, O], &[B, O], 0.9),
            scored(&[O, B], &[O, B], 0.8),
            scored(&[B, I], &[B, I], 0.4),
            scored(&[B, O], &[O, B], 0.6),
            scored(&[B, O], &[O, O], 0.7),
            scored(&[O, O], &[O, O], 0.9),
            scored(&[O, O], &[O, O], 0.9),
            scored(&[O, O], &[O, O], 0.9),
            scored(&[O, O], &[O, O], 0.9),
            scored(&[O, O], &[O, O], 0.9),
        ];
        let (g, p) = hand_case();
        let item = compute_extraction_metrics(&g, &p, None, None).unwrap();
        let zero = sequence_level_metrics(&items).unwrap();
        assert_eq!(zero.precision, item.precision);
        assert_eq!(zero.recall, item.recall);
        let curve = threshold_curve(&items, &default_grid()).unwrap();
        assert_eq!(curve.points.len(), 101);
        assert_eq!(curve.points[0].precision, Some(0.75));
        let above = threshold_curve(&items, &[0.95]).unwrap();
        assert_eq!(above.points[0].precision, None);
        assert_eq!(above.points[0].recall, Some(0.0));
        assert!(threshold_curve(&[scored(&[O], &[O], 1.5)], &[0.0]).is_err());
    }

    #[test]
    fn folds_partition() {
        let folds = fold_assignment(100, 10, 7).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(100, 10, 7).unwrap());
        assert_ne!(folds, fold_assignment(100, 10, 8).unwrap());
        assert!(matches!(fold_assignment(5, 10, 0), Err(Error::TooFewItems { .. })));
    }

    #[test]
    fn margins() {
        let s = MetricSummary::from_values([Some(0.5); 10]).unwrap();
        assert_eq!((s.mean, s.margin), (0.5, 0.0));
        // Sample sd of (1, 2, 3, 4) is sqrt(5/3).
        let s = MetricSummary::from_values([1.0, 2.0, 3.0, 4.0].map(Some)).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.margin - 2.0 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!(MetricSummary::from_values([None, None]).is_none());
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let corpus: Vec<usize> = (0..53).collect();
        let eval = |train: &[usize], test: &[usize]| {
            assert_eq!(train.len() + test.len(), 53);
            let g: Vec<Option<String>> = test.iter().map(|i| Some(i.to_string())).collect();
            let p: Vec<Option<String>> = test.iter().map(|i| (i % 3 != 0).then(|| i.to_string())).collect();
            compute_extraction_metrics(&g, &p, None, None)
        };
        let a = cross_validate(&corpus, 10, 3, eval).unwrap();
        let b = cross_validate(&corpus, 10, 3, eval).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.iter().map(|r| r.n).sum::<usize>(), 53);
        assert_eq!(a.precision.unwrap().mean, 1.0);
    }

    #[test]
    fn comparison_rendering() {
        let s = MetricSummary { mean: 0.9194, margin: 0.0025, folds: 10 };
        let rows = vec![
            ComparisonRow { model: "crf".into(), precision: Some(s), recall: Some(s), f1: Some(s), label_accuracy: Some(s) },
            ComparisonRow { model: "dict-max".into(), precision: Some(s), recall: Some(s), f1: Some(s), label_accuracy: None },
        ];
        let text = comparison_text(&rows);
        assert!(text.starts_with("Model"));
        assert!(text.contains("Precision(%)") && text.contains("Label Accuracy(%)"));
        assert!(text.lines().nth(2).unwrap().ends_with("NA"));
        assert!(text.contains("91.94±0.25"));
        assert_eq!(comparison_jsonl(&rows).unwrap().lines().count(), 2);
    }

    proptest! {
        #[test]
        fn metric_invariants(pairs in proptest::collection::vec((0u8..4, 0u8..4), 0..60)) {
            let val = |x: u8| (x > 0).then(|| x.to_string());
            let g: Vec<_> = pairs.iter().map(|p| val(p.0)).collect();
            let p: Vec<_> = pairs.iter().map(|p| val(p.1)).collect();
            let r = compute_extraction_metrics(&g, &p, None, None).unwrap();
            prop_assert!(r.correct <= r.n_true_branded.min(r.n_predicted_branded));
            for x in [r.precision, r.recall, r.f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            if let (Some(pr), Some(re)) = (r.precision, r.recall) {
                if pr + re > 0.0 {
                    prop_assert!((r.f1.unwrap() - 2.0 * pr * re / (pr + re)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn recall_never_increases_with_theta(items in proptest::collection::vec((0usize..3, 0usize..3, 0.0f64..=1.0), 0..40)) {
            let seqs = [vec![O, O], vec![B, O], vec![O, B]];
            let items: Vec<_> = items.iter().map(|&(g, p, c)| scored(&seqs[g], &seqs[p], c)).collect();
            let curve = threshold_curve(&items, &default_grid()).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].recall.unwrap_or(0.0) <= w[0].recall.unwrap_or(0.0));
            }
        }
    }
}
