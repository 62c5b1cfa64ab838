//! Linear-chain conditional random field.
//!
//! `Pr(y | x; w) = exp(w^T F(x, y)) / Z(x)` with `Z` computed by the forward
//! algorithm in log space. Training maximizes the L2-regularized conditional
//! log-likelihood
//!
//! ```text
//! L2(w) = sum_i log Pr(y_i | x_i; w) - (lambda / 2) ||w||^2
//! ```
//!
//! whose gradient is `sum_i (F(x_i, y_i) - E[F(x_i, y)]) - lambda w`, the
//! expectation taken under the model's posterior from forward-backward.

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabelAlphabet, TaggedTitle, TokenizedTitle};
use crate::decode::{Lattice, LinearModel, ModelKind};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureIndex, TitleFeatures};
use crate::optimize::{minimize, LbfgsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfConfig {
    pub lambda: f64,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            lambda: 1.0,
            convergence_tol: 1e-6,
            max_iterations: 200,
            rng_seed: 0,
        }
    }
}

impl CrfConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig("convergence tolerance must be > 0".into()));
        }
        Ok(())
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log partition function and posterior marginals for one title.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    pub log_partition: f64,
    /// `position[i][l]`: probability of label `l` (by position in the
    /// lattice's label set) at token `i`.
    pub position: Vec<Vec<f64>>,
    /// `transition[i - 1][p][c]`: probability of labels `p` at `i - 1` and
    /// `c` at `i`, for `i >= 1`.
    pub transition: Vec<Vec<Vec<f64>>>,
}

impl Lattice {
    /// Forward-backward with per-position max shifting.
    pub fn forward_backward(&self) -> ForwardBackward {
        let m = self.len();
        let k = self.num_labels();
        let mut alpha = vec![0.0; m * k];
        let mut beta = vec![0.0; m * k];
        for l in 0..k {
            alpha[l] = self.start[l] + self.emit(0, l);
        }
        for i in 1..m {
            for c in 0..k {
                let prev = &alpha[(i - 1) * k..i * k];
                alpha[i * k + c] =
                    self.emit(i, c) + log_sum_exp((0..k).map(|p| prev[p] + self.trans(p, c)));
            }
        }
        for i in (0..m - 1).rev() {
            for p in 0..k {
                let next = &beta[(i + 1) * k..(i + 2) * k];
                beta[i * k + p] = log_sum_exp(
                    (0..k).map(|c| self.trans(p, c) + self.emit(i + 1, c) + next[c]),
                );
            }
        }
        let log_partition = log_sum_exp(alpha[(m - 1) * k..].iter().copied());
        let position = (0..m)
            .map(|i| {
                (0..k)
                    .map(|l| (alpha[i * k + l] + beta[i * k + l] - log_partition).exp())
                    .collect()
            })
            .collect();
        let transition = (1..m)
            .map(|i| {
                (0..k)
                    .map(|p| {
                        (0..k)
                            .map(|c| {
                                (alpha[(i - 1) * k + p] + self.trans(p, c) + self.emit(i, c) + beta[i * k + c]
                                    - log_partition)
                                    .exp()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ForwardBackward {
            log_partition,
            position,
            transition,
        }
    }

    /// Score of a path given as positions into the label set.
    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut s = self.start[path[0]];
        for (i, &l) in path.iter().enumerate() {
            s += self.emit(i, l);
            if i > 0 {
                s += self.trans(path[i - 1], l);
            }
        }
        s
    }

    pub fn log_partition(&self) -> f64 {
        self.forward_backward().log_partition
    }
}

pub fn forward_backward(x: &TokenizedTitle, model: &LinearModel) -> Result<ForwardBackward> {
    if x.is_empty() {
        return Err(Error::EmptyTitle);
    }
    Ok(model.lattice(x).forward_backward())
}

/// `Pr(y | x; w)`.
pub fn sequence_probability(x: &TokenizedTitle, y: &[Label], model: &LinearModel) -> Result<f64> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyTitle);
    }
    let lattice = model.lattice(x);
    let Some(path) = positions(&lattice, y) else {
        return Ok(0.0);
    };
    Ok((lattice.path_score(&path) - lattice.log_partition()).exp())
}

fn positions(lattice: &Lattice, y: &[Label]) -> Option<Vec<usize>> {
    y.iter().map(|&l| lattice.position(l)).collect()
}

/// Viterbi sequence and its conditional probability.
pub fn predict_with_confidence(x: &TokenizedTitle, model: &LinearModel) -> Result<(Vec<Label>, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyTitle);
    }
    let lattice = model.lattice(x);
    let (path, score) = lattice.viterbi();
    let confidence = (score - lattice.log_partition()).exp().min(1.0);
    Ok((lattice.labels_of(&path), confidence))
}

struct Example {
    features: TitleFeatures,
    gold: Vec<Label>,
}

/// Compiled training set for objective evaluation.
pub struct CrfObjective {
    examples: Vec<Example>,
    candidates: Vec<Label>,
    dimension: usize,
    lambda: f64,
}

impl CrfObjective {
    pub fn new(
        corpus: &[TaggedTitle],
        config: &FeatureConfig,
        index: &FeatureIndex,
        candidates: &[Label],
        lambda: f64,
    ) -> Result<Self> {
        let examples = corpus
            .iter()
            .map(|t| {
                if t.labels.len() != t.title.len() {
                    return Err(Error::LengthMismatch {
                        what: "labels",
                        expected: t.title.len(),
                        got: t.labels.len(),
                    });
                }
                if t.title.is_empty() {
                    return Err(Error::EmptyTitle);
                }
                if let Some(l) = t.labels.iter().find(|l| !candidates.contains(l)) {
                    return Err(Error::InvalidLabels(format!("gold label {l} outside the candidate set")));
                }
                Ok(Example {
                    features: TitleFeatures::compile(&t.title, config, index),
                    gold: t.labels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrfObjective {
            examples,
            candidates: candidates.to_vec(),
            dimension: index.len(),
            lambda,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `L2(w)` and its gradient. Examples are reduced in corpus order.
    pub fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dimension];
        let mut value = 0.0;
        for ex in &self.examples {
            value += self.accumulate(ex, w, &mut grad);
        }
        let mut sq = 0.0;
        for (g, &wj) in grad.iter_mut().zip(w) {
            *g -= self.lambda * wj;
            sq += wj * wj;
        }
        (value - 0.5 * self.lambda * sq, grad)
    }

    /// Adds `F(x, gold) - E[F]` into `grad` and returns `log Pr(gold | x)`.
    fn accumulate(&self, ex: &Example, w: &[f64], grad: &mut [f64]) -> f64 {
        let lattice = Lattice::from_features(&ex.features, w, &self.candidates);
        let fb = lattice.forward_backward();
        let gold: Vec<usize> = ex
            .gold
            .iter()
            .map(|&l| lattice.position(l).expect("gold labels checked"))
            .collect();
        for id in ex.features.ids_for(&ex.gold) {
            grad[id as usize] += 1.0;
        }
        let f = &ex.features;
        for (i, marg) in fb.position.iter().enumerate() {
            for (li, &p) in marg.iter().enumerate() {
                let label = self.candidates[li];
                for &id in &f.observations[i][label.index()] {
                    grad[id as usize] -= p;
                }
                if i == 0 {
                    if let Some(id) = f.transition(None, label) {
                        grad[id as usize] -= p;
                    }
                }
            }
        }
        for tm in &fb.transition {
            for (pi, row) in tm.iter().enumerate() {
                for (ci, &p) in row.iter().enumerate() {
                    if let Some(id) = f.transition(Some(self.candidates[pi]), self.candidates[ci]) {
                        grad[id as usize] -= p;
                    }
                }
            }
        }
        lattice.path_score(&gold) - fb.log_partition
    }
}

/// Value and gradient of `L2` at the model's weights.
pub fn regularized_objective_and_gradient(
    corpus: &[TaggedTitle],
    model: &LinearModel,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    model.validate()?;
    let objective = CrfObjective::new(corpus, &model.config, &model.index, &model.candidates, lambda)?;
    Ok(objective.value_and_gradient(&model.weights))
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct CrfTraining {
    pub model: LinearModel,
    /// `L2` at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `L2` from `w = 0`.
pub fn train_crf(
    corpus: &[TaggedTitle],
    config: &CrfConfig,
    features: &FeatureConfig,
    index: &FeatureIndex,
    alphabet: &LabelAlphabet,
) -> Result<LinearModel> {
    Ok(train_crf_traced(corpus, config, features, index, alphabet, &Label::ALL)?.model)
}

pub fn train_crf_traced(
    corpus: &[TaggedTitle],
    config: &CrfConfig,
    features: &FeatureConfig,
    index: &FeatureIndex,
    alphabet: &LabelAlphabet,
    candidates: &[Label],
) -> Result<CrfTraining> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    config.validate()?;
    let objective = CrfObjective::new(corpus, features, index, candidates, config.lambda)?;
    let lbfgs = LbfgsConfig {
        max_iterations: config.max_iterations,
        tolerance: config.convergence_tol,
        ..LbfgsConfig::default()
    };
    let result = minimize(
        |w| {
            let (v, g) = objective.value_and_gradient(w);
            (-v, g.into_iter().map(|x| -x).collect())
        },
        vec![0.0; index.len()],
        &lbfgs,
    )?;
    if !result.value.is_finite() {
        return Err(Error::NonFiniteObjective(-result.value));
    }
    let gradient_norm = result.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let model = LinearModel::new(result.x, index.clone(), alphabet.clone(), features.clone(), ModelKind::Crf)?
        .with_candidates(candidates)?;
    Ok(CrfTraining {
        model,
        objective_trace: result.trace.iter().map(|v| -v).collect(),
        gradient_norm,
        iterations: result.iterations,
        converged: result.converged,
    })
}
