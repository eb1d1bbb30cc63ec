use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_examples, classes_of, LabeledExample, LearnError};
use crate::world::SignClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 1000,
            seed: 0,
        }
    }
}

/// One weight vector per class; the last component multiplies a constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub classes: Vec<SignClass>,
    pub weights: Vec<Vec<f64>>,
    pub config: SvmConfig,
}

fn score(w: &[f64], x: &[f64]) -> f64 {
    let dim = x.len();
    w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[dim]
}

/// Binary Pegasos over `order`, repeated for `epochs` passes with a global
/// step counter. The bias is not shrunk. Returns the mean of the iterates
/// produced during the final pass.
pub fn pegasos_binary(xs: &[Vec<f64>], ys: &[f64], lambda: f64, epochs: usize, order: &[usize]) -> Vec<f64> {
    let dim = xs.first().map_or(0, Vec::len);
    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut t = 0u64;
    for epoch in 0..epochs {
        for &i in order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = (&xs[i], ys[i]);
            let violated = y * score(&w, x) < 1.0;
            let shrink = 1.0 - eta * lambda;
            w[..dim].iter_mut().for_each(|v| *v *= shrink);
            if violated {
                w[..dim].iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y * xi);
                w[dim] += eta * y;
            }
            if epoch + 1 == epochs {
                avg.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
            }
        }
    }
    if !order.is_empty() {
        avg.iter_mut().for_each(|a| *a /= order.len() as f64);
    }
    avg
}

/// The example order used by every binary problem: a seeded shuffle.
pub fn training_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

pub fn train_svm(examples: &[LabeledExample], config: &SvmConfig) -> Result<LinearSvmModel, LearnError> {
    check_examples(examples)?;
    let classes = classes_of(examples);
    if classes.len() < 2 {
        return Err(LearnError::TooFewClasses(classes.len()));
    }
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(LearnError::BadLambda(config.lambda));
    }
    if config.epochs == 0 {
        return Err(LearnError::BadEpochs);
    }
    let xs: Vec<Vec<f64>> = examples.iter().map(|e| e.features.clone()).collect();
    let order = training_order(examples.len(), config.seed);
    let weights = classes
        .iter()
        .map(|&c| {
            let ys: Vec<f64> = examples.iter().map(|e| if e.label == c { 1.0 } else { -1.0 }).collect();
            pegasos_binary(&xs, &ys, config.lambda, config.epochs, &order)
        })
        .collect();
    Ok(LinearSvmModel {
        classes,
        weights,
        config: *config,
    })
}

/// Highest-scoring class (ties to the earlier class) and its score.
pub fn predict_svm(model: &LinearSvmModel, f: &[f64]) -> (SignClass, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in model.weights.iter().enumerate() {
        let s = score(w, f);
        if s > best.1 {
            best = (i, s);
        }
    }
    (model.classes[best.0], best.1)
}

/// Regularized hinge objective λ/2‖w‖² + mean hinge (bias excluded from the norm).
pub fn objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let dim = w.len() - 1;
    let reg = lambda / 2.0 * w[..dim].iter().map(|v| v * v).sum::<f64>();
    let hinge = xs.iter().zip(ys).map(|(x, y)| (1.0 - y * score(w, x)).max(0.0)).sum::<f64>() / xs.len() as f64;
    reg + hinge
}
