use serde::Serialize;

use super::{Classifier, LabeledExample, LearnError};
use crate::world::SignClass;

const N: usize = SignClass::PLACEABLE.len();

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub total: usize,
    /// `confusion[true][predicted]`, indexed in canonical class order.
    pub confusion: [[usize; N]; N],
}

pub fn evaluate(model: &Classifier, test: &[LabeledExample]) -> Result<Evaluation, LearnError> {
    if test.is_empty() {
        return Err(LearnError::EmptyTestSet);
    }
    let mut confusion = [[0usize; N]; N];
    let mut correct = 0usize;
    for e in test {
        let truth = e.label.index().ok_or(LearnError::BadLabel)?;
        let (pred, _) = model.predict(&e.features);
        let pred = pred.index().expect("models only hold placeable classes");
        confusion[truth][pred] += 1;
        correct += usize::from(truth == pred);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        total: test.len(),
        confusion,
    })
}
