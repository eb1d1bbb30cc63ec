//! Three recognition tiers: nearest centroid, one-vs-rest linear SVM, and a
//! sliding-window detector with non-maximum suppression.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::percept::{extract_features, Patch};
use crate::world::SignClass;

pub mod centroid;
pub mod detect;
pub mod eval;
pub mod svm;

pub use centroid::{predict_centroid, train_centroid, train_centroid_with_classes, CentroidModel};
pub use detect::{detect, detections_payload, nms, Detection, DetectorConfig};
pub use eval::{evaluate, Evaluation};
pub use svm::{pegasos_binary, predict_svm, train_svm, LinearSvmModel, SvmConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0} has no examples")]
    EmptyClass(SignClass),
    #[error("lambda must be > 0, got {0}")]
    BadLambda(f64),
    #[error("epochs must be >= 1")]
    BadEpochs,
    #[error("label none is not a sign class")]
    BadLabel,
    #[error("feature length {got} does not match {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("bad detector config: {0}")]
    BadConfig(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: SignClass,
}

impl LabeledExample {
    pub fn from_patch(patch: &Patch, label: SignClass) -> LabeledExample {
        LabeledExample {
            features: extract_features(patch),
            label,
        }
    }
}

pub fn examples_from_patches(items: &[(SignClass, Patch)]) -> Vec<LabeledExample> {
    items.iter().map(|(c, p)| LabeledExample::from_patch(p, *c)).collect()
}

/// Checks labels and a common feature length; returns that length.
pub(crate) fn check_examples(examples: &[LabeledExample]) -> Result<usize, LearnError> {
    let dim = examples.first().map_or(0, |e| e.features.len());
    for e in examples {
        if !e.label.is_placeable() {
            return Err(LearnError::BadLabel);
        }
        if e.features.len() != dim {
            return Err(LearnError::DimensionMismatch { want: dim, got: e.features.len() });
        }
    }
    Ok(dim)
}

/// Distinct labels in canonical class order.
pub(crate) fn classes_of(examples: &[LabeledExample]) -> Vec<SignClass> {
    SignClass::PLACEABLE
        .iter()
        .copied()
        .filter(|c| examples.iter().any(|e| e.label == *c))
        .collect()
}

/// Either trained tier behind one prediction interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Centroid(CentroidModel),
    Svm(LinearSvmModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    classes: Vec<SignClass>,
    vectors: Vec<Vec<f64>>,
    #[serde(default)]
    config: serde_json::Value,
}

impl Classifier {
    /// Predicted class and score: softmax confidence for the centroid tier,
    /// the winning class's decision value (its margin) for the SVM tier.
    pub fn predict(&self, features: &[f64]) -> (SignClass, f64) {
        match self {
            Classifier::Centroid(m) => predict_centroid(m, features),
            Classifier::Svm(m) => predict_svm(m, features),
        }
    }

    pub fn classes(&self) -> &[SignClass] {
        match self {
            Classifier::Centroid(m) => &m.classes,
            Classifier::Svm(m) => &m.classes,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Centroid(_) => "centroid",
            Classifier::Svm(_) => "svm",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = match self {
            Classifier::Centroid(m) => ModelFile {
                kind: "centroid".into(),
                classes: m.classes.clone(),
                vectors: m.centroids.clone(),
                config: serde_json::json!({}),
            },
            Classifier::Svm(m) => ModelFile {
                kind: "svm".into(),
                classes: m.classes.clone(),
                vectors: m.weights.clone(),
                config: serde_json::to_value(m.config).expect("plain struct"),
            },
        };
        serde_json::to_value(file).expect("plain struct")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Classifier, LearnError> {
        let bad = |m: String| LearnError::ModelFile(m);
        let file: ModelFile = serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))?;
        if file.classes.len() != file.vectors.len() {
            return Err(bad("classes and vectors differ in length".into()));
        }
        if file.classes.len() < 2 {
            return Err(LearnError::TooFewClasses(file.classes.len()));
        }
        if file.classes.iter().any(|c| !c.is_placeable()) {
            return Err(LearnError::BadLabel);
        }
        let dim = file.vectors[0].len();
        if let Some(v) = file.vectors.iter().find(|v| v.len() != dim) {
            return Err(LearnError::DimensionMismatch { want: dim, got: v.len() });
        }
        match file.kind.as_str() {
            "centroid" => Ok(Classifier::Centroid(CentroidModel {
                classes: file.classes,
                centroids: file.vectors,
            })),
            "svm" => {
                let config: SvmConfig = serde_json::from_value(file.config).map_err(|e| bad(format!("svm config: {e}")))?;
                Ok(Classifier::Svm(LinearSvmModel {
                    classes: file.classes,
                    weights: file.vectors,
                    config,
                }))
            }
            other => Err(bad(format!("unknown kind {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("json value");
        std::fs::write(path, text + "\n").map_err(|e| LearnError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Classifier, LearnError> {
        let bytes = std::fs::read(path).map_err(|e| LearnError::ModelFile(format!("{}: {e}", path.display())))?;
        let v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| LearnError::ModelFile(format!("{}: {e}", path.display())))?;
        Classifier::from_json(&v)
    }
}
