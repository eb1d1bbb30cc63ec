use super::{check_examples, classes_of, LabeledExample, LearnError};
use crate::world::SignClass;

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    pub classes: Vec<SignClass>,
    pub centroids: Vec<Vec<f64>>,
}

pub fn train_centroid(examples: &[LabeledExample]) -> Result<CentroidModel, LearnError> {
    check_examples(examples)?;
    train_centroid_with_classes(examples, &classes_of(examples))
}

/// Trains exactly the listed classes, in the listed order.
pub fn train_centroid_with_classes(examples: &[LabeledExample], classes: &[SignClass]) -> Result<CentroidModel, LearnError> {
    let dim = check_examples(examples)?;
    if classes.len() < 2 {
        return Err(LearnError::TooFewClasses(classes.len()));
    }
    let mut centroids = Vec::with_capacity(classes.len());
    for &class in classes {
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        for e in examples.iter().filter(|e| e.label == class) {
            sum.iter_mut().zip(&e.features).for_each(|(s, v)| *s += v);
            n += 1;
        }
        if n == 0 {
            return Err(LearnError::EmptyClass(class));
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        centroids.push(sum);
    }
    Ok(CentroidModel {
        classes: classes.to_vec(),
        centroids,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest centroid (ties to the earlier class) with softmax(−distance)
/// confidence.
pub fn predict_centroid(model: &CentroidModel, f: &[f64]) -> (SignClass, f64) {
    let d: Vec<f64> = model.centroids.iter().map(|c| distance(c, f)).collect();
    let mut best = 0;
    for (i, &di) in d.iter().enumerate() {
        if di < d[best] {
            best = i;
        }
    }
    let denom: f64 = d.iter().map(|&di| (d[best] - di).exp()).sum();
    (model.classes[best], 1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(f: &[f64], label: SignClass) -> LabeledExample {
        LabeledExample { features: f.to_vec(), label }
    }

    #[test]
    fn one_example_per_class() {
        let data = vec![ex(&[1.0, 2.0], SignClass::Yield), ex(&[3.0, 4.0], SignClass::Stop)];
        let m = train_centroid(&data).unwrap();
        assert_eq!(m.classes, vec![SignClass::Stop, SignClass::Yield]);
        assert_eq!(m.centroids, vec![vec![3.0, 4.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn duplicate_examples() {
        let data = vec![ex(&[1.0, 1.0], SignClass::Stop), ex(&[1.0, 1.0], SignClass::Stop), ex(&[0.0, 0.0], SignClass::NoEntry)];
        assert_eq!(train_centroid(&data).unwrap().centroids[0], vec![1.0, 1.0]);
    }

    #[test]
    fn mean_of_two_points() {
        let data = vec![ex(&[0.0, 0.0, 0.0], SignClass::Stop), ex(&[2.0, 0.0, 0.0], SignClass::Stop), ex(&[5.0, 5.0, 5.0], SignClass::Yield)];
        assert_eq!(train_centroid(&data).unwrap().centroids[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn too_few_and_empty_classes() {
        assert_eq!(train_centroid(&[ex(&[0.0], SignClass::Stop)]).unwrap_err(), LearnError::TooFewClasses(1));
        let err = train_centroid_with_classes(&[ex(&[0.0], SignClass::Stop)], &[SignClass::Stop, SignClass::Yield]).unwrap_err();
        assert_eq!(err, LearnError::EmptyClass(SignClass::Yield));
    }

    #[test]
    fn exact_match_and_tie() {
        let data = vec![ex(&[0.0, 0.0], SignClass::Stop), ex(&[2.0, 0.0], SignClass::Yield), ex(&[0.0, 5.0], SignClass::TurnLeft)];
        let m = train_centroid(&data).unwrap();
        let (c, conf) = predict_centroid(&m, &[2.0, 0.0]);
        assert_eq!(c, SignClass::Yield);
        assert!(conf > 1.0 / 3.0 && conf <= 1.0);

        let two = train_centroid(&data[..2]).unwrap();
        let (c, conf) = predict_centroid(&two, &[1.0, 3.0]);
        assert_eq!(c, SignClass::Stop);
        assert_eq!(conf, 0.5);
    }

    #[test]
    fn confidence_stable_for_large_distances() {
        let data = vec![ex(&[0.0], SignClass::Stop), ex(&[1.0], SignClass::Yield)];
        let m = train_centroid(&data).unwrap();
        let (c, conf) = predict_centroid(&m, &[1e6]);
        assert_eq!(c, SignClass::Yield);
        assert!(conf.is_finite() && conf > 0.5);
    }
}
