//! k-nearest-neighbor classification on z-scored features.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, Classify, LabeledSet, Standardization};
use crate::data::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            // squared distance preserves the ordering
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 1, metric: Metric::Euclidean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    /// Standardized training vectors.
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub k: usize,
    pub metric: Metric,
    pub standardization: Standardization,
}

pub fn knn_train(data: &LabeledSet, k: usize, metric: Metric) -> Result<KnnModel> {
    if k == 0 || k > data.len() {
        return Err(Error::Argument(format!("k must lie in [1, {}], got {k}", data.len())));
    }
    let standardization = Standardization::fit(data.x());
    let points = data.x().iter().map(|x| standardization.apply(x)).collect();
    Ok(KnnModel { points, labels: data.y().to_vec(), k, metric, standardization })
}

/// Majority label among the `k` nearest stored points. Distance ties go to
/// the lower stored index; vote ties go to `+1`.
pub fn knn_predict(model: &KnnModel, x: &[f64]) -> Result<Label> {
    check_dims(model.standardization.dims(), x)?;
    let z = model.standardization.apply(x);
    if model.k == 1 {
        let mut best = (f64::INFINITY, Label::Normal);
        for (p, &label) in model.points.iter().zip(&model.labels) {
            let d = model.metric.distance(p, &z);
            if d < best.0 {
                best = (d, label);
            }
        }
        return Ok(best.1);
    }
    let mut ranked: Vec<(f64, usize)> =
        model.points.iter().enumerate().map(|(i, p)| (model.metric.distance(p, &z), i)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let anomalous = ranked[..model.k].iter().filter(|(_, i)| model.labels[*i].is_anomalous()).count();
    Ok(if 2 * anomalous > model.k { Label::Anomalous } else { Label::Normal })
}

impl Classify for KnnModel {
    fn n_features(&self) -> usize {
        self.standardization.dims()
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        knn_predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn raw_model(points: Vec<Vec<f64>>, labels: Vec<Label>) -> KnnModel {
        let dims = points[0].len();
        KnnModel { points, labels, k: 1, metric: Metric::Euclidean, standardization: Standardization::identity(dims) }
    }

    #[test]
    fn nearest_by_inspection() {
        let m = raw_model(vec![vec![0.0, 0.0], vec![10.0, 10.0]], vec![Label::Normal, Label::Anomalous]);
        assert_eq!(knn_predict(&m, &[1.0, 1.0]).unwrap(), Label::Normal);
        assert_eq!(knn_predict(&m, &[9.0, 8.0]).unwrap(), Label::Anomalous);
    }

    #[test]
    fn equal_distance_goes_to_lowest_index() {
        let m = raw_model(vec![vec![0.0], vec![2.0]], vec![Label::Normal, Label::Anomalous]);
        assert_eq!(knn_predict(&m, &[1.0]).unwrap(), Label::Normal);
        let flipped = raw_model(vec![vec![0.0], vec![2.0]], vec![Label::Anomalous, Label::Normal]);
        assert_eq!(knn_predict(&flipped, &[1.0]).unwrap(), Label::Anomalous);
        let mut manhattan = m.clone();
        manhattan.metric = Metric::Manhattan;
        assert_eq!(knn_predict(&manhattan, &[1.0]).unwrap(), Label::Normal);
    }

    #[test]
    fn training_points_recalled() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<Label> = (0..20).map(|i| if i % 3 == 0 { Label::Anomalous } else { Label::Normal }).collect();
        let data = LabeledSet::new(x, y).unwrap();
        let m = knn_train(&data, 1, Metric::Euclidean).unwrap();
        assert_eq!(m.accuracy(&data).unwrap(), 1.0);
    }

    #[test]
    fn k_bounds_and_dims() {
        let data = LabeledSet::new(vec![vec![0.0], vec![1.0]], vec![Label::Normal, Label::Anomalous]).unwrap();
        assert!(knn_train(&data, 0, Metric::Euclidean).is_err());
        assert!(knn_train(&data, 3, Metric::Euclidean).is_err());
        let m = knn_train(&data, 2, Metric::Euclidean).unwrap();
        // one vote each -> +1
        assert_eq!(knn_predict(&m, &[0.9]).unwrap(), Label::Normal);
        assert!(matches!(knn_predict(&m, &[0.0, 1.0]), Err(Error::Argument(_))));
    }
}
