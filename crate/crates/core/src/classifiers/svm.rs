//! Linear soft-margin SVM trained by stochastic subgradient descent.
//!
//! Minimizes `||w||^2 / 2 + C * sum_i hinge(y_i (w . x_i + b))` on
//! standardized inputs. Dividing by `C * l` gives the equivalent
//! `lambda / 2 ||w||^2 + mean hinge` with `lambda = 1 / (C * l)`, which is
//! optimized with step `1 / (lambda * t)`. The bias is carried as the weight
//! of a constant input. The iterate with the lowest objective at an epoch
//! boundary is returned, so the result never scores worse than `w = 0`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dims, Classify, LabeledSet, Standardization};
use crate::data::Label;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c_param: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c_param: 1.0, epochs: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_param: f64,
    pub standardization: Standardization,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hinge_sum(weights: &[f64], bias: f64, z: &[Vec<f64>], y: &[f64]) -> f64 {
    z.iter()
        .zip(y)
        .map(|(x, &yi)| (1.0 - yi * (dot(weights, x) + bias)).max(0.0))
        .sum()
}

/// Primal objective on standardized inputs.
pub fn svm_objective(model: &SvmModel, data: &LabeledSet) -> f64 {
    let z: Vec<Vec<f64>> = data.x().iter().map(|x| model.standardization.apply(x)).collect();
    let y: Vec<f64> = data.y().iter().map(|l| l.as_f64()).collect();
    0.5 * dot(&model.weights, &model.weights) + model.c_param * hinge_sum(&model.weights, model.bias, &z, &y)
}

pub fn svm_train(data: &LabeledSet, c_param: f64, epochs: usize, seed: u64) -> Result<SvmModel> {
    if !(c_param > 0.0) || !c_param.is_finite() {
        return Err(Error::Argument(alloc::format!("C must be positive, got {c_param}")));
    }
    data.require_both_classes()?;
    let standardization = Standardization::fit(data.x());
    let z: Vec<Vec<f64>> = data.x().iter().map(|x| standardization.apply(x)).collect();
    let y: Vec<f64> = data.y().iter().map(|l| l.as_f64()).collect();
    let n = data.n_features();
    let l = data.len();
    let lambda = 1.0 / (c_param * l as f64);

    let objective = |w: &[f64], b: f64| 0.5 * dot(w, w) + c_param * hinge_sum(w, b, &z, &y);

    let mut w = vec![0.0; n];
    let mut b = 0.0;
    let mut best = (w.clone(), b, objective(&w, b));
    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = rng::rng(seed);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = y[i] * (dot(&w, &z[i]) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|wi| *wi *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wi, xi) in w.iter_mut().zip(&z[i]) {
                    *wi += eta * y[i] * xi;
                }
                b += eta * y[i];
            }
        }
        let obj = objective(&w, b);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    let (weights, bias, _) = best;
    Ok(SvmModel { weights, bias, c_param, standardization })
}

/// `+1` when `w . z + b >= 0` on the standardized input, else `-1`.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<Label> {
    check_dims(model.weights.len(), x)?;
    let z = model.standardization.apply(x);
    Ok(if dot(&model.weights, &z) + model.bias >= 0.0 { Label::Normal } else { Label::Anomalous })
}

impl Classify for SvmModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        svm_predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(weights: Vec<f64>, bias: f64) -> SvmModel {
        let n = weights.len();
        SvmModel { weights, bias, c_param: 1.0, standardization: Standardization::identity(n) }
    }

    #[test]
    fn sign_rule() {
        let m = raw(vec![1.0, 0.0], 0.0);
        assert_eq!(svm_predict(&m, &[3.0, 7.0]).unwrap(), Label::Normal);
        assert_eq!(svm_predict(&m, &[-3.0, 7.0]).unwrap(), Label::Anomalous);
        let zero = raw(vec![0.0, 0.0], 0.0);
        assert_eq!(svm_predict(&zero, &[-5.0, 9.0]).unwrap(), Label::Normal);
        assert!(matches!(svm_predict(&m, &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn symmetric_pair() {
        let data = LabeledSet::new(vec![vec![-1.0], vec![1.0]], vec![Label::Anomalous, Label::Normal]).unwrap();
        let m = svm_train(&data, 1.0, 50, 3).unwrap();
        assert_eq!(svm_predict(&m, &[-1.0]).unwrap(), Label::Anomalous);
        assert_eq!(svm_predict(&m, &[1.0]).unwrap(), Label::Normal);
    }

    #[test]
    fn single_class_rejected() {
        let data = LabeledSet::new(vec![vec![0.0], vec![1.0]], vec![Label::Normal; 2]).unwrap();
        assert!(matches!(svm_train(&data, 1.0, 10, 0), Err(Error::DegenerateData(_))));
        let both = LabeledSet::new(vec![vec![0.0], vec![1.0]], vec![Label::Normal, Label::Anomalous]).unwrap();
        assert!(matches!(svm_train(&both, 0.0, 10, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn objective_never_above_start() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        let y = vec![Label::Normal, Label::Normal, Label::Anomalous, Label::Anomalous];
        let data = LabeledSet::new(x, y).unwrap();
        for seed in 0..5 {
            let m = svm_train(&data, 10.0, 20, seed).unwrap();
            assert!(svm_objective(&m, &data) <= 10.0 * 4.0);
        }
    }
}
