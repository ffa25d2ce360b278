//! Binary classifiers over labeled feature vectors: a linear soft-margin SVM,
//! k-nearest-neighbors and a C4.5 decision tree turned into an ordered rule
//! list. All three share the [`Classify`] contract and the `+1` / `-1` label
//! convention.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DataTrace, Label};
use crate::{Error, Result};

pub mod c45;
pub mod knn;
pub mod svm;

pub use c45::{c45_predict, c45_train, C45Model, C45Params, Condition, Node, Rule};
pub use knn::{knn_predict, knn_train, KnnModel, KnnParams, Metric};
pub use svm::{svm_objective, svm_predict, svm_train, SvmModel, SvmParams};

/// Feature vectors with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    x: Vec<Vec<f64>>,
    y: Vec<Label>,
    n_features: usize,
}

impl LabeledSet {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Label>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Argument("labeled set must hold at least one vector".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Argument(format!("{} vectors but {} labels", x.len(), y.len())));
        }
        let n_features = x[0].len();
        if n_features == 0 {
            return Err(Error::Argument("vectors must have at least one feature".into()));
        }
        if let Some(i) = x.iter().position(|v| v.len() != n_features) {
            return Err(Error::Argument(format!("vector {i} has dimension {}, expected {n_features}", x[i].len())));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("feature values must be finite".into()));
        }
        Ok(LabeledSet { x, y, n_features })
    }

    /// Vectorizes `features` (in the given order) of every row; rows without a
    /// label are rejected.
    pub fn from_trace(trace: &DataTrace, features: &[String]) -> Result<Self> {
        let mut x = Vec::with_capacity(trace.len());
        let mut y = Vec::with_capacity(trace.len());
        for (i, row) in trace.rows().iter().enumerate() {
            let label = row
                .label
                .ok_or_else(|| Error::Argument(format!("row {} is unlabeled", i + 1)))?;
            x.push(row.vector(features)?);
            y.push(label);
        }
        Self::new(x, y)
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Label] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn has_both_classes(&self) -> bool {
        self.y.iter().any(|l| l.is_anomalous()) && self.y.iter().any(|l| !l.is_anomalous())
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::DegenerateData("training data holds a single class".into()))
        }
    }

    /// Rows `indices`, all features.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledSet> {
        let x = indices.iter().map(|&i| self.x[i].clone()).collect();
        let y = indices.iter().map(|&i| self.y[i]).collect();
        LabeledSet::new(x, y)
    }

    /// All rows, restricted to feature positions `features`.
    pub fn project(&self, features: &[usize]) -> Result<LabeledSet> {
        if let Some(&bad) = features.iter().find(|&&f| f >= self.n_features) {
            return Err(Error::Argument(format!("feature index {bad} out of range")));
        }
        let x = self.x.iter().map(|v| features.iter().map(|&f| v[f]).collect()).collect();
        LabeledSet::new(x, self.y.clone())
    }
}

/// Per-feature z-scoring. Constant features keep a unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let dims = x.first().map_or(0, Vec::len);
        let mut mean = alloc::vec![0.0; dims];
        for v in x {
            for (m, xi) in mean.iter_mut().zip(v) {
                *m += xi;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = alloc::vec![0.0; dims];
        for v in x {
            for ((s, m), xi) in std.iter_mut().zip(&mean).zip(v) {
                *s += (xi - m) * (xi - m);
            }
        }
        for s in &mut std {
            let sd = libm::sqrt(*s / n);
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Standardization { mean, std }
    }

    pub fn identity(dims: usize) -> Self {
        Standardization { mean: alloc::vec![0.0; dims], std: alloc::vec![1.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

pub(crate) fn check_dims(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::Argument(format!("expected a {expected}-dimensional vector, got {}", x.len())))
    }
}

/// Shared prediction contract.
pub trait Classify {
    fn n_features(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<Label>;

    /// Fraction of `data` predicted correctly.
    fn accuracy(&self, data: &LabeledSet) -> Result<f64> {
        let mut hits = 0usize;
        for (x, y) in data.x().iter().zip(data.y()) {
            if self.predict(x)? == *y {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Knn,
    C45,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Svm, ClassifierKind::Knn, ClassifierKind::C45];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
            ClassifierKind::C45 => "c45",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            "c45" | "c4.5" => Ok(ClassifierKind::C45),
            other => Err(Error::Argument(format!("unknown classifier `{other}`"))),
        }
    }
}

/// Hyperparameters of all three classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub svm: SvmParams,
    pub knn: KnnParams,
    pub c45: C45Params,
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum Classifier {
    Svm(SvmModel),
    Knn(KnnModel),
    C45(C45Model),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Svm(_) => ClassifierKind::Svm,
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::C45(_) => ClassifierKind::C45,
        }
    }
}

impl Classify for Classifier {
    fn n_features(&self) -> usize {
        match self {
            Classifier::Svm(m) => m.n_features(),
            Classifier::Knn(m) => m.n_features(),
            Classifier::C45(m) => m.n_features(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            Classifier::Svm(m) => m.predict(x),
            Classifier::Knn(m) => m.predict(x),
            Classifier::C45(m) => m.predict(x),
        }
    }
}

pub fn train(kind: ClassifierKind, data: &LabeledSet, params: &ClassifierParams) -> Result<Classifier> {
    Ok(match kind {
        ClassifierKind::Svm => {
            let p = params.svm;
            Classifier::Svm(svm_train(data, p.c_param, p.epochs, p.seed)?)
        }
        ClassifierKind::Knn => Classifier::Knn(knn_train(data, params.knn.k, params.knn.metric)?),
        ClassifierKind::C45 => {
            let p = params.c45;
            Classifier::C45(c45_train(data, p.min_leaf, p.cf)?)
        }
    })
}
