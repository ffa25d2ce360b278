//! Wrapper feature selection scored by stratified cross-validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train, ClassifierKind, ClassifierParams, Classify, LabeledSet};
use crate::{rng, Error, Result};

/// Exhaustive search is used up to this many features.
pub const EXHAUSTIVE_LIMIT: usize = 12;
/// Fitness penalty per selected feature.
pub const PARSIMONY: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub indices: BTreeSet<usize>,
    /// Cross-validated accuracy of the evaluator on these features.
    pub score: f64,
}

impl FeatureSubset {
    pub fn names(&self, schema: &[alloc::string::String]) -> Vec<alloc::string::String> {
        self.indices.iter().filter_map(|&i| schema.get(i).cloned()).collect()
    }
}

/// Classifier and cross-validation setup used to score subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Evaluator {
    pub kind: ClassifierKind,
    pub params: ClassifierParams,
    pub folds: usize,
    pub seed: u64,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator { kind: ClassifierKind::C45, params: ClassifierParams::default(), folds: 5, seed: 0 }
    }
}

impl Evaluator {
    pub fn new(kind: ClassifierKind) -> Self {
        Evaluator { kind, ..Evaluator::default() }
    }
}

/// Fold index of every row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(data: &LabeledSet, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > data.len() {
        return Err(Error::Argument(format!("fold count must lie in [2, {}], got {folds}", data.len())));
    }
    let mut rng = rng::rng(seed);
    let mut assignment = vec![0; data.len()];
    let mut next = 0;
    for anomalous in [false, true] {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.y()[i].is_anomalous() == anomalous).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

struct CrossValidator<'a> {
    data: &'a LabeledSet,
    evaluator: &'a Evaluator,
    assignment: Vec<usize>,
    cache: BTreeMap<Vec<usize>, f64>,
}

impl<'a> CrossValidator<'a> {
    fn new(data: &'a LabeledSet, evaluator: &'a Evaluator) -> Result<Self> {
        if data.n_features() == 0 {
            return Err(Error::Argument("data has no features".into()));
        }
        data.require_both_classes()?;
        let assignment = stratified_folds(data, evaluator.folds, evaluator.seed)?;
        Ok(CrossValidator { data, evaluator, assignment, cache: BTreeMap::new() })
    }

    fn accuracy(&mut self, features: &[usize]) -> Result<f64> {
        if let Some(&acc) = self.cache.get(features) {
            return Ok(acc);
        }
        let projected = self.data.project(features)?;
        let mut correct = 0;
        for fold in 0..self.evaluator.folds {
            let (test, fit): (Vec<usize>, Vec<usize>) = (0..projected.len()).partition(|&i| self.assignment[i] == fold);
            let model = train(self.evaluator.kind, &projected.subset(&fit)?, &self.evaluator.params)?;
            for &i in &test {
                if model.predict(&projected.x()[i])? == projected.y()[i] {
                    correct += 1;
                }
            }
        }
        let acc = correct as f64 / projected.len() as f64;
        self.cache.insert(features.to_vec(), acc);
        Ok(acc)
    }
}

/// Cross-validated accuracy of the evaluator restricted to `features`.
pub fn cv_accuracy(data: &LabeledSet, features: &[usize], evaluator: &Evaluator) -> Result<f64> {
    CrossValidator::new(data, evaluator)?.accuracy(features)
}

/// Forward selection: add the feature with the best cross-validated accuracy
/// until nothing improves or `max_features` is reached. Ties go to the
/// lowest index.
pub fn greedy_select(data: &LabeledSet, evaluator: &Evaluator, max_features: usize) -> Result<FeatureSubset> {
    if max_features == 0 {
        return Err(Error::Argument("max_features must be positive".into()));
    }
    let mut cv = CrossValidator::new(data, evaluator)?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    while chosen.len() < max_features.min(data.n_features()) {
        let mut step: Option<(usize, f64)> = None;
        for f in 0..data.n_features() {
            if chosen.contains(&f) {
                continue;
            }
            let mut candidate = chosen.clone();
            candidate.push(f);
            candidate.sort_unstable();
            let acc = cv.accuracy(&candidate)?;
            if step.is_none_or(|(_, a)| acc > a) {
                step = Some((f, acc));
            }
        }
        match step {
            Some((f, acc)) if acc > best => {
                chosen.push(f);
                chosen.sort_unstable();
                best = acc;
            }
            _ => break,
        }
    }
    Ok(FeatureSubset { indices: chosen.into_iter().collect(), score: best })
}

/// Best subset over all non-empty subsets; ties prefer fewer features, then
/// the subset enumerated first.
pub fn exhaustive_select(data: &LabeledSet, evaluator: &Evaluator) -> Result<FeatureSubset> {
    let n = data.n_features();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Argument(format!("exhaustive search limited to {EXHAUSTIVE_LIMIT} features, got {n}")));
    }
    let mut cv = CrossValidator::new(data, evaluator)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let features: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let acc = cv.accuracy(&features)?;
        let better = match &best {
            None => true,
            Some((f, a)) => acc > *a || (acc == *a && features.len() < f.len()),
        };
        if better {
            best = Some((features, acc));
        }
    }
    let (features, score) = best.expect("n >= 1");
    Ok(FeatureSubset { indices: features.into_iter().collect(), score })
}

/// Exhaustive search for small schemas, greedy forward selection otherwise.
pub fn search_select(data: &LabeledSet, evaluator: &Evaluator) -> Result<FeatureSubset> {
    if data.n_features() <= EXHAUSTIVE_LIMIT {
        exhaustive_select(data, evaluator)
    } else {
        greedy_select(data, evaluator, data.n_features())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { population: 30, generations: 40, crossover_rate: 0.9, mutation_rate: 0.05, seed: 0 }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Argument(format!("population must be at least 2, got {}", self.population)));
        }
        for (name, rate) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Argument(format!("{name} rate must lie in [0, 1], got {rate}")));
            }
        }
        Ok(())
    }
}

/// Result of a genetic search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: FeatureSubset,
    pub fitness: f64,
    /// Best-ever fitness after the initial population and after each generation.
    pub history: Vec<f64>,
}

pub fn fitness(accuracy: f64, size: usize) -> f64 {
    accuracy - PARSIMONY * size as f64
}

fn features_of(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Genetic search over feature bitmasks.
pub fn genetic_select(data: &LabeledSet, evaluator: &Evaluator, config: &GaConfig) -> Result<FeatureSubset> {
    Ok(genetic_search(data, evaluator, config, &[])?.best)
}

/// Genetic search whose initial population starts with `seeds` (bitmasks of
/// schema length) and is filled with random chromosomes.
///
/// Tournament selection of size three, uniform crossover, per-bit mutation
/// and one elite per generation. Empty chromosomes are repaired by setting a
/// random bit.
pub fn genetic_search(
    data: &LabeledSet,
    evaluator: &Evaluator,
    config: &GaConfig,
    seeds: &[Vec<bool>],
) -> Result<GaOutcome> {
    config.validate()?;
    let n = data.n_features();
    if let Some(bad) = seeds.iter().find(|s| s.len() != n || !s.iter().any(|&b| b)) {
        return Err(Error::Argument(format!("seed chromosome {bad:?} must be a non-empty mask of {n} bits")));
    }
    let mut cv = CrossValidator::new(data, evaluator)?;
    let mut rng = rng::rng(config.seed);
    let repair = |mask: &mut Vec<bool>, rng: &mut rand_chacha::ChaCha8Rng| {
        if !mask.iter().any(|&b| b) {
            let i = rng.random_range(0..n);
            mask[i] = true;
        }
    };

    let mut population: Vec<Vec<bool>> = seeds.iter().take(config.population).cloned().collect();
    while population.len() < config.population {
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        repair(&mut mask, &mut rng);
        population.push(mask);
    }

    let score = |mask: &[bool], cv: &mut CrossValidator<'_>| -> Result<(f64, f64)> {
        let f = features_of(mask);
        let acc = cv.accuracy(&f)?;
        Ok((fitness(acc, f.len()), acc))
    };

    let mut scored: Vec<(f64, f64)> = population.iter().map(|m| score(m, &mut cv)).collect::<Result<_>>()?;
    let mut best = (population[0].clone(), scored[0]);
    let consider = |pop: &[Vec<bool>], scored: &[(f64, f64)], best: &mut (Vec<bool>, (f64, f64))| {
        for (m, s) in pop.iter().zip(scored) {
            if s.0 > best.1 .0 {
                *best = (m.clone(), *s);
            }
        }
    };
    consider(&population, &scored, &mut best);
    let mut history = vec![best.1 .0];

    for _ in 0..config.generations {
        let tournament = |rng: &mut rand_chacha::ChaCha8Rng, scored: &[(f64, f64)]| -> usize {
            let mut winner = rng.random_range(0..scored.len());
            for _ in 1..3 {
                let c = rng.random_range(0..scored.len());
                if scored[c].0 > scored[winner].0 || (scored[c].0 == scored[winner].0 && c < winner) {
                    winner = c;
                }
            }
            winner
        };
        let mut next = vec![best.0.clone()];
        while next.len() < config.population {
            let a = &population[tournament(&mut rng, &scored)];
            let b = &population[tournament(&mut rng, &scored)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if rng.random_bool(config.crossover_rate) {
                for i in 0..n {
                    if rng.random_bool(0.5) {
                        core::mem::swap(&mut c1[i], &mut c2[i]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for bit in child.iter_mut() {
                    if rng.random_bool(config.mutation_rate) {
                        *bit = !*bit;
                    }
                }
                repair(child, &mut rng);
            }
            next.push(c1);
            if next.len() < config.population {
                next.push(c2);
            }
        }
        population = next;
        scored = population.iter().map(|m| score(m, &mut cv)).collect::<Result<_>>()?;
        consider(&population, &scored, &mut best);
        history.push(best.1 .0);
    }

    let (mask, (fit, acc)) = best;
    Ok(GaOutcome {
        best: FeatureSubset { indices: features_of(&mask).into_iter().collect(), score: acc },
        fitness: fit,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    fn separable(noise_features: usize) -> LabeledSet {
        let mut rng = rng::rng(4);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let anomalous = i % 4 == 0;
            let mut row = vec![if anomalous { 10.0 + rng.random::<f64>() } else { rng.random::<f64>() }];
            for _ in 0..noise_features {
                row.push(rng.random::<f64>());
            }
            x.push(row);
            y.push(if anomalous { Label::Anomalous } else { Label::Normal });
        }
        LabeledSet::new(x, y).unwrap()
    }

    #[test]
    fn folds_are_stratified() {
        let data = separable(0);
        let folds = stratified_folds(&data, 5, 1).unwrap();
        for f in 0..5 {
            let members: Vec<usize> = (0..60).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 12);
            assert_eq!(members.iter().filter(|&&i| data.y()[i].is_anomalous()).count(), 3);
        }
        assert!(stratified_folds(&data, 1, 0).is_err());
    }

    #[test]
    fn greedy_keeps_separating_feature() {
        let data = separable(1);
        let s = greedy_select(&data, &Evaluator::default(), 2).unwrap();
        assert_eq!(s.indices, [0].into_iter().collect());
        assert_eq!(s.score, 1.0);
        assert_eq!(exhaustive_select(&data, &Evaluator::default()).unwrap().indices, s.indices);
    }

    #[test]
    fn identical_copies_tie_to_lowest() {
        let base = separable(0);
        let x: Vec<Vec<f64>> = base.x().iter().map(|r| vec![r[0]; 3]).collect();
        let data = LabeledSet::new(x, base.y().to_vec()).unwrap();
        let s = greedy_select(&data, &Evaluator::default(), 3).unwrap();
        assert_eq!(s.indices, [0].into_iter().collect());
    }

    #[test]
    fn identity_ga_returns_seeded_mask() {
        let data = separable(3);
        let config = GaConfig { population: 6, generations: 5, crossover_rate: 0.0, mutation_rate: 0.0, seed: 2 };
        let out = genetic_search(&data, &Evaluator::default(), &config, &[vec![true, false, false, false]]).unwrap();
        assert_eq!(out.best.indices, [0].into_iter().collect());
        assert!(out.history.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ga_is_deterministic_and_validated() {
        let data = separable(4);
        let config = GaConfig { population: 8, generations: 6, ..GaConfig::default() };
        let a = genetic_select(&data, &Evaluator::default(), &config).unwrap();
        let b = genetic_select(&data, &Evaluator::default(), &config).unwrap();
        assert_eq!(a, b);
        let bad = GaConfig { population: 0, ..GaConfig::default() };
        assert!(matches!(genetic_select(&data, &Evaluator::default(), &bad), Err(Error::Argument(_))));
        let bad = GaConfig { mutation_rate: 1.5, ..GaConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_class_rejected() {
        let data = LabeledSet::new(vec![vec![0.0]; 10], vec![Label::Normal; 10]).unwrap();
        assert!(matches!(greedy_select(&data, &Evaluator::default(), 1), Err(Error::DegenerateData(_))));
    }
}
