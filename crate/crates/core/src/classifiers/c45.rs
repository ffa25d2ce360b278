//! C4.5 decision tree and rule list.
//!
//! The tree is grown with binary gain-ratio splits on continuous features and
//! pruned bottom-up by replacing a subtree with a leaf whenever the leaf's
//! pessimistic error is no worse than the subtree's. Every root-to-leaf path becomes a prototype rule; each rule is simplified
//! by hill-climbing over dropped conditions, guided by the pessimistic error
//! rate (upper binomial confidence limit at `cf`). Rules are ordered by
//! ascending pessimistic error, a default class is chosen from the training
//! cases no rule covers, and rules whose removal does not raise the training
//! error are discarded.
//!
//! Splits are invariant to monotone rescaling, so the tree works on raw
//! feature values and rule thresholds read in engineering units.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, Classify, LabeledSet, Standardization};
use crate::data::Label;
use crate::stats::binomial_upper_bound;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C45Params {
    pub min_leaf: usize,
    pub cf: f64,
}

impl Default for C45Params {
    fn default() -> Self {
        C45Params { min_leaf: 2, cf: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: Label,
        cases: usize,
        errors: usize,
    },
    /// Cases with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

/// `x[feature] > threshold` when `above`, else `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub threshold: f64,
    pub above: bool,
}

impl Condition {
    pub fn matches(&self, x: &[f64]) -> bool {
        if self.above {
            x[self.feature] > self.threshold
        } else {
            x[self.feature] <= self.threshold
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub label: Label,
    /// Training cases matched by the conditions.
    pub covered: usize,
    /// Covered cases of another class.
    pub errors: usize,
    pub pessimistic_error: f64,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.matches(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C45Model {
    pub tree: Node,
    pub rules: Vec<Rule>,
    pub default_class: Label,
    pub n_features: usize,
    /// Always the identity: rules use raw values.
    pub standardization: Standardization,
}

/// `t[c] = c * log2(c)` for every count up to the training size, so that
/// `n * H(p, q) = t[n] - t[p] - t[q]`.
fn xlogx_table(n: usize) -> Vec<f64> {
    (0..=n).map(|c| if c == 0 { 0.0 } else { c as f64 * libm::log2(c as f64) }).collect()
}

fn majority(normal: usize, anomalous: usize) -> Label {
    if anomalous > normal {
        Label::Anomalous
    } else {
        Label::Normal
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    ratio: f64,
}

/// `sorted[f]` holds the node's cases ordered by feature `f`.
fn best_split(data: &LabeledSet, sorted: &[Vec<usize>], min_leaf: usize, t: &[f64]) -> Option<SplitChoice> {
    let x = data.x();
    let y = data.y();
    let n = sorted[0].len();
    let total_anom = sorted[0].iter().filter(|&&i| y[i].is_anomalous()).count();
    let nf = n as f64;
    let parent = (t[n] - t[total_anom] - t[n - total_anom]) / nf;
    // (feature, threshold, gain, ratio)
    let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut runs: Vec<(f64, usize, usize)> = Vec::new();
    for (f, order) in sorted.iter().enumerate() {
        // Runs of equal values with their class mix.
        runs.clear();
        for &i in order {
            let v = x[i][f];
            let anom = usize::from(y[i].is_anomalous());
            match runs.last_mut() {
                Some(last) if last.0 == v => {
                    last.1 += 1;
                    last.2 += anom;
                }
                _ => runs.push((v, 1, anom)),
            }
        }
        let mut left_n = 0;
        let mut left_anom = 0;
        for pair in runs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            left_n += a.1;
            left_anom += a.2;
            let pure_same = (a.2 == 0 && b.2 == 0) || (a.2 == a.1 && b.2 == b.1);
            if pure_same {
                continue;
            }
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_anom = total_anom - left_anom;
            let left_info = t[left_n] - t[left_anom] - t[left_n - left_anom];
            let right_info = t[right_n] - t[right_anom] - t[right_n - right_anom];
            let gain = parent - (left_info + right_info) / nf;
            if gain <= 1e-12 {
                continue;
            }
            let split_info = (t[n] - t[left_n] - t[right_n]) / nf;
            let mut threshold = a.0 + (b.0 - a.0) / 2.0;
            if threshold >= b.0 {
                threshold = a.0;
            }
            candidates.push((f, threshold, gain, gain / split_info));
        }
    }
    if candidates.is_empty() {
        return None;
    }
    // Only splits with at least average gain compete on gain ratio.
    let avg_gain = candidates.iter().map(|c| c.2).sum::<f64>() / candidates.len() as f64;
    let mut best: Option<SplitChoice> = None;
    for &(feature, threshold, gain, ratio) in &candidates {
        if gain + 1e-12 < avg_gain {
            continue;
        }
        if best.as_ref().is_none_or(|b| ratio > b.ratio) {
            best = Some(SplitChoice { feature, threshold, ratio });
        }
    }
    best
}

fn grow(data: &LabeledSet, sorted: Vec<Vec<usize>>, min_leaf: usize, t: &[f64], goes_left: &mut [bool]) -> Node {
    let idx = &sorted[0];
    let anomalous = idx.iter().filter(|&&i| data.y()[i].is_anomalous()).count();
    let normal = idx.len() - anomalous;
    let label = majority(normal, anomalous);
    let errors = if label.is_anomalous() { normal } else { anomalous };
    let leaf = Node::Leaf { label, cases: idx.len(), errors };
    if anomalous == 0 || normal == 0 || idx.len() < 2 * min_leaf {
        return leaf;
    }
    let Some(split) = best_split(data, &sorted, min_leaf, t) else {
        return leaf;
    };
    for &i in idx {
        goes_left[i] = data.x()[i][split.feature] <= split.threshold;
    }
    let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) =
        sorted.into_iter().map(|order| order.into_iter().partition(|&i| goes_left[i])).unzip();
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(data, left, min_leaf, t, goes_left)),
        right: Box::new(grow(data, right, min_leaf, t, goes_left)),
    }
}

/// Pessimistic subtree replacement. Returns the pruned node, its class
/// counts `(normal, anomalous)` and its estimated error count.
fn prune(node: Node, p: &mut Pessimism) -> (Node, usize, usize, f64) {
    match node {
        Node::Leaf { label, cases, errors } => {
            let anomalous = if label.is_anomalous() { cases - errors } else { errors };
            let est = cases as f64 * p.rate(cases, errors);
            (Node::Leaf { label, cases, errors }, cases - anomalous, anomalous, est)
        }
        Node::Split { feature, threshold, left, right } => {
            let (left, ln, la, le) = prune(*left, p);
            let (right, rn, ra, re) = prune(*right, p);
            let (normal, anomalous) = (ln + rn, la + ra);
            let cases = normal + anomalous;
            let label = majority(normal, anomalous);
            let errors = if label.is_anomalous() { normal } else { anomalous };
            let leaf_est = cases as f64 * p.rate(cases, errors);
            if leaf_est <= le + re {
                (Node::Leaf { label, cases, errors }, normal, anomalous, leaf_est)
            } else {
                let node = Node::Split { feature, threshold, left: Box::new(left), right: Box::new(right) };
                (node, normal, anomalous, le + re)
            }
        }
    }
}

fn collect_paths(node: &Node, path: &mut Vec<Condition>, out: &mut Vec<(Vec<Condition>, Label)>) {
    match node {
        Node::Leaf { label, .. } => out.push((path.clone(), *label)),
        Node::Split { feature, threshold, left, right } => {
            path.push(Condition { feature: *feature, threshold: *threshold, above: false });
            collect_paths(left, path, out);
            path.pop();
            path.push(Condition { feature: *feature, threshold: *threshold, above: true });
            collect_paths(right, path, out);
            path.pop();
        }
    }
}

fn coverage(conditions: &[Condition], label: Label, data: &LabeledSet) -> (usize, usize) {
    let mut covered = 0;
    let mut errors = 0;
    for (x, y) in data.x().iter().zip(data.y()) {
        if conditions.iter().all(|c| c.matches(x)) {
            covered += 1;
            if *y != label {
                errors += 1;
            }
        }
    }
    (covered, errors)
}

/// Memoized upper confidence limits on a node's error rate.
struct Pessimism {
    cf: f64,
    cache: BTreeMap<(usize, usize), f64>,
}

impl Pessimism {
    fn new(cf: f64) -> Self {
        Pessimism { cf, cache: BTreeMap::new() }
    }

    fn rate(&mut self, covered: usize, errors: usize) -> f64 {
        if covered == 0 {
            return 1.0;
        }
        let cf = self.cf;
        *self
            .cache
            .entry((covered, errors))
            .or_insert_with(|| binomial_upper_bound(errors as u64, covered as u64, cf))
    }
}

fn make_rule(conditions: Vec<Condition>, label: Label, data: &LabeledSet, p: &mut Pessimism) -> Rule {
    let (covered, errors) = coverage(&conditions, label, data);
    Rule { conditions, label, covered, errors, pessimistic_error: p.rate(covered, errors) }
}

/// Greedily drops the condition whose removal lowers the pessimistic error
/// the most, until no removal lowers it.
fn simplify(mut rule: Rule, data: &LabeledSet, p: &mut Pessimism) -> Rule {
    let n = data.len();
    let mut fails = vec![0usize; n];
    let mut failed_on = vec![0usize; n];
    while !rule.conditions.is_empty() {
        // A case covered once condition j is dropped fails at most on j.
        fails.iter_mut().for_each(|f| *f = 0);
        for (j, c) in rule.conditions.iter().enumerate() {
            for (i, x) in data.x().iter().enumerate() {
                if !c.matches(x) {
                    fails[i] += 1;
                    failed_on[i] = j;
                }
            }
        }
        let k = rule.conditions.len();
        let (mut base_cov, mut base_err) = (0, 0);
        let mut cov = vec![0usize; k];
        let mut err = vec![0usize; k];
        for i in 0..n {
            let wrong = usize::from(data.y()[i] != rule.label);
            match fails[i] {
                0 => {
                    base_cov += 1;
                    base_err += wrong;
                }
                1 => {
                    cov[failed_on[i]] += 1;
                    err[failed_on[i]] += wrong;
                }
                _ => {}
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            let pe = p.rate(base_cov + cov[j], base_err + err[j]);
            if best.is_none_or(|(_, b)| pe < b) {
                best = Some((j, pe));
            }
        }
        match best {
            Some((j, pe)) if pe < rule.pessimistic_error => {
                rule.conditions.remove(j);
                rule.covered = base_cov + cov[j];
                rule.errors = base_err + err[j];
                rule.pessimistic_error = pe;
            }
            _ => break,
        }
    }
    rule
}

fn classify_with(rules: &[Rule], default_class: Label, x: &[f64]) -> Label {
    rules.iter().find(|r| r.matches(x)).map_or(default_class, |r| r.label)
}

/// Training errors of the rule list restricted to `active`, from precomputed
/// per-rule coverage.
fn training_errors(active: &[usize], rules: &[Rule], covers: &[Vec<bool>], default_class: Label, data: &LabeledSet) -> usize {
    data.y()
        .iter()
        .enumerate()
        .filter(|&(i, y)| {
            let label = active.iter().find(|&&r| covers[r][i]).map_or(default_class, |&r| rules[r].label);
            label != *y
        })
        .count()
}

pub fn c45_train(data: &LabeledSet, min_leaf: usize, cf: f64) -> Result<C45Model> {
    if min_leaf == 0 {
        return Err(Error::Argument("min_leaf must be at least 1".into()));
    }
    if !(cf > 0.0 && cf < 1.0) {
        return Err(Error::Argument(format!("confidence factor must lie in (0, 1), got {cf}")));
    }
    data.require_both_classes()?;
    let x = data.x();
    let sorted: Vec<Vec<usize>> = (0..data.n_features())
        .map(|f| {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            order
        })
        .collect();
    let mut pessimism = Pessimism::new(cf);
    let tree = prune(grow(data, sorted, min_leaf, &xlogx_table(data.len()), &mut vec![false; data.len()]), &mut pessimism).0;

    let mut paths = Vec::new();
    collect_paths(&tree, &mut Vec::new(), &mut paths);
    let mut rules: Vec<Rule> = Vec::new();
    for (conds, label) in paths {
        let rule = simplify(make_rule(conds, label, data, &mut pessimism), data, &mut pessimism);
        if !rules.iter().any(|r| r.label == rule.label && r.conditions == rule.conditions) {
            rules.push(rule);
        }
    }
    rules.sort_by(|a, b| a.pessimistic_error.total_cmp(&b.pessimistic_error));

    let (mut unc_normal, mut unc_anom) = (0, 0);
    for (x, y) in data.x().iter().zip(data.y()) {
        if !rules.iter().any(|r| r.matches(x)) {
            if y.is_anomalous() {
                unc_anom += 1;
            } else {
                unc_normal += 1;
            }
        }
    }
    let default_class = if unc_normal + unc_anom > 0 {
        majority(unc_normal, unc_anom)
    } else {
        let anom = data.y().iter().filter(|l| l.is_anomalous()).count();
        majority(data.len() - anom, anom)
    };

    let covers: Vec<Vec<bool>> =
        rules.iter().map(|r| data.x().iter().map(|x| r.matches(x)).collect()).collect();
    let mut active: Vec<usize> = (0..rules.len()).collect();
    let mut errors = training_errors(&active, &rules, &covers, default_class, data);
    loop {
        let mut changed = false;
        let mut i = active.len();
        while i > 0 {
            i -= 1;
            let mut trial = active.clone();
            trial.remove(i);
            let e = training_errors(&trial, &rules, &covers, default_class, data);
            if e <= errors {
                active = trial;
                errors = e;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let rules: Vec<Rule> = active.into_iter().map(|r| rules[r].clone()).collect();

    let n_features = data.n_features();
    Ok(C45Model { tree, rules, default_class, n_features, standardization: Standardization::identity(n_features) })
}

/// Label of the first matching rule, or the default class.
pub fn c45_predict(model: &C45Model, x: &[f64]) -> Result<Label> {
    check_dims(model.n_features, x)?;
    Ok(classify_with(&model.rules, model.default_class, x))
}

impl Classify for C45Model {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        c45_predict(self, x)
    }
}
