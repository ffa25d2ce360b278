//! Ground-truth labeling, dual detection and the scenario matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::classifiers::{train, Classifier, ClassifierKind, ClassifierParams, Classify, LabeledSet};
use crate::data::{DataRow, DataTrace, EventTrace, Group, Label, SensitivityDegree};
use crate::iac::{classify_trace, select_feature_events, train_model, IacModel};
use crate::profiler::{count_compromised, ThresholdProfile};
use crate::synth::{Campaign, TracePair};
use crate::{derive_seed, Error, Result};

/// `-1` when at least `s.required_count(|features|)` of `features` exceed
/// their thresholds.
pub fn label_ground_truth(
    row: &DataRow,
    profile: &ThresholdProfile,
    features: &[String],
    s: SensitivityDegree,
) -> Result<Label> {
    let count = count_compromised(row, profile, features)?;
    Ok(if count >= s.required_count(features.len()) { Label::Anomalous } else { Label::Normal })
}

/// Confusion counts with attacks as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth.is_anomalous(), predicted.is_anomalous()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn attacks(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn normals(&self) -> usize {
        self.fp + self.tn
    }

    pub fn total(&self) -> usize {
        self.attacks() + self.normals()
    }
}

/// Detection rates in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub adr: f64,
    pub fpr: f64,
    pub sa: f64,
}

/// ADR = detected / attacks, FPR = false alarms / normals, SA = correct / all.
pub fn metrics(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Metrics> {
    if tp + fn_ == 0 {
        return Err(Error::UndefinedMetric("adr: no attack rows"));
    }
    if fp + tn == 0 {
        return Err(Error::UndefinedMetric("fpr: no normal rows"));
    }
    let pct = |a: usize, b: usize| 100.0 * a as f64 / b as f64;
    Ok(Metrics { adr: pct(tp, tp + fn_), fpr: pct(fp, fp + tn), sa: pct(tp + tn, tp + fp + tn + fn_) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Full,
    Reduced,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 2] = [DatasetKind::Full, DatasetKind::Reduced];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Full => "full",
            DatasetKind::Reduced => "reduced",
        }
    }
}

impl core::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(DatasetKind::Full),
            "reduced" => Ok(DatasetKind::Reduced),
            _ => Err(Error::Argument(format!("unknown dataset kind `{s}` (full, reduced)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualVerdict {
    pub threshold_pass: bool,
    pub iac_pass: bool,
    #[serde(rename = "final")]
    pub final_: Verdict,
}

impl DualVerdict {
    pub fn new(threshold_pass: bool, iac_pass: bool) -> Self {
        let final_ = if threshold_pass && iac_pass { Verdict::Normal } else { Verdict::Anomalous };
        DualVerdict { threshold_pass, iac_pass, final_ }
    }
}

/// Default share of event occurrences covered by the modeled feature events.
pub const DEFAULT_SIGNIFICANCE_PCT: f64 = 100.0;

/// Curve model trained on the per-row event slices of attack-free rows.
pub fn train_event_model(normal: &TracePair, significance_pct: f64, w_delta: usize, confidence: f64) -> Result<IacModel> {
    let slices = normal.row_slices();
    let events = select_feature_events(&slices, significance_pct);
    train_model(&slices, &events, w_delta, confidence)
}

/// Models consulted by [`dual_detect`].
#[derive(Debug, Clone)]
pub struct DualDetector<'a> {
    pub features: &'a [String],
    pub classifier: &'a Classifier,
    pub iac: &'a IacModel,
    pub sensitivity: SensitivityDegree,
    pub alpha: f64,
    pub sigma_th: f64,
}

/// Normal only when the classifier predicts `+1` on the row's feature vector
/// and the row's event window passes the curve test.
pub fn dual_detect(row: &DataRow, events: &EventTrace, detector: &DualDetector<'_>) -> Result<DualVerdict> {
    if detector.classifier.n_features() != detector.features.len() {
        return Err(Error::Argument(format!(
            "classifier expects {} features, view has {}",
            detector.classifier.n_features(),
            detector.features.len()
        )));
    }
    let x = row.vector(detector.features).map_err(|e| Error::Argument(e.to_string()))?;
    let threshold_pass = !detector.classifier.predict(&x)?.is_anomalous();
    let verdict = classify_trace(events, detector.iac, detector.alpha, detector.sigma_th, detector.sensitivity)?;
    Ok(DualVerdict::new(threshold_pass, !verdict.anomalous))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub group: Group,
    pub dataset_kind: DatasetKind,
    pub s_pct: u8,
    pub classifier: ClassifierKind,
    pub counts: Confusion,
    pub adr: f64,
    pub fpr: f64,
    pub sa: f64,
}

/// Per-classifier mean over the evaluated groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageResult {
    pub dataset_kind: DatasetKind,
    pub s_pct: u8,
    pub classifier: ClassifierKind,
    pub adr: f64,
    pub fpr: f64,
    pub sa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub results: Vec<ScenarioResult>,
    pub averages: Vec<AverageResult>,
}

impl EvaluationReport {
    pub fn average(&self, classifier: ClassifierKind, kind: DatasetKind, s: SensitivityDegree) -> Option<&AverageResult> {
        self.averages
            .iter()
            .find(|a| a.classifier == classifier && a.dataset_kind == kind && a.s_pct == s.pct())
    }

    pub fn cell(
        &self,
        group: Group,
        classifier: ClassifierKind,
        kind: DatasetKind,
        s: SensitivityDegree,
    ) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| {
            r.group == group && r.classifier == classifier && r.dataset_kind == kind && r.s_pct == s.pct()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub groups: Vec<Group>,
    pub dataset_kinds: Vec<DatasetKind>,
    pub sensitivities: Vec<SensitivityDegree>,
    pub classifiers: Vec<ClassifierKind>,
    pub params: ClassifierParams,
    /// Reduced-view features; empty means the campaign's signal parameters.
    pub reduced_features: Vec<String>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            groups: Group::ALL.to_vec(),
            dataset_kinds: DatasetKind::ALL.to_vec(),
            sensitivities: SensitivityDegree::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            params: ClassifierParams::default(),
            reduced_features: Vec::new(),
        }
    }
}

/// Features of a view and the subset ground truth counts over: every signal
/// parameter present in the view.
pub fn view_features(campaign: &Campaign, config: &HarnessConfig, kind: DatasetKind) -> (Vec<String>, Vec<String>) {
    let signals = campaign.config.signal_names();
    let view = match kind {
        DatasetKind::Full => campaign.config.schema(),
        DatasetKind::Reduced if config.reduced_features.is_empty() => signals.clone(),
        DatasetKind::Reduced => config.reduced_features.clone(),
    };
    let counted = view.iter().filter(|f| signals.contains(f)).cloned().collect();
    (view, counted)
}

/// A labeled matrix of `view` columns, labeled by ground truth over `counted`.
pub fn labeled_view(
    data: &DataTrace,
    profile: &ThresholdProfile,
    view: &[String],
    counted: &[String],
    s: SensitivityDegree,
) -> Result<LabeledSet> {
    let mut x = Vec::with_capacity(data.len());
    let mut y = Vec::with_capacity(data.len());
    for row in data.rows() {
        x.push(row.vector(view)?);
        y.push(label_ground_truth(row, profile, counted, s)?);
    }
    LabeledSet::new(x, y)
}

/// Full-schema rows of every group's scenario `s` (training then test
/// partition), labeled by ground truth, for feature selection.
pub fn selection_set(campaign: &Campaign, s: SensitivityDegree) -> Result<(LabeledSet, Vec<String>)> {
    let schema = campaign.config.schema();
    let signals = campaign.config.signal_names();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for gc in campaign.groups.values() {
        let scenario = gc
            .scenarios
            .get(&s)
            .ok_or_else(|| Error::Argument(format!("campaign has no S={}% scenario", s.pct())))?;
        for part in [&scenario.train.data, &scenario.test.data] {
            let set = labeled_view(part, &gc.profile, &schema, &signals, s)?;
            x.extend_from_slice(set.x());
            y.extend_from_slice(set.y());
        }
    }
    Ok((LabeledSet::new(x, y)?, schema))
}

fn cell_seed(master: u64, group: Group, kind: DatasetKind, s: SensitivityDegree, c: ClassifierKind) -> u64 {
    let g = Group::ALL.iter().position(|&x| x == group).unwrap_or(0) as u64;
    let k = kind as u64;
    let ci = ClassifierKind::ALL.iter().position(|&x| x == c).unwrap_or(0) as u64;
    derive_seed(master, 0x4841_0000 + g * 1_000 + k * 100 + u64::from(s.pct()) + ci * 10_000)
}

/// Evaluates one cell: trains on the scenario's training partition and
/// scores its test partition.
pub fn run_cell(
    campaign: &Campaign,
    config: &HarnessConfig,
    group: Group,
    kind: DatasetKind,
    s: SensitivityDegree,
    classifier: ClassifierKind,
) -> Result<ScenarioResult> {
    let gc = campaign
        .groups
        .get(&group)
        .ok_or_else(|| Error::Argument(format!("campaign has no group {group}")))?;
    let scenario = gc
        .scenarios
        .get(&s)
        .ok_or_else(|| Error::Argument(format!("campaign has no S={}% scenario", s.pct())))?;
    let (view, counted) = view_features(campaign, config, kind);
    let train_set = labeled_view(&scenario.train.data, &gc.profile, &view, &counted, s)?;
    let test_set = labeled_view(&scenario.test.data, &gc.profile, &view, &counted, s)?;
    let mut params = config.params;
    params.svm.seed = cell_seed(campaign.config.seed, group, kind, s, classifier);
    let model = train(classifier, &train_set, &params)?;
    let mut counts = Confusion::default();
    for (x, &truth) in test_set.x().iter().zip(test_set.y()) {
        counts.record(truth, model.predict(x)?);
    }
    let m = metrics(counts.tp, counts.fp, counts.tn, counts.fn_)?;
    Ok(ScenarioResult {
        group,
        dataset_kind: kind,
        s_pct: s.pct(),
        classifier,
        counts,
        adr: m.adr,
        fpr: m.fpr,
        sa: m.sa,
    })
}

/// Every group x view x sensitivity x classifier cell in canonical order,
/// plus per-classifier averages over groups.
pub fn run_matrix(campaign: &Campaign, config: &HarnessConfig) -> Result<EvaluationReport> {
    let mut results = Vec::new();
    for &group in &config.groups {
        for &kind in &config.dataset_kinds {
            for &s in &config.sensitivities {
                for &c in &config.classifiers {
                    results.push(run_cell(campaign, config, group, kind, s, c)?);
                }
            }
        }
    }
    let mut averages = Vec::new();
    for &kind in &config.dataset_kinds {
        for &s in &config.sensitivities {
            for &c in &config.classifiers {
                let cells: Vec<&ScenarioResult> = results
                    .iter()
                    .filter(|r| r.dataset_kind == kind && r.s_pct == s.pct() && r.classifier == c)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let n = cells.len() as f64;
                let mean = |f: fn(&ScenarioResult) -> f64| cells.iter().map(|r| f(r)).sum::<f64>() / n;
                averages.push(AverageResult {
                    dataset_kind: kind,
                    s_pct: s.pct(),
                    classifier: c,
                    adr: mean(|r| r.adr),
                    fpr: mean(|r| r.fpr),
                    sa: mean(|r| r.sa),
                });
            }
        }
    }
    Ok(EvaluationReport { seed: campaign.config.seed, results, averages })
}

/// Aligned text tables, one per classifier and sensitivity: metrics down,
/// groups and their average across, full and reduced side by side.
pub fn render_tables(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let mut blocks: Vec<(ClassifierKind, u8)> = Vec::new();
    for r in &report.results {
        if !blocks.contains(&(r.classifier, r.s_pct)) {
            blocks.push((r.classifier, r.s_pct));
        }
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut kinds: Vec<DatasetKind> = Vec::new();
    for r in &report.results {
        if !groups.contains(&r.group) {
            groups.push(r.group);
        }
        if !kinds.contains(&r.dataset_kind) {
            kinds.push(r.dataset_kind);
        }
    }
    let _ = writeln!(out, "seed {}", report.seed);
    for (c, s) in blocks {
        let _ = writeln!(out, "\n{} results for S={}%", c.as_str().to_uppercase(), s);
        let mut header = format!("{:<6}", "");
        for g in &groups {
            for k in &kinds {
                header.push_str(&format!(" {:>10}", format!("{g}/{}", k.as_str())));
            }
        }
        for k in &kinds {
            header.push_str(&format!(" {:>10}", format!("avg/{}", k.as_str())));
        }
        let _ = writeln!(out, "{header}");
        for (name, pick) in [
            ("ADR", (|r: &ScenarioResult| r.adr) as fn(&ScenarioResult) -> f64),
            ("FPR", |r| r.fpr),
            ("SA", |r| r.sa),
        ] {
            let mut line = format!("{name:<6}");
            let mut by_kind: BTreeMap<DatasetKind, Vec<f64>> = BTreeMap::new();
            for g in &groups {
                for k in &kinds {
                    let cell = report
                        .results
                        .iter()
                        .find(|r| r.group == *g && r.dataset_kind == *k && r.classifier == c && r.s_pct == s);
                    match cell {
                        Some(r) => {
                            by_kind.entry(*k).or_default().push(pick(r));
                            line.push_str(&format!(" {:>10.1}", pick(r)));
                        }
                        None => line.push_str(&format!(" {:>10}", "-")),
                    }
                }
            }
            for k in &kinds {
                match by_kind.get(k) {
                    Some(v) if !v.is_empty() => {
                        line.push_str(&format!(" {:>10.1}", v.iter().sum::<f64>() / v.len() as f64))
                    }
                    _ => line.push_str(&format!(" {:>10}", "-")),
                }
            }
            let _ = writeln!(out, "{line}");
        }
    }
    out
}
