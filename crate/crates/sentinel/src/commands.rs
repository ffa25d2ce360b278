//! The five pipeline stages behind the command-line subcommands.
//!
//! Generated campaign layout, per group `G` and sensitivity `P` in {20, 60, 100}:
//!
//! ```text
//! config.json               resolved run configuration
//! G_normal.csv / .events    attack-free training rows the profile is built from
//! G_profile.json            threshold profile
//! G_SP_train.csv / .events  attacked training partition of scenario P
//! G_SP_test.csv  / .events  attacked test partition of scenario P
//! G_train.* / G_test.*      copies of the S=100% partitions
//! manifest.json             seed, config hash, sha256 of every file above
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use icn_sentinel_core::classifiers::{train as train_classifier, ClassifierKind, Classify, LabeledSet};
use icn_sentinel_core::data::{DataTrace, Group, Label, SensitivityDegree};
use icn_sentinel_core::derive_seed;
use icn_sentinel_core::featsel::{genetic_search, greedy_select, Evaluator, FeatureSubset};
use icn_sentinel_core::harness::{
    dual_detect, metrics, render_tables, run_matrix, selection_set, train_event_model, Confusion, DatasetKind,
    DualDetector, EvaluationReport,
};
use icn_sentinel_core::profiler::build_profile;
use icn_sentinel_core::synth::{gen_campaign, Campaign, GroupCampaign, Scenario, TracePair};
use serde::Serialize;

use crate::config::RunConfig;
use crate::formats::{
    load_iac, load_profile, parse_data_trace, parse_event_trace, read_json, save_data_trace, save_events, save_iac,
    save_profile, write_json, IacFile, ModelFile, Stamp,
};
use crate::manifest::{read_manifest, verify_manifest, write_manifest, Manifest};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
const SVM_SEED_TAG: u64 = 0x5356_4d00;

fn scenario_stem(group: Group, s: SensitivityDegree, part: &str) -> String {
    format!("{group}_S{}_{part}", s.pct())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn data_err(path: &Path) -> impl FnOnce(icn_sentinel_core::Error) -> Error + '_ {
    move |source| Error::Data { path: path.into(), source }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        create_dir(dir)?;
        Ok(Writer { dir, files: Vec::new() })
    }

    fn path(&mut self, name: String) -> PathBuf {
        let p = self.dir.join(&name);
        self.files.push(name);
        p
    }

    fn pair(&mut self, stem: &str, pair: &TracePair) -> Result<()> {
        let csv = self.path(format!("{stem}.csv"));
        save_data_trace(&csv, &pair.data)?;
        let events = self.path(format!("{stem}.events"));
        save_events(&events, &pair.events)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name.to_string());
        write_json(&p, value)
    }

    fn finish(self, stamp: &Stamp) -> Result<Manifest> {
        write_manifest(self.dir, stamp, &self.files)
    }
}

/// Generates the campaign of a resolved config and writes it to `out`.
pub fn gen(config: &RunConfig, out: &Path) -> Result<Manifest> {
    let campaign = gen_campaign(&config.gen)?;
    write_campaign(config, &campaign, out)
}

pub fn write_campaign(config: &RunConfig, campaign: &Campaign, out: &Path) -> Result<Manifest> {
    let stamp = config.stamp();
    let mut w = Writer::new(out)?;
    w.json(CONFIG_FILE, config)?;
    for (&group, gc) in &campaign.groups {
        w.pair(&format!("{group}_normal"), &gc.normal_train)?;
        let p = w.path(format!("{group}_profile.json"));
        save_profile(&p, &gc.profile, &stamp)?;
        for (&s, scenario) in &gc.scenarios {
            w.pair(&scenario_stem(group, s, "train"), &scenario.train)?;
            w.pair(&scenario_stem(group, s, "test"), &scenario.test)?;
            if s == SensitivityDegree::High {
                w.pair(&format!("{group}_train"), &scenario.train)?;
                w.pair(&format!("{group}_test"), &scenario.test)?;
            }
        }
    }
    w.finish(&stamp)
}

fn load_pair(dir: &Path, stem: &str, schema: &[String], alphabet: &BTreeSet<String>) -> Result<TracePair> {
    let csv = dir.join(format!("{stem}.csv"));
    let data = parse_data_trace(&csv, schema)?;
    let ev = dir.join(format!("{stem}.events"));
    let events = parse_event_trace(&ev, Some(alphabet))?;
    if events.len() != data.len() * schema.len() {
        return Err(Error::format(
            ev,
            format!("{} events for {} rows of {} parameters", events.len(), data.len(), schema.len()),
        ));
    }
    Ok(TracePair { data, events })
}

/// Reads a generated campaign back, after checking it against its manifest.
pub fn load_campaign(dir: &Path) -> Result<(RunConfig, Campaign)> {
    let manifest = read_manifest(dir)?;
    verify_manifest(dir, &manifest)?;
    let config: RunConfig = read_json(&dir.join(CONFIG_FILE))?;
    if config.hash() != manifest.config_hash {
        return Err(Error::format(dir.join(CONFIG_FILE), "config hash differs from the manifest"));
    }
    let schema = config.gen.schema();
    let alphabet: BTreeSet<String> = schema.iter().cloned().collect();
    let mut groups = BTreeMap::new();
    for group in Group::ALL {
        let normal_train = load_pair(dir, &format!("{group}_normal"), &schema, &alphabet)?;
        let profile = load_profile(&dir.join(format!("{group}_profile.json")), &schema)?;
        let mut scenarios = BTreeMap::new();
        for s in SensitivityDegree::ALL {
            let train = load_pair(dir, &scenario_stem(group, s, "train"), &schema, &alphabet)?;
            let test = load_pair(dir, &scenario_stem(group, s, "test"), &schema, &alphabet)?;
            scenarios.insert(s, Scenario { pattern: config.gen.attack_pattern.resolve(s), train, test });
        }
        groups.insert(group, GroupCampaign { normal_train, profile, scenarios });
    }
    let campaign = Campaign { config: config.gen.clone(), groups };
    Ok((config, campaign))
}

#[derive(Debug, Clone, Serialize)]
struct ReportFile<'a> {
    config_hash: &'a str,
    campaign_hash: &'a str,
    accepted: bool,
    failures: &'a [String],
    #[serde(flatten)]
    report: &'a EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    /// Acceptance violations; empty when accepted.
    pub failures: Vec<String>,
    pub manifest: Manifest,
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("group,dataset,s_pct,classifier,tp,fp,tn,fn,adr,fpr,sa\n");
    for r in &report.results {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.4},{:.4},{:.4}",
            r.group, r.dataset_kind, r.s_pct, r.classifier, c.tp, c.fp, c.tn, c.fn_, r.adr, r.fpr, r.sa
        );
    }
    out
}

/// Runs the evaluation matrix of `config.harness` over the campaign in
/// `data` and writes `report.csv`, `report.txt` and `report.json` to `out`.
/// The campaign's generator settings always come from `data`.
pub fn evaluate(data: &Path, config: Option<RunConfig>, out: &Path, filter: impl FnOnce(&mut RunConfig)) -> Result<Evaluation> {
    let (stored, campaign) = load_campaign(data)?;
    let campaign_hash = stored.hash();
    let mut config = match config {
        Some(c) => RunConfig { seed: stored.seed, gen: stored.gen.clone(), ..c },
        None => stored,
    };
    filter(&mut config);
    if fs::canonicalize(out).ok() == fs::canonicalize(data).ok() {
        return Err(Error::Usage(format!("{} holds the campaign; choose another --out", out.display())));
    }
    let report = run_matrix(&campaign, &config.harness)?;
    let failures = config.acceptance.check(&report);
    let stamp = config.stamp();

    let mut w = Writer::new(out)?;
    let p = w.path("report.csv".into());
    fs::write(&p, report_csv(&report)).map_err(|e| Error::io(&p, e))?;
    let p = w.path("report.txt".into());
    fs::write(&p, render_tables(&report)).map_err(|e| Error::io(&p, e))?;
    w.json(
        "report.json",
        &ReportFile {
            config_hash: &stamp.config_hash,
            campaign_hash: &campaign_hash,
            accepted: failures.is_empty(),
            failures: &failures,
            report: &report,
        },
    )?;
    w.json("evaluate_config.json", &config)?;
    let manifest = w.finish(&stamp)?;
    Ok(Evaluation { report, failures, manifest })
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub algo: ClassifierKind,
    pub data: PathBuf,
    /// Event file aligned with `data`; defaults to `data` with an `.events`
    /// extension when that file exists.
    pub events: Option<PathBuf>,
    pub dataset: DatasetKind,
    /// Explicit feature list; overrides `dataset`.
    pub features: Option<Vec<String>>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub w_delta: Option<usize>,
    pub out: PathBuf,
}

fn sibling_events(data: &Path, explicit: &Option<PathBuf>) -> Option<PathBuf> {
    explicit.clone().or_else(|| Some(data.with_extension("events")).filter(|p| p.exists()))
}

fn labels_of(trace: &DataTrace, path: &Path) -> Result<Vec<Label>> {
    trace
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.label.ok_or_else(|| {
                Error::Data {
                    path: path.into(),
                    source: icn_sentinel_core::Error::Parse { row: i + 1, message: "row has no label".into() },
                }
            })
        })
        .collect()
}

fn view(config: &RunConfig, schema: &[String], dataset: DatasetKind) -> Vec<String> {
    match dataset {
        DatasetKind::Full => schema.to_vec(),
        DatasetKind::Reduced if config.harness.reduced_features.is_empty() => config.gen.signal_names(),
        DatasetKind::Reduced => config.harness.reduced_features.clone(),
    }
}

/// Trains a classifier on labeled rows, a threshold profile on the rows
/// labeled normal and, when an event file is available, a curve model on
/// their event slices. Writes `model.json`, `profile.json` and `iac.json`.
pub fn train(config: &RunConfig, opts: &TrainOptions) -> Result<Manifest> {
    let trace = parse_data_trace(&opts.data, &[])?;
    let labels = labels_of(&trace, &opts.data)?;
    let features = opts.features.clone().unwrap_or_else(|| view(config, trace.schema(), opts.dataset));
    let x = trace
        .rows()
        .iter()
        .map(|r| r.vector(&features))
        .collect::<icn_sentinel_core::Result<Vec<_>>>()
        .map_err(data_err(&opts.data))?;
    let set = LabeledSet::new(x, labels.clone()).map_err(data_err(&opts.data))?;

    let mut params = config.harness.params;
    if let Some(k) = opts.k {
        params.knn.k = k;
    }
    if let Some(c) = opts.c {
        params.svm.c_param = c;
    }
    if let Some(e) = opts.epochs {
        params.svm.epochs = e;
    }
    params.svm.seed = derive_seed(config.seed, SVM_SEED_TAG);
    let classifier = train_classifier(opts.algo, &set, &params)?;

    let normal_idx: Vec<usize> = (0..trace.len()).filter(|&i| labels[i] == Label::Normal).collect();
    if normal_idx.is_empty() {
        return Err(Error::Data {
            path: opts.data.clone(),
            source: icn_sentinel_core::Error::InsufficientData("no rows labeled +1 to profile".into()),
        });
    }
    let normal = trace.select(&normal_idx);
    let profile = build_profile(&normal, &config.gen.limits(), config.gen.trim_fraction, config.gen.window_len)
        .map_err(data_err(&opts.data))?;

    let stamp = config.stamp();
    let mut w = Writer::new(&opts.out)?;
    w.json(CONFIG_FILE, config)?;
    w.json(
        "model.json",
        &ModelFile { classifier, features, seed: stamp.seed, config_hash: stamp.config_hash.clone() },
    )?;
    let p = w.path("profile.json".into());
    save_profile(&p, &profile, &stamp)?;
    if let Some(ev_path) = sibling_events(&opts.data, &opts.events) {
        let events = parse_event_trace(&ev_path, None)?;
        let slice = trace.schema().len();
        if events.len() != trace.len() * slice {
            return Err(Error::format(ev_path, format!("{} events for {} rows of {slice} parameters", events.len(), trace.len())));
        }
        let pair = TracePair { data: trace.clone(), events }.select(&normal_idx);
        let d = config.detect;
        let model = train_event_model(&pair, d.significance_pct, opts.w_delta.unwrap_or(d.w_delta), d.confidence)
            .map_err(data_err(&ev_path))?;
        let p = w.path("iac.json".into());
        save_iac(&p, &IacFile { model, alpha: d.alpha, sigma_th: d.sigma_th }, &stamp)?;
    }
    w.finish(&stamp)
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub model: PathBuf,
    pub data: PathBuf,
    pub events: Option<PathBuf>,
    pub sensitivity: SensitivityDegree,
    pub alpha: Option<f64>,
    pub sigma_th: Option<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectSummary {
    pub seed: u64,
    pub config_hash: String,
    pub rows: usize,
    pub anomalous: usize,
    /// Against the file's labels, when every row has one.
    pub counts: Option<Confusion>,
    pub adr: Option<f64>,
    pub fpr: Option<f64>,
    pub sa: Option<f64>,
}

fn verdict_str(normal: bool) -> &'static str {
    if normal {
        "normal"
    } else {
        "anomalous"
    }
}

/// Classifies every row with the trained model and, when both a curve model
/// and an event file exist, the row's event slice. Writes `detections.csv`
/// and `detections.json`.
pub fn detect(opts: &DetectOptions) -> Result<DetectSummary> {
    let model_path = opts.model.join("model.json");
    let model: ModelFile = read_json(&model_path)?;
    let iac_path = opts.model.join("iac.json");
    let iac = if iac_path.exists() { Some(load_iac(&iac_path)?) } else { None };
    let trace = parse_data_trace(&opts.data, &[])?;
    let events = sibling_events(&opts.data, &opts.events).map(|p| parse_event_trace(&p, None).map(|e| (p, e))).transpose()?;
    let pair = match events {
        Some((p, ev)) if iac.is_some() => {
            if ev.len() != trace.len() * trace.schema().len() {
                return Err(Error::format(p, format!("{} events for {} rows", ev.len(), trace.len())));
            }
            Some(TracePair { data: trace.clone(), events: ev })
        }
        _ => None,
    };

    let mut csv = String::from("ts,group,threshold,iac,final");
    let labeled = trace.rows().iter().all(|r| r.label.is_some()) && !trace.is_empty();
    csv.push_str(if labeled { ",label\n" } else { "\n" });
    let mut counts = Confusion::default();
    let mut anomalous = 0;
    for (i, row) in trace.rows().iter().enumerate() {
        let (threshold_pass, iac_pass) = match (&pair, &iac) {
            (Some(pair), Some(f)) => {
                let detector = DualDetector {
                    features: &model.features,
                    classifier: &model.classifier,
                    iac: &f.model,
                    sensitivity: opts.sensitivity,
                    alpha: opts.alpha.unwrap_or(f.alpha),
                    sigma_th: opts.sigma_th.unwrap_or(f.sigma_th),
                };
                let v = dual_detect(row, &pair.row_events(i), &detector).map_err(|source| Error::Data {
                    path: opts.data.clone(),
                    source: icn_sentinel_core::Error::Parse { row: i + 1, message: source.to_string() },
                })?;
                (v.threshold_pass, Some(v.iac_pass))
            }
            _ => {
                let x = row.vector(&model.features).map_err(data_err(&opts.data))?;
                (!model.classifier.predict(&x)?.is_anomalous(), None)
            }
        };
        let final_normal = threshold_pass && iac_pass.unwrap_or(true);
        if !final_normal {
            anomalous += 1;
        }
        let _ = write!(
            csv,
            "{},{},{},{},{}",
            row.timestamp,
            row.group,
            verdict_str(threshold_pass),
            iac_pass.map_or("-", verdict_str),
            verdict_str(final_normal)
        );
        if let Some(label) = row.label.filter(|_| labeled) {
            counts.record(label, if final_normal { Label::Normal } else { Label::Anomalous });
            let _ = write!(csv, ",{label}");
        }
        csv.push('\n');
    }
    let m = if labeled { metrics(counts.tp, counts.fp, counts.tn, counts.fn_).ok() } else { None };
    let summary = DetectSummary {
        seed: model.seed,
        config_hash: model.config_hash.clone(),
        rows: trace.len(),
        anomalous,
        counts: labeled.then_some(counts),
        adr: m.map(|m| m.adr),
        fpr: m.map(|m| m.fpr),
        sa: m.map(|m| m.sa),
    };
    let stamp = Stamp { seed: model.seed, config_hash: model.config_hash };
    let mut w = Writer::new(&opts.out)?;
    let p = w.path("detections.csv".into());
    fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
    w.json("detections.json", &summary)?;
    w.finish(&stamp)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Greedy,
    Genetic,
    Both,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "greedy" => Ok(Method::Greedy),
            "genetic" | "ga" => Ok(Method::Genetic),
            "both" => Ok(Method::Both),
            other => Err(format!("unknown selection method `{other}` (greedy, genetic, both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub method: &'static str,
    pub features: Vec<String>,
    pub score: f64,
    /// Best fitness per generation (genetic only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionFile {
    pub seed: u64,
    pub config_hash: String,
    pub evaluator: Evaluator,
    pub selections: Vec<Selection>,
}

/// Selection rows: a campaign directory contributes the pooled scenario of
/// `config.select.s_pct`; a CSV file contributes its labeled rows.
pub fn selection_data(config: &RunConfig, data: &Path) -> Result<(LabeledSet, Vec<String>)> {
    if data.is_dir() {
        let (_, campaign) = load_campaign(data)?;
        let s = SensitivityDegree::from_pct(config.select.s_pct)?;
        Ok(selection_set(&campaign, s)?)
    } else {
        let trace = parse_data_trace(data, &[])?;
        let labels = labels_of(&trace, data)?;
        let schema = trace.schema().to_vec();
        let x = trace.rows().iter().map(|r| r.vector(&schema)).collect::<icn_sentinel_core::Result<Vec<_>>>()?;
        Ok((LabeledSet::new(x, labels).map_err(data_err(data))?, schema))
    }
}

fn named(method: &'static str, subset: &FeatureSubset, schema: &[String], history: Option<Vec<f64>>) -> Selection {
    Selection { method, features: subset.names(schema), score: subset.score, history }
}

/// Runs wrapper selection and writes `selection.json` to `out`.
pub fn select(config: &RunConfig, data: &Path, method: Method, out: &Path) -> Result<SelectionFile> {
    let (set, schema) = selection_data(config, data)?;
    let evaluator = config.select.evaluator;
    let mut selections = Vec::new();
    if matches!(method, Method::Greedy | Method::Both) {
        let subset = greedy_select(&set, &evaluator, set.n_features())?;
        selections.push(named("greedy", &subset, &schema, None));
    }
    if matches!(method, Method::Genetic | Method::Both) {
        let outcome = genetic_search(&set, &evaluator, &config.select.ga, &[])?;
        selections.push(named("genetic", &outcome.best, &schema, Some(outcome.history)));
    }
    let stamp = config.stamp();
    let file = SelectionFile { seed: stamp.seed, config_hash: stamp.config_hash.clone(), evaluator, selections };
    let mut w = Writer::new(out)?;
    w.json("selection.json", &file)?;
    w.finish(&stamp)?;
    Ok(file)
}
