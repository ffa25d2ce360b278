//! Run configuration shared by every subcommand.

use std::path::Path;

use icn_sentinel_core::classifiers::ClassifierKind;
use icn_sentinel_core::data::{Group, SensitivityDegree};
use icn_sentinel_core::featsel::{Evaluator, GaConfig};
use icn_sentinel_core::harness::{DatasetKind, EvaluationReport, HarnessConfig, DEFAULT_SIGNIFICANCE_PCT};
use icn_sentinel_core::iac::{DEFAULT_ALPHA, DEFAULT_CONFIDENCE, DEFAULT_SIGMA_TH, DEFAULT_W_DELTA};
use icn_sentinel_core::synth::GeneratorConfig;
use serde::{Deserialize, Serialize};

use crate::formats::Stamp;
use crate::manifest::sha256_hex;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 2018;
pub const SEED_ENV: &str = "ICN_SENTINEL_SEED";

/// Curve-model training and detection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub alpha: f64,
    pub sigma_th: f64,
    pub w_delta: usize,
    pub confidence: f64,
    /// Share of event occurrences the modeled feature events must cover.
    pub significance_pct: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            alpha: DEFAULT_ALPHA,
            sigma_th: DEFAULT_SIGMA_TH,
            w_delta: DEFAULT_W_DELTA,
            confidence: DEFAULT_CONFIDENCE,
            significance_pct: DEFAULT_SIGNIFICANCE_PCT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub evaluator: Evaluator,
    pub ga: GaConfig,
    /// Scenario whose rows feed the selection.
    pub s_pct: u8,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig { evaluator: Evaluator::default(), ga: GaConfig::default(), s_pct: 100 }
    }
}

/// Bounds every report row of one view and sensitivity must meet. Rules
/// whose cells are absent from a report hold vacuously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceRule {
    pub dataset: DatasetKind,
    pub s_pct: u8,
    /// Empty means every classifier.
    #[serde(default)]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub min_adr: Option<f64>,
    #[serde(default)]
    pub max_fpr: Option<f64>,
    #[serde(default)]
    pub min_sa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub rules: Vec<AcceptanceRule>,
    /// Also require average SA non-decreasing from S=100% to 20% and reduced
    /// SA at least full SA in every cell.
    pub trends: bool,
    pub tolerance: f64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            rules: vec![AcceptanceRule {
                dataset: DatasetKind::Reduced,
                s_pct: 20,
                classifiers: Vec::new(),
                min_adr: Some(100.0),
                max_fpr: Some(0.0),
                min_sa: Some(100.0),
            }],
            trends: false,
            tolerance: 1e-9,
        }
    }
}

impl AcceptanceConfig {
    /// Human-readable violations of `report`; empty when accepted.
    pub fn check(&self, report: &EvaluationReport) -> Vec<String> {
        let tol = self.tolerance;
        let mut failures = Vec::new();
        for rule in &self.rules {
            for r in report.results.iter().filter(|r| {
                r.dataset_kind == rule.dataset
                    && r.s_pct == rule.s_pct
                    && (rule.classifiers.is_empty() || rule.classifiers.contains(&r.classifier))
            }) {
                let cell = format!("{} {} S={}% {}", r.group, r.dataset_kind, r.s_pct, r.classifier);
                if let Some(m) = rule.min_adr.filter(|&m| r.adr < m - tol) {
                    failures.push(format!("{cell}: ADR {:.1} < {m}", r.adr));
                }
                if let Some(m) = rule.max_fpr.filter(|&m| r.fpr > m + tol) {
                    failures.push(format!("{cell}: FPR {:.1} > {m}", r.fpr));
                }
                if let Some(m) = rule.min_sa.filter(|&m| r.sa < m - tol) {
                    failures.push(format!("{cell}: SA {:.1} < {m}", r.sa));
                }
            }
        }
        if self.trends {
            failures.extend(trend_violations(report, tol));
        }
        failures
    }
}

/// Average SA must not drop as S% decreases; reduced SA must not fall below
/// full SA in any cell.
pub fn trend_violations(report: &EvaluationReport, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for c in ClassifierKind::ALL {
        for kind in DatasetKind::ALL {
            let sa: Vec<(u8, f64)> = [SensitivityDegree::High, SensitivityDegree::Medium, SensitivityDegree::Least]
                .iter()
                .filter_map(|&s| report.average(c, kind, s).map(|a| (s.pct(), a.sa)))
                .collect();
            for w in sa.windows(2) {
                if w[1].1 < w[0].1 - tol {
                    out.push(format!("{c} {kind}: average SA {:.1} at S={}% < {:.1} at S={}%", w[1].1, w[1].0, w[0].1, w[0].0));
                }
            }
        }
    }
    for r in report.results.iter().filter(|r| r.dataset_kind == DatasetKind::Reduced) {
        let s = SensitivityDegree::from_pct(r.s_pct).expect("report sensitivity");
        if let Some(full) = report.cell(r.group, r.classifier, DatasetKind::Full, s) {
            if r.sa < full.sa - tol {
                out.push(format!(
                    "{} S={}% {}: reduced SA {:.1} < full SA {:.1}",
                    r.group, r.s_pct, r.classifier, r.sa, full.sa
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; overrides `gen.seed`.
    pub seed: u64,
    pub gen: GeneratorConfig,
    pub harness: HarnessConfig,
    pub detect: DetectConfig,
    pub select: SelectConfig,
    pub acceptance: AcceptanceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            gen: GeneratorConfig::default(),
            harness: HarnessConfig::default(),
            detect: DetectConfig::default(),
            select: SelectConfig::default(),
            acceptance: AcceptanceConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. A missing or malformed file is a usage error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// The config at `path`, or the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }

    /// Applies a seed override and propagates the master seed to every
    /// seeded component; validates the generator settings.
    pub fn resolve(mut self, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.gen.seed = self.seed;
        self.gen.validate().map_err(|e| Error::Usage(e.to_string()))?;
        self.select.ga.validate().map_err(|e| Error::Usage(e.to_string()))?;
        SensitivityDegree::from_pct(self.select.s_pct).map_err(|e| Error::Usage(e.to_string()))?;
        for rule in &self.acceptance.rules {
            SensitivityDegree::from_pct(rule.s_pct).map_err(|e| Error::Usage(e.to_string()))?;
        }
        Ok(self)
    }

    /// sha256 of the canonical (compact) JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn stamp(&self) -> Stamp {
        Stamp { seed: self.seed, config_hash: self.hash() }
    }

    /// Restricts the evaluation matrix.
    pub fn filter_matrix(
        &mut self,
        groups: Option<Vec<Group>>,
        datasets: Option<Vec<DatasetKind>>,
        sensitivities: Option<Vec<SensitivityDegree>>,
        classifiers: Option<Vec<ClassifierKind>>,
    ) {
        if let Some(g) = groups {
            self.harness.groups = g;
        }
        if let Some(d) = datasets {
            self.harness.dataset_kinds = d;
        }
        if let Some(s) = sensitivities {
            self.harness.sensitivities = s;
        }
        if let Some(c) = classifiers {
            self.harness.classifiers = c;
        }
    }
}
