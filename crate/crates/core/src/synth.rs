//! Synthetic turbine-generator campaigns.
//!
//! Normal rows are drawn per parameter from a normal distribution around a
//! target mean, truncated to `(0, p_th]`, so that normal data never crosses
//! its own threshold. The five signal parameters default to the plant limits
//! and means that reproduce the published thresholds; thirteen invented filler
//! parameters pad the schema to eighteen. Every row emits one event per
//! parameter reading in schema order, so event files align with data rows by
//! fixed-length slicing.
//!
//! Attacks overwrite one, three or all five signal parameters with values
//! uniform on `(p_th, psi]` and perturb the row's event slice with a burst of
//! the attacked parameter's symbol.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{train_test_indices, DataRow, DataTrace, EventTrace, Group, Label, SensitivityDegree};
use crate::profiler::{build_profile, compute_threshold, ParameterSpec, ThresholdProfile};
use crate::{derive_seed, rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamConfig {
    pub name: String,
    /// Operational limit.
    pub psi: f64,
    pub target_mu: f64,
    /// Standard deviation relative to the mean.
    pub rel_std: f64,
}

impl ParamConfig {
    pub fn new(name: &str, psi: f64, target_mu: f64, rel_std: f64) -> Self {
        ParamConfig { name: name.to_string(), psi, target_mu, rel_std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackPattern {
    /// One signal parameter per attacked row.
    One,
    /// Any three signal parameters.
    Three,
    /// All signal parameters.
    Five,
    /// Uniformly one of the three patterns above, per row.
    Mixed,
    /// Pattern tied to the scenario: five at S=20%, three at 60%, one at 100%.
    Matched,
}

impl AttackPattern {
    pub fn resolve(self, sensitivity: SensitivityDegree) -> AttackPattern {
        match self {
            AttackPattern::Matched => match sensitivity {
                SensitivityDegree::Least => AttackPattern::Five,
                SensitivityDegree::Medium => AttackPattern::Three,
                SensitivityDegree::High => AttackPattern::One,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Parameters that carry the attack signal.
    pub signals: Vec<ParamConfig>,
    /// Parameters that are never attacked.
    pub fillers: Vec<ParamConfig>,
    /// The signal parameter whose mean follows the group's power demand.
    pub power_param: String,
    pub power_offsets: BTreeMap<Group, f64>,
    /// Attack-free rows per group used for profiling and classifier training.
    pub train_rows: usize,
    /// Rows per group in each test partition.
    pub test_rows: usize,
    pub attack_rate: f64,
    pub attack_pattern: AttackPattern,
    /// Readings overwritten by the attacked symbol in an attacked row's slice.
    pub burst_len: usize,
    /// Seconds between rows.
    pub cadence_s: i64,
    pub trim_fraction: f64,
    pub window_len: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let signals = vec![
            ParamConfig::new("FGF", 500.0, 334.17, 0.05),
            ParamConfig::new("MSV", 45.0, 10.63, 0.05),
            ParamConfig::new("GBV", 5.0, 1.4645, 0.05),
            ParamConfig::new("EGT", 560.0, 434.8, 0.05),
            ParamConfig::new("Power", 1120.0, 806.06, 0.05),
        ];
        // Invented auxiliary channels; only their sub-threshold behavior matters.
        let fillers = vec![
            ParamConfig::new("CDP", 20.0, 12.0, 0.05),
            ParamConfig::new("LOT", 80.0, 50.0, 0.05),
            ParamConfig::new("LOP", 6.0, 3.6, 0.05),
            ParamConfig::new("CIT", 50.0, 28.0, 0.05),
            ParamConfig::new("BT1", 120.0, 70.0, 0.05),
            ParamConfig::new("BT2", 120.0, 72.0, 0.05),
            ParamConfig::new("GENV", 15.0, 9.0, 0.05),
            ParamConfig::new("GENA", 60.0, 36.0, 0.05),
            ParamConfig::new("RPM", 4000.0, 2400.0, 0.05),
            ParamConfig::new("FGP", 30.0, 18.0, 0.05),
            ParamConfig::new("FGT", 60.0, 35.0, 0.05),
            ParamConfig::new("CWT", 45.0, 26.0, 0.05),
            ParamConfig::new("HUM", 100.0, 55.0, 0.05),
        ];
        let power_offsets =
            [(Group::MD, 1.00), (Group::AD, 1.06), (Group::ED, 1.12), (Group::ND, 0.94)].into_iter().collect();
        GeneratorConfig {
            signals,
            fillers,
            power_param: "Power".into(),
            power_offsets,
            train_rows: 60,
            test_rows: 180,
            attack_rate: 0.25,
            attack_pattern: AttackPattern::Matched,
            burst_len: 4,
            cadence_s: 60,
            trim_fraction: crate::profiler::DEFAULT_TRIM_FRACTION,
            window_len: crate::profiler::DEFAULT_WINDOW_LEN,
            seed: 2018,
        }
    }
}

impl GeneratorConfig {
    /// Signal parameters followed by fillers.
    pub fn schema(&self) -> Vec<String> {
        self.signals.iter().chain(&self.fillers).map(|p| p.name.clone()).collect()
    }

    pub fn signal_names(&self) -> Vec<String> {
        self.signals.iter().map(|p| p.name.clone()).collect()
    }

    pub fn limits(&self) -> BTreeMap<String, f64> {
        self.signals.iter().chain(&self.fillers).map(|p| (p.name.clone(), p.psi)).collect()
    }

    fn group_mu(&self, p: &ParamConfig, group: Group) -> f64 {
        if p.name == self.power_param {
            p.target_mu * self.power_offsets.get(&group).copied().unwrap_or(1.0)
        } else {
            p.target_mu
        }
    }

    /// The generator's own thresholds for a group, from its target means.
    pub fn group_profile(&self, group: Group) -> Result<ThresholdProfile> {
        let params = self
            .signals
            .iter()
            .chain(&self.fillers)
            .map(|p| ParameterSpec::new(p.name.clone(), p.psi, self.group_mu(p, group)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ThresholdProfile { params, trim_fraction: self.trim_fraction, window_len: self.window_len })
    }

    pub fn validate(&self) -> Result<()> {
        if self.signals.is_empty() {
            return Err(Error::Config("at least one signal parameter is required".into()));
        }
        let schema = self.schema();
        for (i, name) in schema.iter().enumerate() {
            if schema[..i].contains(name) {
                return Err(Error::Config(format!("duplicate parameter `{name}`")));
            }
        }
        for group in Group::ALL {
            for p in self.signals.iter().chain(&self.fillers) {
                let mu = self.group_mu(p, group);
                let (_, p_th) = compute_threshold(p.psi, mu).map_err(|e| Error::Config(e.to_string()))?;
                if !(mu > 0.0 && mu < p_th && p_th < p.psi) {
                    return Err(Error::Config(format!(
                        "`{}` in {group}: need 0 < mu < p_th < psi, got mu={mu}, p_th={p_th}, psi={}",
                        p.name, p.psi
                    )));
                }
                if !(p.rel_std >= 0.0) {
                    return Err(Error::Config(format!("`{}`: rel_std must be >= 0", p.name)));
                }
            }
        }
        if !(self.attack_rate > 0.0 && self.attack_rate < 1.0) {
            return Err(Error::Config(format!("attack rate must lie in (0, 1), got {}", self.attack_rate)));
        }
        if self.train_rows == 0 || self.test_rows == 0 {
            return Err(Error::Config("train_rows and test_rows must be positive".into()));
        }
        if self.cadence_s <= 0 {
            return Err(Error::Config("cadence must be positive".into()));
        }
        let needs = match self.attack_pattern {
            AttackPattern::One => 1,
            _ => 3,
        };
        if self.signals.len() < needs {
            return Err(Error::Config(format!("attack pattern needs at least {needs} signal parameters")));
        }
        Ok(())
    }
}

/// Rounds to four decimals unless that leaves the interval `[lo, hi]`.
fn tidy(v: f64, lo: f64, hi: f64) -> f64 {
    let r = libm::round(v * 1e4) / 1e4;
    if r >= lo && r <= hi {
        r
    } else {
        v
    }
}

fn sample_truncated<R: Rng>(rng: &mut R, mu: f64, sd: f64, upper: f64) -> f64 {
    if sd <= 0.0 {
        return mu;
    }
    let dist = Normal::new(mu, sd).expect("finite normal parameters");
    loop {
        let v = dist.sample(rng);
        if v > 0.0 && v <= upper {
            return tidy(v, f64::MIN_POSITIVE, upper);
        }
    }
}

/// Timestamp of the `i`-th row of a group: rows fill the group's six-hour
/// window at the configured cadence and continue on the following days.
pub fn row_timestamp(group: Group, i: usize, cadence_s: i64) -> i64 {
    let per_window = (6 * 3_600 / cadence_s).max(1) as usize;
    let day = (i / per_window) as i64;
    day * 86_400 + group.start_of_day_offset() + (i % per_window) as i64 * cadence_s
}

/// `n` normal rows for `group` and their event trace (one symbol per
/// parameter per row, in schema order). Deterministic under `seed`.
pub fn gen_normal(config: &GeneratorConfig, group: Group, n: usize, seed: u64) -> Result<(DataTrace, EventTrace)> {
    config.validate()?;
    let profile = config.group_profile(group)?;
    let schema = config.schema();
    let mut rng = rng::rng(seed);
    let params: Vec<(&ParamConfig, f64, f64)> = config
        .signals
        .iter()
        .chain(&config.fillers)
        .zip(&profile.params)
        .map(|(p, spec)| (p, spec.mu, spec.p_th))
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n * schema.len());
    for i in 0..n {
        let values = params
            .iter()
            .map(|(p, mu, p_th)| (p.name.clone(), sample_truncated(&mut rng, *mu, p.rel_std * mu, *p_th)))
            .collect();
        rows.push(DataRow {
            timestamp: row_timestamp(group, i, config.cadence_s),
            group,
            values,
            label: Some(Label::Normal),
        });
        events.extend(schema.iter().cloned());
    }
    let alphabet = schema.iter().cloned().collect();
    Ok((DataTrace::new(schema, rows)?, EventTrace::with_alphabet(events, alphabet)?))
}

/// Data rows together with their aligned event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub data: DataTrace,
    pub events: EventTrace,
}

impl TracePair {
    /// Events per row.
    pub fn slice_len(&self) -> usize {
        self.data.schema().len()
    }

    /// The event slice of row `i`.
    pub fn row_events(&self, i: usize) -> EventTrace {
        let len = self.slice_len();
        let slice = self.events.events()[i * len..(i + 1) * len].to_vec();
        EventTrace::with_alphabet(slice, self.events.alphabet().clone()).expect("slice of a valid trace")
    }

    /// Every row's event slice, in row order.
    pub fn row_slices(&self) -> Vec<EventTrace> {
        (0..self.data.len()).map(|i| self.row_events(i)).collect()
    }

    pub fn select(&self, indices: &[usize]) -> TracePair {
        let len = self.slice_len();
        let events = indices
            .iter()
            .flat_map(|&i| self.events.events()[i * len..(i + 1) * len].iter().cloned())
            .collect();
        TracePair {
            data: self.data.select(indices),
            events: EventTrace::with_alphabet(events, self.events.alphabet().clone()).expect("subset"),
        }
    }
}

/// What an attack does to a row.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec<'a> {
    pub signals: &'a [String],
    pub pattern: AttackPattern,
    pub rate: f64,
    pub burst_len: usize,
}

/// Attacks `round(rate * n)` uniformly chosen rows: the pattern's signal
/// parameters get values uniform on `(p_th, psi]`, the row is labeled `-1`,
/// and its event slice carries a burst of each attacked symbol. Returns the
/// attacked trace and the attacked row indices.
pub fn inject_attacks(
    input: &TracePair,
    profile: &ThresholdProfile,
    spec: &AttackSpec<'_>,
    seed: u64,
) -> Result<(TracePair, Vec<usize>)> {
    let n = input.data.len();
    let k = libm::round(spec.rate * n as f64) as usize;
    if k == 0 || k > n {
        return Err(Error::Argument(format!("attack rate {} selects {k} of {n} rows", spec.rate)));
    }
    if let Some(bad) = input.data.rows().iter().position(|r| r.label == Some(Label::Anomalous)) {
        return Err(Error::Argument(format!("row {} is already attacked", bad + 1)));
    }
    let mut targets = Vec::with_capacity(spec.signals.len());
    for name in spec.signals {
        let p = profile.spec(name)?;
        if !input.data.schema().contains(name) {
            return Err(Error::Schema(format!("attack parameter `{name}` missing from the trace")));
        }
        targets.push(p);
    }
    let per_row = |pattern: AttackPattern| -> Result<usize> {
        Ok(match pattern {
            AttackPattern::One => 1,
            AttackPattern::Three => 3,
            AttackPattern::Five => targets.len(),
            AttackPattern::Mixed | AttackPattern::Matched => {
                return Err(Error::Argument("attack pattern must be resolved to one, three or five".into()))
            }
        })
    };
    if spec.pattern == AttackPattern::Matched {
        per_row(spec.pattern)?;
    }
    let mut rng = rng::rng(seed);
    let mut chosen = index::sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();

    let slice_len = input.slice_len();
    let schema = input.data.schema().to_vec();
    let mut rows = input.data.rows().to_vec();
    let mut events = input.events.events().to_vec();
    for &i in &chosen {
        let pattern = match spec.pattern {
            AttackPattern::Mixed => *[AttackPattern::One, AttackPattern::Three, AttackPattern::Five]
                .choose(&mut rng)
                .expect("non-empty"),
            p => p,
        };
        let m = per_row(pattern)?;
        if m > targets.len() {
            return Err(Error::Argument(format!("pattern needs {m} signal parameters, have {}", targets.len())));
        }
        let mut picked = index::sample(&mut rng, targets.len(), m).into_vec();
        picked.sort_unstable();
        let row = &mut rows[i];
        let slice = &mut events[i * slice_len..(i + 1) * slice_len];
        for &t in &picked {
            let p = targets[t];
            let u: f64 = rng.random();
            let v = p.psi - u * (p.psi - p.p_th);
            let v = tidy(v, p.p_th + f64::EPSILON * p.p_th.abs(), p.psi);
            let v = if v > p.p_th { v } else { p.psi };
            row.values.insert(p.name.clone(), v);
            let pos = schema.iter().position(|s| *s == p.name).expect("checked above");
            for e in slice.iter_mut().skip(pos + 1).take(spec.burst_len) {
                *e = p.name.clone();
            }
        }
        row.label = Some(Label::Anomalous);
    }
    let data = DataTrace::new(schema, rows)?;
    let events = EventTrace::with_alphabet(events, input.events.alphabet().clone())?;
    Ok((TracePair { data, events }, chosen))
}

/// One sensitivity scenario: attacked training and test partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub pattern: AttackPattern,
    pub train: TracePair,
    pub test: TracePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCampaign {
    /// Attack-free training rows the profile is built from.
    pub normal_train: TracePair,
    pub profile: ThresholdProfile,
    pub scenarios: BTreeMap<SensitivityDegree, Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub config: GeneratorConfig,
    pub groups: BTreeMap<Group, GroupCampaign>,
}

const STREAM_NORMAL: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_ATTACK: u64 = 16;

fn group_seed(master: u64, group: Group, stream: u64) -> u64 {
    derive_seed(master, group.index() * 1_000 + stream)
}

/// Generates one group: `train_rows + test_rows` normal rows split at
/// random, a profile built from the normal training rows, then one attacked
/// copy of both partitions per sensitivity degree.
pub fn gen_group(config: &GeneratorConfig, group: Group) -> Result<GroupCampaign> {
    let total = config.train_rows + config.test_rows;
    let (data, events) = gen_normal(config, group, total, group_seed(config.seed, group, STREAM_NORMAL))?;
    let all = TracePair { data, events };
    let fraction = config.train_rows as f64 / total as f64;
    let (train_idx, test_idx) = train_test_indices(total, fraction, group_seed(config.seed, group, STREAM_SPLIT))?;
    let normal_train = all.select(&train_idx);
    let normal_test = all.select(&test_idx);
    let profile = build_profile(&normal_train.data, &config.limits(), config.trim_fraction, config.window_len)?;
    let signals = config.signal_names();
    let mut scenarios = BTreeMap::new();
    for s in SensitivityDegree::ALL {
        let pattern = config.attack_pattern.resolve(s);
        let spec = AttackSpec { signals: &signals, pattern, rate: config.attack_rate, burst_len: config.burst_len };
        let stream = STREAM_ATTACK + 2 * u64::from(s.pct());
        let (train, _) = inject_attacks(&normal_train, &profile, &spec, group_seed(config.seed, group, stream))?;
        let (test, _) = inject_attacks(&normal_test, &profile, &spec, group_seed(config.seed, group, stream + 1))?;
        scenarios.insert(s, Scenario { pattern, train, test });
    }
    Ok(GroupCampaign { normal_train, profile, scenarios })
}

pub fn gen_campaign(config: &GeneratorConfig) -> Result<Campaign> {
    config.validate()?;
    let groups = Group::ALL
        .iter()
        .map(|&g| Ok((g, gen_group(config, g)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Campaign { config: config.clone(), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::count_compromised;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults_reproduce_table_thresholds() {
        let c = GeneratorConfig::default();
        let profile = c.group_profile(Group::MD).unwrap();
        for (name, expected) in [("FGF", 445.0), ("MSV", 18.75), ("GBV", 2.50), ("EGT", 532.0), ("Power", 1032.0)] {
            assert_abs_diff_eq!(profile.spec(name).unwrap().p_th, expected, epsilon = 0.5);
        }
        assert_eq!(c.schema().len(), 18);
    }

    #[test]
    fn zero_variance_rows_equal_target() {
        let mut c = GeneratorConfig::default();
        for p in c.signals.iter_mut().chain(c.fillers.iter_mut()) {
            p.rel_std = 0.0;
        }
        let (data, _) = gen_normal(&c, Group::MD, 20, 1).unwrap();
        let profile = c.group_profile(Group::MD).unwrap();
        for row in data.rows() {
            assert_eq!(row.value("FGF").unwrap(), 334.17);
            assert_eq!(count_compromised(row, &profile, data.schema()).unwrap(), 0);
        }
    }

    #[test]
    fn empty_generation() {
        let (data, events) = gen_normal(&GeneratorConfig::default(), Group::ND, 0, 1).unwrap();
        assert!(data.is_empty() && events.is_empty());
    }

    #[test]
    fn rejects_supra_threshold_mean() {
        let mut c = GeneratorConfig::default();
        c.signals[0].target_mu = 500.0;
        assert!(matches!(gen_normal(&c, Group::MD, 5, 0), Err(Error::Config(_))));
        let mut c = GeneratorConfig::default();
        c.power_offsets.insert(Group::ED, 1.5);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn timestamps_fall_in_group() {
        for g in Group::ALL {
            for i in [0, 1, 359, 360, 1000] {
                assert_eq!(Group::from_timestamp(row_timestamp(g, i, 60)), g);
            }
        }
    }

    fn pair(n: usize) -> (GeneratorConfig, TracePair, ThresholdProfile) {
        let c = GeneratorConfig::default();
        let (data, events) = gen_normal(&c, Group::MD, n, 3).unwrap();
        let profile = c.group_profile(Group::MD).unwrap();
        (c, TracePair { data, events }, profile)
    }

    #[test]
    fn attack_patterns_hit_exact_counts() {
        let (c, normal, profile) = pair(40);
        let signals = c.signal_names();
        for (pattern, expected) in [(AttackPattern::One, 1), (AttackPattern::Three, 3), (AttackPattern::Five, 5)] {
            let spec = AttackSpec { signals: &signals, pattern, rate: 0.25, burst_len: 4 };
            let (out, attacked) = inject_attacks(&normal, &profile, &spec, 9).unwrap();
            assert_eq!(attacked.len(), 10);
            for (i, row) in out.data.rows().iter().enumerate() {
                let count = count_compromised(row, &profile, &signals).unwrap();
                if attacked.contains(&i) {
                    assert_eq!(count, expected);
                    assert_eq!(row.label, Some(Label::Anomalous));
                    for name in &signals {
                        let v = row.value(name).unwrap();
                        assert!(v <= profile.spec(name).unwrap().psi);
                    }
                } else {
                    assert_eq!(count, 0);
                    assert_eq!(out.row_events(i), normal.row_events(i));
                }
            }
        }
    }

    #[test]
    fn attack_burst_preserves_alignment() {
        let (c, normal, profile) = pair(8);
        let signals = c.signal_names();
        let spec = AttackSpec { signals: &signals, pattern: AttackPattern::One, rate: 0.25, burst_len: 4 };
        let (out, attacked) = inject_attacks(&normal, &profile, &spec, 5).unwrap();
        assert_eq!(out.events.len(), normal.events.len());
        for &i in &attacked {
            let slice = out.row_events(i);
            let hit = signals
                .iter()
                .find(|s| out.data.rows()[i].value(s).unwrap() > profile.spec(s).unwrap().p_th)
                .unwrap();
            assert_eq!(slice.count(hit), 5);
        }
    }

    #[test]
    fn attack_errors() {
        let (c, normal, profile) = pair(4);
        let signals = c.signal_names();
        let spec = AttackSpec { signals: &signals, pattern: AttackPattern::One, rate: 0.1, burst_len: 1 };
        assert!(matches!(inject_attacks(&normal, &profile, &spec, 0), Err(Error::Argument(_))));
        let bogus = vec!["RPMX".to_string()];
        let spec = AttackSpec { signals: &bogus, pattern: AttackPattern::One, rate: 0.5, burst_len: 1 };
        assert!(matches!(inject_attacks(&normal, &profile, &spec, 0), Err(Error::Schema(_))));
    }
}
