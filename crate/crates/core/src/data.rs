//! Domain types shared by every detector: data rows and traces, event traces,
//! time-of-day groups, labels and sensitivity degrees.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Time-of-day bucket a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// 06:00 - 12:00
    MD,
    /// 12:00 - 18:00
    AD,
    /// 18:00 - 24:00
    ED,
    /// 00:00 - 06:00
    ND,
}

impl Group {
    /// Canonical report order.
    pub const ALL: [Group; 4] = [Group::MD, Group::AD, Group::ED, Group::ND];

    /// Derives the group from the time of day (UTC) of a timestamp.
    pub fn from_timestamp(ts: i64) -> Group {
        let hour = ts.rem_euclid(86_400) / 3_600;
        match hour {
            6..=11 => Group::MD,
            12..=17 => Group::AD,
            18..=23 => Group::ED,
            _ => Group::ND,
        }
    }

    /// First second of the group's interval within a day.
    pub fn start_of_day_offset(self) -> i64 {
        match self {
            Group::MD => 6 * 3_600,
            Group::AD => 12 * 3_600,
            Group::ED => 18 * 3_600,
            Group::ND => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::MD => "MD",
            Group::AD => "AD",
            Group::ED => "ED",
            Group::ND => "ND",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Group::MD => 0,
            Group::AD => 1,
            Group::ED => 2,
            Group::ND => 3,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "MD" => Ok(Group::MD),
            "AD" => Ok(Group::AD),
            "ED" => Ok(Group::ED),
            "ND" => Ok(Group::ND),
            other => Err(Error::UnknownGroup(other.to_string())),
        }
    }
}

/// Binary class label, encoded `+1` (normal) / `-1` (anomalous) in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Normal => 1,
            Label::Anomalous => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        label.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Normal),
            -1 => Ok(Label::Anomalous),
            other => Err(Error::Argument(format!("label must be +1 or -1, got {other}"))),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" => Ok(Label::Normal),
            "-1" => Ok(Label::Anomalous),
            other => Err(Error::Argument(format!("label must be +1 or -1, got `{other}`"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("+1"),
            Label::Anomalous => f.write_str("-1"),
        }
    }
}

/// One timestamped reading of every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub timestamp: i64,
    pub group: Group,
    pub values: BTreeMap<String, f64>,
    pub label: Option<Label>,
}

impl DataRow {
    pub fn value(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("row has no value for parameter `{name}`")))
    }

    /// Values of `names`, in the given order.
    pub fn vector(&self, names: &[String]) -> Result<Vec<f64>> {
        names.iter().map(|n| self.value(n)).collect()
    }
}

/// Ordered rows sharing one schema. Schema order is the canonical feature
/// order for every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTrace {
    schema: Vec<String>,
    rows: Vec<DataRow>,
}

impl DataTrace {
    pub fn new(schema: Vec<String>, rows: Vec<DataRow>) -> Result<Self> {
        if schema.is_empty() {
            return Err(Error::Schema("schema must name at least one parameter".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &schema {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate parameter `{name}`")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} values, schema has {}",
                    i + 1,
                    row.values.len(),
                    schema.len()
                )));
            }
            for name in &schema {
                let v = row.value(name)?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("non-finite value in `{name}`"),
                    });
                }
            }
        }
        Ok(DataTrace { schema, rows })
    }

    pub fn empty(schema: Vec<String>) -> Result<Self> {
        Self::new(schema, Vec::new())
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<DataRow> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column of `name` in row order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if !self.schema.iter().any(|s| s == name) {
            return Err(Error::Schema(format!("unknown parameter `{name}`")));
        }
        self.rows.iter().map(|r| r.value(name)).collect()
    }

    /// A trace over the same schema holding the rows selected by `indices`.
    pub fn select(&self, indices: &[usize]) -> DataTrace {
        DataTrace {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&DataRow) -> bool) -> DataTrace {
        DataTrace {
            schema: self.schema.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn extend(&mut self, other: DataTrace) -> Result<()> {
        if other.schema != self.schema {
            return Err(Error::Schema("cannot concatenate traces with different schemas".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }
}

/// Ordered sequence of event symbols over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTrace {
    alphabet: BTreeSet<String>,
    events: Vec<String>,
}

impl EventTrace {
    /// Builds a trace whose alphabet is the set of symbols it contains.
    pub fn new<S: Into<String>>(events: impl IntoIterator<Item = S>) -> Self {
        let events: Vec<String> = events.into_iter().map(Into::into).collect();
        let alphabet = events.iter().cloned().collect();
        EventTrace { alphabet, events }
    }

    /// Builds a trace over an explicit alphabet; every symbol must belong to it.
    pub fn with_alphabet(events: Vec<String>, alphabet: BTreeSet<String>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::Argument("alphabet must not be empty".into()));
        }
        if let Some(bad) = events.iter().find(|e| !alphabet.contains(*e)) {
            return Err(Error::Argument(format!("symbol `{bad}` is outside the alphabet")));
        }
        Ok(EventTrace { alphabet, events })
    }

    /// One event per character, e.g. `"BBEBCA"`.
    pub fn from_chars(s: &str) -> Self {
        Self::new(s.chars().map(|c| c.to_string()))
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, symbol: &str) -> usize {
        self.events.iter().filter(|e| *e == symbol).count()
    }

    /// Splits into consecutive slices of `len` events; a short tail is dropped.
    pub fn chunks(&self, len: usize) -> Vec<EventTrace> {
        if len == 0 {
            return Vec::new();
        }
        self.events
            .chunks_exact(len)
            .map(|c| EventTrace::with_alphabet(c.to_vec(), self.alphabet.clone()).expect("subset of alphabet"))
            .collect()
    }
}

/// How many compromised parameters make a row an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SensitivityDegree {
    /// S = 20%: every monitored parameter must be compromised.
    Least,
    /// S = 60%: any three.
    Medium,
    /// S = 100%: any one.
    High,
}

impl SensitivityDegree {
    /// Order used by reports: 100%, 60%, 20%.
    pub const ALL: [SensitivityDegree; 3] =
        [SensitivityDegree::High, SensitivityDegree::Medium, SensitivityDegree::Least];

    pub fn from_pct(pct: u8) -> Result<Self> {
        match pct {
            20 => Ok(SensitivityDegree::Least),
            60 => Ok(SensitivityDegree::Medium),
            100 => Ok(SensitivityDegree::High),
            other => Err(Error::Argument(format!("sensitivity must be 20, 60 or 100, got {other}"))),
        }
    }

    pub fn pct(self) -> u8 {
        match self {
            SensitivityDegree::Least => 20,
            SensitivityDegree::Medium => 60,
            SensitivityDegree::High => 100,
        }
    }

    /// Number of compromised items (of `total`) needed to raise an alarm,
    /// always within `[1, total]` for `total >= 1`.
    pub fn required_count(self, total: usize) -> usize {
        let total = total.max(1);
        match self {
            SensitivityDegree::Least => total,
            SensitivityDegree::Medium => total.min(3),
            SensitivityDegree::High => 1,
        }
    }
}

impl From<SensitivityDegree> for u8 {
    fn from(s: SensitivityDegree) -> u8 {
        s.pct()
    }
}

impl TryFrom<u8> for SensitivityDegree {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        SensitivityDegree::from_pct(v)
    }
}

impl fmt::Display for SensitivityDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.pct())
    }
}

/// Per-group traces, keyed in canonical group order.
pub type GroupedTraces = BTreeMap<Group, DataTrace>;

/// Splits a trace into the four time-of-day groups, preserving row order
/// within each group. Every group key is present, possibly empty.
pub fn split_by_group(trace: &DataTrace) -> GroupedTraces {
    let mut out: GroupedTraces = Group::ALL
        .iter()
        .map(|&g| (g, DataTrace { schema: trace.schema.clone(), rows: Vec::new() }))
        .collect();
    for row in &trace.rows {
        out.get_mut(&row.group).expect("all groups present").rows.push(row.clone());
    }
    out
}

/// Random partition with `round(fraction * n)` training rows; both halves keep
/// the input order. Deterministic for a fixed seed.
pub fn train_test_split(trace: &DataTrace, fraction: f64, seed: u64) -> Result<(DataTrace, DataTrace)> {
    let (train, test) = train_test_indices(trace.len(), fraction, seed)?;
    Ok((trace.select(&train), trace.select(&test)))
}

/// Row indices of a random split of `n` rows: `round(fraction * n)` sorted
/// training indices and the sorted remainder.
pub fn train_test_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    if n == 0 {
        return Err(Error::Argument("cannot split an empty trace".into()));
    }
    let k = libm::round(fraction * n as f64) as usize;
    let mut rng = rng::rng(seed);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    let mut in_train = alloc::vec![false; n];
    for &i in &picked {
        in_train[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((picked, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(ts: i64, group: Group, v: f64) -> DataRow {
        DataRow {
            timestamp: ts,
            group,
            values: [("x".to_string(), v)].into_iter().collect(),
            label: None,
        }
    }

    fn trace_of(groups: &[Group]) -> DataTrace {
        let rows = groups.iter().enumerate().map(|(i, &g)| row(i as i64, g, i as f64)).collect();
        DataTrace::new(vec!["x".into()], rows).unwrap()
    }

    #[test]
    fn group_buckets() {
        assert_eq!(Group::from_timestamp(0), Group::ND);
        assert_eq!(Group::from_timestamp(6 * 3600), Group::MD);
        assert_eq!(Group::from_timestamp(12 * 3600 - 1), Group::MD);
        assert_eq!(Group::from_timestamp(12 * 3600), Group::AD);
        assert_eq!(Group::from_timestamp(18 * 3600), Group::ED);
        assert_eq!(Group::from_timestamp(86_400 + 5 * 3600), Group::ND);
        assert_eq!(Group::from_timestamp(-3600), Group::ED);
    }

    #[test]
    fn unknown_group_tag() {
        assert_eq!("XD".parse::<Group>(), Err(Error::UnknownGroup("XD".into())));
    }

    #[test]
    fn required_counts() {
        use SensitivityDegree::*;
        assert_eq!(Least.required_count(5), 5);
        assert_eq!(Medium.required_count(5), 3);
        assert_eq!(High.required_count(5), 1);
        assert_eq!(Medium.required_count(2), 2);
        for n in 1..30 {
            for s in SensitivityDegree::ALL {
                let r = s.required_count(n);
                assert!((1..=n).contains(&r));
            }
        }
    }

    #[test]
    fn split_one_per_group() {
        let t = trace_of(&[Group::MD, Group::AD, Group::ED, Group::ND]);
        let g = split_by_group(&t);
        for grp in Group::ALL {
            assert_eq!(g[&grp].len(), 1);
        }
    }

    #[test]
    fn split_degenerate_all_night() {
        let t = trace_of(&[Group::ND; 7]);
        let g = split_by_group(&t);
        assert_eq!(g[&Group::ND].len(), 7);
        assert!(g[&Group::MD].is_empty() && g[&Group::AD].is_empty() && g[&Group::ED].is_empty());
    }

    #[test]
    fn split_counts_and_round_trip() {
        let groups: Vec<Group> = (0..180).map(|i| Group::ALL[(i * 7 + i / 3) % 4]).collect();
        let t = trace_of(&groups);
        let g = split_by_group(&t);
        // counting oracle
        for grp in Group::ALL {
            let expected = groups.iter().filter(|&&x| x == grp).count();
            assert_eq!(g[&grp].len(), expected);
        }
        let mut all: Vec<f64> = g.values().flat_map(|t| t.column("x").unwrap()).collect();
        all.sort_by(f64::total_cmp);
        let mut orig = t.column("x").unwrap();
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
        for sub in g.values() {
            let c = sub.column("x").unwrap();
            assert!(c.windows(2).all(|w| w[0] < w[1]), "order preserved");
        }
    }

    #[test]
    fn split_45_per_group() {
        let groups: Vec<Group> = (0..180).map(|i| Group::ALL[i % 4]).collect();
        let g = split_by_group(&trace_of(&groups));
        assert!(g.values().all(|t| t.len() == 45));
    }

    #[test]
    fn train_test_sizes() {
        let t = trace_of(&[Group::MD; 180]);
        let (train, test) = train_test_split(&t, 0.25, 7).unwrap();
        assert_eq!((train.len(), test.len()), (45, 135));
    }

    #[test]
    fn train_test_deterministic() {
        let t = trace_of(&[Group::MD; 4]);
        let a = train_test_split(&t, 0.25, 11).unwrap();
        let b = train_test_split(&t, 0.25, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 1);
    }

    #[test]
    fn train_test_seeds_differ() {
        let t = trace_of(&[Group::MD; 100]);
        let base = train_test_split(&t, 0.25, 0).unwrap().0.column("x").unwrap();
        let differing = (1..=20)
            .filter(|&s| train_test_split(&t, 0.25, s).unwrap().0.column("x").unwrap() != base)
            .count();
        assert_eq!(differing, 20);
    }

    #[test]
    fn train_test_rejects_bad_fraction() {
        let t = trace_of(&[Group::MD; 4]);
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(train_test_split(&t, f, 0), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn event_trace_alphabet() {
        let t = EventTrace::from_chars("BBEBCABEABDBBBEBCBAABBBEB");
        assert_eq!(t.len(), 25);
        assert_eq!(t.alphabet().len(), 5);
        assert_eq!(t.count("B"), 14);
        assert!(EventTrace::with_alphabet(vec!["Z".into()], ["A".to_string()].into()).is_err());
    }
}
