//! Inter-arrival curves of discrete event traces.
//!
//! For an event type `e` and window size `w`, consider every full window of
//! `w` consecutive events that starts with an occurrence of `e`. The maximum
//! curve records the largest count of `e` among those windows and the minimum
//! curve the smallest. Curves of many normal traces are aggregated into a mean
//! and a student-t confidence band per window size; a test trace is judged by
//! a Mann-Whitney test of its curves against the mean curves, and a failed
//! curve only counts as anomalous when its band exceedance reaches the
//! deviation threshold.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{EventTrace, SensitivityDegree};
use crate::stats::{self, mann_whitney_u};
use crate::{Error, Result};

pub const DEFAULT_W_DELTA: usize = 25;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SIGMA_TH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Min,
    Max,
}

/// Raw curve of one trace: `values[w - 1]` is the count for window size `w`.
/// Window sizes without a full window are absent, so the curve covers
/// `1..=values.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IacCurve {
    pub event: String,
    pub kind: CurveKind,
    pub values: Vec<u32>,
}

impl IacCurve {
    pub fn at(&self, w: usize) -> Option<u32> {
        w.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    /// Largest window size covered.
    pub fn max_window(&self) -> usize {
        self.values.len()
    }
}

/// Minimum and maximum inter-arrival curves of `event` for window sizes
/// `1..=w_delta`.
pub fn min_max_curves(trace: &EventTrace, event: &str, w_delta: usize) -> Result<(IacCurve, IacCurve)> {
    if w_delta == 0 {
        return Err(Error::Argument("maximum window size must be at least 1".into()));
    }
    let events = trace.events();
    let mut prefix = Vec::with_capacity(events.len() + 1);
    prefix.push(0u32);
    let mut starts = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let hit = e == event;
        if hit {
            starts.push(i);
        }
        prefix.push(prefix[i] + u32::from(hit));
    }
    let first = *starts.first().ok_or_else(|| Error::EventNotFound(event.into()))?;
    // Full windows exist for w <= len - first.
    let widest = w_delta.min(events.len() - first);
    let mut mins = Vec::with_capacity(widest);
    let mut maxs = Vec::with_capacity(widest);
    for w in 1..=widest {
        let mut lo = u32::MAX;
        let mut hi = 0;
        for &i in starts.iter().take_while(|&&i| i + w <= events.len()) {
            let c = prefix[i + w] - prefix[i];
            lo = lo.min(c);
            hi = hi.max(c);
        }
        mins.push(lo);
        maxs.push(hi);
    }
    Ok((
        IacCurve { event: event.into(), kind: CurveKind::Min, values: mins },
        IacCurve { event: event.into(), kind: CurveKind::Max, values: maxs },
    ))
}

/// Event types ordered by total frequency (descending, ties lexicographic),
/// truncated to the shortest prefix whose share of all events reaches
/// `significance_pct`.
pub fn select_feature_events(traces: &[EventTrace], significance_pct: f64) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in traces {
        for e in t.events() {
            *counts.entry(e.as_str()).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut chosen = Vec::new();
    let mut cumulative = 0;
    for (e, c) in ranked {
        if chosen.is_empty() || (cumulative as f64) * 100.0 < significance_pct * total as f64 {
            chosen.push(e.into());
            cumulative += c;
        } else {
            break;
        }
    }
    chosen
}

/// Mean curve with a two-sided confidence band, indexed like [`IacCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CurveBand {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// The six aggregated curves of one event type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventModel {
    pub min: CurveBand,
    pub max: CurveBand,
}

fn band(samples: &[&[u32]], width: usize, confidence: f64) -> CurveBand {
    let n = samples.len() as f64;
    let t = stats::student_t_quantile(0.5 + confidence / 2.0, n - 1.0);
    let mut out = CurveBand { mean: Vec::new(), lower: Vec::new(), upper: Vec::new() };
    let mut column = Vec::with_capacity(samples.len());
    for w in 0..width {
        column.clear();
        column.extend(samples.iter().map(|s| f64::from(s[w])));
        let m = stats::mean(&column);
        let half = t * libm::sqrt(stats::sample_variance(&column) / n);
        out.mean.push(m);
        out.lower.push(m - half);
        out.upper.push(m + half);
    }
    out
}

/// Aggregates per-trace `(min, max)` curves of one event into mean curves and
/// student-t confidence bands, over the window sizes every trace covers.
pub fn aggregate(curve_sets: &[(IacCurve, IacCurve)], confidence: f64) -> Result<EventModel> {
    if curve_sets.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "aggregation needs at least 2 training traces, got {}",
            curve_sets.len()
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Argument(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let width = curve_sets
        .iter()
        .map(|(lo, hi)| lo.values.len().min(hi.values.len()))
        .min()
        .unwrap_or(0);
    let mins: Vec<&[u32]> = curve_sets.iter().map(|(lo, _)| lo.values.as_slice()).collect();
    let maxs: Vec<&[u32]> = curve_sets.iter().map(|(_, hi)| hi.values.as_slice()).collect();
    Ok(EventModel { min: band(&mins, width, confidence), max: band(&maxs, width, confidence) })
}

/// Trained curve model: six curves per feature event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IacModel {
    pub events: BTreeMap<String, EventModel>,
    pub feature_events: Vec<String>,
    /// Every symbol seen in training.
    pub alphabet: BTreeSet<String>,
    pub confidence: f64,
    pub w_delta: usize,
}

/// Trains a model for `feature_events` from normal traces. Each event is
/// aggregated over the traces in which it occurs.
pub fn train_model(
    traces: &[EventTrace],
    feature_events: &[String],
    w_delta: usize,
    confidence: f64,
) -> Result<IacModel> {
    if feature_events.is_empty() {
        return Err(Error::Argument("at least one feature event is required".into()));
    }
    let mut events = BTreeMap::new();
    for e in feature_events {
        let curves = traces
            .iter()
            .filter(|t| t.count(e) > 0)
            .map(|t| min_max_curves(t, e, w_delta))
            .collect::<Result<Vec<_>>>()?;
        let model = aggregate(&curves, confidence)
            .map_err(|err| Error::InsufficientData(format!("event `{e}`: {err}")))?;
        events.insert(e.clone(), model);
    }
    let alphabet = traces.iter().flat_map(|t| t.alphabet().iter().cloned()).collect();
    Ok(IacModel { events, feature_events: feature_events.to_vec(), alphabet, confidence, w_delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventVerdict {
    pub event: String,
    pub passed_min: bool,
    pub passed_max: bool,
    /// Mean normalized band exceedance; `+inf` for behavior the model has
    /// never seen.
    pub deviation_min: f64,
    pub deviation_max: f64,
    pub anomalous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IacVerdict {
    pub events: Vec<EventVerdict>,
    pub anomalous: bool,
}

impl IacVerdict {
    pub fn anomalous_events(&self) -> usize {
        self.events.iter().filter(|v| v.anomalous).count()
    }
}

/// Mean over window sizes of how far `values` leaves `[lower, upper]`,
/// relative to `max(mean, 1)`.
fn deviation(values: &[u32], band: &CurveBand, width: usize) -> f64 {
    let total: f64 = (0..width)
        .map(|i| {
            let v = f64::from(values[i]);
            let outside = (band.lower[i] - v).max(v - band.upper[i]).max(0.0);
            outside / band.mean[i].max(1.0)
        })
        .sum();
    total / width as f64
}

// A failed curve is anomalous when its deviation reaches sigma_th; an infinite
// threshold disables the curve test.
fn curve_check(values: &[u32], band: &CurveBand, alpha: f64, sigma_th: f64) -> (bool, f64, bool) {
    let width = values.len().min(band.len());
    if width == 0 {
        return (false, f64::INFINITY, sigma_th.is_finite());
    }
    let test: Vec<f64> = values[..width].iter().map(|&v| f64::from(v)).collect();
    let passed = mann_whitney_u(&test, &band.mean[..width]).p >= alpha;
    let dev = deviation(values, band, width);
    let anomalous = !passed && sigma_th.is_finite() && dev >= sigma_th;
    (passed, dev, anomalous)
}

fn unseen(event: &str, sigma_th: f64) -> EventVerdict {
    EventVerdict {
        event: event.into(),
        passed_min: false,
        passed_max: false,
        deviation_min: f64::INFINITY,
        deviation_max: f64::INFINITY,
        anomalous: sigma_th.is_finite(),
    }
}

/// Classifies a test trace against a trained model.
///
/// Every feature event of the model is tested; events of the test trace that
/// never appeared in training are tested too and count as anomalous, as do
/// feature events missing from the test trace. The trace is anomalous when
/// the number of anomalous events reaches `sensitivity.required_count` of the
/// tested events (all, any three, any one).
pub fn classify_trace(
    test: &EventTrace,
    model: &IacModel,
    alpha: f64,
    sigma_th: f64,
    sensitivity: SensitivityDegree,
) -> Result<IacVerdict> {
    if test.is_empty() {
        return Err(Error::Argument("cannot classify an empty event trace".into()));
    }
    if !(sigma_th >= 0.0) {
        return Err(Error::Argument(format!("deviation threshold must be >= 0, got {sigma_th}")));
    }
    let mut verdicts = Vec::new();
    for e in &model.feature_events {
        let Some(em) = model.events.get(e) else {
            verdicts.push(unseen(e, sigma_th));
            continue;
        };
        if test.count(e) == 0 {
            verdicts.push(unseen(e, sigma_th));
            continue;
        }
        let (cmin, cmax) = min_max_curves(test, e, model.w_delta)?;
        let (passed_min, deviation_min, bad_min) = curve_check(&cmin.values, &em.min, alpha, sigma_th);
        let (passed_max, deviation_max, bad_max) = curve_check(&cmax.values, &em.max, alpha, sigma_th);
        verdicts.push(EventVerdict {
            event: e.clone(),
            passed_min,
            passed_max,
            deviation_min,
            deviation_max,
            anomalous: bad_min || bad_max,
        });
    }
    for e in test.alphabet() {
        if !model.alphabet.contains(e) {
            verdicts.push(unseen(e, sigma_th));
        }
    }
    let bad = verdicts.iter().filter(|v| v.anomalous).count();
    let anomalous = bad > 0 && bad >= sensitivity.required_count(verdicts.len());
    Ok(IacVerdict { events: verdicts, anomalous })
}
